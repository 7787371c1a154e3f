/** Single-page blinded annotation flow: one large note pane, two choice
 * buttons (or keyboard shortcuts), a progress bar, and a report view.
 * The server is the source of truth; the client holds no hidden fields. */

import { AnnotatorClient, ApiError, type FetchLike } from "./api.js";
import {
  isDone,
  type Choice,
  type NextItem,
  type SessionKind,
  type SessionReport,
} from "./types.js";

export interface ViewState {
  sessionId: string | null;
  mode: SessionKind;
  current: NextItem | null;
  finished: boolean;
}

const CHOICES: Record<SessionKind, [Choice, Choice]> = {
  turing: ["real", "synthetic"],
  labeling: ["present", "absent"],
};

const KEY_BINDINGS: Record<SessionKind, Record<string, Choice>> = {
  turing: { r: "real", s: "synthetic" },
  labeling: { p: "present", a: "absent" },
};

export class AnnotatorApp {
  readonly client: AnnotatorClient;
  state: ViewState = {
    sessionId: null,
    mode: "turing",
    current: null,
    finished: false,
  };
  private busy = false;
  private retryAction: (() => Promise<void>) | null = null;

  constructor(
    private readonly root: Document,
    baseUrl = "",
    fetchFn?: FetchLike,
  ) {
    this.client = new AnnotatorClient(baseUrl, fetchFn);
  }

  init(): void {
    this.element("start-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void this.startFromForm();
    });
    for (const button of this.choiceButtons()) {
      button.addEventListener("click", () => {
        void this.judge(button.dataset.choice as Choice);
      });
    }
    this.root.addEventListener("keydown", (event) => {
      const key = (event as KeyboardEvent).key.toLowerCase();
      const choice = KEY_BINDINGS[this.state.mode][key];
      if (choice && this.state.current && !this.state.finished) {
        void this.judge(choice);
      }
    });
    this.element("error-retry").addEventListener("click", () => {
      void this.retryLast();
    });
    this.showView("setup");
  }

  // -- views --------------------------------------------------------------

  private element(id: string): HTMLElement {
    const node = this.root.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  }

  private choiceButtons(): HTMLButtonElement[] {
    return Array.from(
      this.root.querySelectorAll<HTMLButtonElement>("button[data-choice]"),
    );
  }

  private showView(name: "setup" | "judge" | "report"): void {
    for (const view of ["setup", "judge", "report"]) {
      this.element(`view-${view}`).hidden = view !== name;
    }
  }

  private showError(message: string, retry: (() => Promise<void>) | null): void {
    this.retryAction = retry;
    const banner = this.element("error-banner");
    banner.hidden = false;
    this.element("error-message").textContent = message;
    (this.element("error-retry") as HTMLButtonElement).hidden = retry === null;
  }

  private clearError(): void {
    this.element("error-banner").hidden = true;
    this.retryAction = null;
  }

  private async retryLast(): Promise<void> {
    const action = this.retryAction;
    this.clearError();
    if (action) await action();
  }

  // -- session flow ---------------------------------------------------------

  async startFromForm(): Promise<void> {
    const mode = (this.element("field-kind") as HTMLSelectElement)
      .value as SessionKind;
    const resumeId = (
      this.element("field-session-id") as HTMLInputElement
    ).value.trim();
    this.state.mode = mode;
    if (resumeId) {
      await this.resume(resumeId);
      return;
    }
    const form = {
      kind: mode,
      entity: (this.element("field-entity") as HTMLInputElement).value,
      n_synth: Number(
        (this.element("field-n-synth") as HTMLInputElement).value,
      ),
      n_real: Number((this.element("field-n-real") as HTMLInputElement).value),
      seed: Number((this.element("field-seed") as HTMLInputElement).value),
    };
    const start = async () => {
      this.clearError();
      try {
        const created = await this.client.createSession(form);
        this.state.sessionId = created.session_id;
        this.element("session-id-label").textContent = created.session_id;
        await this.loadNext();
      } catch (error) {
        this.showError(describe(error), start);
      }
    };
    await start();
  }

  async resume(sessionId: string): Promise<void> {
    this.state.sessionId = sessionId;
    this.element("session-id-label").textContent = sessionId;
    const load = async () => {
      this.clearError();
      try {
        await this.loadNext();
      } catch (error) {
        this.showError(describe(error), load);
      }
    };
    await load();
  }

  private async loadNext(): Promise<void> {
    if (!this.state.sessionId) return;
    const next = await this.client.nextItem(this.state.sessionId);
    if (isDone(next)) {
      this.state.current = null;
      this.state.finished = true;
      await this.showReport();
      return;
    }
    this.state.current = next;
    this.state.finished = false;
    this.renderItem(next);
  }

  private renderItem(item: NextItem): void {
    this.showView("judge");
    this.element("note-text").textContent = item.text;
    this.element("progress-label").textContent =
      `${item.position} of ${item.total}`;
    const fraction = ((item.position - 1) / item.total) * 100;
    this.element("progress-fill").style.width = `${fraction}%`;
    const [first, second] = CHOICES[this.state.mode];
    const buttons = this.choiceButtons();
    buttons[0].dataset.choice = first;
    buttons[0].textContent = `${capitalize(first)} (${first[0].toUpperCase()})`;
    buttons[1].dataset.choice = second;
    buttons[1].textContent =
      `${capitalize(second)} (${second[0].toUpperCase()})`;
  }

  async judge(choice: Choice): Promise<void> {
    const item = this.state.current;
    if (!item || !this.state.sessionId || this.busy) return; // debounce
    this.busy = true;
    try {
      this.clearError();
      await this.client.submitJudgment(this.state.sessionId, item.item_id, choice);
      await this.loadNext();
    } catch (error) {
      this.showError(describe(error), () => this.judge(choice));
    } finally {
      this.busy = false;
    }
  }

  // -- report ---------------------------------------------------------------

  private async showReport(): Promise<void> {
    if (!this.state.sessionId) return;
    const report = await this.client.report(this.state.sessionId);
    this.renderReport(report);
  }

  /** Displays server-computed values verbatim: numbers are stringified
   * without client-side rounding. */
  renderReport(report: SessionReport): void {
    this.showView("report");
    const table = this.element("report-body");
    table.textContent = "";
    const row = (label: string, value: string) => {
      const tr = this.root.createElement("tr");
      const th = this.root.createElement("th");
      th.textContent = label;
      const td = this.root.createElement("td");
      td.textContent = value;
      tr.append(th, td);
      table.append(tr);
    };
    row("Session", report.session_id);
    row("Entity", report.entity || "(none)");
    row("Complete", report.partial ? "no (partial)" : "yes");
    if (report.kind === "turing") {
      row("Synthetic notes", String(report.n_synth));
      row("Correct on synthetic", String(report.correct_synth));
      row(
        "Accuracy on synthetic",
        report.accuracy_synth === null ? "n/a" : String(report.accuracy_synth),
      );
      row("P-value (synthetic)", String(report.p_value_synth));
      row("Real notes", String(report.n_real));
      row("Correct on real", String(report.correct_real));
      row(
        "Accuracy on real",
        report.accuracy_real === null ? "n/a" : String(report.accuracy_real),
      );
      row("P-value (real)", String(report.p_value_real));
    } else {
      row("Labels collected", String(report.labels.length));
      for (const label of report.labels) {
        row(label.note_id, label.label);
      }
    }
  }
}

function capitalize(word: string): string {
  return word.charAt(0).toUpperCase() + word.slice(1);
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `Server error: ${error.message}`;
  if (error instanceof Error) return `Network error: ${error.message}`;
  return "Unknown error";
}
