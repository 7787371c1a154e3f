/** Scripted browser test: a 10-item turing session end to end, keyboard
 * and button parity, and verbatim report display. */

import { beforeEach, describe, expect, it } from "vitest";

import { AnnotatorApp } from "../src/app.js";
import type { TuringReport } from "../src/types.js";
import {
  clickChoice,
  makeApp,
  pressKey,
  serverBase,
  setInput,
  waitFor,
} from "./helpers.js";

function fillStartForm(seed: number): void {
  setInput("field-entity", "pleural effusion");
  setInput("field-n-synth", "5");
  setInput("field-n-real", "5");
  setInput("field-seed", String(seed));
  setInput("field-session-id", "");
}

async function startSession(app: AnnotatorApp, seed: number): Promise<void> {
  fillStartForm(seed);
  await app.startFromForm();
  await waitFor(() => app.state.current !== null);
}

async function fetchReport(sessionId: string): Promise<TuringReport> {
  const response = await fetch(
    `${serverBase()}/api/sessions/${sessionId}/report`,
  );
  return (await response.json()) as TuringReport;
}

describe("blinded session flow", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("completes a 10-item turing session end to end", async () => {
    const app = makeApp();
    await startSession(app, 11);

    expect(app.state.current?.position).toBe(1);
    expect(app.state.current?.total).toBe(10);
    expect(document.getElementById("view-judge")?.hidden).toBe(false);
    expect(document.getElementById("note-text")?.textContent).not.toBe("");

    for (let i = 0; i < 10; i += 1) {
      const before = app.state.current?.item_id;
      clickChoice(i % 2 === 0 ? 0 : 1);
      await waitFor(
        () => app.state.finished || app.state.current?.item_id !== before,
      );
    }
    await waitFor(() => app.state.finished);
    expect(document.getElementById("view-report")?.hidden).toBe(false);

    const report = await fetchReport(app.state.sessionId as string);
    expect(report.partial).toBe(false);
    expect(report.n_synth + report.n_real).toBe(10);
  });

  it("keyboard and button paths produce identical server state", async () => {
    const choices: ("real" | "synthetic")[] = [
      "real", "synthetic", "synthetic", "real", "real",
      "synthetic", "real", "synthetic", "real", "real",
    ];

    const byButton = makeApp();
    await startSession(byButton, 99);
    for (const choice of choices) {
      const before = byButton.state.current?.item_id;
      const buttons = document.querySelectorAll<HTMLButtonElement>(
        "button[data-choice]",
      );
      const button = Array.from(buttons).find(
        (b) => b.dataset.choice === choice,
      )!;
      button.click();
      await waitFor(
        () => byButton.state.finished
          || byButton.state.current?.item_id !== before,
      );
    }
    await waitFor(() => byButton.state.finished);

    const byKeyboard = makeApp();
    await startSession(byKeyboard, 99); // same seed: same item order
    for (const choice of choices) {
      const before = byKeyboard.state.current?.item_id;
      pressKey(choice === "real" ? "r" : "s");
      await waitFor(
        () => byKeyboard.state.finished
          || byKeyboard.state.current?.item_id !== before,
      );
    }
    await waitFor(() => byKeyboard.state.finished);

    const reportA = await fetchReport(byButton.state.sessionId as string);
    const reportB = await fetchReport(byKeyboard.state.sessionId as string);
    expect(reportB.correct_synth).toBe(reportA.correct_synth);
    expect(reportB.correct_real).toBe(reportA.correct_real);
    expect(reportB.p_value_synth).toBe(reportA.p_value_synth);
    expect(reportB.p_value_real).toBe(reportA.p_value_real);
    expect(reportB.partial).toBe(false);
  });

  it("report view displays server-computed values verbatim", async () => {
    const app = makeApp();
    await startSession(app, 7);
    while (!app.state.finished) {
      const before = app.state.current?.item_id;
      pressKey("r"); // judge everything "real"
      await waitFor(
        () => app.state.finished || app.state.current?.item_id !== before,
      );
    }
    const report = await fetchReport(app.state.sessionId as string);
    const shown = document.getElementById("report-body")?.textContent ?? "";
    expect(shown).toContain(String(report.correct_synth));
    expect(shown).toContain(String(report.correct_real));
    expect(shown).toContain(String(report.p_value_synth));
    expect(shown).toContain(String(report.p_value_real));
    expect(shown).toContain(String(report.accuracy_real));
  });

  it("double clicks advance exactly one item", async () => {
    const app = makeApp();
    await startSession(app, 31);
    const first = app.state.current?.item_id;
    clickChoice(0);
    clickChoice(0); // second click while the first is in flight
    await waitFor(() => app.state.current?.item_id !== first);
    expect(app.state.current?.position).toBe(2);

    const listing = await (
      await fetch(`${serverBase()}/api/sessions`)
    ).json() as { sessions: { session_id: string; judged: number }[] };
    const mine = listing.sessions.find(
      (s) => s.session_id === app.state.sessionId,
    );
    expect(mine?.judged).toBe(1);
  });

  it("resuming an existing session shows the first unjudged item", async () => {
    const app = makeApp();
    await startSession(app, 55);
    pressKey("r");
    await waitFor(() => app.state.current?.position === 2);
    const sessionId = app.state.sessionId as string;
    const pending = app.state.current?.item_id;

    // fresh page, resume by id (same as a refresh mid-session)
    const resumed = makeApp();
    setInput("field-session-id", sessionId);
    await resumed.startFromForm();
    await waitFor(() => resumed.state.current !== null);
    expect(resumed.state.current?.item_id).toBe(pending);
    expect(resumed.state.current?.position).toBe(2);
  });

  it("labeling mode uses P/A shortcuts and exports human labels", async () => {
    const app = makeApp();
    (document.getElementById("field-kind") as HTMLSelectElement).value =
      "labeling";
    setInput("field-entity", "pleural effusion");
    setInput("field-n-synth", "2");
    setInput("field-n-real", "2");
    setInput("field-seed", "13");
    setInput("field-session-id", "");
    await app.startFromForm();
    await waitFor(() => app.state.current !== null);
    expect(app.state.mode).toBe("labeling");

    const keys = ["p", "a", "p", "a"];
    for (const key of keys) {
      const before = app.state.current?.item_id;
      pressKey(key);
      await waitFor(
        () => app.state.finished || app.state.current?.item_id !== before,
      );
    }
    await waitFor(() => app.state.finished);
    const report = await (
      await fetch(
        `${serverBase()}/api/sessions/${app.state.sessionId}/report`,
      )
    ).json() as { kind: string; labels: { label: string }[] };
    expect(report.kind).toBe("labeling");
    expect(report.labels.map((l) => l.label)).toEqual([
      "present", "absent", "present", "absent",
    ]);
  });

  it("API failure shows the error banner without crashing", async () => {
    document.body.innerHTML = "";
    const html = document.createElement("div");
    document.body.append(html);
    const app = new AnnotatorApp(
      document,
      "http://127.0.0.1:1", // nothing listens here
      (input, init) => fetch(input, init),
    );
    // mount real markup for the app to drive
    const { mountPage } = await import("./helpers.js");
    mountPage();
    app.init();
    fillStartForm(1);
    await app.startFromForm();
    await waitFor(
      () => document.getElementById("error-banner")?.hidden === false,
    );
    expect(
      document.getElementById("error-message")?.textContent,
    ).toContain("error");
  });
});
