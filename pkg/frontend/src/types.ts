/** Response shapes of the annotator HTTP API, as documented by the server. */

export type SessionKind = "turing" | "labeling";

export type TuringChoice = "real" | "synthetic";
export type LabelingChoice = "present" | "absent";
export type Choice = TuringChoice | LabelingChoice;

export interface SessionCreated {
  session_id: string;
}

/** GET /api/sessions/{id}/next while items remain. */
export interface NextItem {
  item_id: string;
  text: string;
  position: number;
  total: number;
}

/** GET /api/sessions/{id}/next once every item is judged. */
export interface SessionDone {
  done: true;
  total: number;
}

export type NextResponse = NextItem | SessionDone;

export function isDone(response: NextResponse): response is SessionDone {
  return (response as SessionDone).done === true;
}

export interface JudgmentAck {
  ok: boolean;
  remaining: number;
  status: "open" | "complete";
}

export interface TuringReport {
  kind: "turing";
  session_id: string;
  entity: string;
  partial: boolean;
  n_synth: number;
  n_real: number;
  correct_synth: number;
  correct_real: number;
  accuracy_synth: number | null;
  accuracy_real: number | null;
  p_value_synth: number;
  p_value_real: number;
}

export interface HumanLabel {
  note_id: string;
  entity: string;
  label: string;
  origin: "human";
}

export interface LabelingReport {
  kind: "labeling";
  session_id: string;
  entity: string;
  partial: boolean;
  labels: HumanLabel[];
}

export type SessionReport = TuringReport | LabelingReport;

export interface SessionSummary {
  session_id: string;
  kind: SessionKind;
  entity: string;
  status: "open" | "complete";
  judged: number;
  total: number;
}

export interface SessionList {
  sessions: SessionSummary[];
}
