/** Session state machine: instructions -> rating x24 -> completed.
 *
 * All state is authoritative on the server; this controller caches the
 * current screen and enforces the client-side invariants: submit only
 * with a complete draft, no navigation back to rated stimuli.
 */

import { ApiClient, ApiError, Cohort, Instructions, NextStimulus } from "./api.js";

export interface Draft {
  scale: number | null;
  percent: number | null;
}

export type Screen =
  | { kind: "connecting" }
  | { kind: "instructions"; instructions: Instructions }
  | {
      kind: "rating";
      stimulus: NextStimulus;
      draft: Draft;
      fieldError: string | null;
    }
  | { kind: "completed"; rated: number; total: number }
  | { kind: "unreachable"; message: string };

export function draftComplete(draft: Draft): boolean {
  return (
    draft.scale !== null &&
    draft.percent !== null &&
    Number.isInteger(draft.scale) &&
    Number.isInteger(draft.percent) &&
    draft.scale >= 1 &&
    draft.scale <= 5 &&
    draft.percent >= 0 &&
    draft.percent <= 100
  );
}

export class SessionController {
  private screen_: Screen = { kind: "connecting" };
  private sessionId: string | null = null;
  private listeners: Array<(screen: Screen) => void> = [];

  constructor(
    private readonly api: ApiClient,
    private readonly cohort: Cohort,
    private readonly seed: number = Date.now() % 1_000_000,
  ) {}

  get screen(): Screen {
    return this.screen_;
  }

  onChange(listener: (screen: Screen) => void): void {
    this.listeners.push(listener);
  }

  private setScreen(screen: Screen): void {
    this.screen_ = screen;
    for (const listener of this.listeners) listener(screen);
  }

  /** Fetch instructions; an unreachable API lands on the retry screen. */
  async start(): Promise<void> {
    this.setScreen({ kind: "connecting" });
    try {
      const instructions = await this.api.instructions();
      this.setScreen({ kind: "instructions", instructions });
    } catch (err) {
      this.setScreen({ kind: "unreachable", message: describe(err) });
    }
  }

  /** Leave the instructions screen: create the session, show stimulus 1.
   * Reconnecting to an existing session resumes at the first unrated
   * stimulus, because the server's /next is the only cursor. */
  async begin(): Promise<void> {
    try {
      if (this.sessionId === null) {
        const created = await this.api.createSession(this.cohort, this.seed);
        this.sessionId = created.session_id;
      }
      await this.advance();
    } catch (err) {
      this.setScreen({ kind: "unreachable", message: describe(err) });
    }
  }

  private async advance(): Promise<void> {
    if (this.sessionId === null) throw new Error("session not started");
    const next = await this.api.nextStimulus(this.sessionId);
    if (next.done) {
      this.setScreen({ kind: "completed", rated: next.rated, total: next.total });
    } else {
      this.setScreen({
        kind: "rating",
        stimulus: next,
        draft: { scale: null, percent: null },
        fieldError: null,
      });
    }
  }

  setScale(scale: number): void {
    if (this.screen_.kind !== "rating") return;
    this.setScreen({ ...this.screen_, draft: { ...this.screen_.draft, scale } });
  }

  setPercent(percent: number): void {
    if (this.screen_.kind !== "rating") return;
    this.setScreen({ ...this.screen_, draft: { ...this.screen_.draft, percent } });
  }

  get canSubmit(): boolean {
    return this.screen_.kind === "rating" && draftComplete(this.screen_.draft);
  }

  /** Post the draft; on acceptance advance, on a validation error show
   * the field at fault and stay. */
  async submit(): Promise<void> {
    if (this.screen_.kind !== "rating" || !this.canSubmit) return;
    const { stimulus, draft } = this.screen_;
    try {
      await this.api.submitRating(
        this.sessionId!,
        stimulus.stimulus_id,
        draft.scale!,
        draft.percent!,
      );
      await this.advance();
    } catch (err) {
      if (err instanceof ApiError && (err.kind === "range" || err.kind === "duplicate")) {
        this.setScreen({ ...this.screen_, fieldError: `${err.kind}: ${err.message}` });
        if (err.kind === "duplicate") await this.advance();
      } else {
        this.setScreen({ kind: "unreachable", message: describe(err) });
      }
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.kind}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}
