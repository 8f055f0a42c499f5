/**
 * Stop flow: a deliberately heavy confirmation for an irreversible action.
 *
 * The operator must type the experiment id verbatim before the submit is
 * allowed.  Submits are single-flight; a conflict (someone else stopped
 * first, or a double click racing the server) refreshes the snapshot and
 * surfaces the existing decision instead of failing.
 */

import { ApiClient, ApiError, DecisionRecord } from "./api.js";

export type StopState =
  | { kind: "idle" }
  | { kind: "confirming"; typed: string; armed: boolean }
  | { kind: "submitting" }
  | { kind: "decided"; record: DecisionRecord; via: "stop" | "conflict" }
  | { kind: "error"; message: string };

export class StopFlow {
  private state_: StopState = { kind: "idle" };
  private listeners: Array<(s: StopState) => void> = [];

  constructor(
    private readonly api: ApiClient,
    readonly experimentId: string,
  ) {}

  get state(): StopState {
    return this.state_;
  }

  onChange(listener: (s: StopState) => void): void {
    this.listeners.push(listener);
  }

  private setState(next: StopState): void {
    this.state_ = next;
    for (const l of this.listeners) l(next);
  }

  /** Open the confirmation; nothing is armed until the id is typed. */
  begin(): void {
    if (this.state_.kind === "submitting" || this.state_.kind === "decided") return;
    this.setState({ kind: "confirming", typed: "", armed: false });
  }

  cancel(): void {
    if (this.state_.kind === "confirming" || this.state_.kind === "error") {
      this.setState({ kind: "idle" });
    }
  }

  /** Track the confirmation input; arms only on an exact id match. */
  type(text: string): void {
    if (this.state_.kind !== "confirming") return;
    this.setState({ kind: "confirming", typed: text, armed: text === this.experimentId });
  }

  async submit(alpha: number, reason: string): Promise<void> {
    if (this.state_.kind !== "confirming" || !this.state_.armed) return;
    this.setState({ kind: "submitting" });
    try {
      const record = await this.api.stop(this.experimentId, alpha, reason);
      this.setState({ kind: "decided", record, via: "stop" });
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        // already stopped: show the decision that actually exists
        try {
          const snapshot = await this.api.snapshot(this.experimentId);
          const record = this.api.decisionFromSnapshot(snapshot);
          if (record) {
            this.setState({ kind: "decided", record, via: "conflict" });
            return;
          }
          this.setState({ kind: "error", message: "stopped, but no decision found" });
        } catch (inner) {
          this.setState({ kind: "error", message: String(inner) });
        }
        return;
      }
      this.setState({
        kind: "error",
        message: err instanceof Error ? err.message : String(err),
      });
    }
  }
}

/** Banner text for a decision, e.g. "Rejected at alpha 0.05". */
export function decisionBanner(record: DecisionRecord): string {
  const verdict = record.rejected ? "Rejected" : "Not rejected";
  return `${verdict} at alpha ${record.alpha} (stopped at update ${record.stopped_at})`;
}
