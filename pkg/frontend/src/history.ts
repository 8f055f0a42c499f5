/**
 * Per-experiment live series fed by the incremental history cursor.
 *
 * Points are keyed by the server's sequence number.  Appends accept only
 * events beyond the cursor, so re-polling after a reconnect or a server
 * replay is idempotent: the same events land in the same places and
 * duplicates are dropped.
 */

import { HistoryEvent } from "./api.js";
import { RawNumber, toNumber } from "./json.js";

export interface SeriesPoint {
  seq: number;
  /** "chance to beat baseline", verbatim from the server */
  chanceToBeat: RawNumber;
  pValue: RawNumber;
  ciByLevel: Record<string, [RawNumber | null, RawNumber | null]>;
}

export class HistorySeries {
  private readonly byId: string;
  private points_: SeriesPoint[] = [];
  private cursor_ = 0;

  constructor(experimentId: string) {
    this.byId = experimentId;
  }

  get experimentId(): string {
    return this.byId;
  }

  get cursor(): number {
    return this.cursor_;
  }

  get points(): readonly SeriesPoint[] {
    return this.points_;
  }

  /**
   * Fold in one history page; returns how many points were appended.
   * Events at or below the cursor are ignored (idempotence); the rest must
   * arrive in increasing seq order, which the server guarantees.
   */
  append(events: readonly HistoryEvent[]): number {
    let added = 0;
    for (const event of events) {
      if (event.seq <= this.cursor_) continue;
      this.points_.push({
        seq: event.seq,
        chanceToBeat: event.chance_to_beat,
        pValue: event.p_value,
        ciByLevel: event.ci_by_level,
      });
      this.cursor_ = event.seq;
      added += 1;
    }
    return added;
  }

  /** seqs strictly increasing; used by tests and the chart's sanity check. */
  isStrictlyIncreasing(): boolean {
    for (let i = 1; i < this.points_.length; i++) {
      if (this.points_[i]!.seq <= this.points_[i - 1]!.seq) return false;
    }
    return true;
  }

  /** The displayed 1-p series never decreases (mirrors server monotonicity). */
  isNondecreasing(): boolean {
    for (let i = 1; i < this.points_.length; i++) {
      if (toNumber(this.points_[i]!.chanceToBeat) < toNumber(this.points_[i - 1]!.chanceToBeat)) {
        return false;
      }
    }
    return true;
  }
}
