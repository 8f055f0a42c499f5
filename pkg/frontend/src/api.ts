/**
 * Typed client for the experiment service HTTP API.
 *
 * Responses that feed the UI are fetched as raw text and parsed with the
 * verbatim-number parser, so no displayed digit is ever re-encoded on the
 * client.
 */

import { parseRawJson, RawJson, RawNumber } from "./json.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get isNotFound(): boolean {
    return this.status === 404;
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export interface HistoryEvent {
  seq: number;
  p_value: RawNumber;
  chance_to_beat: RawNumber;
  ci_by_level: Record<string, [RawNumber | null, RawNumber | null]>;
  total_observations: RawNumber;
}

export interface HistoryPage {
  after: number;
  as_of: number;
  events: HistoryEvent[];
}

export interface OverviewRow {
  id: string;
  status: string;
  p_value: RawNumber;
  q_value: RawNumber;
  chance_to_beat: RawNumber;
  rejected: boolean;
  selected: boolean;
  ci_level: RawNumber;
  ci_level_requested: RawNumber;
  ci_level_capped: boolean;
  ci: [RawNumber | null, RawNumber | null] | null;
}

export interface OverviewResponse {
  alpha: RawNumber;
  procedure: string;
  fcr: boolean;
  rows: OverviewRow[];
  /** The exact response body, for fixture comparison and audit. */
  rawBody: string;
}

export interface DecisionRecord {
  experiment_id: string;
  alpha: RawNumber;
  rejected: boolean;
  stopped_at: number;
  actor: string;
  reason: string;
}

export interface SnapshotView {
  id: string;
  status: string;
  as_of: number;
  p_value: RawNumber;
  chance_to_beat: RawNumber;
  decision: RawJson | null;
}

async function request(url: string, init?: RequestInit): Promise<string> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, err instanceof Error ? err.message : String(err));
  }
  const body = await response.text();
  if (!response.ok) {
    let detail = body;
    try {
      const parsed = JSON.parse(body) as { error?: string };
      if (typeof parsed.error === "string") detail = parsed.error;
    } catch {
      // non-JSON error body, keep as is
    }
    throw new ApiError(response.status, detail);
  }
  return body;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async history(id: string, after: number): Promise<HistoryPage> {
    const body = await request(
      this.url(`/experiments/${encodeURIComponent(id)}/history?after=${after}`),
    );
    const parsed = parseRawJson(body) as { [k: string]: RawJson };
    return {
      after: Number(parsed.after as RawNumber),
      as_of: Number(parsed.as_of as RawNumber),
      events: (parsed.events as RawJson[]).map((e) => {
        const ev = e as { [k: string]: RawJson };
        return {
          seq: Number(ev.seq as RawNumber),
          p_value: ev.p_value as RawNumber,
          chance_to_beat: ev.chance_to_beat as RawNumber,
          ci_by_level: ev.ci_by_level as HistoryEvent["ci_by_level"],
          total_observations: ev.total_observations as RawNumber,
        };
      }),
    };
  }

  async snapshot(id: string): Promise<SnapshotView> {
    const body = await request(this.url(`/experiments/${encodeURIComponent(id)}/snapshot`));
    const parsed = parseRawJson(body) as { [k: string]: RawJson };
    return {
      id: parsed.id as string,
      status: parsed.status as string,
      as_of: Number(parsed.as_of as RawNumber),
      p_value: parsed.p_value as RawNumber,
      chance_to_beat: parsed.chance_to_beat as RawNumber,
      decision: parsed.decision ?? null,
    };
  }

  async overview(params: {
    alpha: number;
    procedure: string;
    fcr?: boolean;
    selection?: string[];
  }): Promise<OverviewResponse> {
    const query = new URLSearchParams({
      alpha: String(params.alpha),
      procedure: params.procedure,
      fcr: params.fcr ? "true" : "false",
    });
    if (params.selection && params.selection.length > 0) {
      query.set("selection", params.selection.join(","));
    }
    const body = await request(this.url(`/overview?${query.toString()}`));
    const parsed = parseRawJson(body) as { [k: string]: RawJson };
    return {
      alpha: parsed.alpha as RawNumber,
      procedure: parsed.procedure as string,
      fcr: parsed.fcr as boolean,
      rows: (parsed.rows as RawJson[]).map((r) => r as unknown as OverviewRow),
      rawBody: body,
    };
  }

  /** POST /stop; the returned record is frozen because a decision is final. */
  async stop(id: string, alpha: number, reason: string): Promise<DecisionRecord> {
    const body = await request(
      this.url(`/experiments/${encodeURIComponent(id)}/stop`),
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ alpha, reason, actor: "dashboard" }),
      },
    );
    const parsed = parseRawJson(body) as { [k: string]: RawJson };
    return Object.freeze({
      experiment_id: parsed.experiment_id as string,
      alpha: parsed.alpha as RawNumber,
      rejected: parsed.rejected as boolean,
      stopped_at: Number(parsed.stopped_at as RawNumber),
      actor: parsed.actor as string,
      reason: parsed.reason as string,
    });
  }

  /** Rebuild the decision view from a snapshot (used on the conflict path). */
  decisionFromSnapshot(snapshot: SnapshotView): DecisionRecord | null {
    const d = snapshot.decision;
    if (d === null || typeof d !== "object" || Array.isArray(d)) return null;
    const rec = d as { [k: string]: RawJson };
    return Object.freeze({
      experiment_id: snapshot.id,
      alpha: rec.alpha as RawNumber,
      rejected: rec.rejected as boolean,
      stopped_at: Number(rec.stopped_at as RawNumber),
      actor: (rec.actor as string) ?? "",
      reason: (rec.reason as string) ?? "",
    });
  }
}
