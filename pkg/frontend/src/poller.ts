/**
 * Interval polling with per-poller in-flight deduplication.
 *
 * One poller per experiment: if a fetch is still outstanding when the next
 * tick fires, the tick is skipped instead of stacking a second request.
 * Errors go to an optional handler and never kill the loop; the next tick
 * retries.
 */

export const DEFAULT_POLL_INTERVAL_MS = 2000;

export interface Poller {
  start(): void;
  stop(): void;
  /** Run one fetch immediately (still deduplicated). */
  tickNow(): Promise<void>;
  readonly inFlight: boolean;
}

export function createPoller(
  fetchOnce: () => Promise<void>,
  options: { intervalMs?: number; onError?: (err: unknown) => void } = {},
): Poller {
  const intervalMs = options.intervalMs ?? DEFAULT_POLL_INTERVAL_MS;
  if (!Number.isFinite(intervalMs) || intervalMs <= 0) {
    throw new RangeError(`poll interval must be positive, got ${intervalMs}`);
  }
  let timer: ReturnType<typeof setInterval> | null = null;
  let inFlight = false;

  async function tick(): Promise<void> {
    if (inFlight) return;
    inFlight = true;
    try {
      await fetchOnce();
    } catch (err) {
      options.onError?.(err);
    } finally {
      inFlight = false;
    }
  }

  return {
    start() {
      if (timer !== null) return;
      void tick();
      timer = setInterval(() => void tick(), intervalMs);
    },
    stop() {
      if (timer !== null) {
        clearInterval(timer);
        timer = null;
      }
    },
    tickNow: tick,
    get inFlight() {
      return inFlight;
    },
  };
}
