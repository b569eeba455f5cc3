// Live polling over the journal's `since` cursor. Responses are applied
// monotonically: anything older than the cursor is stale and discarded.

import { EventsResponse } from "./types.js";

export interface Cursor {
  seq: number;
}

export interface CursorUpdate {
  cursor: Cursor;
  /** True when the response moved the cursor forward. */
  fresh: boolean;
  /** True when the response was older than the cursor and was discarded. */
  stale: boolean;
}

export function advanceCursor(cursor: Cursor, response: EventsResponse): CursorUpdate {
  if (response.last_seq < cursor.seq) {
    return { cursor, fresh: false, stale: true };
  }
  const fresh = response.last_seq > cursor.seq || response.events.length > 0;
  return { cursor: { seq: response.last_seq }, fresh, stale: false };
}

export interface PollHandle {
  stop(): void;
}

/**
 * Serialized polling loop: the next tick is scheduled only after the
 * previous one settles, so requests never overlap within a view.
 */
export function startPolling(tick: () => Promise<void>, intervalMs: number): PollHandle {
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const loop = async () => {
    if (stopped) return;
    try {
      await tick();
    } catch {
      // transient fetch errors are the banner's job; keep polling
    }
    if (!stopped) timer = setTimeout(loop, intervalMs);
  };
  timer = setTimeout(loop, intervalMs);
  return {
    stop() {
      stopped = true;
      if (timer !== null) clearTimeout(timer);
    },
  };
}
