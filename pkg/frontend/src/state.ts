/**
 * View state: the session binding plus a revision watermark.
 * The UI never renders state older than the watermark; refreshing from
 * GET /api/sessions/{id} reproduces the whole view.
 */

import type { SessionState } from "./types.js";

export class ViewState {
  sessionId: string | null = null;
  state: SessionState | null = null;
  revision = -1;
  private listeners: (() => void)[] = [];

  bind(sessionId: string): void {
    this.sessionId = sessionId;
    this.state = null;
    this.revision = -1;
  }

  /** Accept a full session state unless it is older than the watermark. */
  accept(state: SessionState): boolean {
    if (state.revision < this.revision) {
      return false;
    }
    this.state = state;
    this.revision = state.revision;
    this.listeners.forEach((fn) => fn());
    return true;
  }

  /** Bump the watermark from a mutation response before the next refresh. */
  watermark(revision: number): void {
    if (revision > this.revision) {
      this.revision = revision;
    }
  }

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }
}
