/**
 * Offline staging queue for judgments.
 *
 * Submissions that fail because the service is unreachable are staged here
 * (persisted through a localStorage-compatible store) and flushed in order
 * on reconnect.  The queue is append-only: if a moderator flips a decision
 * while offline, both entries flush and the server's latest-wins semantics
 * resolve them, keeping the audit trail truthful.
 */

import type { JudgmentSubmission } from "./types.js";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface StagedJudgment {
  sessionId: string;
  judgment: JudgmentSubmission;
}

/** In-memory stand-in for localStorage (tests, non-browser runs). */
export class MemoryStore implements KeyValueStore {
  private data = new Map<string, string>();

  getItem(key: string): string | null {
    return this.data.has(key) ? (this.data.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }

  removeItem(key: string): void {
    this.data.delete(key);
  }
}

export class OfflineQueue {
  constructor(
    private readonly store: KeyValueStore,
    private readonly key: string = "awekws.staged",
  ) {}

  private read(): StagedJudgment[] {
    const raw = this.store.getItem(this.key);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as StagedJudgment[];
    } catch {
      return [];
    }
  }

  private write(items: StagedJudgment[]): void {
    if (items.length === 0) {
      this.store.removeItem(this.key);
    } else {
      this.store.setItem(this.key, JSON.stringify(items));
    }
  }

  get size(): number {
    return this.read().length;
  }

  all(): StagedJudgment[] {
    return this.read();
  }

  push(item: StagedJudgment): void {
    const items = this.read();
    items.push(item);
    this.write(items);
  }

  peek(): StagedJudgment | undefined {
    return this.read()[0];
  }

  shift(): StagedJudgment | undefined {
    const items = this.read();
    const first = items.shift();
    this.write(items);
    return first;
  }
}
