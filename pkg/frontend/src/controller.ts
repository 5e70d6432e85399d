/**
 * Headless session controller: all moderation flow logic, no DOM.
 *
 * Owns the candidate card states (rank order is never changed), submits
 * judgments, stages them offline when the service is unreachable, flushes
 * the staged queue on reconnect, and mirrors the server's report for the
 * dashboard.  Card state only becomes "confirmed" after the service
 * acknowledges the judgment; the dashboard never computes metrics itself,
 * it re-fetches the report.
 */

import { ApiClient, ApiError } from "./api.js";
import { OfflineQueue } from "./queue.js";
import type { CandidateCard, Decision, SessionReport } from "./types.js";

export type ControllerEvent = "cards" | "report" | "connection";
type Listener = () => void;

export class SessionController {
  cards: CandidateCard[] = [];
  report: SessionReport | null = null;
  sessionId = "";
  online = true;

  private listeners = new Map<ControllerEvent, Set<Listener>>();

  constructor(
    private readonly api: ApiClient,
    private readonly queue: OfflineQueue,
    public readonly annotator: string,
  ) {}

  on(event: ControllerEvent, listener: Listener): void {
    if (!this.listeners.has(event)) this.listeners.set(event, new Set());
    this.listeners.get(event)!.add(listener);
  }

  private emit(event: ControllerEvent): void {
    for (const listener of this.listeners.get(event) ?? []) listener();
  }

  /** Load a session's frozen candidate list, in rank order. */
  async load(sessionId: string): Promise<void> {
    const candidates = await this.api.getCandidates(sessionId);
    this.sessionId = sessionId;
    this.cards = candidates.map((candidate) => ({
      candidate,
      keyword: "pending" as Decision,
      music: "pending" as Decision,
      saving: false,
      staged: false,
    }));
    this.emit("cards");
    await this.refreshReport();
  }

  pendingCount(): number {
    return this.cards.filter((c) => c.keyword === "pending" && c.music === "pending").length;
  }

  stagedCount(): number {
    return this.queue.size;
  }

  /**
   * Record one decision on a card and submit the card's combined judgment.
   *
   * A judgment carries both booleans; an undecided half is submitted as
   * "no" and can be flipped later (the service overwrites on resubmission).
   * The card state flips only after the acknowledgment; connection failures
   * stage the judgment locally instead of losing it.
   */
  async judge(index: number, kind: "keyword" | "music", value: boolean): Promise<void> {
    const card = this.cards[index];
    if (!card || card.saving) return;
    const next = {
      keyword: kind === "keyword" ? (value ? "yes" : "no") : card.keyword,
      music: kind === "music" ? (value ? "yes" : "no") : card.music,
    } as const;
    const judgment = {
      utterance_id: card.candidate.utterance_id,
      keyword: card.candidate.keyword,
      contains_keyword: next.keyword === "yes",
      contains_music: next.music === "yes",
      annotator: this.annotator,
    };
    card.saving = true;
    this.emit("cards");
    try {
      await this.api.submitJudgment(this.sessionId, judgment);
      card.keyword = next.keyword;
      card.music = next.music;
      card.staged = false;
      this.setOnline(true);
    } catch (error) {
      if (error instanceof ApiError) {
        card.saving = false;
        this.emit("cards");
        throw error; // a real rejection (404/422): surface it, nothing to stage
      }
      // network failure: stage locally, reflect the decision as unconfirmed
      this.queue.push({ sessionId: this.sessionId, judgment });
      card.keyword = next.keyword;
      card.music = next.music;
      card.staged = true;
      this.setOnline(false);
    } finally {
      card.saving = false;
    }
    this.emit("cards");
    if (this.online) await this.refreshReport();
  }

  /** Flush staged judgments in order; stops at the first network failure. */
  async flush(): Promise<number> {
    let flushed = 0;
    while (this.queue.size > 0) {
      const staged = this.queue.peek()!;
      try {
        await this.api.submitJudgment(staged.sessionId, staged.judgment);
      } catch (error) {
        if (error instanceof ApiError) {
          this.queue.shift(); // permanently rejected; drop so the queue drains
          continue;
        }
        this.setOnline(false);
        return flushed;
      }
      this.queue.shift();
      flushed += 1;
    }
    if (flushed > 0 || this.queue.size === 0) this.setOnline(true);
    if (flushed > 0) {
      for (const card of this.cards) {
        if (card.staged) card.staged = false;
      }
      this.emit("cards");
      await this.refreshReport();
    }
    return flushed;
  }

  async refreshReport(): Promise<void> {
    if (!this.sessionId) return;
    try {
      this.report = await this.api.getReport(this.sessionId);
      this.setOnline(true);
      this.emit("report");
    } catch (error) {
      if (!(error instanceof ApiError)) this.setOnline(false);
    }
  }

  private setOnline(value: boolean): void {
    if (this.online !== value) {
      this.online = value;
      this.emit("connection");
    }
  }
}
