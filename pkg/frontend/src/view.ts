/**
 * DOM rendering for the moderator console.
 *
 * Pure view layer over SessionController state: candidate cards in rank
 * order (never re-sorted), one audio player per card backed by the
 * service's segment endpoint, yes/no buttons for keyword and music, a
 * pending counter, a connection banner, and the live report panel fed
 * verbatim from the service report.
 *
 * Keyboard: j/k move the cursor, y/n mark keyword yes/no, m/u mark music
 * yes/no, space plays the focused card's audio.
 */

import type { ApiClient } from "./api.js";
import type { SessionController } from "./controller.js";
import type { CandidateCard, SessionReport } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pct(value: number | null): string {
  return value === null ? "–" : `${(value * 100).toFixed(0)}%`;
}

export class SessionView {
  private cursor = 0;
  private cardNodes: HTMLElement[] = [];
  private banner!: HTMLElement;
  private meta!: HTMLElement;
  private reportPanel!: HTMLElement;
  private cardList!: HTMLElement;
  private readonly keyHandler = (event: KeyboardEvent) => this.onKey(event);

  constructor(
    private readonly root: HTMLElement,
    private readonly controller: SessionController,
    private readonly api: ApiClient,
  ) {
    controller.on("cards", () => this.renderCards());
    controller.on("report", () => this.renderReport());
    controller.on("connection", () => this.renderBanner());
  }

  mount(): void {
    this.root.innerHTML = "";
    this.banner = this.buildBanner();
    const header = el("header");
    header.append(el("h1", undefined, `Session ${this.controller.sessionId}`));
    this.meta = el("div", "meta");
    header.append(this.meta);
    this.reportPanel = el("section", "report");
    this.cardList = el("section", "cards");
    this.root.append(this.banner, header, this.reportPanel, this.cardList);
    this.renderBanner();
    this.renderCards();
    this.renderReport();
    document.addEventListener("keydown", this.keyHandler);
  }

  /** Detach document-level listeners (tests, page teardown). */
  dispose(): void {
    document.removeEventListener("keydown", this.keyHandler);
  }

  private buildBanner(): HTMLElement {
    const banner = el("div", "banner hidden");
    banner.append(
      el("span", undefined, "Service unreachable — judgments are staged locally. "),
    );
    const retry = el("button", undefined, "Retry now");
    retry.addEventListener("click", () => void this.controller.flush());
    banner.append(retry);
    return banner;
  }

  private renderBanner(): void {
    this.banner.classList.toggle("hidden", this.controller.online);
  }

  private renderMeta(): void {
    const staged = this.controller.stagedCount();
    this.meta.textContent =
      `annotator: ${this.controller.annotator} · pending: ${this.controller.pendingCount()}` +
      (staged > 0 ? ` · staged offline: ${staged}` : "");
  }

  private renderReport(): void {
    this.renderMeta();
    const report: SessionReport | null = this.controller.report;
    this.reportPanel.innerHTML = "";
    if (!report || report.reviewed === 0) {
      this.reportPanel.append(el("p", "muted", "No judgments yet — the report is pending."));
      return;
    }
    const headline = el("div", "headline");
    headline.append(
      el("div", "stat", `precision ${pct(report.precision)}`),
      el("div", "stat", `music ${pct(report.music_rate)}`),
      el("div", "stat muted", `${report.reviewed} reviewed / ${report.pending} pending`),
    );
    this.reportPanel.append(headline);
    if (report.per_keyword.length > 1) {
      const table = el("table");
      const head = el("tr");
      for (const title of ["keyword", "reviewed", "precision", "music"]) {
        head.append(el("th", undefined, title));
      }
      table.append(head);
      for (const row of report.per_keyword) {
        const tr = el("tr");
        tr.append(
          el("td", undefined, row.keyword),
          el("td", undefined, String(row.reviewed)),
          el("td", undefined, pct(row.precision)),
          el("td", undefined, pct(row.music_rate)),
        );
        table.append(tr);
      }
      this.reportPanel.append(table);
    }
  }

  private renderCards(): void {
    this.renderMeta();
    this.cardList.innerHTML = "";
    this.cardNodes = [];
    this.controller.cards.forEach((card, index) => {
      const node = this.buildCard(card, index);
      this.cardNodes.push(node);
      this.cardList.append(node);
    });
    this.highlightCursor();
  }

  private buildCard(card: CandidateCard, index: number): HTMLElement {
    const box = el("article", "card");
    const title = el("div", "card-title");
    title.append(
      el("span", "rank", `#${card.candidate.rank}`),
      el("span", "keyword", card.candidate.keyword),
      el("span", "muted", `${card.candidate.utterance_id} · score ${card.candidate.score.toFixed(3)}`),
    );
    box.append(title);

    const audio = el("audio");
    audio.controls = true;
    audio.preload = "none";
    audio.src = this.api.audioUrl(card.candidate);
    box.append(audio);

    box.append(
      this.decisionRow(card, index, "keyword", `keyword “${card.candidate.keyword}” present?`),
      this.decisionRow(card, index, "music", "music present?"),
    );
    if (card.staged) box.append(el("div", "staged", "staged — awaiting reconnect"));
    if (card.saving) box.append(el("div", "muted", "saving…"));
    return box;
  }

  private decisionRow(
    card: CandidateCard,
    index: number,
    kind: "keyword" | "music",
    label: string,
  ): HTMLElement {
    const row = el("div", "decision");
    row.append(el("span", "label", label));
    const state = kind === "keyword" ? card.keyword : card.music;
    for (const value of [true, false]) {
      const button = el("button", undefined, value ? "yes" : "no");
      if (state !== "pending" && (state === "yes") === value) button.classList.add("active");
      button.disabled = card.saving;
      button.addEventListener("click", () => {
        this.cursor = index;
        void this.controller.judge(index, kind, value).catch(() => undefined);
      });
      row.append(button);
    }
    row.append(el("span", `state state-${state}`, state));
    return row;
  }

  private highlightCursor(): void {
    this.cardNodes.forEach((node, index) => {
      node.classList.toggle("focused", index === this.cursor);
    });
    this.cardNodes[this.cursor]?.scrollIntoView({ block: "nearest" });
  }

  private onKey(event: KeyboardEvent): void {
    if (event.target instanceof HTMLInputElement) return;
    const actions: Record<string, () => void> = {
      j: () => this.moveCursor(1),
      k: () => this.moveCursor(-1),
      y: () => void this.controller.judge(this.cursor, "keyword", true).catch(() => undefined),
      n: () => void this.controller.judge(this.cursor, "keyword", false).catch(() => undefined),
      m: () => void this.controller.judge(this.cursor, "music", true).catch(() => undefined),
      u: () => void this.controller.judge(this.cursor, "music", false).catch(() => undefined),
      " ": () => this.playFocused(),
    };
    const action = actions[event.key];
    if (action) {
      event.preventDefault();
      action();
    }
  }

  private moveCursor(delta: number): void {
    const count = this.controller.cards.length;
    if (count === 0) return;
    this.cursor = Math.min(count - 1, Math.max(0, this.cursor + delta));
    this.highlightCursor();
  }

  private playFocused(): void {
    const audio = this.cardNodes[this.cursor]?.querySelector("audio");
    if (audio) void audio.play().catch(() => undefined);
  }
}
