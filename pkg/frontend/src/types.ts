/**
 * Wire types for the moderation service.
 *
 * Field names mirror the service's JSON contract exactly; the UI never
 * renames or recomputes anything it gets from the server.
 */

export interface Candidate {
  rank: number;
  utterance_id: string;
  keyword: string;
  score: number;
  start_frame: number;
  end_frame: number;
}

export interface SessionSummary {
  session_id: string;
  system: "awe" | "asr";
  created_at: string;
  size: number;
}

export interface JudgmentSubmission {
  utterance_id: string;
  keyword: string;
  contains_keyword: boolean;
  contains_music: boolean;
  annotator: string;
}

export interface JudgmentAck {
  status: "ok";
  seq: number;
  timestamp: string;
}

export interface KeywordReportRow {
  keyword: string;
  reviewed: number;
  keyword_yes: number;
  music_yes: number;
  precision: number;
  music_rate: number;
}

export interface AnnotatorReportRow {
  annotator: string;
  judgments: number;
  keyword_yes: number;
  music_yes: number;
}

export interface SessionReport {
  session_id: string;
  system: string;
  total: number;
  reviewed: number;
  pending: number;
  precision: number | null;
  music_rate: number | null;
  per_keyword: KeywordReportRow[];
  per_annotator: AnnotatorReportRow[];
}

/** Tri-state decision shown on a candidate card. */
export type Decision = "pending" | "yes" | "no";

export interface CandidateCard {
  candidate: Candidate;
  keyword: Decision;
  music: Decision;
  /** A submission for this card is in flight. */
  saving: boolean;
  /** The latest decision is staged locally, not yet acknowledged. */
  staged: boolean;
}
