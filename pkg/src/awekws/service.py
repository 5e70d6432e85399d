"""Moderation review service: sessions, judgments, reports, audio slices.

A review session freezes a ranked candidate list (from the embedding
searcher or the transcript baseline).  Moderators submit per-candidate
judgments: does the keyword actually occur, and does the clip contain
music.  Judgments are persisted to an append-only TAB log per session and
fsynced before they are acknowledged, so an acknowledged judgment survives
a process restart.  Re-submission overwrites a moderator's earlier decision
in every report while the log retains the full audit trail; the effective
judgment for an item is the latest by timestamp (ties broken by submission
sequence number).

On-disk layout under the store root:

    sessions/{session_id}/session.json     frozen metadata + candidates
    sessions/{session_id}/judgments.log    seq TAB timestamp TAB annotator
                                           TAB utt TAB keyword TAB kw_yes TAB music_yes
    sessions/{session_id}/snapshot.json    periodic compacted latest-wins view

The HTTP wire contract (JSON bodies) is documented in the README; the
store itself is framework-free and fully testable without HTTP.
"""

import io
import json
import os
import threading
import wave
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import DataError
from .evaluation import moderation_precision
from .search import RankedHit

SNAPSHOT_EVERY = 100
DEFAULT_CONTEXT_MARGIN_S = 1.0


@dataclass
class Candidate:
    rank: int
    utterance_id: str
    keyword: str
    score: float
    start_frame: int
    end_frame: int


@dataclass
class ModerationJudgment:
    utterance_id: str
    keyword: str
    contains_keyword: bool
    contains_music: bool
    annotator: str
    timestamp: str
    seq: int


@dataclass
class ReviewSession:
    session_id: str
    system: str
    created_at: str
    candidates: list[Candidate]


def candidates_from_hits(hits: list[RankedHit]) -> list[Candidate]:
    """Wrap ranked retrieval hits as review candidates, preserving order."""
    return [
        Candidate(
            rank=i + 1,
            utterance_id=h.utterance_id,
            keyword=h.keyword,
            score=h.score,
            start_frame=h.best_segment.start_frame,
            end_frame=h.best_segment.end_frame,
        )
        for i, h in enumerate(hits)
    ]


def candidates_from_sample(
    sampled_ids: list[str], matches: dict[str, set[str]]
) -> list[Candidate]:
    """Candidates for the transcript baseline (no scores or segments).

    Each sampled utterance is annotated with its lexicographically first
    matched keyword; segment bounds are zeroed so the audio endpoint serves
    the whole utterance.
    """
    out = []
    for i, utt in enumerate(sampled_ids):
        keyword = sorted(matches.get(utt, {""}))[0]
        out.append(Candidate(i + 1, utt, keyword, 0.0, 0, 0))
    return out


class SessionStore:
    """Durable session + judgment storage over an append-only log."""

    def __init__(self, root: str | Path, snapshot_every: int = SNAPSHOT_EVERY):
        self.root = Path(root)
        self.snapshot_every = snapshot_every
        # one ordered log per session; writes serialize here, reads never block
        self._write_lock = threading.Lock()
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)

    # -- paths ----------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise DataError(f"invalid session id {session_id!r}")
        return self.root / "sessions" / session_id

    # -- sessions ---------------------------------------------------------

    def create_session(
        self, system: str, candidates: list[Candidate], k: int = 100, session_id: str | None = None
    ) -> ReviewSession:
        if system not in ("awe", "asr"):
            raise DataError(f"system must be 'awe' or 'asr', got {system!r}")
        if not candidates:
            raise DataError("candidate list is empty")
        if session_id is None:
            session_id = f"{system}-{len(self.list_sessions()):04d}"
        sdir = self._session_dir(session_id)
        if sdir.exists():
            raise DataError(f"session {session_id!r} already exists")
        frozen = candidates[:k]
        session = ReviewSession(
            session_id=session_id,
            system=system,
            created_at=_utc_now(),
            candidates=frozen,
        )
        sdir.mkdir(parents=True)
        payload = {
            "session_id": session.session_id,
            "system": session.system,
            "created_at": session.created_at,
            "candidates": [asdict(c) for c in frozen],
        }
        tmp = sdir / "session.json.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.flush()
            os.fsync(fh.fileno())
        tmp.rename(sdir / "session.json")
        (sdir / "judgments.log").touch()
        return session

    def list_sessions(self) -> list[dict]:
        out = []
        for sdir in sorted((self.root / "sessions").iterdir()):
            meta = sdir / "session.json"
            if meta.exists():
                payload = json.loads(meta.read_text(encoding="utf-8"))
                out.append(
                    {
                        "session_id": payload["session_id"],
                        "system": payload["system"],
                        "created_at": payload["created_at"],
                        "size": len(payload["candidates"]),
                    }
                )
        return out

    def get_session(self, session_id: str) -> ReviewSession:
        meta = self._session_dir(session_id) / "session.json"
        if not meta.exists():
            raise KeyError(session_id)
        payload = json.loads(meta.read_text(encoding="utf-8"))
        return ReviewSession(
            session_id=payload["session_id"],
            system=payload["system"],
            created_at=payload["created_at"],
            candidates=[Candidate(**c) for c in payload["candidates"]],
        )

    # -- judgments --------------------------------------------------------

    def submit_judgment(
        self,
        session_id: str,
        utterance_id: str,
        keyword: str,
        contains_keyword: bool,
        contains_music: bool,
        annotator: str,
        timestamp: str | None = None,
    ) -> ModerationJudgment:
        session = self.get_session(session_id)
        if not any(c.utterance_id == utterance_id for c in session.candidates):
            raise KeyError(utterance_id)
        if not annotator:
            raise DataError("annotator must be non-empty")
        if timestamp is None:
            timestamp = _utc_now()
        log_path = self._session_dir(session_id) / "judgments.log"
        with self._write_lock:
            existing = self._read_log(session_id)
            seq = existing[-1].seq + 1 if existing else 1
            judgment = ModerationJudgment(
                utterance_id=utterance_id,
                keyword=keyword,
                contains_keyword=bool(contains_keyword),
                contains_music=bool(contains_music),
                annotator=annotator,
                timestamp=timestamp,
                seq=seq,
            )
            line = "\t".join(
                [
                    str(seq),
                    timestamp,
                    annotator,
                    utterance_id,
                    keyword,
                    "1" if judgment.contains_keyword else "0",
                    "1" if judgment.contains_music else "0",
                ]
            )
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            if seq % self.snapshot_every == 0:
                self._write_snapshot(session_id)
        return judgment

    def _read_log(self, session_id: str) -> list[ModerationJudgment]:
        log_path = self._session_dir(session_id) / "judgments.log"
        if not log_path.exists():
            raise KeyError(session_id)
        out = []
        for line in log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            seq, timestamp, annotator, utt, keyword, kw_yes, music_yes = line.split("\t")
            out.append(
                ModerationJudgment(
                    utterance_id=utt,
                    keyword=keyword,
                    contains_keyword=kw_yes == "1",
                    contains_music=music_yes == "1",
                    annotator=annotator,
                    timestamp=timestamp,
                    seq=int(seq),
                )
            )
        return out

    def audit_log(self, session_id: str) -> list[ModerationJudgment]:
        """Full judgment history in submission order."""
        self.get_session(session_id)
        return self._read_log(session_id)

    def active_judgments(self, session_id: str) -> dict[tuple[str, str], ModerationJudgment]:
        """Latest judgment per (utterance, keyword), across annotators."""
        active: dict[tuple[str, str], ModerationJudgment] = {}
        for j in self._read_log(session_id):
            key = (j.utterance_id, j.keyword)
            cur = active.get(key)
            if cur is None or (j.timestamp, j.seq) >= (cur.timestamp, cur.seq):
                active[key] = j
        return active

    def _write_snapshot(self, session_id: str) -> None:
        active = self.active_judgments(session_id)
        payload = {
            "last_seq": max((j.seq for j in active.values()), default=0),
            "active": [asdict(j) for j in sorted(active.values(), key=lambda j: j.seq)],
        }
        path = self._session_dir(session_id) / "snapshot.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, indent=1), encoding="utf-8")
        tmp.rename(path)

    # -- reports ----------------------------------------------------------

    def session_report(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        active = self.active_judgments(session_id)
        total = len(session.candidates)
        reviewed = len(active)
        report: dict = {
            "session_id": session_id,
            "system": session.system,
            "total": total,
            "reviewed": reviewed,
            "pending": total - reviewed,
            "precision": None,
            "music_rate": None,
            "per_keyword": [],
            "per_annotator": [],
        }
        if not active:
            return report
        judged = list(active.values())
        precision, music_rate = moderation_precision(judged)
        report["precision"] = precision
        report["music_rate"] = music_rate

        by_keyword: dict[str, list[ModerationJudgment]] = {}
        for j in judged:
            by_keyword.setdefault(j.keyword, []).append(j)
        for keyword in sorted(by_keyword):
            group = by_keyword[keyword]
            kw_p, kw_m = moderation_precision(group)
            report["per_keyword"].append(
                {
                    "keyword": keyword,
                    "reviewed": len(group),
                    "keyword_yes": sum(1 for j in group if j.contains_keyword),
                    "music_yes": sum(1 for j in group if j.contains_music),
                    "precision": kw_p,
                    "music_rate": kw_m,
                }
            )
        by_annotator: dict[str, list[ModerationJudgment]] = {}
        for j in self._read_log(session_id):
            by_annotator.setdefault(j.annotator, []).append(j)
        for annotator in sorted(by_annotator):
            group = by_annotator[annotator]
            report["per_annotator"].append(
                {
                    "annotator": annotator,
                    "judgments": len(group),
                    "keyword_yes": sum(1 for j in group if j.contains_keyword),
                    "music_yes": sum(1 for j in group if j.contains_music),
                }
            )
        return report


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# Audio delivery


class AudioLibrary:
    """Serves WAV slices for utterance segments with a context margin."""

    def __init__(
        self,
        audio_dir: str | Path,
        frame_shift_ms: float,
        context_margin_s: float = DEFAULT_CONTEXT_MARGIN_S,
    ):
        self.audio_dir = Path(audio_dir)
        self.frame_shift_ms = frame_shift_ms
        self.context_margin_s = context_margin_s

    def path_for(self, utterance_id: str) -> Path:
        if "/" in utterance_id or utterance_id.startswith("."):
            raise KeyError(utterance_id)
        path = self.audio_dir / f"{utterance_id}.wav"
        if not path.exists():
            raise KeyError(utterance_id)
        return path

    def slice_wav(
        self,
        utterance_id: str,
        start_frame: int | None = None,
        end_frame: int | None = None,
        margin_s: float | None = None,
    ) -> bytes:
        """A standalone WAV for the segment padded by the context margin.

        Zeroed or missing bounds yield the whole utterance.
        """
        path = self.path_for(utterance_id)
        if margin_s is None:
            margin_s = self.context_margin_s
        with wave.open(str(path), "rb") as src:
            rate = src.getframerate()
            n_total = src.getnframes()
            if not start_frame and not end_frame:
                lo, hi = 0, n_total
            else:
                shift_s = self.frame_shift_ms / 1000.0
                start_s = max(0.0, (start_frame or 0) * shift_s - margin_s)
                end_s = (end_frame or 0) * shift_s + margin_s
                lo = min(n_total, int(start_s * rate))
                hi = min(n_total, max(lo + 1, int(end_s * rate)))
            src.setpos(lo)
            payload = src.readframes(hi - lo)
            buf = io.BytesIO()
            with wave.open(buf, "wb") as dst:
                dst.setnchannels(src.getnchannels())
                dst.setsampwidth(src.getsampwidth())
                dst.setframerate(rate)
                dst.writeframes(payload)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# HTTP layer


def create_app(store: SessionStore, audio: AudioLibrary | None = None, ui_dir: str | Path | None = None):
    """FastAPI wrapper over the store; endpoint contract is in the README."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.middleware.cors import CORSMiddleware
    from pydantic import BaseModel, Field

    class CandidateIn(BaseModel):
        rank: int
        utterance_id: str
        keyword: str
        score: float = 0.0
        start_frame: int = 0
        end_frame: int = 0

    class SessionIn(BaseModel):
        system: str
        candidates: list[CandidateIn]
        k: int = Field(default=100, ge=1)
        session_id: str | None = None

    class JudgmentIn(BaseModel):
        utterance_id: str
        keyword: str
        contains_keyword: bool
        contains_music: bool
        annotator: str
        timestamp: str | None = None

    app = FastAPI(title="awekws moderation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": store.list_sessions()}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionIn):
        try:
            session = store.create_session(
                system=body.system,
                candidates=[Candidate(**c.model_dump()) for c in body.candidates],
                k=body.k,
                session_id=body.session_id,
            )
        except DataError as exc:
            status = 409 if "already exists" in str(exc) else 422
            raise HTTPException(status_code=status, detail=str(exc)) from exc
        return {"session_id": session.session_id, "system": session.system, "size": len(session.candidates)}

    @app.get("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str):
        try:
            session = store.get_session(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}") from None
        return {"session_id": session_id, "candidates": [asdict(c) for c in session.candidates]}

    @app.post("/sessions/{session_id}/judgments")
    def submit_judgment(session_id: str, body: JudgmentIn):
        try:
            judgment = store.submit_judgment(
                session_id,
                utterance_id=body.utterance_id,
                keyword=body.keyword,
                contains_keyword=body.contains_keyword,
                contains_music=body.contains_music,
                annotator=body.annotator,
                timestamp=body.timestamp,
            )
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"unknown session or utterance: {exc}") from None
        except DataError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"status": "ok", "seq": judgment.seq, "timestamp": judgment.timestamp}

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str):
        try:
            return store.session_report(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}") from None

    @app.get("/audio/{utterance_id}")
    def get_audio(
        utterance_id: str,
        start_frame: int | None = None,
        end_frame: int | None = None,
        margin_s: float | None = None,
    ):
        if audio is None:
            raise HTTPException(status_code=404, detail="no audio directory configured")
        try:
            payload = audio.slice_wav(utterance_id, start_frame, end_frame, margin_s)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no audio for {utterance_id!r}") from None
        return Response(content=payload, media_type="audio/wav")

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
