import io
import wave

import numpy as np
import pytest
from fastapi.testclient import TestClient

from awekws.errors import DataError
from awekws.search import RankedHit
from awekws.segmentation import Segment
from awekws.service import (
    AudioLibrary,
    Candidate,
    SessionStore,
    candidates_from_hits,
    candidates_from_sample,
    create_app,
)


def make_candidates(n=5, keyword="vita"):
    return [Candidate(i + 1, f"u{i:03d}", keyword, 0.1 * i, 10, 30) for i in range(n)]


class TestSessionStore:
    def test_create_and_freeze_order(self, tmp_path):
        store = SessionStore(tmp_path)
        hits = [
            RankedHit("b", "vita", 0.2, Segment("b", 5, 25)),
            RankedHit("a", "vita", 0.4, Segment("a", 0, 20)),
        ]
        session = store.create_session("awe", candidates_from_hits(hits), k=100, session_id="s1")
        got = store.get_session("s1")
        assert [c.utterance_id for c in got.candidates] == ["b", "a"]  # rank order, not id order
        assert [c.rank for c in got.candidates] == [1, 2]
        assert got.candidates[0].score == 0.2

    def test_k_truncates(self, tmp_path):
        store = SessionStore(tmp_path)
        session = store.create_session("awe", make_candidates(10), k=4, session_id="s")
        assert len(session.candidates) == 4

    def test_duplicate_session_conflicts(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create_session("awe", make_candidates(), session_id="dup")
        with pytest.raises(DataError, match="already exists"):
            store.create_session("awe", make_candidates(), session_id="dup")

    def test_empty_candidates_rejected(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            SessionStore(tmp_path).create_session("awe", [], session_id="s")

    def test_judgment_persisted_and_reported(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create_session("awe", make_candidates(3), session_id="s")
        store.submit_judgment("s", "u000", "vita", True, False, "mod1")
        report = store.session_report("s")
        assert report["reviewed"] == 1 and report["pending"] == 2
        assert report["precision"] == 1.0 and report["music_rate"] == 0.0

    def test_unknown_utterance_rejected(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create_session("awe", make_candidates(2), session_id="s")
        with pytest.raises(KeyError):
            store.submit_judgment("s", "ghost", "vita", True, False, "mod1")

    def test_resubmission_overwrites_with_audit_trail(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create_session("awe", make_candidates(2), session_id="s")
        store.submit_judgment("s", "u000", "vita", True, False, "mod1", timestamp="2026-01-01T10:00:00+00:00")
        store.submit_judgment("s", "u000", "vita", False, True, "mod1", timestamp="2026-01-01T10:05:00+00:00")
        report = store.session_report("s")
        assert report["reviewed"] == 1
        assert report["precision"] == 0.0 and report["music_rate"] == 1.0
        audit = store.audit_log("s")
        assert len(audit) == 2
        assert audit[0].contains_keyword and not audit[1].contains_keyword

    def test_latest_wins_with_sequence_tie_break(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create_session("awe", make_candidates(1), session_id="s")
        same_ts = "2026-01-01T10:00:00+00:00"
        store.submit_judgment("s", "u000", "vita", True, False, "mod1", timestamp=same_ts)
        store.submit_judgment("s", "u000", "vita", False, False, "mod2", timestamp=same_ts)
        active = store.active_judgments("s")
        assert active[("u000", "vita")].annotator == "mod2"  # higher seq wins the tie

    def test_report_order_independent(self, tmp_path):
        judgments = [(f"u{i:03d}", i % 2 == 0, i % 3 == 0) for i in range(6)]
        reports = []
        for name, ordering in (("fwd", judgments), ("rev", judgments[::-1])):
            store = SessionStore(tmp_path / name)
            store.create_session("awe", make_candidates(6), session_id="s")
            for i, (utt, kw_yes, music_yes) in enumerate(ordering):
                store.submit_judgment(
                    "s", utt, "vita", kw_yes, music_yes, "mod",
                    timestamp=f"2026-01-01T10:{i:02d}:00+00:00",
                )
            reports.append(store.session_report("s"))
        assert reports[0]["precision"] == reports[1]["precision"]
        assert reports[0]["music_rate"] == reports[1]["music_rate"]

    def test_durability_across_restart(self, tmp_path):
        store = SessionStore(tmp_path)
        store.create_session("awe", make_candidates(3), session_id="s")
        store.submit_judgment("s", "u001", "vita", True, True, "mod1")
        del store
        reopened = SessionStore(tmp_path)
        report = reopened.session_report("s")
        assert report["reviewed"] == 1
        assert report["music_rate"] == 1.0

    def test_snapshot_written_periodically(self, tmp_path):
        store = SessionStore(tmp_path, snapshot_every=2)
        store.create_session("awe", make_candidates(4), session_id="s")
        store.submit_judgment("s", "u000", "vita", True, False, "m")
        assert not (tmp_path / "sessions" / "s" / "snapshot.json").exists()
        store.submit_judgment("s", "u001", "vita", True, False, "m")
        assert (tmp_path / "sessions" / "s" / "snapshot.json").exists()

    def test_candidates_from_sample(self):
        cands = candidates_from_sample(["u2", "u1"], {"u1": {"vita"}, "u2": {"damu", "vita"}})
        assert [c.utterance_id for c in cands] == ["u2", "u1"]
        assert cands[0].keyword == "damu"  # lexicographically first match


def write_test_wav(path, seconds=2.0, rate=16000):
    t = np.arange(int(seconds * rate)) / rate
    pcm = (0.3 * np.sin(2 * np.pi * 440 * t) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(pcm.tobytes())


class TestAudioLibrary:
    def test_slice_with_margin(self, tmp_path):
        write_test_wav(tmp_path / "u1.wav", seconds=3.0)
        lib = AudioLibrary(tmp_path, frame_shift_ms=20.0, context_margin_s=1.0)
        # frames 50..60 = 1.0..1.2 s; margin 1 s -> 0.0..2.2 s
        payload = lib.slice_wav("u1", 50, 60)
        with wave.open(io.BytesIO(payload), "rb") as wav:
            assert wav.getnframes() == int(2.2 * 16000)

    def test_whole_file_when_unbounded(self, tmp_path):
        write_test_wav(tmp_path / "u1.wav", seconds=1.0)
        lib = AudioLibrary(tmp_path, frame_shift_ms=20.0)
        with wave.open(io.BytesIO(lib.slice_wav("u1")), "rb") as wav:
            assert wav.getnframes() == 16000

    def test_missing_audio(self, tmp_path):
        lib = AudioLibrary(tmp_path, frame_shift_ms=20.0)
        with pytest.raises(KeyError):
            lib.slice_wav("ghost")


class TestHttpApi:
    @pytest.fixture
    def client(self, tmp_path):
        store = SessionStore(tmp_path / "store")
        (tmp_path / "audio").mkdir()
        write_test_wav(tmp_path / "audio" / "u000.wav", seconds=2.0)
        audio = AudioLibrary(tmp_path / "audio", frame_shift_ms=20.0)
        return TestClient(create_app(store, audio=audio))

    def session_body(self, n=3):
        return {
            "system": "awe",
            "candidates": [
                {
                    "rank": i + 1,
                    "utterance_id": f"u{i:03d}",
                    "keyword": "vita",
                    "score": 0.1 * i,
                    "start_frame": 10,
                    "end_frame": 30,
                }
                for i in range(n)
            ],
            "session_id": "s1",
        }

    def test_full_flow(self, client):
        r = client.post("/sessions", json=self.session_body())
        assert r.status_code == 201
        assert r.json() == {"session_id": "s1", "system": "awe", "size": 3}

        r = client.get("/sessions")
        assert [s["session_id"] for s in r.json()["sessions"]] == ["s1"]

        r = client.get("/sessions/s1/candidates")
        cands = r.json()["candidates"]
        assert [c["rank"] for c in cands] == [1, 2, 3]

        r = client.post(
            "/sessions/s1/judgments",
            json={
                "utterance_id": "u000",
                "keyword": "vita",
                "contains_keyword": True,
                "contains_music": False,
                "annotator": "mod1",
            },
        )
        assert r.status_code == 200
        assert r.json()["seq"] == 1

        r = client.get("/sessions/s1/report")
        body = r.json()
        assert body["reviewed"] == 1 and body["pending"] == 2
        assert body["precision"] == 1.0

    def test_duplicate_session_409(self, client):
        assert client.post("/sessions", json=self.session_body()).status_code == 201
        assert client.post("/sessions", json=self.session_body()).status_code == 409

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/ghost/report").status_code == 404
        assert client.get("/sessions/ghost/candidates").status_code == 404
        r = client.post(
            "/sessions/ghost/judgments",
            json={
                "utterance_id": "u0",
                "keyword": "k",
                "contains_keyword": True,
                "contains_music": False,
                "annotator": "m",
            },
        )
        assert r.status_code == 404

    def test_foreign_utterance_404(self, client):
        client.post("/sessions", json=self.session_body())
        r = client.post(
            "/sessions/s1/judgments",
            json={
                "utterance_id": "ghost",
                "keyword": "vita",
                "contains_keyword": True,
                "contains_music": False,
                "annotator": "m",
            },
        )
        assert r.status_code == 404

    def test_audio_endpoint(self, client):
        r = client.get("/audio/u000", params={"start_frame": 10, "end_frame": 30})
        assert r.status_code == 200
        assert r.headers["content-type"] == "audio/wav"
        with wave.open(io.BytesIO(r.content), "rb") as wav:
            assert wav.getnframes() > 0
        assert client.get("/audio/ghost").status_code == 404
