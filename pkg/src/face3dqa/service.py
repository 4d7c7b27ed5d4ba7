"""Annotation service: session management over an append-only event log.

Every state change (session creation, navigation, submission) is one JSON
line appended to the log before it is acknowledged, so replaying the log
from any prefix reconstructs a consistent store; a torn final line (crash
mid-write) is tolerated. Exports are a pure function of the log under a
latest-wins rule, while the log itself retains full history.
"""

from __future__ import annotations

import json
import os
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    SCORE_MAX,
    SCORE_MIN,
    DatasetManifest,
    Dimension,
    DistortionLabel,
    FixationAnnotation,
    RatingRecord,
    parse_category,
    utcnow,
)
from .io import (
    fixation_to_obj,
    format_timestamp,
    label_to_obj,
    parse_timestamp,
    rating_to_obj,
)


class ServiceValidationError(ValueError):
    """A submission payload violates the slider range or mark bounds."""


class UnknownSessionError(KeyError):
    pass


class DuplicateActiveSessionError(ValueError):
    pass


class CompletedSessionError(ValueError):
    pass


class StaleSessionError(ValueError):
    pass


class CorruptLogError(ValueError):
    """The event log is unreadable before its final line."""


ACTIVE = "active"
COMPLETE = "complete"


@dataclass
class _Submission:
    order: int  # global log position, used for latest-wins
    seq: int
    timestamp: str
    scores: dict[str, float] = field(default_factory=dict)
    marks: list[tuple[int, int]] | None = None
    categories: list[str] | None = None
    description: str | None = None


@dataclass
class Session:
    session_id: str
    subject_id: str
    seed: int
    queue: list[str]
    cursor: int = 0
    state: str = ACTIVE
    next_seq: int = 1
    # per item: latest field values, each tagged with its global log order
    latest_scores: dict[str, dict[str, tuple[float, str, int]]] = field(default_factory=dict)
    latest_marks: dict[str, tuple[list[tuple[int, int]], str, int]] = field(default_factory=dict)
    latest_label: dict[str, tuple[list[str], str, str, int]] = field(default_factory=dict)
    history: list[_Submission] = field(default_factory=list)

    @property
    def current_item(self) -> str:
        return self.queue[min(self.cursor, len(self.queue) - 1)]


@dataclass(frozen=True)
class ExportBundle:
    ratings: list[RatingRecord]
    fixations: list[FixationAnnotation]
    labels: list[DistortionLabel]

    def write(self, out_dir: str | Path) -> None:
        from .io import write_fixations_json, write_labels_json, write_ratings_jsonl

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_ratings_jsonl(self.ratings, out / "ratings.jsonl")
        write_fixations_json(self.fixations, out / "fixations.json")
        write_labels_json(self.labels, out / "labels.json")


class EventLogStore:
    """Durable session store backed by one newline-delimited JSON event log.

    A single lock serializes all mutations; the log append is the only
    synchronization point with disk. Set ``durable=False`` to skip fsync
    (tests, bulk imports).
    """

    def __init__(self, log_path: str | Path, manifest: DatasetManifest, durable: bool = True):
        self.log_path = Path(log_path)
        self.manifest = manifest
        self.durable = durable
        self.sessions: dict[str, Session] = {}
        self._order = 0
        self._lock = threading.RLock()
        self._fh = None
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        if self.log_path.exists():
            self._replay_file()
        self._fh = open(self.log_path, "ab")

    # -- log machinery -----------------------------------------------------

    def _replay_file(self) -> None:
        raw = self.log_path.read_bytes()
        lines = raw.split(b"\n")
        # a committed append always ends with a newline, so the final chunk
        # (empty, or a torn partial write) is dropped
        for i, line in enumerate(lines[:-1]):
            if not line.strip():
                continue
            try:
                event = json.loads(line.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise CorruptLogError(f"{self.log_path}: bad event at line {i + 1}: {exc}") from exc
            self._apply(event)

    def _append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n"
        self._fh.write(line.encode("utf-8"))
        self._fh.flush()
        if self.durable:
            os.fsync(self._fh.fileno())
        self._apply(event)

    def _apply(self, event: dict) -> None:
        self._order += 1
        kind = event["type"]
        if kind == "session_created":
            session = Session(
                session_id=event["session_id"],
                subject_id=event["subject_id"],
                seed=int(event["seed"]),
                queue=list(event["queue"]),
            )
            self.sessions[session.session_id] = session
            return
        session = self.sessions.get(event["session_id"])
        if session is None:
            raise CorruptLogError(f"event for unknown session {event['session_id']!r}")
        session.next_seq = max(session.next_seq, int(event["seq"]) + 1)
        if kind == "advance":
            if session.cursor >= len(session.queue) - 1:
                session.state = COMPLETE
            else:
                session.cursor += 1
        elif kind == "retreat":
            session.cursor = max(0, session.cursor - 1)
        elif kind == "submit":
            self._apply_submit(session, event)
        else:
            raise CorruptLogError(f"unknown event type {kind!r}")

    def _apply_submit(self, session: Session, event: dict) -> None:
        payload = event["payload"]
        item = event["item_id"]
        ts = event["ts"]
        order = self._order
        sub = _Submission(order=order, seq=int(event["seq"]), timestamp=ts)
        scores = payload.get("scores") or {}
        for dim, value in scores.items():
            session.latest_scores.setdefault(item, {})[dim] = (float(value), ts, order)
            sub.scores[dim] = float(value)
        if payload.get("marks") is not None:
            points = [(int(x), int(y)) for x, y in payload["marks"]]
            session.latest_marks[item] = (points, ts, order)
            sub.marks = points
        if payload.get("categories"):
            cats = [str(c) for c in payload["categories"]]
            session.latest_label[item] = (cats, str(payload.get("description", "")), ts, order)
            sub.categories = cats
        if payload.get("description") is not None:
            sub.description = str(payload["description"])
        session.history.append(sub)

    # -- session operations --------------------------------------------------

    def create_session(self, subject_id: str, seed: int = 0) -> Session:
        """Open (or return) the session for ``(subject_id, seed)``.

        The item order is a seeded shuffle, so recreating with the same seed
        is idempotent. A subject may hold only one active session at a time.
        """
        if not self.manifest.items:
            raise ServiceValidationError("manifest is empty; nothing to annotate")
        if not subject_id:
            raise ServiceValidationError("subject_id must be non-empty")
        with self._lock:
            session_id = f"{subject_id}-{seed}"
            existing = self.sessions.get(session_id)
            if existing is not None:
                return existing
            for other in self.sessions.values():
                if other.subject_id == subject_id and other.state == ACTIVE:
                    raise DuplicateActiveSessionError(
                        f"subject {subject_id!r} already has active session {other.session_id}"
                    )
            queue = sorted(self.manifest.ids())
            random.Random(seed).shuffle(queue)
            self._append(
                {
                    "type": "session_created",
                    "session_id": session_id,
                    "subject_id": subject_id,
                    "seed": seed,
                    "queue": queue,
                    "ts": format_timestamp(utcnow()),
                }
            )
            return self.sessions[session_id]

    def _active_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(session_id)
        if session.state != ACTIVE:
            raise CompletedSessionError(f"session {session_id} is complete")
        return session

    def describe(self, session: Session) -> dict:
        item = self.manifest.by_id(session.current_item)
        return {
            "session_id": session.session_id,
            "subject_id": session.subject_id,
            "state": session.state,
            "index": min(session.cursor, len(session.queue) - 1),
            "total": len(session.queue),
            "item_id": item.id,
            "video_url": f"/media/{item.video}" if item.video else "",
            "snapshot_url": f"/media/{item.snapshot}" if item.snapshot else "",
            "snapshot_width": item.snapshot_width,
            "snapshot_height": item.snapshot_height,
        }

    def current(self, session_id: str) -> dict:
        with self._lock:
            return self.describe(self._active_session(session_id))

    def advance(self, session_id: str) -> dict:
        with self._lock:
            session = self._active_session(session_id)
            self._append(
                {
                    "type": "advance",
                    "session_id": session_id,
                    "seq": session.next_seq,
                    "ts": format_timestamp(utcnow()),
                }
            )
            return self.describe(session)

    def retreat(self, session_id: str) -> dict:
        with self._lock:
            session = self._active_session(session_id)
            self._append(
                {
                    "type": "retreat",
                    "session_id": session_id,
                    "seq": session.next_seq,
                    "ts": format_timestamp(utcnow()),
                }
            )
            return self.describe(session)

    def _validate_payload(self, session: Session, item_id: str | None, payload: dict) -> str:
        item_id = item_id or session.current_item
        if item_id not in session.queue:
            raise ServiceValidationError(f"item {item_id!r} is not part of this session")
        scores = payload.get("scores") or {}
        for dim, value in scores.items():
            Dimension.parse(dim)
            if not (SCORE_MIN <= float(value) <= SCORE_MAX):
                raise ServiceValidationError(
                    f"{dim} score {value} outside [{SCORE_MIN},{SCORE_MAX}]"
                )
        marks = payload.get("marks")
        if marks is not None:
            manifest_item = self.manifest.by_id(item_id)
            width = manifest_item.snapshot_width
            height = manifest_item.snapshot_height
            for point in marks:
                x, y = int(point[0]), int(point[1])
                if x < 0 or y < 0 or (width is not None and x >= width) or (
                    height is not None and y >= height
                ):
                    raise ServiceValidationError(
                        f"mark ({x},{y}) outside snapshot bounds {width}x{height}"
                    )
        for cat in payload.get("categories") or []:
            parse_category(cat)
        return item_id

    def submit(self, session_id: str, payload: dict, item_id: str | None = None) -> int:
        """Validate, durably append, and apply one submission; returns its seq.

        Resubmitting an item overwrites it logically (latest wins on export)
        while the log keeps every version.
        """
        with self._lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise UnknownSessionError(session_id)
            if session.state != ACTIVE:
                raise StaleSessionError(f"session {session_id} is no longer active")
            item_id = self._validate_payload(session, item_id, payload)
            seq = session.next_seq
            self._append(
                {
                    "type": "submit",
                    "session_id": session_id,
                    "seq": seq,
                    "item_id": item_id,
                    "payload": payload,
                    "ts": format_timestamp(utcnow()),
                }
            )
            return seq

    # -- export ----------------------------------------------------------------

    def export(self, include_incomplete: bool = False) -> ExportBundle:
        """Latest-wins view of all submissions in the core wire types.

        Only complete sessions contribute unless ``include_incomplete``.
        Scores are rounded to one decimal place on export.
        """
        with self._lock:
            considered = [
                s
                for s in sorted(self.sessions.values(), key=lambda s: s.session_id)
                if include_incomplete or s.state == COMPLETE
            ]
            # (subject, item, dimension) -> (order, value, ts); latest order wins
            score_cells: dict[tuple[str, str, str], tuple[int, float, str]] = {}
            mark_cells: dict[tuple[str, str], tuple[int, list[tuple[int, int]], str]] = {}
            label_cells: dict[tuple[str, str], tuple[int, list[str], str]] = {}
            for session in considered:
                subject = session.subject_id
                for item, dims in session.latest_scores.items():
                    for dim, (value, ts, order) in dims.items():
                        key = (subject, item, dim)
                        if key not in score_cells or order > score_cells[key][0]:
                            score_cells[key] = (order, value, ts)
                for item, (points, ts, order) in session.latest_marks.items():
                    key = (subject, item)
                    if key not in mark_cells or order > mark_cells[key][0]:
                        mark_cells[key] = (order, points, ts)
                for item, (cats, desc, ts, order) in session.latest_label.items():
                    key = (subject, item)
                    if key not in label_cells or order > label_cells[key][0]:
                        label_cells[key] = (order, cats, desc)
            ratings = [
                RatingRecord(
                    subject_id=subject,
                    item_id=item,
                    dimension=Dimension.parse(dim),
                    score=round(value, 1),
                    timestamp=parse_timestamp(ts),
                )
                for (subject, item, dim), (order, value, ts) in sorted(score_cells.items())
            ]
            fixations = []
            for (subject, item), (order, points, ts) in sorted(mark_cells.items()):
                manifest_item = self.manifest.by_id(item)
                # fall back to a bounding box when the manifest lacks dims
                width = manifest_item.snapshot_width or max([x + 1 for x, _ in points] or [1])
                height = manifest_item.snapshot_height or max([y + 1 for _, y in points] or [1])
                fixations.append(
                    FixationAnnotation(
                        item_id=item,
                        annotator_id=subject,
                        image_width=width,
                        image_height=height,
                        points=tuple(points),
                    )
                )
            labels = [
                DistortionLabel(
                    item_id=item,
                    annotator_id=subject,
                    categories=frozenset(parse_category(c) for c in cats),
                    description=desc,
                )
                for (subject, item), (order, cats, desc) in sorted(label_cells.items())
            ]
            return ExportBundle(ratings=ratings, fixations=fixations, labels=labels)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


# -- HTTP layer ---------------------------------------------------------------

from pydantic import BaseModel  # noqa: E402  (request models for the app factory)


class CreateSessionBody(BaseModel):
    subject_id: str
    seed: int = 0


class SubmitBody(BaseModel):
    item_id: str | None = None
    quality: float | None = None
    authenticity: float | None = None
    marks: list[list[int]] | None = None
    categories: list[str] | None = None
    description: str | None = None


def create_app(store: EventLogStore, media_root: str | Path | None = None,
               ui_dir: str | Path | None = None):
    """FastAPI application exposing the session protocol over HTTP+JSON."""
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse

    app = FastAPI(title="face3dqa annotation service")

    def _error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"code": code, "message": message})

    @app.exception_handler(ServiceValidationError)
    async def _validation(request: Request, exc: ServiceValidationError):
        return _error(422, "validation", str(exc))

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        if isinstance(exc, DuplicateActiveSessionError):
            return _error(409, "duplicate-active-session", str(exc))
        if isinstance(exc, CompletedSessionError):
            return _error(409, "completed-session", str(exc))
        if isinstance(exc, StaleSessionError):
            return _error(409, "stale-session", str(exc))
        return _error(422, "validation", str(exc))

    @app.exception_handler(UnknownSessionError)
    async def _unknown(request: Request, exc: UnknownSessionError):
        return _error(404, "unknown-session", f"no such session: {exc.args[0]}")

    @app.exception_handler(RequestValidationError)
    async def _request_validation(request: Request, exc: RequestValidationError):
        return _error(422, "validation", str(exc.errors()))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        session = store.create_session(body.subject_id, body.seed)
        return store.describe(session)

    @app.get("/sessions/{session_id}/current")
    def current(session_id: str):
        return store.current(session_id)

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str):
        return store.advance(session_id)

    @app.post("/sessions/{session_id}/retreat")
    def retreat(session_id: str):
        return store.retreat(session_id)

    @app.post("/sessions/{session_id}/submit")
    def submit(session_id: str, body: SubmitBody):
        payload: dict = {}
        scores = {}
        if body.quality is not None:
            scores["quality"] = body.quality
        if body.authenticity is not None:
            scores["authenticity"] = body.authenticity
        if scores:
            payload["scores"] = scores
        if body.marks is not None:
            payload["marks"] = body.marks
        if body.categories is not None:
            payload["categories"] = body.categories
        if body.description is not None:
            payload["description"] = body.description
        seq = store.submit(session_id, payload, item_id=body.item_id)
        return {"session_id": session_id, "seq": seq}

    @app.get("/export")
    def export(include_incomplete: bool = False):
        bundle = store.export(include_incomplete=include_incomplete)
        return {
            "ratings": [rating_to_obj(r) for r in bundle.ratings],
            "fixations": [fixation_to_obj(f) for f in bundle.fixations],
            "labels": [label_to_obj(l) for l in bundle.labels],
        }

    if media_root is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/media", StaticFiles(directory=str(media_root)), name="media")
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
