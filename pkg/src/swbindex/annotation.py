"""Coder sessions, label storage and training-set export.

Coding rules enforced here: off-topic is a real category, an unsure coder
skips (stored as ``unlabeled`` and never exported), retweets are labeled
like any other post, and one submission may carry labels for any subset of
the eight dimensions at once.
"""

from __future__ import annotations

import json
import random
import threading
import uuid
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import DIMENSIONS, Post

LABELS = ("positive", "neutral", "negative", "offtopic", "unlabeled")

#: Shortcut key accepted in a submission map: expands to offtopic everywhere.
ALL_OFFTOPIC = "all"


class AnnotationError(Exception):
    """Invalid submission or session usage."""

    code = "annotation_error"


class StaleCursorError(AnnotationError):
    """Submitted post does not match the session cursor."""

    code = "stale_cursor"


class EmptyPoolError(AnnotationError):
    code = "nothing_to_annotate"


class EmptyTrainingSetError(AnnotationError):
    code = "empty_training_set"


@dataclass(frozen=True)
class LabelRecord:
    post_id: str
    dimension: str
    label: str
    coder_id: str
    labeled_at: datetime

    def to_json(self) -> dict:
        return {
            "post_id": self.post_id,
            "dimension": self.dimension,
            "label": self.label,
            "coder_id": self.coder_id,
            "labeled_at": self.labeled_at.astimezone(timezone.utc).isoformat(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LabelRecord":
        return cls(
            post_id=obj["post_id"],
            dimension=obj["dimension"],
            label=obj["label"],
            coder_id=obj["coder_id"],
            labeled_at=datetime.fromisoformat(obj["labeled_at"]),
        )


class LabelStore:
    """Serialized single-writer store, at most one record per
    (post, dimension, coder); re-submission overwrites."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[tuple[str, str, str], LabelRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = LabelRecord.from_json(json.loads(line))
                    self._records[(rec.post_id, rec.dimension, rec.coder_id)] = rec

    def put(self, record: LabelRecord) -> None:
        if record.dimension not in DIMENSIONS:
            raise AnnotationError(f"unknown dimension {record.dimension!r}")
        if record.label not in LABELS:
            raise AnnotationError(f"unknown label {record.label!r}")
        with self._lock:
            self._records[(record.post_id, record.dimension, record.coder_id)] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")

    def records(self) -> list[LabelRecord]:
        with self._lock:
            return list(self._records.values())

    def get(self, post_id: str, dimension: str, coder_id: str) -> LabelRecord | None:
        return self._records.get((post_id, dimension, coder_id))

    def coder_fully_labeled(self, post_id: str, coder_id: str) -> bool:
        """True when this coder submitted this post (every dimension stored,
        skips included)."""
        return all((post_id, dim, coder_id) in self._records for dim in DIMENSIONS)

    def progress(self) -> dict[str, int]:
        counts = Counter()
        for rec in self.records():
            if rec.label != "unlabeled":
                counts[rec.dimension] += 1
        return {dim: counts.get(dim, 0) for dim in DIMENSIONS}


@dataclass
class AnnotationSession:
    session_id: str
    coder_id: str
    queue: list[str]
    cursor: int = 0
    texts: dict[str, str] = field(default_factory=dict)

    @property
    def remaining(self) -> int:
        return len(self.queue) - self.cursor

    def current_post_id(self) -> str | None:
        if self.cursor >= len(self.queue):
            return None
        return self.queue[self.cursor]


def open_session(
    coder_id: str,
    candidate_pool: list[Post],
    shuffle_seed: int,
    store: LabelStore,
) -> AnnotationSession:
    """Seeded shuffle of the pool, minus posts this coder already submitted.

    The queue intentionally carries no trace of which keyword list selected
    a post, so coders cannot tell which dimension a post was sampled for.
    """
    if not candidate_pool:
        raise EmptyPoolError("nothing to annotate")
    pending = [p for p in candidate_pool if not store.coder_fully_labeled(p.id, coder_id)]
    rng = random.Random(shuffle_seed)
    rng.shuffle(pending)
    return AnnotationSession(
        session_id=uuid.uuid4().hex,
        coder_id=coder_id,
        queue=[p.id for p in pending],
        texts={p.id: p.text for p in pending},
    )


def submit_labels(
    session: AnnotationSession,
    post_id: str,
    labels: Mapping[str, str],
    store: LabelStore,
    at: datetime | None = None,
) -> int:
    """Store one submission for the post at the session cursor.

    Dimensions absent from ``labels`` are recorded as ``unlabeled`` (the
    coder left them unanswered); ``{"all": "offtopic"}`` expands to offtopic
    on every dimension; an empty map is an explicit skip. Returns the new
    cursor. The whole submission is rejected before anything is stored when
    it names an unknown dimension or label, or when ``post_id`` is not the
    cursor post (stale client).
    """
    current = session.current_post_id()
    if current is None:
        raise StaleCursorError("session is complete")
    if post_id != current:
        raise StaleCursorError(f"expected post {current}, got {post_id}")

    expanded: dict[str, str]
    if set(labels.keys()) == {ALL_OFFTOPIC}:
        if labels[ALL_OFFTOPIC] != "offtopic":
            raise AnnotationError("the 'all' shortcut only accepts 'offtopic'")
        expanded = {dim: "offtopic" for dim in DIMENSIONS}
    else:
        for dim, label in labels.items():
            if dim not in DIMENSIONS:
                raise AnnotationError(f"unknown dimension {dim!r}")
            if label not in LABELS:
                raise AnnotationError(f"unknown label {label!r}")
        expanded = dict(labels)

    ts = at or datetime.now(timezone.utc)
    for dim in DIMENSIONS:
        store.put(
            LabelRecord(
                post_id=post_id,
                dimension=dim,
                label=expanded.get(dim, "unlabeled"),
                coder_id=session.coder_id,
                labeled_at=ts,
            )
        )
    session.cursor += 1
    return session.cursor


def export_training_set(store: LabelStore, dimension: str) -> list[tuple[str, str]]:
    """All adjudicated (post_id, label) pairs for one dimension.

    Skips (``unlabeled``) never appear. With several coders the majority
    label wins; ties go to the label with the most recent ``labeled_at``.
    """
    if dimension not in DIMENSIONS:
        raise AnnotationError(f"unknown dimension {dimension!r}")
    by_post: dict[str, list[LabelRecord]] = defaultdict(list)
    for rec in store.records():
        if rec.dimension == dimension and rec.label != "unlabeled":
            by_post[rec.post_id].append(rec)
    result: list[tuple[str, str]] = []
    for post_id in sorted(by_post):
        votes = Counter(rec.label for rec in by_post[post_id])
        top = max(votes.values())
        tied = [label for label, n in votes.items() if n == top]
        if len(tied) == 1:
            winner = tied[0]
        else:
            latest = lambda label: max(
                rec.labeled_at for rec in by_post[post_id] if rec.label == label
            )
            winner = max(tied, key=latest)
        result.append((post_id, winner))
    if not result:
        raise EmptyTrainingSetError(f"empty training set for dimension {dimension}")
    return result


def export_jsonl(store: LabelStore, dimension: str) -> str:
    """Training export wire format: one ``{post_id, dimension, label}`` per line."""
    lines = [
        json.dumps({"post_id": pid, "dimension": dimension, "label": label}, ensure_ascii=False)
        for pid, label in export_training_set(store, dimension)
    ]
    return "".join(line + "\n" for line in lines)


def read_training_jsonl(text: str, dimension: str | None = None) -> list[tuple[str, str]]:
    """Parse a training export; optionally filter to one dimension."""
    pairs = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if dimension is None or obj.get("dimension") == dimension:
            pairs.append((str(obj["post_id"]), obj["label"]))
    return pairs


def labeled_posts(records: Iterable[LabelRecord]) -> set[str]:
    return {rec.post_id for rec in records if rec.label != "unlabeled"}
