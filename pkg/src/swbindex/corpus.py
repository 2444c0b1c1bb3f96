"""Post ingestion, day partitioning, token features and training-candidate selection.

A corpus lives in one directory: one JSONL file per UTC calendar day under
``days/``, an ``ids.txt`` registry for duplicate detection, and a
``manifest.json`` with ingest counters and filter settings.
"""

from __future__ import annotations

import csv
import io
import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, TextIO

DIMENSIONS = ("emo", "sat", "vit", "res", "fun", "tru", "rel", "wor")

#: Distinguished signature of a post with no in-vocabulary token.
EMPTY_SIGNATURE = "EMPTY"

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_WORD_RE = re.compile(r"\w+", re.UNICODE)
# Letters and ideographs only: excludes digits and underscore.
_LETTER_RUN_RE = re.compile(r"[^\W\d_]+", re.UNICODE)


class CorpusError(Exception):
    """Raised when a corpus store or its input cannot be used at all."""


@dataclass(frozen=True)
class Post:
    """One social-media message."""

    id: str
    timestamp: datetime
    text: str
    lang: str
    country: str
    retweet: bool = False

    @property
    def day(self) -> date:
        return self.timestamp.astimezone(timezone.utc).date()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.timestamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z"),
            "text": self.text,
            "lang": self.lang,
            "country": self.country,
            "retweet": self.retweet,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Post":
        return cls(
            id=str(obj["id"]),
            timestamp=parse_utc(obj["created_at"]),
            text=obj["text"],
            lang=obj.get("lang", ""),
            country=obj.get("country", ""),
            retweet=bool(obj.get("retweet", False)),
        )


@dataclass
class KeywordList:
    """Per-dimension selection terms; exclusion terms veto a match."""

    dimension: str
    include_terms: list[str]
    exclude_terms: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if not self.include_terms:
            raise ValueError("include_terms must be non-empty")
        overlap = set(self.include_terms) & set(self.exclude_terms)
        if overlap:
            raise ValueError(f"terms in both lists: {sorted(overlap)}")


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 timestamp to an aware UTC datetime.

    Naive timestamps are taken as UTC; any explicit offset is converted.
    """
    raw = value.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_keyword_list(path: str | Path, dimension: str) -> KeywordList:
    """Read one keyword file: one term per line, ``-term`` lines are exclusions,
    blank lines and ``#`` comments ignored."""
    include: list[str] = []
    exclude: list[str] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        term = line.strip()
        if not term or term.startswith("#"):
            continue
        if term.startswith("-"):
            exclude.append(term[1:].strip())
        else:
            include.append(term)
    return KeywordList(dimension=dimension, include_terms=include, exclude_terms=exclude)


class CorpusStore:
    """Day-partitioned post storage rooted at one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.days_dir = self.root / "days"

    def exists(self) -> bool:
        return self.days_dir.is_dir()

    def day_path(self, day: date) -> Path:
        return self.days_dir / f"{day.isoformat()}.jsonl"

    def days(self) -> list[date]:
        if not self.days_dir.is_dir():
            return []
        return sorted(date.fromisoformat(p.stem) for p in self.days_dir.glob("*.jsonl"))

    def iter_posts(self, days: Iterable[date] | None = None) -> Iterator[Post]:
        for day in sorted(days) if days is not None else self.days():
            path = self.day_path(day)
            if not path.exists():
                continue
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        yield Post.from_json(json.loads(line))

    def count_posts(self) -> int:
        return sum(1 for _ in self.iter_posts())

    def known_ids(self) -> set[str]:
        path = self.root / "ids.txt"
        if not path.exists():
            return set()
        return {line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()}

    def manifest(self) -> dict:
        path = self.root / "manifest.json"
        if not path.exists():
            return {}
        return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class IngestResult:
    accepted: int
    rejected: int
    rejects_by_reason: dict[str, int]
    store: CorpusStore

    @property
    def read(self) -> int:
        return self.accepted + self.rejected


def _iter_records(source: TextIO, fmt: str) -> Iterator[dict]:
    if fmt == "jsonl":
        for line in source:
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                yield {"__malformed__": True}
    elif fmt == "csv":
        reader = csv.DictReader(source)
        for row in reader:
            if row is None or all(v in (None, "") for v in row.values()):
                continue
            yield dict(row)
    else:
        raise CorpusError(f"unknown input format {fmt!r}")


def _parse_retweet(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "t", "yes")


def ingest_posts(
    source: str | Path | TextIO,
    fmt: str,
    lang_filter: str,
    country_filter: str,
    store: CorpusStore,
) -> IngestResult:
    """Stream records into the store, partitioned by UTC calendar day.

    Malformed records are rejected individually; an unreadable source is fatal.
    Duplicate ids keep the first occurrence, also across repeated ingests into
    the same store.
    """
    opened: TextIO | None = None
    if isinstance(source, (str, Path)):
        try:
            opened = open(source, encoding="utf-8", newline="")
        except OSError as exc:
            raise CorpusError(f"cannot read source {source}: {exc}") from exc
        stream = opened
    else:
        stream = source

    seen = store.known_ids()
    accepted = 0
    rejects: Counter[str] = Counter()
    buffers: dict[date, list[str]] = {}
    try:
        for record in _iter_records(stream, fmt):
            if record.get("__malformed__"):
                rejects["malformed"] += 1
                continue
            post_id = str(record.get("id") or "").strip()
            if not post_id:
                rejects["malformed"] += 1
                continue
            try:
                ts = parse_utc(str(record.get("created_at", "")))
            except (ValueError, TypeError):
                rejects["bad_timestamp"] += 1
                continue
            text = str(record.get("text") or "")
            if not text.strip():
                rejects["empty_text"] += 1
                continue
            lang = str(record.get("lang") or "")
            country = str(record.get("country") or "")
            if lang != lang_filter or country != country_filter:
                rejects["filter_mismatch"] += 1
                continue
            if post_id in seen:
                rejects["duplicate_id"] += 1
                continue
            seen.add(post_id)
            post = Post(
                id=post_id,
                timestamp=ts,
                text=text,
                lang=lang,
                country=country,
                retweet=_parse_retweet(record.get("retweet", False)),
            )
            buffers.setdefault(post.day, []).append(json.dumps(post.to_json(), ensure_ascii=False))
            accepted += 1
    finally:
        if opened is not None:
            opened.close()

    store.days_dir.mkdir(parents=True, exist_ok=True)
    for day, lines in sorted(buffers.items()):
        with store.day_path(day).open("a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    with (store.root / "ids.txt").open("a", encoding="utf-8") as fh:
        for day, lines in sorted(buffers.items()):
            for line in lines:
                fh.write(json.loads(line)["id"] + "\n")

    manifest = store.manifest()
    manifest.setdefault("lang", lang_filter)
    manifest.setdefault("country", country_filter)
    manifest["accepted"] = manifest.get("accepted", 0) + accepted
    manifest["rejected"] = manifest.get("rejected", 0) + sum(rejects.values())
    reasons = manifest.setdefault("rejects_by_reason", {})
    for reason, n in rejects.items():
        reasons[reason] = reasons.get(reason, 0) + n
    (store.root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return IngestResult(accepted, sum(rejects.values()), dict(rejects), store)


def strip_markup(text: str) -> str:
    """Remove URLs and user-mention handles."""
    return _MENTION_RE.sub(" ", _URL_RE.sub(" ", text))


def tokenize(text: str, script_mode: str = "unspaced") -> list[str]:
    """Token features for one post.

    ``spaced`` mode lowercases and splits on whitespace/punctuation;
    ``unspaced`` mode emits overlapping character bigrams and trigrams over
    runs of letters/ideographs, which needs no dictionary for scripts
    written without word separators.
    """
    cleaned = strip_markup(text).lower()
    if script_mode == "spaced":
        return _WORD_RE.findall(cleaned)
    if script_mode != "unspaced":
        raise ValueError(f"unknown script_mode {script_mode!r}")
    tokens: list[str] = []
    for run in _LETTER_RUN_RE.findall(cleaned):
        tokens.extend(run[i : i + 2] for i in range(len(run) - 1))
        tokens.extend(run[i : i + 3] for i in range(len(run) - 2))
    return tokens


def build_vocabulary(token_lists: Iterable[list[str]], max_features: int = 2000) -> dict[str, int]:
    """Map the ``max_features`` most document-frequent tokens to indices.

    Built from training-set token lists only; ties broken lexicographically
    so the mapping is deterministic.
    """
    doc_freq: Counter[str] = Counter()
    for tokens in token_lists:
        doc_freq.update(set(tokens))
    ranked = sorted(doc_freq.items(), key=lambda kv: (-kv[1], kv[0]))[:max_features]
    return {token: i for i, (token, _) in enumerate(ranked)}


def signature_of(tokens: Iterable[str], vocabulary: dict[str, int], max_features: int | None = None) -> str:
    """Canonical pattern of the vocabulary indices present in one post.

    Order- and multiplicity-insensitive; out-of-vocabulary tokens are
    ignored; an empty intersection yields ``EMPTY_SIGNATURE``.
    """
    indices = {vocabulary[t] for t in tokens if t in vocabulary}
    if max_features is not None:
        indices = {i for i in indices if i < max_features}
    if not indices:
        return EMPTY_SIGNATURE
    return ",".join(str(i) for i in sorted(indices))


def matches_keywords(text: str, keywords: KeywordList, script_mode: str = "unspaced") -> bool:
    """True when the text contains an include term and no exclude term.

    Unspaced scripts match raw substrings; spaced scripts match on word
    boundaries, case-folded.
    """
    if script_mode == "unspaced":
        contains = lambda term: term in text
    else:
        folded = text.casefold()
        contains = lambda term: re.search(rf"\b{re.escape(term.casefold())}\b", folded) is not None
    if any(contains(term) for term in keywords.exclude_terms):
        return False
    return any(contains(term) for term in keywords.include_terms)


def select_training_candidates(
    store: CorpusStore,
    keywords: KeywordList,
    limit: int,
    seed: int,
    script_mode: str = "unspaced",
) -> list[Post]:
    """Up to ``limit`` keyword-matching posts, reservoir-sampled uniformly
    (seeded) over the whole corpus period."""
    if limit <= 0:
        raise ValueError("limit must be positive")
    rng = random.Random(seed)
    reservoir: list[Post] = []
    n_matches = 0
    for post in store.iter_posts():
        if not matches_keywords(post.text, keywords, script_mode):
            continue
        n_matches += 1
        if len(reservoir) < limit:
            reservoir.append(post)
        else:
            j = rng.randrange(n_matches)
            if j < limit:
                reservoir[j] = post
    return reservoir


def read_posts_jsonl(text: str) -> list[Post]:
    """Parse posts from JSONL content (used for candidate pool files)."""
    return [Post.from_json(json.loads(line)) for line in io.StringIO(text) if line.strip()]


def write_posts_jsonl(posts: Iterable[Post]) -> str:
    return "".join(json.dumps(p.to_json(), ensure_ascii=False) + "\n" for p in posts)
