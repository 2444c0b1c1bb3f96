"""End-to-end orchestration over one data directory.

Layout:

    <data_dir>/corpus/<corpus_id>/days/*.jsonl      ingested posts
    <data_dir>/corpus/<corpus_id>/candidates/*.jsonl  per-dimension pools
    <data_dir>/corpus/<corpus_id>/estimates/*.json  per (day, dimension)
    <data_dir>/corpus/<corpus_id>/index.csv         daily index
    <data_dir>/labels.jsonl                         label store

Every randomized stage draws from a named substream of the root seed, keyed
on (stage, day, dimension), so outputs do not depend on worker count or
completion order. Artifacts carry the run configuration; timestamps only
ever appear in ``*.meta.json`` sidecars so data files are byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

from . import annotation, corpus, estimator
from . import index as index_mod
from .corpus import DIMENSIONS, CorpusStore, Post
from .estimator import ConditionalBuilder

PACKAGE_DATA = Path(__file__).parent / "data"


class PipelineError(Exception):
    pass


@dataclass
class RunConfig:
    data_dir: str
    corpus: str = "default"
    seed: int = 0
    ridge: float | None = None
    alpha: float = estimator.DEFAULT_ALPHA
    max_features: int = 2000
    bootstrap: int = 0
    bandwidth: float = 60.0
    script_mode: str = "unspaced"
    workers: int = 1
    report_scale: float = 100.0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload.pop("extras")
        payload.update(self.extras)
        return payload

    @property
    def corpus_dir(self) -> Path:
        return Path(self.data_dir) / "corpus" / self.corpus

    @property
    def labels_path(self) -> Path:
        return Path(self.data_dir) / "labels.jsonl"

    def store(self) -> CorpusStore:
        return CorpusStore(self.corpus_dir)


def stage_seed(root_seed: int, stage: str, *parts: int) -> np.random.SeedSequence:
    """Named, order-independent substream of the root seed."""
    return np.random.SeedSequence([root_seed, zlib.crc32(stage.encode("utf-8")), *parts])


def seed_int(root_seed: int, stage: str, *parts: int) -> int:
    return int(stage_seed(root_seed, stage, *parts).generate_state(1)[0])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_artifact(path: Path, content: str, config: RunConfig) -> None:
    """Write a data file plus its metadata sidecar (the only place a
    timestamp appears)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
    meta = {
        "config": config.to_dict(),
        "sha256": _sha256(path),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Stage: candidate selection


def select_candidates(config: RunConfig, dimension: str, keywords_path: str | Path | None, limit: int) -> Path:
    store = config.store()
    if not store.exists():
        raise PipelineError(f"corpus {config.corpus!r} not found under {config.data_dir}")
    if keywords_path is None:
        keywords_path = PACKAGE_DATA / "keywords" / f"{dimension}.txt"
    kw = corpus.load_keyword_list(keywords_path, dimension)
    picked = corpus.select_training_candidates(
        store, kw, limit=limit, seed=seed_int(config.seed, "select", DIMENSIONS.index(dimension)),
        script_mode=config.script_mode,
    )
    out = config.corpus_dir / "candidates" / f"{dimension}.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_artifact(out, corpus.write_posts_jsonl(picked), config)
    return out


def load_candidate_pool(config: RunConfig, dimension_pool: str) -> list[Post]:
    """One dimension's saved pool, or the deduplicated union for ``all``."""
    base = config.corpus_dir / "candidates"
    names = list(DIMENSIONS) if dimension_pool == "all" else [dimension_pool]
    posts: dict[str, Post] = {}
    found = False
    for name in names:
        path = base / f"{name}.jsonl"
        if not path.exists():
            continue
        found = True
        for post in corpus.read_posts_jsonl(path.read_text(encoding="utf-8")):
            posts.setdefault(post.id, post)
    if not found:
        raise PipelineError(f"no candidate pool for {dimension_pool!r}; run select first")
    return [posts[k] for k in sorted(posts)]


# ---------------------------------------------------------------------------
# Stage: per-day estimation


def _load_training(config: RunConfig, training_dir: str | Path | None) -> dict[str, list[tuple[str, str]]]:
    """(post_id, label) pairs per dimension, from export files or the label store."""
    training: dict[str, list[tuple[str, str]]] = {}
    if training_dir is not None:
        for dim in DIMENSIONS:
            path = Path(training_dir) / f"{dim}.jsonl"
            if path.exists():
                training[dim] = annotation.read_training_jsonl(path.read_text(encoding="utf-8"), dim)
    else:
        store = annotation.LabelStore(config.labels_path)
        for dim in DIMENSIONS:
            try:
                training[dim] = annotation.export_training_set(store, dim)
            except annotation.EmptyTrainingSetError:
                continue
    return training


def run_estimates(
    config: RunConfig,
    dimensions: list[str] | None = None,
    training_dir: str | Path | None = None,
) -> list[Path]:
    """Estimate the category distribution for every (day, dimension) pair.

    The fan-out may run on several workers; every pair owns a seed substream
    so the artifacts are identical whatever the parallelism.
    """
    store = config.store()
    days = store.days()
    if not days:
        raise PipelineError(f"corpus {config.corpus!r} is empty")
    dims = dimensions or list(DIMENSIONS)
    training = _load_training(config, training_dir)
    missing = [d for d in dims if d not in training or not training[d]]
    if missing:
        raise PipelineError(f"no training data for: {', '.join(missing)}")

    posts_by_id = {p.id: p for p in store.iter_posts()}
    day_tokens: dict[date, list[list[str]]] = {}
    for day in days:
        day_tokens[day] = [corpus.tokenize(p.text, config.script_mode) for p in store.iter_posts([day])]

    prepared: dict[str, dict] = {}
    for dim in dims:
        pairs = training[dim]
        unknown = [pid for pid, _ in pairs if pid not in posts_by_id]
        if unknown:
            raise PipelineError(f"{dim}: training posts missing from corpus: {unknown[:5]}")
        token_lists = [corpus.tokenize(posts_by_id[pid].text, config.script_mode) for pid, _ in pairs]
        vocab = corpus.build_vocabulary(token_lists, config.max_features)
        examples = [
            (corpus.signature_of(tokens, vocab), label)
            for tokens, (_, label) in zip(token_lists, pairs)
        ]
        if config.ridge is None:
            ridge, grid = estimator.select_ridge_weight(
                examples, seed=seed_int(config.seed, "ridge", DIMENSIONS.index(dim)), alpha=config.alpha
            )
        else:
            ridge, grid = config.ridge, None
        prepared[dim] = {"vocab": vocab, "examples": examples, "ridge": ridge, "grid": grid}

    def run_one(day: date, dim: str) -> tuple[Path, str]:
        prep = prepared[dim]
        test = [corpus.signature_of(tokens, prep["vocab"]) for tokens in day_tokens[day]]
        builder = ConditionalBuilder(alpha=config.alpha).add(prep["examples"])
        task_seed = seed_int(config.seed, "estimate", day.toordinal(), DIMENSIONS.index(dim))
        if config.bootstrap >= 2:
            dist = estimator.bootstrap_se(builder, test, prep["ridge"], config.bootstrap, task_seed)
        else:
            dist = estimator.estimate_distribution(builder.build(strict=True), test, prep["ridge"])
        report = {
            "dimension": dim,
            "date": day.isoformat(),
            "proportions": dist.as_dict(),
            "se": dist.se_dict(),
            "n_train": len(prep["examples"]),
            "n_test": len(test),
            "lambda": prep["ridge"],
            "lambda_grid": prep["grid"],
            "seed": task_seed,
            "config": config.to_dict(),
        }
        path = config.corpus_dir / "estimates" / f"{day.isoformat()}_{dim}.json"
        return path, json.dumps(report, indent=2, sort_keys=True) + "\n"

    tasks = [(day, dim) for day in days for dim in dims]
    results: dict[tuple[date, str], tuple[Path, str]] = {}
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for (day, dim), outcome in zip(tasks, pool.map(lambda t: run_one(*t), tasks)):
                results[(day, dim)] = outcome
    else:
        for day, dim in tasks:
            results[(day, dim)] = run_one(day, dim)

    written = []
    for key in sorted(results, key=lambda k: (k[0], DIMENSIONS.index(k[1]))):
        path, content = results[key]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Stage: index assembly


def load_estimates(config: RunConfig) -> dict[date, dict[str, dict]]:
    est_dir = config.corpus_dir / "estimates"
    if not est_dir.is_dir():
        raise PipelineError("no estimates found; run estimate first")
    table: dict[date, dict[str, dict]] = {}
    for path in sorted(est_dir.glob("*.json")):
        report = json.loads(path.read_text(encoding="utf-8"))
        day = date.fromisoformat(report["date"])
        table.setdefault(day, {})[report["dimension"]] = report
    return table


def build_index_series(config: RunConfig) -> index_mod.IndexSeries:
    reports = load_estimates(config)
    days = []
    for day in sorted(reports):
        scores: dict[str, float | None] = {}
        for dim in DIMENSIONS:
            report = reports[day].get(dim)
            if report is None:
                scores[dim] = None
                continue
            dist = estimator.CategoryDistribution(
                np.array([report["proportions"][c] for c in estimator.CATEGORIES])
            )
            scores[dim] = index_mod.component_score(dist)
        days.append(index_mod.DailyComponents(day=day, scores=scores))
    return index_mod.IndexSeries(days=days, provenance={"corpus": config.corpus, "config": config.to_dict()})


def write_index(config: RunConfig) -> Path:
    series = build_index_series(config)
    out = config.corpus_dir / "index.csv"
    write_artifact(out, index_mod.render_index_csv(series), config)
    return out


def load_index_series(config: RunConfig) -> index_mod.IndexSeries:
    path = config.corpus_dir / "index.csv"
    if not path.exists():
        raise PipelineError("no index.csv; run index first")
    return index_mod.parse_index_csv(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Stage: tables and report


def bundled_components_path(country: str) -> Path:
    path = PACKAGE_DATA / f"yearly_components_{country}.csv"
    if not path.exists():
        raise PipelineError(f"no bundled components for {country!r}")
    return path


def bundled_reference_path() -> Path:
    return PACKAGE_DATA / "yearly_reference_indices.csv"


def correlation_table(table_path: str | Path, pairs: list[tuple[str, str]] | None = None) -> list[dict]:
    """Pearson r for column pairs of a wide yearly CSV (blank cells missing)."""
    import csv as _csv
    import io as _io

    text = Path(table_path).read_text(encoding="utf-8")
    reader = _csv.DictReader(_io.StringIO(text))
    columns = [c for c in (reader.fieldnames or []) if c != "year"]
    data: dict[str, list[float | None]] = {c: [] for c in columns}
    for row in reader:
        for c in columns:
            cell = (row.get(c) or "").strip()
            data[c].append(float(cell) if cell else None)
    if pairs is None:
        swb_cols = [c for c in columns if c.startswith("swb")]
        others = [c for c in columns if c not in swb_cols]
        suffix = lambda name: name.split("_", 1)[1] if "_" in name else ""
        pairs = [(a, b) for a in swb_cols for b in others if suffix(a) == suffix(b)]
        if not pairs:
            pairs = [(a, b) for a in swb_cols for b in others]
    out = []
    for a, b in pairs:
        if a not in data or b not in data:
            raise PipelineError(f"unknown column in pair {a}:{b}")
        n = sum(1 for x, y in zip(data[a], data[b]) if x is not None and y is not None)
        r = index_mod.pearson_correlation(data[a], data[b])
        out.append({"a": a, "b": b, "r": r, "n": n})
    return out


def render_correlations(rows: list[dict]) -> tuple[str, str]:
    text_lines = [f"{'series':>12} {'vs':>12} {'r':>8} {'n':>4}"]
    csv_lines = ["a,b,r,n"]
    for row in rows:
        text_lines.append(f"{row['a']:>12} {row['b']:>12} {row['r']:>8.2f} {row['n']:>4}")
        csv_lines.append(f"{row['a']},{row['b']},{row['r']:.4f},{row['n']}")
    return "\n".join(text_lines) + "\n", "\n".join(csv_lines) + "\n"


def assemble_report(config: RunConfig) -> Path:
    """Collect previously produced artifacts into one document; recompute nothing."""
    candidates = [
        config.corpus_dir / "index.csv",
        config.corpus_dir / "aggregate_week.csv",
        config.corpus_dir / "aggregate_month.csv",
        config.corpus_dir / "aggregate_year.csv",
        config.corpus_dir / "aggregate_year.txt",
        config.corpus_dir / "trend_swb.csv",
        Path(config.data_dir) / "corr.txt",
        Path(config.data_dir) / "corr.csv",
        Path(config.data_dir) / "sem_fit.txt",
        Path(config.data_dir) / "sem_fit.json",
    ]
    sections = []
    inventory = []
    for path in candidates:
        if not path.exists():
            continue
        inventory.append({"path": str(path), "sha256": _sha256(path)})
        body = path.read_text(encoding="utf-8")
        sections.append(f"## {path.name}\n\n```\n{body.rstrip()}\n```\n")
    if not inventory:
        raise PipelineError("nothing to report: no artifacts produced yet")
    report_md = "# Well-being index run report\n\n" + "\n".join(sections)
    out = Path(config.data_dir) / "report.md"
    write_artifact(out, report_md, config)
    manifest = {
        "config": config.to_dict(),
        "artifacts": inventory,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    (Path(config.data_dir) / "report.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out
