"""Aggregated category-proportion estimation from signature patterns.

The estimator never classifies single posts. It learns the conditional
distribution of signatures given each hand-coded category, observes the
signature frequencies of an unlabeled test set, and inverts

    minimize  ||p - Q pi||^2 + lambda ||pi||^2   s.t.  pi >= 0, sum(pi) = 1

for the aggregate category distribution ``pi``. A per-document argmax
baseline (classify-and-count) is kept only for comparison tests.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import EMPTY_SIGNATURE

CATEGORIES = ("positive", "neutral", "negative", "offtopic")

#: Row absorbing training signatures at or below the rarity threshold.
RARE_SIGNATURE = "RARE"

SIMPLEX_TOL = 1e-8
DEFAULT_ALPHA = 0.5
DEFAULT_LAMBDA_GRID = (0.0, 1e-4, 1e-3, 1e-2)


class EstimatorError(Exception):
    pass


class InsufficientTrainingError(EstimatorError):
    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__(f"insufficient training coverage: {', '.join(self.missing)}")


@dataclass
class CategoryDistribution:
    """Point on the category simplex, optionally with bootstrap SEs."""

    proportions: np.ndarray
    standard_errors: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.proportions = np.asarray(self.proportions, dtype=float)
        if self.proportions.shape != (len(CATEGORIES),):
            raise EstimatorError("proportions must have one entry per category")
        if np.any(self.proportions < -SIMPLEX_TOL) or abs(self.proportions.sum() - 1.0) > 1e-9:
            raise EstimatorError("proportions must lie on the simplex")

    def __getitem__(self, category: str) -> float:
        return float(self.proportions[CATEGORIES.index(category)])

    def as_dict(self) -> dict[str, float]:
        return {c: float(v) for c, v in zip(CATEGORIES, self.proportions)}

    def se_dict(self) -> dict[str, float] | None:
        if self.standard_errors is None:
            return None
        return {c: float(v) for c, v in zip(CATEGORIES, self.standard_errors)}


class ConditionalBuilder:
    """Mutable per-category signature counts; sufficient statistics for Q.

    Adding examples incrementally and rebuilding gives the identical matrix
    as a from-scratch build on the union.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA, rare_threshold: int = 1):
        self.alpha = alpha
        self.rare_threshold = rare_threshold
        self.counts: dict[str, Counter[str]] = {c: Counter() for c in CATEGORIES}

    def add(self, examples: Iterable[tuple[str, str]]) -> "ConditionalBuilder":
        for signature, category in examples:
            if category not in self.counts:
                raise EstimatorError(f"unknown category {category!r}")
            self.counts[category][signature] += 1
        return self

    def category_sizes(self) -> dict[str, int]:
        return {c: sum(self.counts[c].values()) for c in CATEGORIES}

    def missing_categories(self) -> list[str]:
        return [c for c, n in self.category_sizes().items() if n == 0]

    def build(self, strict: bool = False) -> "ConditionalMatrix":
        missing = self.missing_categories()
        if strict and missing:
            raise InsufficientTrainingError(missing)
        totals: Counter[str] = Counter()
        for c in CATEGORIES:
            totals.update(self.counts[c])
        kept = sorted(s for s, n in totals.items() if n > self.rare_threshold and s != EMPTY_SIGNATURE)
        collapsed = sorted(s for s, n in totals.items() if n <= self.rare_threshold and s != EMPTY_SIGNATURE)
        rows = kept + ([RARE_SIGNATURE] if collapsed else []) + [EMPTY_SIGNATURE]
        return ConditionalMatrix.from_counts(
            {c: dict(self.counts[c]) for c in CATEGORIES},
            alpha=self.alpha,
            rows=rows,
            collapse={s: RARE_SIGNATURE for s in collapsed},
        )


@dataclass
class ConditionalMatrix:
    """Estimated P(signature row | category), one column per category."""

    rows: list[str]
    matrix: np.ndarray
    train_counts: np.ndarray
    alpha: float
    row_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.train_counts = np.asarray(self.train_counts, dtype=float)
        if self.matrix.shape != (len(self.rows), len(CATEGORIES)):
            raise EstimatorError("matrix shape must be (rows, categories)")
        if np.any(self.matrix < 0):
            raise EstimatorError("conditional entries must be nonnegative")
        usable = self.train_counts > 0
        sums = self.matrix[:, usable].sum(axis=0)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise EstimatorError("usable columns must sum to 1")
        if not self.row_index:
            self.row_index = {s: i for i, s in enumerate(self.rows)}

    @classmethod
    def from_counts(
        cls,
        counts: Mapping[str, Mapping[str, int]],
        alpha: float = DEFAULT_ALPHA,
        rows: Sequence[str] | None = None,
        collapse: Mapping[str, str] | None = None,
    ) -> "ConditionalMatrix":
        """Additive-smoothed columns: (count + alpha) / (n_c + alpha * n_rows).

        ``rows`` defaults to the union of counted signatures; ``collapse``
        redirects individual signatures into a shared row.
        """
        collapse = dict(collapse or {})
        if rows is None:
            seen: set[str] = set()
            for per_cat in counts.values():
                seen.update(collapse.get(s, s) for s in per_cat)
            rows = sorted(seen)
        rows = list(rows)
        index = {s: i for i, s in enumerate(rows)}
        matrix = np.zeros((len(rows), len(CATEGORIES)))
        n_c = np.zeros(len(CATEGORIES))
        for j, category in enumerate(CATEGORIES):
            for signature, n in counts.get(category, {}).items():
                target = collapse.get(signature, signature)
                if target not in index:
                    raise EstimatorError(f"signature {signature!r} not covered by rows")
                matrix[index[target], j] += n
                n_c[j] += n
            denom = n_c[j] + alpha * len(rows)
            if denom > 0:
                matrix[:, j] = (matrix[:, j] + alpha) / denom
        row_index = dict(index)
        for signature, target in collapse.items():
            row_index[signature] = index[target]
        return cls(rows=rows, matrix=matrix, train_counts=n_c, alpha=alpha, row_index=row_index)

    @classmethod
    def from_probabilities(
        cls, rows: Sequence[str], matrix: np.ndarray, train_counts: Sequence[float] | None = None
    ) -> "ConditionalMatrix":
        matrix = np.asarray(matrix, dtype=float)
        counts = np.asarray(train_counts, dtype=float) if train_counts is not None else np.ones(len(CATEGORIES))
        return cls(rows=list(rows), matrix=matrix, train_counts=counts, alpha=0.0)

    @property
    def unusable_categories(self) -> list[str]:
        return [c for c, n in zip(CATEGORIES, self.train_counts) if n == 0]

    @property
    def usable(self) -> bool:
        return not self.unusable_categories

    def row_of(self, signature: str) -> int:
        """Row of a signature; anything outside the matrix maps to EMPTY."""
        idx = self.row_index.get(signature)
        if idx is None:
            idx = self.row_index.get(EMPTY_SIGNATURE)
            if idx is None:
                raise EstimatorError("matrix has no EMPTY row to absorb unseen signatures")
        return idx

    def test_frequencies(self, test: Iterable[str]) -> tuple[np.ndarray, int]:
        counts = np.zeros(len(self.rows))
        n = 0
        for signature in test:
            counts[self.row_of(signature)] += 1
            n += 1
        if n == 0:
            raise EstimatorError("empty test set")
        return counts / n, n


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def solve_simplex_least_squares(A: np.ndarray, b: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Global minimizer of ||b - Ax||^2 + ridge ||x||^2 on the simplex.

    Active-set enumeration: every face of the simplex (2^k - 1 for k
    columns, k = 4 here) yields an equality-constrained candidate; the best
    feasible one is polished by projected gradient, which also covers
    degenerate faces where the KKT system is singular.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    k = A.shape[1]
    H = A.T @ A + ridge * np.eye(k)
    c = A.T @ b

    def objective(x: np.ndarray) -> float:
        r = b - A @ x
        return float(r @ r + ridge * (x @ x))

    best_x = np.full(k, 1.0 / k)
    best_obj = objective(best_x)
    for size in range(1, k + 1):
        for subset in itertools.combinations(range(k), size):
            S = list(subset)
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = 2.0 * H[np.ix_(S, S)]
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.append(2.0 * c[S], 1.0)
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            x_s = sol[:size]
            if np.any(x_s < -1e-9):
                continue
            x = np.zeros(k)
            x[S] = np.clip(x_s, 0.0, None)
            total = x.sum()
            if total <= 0:
                continue
            x /= total
            obj = objective(x)
            if obj < best_obj - 1e-15:
                best_obj = obj
                best_x = x

    # Projected-gradient polish; step from the largest Hessian eigenvalue.
    lip = 2.0 * max(float(np.linalg.eigvalsh(H)[-1]), 1e-12)
    x = best_x
    for _ in range(500):
        grad = 2.0 * (H @ x - c)
        x_next = project_to_simplex(x - grad / lip)
        if objective(x_next) <= best_obj + 1e-15:
            if np.max(np.abs(x_next - x)) < 1e-14:
                x = x_next
                break
            best_obj = min(best_obj, objective(x_next))
            x = x_next
        else:
            break
    return x


def build_conditional(
    training: Iterable[tuple[str, str]],
    alpha: float = DEFAULT_ALPHA,
    rare_threshold: int = 1,
) -> ConditionalMatrix:
    """Conditional matrix from (signature, category) examples.

    Requires at least one example per category; the error names whichever
    categories are missing.
    """
    return ConditionalBuilder(alpha=alpha, rare_threshold=rare_threshold).add(training).build(strict=True)


def augment_training(
    builder: ConditionalBuilder, new_examples: Iterable[tuple[str, str]]
) -> ConditionalBuilder:
    """Fold more labeled examples into the builder state (counts update
    incrementally; rebuilding equals a from-scratch build on the union)."""
    return builder.add(new_examples)


def estimate_distribution(
    Q: ConditionalMatrix, test: Sequence[str], ridge: float = 0.0
) -> CategoryDistribution:
    """Aggregate category distribution of a test signature list.

    Invariant under permutation and whole-list duplication of ``test``
    because only the empirical signature frequencies enter the solve.
    """
    if ridge < 0:
        raise EstimatorError("ridge weight must be >= 0")
    if not Q.usable:
        raise EstimatorError(
            f"conditional matrix unusable, no training for: {', '.join(Q.unusable_categories)}"
        )
    p, _ = Q.test_frequencies(test)
    pi = solve_simplex_least_squares(Q.matrix, p, ridge=ridge)
    return CategoryDistribution(proportions=pi)


def classify_and_count(Q: ConditionalMatrix, test: Sequence[str]) -> CategoryDistribution:
    """Baseline: per-document argmax over the conditional columns, tallied."""
    if not Q.usable:
        raise EstimatorError("conditional matrix unusable")
    counts, n = Q.test_frequencies(test)
    winners = np.argmax(Q.matrix, axis=1)
    pi = np.zeros(len(CATEGORIES))
    for row, freq in enumerate(counts):
        pi[winners[row]] += freq
    return CategoryDistribution(proportions=pi)


def bootstrap_se(
    builder: ConditionalBuilder,
    test: Sequence[str],
    ridge: float,
    n_replicates: int,
    seed: int,
) -> CategoryDistribution:
    """Point estimate plus bootstrap standard errors.

    Training is resampled with replacement within each category and the test
    list with replacement, ``n_replicates`` times. Each replicate draws from
    its own seed substream, so results do not depend on evaluation order or
    parallelism. Point estimate is the non-resampled fit.
    """
    if n_replicates < 2:
        raise EstimatorError("need at least 2 bootstrap replicates")
    Q = builder.build(strict=True)
    point = estimate_distribution(Q, test, ridge)

    test_counter = Counter(test)
    test_sigs = sorted(test_counter)
    test_counts = np.array([test_counter[s] for s in test_sigs], dtype=float)
    n_test = int(test_counts.sum())

    cat_sigs = {c: sorted(builder.counts[c]) for c in CATEGORIES}
    cat_counts = {
        c: np.array([builder.counts[c][s] for s in cat_sigs[c]], dtype=float) for c in CATEGORIES
    }

    children = np.random.SeedSequence(seed).spawn(n_replicates)
    estimates = []
    failures = 0
    for child in children:
        rng = np.random.default_rng(child)
        rep = ConditionalBuilder(alpha=builder.alpha, rare_threshold=builder.rare_threshold)
        for c in CATEGORIES:
            n_c = int(cat_counts[c].sum())
            if n_c == 0:
                continue
            draw = rng.multinomial(n_c, cat_counts[c] / n_c)
            for s, n in zip(cat_sigs[c], draw):
                if n:
                    rep.counts[c][s] = int(n)
        test_draw = rng.multinomial(n_test, test_counts / n_test)
        rep_test: list[str] = []
        for s, n in zip(test_sigs, test_draw):
            rep_test.extend([s] * int(n))
        try:
            estimates.append(estimate_distribution(rep.build(strict=True), rep_test, ridge).proportions)
        except EstimatorError:
            failures += 1
    if failures > n_replicates / 2:
        raise EstimatorError(f"{failures}/{n_replicates} bootstrap replicates failed")
    se = np.std(np.vstack(estimates), axis=0, ddof=1)
    return CategoryDistribution(proportions=point.proportions, standard_errors=se)


def select_ridge_weight(
    training: Sequence[tuple[str, str]],
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    rare_threshold: int = 1,
    rounds: int = 16,
    splits: int = 2,
    n_eval: int = 2000,
) -> tuple[float, list[float]]:
    """Pick the ridge weight by reconstructing held-out mixtures.

    Each category block is split in half (seeded); a matrix built on the
    first halves must recover seeded random mixtures resampled from the
    held-out halves, whose composition is known exactly. The grid value
    with the lowest total L1 reconstruction error wins; ties prefer the
    smaller weight. Pure single-category targets would make any shrinkage
    look harmful (mass pulled off the corner), so mixture targets carry
    the selection signal instead.
    """
    rng = np.random.default_rng(seed)
    by_cat: dict[str, list[str]] = {c: [] for c in CATEGORIES}
    for signature, category in training:
        by_cat[category].append(signature)

    errors = np.zeros(len(grid))
    for _ in range(splits):
        halves: dict[str, tuple[list[str], list[str]]] = {}
        for c in CATEGORIES:
            sigs = sorted(by_cat[c])
            order = rng.permutation(len(sigs))
            sigs = [sigs[i] for i in order]
            mid = max(1, len(sigs) // 2) if len(sigs) > 1 else len(sigs)
            halves[c] = (sigs[:mid], sigs[mid:])
        if any(not halves[c][0] or not halves[c][1] for c in CATEGORIES):
            return grid[0], list(grid)
        fit_examples = [(s, c) for c in CATEGORIES for s in halves[c][0]]
        Q = build_conditional(fit_examples, alpha=alpha, rare_threshold=rare_threshold)
        for _ in range(rounds):
            weights = rng.dirichlet(np.ones(len(CATEGORIES)))
            counts = rng.multinomial(n_eval, weights)
            held_test: list[str] = []
            for c, n in zip(CATEGORIES, counts):
                held = halves[c][1]
                held_test.extend(held[i] for i in rng.integers(0, len(held), n))
            target = counts / counts.sum()
            for gi, lam in enumerate(grid):
                pi = estimate_distribution(Q, held_test, lam).proportions
                errors[gi] += float(np.abs(pi - target).sum())
    return float(grid[int(np.argmin(errors))]), list(grid)
