"""Latent-variable path models: compact text syntax and covariance algebra.

Grammar, one statement per line (``#`` starts a comment):

    latent =~ ind1 + ind2 ...    measurement loadings
    y ~ x1 + x2 ...              regression
    a ~~ b                       residual covariance (a ~~ a: variance)

Names on the left of ``=~`` are latent, everything else observed. The
parameter table is completed automatically: a residual variance for every
observed variable, a (disturbance) variance for every latent. Identification
is by standardization: latent variances are fixed to 1 and all loadings stay
free, which assumes standardized input columns. A latent with a single
indicator is identified by fixing that indicator's residual variance to
``SINGLE_INDICATOR_RESIDUAL`` of its standardized variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

SINGLE_INDICATOR_RESIDUAL = 0.05

START_LOADING = 0.5
START_REGRESSION = 0.0
START_COVARIANCE = 0.0
START_RESIDUAL_VARIANCE = 0.5

OPS = ("=~", "~~", "~")


class SemError(Exception):
    pass


class SemSyntaxError(SemError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Parameter:
    lhs: str
    op: str
    rhs: str
    start: float
    free: bool = True

    @property
    def key(self) -> tuple[str, str, str]:
        if self.op == "~~":
            a, b = sorted((self.lhs, self.rhs))
            return (a, "~~", b)
        return (self.lhs, self.op, self.rhs)

    @property
    def label(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass
class SemModel:
    latents: list[str]
    observed: list[str]
    parameters: list[Parameter] = field(default_factory=list)

    def __post_init__(self) -> None:
        dup = set(self.latents) & set(self.observed)
        if dup:
            raise SemError(f"names declared both latent and observed: {sorted(dup)}")

    # -- parameter bookkeeping -------------------------------------------------

    @property
    def variables(self) -> list[str]:
        return self.latents + self.observed

    @property
    def free_parameters(self) -> list[Parameter]:
        return [p for p in self.parameters if p.free]

    def start_vector(self) -> np.ndarray:
        return np.array([p.start for p in self.free_parameters], dtype=float)

    def parameter_values(self, theta: Sequence[float]) -> list[tuple[Parameter, float]]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(self.free_parameters),):
            raise SemError(
                f"theta has {theta.shape[0] if theta.ndim else 0} entries, "
                f"model has {len(self.free_parameters)} free parameters"
            )
        values = []
        it = iter(theta)
        for p in self.parameters:
            values.append((p, float(next(it)) if p.free else p.start))
        return values

    def fix(self, lhs: str, op: str, rhs: str, value: float) -> None:
        key = Parameter(lhs, op, rhs, 0.0).key
        for i, p in enumerate(self.parameters):
            if p.key == key:
                self.parameters[i] = replace(p, start=value, free=False)
                return
        raise SemError(f"no such parameter: {lhs} {op} {rhs}")

    def serialize(self) -> str:
        """The link statements; variance rows are regenerated on parse."""
        lines = []
        for p in self.parameters:
            if p.op == "~~" and p.lhs == p.rhs:
                continue
            lines.append(p.label)
        return "\n".join(lines) + "\n"

    # -- covariance algebra ----------------------------------------------------

    def _matrices(self, theta: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Directed-coefficient matrix A and residual covariance S0 over
        latents + observed, in ``variables`` order."""
        order = {name: i for i, name in enumerate(self.variables)}
        m = len(order)
        A = np.zeros((m, m))
        S0 = np.zeros((m, m))
        for p, value in self.parameter_values(theta):
            if p.op == "=~":
                A[order[p.rhs], order[p.lhs]] = value
            elif p.op == "~":
                A[order[p.lhs], order[p.rhs]] = value
            else:
                i, j = order[p.lhs], order[p.rhs]
                S0[i, j] = value
                S0[j, i] = value
        return A, S0

    def implied_covariance(self, theta: Sequence[float]) -> np.ndarray:
        """Sigma(theta) = F (I - A)^-1 S0 (I - A)^-T F^T over observed variables."""
        A, S0 = self._matrices(theta)
        m = A.shape[0]
        eye = np.eye(m)
        try:
            B = np.linalg.solve(eye - A, eye)
        except np.linalg.LinAlgError:
            raise SemError("cyclic or degenerate path structure") from None
        if not np.isfinite(B).all() or np.linalg.cond(eye - A) > 1e12:
            raise SemError("cyclic or degenerate path structure")
        full = B @ S0 @ B.T
        k = len(self.latents)
        return full[k:, k:]

    def implied_covariance_gradient(self, theta: Sequence[float]) -> np.ndarray:
        """d Sigma / d theta, one (p, p) slab per free parameter."""
        A, S0 = self._matrices(theta)
        m = A.shape[0]
        eye = np.eye(m)
        B = np.linalg.solve(eye - A, eye)
        BS = B @ S0
        k = len(self.latents)
        order = {name: i for i, name in enumerate(self.variables)}
        slabs = []
        for p in self.free_parameters:
            if p.op == "=~":
                i, j = order[p.rhs], order[p.lhs]
                directed = True
            elif p.op == "~":
                i, j = order[p.lhs], order[p.rhs]
                directed = True
            else:
                i, j = order[p.lhs], order[p.rhs]
                directed = False
            if directed:
                # dB = B E_ij B, so dSigma = (B E_ij B) S0 B^T + transpose.
                left = B[:, i : i + 1] @ (B[j : j + 1, :] @ S0) @ B.T
                slab = left + left.T
            else:
                dS = np.zeros((m, m))
                dS[i, j] = 1.0
                dS[j, i] = 1.0
                slab = B @ dS @ B.T
            slabs.append(slab[k:, k:])
        return np.array(slabs)


def _complete(model: SemModel) -> SemModel:
    """Append the implicit variance rows and apply the identification scheme."""
    have = {p.key for p in model.parameters}
    indicator_count: dict[str, list[str]] = {lat: [] for lat in model.latents}
    for p in model.parameters:
        if p.op == "=~":
            indicator_count[p.lhs].append(p.rhs)

    for name in model.observed:
        key = (name, "~~", name)
        if key not in have:
            model.parameters.append(Parameter(name, "~~", name, START_RESIDUAL_VARIANCE))
            have.add(key)
    for name in model.latents:
        key = (name, "~~", name)
        if key not in have:
            model.parameters.append(Parameter(name, "~~", name, 1.0, free=False))
            have.add(key)
        else:
            model.fix(name, "~~", name, 1.0)

    for latent, indicators in indicator_count.items():
        if len(indicators) == 1:
            model.fix(indicators[0], "~~", indicators[0], SINGLE_INDICATOR_RESIDUAL)
    return model


def parse_model(text: str) -> SemModel:
    """Parse the grammar above into a completed model."""
    links: list[tuple[str, str, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op = next((candidate for candidate in OPS if candidate in line), None)
        if op is None:
            raise SemSyntaxError(f"no operator in {line!r}", lineno)
        lhs_raw, rhs_raw = line.split(op, 1)
        lhs = lhs_raw.strip()
        if not lhs or " " in lhs:
            raise SemSyntaxError(f"bad left-hand side {lhs_raw.strip()!r}", lineno)
        rhs_terms = [t.strip() for t in rhs_raw.split("+")]
        if op == "~~" and len(rhs_terms) != 1:
            raise SemSyntaxError("covariance lines take exactly one right-hand name", lineno)
        for term in rhs_terms:
            if not term or " " in term:
                raise SemSyntaxError(f"bad name {term!r}", lineno)
            links.append((lhs, op, term, lineno))

    latents: list[str] = []
    for lhs, op, _, _ in links:
        if op == "=~" and lhs not in latents:
            latents.append(lhs)
    observed: list[str] = []
    for lhs, op, rhs, _ in links:
        for name in (lhs, rhs):
            if name not in latents and name not in observed:
                observed.append(name)

    model = SemModel(latents=latents, observed=observed)
    seen: set[tuple[str, str, str]] = set()
    for lhs, op, rhs, lineno in links:
        if op == "=~":
            param = Parameter(lhs, op, rhs, START_LOADING)
        elif op == "~":
            param = Parameter(lhs, op, rhs, START_REGRESSION)
        else:
            start = START_RESIDUAL_VARIANCE if lhs == rhs else START_COVARIANCE
            param = Parameter(lhs, op, rhs, start)
        if param.key in seen:
            raise SemSyntaxError(f"duplicate link {param.label!r}", lineno)
        seen.add(param.key)
        model.parameters.append(param)
    return _complete(model)


BUILTIN_MODEL_TEXT = """\
# Latent economic state measured by growth and labour indicators;
# latent well-being measured by the daily index, driven by the economy
# and by life expectancy, with residual links between growth and the rest.
economy =~ gdp + cons + inv + unemp
wellbeing =~ swb
wellbeing ~ economy + le40
gdp ~~ le40
gdp ~~ cons
gdp ~~ inv
gdp ~~ unemp
"""


def builtin_swb_model() -> SemModel:
    """The shipped two-latent model relating the economy, life expectancy
    and the well-being index."""
    return parse_model(BUILTIN_MODEL_TEXT)


def saturated_model(names: Sequence[str]) -> SemModel:
    """All variances and covariances free: discrepancy 0 is attainable."""
    model = SemModel(latents=[], observed=list(names))
    for i, a in enumerate(names):
        model.parameters.append(Parameter(a, "~~", a, START_RESIDUAL_VARIANCE))
        for b in names[i + 1 :]:
            model.parameters.append(Parameter(a, "~~", b, START_COVARIANCE))
    return model


def simulate_observations(
    model: SemModel, theta: Sequence[float], n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw observations through the path equations: u ~ N(0, S0),
    v = (I - A)^-1 u, keep the observed block."""
    A, S0 = model._matrices(theta)
    m = A.shape[0]
    L = np.linalg.cholesky(S0 + 1e-12 * np.eye(m))
    z = rng.standard_normal((n, m))
    u = z @ L.T
    B = np.linalg.solve(np.eye(m) - A, np.eye(m))
    v = u @ B.T
    return v[:, len(model.latents) :]
