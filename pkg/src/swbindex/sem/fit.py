"""Maximum-likelihood covariance-structure fitting.

Minimizes F(theta) = log det Sigma + tr(S Sigma^-1) - log det S - p with a
BFGS iteration whose line search rejects any step leaving the positive-
definite region, followed by a Newton polish on the numerical Hessian.
Standard errors come from the inverse of (N - 1)/2 times the Hessian of F
at the optimum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .model import Parameter, SemError, SemModel

GRADIENT_TOL = 1e-6
MAX_ITERATIONS = 500


def star_code(p_value: float) -> str:
    """Significance stars: *p<0.1, **p<0.05, ***p<0.01 (open on the left)."""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def _logdet_pd(matrix: np.ndarray) -> float | None:
    """log det via Cholesky; None when the matrix is not positive definite."""
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def ml_discrepancy(S: np.ndarray, sigma: np.ndarray) -> float | None:
    """The ML fitting function; None outside the PD region."""
    logdet_sigma = _logdet_pd(sigma)
    if logdet_sigma is None:
        return None
    logdet_s = _logdet_pd(S)
    if logdet_s is None:
        raise SemError("sample covariance is not positive definite")
    p = S.shape[0]
    return logdet_sigma + float(np.trace(S @ np.linalg.inv(sigma))) - logdet_s - p


@dataclass
class SemFit:
    model: SemModel
    theta: np.ndarray
    discrepancy: float
    gradient_max: float
    converged: bool
    iterations: int
    n: int
    standard_errors: np.ndarray | None
    se_note: str | None = None

    def rows(self) -> list[dict]:
        """One dict per parameter (free and fixed) with estimate, SE, z, p, stars."""
        out = []
        free_idx = 0
        for param, value in self.model.parameter_values(self.theta):
            row: dict = {
                "lhs": param.lhs,
                "op": param.op,
                "rhs": param.rhs,
                "estimate": value,
                "free": param.free,
                "se": None,
                "z": None,
                "p_value": None,
                "stars": "",
            }
            if param.free:
                if self.standard_errors is not None:
                    se = float(self.standard_errors[free_idx])
                    row["se"] = se
                    if se > 0:
                        z = value / se
                        p = math.erfc(abs(z) / math.sqrt(2.0))
                        row.update(z=z, p_value=p, stars=star_code(p))
                free_idx += 1
            out.append(row)
        return out

    def estimate(self, lhs: str, op: str, rhs: str) -> float:
        key = Parameter(lhs, op, rhs, 0.0).key
        for param, value in self.model.parameter_values(self.theta):
            if param.key == key:
                return value
        raise SemError(f"no such parameter: {lhs} {op} {rhs}")

    def report_text(self) -> str:
        """Aligned coefficient table: relationship, operator, estimate, SE, stars."""
        lines = [
            f"{'lhs':>14} {'op':>3} {'rhs':>14} {'coef':>10} {'se':>8}  stars",
            "-" * 60,
        ]
        for row in self.rows():
            se = f"{row['se']:8.3f}" if row["se"] is not None else f"{'--':>8}"
            tag = "" if row["free"] else "  (fixed)"
            lines.append(
                f"{row['lhs']:>14} {row['op']:>3} {row['rhs']:>14} "
                f"{row['estimate']:10.3f} {se}  {row['stars']}{tag}"
            )
        lines.append("-" * 60)
        lines.append(f"N = {self.n}, discrepancy = {self.discrepancy:.6f}, "
                     f"converged = {self.converged} ({self.iterations} iterations)")
        lines.append("Note: *p<0.1; **p<0.05; ***p<0.01")
        if self.se_note:
            lines.append(f"Note: {self.se_note}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "discrepancy": self.discrepancy,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_max": self.gradient_max,
            "se_note": self.se_note,
            "parameters": self.rows(),
        }
        return json.dumps(payload, indent=2)


def _objective_and_gradient(model: SemModel, S: np.ndarray, theta: np.ndarray):
    sigma = model.implied_covariance(theta)
    f = ml_discrepancy(S, sigma)
    if f is None:
        return None, None
    sigma_inv = np.linalg.inv(sigma)
    weight = sigma_inv @ (sigma - S) @ sigma_inv
    slabs = model.implied_covariance_gradient(theta)
    grad = np.array([float(np.sum(weight * slab)) for slab in slabs])
    return f, grad


def discrepancy_gradient(model: SemModel, S: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Analytic gradient of the ML discrepancy, d F = tr(Sigma^-1 (Sigma - S) Sigma^-1 dSigma)."""
    f, grad = _objective_and_gradient(model, S, np.asarray(theta, dtype=float))
    if f is None:
        raise SemError("implied covariance not positive definite at theta")
    return grad


def numerical_hessian(model: SemModel, S: np.ndarray, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of the analytic gradient; symmetrized."""
    k = len(theta)
    H = np.zeros((k, k))
    for i in range(k):
        h = step * max(1.0, abs(theta[i]))
        plus = theta.copy()
        plus[i] += h
        minus = theta.copy()
        minus[i] -= h
        H[i] = (discrepancy_gradient(model, S, plus) - discrepancy_gradient(model, S, minus)) / (2 * h)
    return (H + H.T) / 2.0


def _line_search(model, S, theta, direction, f0, grad):
    """Backtracking Armijo search that treats non-PD points as failures."""
    slope = float(grad @ direction)
    step = 1.0
    for _ in range(60):
        candidate = theta + step * direction
        f, g = _objective_and_gradient(model, S, candidate)
        if f is not None and f <= f0 + 1e-4 * step * slope:
            return candidate, f, g, step
        step *= 0.5
    return None, None, None, 0.0


def fit_ml(model: SemModel, S: np.ndarray, n: int) -> SemFit:
    """Fit by quasi-Newton ML; see module docstring for the contract."""
    S = np.asarray(S, dtype=float)
    p = S.shape[0]
    if S.shape != (p, p) or not np.allclose(S, S.T, atol=1e-10):
        raise SemError("sample covariance must be square and symmetric")
    if _logdet_pd(S) is None:
        raise SemError("sample covariance is not positive definite")
    if n <= p:
        raise SemError(f"sample size {n} must exceed the number of observed variables {p}")
    if len(model.observed) != p:
        raise SemError(
            f"model has {len(model.observed)} observed variables, covariance has {p}"
        )

    theta = model.start_vector()
    f, grad = _objective_and_gradient(model, S, theta)
    if f is None:
        raise SemError("start values give a non-PD implied covariance")

    k = len(theta)
    h_inv = np.eye(k)
    iterations = 0
    while iterations < MAX_ITERATIONS and float(np.max(np.abs(grad))) >= GRADIENT_TOL:
        iterations += 1
        direction = -h_inv @ grad
        if float(grad @ direction) >= 0:
            h_inv = np.eye(k)
            direction = -grad
        new_theta, new_f, new_grad, step = _line_search(model, S, theta, direction, f, grad)
        if new_theta is None:
            # Try plain steepest descent once before giving up.
            h_inv = np.eye(k)
            new_theta, new_f, new_grad, step = _line_search(model, S, theta, -grad, f, grad)
            if new_theta is None:
                break
        s = new_theta - theta
        y = new_grad - grad
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y) + 1e-300):
            rho = 1.0 / sy
            eye = np.eye(k)
            h_inv = (eye - rho * np.outer(s, y)) @ h_inv @ (eye - rho * np.outer(y, s)) + rho * np.outer(s, s)
        theta, f, grad = new_theta, new_f, new_grad

    # Newton polish on the numerical Hessian to push the gradient below tol,
    # within the same overall iteration budget.
    polish = 0
    while (
        polish < 25
        and iterations + polish < MAX_ITERATIONS
        and float(np.max(np.abs(grad))) >= GRADIENT_TOL
    ):
        polish += 1
        H = numerical_hessian(model, S, theta)
        try:
            direction = -np.linalg.solve(H + 1e-10 * np.eye(k), grad)
        except np.linalg.LinAlgError:
            break
        if float(grad @ direction) >= 0:
            direction = -grad
        new_theta, new_f, new_grad, _ = _line_search(model, S, theta, direction, f, grad)
        if new_theta is None:
            break
        theta, f, grad = new_theta, new_f, new_grad

    grad_max = float(np.max(np.abs(grad)))
    converged = grad_max < GRADIENT_TOL

    se = None
    se_note = None
    H = numerical_hessian(model, S, theta)
    information = (n - 1) / 2.0 * H
    try:
        np.linalg.cholesky(information)
        cov = np.linalg.inv(information)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se_note = "standard errors unavailable: information matrix not positive definite"

    return SemFit(
        model=model,
        theta=theta,
        discrepancy=float(f),
        gradient_max=grad_max,
        converged=converged,
        iterations=iterations + polish,
        n=n,
        standard_errors=se,
        se_note=se_note,
    )
