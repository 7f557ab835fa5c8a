"""Moment estimation of (alpha, beta) from a possibly noisy bi-degree sequence.

The estimator solves F(theta) = 0 with

    F_i(theta)     = z_i^+ - sum_{j != i} mu(alpha_i + beta_j),   i = 1..n
    F_{n+j}(theta) = z_j^- - sum_{i != j} mu(alpha_i + beta_j),   j = 1..n-1

where mu(s) is the dyad mean. The in-degree equation of node n is dropped
because beta_n = 0. The Jacobian is -V with V the Fisher information, so a
Newton step is theta <- theta + V^{-1} F.

V has diagonal alpha-alpha and beta-beta blocks, so the Newton system is
solved through the (n-1) x (n-1) Schur complement of the alpha block.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import kernels
from .model import (
    ApproxInverse,
    BiDegree,
    InfoMatrix,
    ModelSpec,
    ParameterVector,
    approx_inverse,
    fisher_information,
)
from .privacy import PrivacyBudget, PrivateBiDegree, sum_noise_variance

__all__ = [
    "Status",
    "SolveOptions",
    "SolveReport",
    "EstimateResult",
    "MomentSystem",
    "ContrastStats",
    "residual",
    "newton_solve",
    "fixed_point_solve",
    "estimate",
    "contrast_statistics",
    "theoretical_covariance",
    "estimate_to_json",
]


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    MAX_ITERATIONS = "MaxIterations"
    SINGULAR_JACOBIAN = "SingularJacobian"


@dataclass(frozen=True)
class SolveOptions:
    """Stopping rules. ``tol=None`` means 1e-8 * max(1, ||z||_inf)."""

    tol: float | None = None
    max_iter: int = 100
    divergence_bound: float = 30.0
    max_halvings: int = 20

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.divergence_bound > 0:
            raise ValueError("divergence_bound must be > 0")


@dataclass(frozen=True)
class SolveReport:
    status: Status
    theta_hat: ParameterVector | None
    iterations: int
    final_residual: float

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: ParameterVector
    fisher_hat: InfoMatrix
    approx_inv_hat: ApproxInverse


@dataclass(frozen=True)
class MomentSystem:
    """Targets (z^+, z^-) as floats plus the model dimensions.

    Built from either a PrivateBiDegree or an exact BiDegree; the solver only
    ever sees the released vector.
    """

    z_out: np.ndarray
    z_in: np.ndarray
    spec: ModelSpec

    @classmethod
    def from_degrees(cls, deg, spec: ModelSpec) -> "MomentSystem":
        if isinstance(deg, PrivateBiDegree):
            out, in_ = deg.z_out, deg.z_in
        elif isinstance(deg, BiDegree):
            out, in_ = deg.out, deg.in_
        else:
            out, in_ = deg
        out = np.asarray(out, dtype=np.float64)
        in_ = np.asarray(in_, dtype=np.float64)
        if out.shape != (spec.n,) or in_.shape != (spec.n,):
            raise ValueError(f"degree vectors must have length n={spec.n}")
        return cls(out, in_, spec)

    @property
    def dim(self) -> int:
        return 2 * self.spec.n - 1

    @property
    def target(self) -> np.ndarray:
        return np.concatenate([self.z_out, self.z_in[:-1]])

    def default_tol(self) -> float:
        zmax = max(np.abs(self.z_out).max(), np.abs(self.z_in).max())
        return 1e-8 * max(1.0, float(zmax))


def _residual_from_mean(mean: np.ndarray, sys: MomentSystem) -> np.ndarray:
    return sys.target - np.concatenate([mean.sum(axis=1), mean.sum(axis=0)[:-1]])


def residual(theta: ParameterVector, sys: MomentSystem) -> np.ndarray:
    if theta.n != sys.spec.n:
        raise ValueError("parameter length does not match the system")
    mean, _ = kernels.dyad_moments(theta.alpha, theta.beta, sys.spec.q)
    return _residual_from_mean(mean, sys)


def _split(theta: np.ndarray, n: int):
    return theta[:n], np.append(theta[n:], 0.0)


def _newton_direction(var: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Solve V x = f using the Schur complement of the diagonal alpha block.

    Raises LinAlgError when V is not numerically positive definite.
    """
    n = var.shape[0]
    cross = var[:, : n - 1]
    d1 = var.sum(axis=1)
    d2 = var.sum(axis=0)[:-1]
    if np.any(d1 <= 0.0) or np.any(d2 <= 0.0):
        raise np.linalg.LinAlgError("zero diagonal in information matrix")
    f1, f2 = f[:n], f[n:]
    scaled = cross / d1[:, None]
    schur = np.diag(d2) - cross.T @ scaled
    rhs = f2 - scaled.T @ f1
    factor = linalg.cho_factor(schur, lower=True, check_finite=False)
    if not np.all(np.diag(factor[0]) > 0):
        raise np.linalg.LinAlgError("Schur complement not positive definite")
    y = linalg.cho_solve(factor, rhs, check_finite=False)
    x = (f1 - cross @ y) / d1
    return np.concatenate([x, y])


def newton_solve(sys: MomentSystem, opts: SolveOptions | None = None,
                 theta0: ParameterVector | None = None) -> SolveReport:
    """Damped Newton iteration from theta = 0 (or ``theta0``)."""
    opts = opts or SolveOptions()
    n, q = sys.spec.n, sys.spec.q
    tol = opts.tol if opts.tol is not None else sys.default_tol()
    theta = np.zeros(2 * n - 1) if theta0 is None else theta0.theta.copy()

    alpha, beta = _split(theta, n)
    mean, var = kernels.dyad_moments(alpha, beta, q)
    f = _residual_from_mean(mean, sys)
    fnorm = float(np.abs(f).max())

    for it in range(opts.max_iter + 1):
        if fnorm <= tol:
            # one more (quadratically convergent) step, kept only if it helps
            try:
                step = _newton_direction(var, f)
                pa, pb = _split(theta + step, n)
                p_mean, _ = kernels.dyad_moments(pa, pb, q)
                p_norm = float(np.abs(_residual_from_mean(p_mean, sys)).max())
                if p_norm < fnorm:
                    alpha, beta, fnorm = pa, pb, p_norm
            except (np.linalg.LinAlgError, linalg.LinAlgError):
                pass
            return SolveReport(Status.CONVERGED, ParameterVector(alpha, beta), it, fnorm)
        if it == opts.max_iter:
            break
        try:
            step = _newton_direction(var, f)
        except (np.linalg.LinAlgError, linalg.LinAlgError):
            return SolveReport(Status.SINGULAR_JACOBIAN, None, it, fnorm)
        if not np.all(np.isfinite(step)):
            return SolveReport(Status.SINGULAR_JACOBIAN, None, it, fnorm)

        t = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = theta + t * step
            ta, tb = _split(trial, n)
            t_mean, t_var = kernels.dyad_moments(ta, tb, q)
            t_f = _residual_from_mean(t_mean, sys)
            t_norm = float(np.abs(t_f).max())
            if t_norm <= fnorm:
                break
            t *= 0.5
        else:
            return SolveReport(Status.MAX_ITERATIONS, None, it + 1, fnorm)

        theta, alpha, beta = trial, ta, tb
        mean, var, f, fnorm = t_mean, t_var, t_f, t_norm
        if np.abs(theta).max() > opts.divergence_bound:
            return SolveReport(Status.DIVERGED, None, it + 1, fnorm)

    return SolveReport(Status.MAX_ITERATIONS, None, opts.max_iter, fnorm)


def fixed_point_solve(sys: MomentSystem, opts: SolveOptions | None = None) -> SolveReport:
    """Alternating block updates: every alpha_i given beta, then every beta_j given alpha.

    Each coordinate equation is scalar and strictly increasing, so it is solved
    exactly by safeguarded Newton/bisection. One sweep counts as one iteration.
    Convergence is linear, so callers usually want a larger ``max_iter`` than
    for :func:`newton_solve`.
    """
    opts = opts or SolveOptions(max_iter=5000)
    n, q = sys.spec.n, sys.spec.q
    # The global shift (alpha + c, beta - c) contracts slowly under sweeps, so
    # a small residual leaves a comparatively large error along it.
    tol = opts.tol if opts.tol is not None else 1e-3 * sys.default_tol()
    alpha = np.zeros(n)
    beta = np.zeros(n)
    f = residual(ParameterVector(alpha, beta), sys)
    fnorm = float(np.abs(f).max())
    for it in range(opts.max_iter + 1):
        if fnorm <= tol:
            return SolveReport(Status.CONVERGED, ParameterVector(alpha, beta), it, fnorm)
        if it == opts.max_iter:
            break
        r = opts.divergence_bound + 1.0
        reach = r + np.abs(beta).max()
        alpha = kernels.solve_coordinates(sys.z_out, alpha, beta, -reach, reach, q)
        reach = r + np.abs(alpha).max()
        beta[:-1] = kernels.solve_coordinates(sys.z_in[:-1], beta[:-1], alpha, -reach, reach, q)
        if max(np.abs(alpha).max(), np.abs(beta).max()) > opts.divergence_bound:
            return SolveReport(Status.DIVERGED, None, it + 1, fnorm)
        f = residual(ParameterVector(alpha, beta), sys)
        fnorm = float(np.abs(f).max())
    return SolveReport(Status.MAX_ITERATIONS, None, opts.max_iter, fnorm)


def estimate(sys: MomentSystem, opts: SolveOptions | None = None, solver: str = "newton"):
    """Solve and attach the plug-in information. Returns (report, result-or-None)."""
    solve = {"newton": newton_solve, "fixed-point": fixed_point_solve}[solver]
    report = solve(sys, opts)
    if not report.converged:
        return report, None
    fisher = fisher_information(report.theta_hat, sys.spec)
    return report, EstimateResult(report.theta_hat, fisher, approx_inverse(fisher))


@dataclass(frozen=True)
class ContrastStats:
    pair: tuple[int, int]
    xi: float
    zeta: float
    eta: float
    xi_sd: float = field(repr=False, default=float("nan"))


def _in_diag(v: InfoMatrix, j: int) -> float:
    # 0-based j; the dropped coordinate's variance is v_{2n,2n}
    return float(v.diag_in[j]) if j < v.n - 1 else v.v_2n


def contrast_statistics(est: EstimateResult, truth: ParameterVector, pairs) -> list[ContrastStats]:
    """Standardised contrasts for 1-based node pairs (i, j).

    xi   = [a_i - a_j - (a*_i - a*_j)] / sqrt(1/v_ii + 1/v_jj)
    zeta = [a_i + b_j - (a*_i + b*_j)] / sqrt(1/v_ii + 1/v_{n+j,n+j})
    eta  = [b_i - b_j - (b*_i - b*_j)] / sqrt(1/v_{n+i,n+i} + 1/v_{n+j,n+j})
    """
    th, v = est.theta_hat, est.fisher_hat
    n = th.n
    if truth.n != n:
        raise ValueError("truth has the wrong length")
    out = []
    for i, j in pairs:
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"pair ({i}, {j}) out of range 1..{n}")
        a, b = i - 1, j - 1
        xi_sd = math.sqrt(1.0 / v.diag_out[a] + 1.0 / v.diag_out[b])
        xi = (th.alpha[a] - th.alpha[b] - (truth.alpha[a] - truth.alpha[b])) / xi_sd
        zeta_sd = math.sqrt(1.0 / v.diag_out[a] + 1.0 / _in_diag(v, b))
        zeta = (th.alpha[a] + th.beta[b] - (truth.alpha[a] + truth.beta[b])) / zeta_sd
        eta_sd = math.sqrt(1.0 / _in_diag(v, a) + 1.0 / _in_diag(v, b))
        eta = (th.beta[a] - th.beta[b] - (truth.beta[a] - truth.beta[b])) / eta_sd
        out.append(ContrastStats((i, j), float(xi), float(zeta), float(eta), xi_sd))
    return out


def theoretical_covariance(theta: ParameterVector, spec: ModelSpec,
                           budget: PrivacyBudget | None, k: int) -> np.ndarray:
    """Limiting covariance of the first k coordinates of theta_hat - theta.

    diag(1/v_11..1/v_kk) + (1/v_2n + s_n^2 / v_2n^2) * 11^T, with s_n^2 the
    variance of the aggregated noise; ``budget=None`` is the noiseless case.
    """
    if not 1 <= k <= spec.n:
        raise ValueError(f"k must lie in 1..{spec.n}")
    v = fisher_information(theta, spec)
    v2n = v.v_2n
    s2 = 0.0 if budget is None else sum_noise_variance(spec.n, budget, spec.q)
    return np.diag(1.0 / v.diag_out[:k]) + (1.0 / v2n + s2 / v2n**2) * np.ones((k, k))


def estimate_to_json(report: SolveReport, result: EstimateResult | None,
                     spec: ModelSpec, budget: PrivacyBudget | None = None) -> str:
    """Serialise an estimate.

    Standard errors are the square roots of the diagonal of S plus the noise
    term s_n^2 / v_2n^2 when the privacy budget is known; beta_n has none.
    """
    doc = {
        "status": report.status.value,
        "iterations": report.iterations,
        "final_residual": report.final_residual,
        "alpha": None,
        "beta": None,
        "std_err_alpha": None,
        "std_err_beta": None,
    }
    if result is not None:
        th, s, v = result.theta_hat, result.approx_inv_hat, result.fisher_hat
        extra = 0.0
        if budget is not None:
            extra = sum_noise_variance(spec.n, budget, spec.q) * s.rank1_coeff**2
        se_a = np.sqrt(s.inv_diag_out + s.rank1_coeff + extra)
        se_b = np.append(np.sqrt(s.inv_diag_in + s.rank1_coeff + extra), 0.0)
        doc.update(
            alpha=th.alpha.tolist(),
            beta=th.beta.tolist(),
            std_err_alpha=se_a.tolist(),
            std_err_beta=se_b.tolist(),
        )
    return json.dumps(doc, indent=2)

