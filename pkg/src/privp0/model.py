"""Weighted p0 model for directed graphs with edge weights in {0, ..., q-1}.

Each ordered pair (i, j), i != j, carries an independent categorical weight

    P(a_ij = a) = exp(a * (alpha_i + beta_j)) / sum_k exp(k * (alpha_i + beta_j)),

so the bi-degree sequence (row and column sums of the weight matrix) is the
sufficient statistic. The parameters are identified by fixing beta_n = 0.

The Fisher information of theta = (alpha_1..alpha_n, beta_1..beta_{n-1}) is
kept in structured form: only the per-dyad variances and the two diagonals are
stored, the zero alpha-alpha and beta-beta off-diagonal blocks are implicit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels

__all__ = [
    "ModelSpec",
    "ParameterVector",
    "WeightMatrix",
    "BiDegree",
    "InfoMatrix",
    "ApproxInverse",
    "edge_pmf",
    "edge_moments",
    "log_normalizer",
    "sample_graph",
    "bi_degrees",
    "expected_degrees",
    "fisher_information",
    "approx_inverse",
    "read_edge_list",
    "write_edge_list",
]


@dataclass(frozen=True)
class ModelSpec:
    n: int
    q: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q!r}")

    @property
    def max_degree(self) -> int:
        return (self.n - 1) * (self.q - 1)


@dataclass(frozen=True)
class ParameterVector:
    """alpha (out-going) and beta (in-coming) node parameters, beta[-1] == 0."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64)
        beta = np.array(self.beta, dtype=np.float64)
        if alpha.ndim != 1 or alpha.shape != beta.shape:
            raise ValueError("alpha and beta must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("parameters must be finite")
        if beta[-1] != 0.0:
            raise ValueError("identification constraint violated: beta[n] must be 0")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "ParameterVector":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_theta(cls, theta: np.ndarray) -> "ParameterVector":
        """Build from the free vector (alpha_1..alpha_n, beta_1..beta_{n-1})."""
        theta = np.asarray(theta, dtype=np.float64)
        n = (theta.shape[0] + 1) // 2
        return cls(theta[:n], np.append(theta[n:], 0.0))

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta[:-1]])

    def sup_norm(self) -> float:
        return float(max(np.abs(self.alpha).max(), np.abs(self.beta).max()))


@dataclass(frozen=True)
class WeightMatrix:
    entries: np.ndarray
    q: int

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("weight matrix must be square")
        if np.any(np.diag(a) != 0):
            raise ValueError("weight matrix must have a zero diagonal")
        if a.min(initial=0) < 0 or a.max(initial=0) > self.q - 1:
            raise ValueError(f"weights must lie in [0, {self.q - 1}]")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class BiDegree:
    out: np.ndarray
    in_: np.ndarray

    def __post_init__(self):
        out = np.array(self.out, dtype=np.int64)
        in_ = np.array(self.in_, dtype=np.int64)
        if out.shape != in_.shape or out.ndim != 1:
            raise ValueError("out and in degree vectors must have equal length")
        out.setflags(write=False)
        in_.setflags(write=False)
        object.__setattr__(self, "out", out)
        object.__setattr__(self, "in_", in_)

    @property
    def n(self) -> int:
        return self.out.shape[0]


@dataclass(frozen=True)
class InfoMatrix:
    """Fisher information V (positive sign convention) in structured form.

    ``edge_var[i, j]`` is Var(a_ij), the cross-block entry v_{i, n+j}.
    ``diag_out`` has length n, ``diag_in`` length n-1 (the last in-degree
    equation is dropped by the identification constraint).
    """

    edge_var: np.ndarray
    diag_out: np.ndarray
    diag_in: np.ndarray

    @property
    def n(self) -> int:
        return self.diag_out.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.n - 1

    @property
    def diagonal(self) -> np.ndarray:
        """(v_11, ..., v_{2n-1,2n-1})."""
        return np.concatenate([self.diag_out, self.diag_in])

    def border(self) -> np.ndarray:
        """v_{2n,i} = v_ii - sum_{j != i} v_ij for i = 1..2n-1."""
        n = self.n
        cross = self.edge_var[:, : n - 1]
        out_part = self.diag_out - cross.sum(axis=1)
        in_part = self.diag_in - cross.sum(axis=0)
        return np.concatenate([out_part, in_part])

    @property
    def v_2n(self) -> float:
        """v_{2n,2n}, the sum of the border entries (negatives clipped)."""
        b = self.border()
        scale = max(float(self.diagonal.max(initial=0.0)), 1.0)
        worst = float(b.min(initial=0.0))
        if worst < -1e-9 * scale:
            warnings.warn(
                f"negative border entry {worst:.3e} in information matrix clipped to 0",
                RuntimeWarning,
                stacklevel=2,
            )
        return float(np.clip(b, 0.0, None).sum())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        cross = self.edge_var[:, : n - 1]
        xa, xb = x[:n], x[n:]
        return np.concatenate(
            [self.diag_out * xa + cross @ xb, self.diag_in * xb + cross.T @ xa]
        )


@dataclass(frozen=True)
class ApproxInverse:
    """Diagonal-plus-signed-rank-one surrogate for V^{-1}."""

    inv_diag_out: np.ndarray
    inv_diag_in: np.ndarray
    rank1_coeff: float

    @property
    def n(self) -> int:
        return self.inv_diag_out.shape[0]

    def entry(self, i: int, j: int) -> float:
        """s_ij with 0-based indices into the (2n-1)-vector theta."""
        n = self.n
        same_block = (i < n) == (j < n)
        diag = 0.0
        if i == j:
            diag = self.inv_diag_out[i] if i < n else self.inv_diag_in[i - n]
        return diag + (self.rank1_coeff if same_block else -self.rank1_coeff)

    def to_dense(self) -> np.ndarray:
        n = self.n
        sign = np.concatenate([np.ones(n), -np.ones(n - 1)])
        diag = np.concatenate([self.inv_diag_out, self.inv_diag_in])
        return np.diag(diag) + self.rank1_coeff * np.outer(sign, sign)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        sign = np.concatenate([np.ones(n), -np.ones(n - 1)])
        diag = np.concatenate([self.inv_diag_out, self.inv_diag_in])
        return diag * x + self.rank1_coeff * sign * (sign @ x)


def _check_level(s: float, q: int) -> None:
    if int(q) != q or q < 2:
        raise ValueError(f"q must be an integer >= 2, got {q!r}")
    if not math.isfinite(s):
        raise ValueError(f"dyad parameter must be finite, got {s!r}")


def edge_pmf(s: float, q: int) -> np.ndarray:
    """Probability of each weight 0..q-1 on a dyad with alpha_i + beta_j = s."""
    _check_level(s, q)
    k = np.arange(q, dtype=np.float64)
    logw = k * s
    w = np.exp(logw - logw.max())
    return w / w.sum()


def edge_moments(s: float, q: int) -> tuple[float, float]:
    """Mean and variance of a dyad weight.

    The variance uses the all-positive pairwise form
    sum_{k<l} (k-l)^2 e^{(k+l)s} / (sum_k e^{ks})^2 to avoid cancellation.
    """
    p = edge_pmf(s, q)
    k = np.arange(q, dtype=np.float64)
    mean = float(p @ k)
    diff2 = (k[:, None] - k[None, :]) ** 2
    var = float(np.triu(diff2 * np.outer(p, p), 1).sum())
    return mean, var


def log_normalizer(theta: ParameterVector, spec: ModelSpec) -> float:
    _check_theta(theta, spec)
    s = theta.alpha[:, None] + theta.beta[None, :]
    k = np.arange(spec.q, dtype=np.float64)
    logw = k * s[..., None]
    top = logw.max(axis=-1)
    lse = top + np.log(np.exp(logw - top[..., None]).sum(axis=-1))
    np.fill_diagonal(lse, 0.0)
    return float(lse.sum())


def sample_graph(theta: ParameterVector, spec: ModelSpec, seed) -> WeightMatrix:
    """Draw one weight matrix by inverse-CDF over each dyad's pmf.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`,
    including an existing Generator, which is advanced by n*n uniforms.
    """
    _check_theta(theta, spec)
    rng = np.random.default_rng(seed)
    u = rng.random((spec.n, spec.n))
    a = kernels.sample_weights(theta.alpha, theta.beta, spec.q, u)
    return WeightMatrix(a, spec.q)


def bi_degrees(w: WeightMatrix) -> BiDegree:
    return BiDegree(w.entries.sum(axis=1), w.entries.sum(axis=0))


def expected_degrees(theta: ParameterVector, spec: ModelSpec) -> np.ndarray:
    """Expected (out-degrees, in-degrees), length 2n."""
    _check_theta(theta, spec)
    mean, _ = kernels.dyad_moments(theta.alpha, theta.beta, spec.q)
    return np.concatenate([mean.sum(axis=1), mean.sum(axis=0)])


def fisher_information(theta: ParameterVector, spec: ModelSpec) -> InfoMatrix:
    _check_theta(theta, spec)
    _, var = kernels.dyad_moments(theta.alpha, theta.beta, spec.q)
    return info_from_variances(var)


def info_from_variances(var: np.ndarray) -> InfoMatrix:
    """Assemble V from an n x n matrix of dyad variances (zero diagonal)."""
    var = np.asarray(var, dtype=np.float64)
    return InfoMatrix(var, var.sum(axis=1), var.sum(axis=0)[:-1])


def approx_inverse(v: InfoMatrix) -> ApproxInverse:
    diag = v.diagonal
    if np.any(diag <= 0.0):
        raise np.linalg.LinAlgError("information matrix has a non-positive diagonal entry")
    v2n = v.v_2n
    if v2n <= 0.0:
        raise np.linalg.LinAlgError("v_{2n,2n} is zero; approximate inverse undefined")
    return ApproxInverse(1.0 / v.diag_out, 1.0 / v.diag_in, 1.0 / v2n)


def _check_theta(theta: ParameterVector, spec: ModelSpec) -> None:
    if theta.n != spec.n:
        raise ValueError(f"parameter length {theta.n} does not match n={spec.n}")


# ---------------------------------------------------------------------------
# edge-list files
# ---------------------------------------------------------------------------
def write_edge_list(w: WeightMatrix, path) -> None:
    """Write ``# n=<n> q=<q>`` then one ``tail<TAB>head<TAB>weight`` per nonzero dyad."""
    rows, cols = np.nonzero(w.entries)
    lines = [f"# n={w.n} q={w.q}"]
    lines += [f"{i + 1}\t{j + 1}\t{w.entries[i, j]}" for i, j in zip(rows, cols)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path) -> WeightMatrix:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError("edge list must start with a '# n=<n> q=<q>' header")
    fields = dict(tok.split("=", 1) for tok in text[0][1:].split())
    try:
        n, q = int(fields["n"]), int(fields["q"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed edge-list header: {text[0]!r}") from exc
    a = np.zeros((n, n), dtype=np.int64)
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected tail<TAB>head<TAB>weight")
        i, j, wt = (int(p) for p in parts)
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise ValueError(f"line {lineno}: bad node pair ({i}, {j})")
        a[i - 1, j - 1] = wt
    return WeightMatrix(a, q)
