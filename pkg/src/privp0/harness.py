"""Seeded Monte Carlo runner for coverage experiments.

A table is a grid of cells (n, eps schedule, L layout). Every replication draws
its randomness from ``SeedSequence(base_seed, spawn_key=(cell_index, rep))``,
so a replication's outcome does not depend on which worker ran it or when.
Aggregation always folds replications in rep order.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .estimator import MomentSystem, SolveOptions, estimate, contrast_statistics
from .model import ModelSpec, ParameterVector, bi_degrees, sample_graph
from .privacy import PrivacyBudget, privatize

__all__ = [
    "L_SPECS",
    "EPS_SPECS",
    "ExperimentConfig",
    "Cell",
    "PairResult",
    "CellResult",
    "Replication",
    "layout_value",
    "epsilon_value",
    "default_pairs",
    "linear_parameters",
    "replication_rng",
    "run_replication",
    "run_cell",
    "run_table",
    "normality_diagnostics",
    "results_csv",
    "qq_csv",
]

RESULTS_HEADER = (
    "n,q,eps_spec,eps_value,L_spec,L_value,pair_i,pair_j,reps,"
    "coverage_pct,ci_length,fail_pct,base_seed"
)

L_SPECS = {
    "zero": lambda n: 0.0,
    "loglog": lambda n: math.log(math.log(n)),
    "sqrtlog": lambda n: math.sqrt(math.log(n)),
    "log": lambda n: math.log(n),
}

EPS_SPECS = {
    "log_over_n14": lambda n: math.log(n) / n**0.25,
    "log_over_n12": lambda n: math.log(n) / n**0.5,
}


def layout_value(spec: str, n: int) -> float:
    try:
        return L_SPECS[spec](n)
    except KeyError:
        raise ValueError(f"unknown L spec {spec!r}; expected one of {sorted(L_SPECS)}") from None


def epsilon_value(spec, n: int) -> float:
    """Numbers (or numeric strings) are constant budgets; names are n-dependent schedules."""
    if isinstance(spec, (int, float)):
        return float(spec)
    if spec in EPS_SPECS:
        return EPS_SPECS[spec](n)
    try:
        return float(spec)
    except ValueError:
        raise ValueError(f"unknown eps spec {spec!r}") from None


def eps_label(spec) -> str:
    if isinstance(spec, str) and spec in EPS_SPECS:
        return spec
    return f"const({epsilon_value(spec, 2):g})"


@dataclass(frozen=True)
class ExperimentConfig:
    n_list: tuple = (100, 200)
    q: int = 5
    L_specs: tuple = ("zero", "loglog", "sqrtlog", "log")
    eps_specs: tuple = (3.0, 2.0, "log_over_n14", "log_over_n12")
    reps: int = 10_000
    base_seed: int = 0
    nominal_level: float = 0.95

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not 0.0 < self.nominal_level < 1.0:
            raise ValueError("nominal_level must lie in (0, 1)")
        if self.q < 2:
            raise ValueError("q must be >= 2")
        for n in self.n_list:
            if int(n) != n or n < 4:
                raise ValueError(f"node counts must be integers >= 4, got {n!r}")
        for L in self.L_specs:
            layout_value(L, 4)
        for e in self.eps_specs:
            if not epsilon_value(e, 4) > 0:
                raise ValueError(f"eps spec {e!r} is not positive")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "L_specs", tuple(self.L_specs))
        object.__setattr__(self, "eps_specs", tuple(self.eps_specs))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    def find_cell(self, n: int, eps_spec, L_spec: str) -> "Cell":
        for cell in self.cells():
            if cell.n == n and cell.L_spec == L_spec and eps_label(cell.eps_spec) == eps_label(eps_spec):
                return cell
        raise KeyError((n, eps_spec, L_spec))

    def cells(self) -> list["Cell"]:
        out = []
        for n in self.n_list:
            for e in self.eps_specs:
                for L in self.L_specs:
                    out.append(Cell(len(out), n, self.q, e, L, self.reps,
                                    self.base_seed, self.nominal_level))
        return out


@dataclass(frozen=True)
class Cell:
    index: int
    n: int
    q: int
    eps_spec: object
    L_spec: str
    reps: int
    base_seed: int = 0
    nominal_level: float = 0.95

    @property
    def epsilon(self) -> float:
        return epsilon_value(self.eps_spec, self.n)

    @property
    def L(self) -> float:
        return layout_value(self.L_spec, self.n)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return default_pairs(self.n)


@dataclass(frozen=True)
class Replication:
    """Outcome of one replication; ``records`` is None when the estimate failed."""

    records: tuple | None
    xi: tuple | None = None

    @property
    def failed(self) -> bool:
        return self.records is None


@dataclass(frozen=True)
class PairResult:
    pair: tuple[int, int]
    coverage_freq: float
    mean_ci_length: float
    fail_freq: float
    reps_attempted: int


@dataclass
class CellResult:
    cell: Cell
    pairs: list[PairResult]
    xi: np.ndarray = field(repr=False)  # (converged reps, n_pairs)

    @property
    def fail_freq(self) -> float:
        return self.pairs[0].fail_freq


def default_pairs(n: int) -> list[tuple[int, int]]:
    return [(1, 2), (n // 2, n // 2 + 1), (n - 1, n)]


def linear_parameters(n: int, L: float) -> ParameterVector:
    """alpha*_i = (i-1) L / (n-1), beta* = alpha* except beta*_n = 0."""
    if n < 2 or L < 0:
        raise ValueError("need n >= 2 and L >= 0")
    alpha = np.arange(n) * (L / (n - 1))
    beta = alpha.copy()
    beta[-1] = 0.0
    return ParameterVector(alpha, beta)


def replication_rng(base_seed: int, cell_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(cell_index, rep)))


def run_replication(theta_star: ParameterVector, spec: ModelSpec, budget: PrivacyBudget,
                    pairs, rep_seed, nominal_level: float = 0.95,
                    opts: SolveOptions | None = None) -> Replication:
    """graph -> degrees -> noisy degrees -> estimate -> per-pair (covered, ci_length)."""
    rng = np.random.default_rng(rep_seed)
    d = bi_degrees(sample_graph(theta_star, spec, rng))
    z = privatize(d, budget, spec.q, rng)
    report, est = estimate(MomentSystem.from_degrees(z, spec), opts)
    if est is None:
        return Replication(None)
    crit = stats.norm.ppf(0.5 + nominal_level / 2)
    recs, xis = [], []
    for c in contrast_statistics(est, theta_star, pairs):
        recs.append((abs(c.xi) <= crit, 2.0 * crit * c.xi_sd))
        xis.append(c.xi)
    return Replication(tuple(recs), tuple(xis))


def _cell_worker(cell: Cell, reps: range) -> list[Replication]:
    spec = ModelSpec(cell.n, cell.q)
    theta = linear_parameters(cell.n, cell.L)
    budget = PrivacyBudget(cell.epsilon)
    pairs = cell.pairs
    return [
        run_replication(theta, spec, budget, pairs,
                        replication_rng(cell.base_seed, cell.index, r), cell.nominal_level)
        for r in reps
    ]


def _chunks(total: int, size: int):
    return [range(s, min(s + size, total)) for s in range(0, total, size)]


def run_cell(cell: Cell, threads: int = 1, pool: ThreadPoolExecutor | None = None) -> CellResult:
    chunks = _chunks(cell.reps, 250)
    if pool is not None:
        parts = list(pool.map(lambda ch: _cell_worker(cell, ch), chunks))
    elif threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda ch: _cell_worker(cell, ch), chunks))
    else:
        parts = [_cell_worker(cell, ch) for ch in chunks]
    reps = [r for part in parts for r in part]
    return aggregate(cell, reps)


def aggregate(cell: Cell, reps: list[Replication]) -> CellResult:
    ok = [r for r in reps if not r.failed]
    fail = 1.0 - len(ok) / len(reps)
    out = []
    for k, pair in enumerate(cell.pairs):
        if ok:
            cov = sum(bool(r.records[k][0]) for r in ok) / len(ok)
            length = math.fsum(r.records[k][1] for r in ok) / len(ok)
        else:
            cov = length = float("nan")
        out.append(PairResult(pair, cov, length, fail, len(reps)))
    xi = np.array([r.xi for r in ok], dtype=np.float64).reshape(len(ok), len(cell.pairs))
    return CellResult(cell, out, xi)


def run_table(config: ExperimentConfig, threads: int = 1, progress=None) -> list[CellResult]:
    results = []
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for cell in config.cells():
            res = run_cell(cell, pool=pool)
            if progress is not None:
                progress(res)
            results.append(res)
    finally:
        if pool is not None:
            pool.shutdown()
    return results


def normality_diagnostics(values) -> dict:
    """KS distance to N(0, 1) and (theoretical, empirical) quantiles at 1..99%."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 100:
        raise ValueError("need at least 100 statistics")
    ks = stats.kstest(x, "norm").statistic
    probs = np.arange(1, 100) / 100.0
    return {
        "ks_distance": float(ks),
        "theoretical_quantiles": stats.norm.ppf(probs),
        "empirical_quantiles": np.quantile(x, probs),
    }


def _fmt(x: float) -> str:
    return "NA" if not math.isfinite(x) else f"{x:.4f}"


def results_csv(results: list[CellResult]) -> str:
    buf = io.StringIO()
    buf.write(RESULTS_HEADER + "\n")
    for res in results:
        c = res.cell
        for p in res.pairs:
            row = (
                c.n, c.q, eps_label(c.eps_spec), _fmt(c.epsilon), c.L_spec, _fmt(c.L),
                p.pair[0], p.pair[1], p.reps_attempted,
                _fmt(100 * p.coverage_freq), _fmt(p.mean_ci_length),
                _fmt(100 * p.fail_freq), c.base_seed,
            )
            buf.write(",".join(str(v) for v in row) + "\n")
    return buf.getvalue()


def qq_csv(diag: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("theoretical_quantile", "empirical_quantile"))
    for t, e in zip(diag["theoretical_quantiles"], diag["empirical_quantiles"]):
        writer.writerow((f"{t:.4f}", f"{e:.4f}"))
    return buf.getvalue()


def write_qq_files(results: list[CellResult], directory) -> list[Path]:
    """One QQ file per (cell, pair) with at least 100 converged replications."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        c = res.cell
        for k, p in enumerate(res.pairs):
            if res.xi.shape[0] < 100:
                continue
            name = f"qq_n{c.n}_{eps_label(c.eps_spec)}_{c.L_spec}_{p.pair[0]}_{p.pair[1]}.csv"
            path = directory / name.replace("(", "").replace(")", "")
            path.write_text(qq_csv(normality_diagnostics(res.xi[:, k])), encoding="utf-8")
            written.append(path)
    return written
