import math

import numpy as np
import pytest
from scipy import stats

from privp0.model import BiDegree, ModelSpec, ParameterVector, WeightMatrix, bi_degrees, sample_graph
from privp0.privacy import (
    NoiseScale,
    PrivacyBudget,
    PrivateBiDegree,
    dlaplace_pmf,
    dp_log_ratio,
    exhaustive_dp_check,
    neighbor_pairs,
    noise_scale,
    privatize,
    read_degree_csv,
    sample_dlaplace,
    sum_noise_variance,
    write_degree_csv,
)


def test_budget_validation():
    for bad in (0.0, -1.0, float("inf"), float("nan")):
        with pytest.raises(ValueError):
            PrivacyBudget(bad)


def test_noise_scale_examples():
    assert noise_scale(PrivacyBudget(3.0), 2).lam == pytest.approx(0.22313016014842982, abs=1e-15)
    assert noise_scale(PrivacyBudget(2.0), 2).lam == pytest.approx(0.36787944117144233, abs=1e-15)
    assert noise_scale(PrivacyBudget(1e6), 2).lam == pytest.approx(0.0, abs=1e-300)


@pytest.mark.parametrize("eps", [0.01, 0.5, 3.0, 40.0])
@pytest.mark.parametrize("q", [2, 3, 7])
def test_noise_scale_round_trip(eps, q):
    s = noise_scale(PrivacyBudget(eps), q)
    assert abs(-2 * (q - 1) * math.log(s.lam) - eps) <= 1e-12 * max(1.0, eps)
    assert s.epsilon == pytest.approx(eps, rel=1e-15)
    assert s.kappa == pytest.approx(4 * (q - 1) ** 2 / eps)


def test_pmf_sums_to_one():
    x = np.arange(-200, 201)
    for lam in (0.2, 0.5, 0.8):
        assert abs(dlaplace_pmf(x, lam).sum() - 1.0) <= 1e-10


def test_sampler_moments():
    scale = NoiseScale.from_lambda(0.5, 2)
    x = sample_dlaplace(scale, 123, size=1_000_000)
    assert abs(x.mean()) <= 0.01
    assert abs(x.var() - 4.0) <= 0.05
    assert abs((x == 0).mean() - 1 / 3) <= 0.005


def test_variance_series_oracle():
    for lam in (0.2, 0.5, 0.8):
        x = np.arange(0, 2000)
        series = 2 * ((1 - lam) / (1 + lam) * lam**x * x**2).sum()
        assert series == pytest.approx(NoiseScale.from_lambda(lam, 2).dl_variance, rel=1e-12)


def chi_square_pvalue(draws, lam, lo=-15, hi=15):
    clipped = np.clip(draws, lo - 1, hi + 1)
    obs = np.bincount(clipped - (lo - 1), minlength=hi - lo + 3)
    inner = dlaplace_pmf(np.arange(lo, hi + 1), lam)
    tail = (1.0 - inner.sum()) / 2
    exp = np.concatenate([[tail], inner, [tail]]) * draws.size
    return stats.chisquare(obs, exp).pvalue


def test_sampler_goodness_of_fit():
    scale = NoiseScale.from_lambda(0.5, 2)
    assert chi_square_pvalue(sample_dlaplace(scale, 7, size=1_000_000), 0.5) > 0.001


def test_sampler_scalar_and_deterministic():
    scale = noise_scale(PrivacyBudget(1.0), 3)
    assert isinstance(sample_dlaplace(scale, 5), int)
    assert sample_dlaplace(scale, 5) == sample_dlaplace(scale, 5)


def test_sub_exponential_moments():
    x = np.arange(0, 20_000, dtype=np.float64)
    for lam in (0.2, 0.5, 0.8, 0.95):
        w = 2 * (1 - lam) / (1 + lam) * lam**x
        for p in range(1, 9):
            moment = (w * x**p).sum() ** (1 / p)
            assert moment <= 2 * p / math.log(1 / lam)


def test_privatize_huge_budget_is_identity():
    d = BiDegree([3, 1, 4, 1], [2, 2, 2, 3])
    z = privatize(d, PrivacyBudget(1e6), 2, 17)
    np.testing.assert_array_equal(z.z_out, d.out)
    np.testing.assert_array_equal(z.z_in, d.in_)


def test_privatize_draw_order():
    d = BiDegree([1, 1, 1], [1, 1, 1])
    budget = PrivacyBudget(1.0)
    z = privatize(d, budget, 2, 99)
    e = sample_dlaplace(noise_scale(budget, 2), 99, size=6)
    np.testing.assert_array_equal(z.z_out, 1 + e[:3])
    np.testing.assert_array_equal(z.z_in, 1 + e[3:])


def test_privatize_noise_variance():
    d = BiDegree([5, 5], [5, 5])
    rng = np.random.default_rng(4)
    diffs = np.array([privatize(d, PrivacyBudget(3.0), 2, rng).z_out for _ in range(100_000)]) - 5
    target = 2 * math.exp(-1.5) / (1 - math.exp(-1.5)) ** 2
    assert target == pytest.approx(0.7394209481571437)
    assert diffs[:, 0].var() == pytest.approx(target, rel=0.02)


def test_dp_log_ratio_examples():
    rng = np.random.default_rng(0)
    g = sample_graph(ParameterVector.zeros(4), ModelSpec(4, 2), rng)
    assert dp_log_ratio(g, g, PrivacyBudget(3.0), 2) == 0.0
    a = g.entries.copy()
    a[0, 1] = 1 - a[0, 1]
    assert dp_log_ratio(g, WeightMatrix(a, 2), PrivacyBudget(3.0), 2) == pytest.approx(3.0)
    z = np.zeros((3, 3), dtype=int)
    top = z.copy()
    top[2, 0] = 4
    for eps in (0.3, 2.0):
        assert dp_log_ratio(WeightMatrix(z, 5), WeightMatrix(top, 5), PrivacyBudget(eps), 5) == pytest.approx(eps)


def test_dp_log_ratio_dimension_mismatch():
    with pytest.raises(ValueError):
        dp_log_ratio(WeightMatrix(np.zeros((2, 2)), 2), WeightMatrix(np.zeros((3, 3)), 2),
                     PrivacyBudget(1.0), 2)


@pytest.mark.parametrize("eps", [1.0, 3.0])
def test_dp_holds_for_every_neighbor_pair(eps):
    budget = PrivacyBudget(eps)
    worst = max(dp_log_ratio(g1, g2, budget, 3) for g1, g2 in neighbor_pairs(3, 3))
    assert worst <= eps * (1 + 1e-12)
    assert worst == pytest.approx(eps)


def test_exhaustive_check_agrees_with_closed_form():
    worst, ok = exhaustive_dp_check(3, 2, PrivacyBudget(3.0))
    assert ok and worst == pytest.approx(3.0)
    worst, ok = exhaustive_dp_check(2, 3, PrivacyBudget(1.0))
    assert ok and worst == pytest.approx(1.0)


def test_exhaustive_check_negative_control():
    budget = PrivacyBudget(3.0)
    worst, ok = exhaustive_dp_check(3, 2, budget, NoiseScale.from_lambda(0.1, 2))
    assert not ok and worst > 3.0


def test_sum_noise_variance():
    assert sum_noise_variance(100, PrivacyBudget(3.0), 2) == pytest.approx(147.1447686832716)
    assert sum_noise_variance(1, PrivacyBudget(2.0), 3) == pytest.approx(
        noise_scale(PrivacyBudget(2.0), 3).dl_variance)


def test_sum_noise_variance_monte_carlo():
    n, budget = 20, PrivacyBudget(3.0)
    e = sample_dlaplace(noise_scale(budget, 2), 8, size=(100_000, 2 * n))
    agg = e[:, :n].sum(axis=1) - e[:, n : 2 * n - 1].sum(axis=1)
    assert agg.var() == pytest.approx(sum_noise_variance(n, budget, 2), rel=0.03)


def test_degree_csv_round_trip(tmp_path):
    d = BiDegree([1, 2, 3], [3, 2, 1])
    path = tmp_path / "d.csv"
    write_degree_csv(d, path)
    assert path.read_text().splitlines()[0] == "node,d_out,d_in"
    back = read_degree_csv(path)
    assert isinstance(back, BiDegree) and back.out.tolist() == [1, 2, 3]
    z = PrivateBiDegree([-1, 2, 9], [0, 0, 1])
    write_degree_csv(z, path)
    assert path.read_text().splitlines()[0] == "node,z_out,z_in"
    back = read_degree_csv(path)
    assert isinstance(back, PrivateBiDegree) and back.z_out.tolist() == [-1, 2, 9]


@pytest.mark.parametrize("text", [
    "node,x,y\n1,0,0\n2,0,0\n",
    "node,d_out,d_in\n2,0,0\n1,0,0\n",
    "node,d_out,d_in\n1,0\n2,0,0\n",
    "node,d_out,d_in\n1,-1,0\n2,0,0\n",
    "node,d_out,d_in\n1,a,0\n2,0,0\n",
])
def test_degree_csv_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_degree_csv(path)
