import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fmpp.errors import InvalidArgument, NonpositiveDt, ProblemTooLarge, RateOverflow
from fmpp.geometry import polygon, rect
from fmpp.intensity import homogeneous
from fmpp.pattern import Pattern
from fmpp.simulate import (
    LGCP,
    Binomial,
    BrownianMarks,
    GeostatMarks,
    GrowthInteraction,
    IntensityMarks,
    Poisson,
    coverage_fraction,
    growth_interaction,
    lisa_marks,
    simulate_ground,
    simulate_marks,
    uniform_points,
)
from fmpp.summaries import KQuery, estimate_k

UNIT = rect(0, 1, 0, 1)


# ground processes ------------------------------------------------------------


def test_binomial_exact_count():
    pts = simulate_ground(Binomial(47), UNIT, 3)
    assert pts.shape == (47, 2)
    assert UNIT.contains(pts).all()


def test_binomial_in_polygon_window():
    tri = polygon([(0, 0), (2, 0), (0, 2)])
    pts = simulate_ground(Binomial(200), tri, 1)
    assert len(pts) == 200 and tri.contains(pts).all()


def test_poisson_mean_count():
    counts = [len(simulate_ground(Poisson(100.0), UNIT, np.random.default_rng([5, i]))) for i in range(1000)]
    assert abs(np.mean(counts) - 100.0) < 3.0


def test_poisson_count_scales_with_area():
    w = rect(0, 2, 0, 3)
    counts = [len(simulate_ground(Poisson(10.0), w, np.random.default_rng([6, i]))) for i in range(400)]
    # mean 60, standard error sqrt(60/400) ~ 0.39
    assert abs(np.mean(counts) - 60.0) < 2.0


def test_poisson_varying_rate_thins():
    rate = lambda xy: 200.0 * xy[:, 0]
    counts = [len(simulate_ground(Poisson(rate, rate_max=200.0), UNIT, np.random.default_rng([7, i])))
              for i in range(300)]
    assert abs(np.mean(counts) - 100.0) < 3.0
    pts = np.vstack([simulate_ground(Poisson(rate, rate_max=200.0), UNIT, np.random.default_rng([8, i]))
                     for i in range(50)])
    # density proportional to x: E[x] = 2/3
    assert abs(pts[:, 0].mean() - 2 / 3) < 0.02


def test_poisson_rate_above_bound_rejected():
    with pytest.raises(InvalidArgument):
        simulate_ground(Poisson(lambda xy: np.full(len(xy), 10.0), rate_max=1.0), UNIT, 0)


def test_rate_overflow():
    with pytest.raises(RateOverflow):
        simulate_ground(Poisson(2e6), UNIT, 0)
    with pytest.raises(RateOverflow):
        simulate_ground(LGCP(mu=np.log(2e6), var=0.0, scale=0.1), UNIT, 0)


def test_negative_rate_rejected():
    with pytest.raises(InvalidArgument):
        simulate_ground(Poisson(-1.0), UNIT, 0)


def test_lgcp_zero_variance_is_poisson():
    mu = np.log(30.0)
    counts = np.array([len(simulate_ground(LGCP(mu, 0.0, 0.1), UNIT, np.random.default_rng([9, i])))
                       for i in range(500)])
    # uniform jitter turns the discrete counts into a continuous law for KS
    jittered = counts + np.random.default_rng(0).uniform(-0.5, 0.5, len(counts))
    res = stats.kstest(jittered, lambda x: _jittered_cdf(x, 30.0))
    assert res.pvalue > 0.001


def _jittered_cdf(x, lam):
    """CDF of N + U(-1/2, 1/2) with N ~ Poisson(lam)."""
    x = np.asarray(x, dtype=float)
    k = np.floor(x + 0.5)
    frac = x + 0.5 - k
    return stats.poisson.cdf(k - 1, lam) + frac * stats.poisson.pmf(k, lam)


def test_lgcp_lattice_limits():
    with pytest.raises(InvalidArgument):
        simulate_ground(LGCP(0.0, 1.0, 0.1, res=16), UNIT, 0)
    with pytest.raises(ProblemTooLarge):
        simulate_ground(LGCP(0.0, 1.0, 0.1, res=65), UNIT, 0)


def test_lgcp_clusters():
    var, scale, rate = 1.0, 0.1, 100.0
    model = LGCP(np.log(rate) - var / 2, var, scale)
    r = (0.03, 0.06)
    disc = np.pi * np.asarray(r) ** 2
    excess = []
    for i in range(200):
        xy = simulate_ground(model, UNIT, np.random.default_rng([10, i]))
        if len(xy) < 2:
            continue
        p = Pattern(UNIT, xy, [0.0, 1.0], np.zeros((len(xy), 2)))
        q = KQuery(r, correction="translational", intensity=homogeneous(rate, UNIT), normalization="raw")
        excess.append(estimate_k(p, q).values - disc)
    excess = np.asarray(excess)
    mean = excess.mean(axis=0)
    se = excess.std(axis=0, ddof=1) / np.sqrt(len(excess))
    # one-sided: the mean excess is positive beyond two standard errors
    assert np.all(mean - 2 * se > 0)


def test_ground_deterministic_under_seed():
    for model in (Poisson(50.0), Binomial(10), LGCP(np.log(50), 0.5, 0.2)):
        a = simulate_ground(model, UNIT, 42)
        b = simulate_ground(model, UNIT, 42)
        assert np.array_equal(a, b)


def test_uniform_points_count():
    assert len(uniform_points(UNIT, 0, 1)) == 0
    assert len(uniform_points(UNIT, 13, 1)) == 13


# mark models -----------------------------------------------------------------


def test_brownian_zero_sigma_constant():
    pts = uniform_points(UNIT, 5, 0)
    curves = simulate_marks(BrownianMarks(sigma=0.0, start=2.5), pts, np.linspace(0, 1, 11), 0)
    assert np.all(curves == 2.5)


def test_brownian_increment_variance():
    grid = np.linspace(0, 4, 9)
    pts = uniform_points(UNIT, 4000, 0)
    curves = simulate_marks(BrownianMarks(sigma=2.0), pts, grid, 1)
    # Var F(t) = sigma^2 t
    assert np.allclose(curves[:, 0], 0.0)
    assert abs(curves[:, -1].var() / (4.0 * 4.0) - 1.0) < 0.08


def test_intensity_marks_constant_when_b_zero():
    pts = uniform_points(UNIT, 7, 0)
    curves = simulate_marks(IntensityMarks(a=3.0, b=0.0), pts, np.linspace(0, 1, 5), 0)
    assert np.all(curves == 3.0)


def test_intensity_marks_follow_intensity():
    pts = uniform_points(UNIT, 7, 0)
    curves = simulate_marks(IntensityMarks(a=1.0, b=2.0, intensity=lambda xy: xy[:, 0]), pts, [0.0, 1.0], 0)
    assert np.allclose(curves, 1.0 + 2.0 * pts[:, [0]])


def test_intensity_marks_need_intensity():
    with pytest.raises(InvalidArgument):
        simulate_marks(IntensityMarks(a=1.0, b=2.0), np.zeros((1, 2)), [0.0, 1.0], 0)


def _mean_abs_corr(samples):
    c = np.corrcoef(samples, rowvar=False)
    iu = np.triu_indices_from(c, 1)
    return np.abs(c[iu]).mean()


def test_geostat_tiny_spatial_scale_independent():
    pts = uniform_points(UNIT, 6, 3)
    grid = np.linspace(0, 1, 4)
    first = np.array([simulate_marks(GeostatMarks(1e-6, 1.0), pts, grid, np.random.default_rng([11, i]))[:, 0]
                      for i in range(200)])
    assert _mean_abs_corr(first) < 0.1


def test_geostat_colocated_highly_correlated():
    eps = 1e-3
    pts = np.array([[0.5, 0.5], [0.5 + eps, 0.5]])
    grid = np.linspace(0, 1, 4)
    first = np.array([simulate_marks(GeostatMarks(1.0, 1.0), pts, grid, np.random.default_rng([12, i]))[:, 0]
                      for i in range(200)])
    assert np.corrcoef(first.T)[0, 1] > 0.9


def test_geostat_covariance_structure():
    pts = np.array([[0.0, 0.0], [0.3, 0.0]])
    grid = np.array([0.0, 0.5])
    draws = np.array([simulate_marks(GeostatMarks(0.5, 1.0, sigma2=2.0), pts, grid, np.random.default_rng([13, i]))
                      for i in range(4000)])
    cov = np.cov(draws.reshape(len(draws), -1), rowvar=False)
    # index = point * 2 + time
    assert abs(cov[0, 0] - 2.0) < 0.2
    assert abs(cov[0, 2] - 2.0 * np.exp(-0.3 / 0.5)) < 0.15
    assert abs(cov[0, 3] - 2.0 * np.exp(-0.6) * np.exp(-0.5)) < 0.15


def test_geostat_size_limit():
    with pytest.raises(ProblemTooLarge):
        simulate_marks(GeostatMarks(0.1, 1.0), uniform_points(UNIT, 2001, 0), [0.0, 1.0], 0)


def test_geostat_scales_positive():
    with pytest.raises(InvalidArgument):
        simulate_marks(GeostatMarks(0.0, 1.0), np.zeros((2, 2)), [0.0, 1.0], 0)


def test_marks_deterministic_under_seed():
    pts = uniform_points(UNIT, 5, 0)
    grid = np.linspace(0, 2, 6)
    for model in (BrownianMarks(), GeostatMarks(0.2, 1.0), IntensityMarks(0.0, 0.0, noise=1.0)):
        assert np.array_equal(simulate_marks(model, pts, grid, 9), simulate_marks(model, pts, grid, 9))


def test_bad_grid_rejected():
    with pytest.raises(InvalidArgument):
        simulate_marks(BrownianMarks(), np.zeros((1, 2)), [1.0, 0.0], 0)


# growth interaction ------------------------------------------------------------


def test_logistic_closed_form():
    pts = uniform_points(UNIT, 5, 0)
    grid = np.linspace(0, 10, 101)
    gp = GrowthInteraction(lam=0.8, K=10.0, c=0.0, mu=0.0, dt=1e-3)
    res = growth_interaction(pts, gp, grid, seed=1, horizon=(0.0, 5.0))
    f0 = 0.1
    for i in range(len(pts)):
        t = grid[grid >= res.births[i]]
        exact = 10.0 / (1.0 + (10.0 / f0 - 1.0) * np.exp(-0.8 * (t - res.births[i])))
        got = res.curves[i, grid >= res.births[i]]
        assert np.max(np.abs(got - exact) / exact) < 1e-4
        assert np.all(res.curves[i, grid < res.births[i]] == 0)


def test_huge_interaction_suppresses():
    pts = np.array([[0.5, 0.5], [0.52, 0.5]])
    grid = np.linspace(0, 10, 51)
    solo = growth_interaction(pts, GrowthInteraction(c=0.0, mu=0.0, dt=1e-2), grid, seed=4, horizon=(0.0, 1e-6))
    hard = growth_interaction(pts, GrowthInteraction(c=1e4, mu=0.0, dt=1e-2), grid, seed=4, horizon=(0.0, 1e-6))
    assert np.array_equal(solo.births, hard.births)
    assert np.all(hard.curves <= solo.curves + 1e-12)
    assert np.all(hard.curves[:, -1] < solo.curves[:, -1])


def test_instant_death_leaves_zero_curves():
    pts = uniform_points(UNIT, 10, 0)
    grid = np.linspace(0, 20, 21)
    gp = GrowthInteraction(mu=1e9, dt=1e-3)
    res = growth_interaction(pts, gp, grid, seed=2)
    assert np.allclose(res.deaths, res.births, atol=1e-6)
    assert res.curves.max() < 0.01 * 10.0 * 1.1


def test_nonpositive_dt():
    with pytest.raises(NonpositiveDt):
        growth_interaction(np.zeros((1, 2)), GrowthInteraction(dt=0.0), [0.0, 1.0], seed=0)
    with pytest.raises(NonpositiveDt):
        growth_interaction(np.zeros((1, 2)), GrowthInteraction(dt=-1.0), [0.0, 1.0], seed=0)


def test_per_label_parameters():
    pts = np.array([[0.1, 0.1], [0.9, 0.9]])
    grid = np.linspace(0, 30, 31)
    gp = GrowthInteraction(lam=(1.0, 1.0), K=(5.0, 20.0), mu=0.0, dt=1e-2)
    res = growth_interaction(pts, gp, grid, seed=0, labels=[1, 2], horizon=(0.0, 1.0))
    assert abs(res.curves[0, -1] - 5.0) < 1e-3
    assert abs(res.curves[1, -1] - 20.0) < 1e-2
    with pytest.raises(InvalidArgument):
        growth_interaction(pts, GrowthInteraction(K=(1.0, 2.0, 3.0)), grid, seed=0, labels=[1, 2])


def test_growth_via_simulate_marks():
    pts = uniform_points(UNIT, 4, 0)
    res = simulate_marks(GrowthInteraction(dt=1e-2), pts, np.linspace(0, 5, 6), 3)
    assert res.curves.shape == (4, 6)
    assert len(res.births) == len(res.deaths) == 4


@settings(max_examples=25)
@given(
    seed=st.integers(0, 10_000),
    c=st.floats(0.0, 50.0),
    noise=st.sampled_from([0.0, 0.5]),
    mu=st.floats(0.05, 2.0),
    n=st.integers(1, 8),
)
def test_growth_bounds_and_support(seed, c, noise, mu, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(n, 2))
    grid = np.linspace(0, 10, 21)
    gp = GrowthInteraction(lam=1.5, K=10.0, c=c, sigma_int=0.3, mu=mu, noise=noise, dt=0.02)
    res = growth_interaction(pts, gp, grid, seed=seed)
    assert np.all(res.curves >= 0)
    assert np.all(res.curves <= 10.0 * (1 + 1e-6))
    outside = (grid[None, :] < res.births[:, None]) | (grid[None, :] >= res.deaths[:, None])
    assert np.all(res.curves[outside] == 0)


def test_growth_deterministic_under_seed():
    pts = uniform_points(UNIT, 6, 0)
    gp = GrowthInteraction(c=0.5, noise=0.3, dt=0.05)
    a = growth_interaction(pts, gp, np.linspace(0, 5, 11), seed=8)
    b = growth_interaction(pts, gp, np.linspace(0, 5, 11), seed=8)
    assert np.array_equal(a.curves, b.curves) and np.array_equal(a.births, b.births)


# LISA and coverage ---------------------------------------------------------------


def _lattice3():
    return np.array([(x, y) for x in range(3) for y in range(3)], dtype=float)


def test_lisa_center_of_lattice():
    curves = lisa_marks(_lattice3(), [0.5, 1.0, 1.5])
    center = 4
    assert list(curves[center]) == [0, 4, 8]
    assert list(curves[0]) == [0, 2, 3]


def test_lisa_isolated_point():
    pts = np.vstack([_lattice3(), [[100.0, 100.0]]])
    assert np.all(lisa_marks(pts, [0.5, 1.0, 5.0])[-1] == 0)


@given(seed=st.integers(0, 10_000), n=st.integers(1, 30))
def test_lisa_monotone(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(n, 2))
    curves = lisa_marks(pts, np.linspace(0.01, 1.5, 12))
    assert np.all(np.diff(curves, axis=1) >= 0)
    assert np.all(curves[:, -1] == n - 1)


def test_lisa_grid_must_increase():
    with pytest.raises(InvalidArgument):
        lisa_marks(_lattice3(), [1.0, 0.5])


def test_coverage_no_disks():
    assert coverage_fraction(np.empty((0, 2)), [], UNIT) == 0.0


def test_coverage_single_disk():
    frac = coverage_fraction([[0.5, 0.5]], [0.1], UNIT, res=512)
    assert abs(frac - np.pi * 0.01) < 2e-3


def test_coverage_disjoint_additive():
    a = coverage_fraction([[0.2, 0.2]], [0.1], UNIT)
    b = coverage_fraction([[0.7, 0.7]], [0.15], UNIT)
    both = coverage_fraction([[0.2, 0.2], [0.7, 0.7]], [0.1, 0.15], UNIT)
    assert both == pytest.approx(a + b, abs=1e-12)


def test_coverage_clips_to_window():
    frac = coverage_fraction([[0.0, 0.0]], [0.2], UNIT, res=512)
    assert abs(frac - np.pi * 0.04 / 4) < 2e-3


def test_coverage_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        coverage_fraction([[0.5, 0.5]], [-0.1], UNIT)
    with pytest.raises(InvalidArgument):
        coverage_fraction([[0.5, 0.5]], [0.1], UNIT, res=128)
