import numpy as np
import pytest

from hawkes_impact.estimation import (
    DecayTransform,
    ImpactCurve,
    MetaorderRecord,
    PriceSeries,
    RegressionResult,
    anticipation_groups,
    bootstrap_exponent,
    decay_loglog,
    direct_regression,
    execution_returns,
    power_law_fit,
    quantile_slices,
    rescaled_average,
    residual_trace,
    return_proxy,
    transient_fit,
)
from hawkes_impact.synthetic import power_law_ensemble


def _record(k, R=0.01, T=600.0, side=1, t0=1000.0, psi=float("nan")):
    V = 1.0e6
    v = R * V
    return MetaorderRecord(
        id=f"m{k}",
        instrument=f"S{k}",
        date="2024-01-02",
        t0=t0,
        duration=T,
        side=side,
        v=v,
        V=V,
        vbar=v / 0.1,
        psi=psi,
    )


def _series_from_logprice(fn, t_lo=0.0, t_hi=4000.0, n=4001):
    times = np.linspace(t_lo, t_hi, n)
    return PriceSeries(times, 100.0 * np.exp(fn(times)))


def test_record_validation_and_properties():
    rec = _record(0, R=0.02, T=300.0)
    assert rec.participation == pytest.approx(0.02)
    assert rec.rate == pytest.approx(0.1)
    assert rec.nu_dot == pytest.approx(0.02 / 300.0)
    assert rec.end == pytest.approx(1300.0)
    with pytest.raises(ValueError, match="side"):
        MetaorderRecord("a", "S", "d", 0.0, 60.0, 2, 1.0, 10.0, 5.0)
    with pytest.raises(ValueError, match="duration"):
        MetaorderRecord("a", "S", "d", 0.0, 0.0, 1, 1.0, 10.0, 5.0)
    with pytest.raises(ValueError, match="v <= V"):
        MetaorderRecord("a", "S", "d", 0.0, 60.0, 1, 20.0, 10.0, 30.0)
    with pytest.raises(ValueError, match="vbar"):
        MetaorderRecord("a", "S", "d", 0.0, 60.0, 1, 6.0, 10.0, 5.0)


def test_price_series_lookup_is_a_step_function():
    series = PriceSeries([0.0, 10.0, 20.0], [100.0, 101.0, 99.0])
    assert series.price_at(0.0) == 100.0
    assert series.price_at(9.99) == 100.0
    assert series.price_at(10.0) == 101.0
    assert series.price_at(50.0) == 99.0
    np.testing.assert_allclose(series.price_at([5.0, 15.0]), [100.0, 101.0])
    assert series.covers(0.0, 20.0)
    assert not series.covers(0.0, 20.5)
    with pytest.raises(ValueError, match="before the first sample"):
        series.price_at(-1.0)
    with pytest.raises(ValueError, match="positive"):
        PriceSeries([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValueError, match="sorted"):
        PriceSeries([1.0, 0.0], [1.0, 1.0])


def test_return_proxy():
    series = PriceSeries([0.0, 10.0], [100.0, 102.0])
    assert return_proxy(series, 0.0, 10.0) == pytest.approx(0.02)
    with pytest.raises(ValueError, match="precedes"):
        return_proxy(series, 5.0, 1.0)


def test_execution_returns_signs_and_spread_normalization():
    recs = [
        _record(0, T=100.0, side=1, psi=2.0),
        _record(1, T=100.0, side=-1, psi=2.0),
    ]
    up = _series_from_logprice(lambda t: 0.01 * (t >= 1100.0))
    down = _series_from_logprice(lambda t: -0.01 * (t >= 1100.0))
    series = {"m0": up, "m1": down}
    got = execution_returns(recs, series)
    expected = np.array([np.expm1(0.01), -np.expm1(-0.01)])
    np.testing.assert_allclose(got, expected)
    normed = execution_returns(recs, series, normalize="spread")
    np.testing.assert_allclose(normed, expected / 2.0)
    with pytest.raises(ValueError, match="normalization"):
        execution_returns(recs, series, normalize="zscore")


def test_rescaled_average_skips_uncovered_records():
    T = 200.0
    recs = [_record(k, T=T) for k in range(3)]
    shape = lambda t: 0.02 * np.sqrt(np.clip(t - 1000.0, 0.0, None) / T)
    series = {
        "m0": _series_from_logprice(shape),
        "m1": _series_from_logprice(shape, t_hi=1100.0),  # stops mid-execution
        # m2 entirely missing
    }
    curve = rescaled_average(recs, series, s_max=1.0, n_points=51)
    assert np.all(curve.counts == 1)
    assert curve.s_max == 1.0
    expected = np.expm1(0.02 * np.sqrt(curve.s))
    np.testing.assert_allclose(curve.mean, expected, atol=2e-5)
    assert set(curve.bands) == {0.25, 0.75}
    assert curve.temporary_impact() == pytest.approx(np.expm1(0.02), abs=2e-5)
    with pytest.raises(ValueError, match="coverage"):
        rescaled_average(recs, {"m9": series["m0"]})


def test_quantile_slices_nearest_rank():
    values = [5.0, 1.0, 3.0, 2.0, 4.0, 7.0, 6.0]
    recs = [_record(k, R=val / 100.0) for k, val in enumerate(values)]
    out = quantile_slices(recs, "R", 3)
    np.testing.assert_array_equal(out.counts, [2, 2, 3])
    order = np.argsort(values, kind="stable")
    expected = np.empty(7, dtype=int)
    expected[order[:2]] = 0
    expected[order[2:4]] = 1
    expected[order[4:]] = 2
    np.testing.assert_array_equal(out.assignments, expected)
    assert out.x_mean[0] == pytest.approx(np.mean([0.01, 0.02]))
    with pytest.raises(ValueError, match="two buckets"):
        quantile_slices(recs, "R", 1)
    with pytest.raises(ValueError, match="cannot form"):
        quantile_slices(recs, "R", 8)
    same = [_record(k, R=0.01) for k in range(4)]
    with pytest.raises(ValueError, match="constant"):
        quantile_slices(same, "R", 2)


def test_quantile_slices_attaches_conditional_impact():
    rng = np.random.default_rng(0)
    recs, series = [], {}
    for k in range(12):
        R = 10.0 ** rng.uniform(-3, -1.5)
        rec = _record(k, R=R, T=100.0)
        recs.append(rec)
        series[rec.id] = _series_from_logprice(
            lambda t, R=R: 3.0 * R * (t >= 1050.0)
        )
    out = quantile_slices(recs, "R", 3, series=series)
    assert out.impact is not None
    assert np.all(np.diff(out.impact) > 0)  # impact grows with participation
    np.testing.assert_allclose(out.impact, np.expm1(3.0 * out.x_mean), rtol=0.2)


def test_power_law_fit_noiseless_all_losses():
    rng = np.random.default_rng(1)
    n = 200
    R = 10.0 ** rng.uniform(-3, -1, n)
    T = 10.0 ** rng.uniform(2, 4, n)
    X = np.column_stack([R, T])
    y = 0.5 * R**0.6 * T**0.3
    for loss in ("loglog", "l2", "l1"):
        fit = power_law_fit(y, X, loss=loss, names=["R", "T"])
        assert fit.exponents["R"] == pytest.approx(0.6, abs=1e-6)
        assert fit.exponents["T"] == pytest.approx(0.3, abs=1e-6)
        assert fit.prefactor == pytest.approx(0.5, rel=1e-5)
        assert fit.loss_value < 1e-12
        np.testing.assert_allclose(fit.model_values(X), y, rtol=1e-5)


def test_power_law_fit_validation():
    y = np.array([1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="strictly positive"):
        power_law_fit(y, np.array([1.0, -1.0, 2.0]))
    with pytest.raises(ValueError, match="constant"):
        power_law_fit(y, np.array([2.0, 2.0, 2.0]))
    with pytest.raises(ValueError, match="length"):
        power_law_fit(y, np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="loss"):
        power_law_fit(y, np.array([1.0, 2.0, 3.0]), loss="huber")
    with pytest.raises(ValueError, match="positive responses"):
        power_law_fit(-y, np.array([1.0, 2.0, 3.0]), loss="loglog")


def test_loglog_drops_nonpositive_responses():
    rng = np.random.default_rng(2)
    x = 10.0 ** rng.uniform(-2, 0, 50)
    y = 2.0 * x**0.5
    y[:5] = -1.0  # contaminate a few responses
    fit = power_law_fit(y, x, loss="loglog")
    assert fit.n_dropped == 5
    assert fit.n_used == 45
    assert fit.exponents["x0"] == pytest.approx(0.5, abs=1e-9)


def test_direct_regression_on_records():
    rng = np.random.default_rng(3)
    recs = [_record(k, R=10.0 ** rng.uniform(-3, -1)) for k in range(100)]
    y = 2.0 * np.array([rec.participation for rec in recs]) ** 0.7
    fit = direct_regression(recs, y, variables=("R",), loss="l2")
    assert fit.exponents["R"] == pytest.approx(0.7, abs=1e-6)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-5)
    with pytest.raises(ValueError, match="unknown variable"):
        direct_regression(recs, y, variables=("bogus",))


def test_residual_trace_slope_sign():
    rng = np.random.default_rng(4)
    recs = [
        _record(k, R=10.0 ** rng.uniform(-3, -1), T=10.0 ** rng.uniform(2, 4))
        for k in range(200)
    ]
    T = np.array([rec.duration for rec in recs])
    trending = RegressionResult(
        1.0, {"R": 0.5}, "l2", 0.0, 0.01 * np.log(T / T.mean()), len(recs)
    )
    trace = residual_trace(trending, recs, "T", 5)
    assert trace.slope(log_x=True) == pytest.approx(0.01, rel=0.05)
    assert trace.counts.sum() == len(recs)
    flat = RegressionResult(1.0, {"R": 0.5}, "l2", 0.0, np.zeros(len(recs)), len(recs))
    assert residual_trace(flat, recs, "T", 5).slope() == pytest.approx(0.0, abs=1e-12)
    short = RegressionResult(1.0, {}, "l2", 0.0, np.zeros(3), 3)
    with pytest.raises(ValueError, match="disagree"):
        residual_trace(short, recs, "T", 5)


def test_transient_fit_recovers_power_law():
    s = np.linspace(0.0, 1.0, 200)
    curve = ImpactCurve(s, 0.02 * np.maximum(s, 1e-12) ** 0.64, np.full(200, 10))
    fit = transient_fit(curve)
    assert fit.exponent == pytest.approx(0.64, abs=1e-10)
    assert fit.prefactor == pytest.approx(0.02, rel=1e-8)
    with pytest.raises(ValueError, match="positive"):
        transient_fit(ImpactCurve(s, -np.ones(200), np.full(200, 10)))
    with pytest.raises(ValueError, match="fewer than two"):
        transient_fit(curve, s_range=(0.5, 0.5001))


def test_decay_transform_and_slope():
    s = np.linspace(0.0, 3.0, 301)
    mean = np.where(s <= 1.0, s, np.nan)
    mean = 0.01 * np.where(s > 1.0, 1.0 + 0.5 * np.exp(-(s - 1.0)), mean)
    curve = ImpactCurve(s, mean, np.full(301, 7))
    transform = decay_loglog(curve)
    assert not transform.empty
    inside = (s > 1.0) & (s < 2.0)
    np.testing.assert_allclose(
        np.exp(transform.log_excess),
        (mean[inside] - curve.at(2.0))[mean[inside] > curve.at(2.0)],
    )
    short = ImpactCurve(s[:150], mean[:150], np.full(150, 7))
    with pytest.raises(ValueError, match="extend"):
        decay_loglog(short)
    # slope reads the power off exactly when the excess is a pure power law
    u = np.linspace(1.05, 1.95, 40)
    hand = DecayTransform(u, np.log(u - 1.0), -0.7 * np.log(u - 1.0) + 3.0, 0)
    assert hand.slope() == pytest.approx(-0.7, abs=1e-12)


def test_bootstrap_exponent_deterministic():
    ens = power_law_ensemble(n_records=40, noise=0.005, n_steps=2000, seed=6)
    a = bootstrap_exponent(ens.records, ens.series, n_draws=60, seed=17, n_points=40)
    b = bootstrap_exponent(ens.records, ens.series, n_draws=60, seed=17, n_points=40)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.q05 <= a.q25 <= a.q50 <= a.q75 <= a.q95
    assert a.full == pytest.approx(ens.truth["transient"], abs=0.1)
    with pytest.raises(ValueError, match="at least 10"):
        bootstrap_exponent(ens.records[:5], ens.series)


def test_anticipation_groups_null_closure():
    # price moves depend only on elapsed physical time, so doubling the
    # duration at fixed rate leaves the early curve unchanged
    R0, T0 = 0.004, 200.0
    recs, series = [], {}
    k = 0
    for i in range(3):
        for _ in range(4):
            rec = _record(k, R=R0 * 2**i * 1.2, T=T0 * 2**i * 1.2)
            recs.append(rec)
            series[rec.id] = _series_from_logprice(
                lambda t: 0.01 * np.clip(t - 1000.0, 0.0, None) / T0,
                t_hi=2200.0,
                n=22001,
            )
            k += 1
    out = anticipation_groups(recs, series, R0, T0, i_max=5, n_points=81)
    np.testing.assert_array_equal(out.group_counts, [4, 4, 4, 0, 0])
    assert out.skipped == [3, 4]
    assert [i for i, _ in out.distances] == [1, 2]
    scale = out.curves[0].mean.max()
    assert all(gap < 1e-3 * scale for _, gap in out.distances)
