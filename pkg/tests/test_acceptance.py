"""Acceptance checklist: one verdict line per numbered criterion.

Each test prints ``ACCEPTANCE n PASS/FAIL`` with the measured numbers before
asserting, so ``pytest -s tests/test_acceptance.py`` yields a thirteen-line
scoreboard.  Seeds are frozen; every check is deterministic.
"""

import os
import time

import numpy as np

from hawkes_impact import io as hio
from hawkes_impact.calibration import FitProblem, fit
from hawkes_impact.cli import main
from hawkes_impact.daily import (
    WINDOW_AFTER,
    capm_decompose,
    debias_profiles,
    fit_sqrt_model,
    postexec_profile,
)
from hawkes_impact.estimation import (
    MetaorderRecord,
    PriceSeries,
    anticipation_groups,
    direct_regression,
    rescaled_average,
    residual_trace,
    transient_fit,
)
from hawkes_impact.impact_model import (
    ImpactModel,
    TradingSchedule,
    decay_exponent,
    impact_curve_analytic,
    permanent_impact,
)
from hawkes_impact.kernels import (
    ExponentialKernel,
    PowerLawKernel,
    kappa_series,
    l1_norm,
    sample_kernel,
)
from hawkes_impact.simulate import (
    HawkesSpec,
    expected_counts,
    monte_carlo_counts,
    monte_carlo_impact,
)
from hawkes_impact.synthetic import daily_cohort, model_curve_ensemble, power_law_ensemble


def _verdict(num, ok, detail):
    line = f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    assert ok, line


def _exp_impact_model(C, T=60.0):
    return ImpactModel(
        mu=1.0,
        phi=ExponentialKernel(0.5, 1.0),
        C=C,
        schedule=TradingSchedule.constant(0.0, T, 1.0),
    )


def _record(k, R, T=600.0, instrument="S0"):
    V = 1e6
    return MetaorderRecord(
        id=f"m{k:05d}",
        instrument=instrument,
        date="2024-01-02",
        side=1,
        t0=1000.0,
        duration=T,
        v=R * V,
        V=V,
        vbar=R * V / 0.1,
    )


def test_01_kappa_series_matches_exponential_closed_form():
    start = time.perf_counter()
    phi = sample_kernel(ExponentialKernel(0.5, 1.0), 1e-3, 20.0)
    kappa = kappa_series(phi, check=False)
    closed = 0.5 * np.exp(-1.5 * kappa.t)
    err = float(np.max(np.abs(kappa.values - closed)))
    elapsed = time.perf_counter() - start
    _verdict(
        1,
        err < 1e-3 and elapsed < 5.0,
        f"kappa vs closed form: sup error {err:.2e} (limit 1e-03) "
        f"in {elapsed:.2f}s (limit 5s)",
    )


def test_02_kappa_mass_identity_across_kernel_families():
    worst = 0.0
    for a in (0.3, 0.6, 0.8456):
        target = a / (1.0 + a)
        for phi in (
            sample_kernel(ExponentialKernel(a, 1.0), 1e-3, 30.0),
            sample_kernel(PowerLawKernel.from_l1_norm(a, -1.9, 0.25), 5e-3, 2000.0),
        ):
            kappa = kappa_series(phi, check=False)
            worst = max(worst, abs(l1_norm(kappa) - target))
    _verdict(
        2,
        worst < 1e-3,
        f"kappa mass vs a/(1+a), both families, a in {{0.3, 0.6, 0.8456}}: "
        f"worst error {worst:.2e} (limit 1e-03)",
    )


def test_03_expected_counts_match_monte_carlo():
    start = time.perf_counter()
    spec = HawkesSpec(
        (0.4, 0.25),
        ((None, ExponentialKernel(0.3, 1.0)), (ExponentialKernel(0.45, 1.5), None)),
        horizon=10.0,
    )
    t = np.linspace(0.5, 10.0, 20)
    exact = expected_counts(spec, t, dt=1e-3)
    mc, se = monte_carlo_counts(spec, t, n_paths=10_000, seed=1)
    z = float(np.max(np.abs(mc - exact) / se))
    elapsed = time.perf_counter() - start
    _verdict(
        3,
        z < 3.0 and elapsed < 60.0,
        f"cross-kernel counts, 1e4 paths, 20 points: max |z| {z:.2f} "
        f"(limit 3) in {elapsed:.1f}s (limit 60s)",
    )


def test_04_analytic_curve_matches_monte_carlo_impact():
    start = time.perf_counter()
    t = np.linspace(12.0, 240.0, 20)
    worst = 0.0
    for C in (0.0, 0.5, 1.0):
        model = _exp_impact_model(C)
        analytic = impact_curve_analytic(model, t, dt=1e-2)
        mc = monte_carlo_impact(model, 100_000, t, seed=3)
        worst = max(worst, float(np.max(np.abs(mc.mean - analytic.values) / mc.stderr)))
    elapsed = time.perf_counter() - start
    _verdict(
        4,
        worst < 3.0 and elapsed < 300.0,
        f"analytic vs 1e5-path Monte Carlo, C in {{0, 0.5, 1}} on [0, 4T]: "
        f"max |z| {worst:.2f} (limit 3) in {elapsed:.0f}s (limit 300s)",
    )


def test_05_long_run_curve_level_and_full_dissipation():
    T = 60.0
    worst = 0.0
    for C in (0.0, 0.5):
        model = _exp_impact_model(C)
        value = impact_curve_analytic(model, np.array([100.0 * T]), dt=1e-2).values[0]
        worst = max(worst, abs(value / permanent_impact(model) - 1.0))
    # C=1: past the peak the curve only shrinks, all the way to (near) zero
    curve = impact_curve_analytic(
        _exp_impact_model(1.0), np.array([T, 61.0, 63.0, 2000.0]), dt=1e-2
    )
    peak = abs(curve.values[0])
    mags = np.abs(curve.values[1:])
    dissipates = bool(np.all(np.diff(mags) < 0.0) and mags[-1] < 0.02 * peak)
    _verdict(
        5,
        worst < 0.02 and dissipates,
        f"level at 100T vs permanent value: rel error {worst:.2e} (limit 0.02) "
        f"for C in {{0, 0.5}}; C=1 decays to {mags[-1] / peak:.1e} of peak",
    )


def test_06_decay_exponent_windows_for_power_law_kernels():
    T = 60.0
    results = {}
    for b, expected in ((-1.5, -0.5), (-1.2, -0.2)):
        model = ImpactModel(
            mu=0.0,
            phi=PowerLawKernel.from_l1_norm(0.8456, b, offset=0.25),
            C=0.0,
            schedule=TradingSchedule.constant(0.0, T, 1.0),
        )
        got = decay_exponent(model, (5 * T, 50 * T), dt=2e-2, n_points=40)
        results[b] = (got.exponent, expected, got.power_law_tail)
    ok = all(abs(g - e) < 0.15 and flag for g, e, flag in results.values())
    shown = ", ".join(
        f"b={b}: {g:+.3f} (want {e:+.1f}±0.15)" for b, (g, e, _) in results.items()
    )
    _verdict(6, ok, f"tail exponents on [5T, 50T]: {shown}")


def test_07_rescaled_average_recovers_transient_exponent():
    ens = power_law_ensemble(
        n_records=500, transient=0.64, noise=0.004, n_steps=3000, seed=3
    )
    curve = rescaled_average(ens.records, ens.series, s_max=1.0)
    got = transient_fit(curve).exponent
    _verdict(
        7,
        abs(got - 0.64) < 0.02,
        f"execution-shape exponent from 500 noisy records: {got:.4f} (want 0.64±0.02)",
    )


def test_08_participation_exponent_recovery_under_noise():
    rng = np.random.default_rng(12)
    n = 10_000
    R = 10.0 ** rng.uniform(-3.0, -1.0, n)
    records = [_record(k, R[k]) for k in range(n)]
    clean = np.sqrt(R)
    noisy = clean + 0.02 * rng.standard_normal(n)
    g = direct_regression(records, noisy, variables=("R",), loss="l2").exponents["R"]
    exact_dev = max(
        abs(
            direct_regression(records, clean, variables=("R",), loss=loss).exponents[
                "R"
            ]
            - 0.5
        )
        for loss in ("l2", "l1", "loglog")
    )
    _verdict(
        8,
        abs(g - 0.5) < 0.05 and exact_dev < 1e-10,
        f"sqrt law on 1e4 noisy responses: L2 exponent {g:.4f} (want 0.5±0.05); "
        f"noiseless max deviation {exact_dev:.1e} over all losses (limit 1e-10)",
    )


def test_09_duration_blind_fit_leaves_negative_residual_trace():
    rng = np.random.default_rng(7)
    n = 10_000
    R = 10.0 ** rng.uniform(-3.0, -1.0, n)
    T = 10.0 ** rng.uniform(2.0, 4.0, n)
    records = [_record(k, R[k], T[k]) for k in range(n)]
    y = np.sqrt(R) * T**-0.25
    fitted = direct_regression(records, y, variables=("R",), loss="l2")
    trace = residual_trace(fitted, records, "T", 10)
    slope = trace.slope(log_x=True)
    _verdict(
        9,
        slope < 0.0 and bool(np.all(np.diff(trace.residual_mean) < 0.0)),
        f"residual trace vs duration over 10 quantiles: slope {slope:.4f} "
        f"(strictly negative, monotone)",
    )


def test_10_kernel_fit_round_trip_on_four_curves():
    start = time.perf_counter()
    durations = (600.0, 1200.0, 2400.0, 4800.0)
    C_true = (0.5, 0.7, 0.8, 0.85)
    curves, truth = model_curve_ensemble(
        l1_norm=0.8456, b=-1.5, C_values=C_true, durations=durations
    )
    problem = FitProblem(curves, durations)
    result = fit(problem)
    scale = problem.curve_scale()
    elapsed = time.perf_counter() - start
    c_err = max(abs(g - w) for g, w in zip(result.C, C_true))
    ok = (
        c_err < 0.1
        and abs(result.b - truth["b"]) < 0.2
        and result.objective < 1e-4 * scale
        and elapsed < 600.0
    )
    _verdict(
        10,
        ok,
        f"four-curve refit: b {result.b:.3f} (want -1.5±0.2), max C error "
        f"{c_err:.3f} (limit 0.1), objective {result.objective / scale:.1e} of "
        f"scale (limit 1e-04) in {elapsed:.0f}s (limit 600s)",
    )


def test_11_nested_window_groups_close_without_anticipation():
    T0, R0 = 200.0, 0.004
    shape_model = ImpactModel(
        mu=0.0,
        phi=ExponentialKernel(0.4, 0.5),
        C=0.6,
        schedule=TradingSchedule.constant(0.0, 960.0, 1.0),
    )
    u_grid = np.linspace(0.0, 960.0, 4801)
    ref = impact_curve_analytic(shape_model, u_grid, dt=1e-2)
    amp = 0.02 / np.max(np.abs(ref.values))
    t_axis = np.arange(0.0, 1970.0, 0.5)
    x = amp * np.interp(
        t_axis - 1000.0, u_grid, ref.values, left=0.0, right=ref.values[-1]
    )
    shared = PriceSeries(t_axis, 100.0 * np.exp(x))
    records, series = [], {}
    for i in (1, 2, 3):
        for j in range(4):
            rec = _record(
                4 * i + j,
                R=1.2 * R0 * 2 ** (i - 1),
                T=1.2 * T0 * 2 ** (i - 1),
                instrument=f"S{4 * i + j}",
            )
            records.append(rec)
            series[rec.id] = shared
    res = anticipation_groups(records, series, R0, T0, i_max=3)
    scale = max(np.max(np.abs(c.mean)) for c in res.curves if c is not None)
    rel = max(gap for _, gap in res.distances) / scale
    ok = (
        list(res.group_counts) == [4, 4, 4]
        and not res.skipped
        and rel < 0.02
    )
    _verdict(
        11,
        ok,
        f"doubling-cell closure over 3 groups: max pairwise sup distance "
        f"{rel:.4f} of curve scale (limit 0.02)",
    )


def test_12_followup_debias_closes_daily_profile():
    cohort = daily_cohort(
        n_records=2500,
        a=2e-3,
        exponent=0.5,
        own_decay=0.75,
        followup_decay=0.7,
        sigma_idio=2e-4,
        seed=3,
    )
    day0 = np.array(
        [r.side * capm_decompose(r).residuals[WINDOW_AFTER] for r in cohort.records]
    )
    parts = np.array([r.participation for r in cohort.records])
    a_hat = fit_sqrt_model(day0, parts, exponent=0.5)
    raw = postexec_profile(cohort.records, n_boot=400, seed=1, band_levels=(0.05, 0.95))
    deb = debias_profiles(
        cohort.records,
        cohort.followups,
        a_hat,
        exponent=0.5,
        n_boot=400,
        seed=1,
        band_levels=(0.05, 0.95),
    )
    lo = deb.bands["idiosyncratic"][0.05][-1]
    hi = deb.bands["idiosyncratic"][0.95][-1]
    ok = lo <= 0.0 <= hi and raw.idiosyncratic[-1] > 5.0
    _verdict(
        12,
        ok,
        f"day-20 idiosyncratic drift: raw {raw.idiosyncratic[-1]:+.2f} bp, "
        f"debiased {deb.idiosyncratic[-1]:+.3f} bp with CI [{lo:+.3f}, {hi:+.3f}] "
        f"containing zero",
    )


def _run_cli(command, config, out, tmp_path):
    config_path = str(tmp_path / f"{command}_config.json")
    hio.write_json(config_path, config)
    os.makedirs(out, exist_ok=True)
    rc = main([command, "--config", config_path, "--out", out])
    assert rc == 0, f"{command} exited with {rc}"
    return {
        name: open(os.path.join(out, name), "rb").read()
        for name in sorted(os.listdir(out))
    }


def test_13_seeded_commands_reproduce_byte_identical_outputs(tmp_path):
    sim_model = ImpactModel(
        mu=0.5,
        phi=ExponentialKernel(0.3, 1.0),
        C=0.5,
        schedule=TradingSchedule.constant(0.0, 10.0, 0.8),
    ).to_dict()
    ens = power_law_ensemble(n_records=40, seed=11)
    meta = str(tmp_path / "metaorders.csv")
    prices = str(tmp_path / "prices")
    os.makedirs(prices)
    hio.write_metaorders(meta, ens.records)
    for rec in ens.records:
        hio.write_price_series(
            os.path.join(prices, f"{rec.instrument}_{rec.date}.csv"),
            ens.series[rec.id],
        )
    fit_curves, fit_truth = model_curve_ensemble(
        0.8456, -1.5, (0.5, 0.85), (600.0, 1200.0)
    )
    curve_paths = []
    for k, curve in enumerate(fit_curves):
        p = str(tmp_path / f"curve_{k}.csv")
        hio.write_impact_curve(p, curve)
        curve_paths.append(p)
    from hawkes_impact.synthetic import daily_cohort_tables

    tables = daily_cohort_tables(daily_cohort(n_records=25, sigma_idio=5e-4, seed=4))
    closes = str(tmp_path / "closes.csv")
    index_closes = str(tmp_path / "index.csv")
    index_map = str(tmp_path / "map.csv")
    daily_meta = str(tmp_path / "daily_metaorders.csv")
    hio.write_metaorders(daily_meta, tables["records"])
    hio.write_csv(closes, ["instrument", "date", "close"], tables["closes_rows"])
    hio.write_csv(index_closes, ["index", "date", "close"], tables["index_rows"])
    hio.write_csv(index_map, ["instrument", "index"], tables["map_rows"])

    configs = {
        "simulate": {
            "model": sim_model,
            "n_paths": 150,
            "t_max": 20.0,
            "n_points": 21,
            "dt_det": 1e-2,
            "seed": 3,
        },
        "estimate": {
            "metaorders": meta,
            "prices": prices,
            "regression": {"variables": ["R"], "loss": "l2"},
            "quantiles": {"x": "R", "K": 4},
            "bootstrap": {"n_draws": 25},
            "seed": 7,
        },
        "fit": {
            "curves": [
                {"path": p, "duration": T}
                for p, T in zip(curve_paths, (600.0, 1200.0))
            ],
            "offset": fit_truth["offset"],
            "n_starts": 2,
            "max_sweeps": 3,
        },
        "daily": {
            "metaorders": daily_meta,
            "closes": closes,
            "index_closes": index_closes,
            "index_map": index_map,
            "n_boot": 25,
            "debias": {},
            "autocorr": {},
            "seed": 2,
        },
    }
    n_files = 0
    for command, config in configs.items():
        first = _run_cli(command, config, str(tmp_path / f"{command}_a"), tmp_path)
        second = _run_cli(command, config, str(tmp_path / f"{command}_b"), tmp_path)
        assert first.keys() == second.keys()
        for name in first:
            assert first[name] == second[name], f"{command}/{name} differs"
        n_files += len(first)
    _verdict(
        13,
        n_files > 0,
        f"simulate/estimate/fit/daily reruns: {n_files} output files byte-identical",
    )
