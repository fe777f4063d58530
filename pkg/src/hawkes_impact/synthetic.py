"""Synthetic market data with known ground truth.

Every generator here builds inputs for one stage of the pipeline together
with the parameters used to produce them, so that tests and demos can run
the estimation or calibration machinery in a closed loop and compare the
output against the truth.  All randomness flows through a single seed.
"""

from dataclasses import dataclass

import numpy as np

from .daily import N_CLOSES, WINDOW_AFTER, WINDOW_BEFORE, DailyRecord
from .estimation import ImpactCurve, MetaorderRecord, PriceSeries
from .impact_model import (
    ImpactModel,
    TradingSchedule,
    impact_curve_analytic,
)
from .kernels import PowerLawKernel

__all__ = [
    "Ensemble",
    "daily_cohort_tables",
    "power_law_ensemble",
    "model_curve_ensemble",
    "model_price_ensemble",
    "DailyCohort",
    "daily_cohort",
    "flow_series",
]


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Metaorder records, their price series (by record id), and the truth."""

    records: list
    series: dict
    truth: dict


def _draw_records(rng, n_records, day_length, s_span, n_instruments):
    records = []
    for k in range(n_records):
        R = float(np.clip(rng.lognormal(np.log(0.01), 0.8), 2e-3, 0.15))
        T = float(np.clip(rng.lognormal(np.log(1800.0), 0.5), 300.0, 7200.0))
        t0 = float(rng.uniform(0.0, max(day_length - s_span * T, 1.0)))
        side = int(rng.choice([-1, 1]))
        rate = float(rng.uniform(0.05, 0.35))
        V = 1e6
        v = R * V
        # one record per instrument-date, so per-day price files stay 1:1
        day = k // n_instruments
        records.append(
            MetaorderRecord(
                id=f"m{k:05d}",
                instrument=f"I{k % n_instruments:02d}",
                date=f"2024-{1 + day // 28:02d}-{1 + day % 28:02d}",
                t0=t0,
                duration=T,
                side=side,
                v=v,
                V=V,
                vbar=v / rate,
                sigma=0.02,
                psi=2e-4,
            )
        )
    return records


def power_law_ensemble(
    n_records=500,
    exponent=0.64,
    prefactor=0.02,
    transient=0.5,
    decay=0.25,
    noise=0.0,
    s_span=3.0,
    day_length=30600.0,
    n_instruments=10,
    n_steps=3000,
    seed=0,
) -> Ensemble:
    """Records whose price paths carry a concave-power impact signature.

    The signed log-price of record k follows
    ``prefactor * R_k**exponent * shape((t - t0) / T_k)`` with
    ``shape(s) = s**transient`` during execution and ``s**-decay`` after,
    plus an optional Brownian noise of daily volatility ``noise``.  The
    rescaled average then recovers the shape, and regressions of the
    execution return on participation recover ``exponent``.
    """
    rng = np.random.default_rng(seed)
    records = _draw_records(rng, n_records, day_length, s_span, n_instruments)
    series = {}
    for rec in records:
        t = np.linspace(0.0, rec.t0 + (s_span + 0.05) * rec.duration, n_steps)
        s = np.clip((t - rec.t0) / rec.duration, 0.0, None)
        shape = np.minimum(s, 1.0) ** transient * np.maximum(s, 1.0) ** (-decay)
        logp = rec.side * prefactor * rec.participation**exponent * shape
        if noise:
            dt_days = np.diff(t, prepend=t[0]) / day_length
            logp = logp + np.cumsum(
                noise * np.sqrt(dt_days) * rng.standard_normal(n_steps)
            )
        series[rec.id] = PriceSeries(t, 100.0 * np.exp(logp))
    truth = {
        "exponent": exponent,
        "prefactor": prefactor,
        "transient": transient,
        "decay": decay,
    }
    return Ensemble(records, series, truth)


def _model_family(l1_norm, b, C_values, durations, offset):
    """One shared power-law kernel, one model per (duration, C) pair."""
    phi = PowerLawKernel.from_l1_norm(l1_norm, b, offset=offset * durations[0])
    return [
        ImpactModel(mu=0.0, phi=phi, C=C, schedule=TradingSchedule.constant(0.0, T, 1.0))
        for T, C in zip(durations, C_values)
    ]


def model_curve_ensemble(
    l1_norm,
    b,
    C_values,
    durations,
    offset=0.25,
    scale=3e-4,
    s_span=2.0,
    n_points=101,
    noise=0.0,
    seed=0,
    counts=500,
):
    """Measured-looking impact curves generated from the feedback model.

    One curve per (duration, C) pair, all sharing the same power-law
    kernel; values are normalized so each curve ends execution at
    ``scale``, then optionally perturbed multiplicatively by a centered
    Gaussian of relative width ``noise``.  The default grid has a node
    exactly at s = 1, where the curves kink.  Returns (curves, truth).
    """
    if len(C_values) != len(durations):
        raise ValueError("need one C per duration")
    rng = np.random.default_rng(seed)
    s_grid = np.linspace(0.0, s_span, n_points)
    curves = []
    for model in _model_family(l1_norm, b, C_values, durations, offset):
        T = model.schedule.duration
        cur = impact_curve_analytic(model, s_grid * T, dt=T / 8000)
        vals = scale * cur.values / cur.at(T)
        if noise:
            vals = vals * (1.0 + noise * rng.standard_normal(len(vals)))
        curves.append(ImpactCurve(s_grid, vals, np.full(n_points, counts)))
    truth = {
        "l1_norm": l1_norm,
        "b": b,
        "C": list(C_values),
        "offset": offset,
        "time_scale": durations[0],
    }
    return curves, truth


def model_price_ensemble(
    l1_norm,
    b,
    C,
    n_records=400,
    duration=1800.0,
    offset=0.25,
    scale=3e-4,
    noise=0.0,
    s_span=2.5,
    day_length=30600.0,
    seed=0,
) -> Ensemble:
    """Price paths shaped by one model curve, for full-pipeline runs.

    All records share the duration so that the rescaled average of their
    signed returns reproduces the analytic curve exactly (up to noise).
    """
    rng = np.random.default_rng(seed)
    records = _draw_records(rng, n_records, day_length, s_span, 10)
    records = [
        MetaorderRecord(
            id=r.id,
            instrument=r.instrument,
            date=r.date,
            t0=r.t0,
            duration=duration,
            side=r.side,
            v=r.v,
            V=r.V,
            vbar=r.vbar,
            sigma=r.sigma,
            psi=r.psi,
        )
        for r in records
    ]
    (model,) = _model_family(l1_norm, b, [C], [duration], offset)
    s_ref = np.linspace(0.0, s_span + 0.1, 1501)
    ref = impact_curve_analytic(model, s_ref * duration, dt=duration / 8000)
    shape = scale * ref.values / ref.at(duration)
    series = {}
    for rec in records:
        t = np.linspace(0.0, rec.t0 + (s_span + 0.05) * duration, 800)
        s = np.clip((t - rec.t0) / duration, 0.0, s_ref[-1])
        logp = rec.side * np.interp(s, s_ref, shape)
        if noise:
            dt_days = np.diff(t, prepend=t[0]) / day_length
            logp = logp + np.cumsum(
                noise * np.sqrt(dt_days) * rng.standard_normal(len(t))
            )
        series[rec.id] = PriceSeries(t, 100.0 * np.exp(logp))
    truth = {"l1_norm": l1_norm, "b": b, "C": C, "scale": scale, "offset": offset}
    return Ensemble(records, series, truth)


@dataclass(frozen=True, eq=False)
class DailyCohort:
    """Daily records, the signed follow-up matrix, and the generator truth."""

    records: list
    followups: np.ndarray
    truth: dict


def daily_cohort(
    n_records=400,
    a=2e-3,
    exponent=0.5,
    own_decay=0.75,
    followup_decay=0.8,
    beta_range=(0.6, 1.4),
    sigma_index=0.01,
    sigma_idio=0.005,
    seed=0,
) -> DailyCohort:
    """Cohort of daily records with decaying own impact and persistent follow-ups.

    The execution-day idiosyncratic move of record k is
    ``side * a * R**exponent`` and relaxes geometrically (factor
    ``own_decay`` per day), so the own contribution is negligible by day
    +20.  Correlated follow-up flow ``A_j = side * R * followup_decay**j``
    at day offsets j = 1..20 adds a persistent ``a * sign(A) |A|**exponent``
    each day, biasing the raw profile upward; debiasing with the true
    coefficient removes it.  Index returns and an independent idiosyncratic
    noise complete the CAPM structure.
    """
    rng = np.random.default_rng(seed)
    meta = _draw_records(rng, n_records, 30600.0, 3.0, 10)
    records = []
    followups = np.empty((n_records, WINDOW_AFTER))
    betas = np.empty(n_records)
    for k, rec in enumerate(meta):
        eps = rec.side
        R = rec.participation
        beta = float(rng.uniform(*beta_range))
        betas[k] = beta
        r_index = sigma_index * rng.standard_normal(N_CLOSES - 1)
        r_idio = sigma_idio * rng.standard_normal(N_CLOSES - 1)
        own = eps * a * R**exponent
        A = eps * R * followup_decay ** np.arange(1, WINDOW_AFTER + 1)
        followups[k] = A
        impact_inc = np.zeros(N_CLOSES - 1)
        i0 = WINDOW_BEFORE - 1  # return index of the execution day
        impact_inc[i0] = own
        pows = own_decay ** np.arange(1, WINDOW_AFTER + 1)
        impact_inc[i0 + 1 :] = own * np.diff(pows, prepend=1.0)
        impact_inc[i0 + 1 :] += a * np.sign(A) * np.abs(A) ** exponent
        r_stock = beta * r_index + r_idio + impact_inc
        index_closes = 50.0 * np.exp(np.concatenate([[0.0], np.cumsum(r_index)]))
        closes = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(r_stock)]))
        records.append(DailyRecord(rec, closes, index_closes))
    truth = {
        "a": a,
        "exponent": exponent,
        "own_decay": own_decay,
        "followup_decay": followup_decay,
        "betas": betas,
    }
    return DailyCohort(records, followups, truth)


def daily_cohort_tables(cohort) -> dict:
    """Flat tables (metaorders, closes, index closes, map) for a daily cohort.

    Rekeys each record onto its own instrument and 42-day calendar with the
    execution on day index 21, and materialises the injected follow-up flow
    as real metaorder rows on the following dates.  The result feeds the
    file-based daily pipeline: follow-up rows lack a full close window, so
    only the primary records produce profiles, while the follow-up rows
    drive the debiasing matrix.
    """
    from dataclasses import replace

    calendar = [f"d{j:03d}" for j in range(N_CLOSES)]
    exec_date = calendar[WINDOW_BEFORE]
    records, closes_rows, index_rows, map_rows = [], [], [], []
    for k, dr in enumerate(cohort.records):
        inst, idx = f"S{k:05d}", f"X{k:05d}"
        records.append(replace(dr.record, instrument=inst, date=exec_date))
        for j, A in enumerate(cohort.followups[k], start=1):
            if A == 0.0:
                continue
            v = abs(A) * dr.record.V
            records.append(
                MetaorderRecord(
                    id=f"f{k:05d}_{j:02d}",
                    instrument=inst,
                    date=calendar[WINDOW_BEFORE + j],
                    t0=dr.record.t0,
                    duration=dr.record.duration,
                    side=1 if A > 0 else -1,
                    v=v,
                    V=dr.record.V,
                    vbar=v,
                )
            )
        closes_rows += [(inst, d, c) for d, c in zip(calendar, dr.closes)]
        index_rows += [(idx, d, c) for d, c in zip(calendar, dr.index_closes)]
        map_rows.append((inst, idx))
    return {
        "records": records,
        "closes_rows": closes_rows,
        "index_rows": index_rows,
        "map_rows": map_rows,
        "calendar": calendar,
    }


def flow_series(n_instruments=8, n_days=300, ar=0.3, sigma=0.02, seed=0) -> dict:
    """AR(1) daily signed-flow series per instrument; autocorrelation ar**lag."""
    rng = np.random.default_rng(seed)
    out = {}
    stationary = sigma / np.sqrt(1.0 - ar**2)
    for i in range(n_instruments):
        x = np.empty(n_days)
        x[0] = stationary * rng.standard_normal()
        for t in range(1, n_days):
            x[t] = ar * x[t - 1] + sigma * rng.standard_normal()
        out[f"I{i:02d}"] = x
    return out
