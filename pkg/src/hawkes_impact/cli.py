"""The ``hawkes-impact`` command line.

Five subcommands cover the pipeline end to end: ``simulate`` draws a
seeded realisation plus a Monte Carlo impact curve, ``curve`` evaluates
analytic curves, ``estimate`` turns metaorder and price CSVs into rescaled
curves and regressions, ``fit`` calibrates the model to curve files, and
``daily`` runs the close-to-close decomposition.  Every run writes a
``run.json`` sidecar with the resolved command, seed, and config;
``--config run.json`` reruns it and reproduces the outputs byte for byte.
Failures print a human-readable line and one machine-readable JSON object
to stderr and exit nonzero without leaving partial output files behind.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import io as hio
from .calibration import FitBounds, FitProblem, fit, model_curves
from .daily import (
    build_followup_matrix,
    capm_decompose,
    debias_profiles,
    fit_sqrt_model,
    participation_autocorr,
    postexec_profile,
)
from .estimation import (
    ImpactCurve,
    bootstrap_exponent,
    decay_loglog,
    direct_regression,
    execution_returns,
    quantile_slices,
    rescaled_average,
    residual_trace,
    transient_fit,
)
from .impact_model import ImpactModel, impact_curve_analytic
from .simulate import (
    _hawkes_from_model,
    _metaorder_exogenous,
    monte_carlo_impact,
    price_path,
    simulate,
)
from .svg import line_chart

_ALLOWED = {
    "simulate": {"model", "n_paths", "t_max", "n_points", "dt_det", "seed"},
    "curve": {"model", "models", "t_max", "n_points", "dt", "svg", "seed"},
    "estimate": {
        "metaorders",
        "prices",
        "filters",
        "s_max",
        "n_points",
        "band_levels",
        "regression",
        "quantiles",
        "bootstrap",
        "svg",
        "seed",
    },
    "fit": {
        "curves",
        "offset",
        "time_scale",
        "bounds",
        "n_starts",
        "max_sweeps",
        "svg",
        "seed",
    },
    "daily": {
        "metaorders",
        "closes",
        "index_closes",
        "index_map",
        "n_boot",
        "band_levels",
        "debias",
        "autocorr",
        "seed",
    },
}


class ConfigError(ValueError):
    pass


def _check_keys(command, config):
    unknown = sorted(set(config) - _ALLOWED[command])
    if unknown:
        raise ConfigError(
            f"unknown config key(s) for {command}: {', '.join(unknown)}"
        )


def _load_run(args):
    """Resolve (config, seed, dt) from the flags, unwrapping run.json sidecars."""
    config = hio.read_json(args.config)
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    seed = None
    dt = args.dt
    if {"command", "config", "seed"} <= set(config):
        if config["command"] != args.command:
            raise ConfigError(
                f"sidecar was written by {config['command']!r}, "
                f"not {args.command!r}"
            )
        seed = int(config["seed"])
        if dt is None:
            dt = config.get("flags", {}).get("dt")
        config = config["config"]
    _check_keys(args.command, config)
    if args.seed is not None:
        seed = args.seed
    if seed is None:
        seed = int(config.get("seed", 0))
    return config, seed, dt


def _grid(config, default_t_max, default_n=121):
    t_max = float(config.get("t_max", default_t_max))
    n = int(config.get("n_points", default_n))
    if not (t_max > 0 and n >= 2):
        raise ConfigError("need t_max > 0 and n_points >= 2")
    return np.linspace(0.0, t_max, n)


def _models_from(config):
    if "models" in config and "model" in config:
        raise ConfigError("give either 'model' or 'models', not both")
    if "models" in config:
        return [ImpactModel.from_dict(d) for d in config["models"]]
    if "model" in config:
        return [ImpactModel.from_dict(config["model"])]
    raise ConfigError("missing 'model'")


def cmd_simulate(config, out, seed, dt_flag):
    models = _models_from(config)
    if len(models) != 1:
        raise ConfigError("simulate takes exactly one model")
    model = models[0]
    n_paths = int(config.get("n_paths", 1000))
    dt_det = float(dt_flag or config.get("dt_det", 1e-3))
    t_grid = _grid(config, 4.0 * model.schedule.duration, 81)
    horizon = float(t_grid[-1])

    mc = monte_carlo_impact(model, n_paths, t_grid, seed=seed, dt_det=dt_det)
    spec = _hawkes_from_model(model, horizon)
    exo = _metaorder_exogenous(model, dt_det, horizon)
    stream = simulate(spec, exogenous=exo, seed=seed, dt_det=dt_det)

    hio.write_events(os.path.join(out, "events.csv"), stream)
    hio.write_price_path(os.path.join(out, "price.csv"), price_path(stream))
    hio.write_mc_curve(os.path.join(out, "impact_mc.csv"), mc)


def cmd_curve(config, out, seed, dt_flag):
    models = _models_from(config)
    t_max = 3.0 * max(m.schedule.duration for m in models)
    t_grid = _grid(config, t_max)
    dt = float(dt_flag or config.get("dt", 1e-2))
    curves = [impact_curve_analytic(m, t_grid, dt=dt) for m in models]
    if len(curves) == 1:
        hio.write_analytic_curve(os.path.join(out, "curve.csv"), curves[0])
    else:
        for k, cur in enumerate(curves):
            hio.write_analytic_curve(os.path.join(out, f"curve_{k}.csv"), cur)
    if config.get("svg"):
        series = [
            (f"C={m.C:g}", cur.t, cur.values) for m, cur in zip(models, curves)
        ]
        line_chart(
            series,
            path=os.path.join(out, "curves.svg"),
            title="expected impact",
            x_label="time (s)",
            y_label="price displacement",
        )


def _estimate_series_map(records, by_inst_date):
    return {
        rec.id: by_inst_date[(rec.instrument, rec.date)]
        for rec in records
        if (rec.instrument, rec.date) in by_inst_date
    }


def cmd_estimate(config, out, seed, dt_flag):
    for key in ("metaorders", "prices"):
        if key not in config:
            raise ConfigError(f"missing '{key}'")
    records = hio.read_metaorders(config["metaorders"])
    filters = config.get("filters", {})
    dropped = {}
    if filters is not False:
        records, dropped = hio.filter_records(records, **(filters or {}))
    if not records:
        raise ConfigError("no records remain after ingestion filters")
    series = _estimate_series_map(records, hio.read_price_dir(config["prices"]))

    s_max = float(config.get("s_max", 2.0))
    n_points = int(config.get("n_points", 101))
    band_levels = tuple(config.get("band_levels", (0.25, 0.75)))
    curve = rescaled_average(
        records, series, s_max=s_max, n_points=n_points, band_levels=band_levels
    )

    summary = {
        "n_records": len(records),
        "n_covered": int(curve.counts[0]),
        "dropped": dropped,
        "temporary_impact": curve.temporary_impact(),
        "transient": None,
        "decay_slope": None,
    }
    try:
        tf = transient_fit(curve)
        summary["transient"] = {"exponent": tf.exponent, "prefactor": tf.prefactor}
    except ValueError:
        pass  # noisy curves can dip below zero during execution
    if s_max >= 2.0:
        transform = decay_loglog(curve)
        if not transform.empty:
            summary["decay_slope"] = transform.slope()

    outputs = [
        (os.path.join(out, "curve.csv"), hio.write_impact_curve, curve),
        (os.path.join(out, "summary.json"), hio.write_json, summary),
    ]

    if config.get("regression"):
        reg_cfg = dict(config["regression"])
        variables = tuple(reg_cfg.pop("variables", ("R",)))
        loss = reg_cfg.pop("loss", "l2")
        trace_on = reg_cfg.pop("trace_on", None)
        trace_k = int(reg_cfg.pop("trace_buckets", 10))
        if reg_cfg:
            raise ConfigError(
                f"unknown regression key(s): {', '.join(sorted(reg_cfg))}"
            )
        usable = [r for r in records if r.id in series]
        y = execution_returns(usable, series)
        result = direct_regression(usable, y, variables=variables, loss=loss)
        outputs.append(
            (
                os.path.join(out, "regression.json"),
                hio.write_json,
                {
                    "prefactor": result.prefactor,
                    "exponents": result.exponents,
                    "loss": result.loss,
                    "loss_value": result.loss_value,
                    "n_used": result.n_used,
                    "n_dropped": result.n_dropped,
                    "converged": result.converged,
                },
            )
        )
        if trace_on:
            trace = residual_trace(result, usable, trace_on, trace_k)
            rows = list(
                zip(
                    range(len(trace.y_mean)),
                    trace.y_mean,
                    trace.residual_mean,
                    trace.counts,
                )
            )
            outputs.append(
                (
                    os.path.join(out, "trace.csv"),
                    lambda p, r: hio.write_csv(
                        p, ["bucket", "x_mean", "residual_mean", "n"], r
                    ),
                    rows,
                )
            )

    if config.get("quantiles"):
        q_cfg = config["quantiles"]
        slices = quantile_slices(
            records, q_cfg.get("x", "R"), int(q_cfg.get("K", 10)), series=series
        )
        rows = list(
            zip(
                range(len(slices.x_mean)),
                slices.x_mean,
                slices.counts,
                slices.impact,
            )
        )
        outputs.append(
            (
                os.path.join(out, "quantiles.csv"),
                lambda p, r: hio.write_csv(
                    p, ["bucket", "x_mean", "n", "impact"], r
                ),
                rows,
            )
        )

    if config.get("bootstrap"):
        b_cfg = config["bootstrap"]
        stats = bootstrap_exponent(
            records,
            series,
            n_draws=int(b_cfg.get("n_draws", 500)),
            frac=float(b_cfg.get("frac", 0.8)),
            seed=seed,
        )
        outputs.append(
            (
                os.path.join(out, "bootstrap.json"),
                hio.write_json,
                {
                    "full": stats.full,
                    "mean": stats.mean,
                    "q05": stats.q05,
                    "q25": stats.q25,
                    "q50": stats.q50,
                    "q75": stats.q75,
                    "q95": stats.q95,
                },
            )
        )

    for path, writer, payload in outputs:
        writer(path, payload)
    if config.get("svg"):
        line_chart(
            [("rescaled average", curve.s, curve.mean)],
            path=os.path.join(out, "curve.svg"),
            title="rescaled impact",
            x_label="rescaled time s",
            y_label="signed return",
        )


def _read_curve_file(path, duration):
    cols = hio.read_curve_columns(path)
    header = cols["__header__"]
    if "s" in header:
        s = cols["s"]
    elif "t" in header:
        s = cols["t"] / duration
    else:
        raise ConfigError(f"{path}: expected an 's' or 't' column")
    for value_col in ("mean", "eta"):
        if value_col in header:
            values = cols[value_col]
            break
    else:
        raise ConfigError(f"{path}: expected a 'mean' or 'eta' column")
    counts = cols["n"] if "n" in header else np.ones(len(s))
    return ImpactCurve(s, values, counts.astype(np.int64))


def cmd_fit(config, out, seed, dt_flag):
    if "curves" not in config or not config["curves"]:
        raise ConfigError("missing 'curves'")
    curves, durations = [], []
    for entry in config["curves"]:
        curves.append(_read_curve_file(entry["path"], float(entry["duration"])))
        durations.append(float(entry["duration"]))
    bounds = FitBounds(**config["bounds"]) if config.get("bounds") else FitBounds()
    problem = FitProblem(
        tuple(curves),
        tuple(durations),
        offset=float(config.get("offset", 0.25)),
        time_scale=config.get("time_scale"),
        bounds=bounds,
    )
    result = fit(
        problem,
        n_starts=int(config.get("n_starts", 8)),
        max_sweeps=int(config.get("max_sweeps", 8)),
    )
    hio.write_json(os.path.join(out, "fit.json"), result.to_dict())
    fitted = model_curves(result.params, problem)
    for k, (cur, fit_vals) in enumerate(zip(curves, fitted)):
        hio.write_csv(
            os.path.join(out, f"fitted_curve_{k}.csv"),
            ["s", "measured", "model"],
            zip(cur.s, cur.mean, fit_vals),
        )
    if config.get("svg"):
        series = []
        for k, (cur, fit_vals) in enumerate(zip(curves, fitted)):
            series.append((f"measured {k}", cur.s, cur.mean))
            series.append((f"model {k}", cur.s, fit_vals))
        line_chart(
            series,
            path=os.path.join(out, "fit.svg"),
            title="measured vs calibrated curves",
            x_label="rescaled time s",
            y_label="impact",
        )


def cmd_daily(config, out, seed, dt_flag):
    for key in ("metaorders", "closes", "index_closes", "index_map"):
        if key not in config:
            raise ConfigError(f"missing '{key}'")
    records = hio.read_metaorders(config["metaorders"])
    closes = hio.read_closes(config["closes"])
    index_closes = hio.read_closes(config["index_closes"])
    index_map = hio.read_index_map(config["index_map"])
    daily_records, n_skipped = hio.build_daily_records(
        records, closes, index_closes, index_map
    )
    if not daily_records:
        raise ConfigError("no metaorder has a full window of daily closes")

    n_boot = int(config.get("n_boot", 200))
    band_levels = tuple(config.get("band_levels", (0.05, 0.95)))
    profile = postexec_profile(
        daily_records, n_boot=n_boot, seed=seed, band_levels=band_levels
    )

    decs = [capm_decompose(dr) for dr in daily_records]
    beta_rows = [(dr.record.id, dec.beta) for dr, dec in zip(daily_records, decs)]

    summary = {"n_records": len(daily_records), "n_skipped": n_skipped}
    outputs = [
        (
            os.path.join(out, "betas.csv"),
            lambda p, r: hio.write_csv(p, ["id", "beta"], r),
            beta_rows,
        ),
        (os.path.join(out, "profile.csv"), hio.write_profile, profile),
    ]

    debias_cfg = config.get("debias")
    if debias_cfg is not None:
        exponent = float(debias_cfg.get("exponent", 0.5))
        coefficient = debias_cfg.get("coefficient")
        if coefficient is None:
            responses = np.array(
                [dr.side * dec.residuals[20] for dr, dec in zip(daily_records, decs)]
            )
            participations = np.array([dr.participation for dr in daily_records])
            coefficient = fit_sqrt_model(responses, participations, exponent=exponent)
        calendars = {name: dates for name, (dates, _) in closes.items()}
        followups = build_followup_matrix(daily_records, records, calendars)
        debiased = debias_profiles(
            daily_records,
            followups,
            float(coefficient),
            exponent=exponent,
            n_boot=n_boot,
            seed=seed,
            band_levels=band_levels,
        )
        summary["debias"] = {"a": float(coefficient), "exponent": exponent}
        outputs.append(
            (os.path.join(out, "profile_debiased.csv"), hio.write_profile, debiased)
        )

    autocorr_cfg = config.get("autocorr")
    if autocorr_cfg is not None:
        max_lag = int(autocorr_cfg.get("max_lag", 20))
        calendars = {name: dates for name, (dates, _) in closes.items()}
        flow = {}
        for rec in records:
            flow.setdefault(rec.instrument, {})
            flow[rec.instrument][rec.date] = (
                flow[rec.instrument].get(rec.date, 0.0)
                + rec.side * rec.participation
            )
        series = {}
        for inst, by_date in flow.items():
            cal = calendars.get(inst)
            if cal is None:
                continue
            active = [d for d in cal if d in by_date]
            if not active:
                continue
            lo, hi = cal.index(active[0]), cal.index(active[-1])
            x = np.array([by_date.get(d, 0.0) for d in cal[lo : hi + 1]])
            if len(x) > max_lag and np.ptp(x) > 0:
                series[inst] = x
        if series:
            ac = participation_autocorr(
                series,
                max_lag=max_lag,
                n_boot=int(autocorr_cfg.get("n_boot", 500)),
                seed=seed,
            )
            rows = list(zip(ac.lags, ac.estimate, ac.q25, ac.median, ac.q75))
            outputs.append(
                (
                    os.path.join(out, "autocorr.csv"),
                    lambda p, r: hio.write_csv(
                        p, ["lag", "estimate", "q25", "median", "q75"], r
                    ),
                    rows,
                )
            )

    for path, writer, payload in outputs:
        writer(path, payload)
    hio.write_json(os.path.join(out, "summary.json"), summary)


_COMMANDS = {
    "simulate": cmd_simulate,
    "curve": cmd_curve,
    "estimate": cmd_estimate,
    "fit": cmd_fit,
    "daily": cmd_daily,
}


def _fail(command, exc, code):
    payload = {
        "error": {
            "command": command,
            "type": type(exc).__name__,
            "message": str(exc),
        }
    }
    print(f"hawkes-impact {command}: {exc}", file=sys.stderr)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hawkes-impact",
        description="Hawkes-based market impact: simulate, estimate, calibrate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config (or a run.json)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None, help="grid step override")
        p.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        config, seed, dt = _load_run(args)
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(args.command, exc, 2)

    if args.threads:
        try:
            import numba

            numba.set_num_threads(args.threads)
        except ImportError:
            pass

    os.makedirs(args.out, exist_ok=True)
    try:
        _COMMANDS[args.command](config, args.out, seed, dt)
    except ConfigError as exc:
        return _fail(args.command, exc, 2)
    except (ValueError, KeyError, TypeError, OSError) as exc:
        return _fail(args.command, exc, 1)

    sidecar = {"command": args.command, "seed": seed, "config": config}
    if dt is not None:
        sidecar["flags"] = {"dt": dt}
    hio.write_json(os.path.join(args.out, "run.json"), sidecar)
    return 0


if __name__ == "__main__":
    sys.exit(main())
