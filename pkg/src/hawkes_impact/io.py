"""File formats: CSV tables, JSON sidecars, atomic writes.

All writers go through a temp-file-plus-rename so a crashed run never
leaves a partial file, and floats are formatted with ``repr`` so that a
rerun with the same inputs produces byte-identical output.
"""

import csv
import io as _io
import json
import os
import tempfile

import numpy as np

from .daily import N_CLOSES, WINDOW_AFTER, WINDOW_BEFORE, DailyRecord
from .estimation import ImpactCurve, MetaorderRecord, PriceSeries
from .kernels import SampledFunction
from .simulate import EventStream

__all__ = [
    "atomic_write_text",
    "write_csv",
    "read_csv_columns",
    "read_metaorders",
    "write_metaorders",
    "read_price_series",
    "write_price_series",
    "read_price_dir",
    "read_events",
    "write_events",
    "write_price_path",
    "write_mc_curve",
    "write_analytic_curve",
    "write_impact_curve",
    "read_curve_columns",
    "write_sampled",
    "read_sampled",
    "write_profile",
    "read_closes",
    "read_index_map",
    "build_daily_records",
    "filter_records",
    "write_json",
    "read_json",
]


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a same-directory temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows, preamble=None):
    buf = _io.StringIO()
    if preamble:
        buf.write(preamble + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    atomic_write_text(path, buf.getvalue())


def read_csv_columns(path, required, optional=(), numeric=True):
    """Read a headered CSV into column arrays, checking required columns.

    Missing required columns raise a ``ValueError`` naming them.  Returns a
    dict with one entry per present column; numeric columns become float
    arrays (empty cells as NaN), others lists of strings.
    """
    with open(path, newline="") as fh:
        first = fh.readline()
        preamble = None
        if first.startswith("#"):
            preamble = first[1:].strip()
            first = fh.readline()
        reader = csv.reader(_io.StringIO(first + fh.read()))
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: empty file, expected a header row")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing required column(s) {', '.join(missing)}")
    idx = {c: header.index(c) for c in header}
    out = {"__preamble__": preamble, "__header__": header}
    for col in header:
        cells = [row[idx[col]] if idx[col] < len(row) else "" for row in rows[1:]]
        if numeric and col not in ("id", "instrument", "date", "side", "index"):
            out[col] = np.array(
                [float(c) if c != "" else np.nan for c in cells], dtype=float
            )
        else:
            out[col] = cells
    return out


_METAORDER_COLS = [
    "id",
    "instrument",
    "date",
    "t0_seconds",
    "duration_seconds",
    "side",
    "v",
    "V",
    "vbar",
]


def _parse_side(txt, path):
    s = txt.strip()
    if s in ("B", "b", "1", "+1"):
        return 1
    if s in ("S", "s", "-1"):
        return -1
    raise ValueError(f"{path}: unrecognised side {txt!r} (use B/S or +1/-1)")


def read_metaorders(path):
    cols = read_csv_columns(path, _METAORDER_COLS, optional=("sigma", "psi"))
    n = len(cols["id"])
    records = []
    for k in range(n):
        records.append(
            MetaorderRecord(
                id=cols["id"][k],
                instrument=cols["instrument"][k],
                date=cols["date"][k],
                t0=float(cols["t0_seconds"][k]),
                duration=float(cols["duration_seconds"][k]),
                side=_parse_side(cols["side"][k], path),
                v=float(cols["v"][k]),
                V=float(cols["V"][k]),
                vbar=float(cols["vbar"][k]),
                sigma=float(cols["sigma"][k]) if "sigma" in cols else float("nan"),
                psi=float(cols["psi"][k]) if "psi" in cols else float("nan"),
            )
        )
    return records


def write_metaorders(path, records):
    rows = [
        [
            r.id,
            r.instrument,
            r.date,
            r.t0,
            r.duration,
            "B" if r.side > 0 else "S",
            r.v,
            r.V,
            r.vbar,
            r.sigma,
            r.psi,
        ]
        for r in records
    ]
    write_csv(path, _METAORDER_COLS + ["sigma", "psi"], rows)


def read_price_series(path) -> PriceSeries:
    cols = read_csv_columns(path, ["time_seconds", "mid_price"])
    return PriceSeries(cols["time_seconds"], cols["mid_price"])


def write_price_series(path, series):
    write_csv(
        path,
        ["time_seconds", "mid_price"],
        zip(series.times, series.prices),
    )


def read_price_dir(directory) -> dict:
    """Load every ``<instrument>_<date>.csv`` under ``directory``.

    Returns a mapping keyed by ``(instrument, date)``; the split is on the
    last underscore of the stem, so instrument names may contain
    underscores but dates may not.
    """
    out = {}
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".csv"):
            continue
        stem = name[:-4]
        if "_" not in stem:
            raise ValueError(
                f"{name}: price files must be named <instrument>_<date>.csv"
            )
        instrument, date = stem.rsplit("_", 1)
        out[(instrument, date)] = read_price_series(os.path.join(directory, name))
    return out


def read_events(path) -> EventStream:
    cols = read_csv_columns(path, ["time", "dim"])
    dims = np.array([int(float(x)) for x in cols["dim"]])
    d = int(dims.max()) + 1 if len(dims) else 1
    times = cols["time"]
    horizon = float(times[-1]) if len(times) else 0.0
    return EventStream(times, dims, d, horizon)


def write_events(path, stream):
    write_csv(path, ["time", "dim"], zip(stream.times, stream.dims))


def write_price_path(path, price_path):
    write_csv(path, ["time", "price"], zip(price_path.times, price_path.values))


def write_mc_curve(path, curve):
    write_csv(
        path,
        ["t", "mean", "stderr", "n"],
        zip(curve.t, curve.mean, curve.stderr, [curve.n_paths] * len(curve.t)),
    )


def write_analytic_curve(path, curve):
    write_csv(path, ["t", "eta"], zip(curve.t, curve.values))


def write_impact_curve(path, curve):
    """Rescaled-average curve: s, mean, n, and one column per quantile band."""
    header = ["s", "mean", "n"]
    extra = []
    if curve.bands:
        for q in sorted(curve.bands):
            header.append(f"q{q:g}")
            extra.append(curve.bands[q])
    rows = zip(curve.s, curve.mean, curve.counts, *extra)
    write_csv(path, header, rows)


def read_curve_columns(path):
    """Columns of any emitted curve CSV (s/mean, t/eta, or t/mean/stderr)."""
    return read_csv_columns(path, [])


def write_sampled(path, fn):
    """Sampled function as CSV with a JSON header line for dt and tail mass."""
    meta = {"dt": fn.dt, "horizon": fn.horizon, "tail_mass": fn.tail_mass}
    preamble = "# " + json.dumps(meta, sort_keys=True)
    write_csv(path, ["t", "value"], zip(fn.t, fn.values), preamble=preamble)


def read_sampled(path) -> SampledFunction:
    cols = read_csv_columns(path, ["t", "value"])
    if not cols["__preamble__"]:
        raise ValueError(f"{path}: missing JSON header line")
    meta = json.loads(cols["__preamble__"])
    return SampledFunction(
        dt=float(meta["dt"]),
        values=cols["value"],
        tail_mass=float(meta.get("tail_mass", 0.0)),
    )


def write_profile(path, profile):
    write_csv(
        path,
        ["day_offset", "systematic_bp", "idiosyncratic_bp", "total_bp"],
        zip(profile.days, profile.systematic, profile.idiosyncratic, profile.total),
    )


def read_closes(path) -> dict:
    """Close table keyed by instrument: sorted date list plus date->close map.

    Works for both stock closes (``instrument,date,close``) and index closes
    (``index,date,close``).
    """
    cols = read_csv_columns(path, ["date", "close"])
    key_col = "instrument" if "instrument" in cols else "index"
    if key_col not in cols:
        raise ValueError(f"{path}: missing required column(s) instrument (or index)")
    table = {}
    for name, date, close in zip(cols[key_col], cols["date"], cols["close"]):
        table.setdefault(name, {})[date] = float(close)
    return {
        name: (sorted(by_date), by_date) for name, by_date in sorted(table.items())
    }


def read_index_map(path) -> dict:
    cols = read_csv_columns(path, ["instrument", "index"])
    return dict(zip(cols["instrument"], cols["index"]))


def build_daily_records(records, closes, index_closes, index_map):
    """Assemble daily records for metaorders with a full close window.

    ``closes`` and ``index_closes`` come from :func:`read_closes`; records
    whose instrument lacks the 21 closes before or 20 after the execution
    date (or is unmapped) are skipped.  Returns ``(daily_records, n_skipped)``.
    """
    out = []
    skipped = 0
    for rec in records:
        entry = closes.get(rec.instrument)
        idx_name = index_map.get(rec.instrument)
        idx_entry = index_closes.get(idx_name) if idx_name else None
        if entry is None or idx_entry is None:
            skipped += 1
            continue
        dates, by_date = entry
        idx_dates, idx_by_date = idx_entry
        if rec.date not in by_date:
            skipped += 1
            continue
        pos = dates.index(rec.date)
        if pos < WINDOW_BEFORE or pos + WINDOW_AFTER >= len(dates):
            skipped += 1
            continue
        window = dates[pos - WINDOW_BEFORE : pos + WINDOW_AFTER + 1]
        if any(d not in idx_by_date for d in window):
            skipped += 1
            continue
        out.append(
            DailyRecord(
                rec,
                np.array([by_date[d] for d in window]),
                np.array([idx_by_date[d] for d in window]),
            )
        )
    return out, skipped


def filter_records(
    records,
    min_duration=180.0,
    rate_range=(0.03, 0.40),
    participation_range=(0.001, 0.20),
    closing_time=30600.0,
):
    """Standard ingestion filters; returns (kept, drop counts by reason).

    Drops executions shorter than ``min_duration`` seconds, trading rates or
    daily participations outside their ranges, and records without room for
    a full execution-length decay window before the close
    (``t0 + 2 * duration < closing_time``).
    """
    kept = []
    reasons = {"duration": 0, "rate": 0, "participation": 0, "window": 0}
    for rec in records:
        if not rec.duration > min_duration:
            reasons["duration"] += 1
        elif not rate_range[0] <= rec.rate <= rate_range[1]:
            reasons["rate"] += 1
        elif not participation_range[0] <= rec.participation <= participation_range[1]:
            reasons["participation"] += 1
        elif not rec.t0 + 2.0 * rec.duration < closing_time:
            reasons["window"] += 1
        else:
            kept.append(rec)
    return kept, reasons


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
