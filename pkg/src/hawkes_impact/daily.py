"""Daily-scale decomposition of metaorder impact and its debiasing.

Close-to-close log returns around each execution day are split into a
market (index) component and an idiosyncratic residual by a per-record
regression without intercept.  Post-execution profiles average the signed
cumulative components across records, relative to the close one day before
execution.  Because metaorder flow is autocorrelated, the raw profiles mix
the order's own impact with the impact of correlated follow-up orders; the
debiasing step removes a fitted concave-power impact of the aggregated
daily flow before averaging.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DailyRecord",
    "CapmDecomposition",
    "PostExecProfile",
    "AutocorrResult",
    "capm_decompose",
    "postexec_profile",
    "participation_autocorr",
    "fit_sqrt_model",
    "debias_profiles",
    "build_followup_matrix",
]

#: Day offsets around the execution day D covered by each record: the close
#: at D-21 seeds the first return, D+20 ends the post-execution window.
WINDOW_BEFORE = 21
WINDOW_AFTER = 20
N_CLOSES = WINDOW_BEFORE + WINDOW_AFTER + 1


@dataclass(frozen=True, eq=False)
class DailyRecord:
    """One metaorder with the surrounding daily closes.

    ``closes`` and ``index_closes`` hold 42 values for day offsets
    -21..+20 relative to the execution day.
    """

    record: object
    closes: np.ndarray
    index_closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        index_closes = np.asarray(self.index_closes, dtype=float)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "index_closes", index_closes)
        for name, arr in (("closes", closes), ("index_closes", index_closes)):
            if arr.shape != (N_CLOSES,):
                raise ValueError(f"{name} must hold exactly {N_CLOSES} values")
            if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be positive and finite")

    @property
    def side(self) -> int:
        return self.record.side

    @property
    def participation(self) -> float:
        return self.record.participation


@dataclass(frozen=True, eq=False)
class CapmDecomposition:
    """Market beta and residual daily returns for one record."""

    beta: float
    residuals: np.ndarray
    stock_returns: np.ndarray
    index_returns: np.ndarray


def capm_decompose(daily_record) -> CapmDecomposition:
    """Regress the 41 stock log-returns on the index ones, no intercept.

    Residuals are the idiosyncratic daily returns; a flat index makes the
    slope unidentifiable and raises.
    """
    y = np.diff(np.log(daily_record.closes))
    x = np.diff(np.log(daily_record.index_closes))
    denom = float(x @ x)
    if denom == 0.0:
        raise ValueError("index returns have zero variance; beta is unidentifiable")
    beta = float(y @ x) / denom
    return CapmDecomposition(beta, y - beta * x, y, x)


@dataclass(frozen=True, eq=False)
class PostExecProfile:
    """Signed average cumulative components after execution, in basis points.

    Day 0 is the execution day; everything is measured from the close at
    day -1.  ``total`` equals ``systematic + idiosyncratic`` pointwise by
    construction.
    """

    days: np.ndarray
    systematic: np.ndarray
    idiosyncratic: np.ndarray
    total: np.ndarray
    n_records: int
    bands: dict = None

    def __post_init__(self):
        gap = np.max(np.abs(self.total - self.systematic - self.idiosyncratic))
        if gap > 1e-6:
            raise ValueError("components do not add up to the total")


def _component_matrices(records, adjustments=None, exponent=0.5, a=0.0):
    """Per-record cumulative (systematic, idiosyncratic, total) rows in bp.

    ``adjustments`` optionally carries the signed aggregate follow-up
    participations for day offsets +1..+20 (shape (n, 20)); their fitted
    impact ``a * sign * |A|^exponent`` is removed from the idiosyncratic
    increments before accumulating.
    """
    n = len(records)
    sys_rows = np.empty((n, WINDOW_AFTER + 1))
    idio_rows = np.empty((n, WINDOW_AFTER + 1))
    for k, rec in enumerate(records):
        dec = capm_decompose(rec)
        # return index 0 is offset -20, so offset d sits at index d + 20
        sys_inc = dec.beta * dec.index_returns[WINDOW_AFTER:]
        idio_inc = dec.residuals[WINDOW_AFTER:].copy()
        if adjustments is not None and a != 0.0:
            A = adjustments[k]
            idio_inc[1:] -= a * np.sign(A) * np.abs(A) ** exponent
        eps = rec.side
        sys_rows[k] = eps * np.cumsum(sys_inc) * 1e4
        idio_rows[k] = eps * np.cumsum(idio_inc) * 1e4
    return sys_rows, idio_rows


def _profile_from_rows(sys_rows, idio_rows, n_boot, seed, band_levels):
    days = np.arange(WINDOW_AFTER + 1)
    sys_mean = sys_rows.mean(axis=0)
    idio_mean = idio_rows.mean(axis=0)
    bands = None
    if n_boot:
        rng = np.random.default_rng(seed)
        n = sys_rows.shape[0]
        boot = {"systematic": [], "idiosyncratic": [], "total": []}
        for _ in range(n_boot):
            idx = rng.integers(0, n, size=n)
            s = sys_rows[idx].mean(axis=0)
            i = idio_rows[idx].mean(axis=0)
            boot["systematic"].append(s)
            boot["idiosyncratic"].append(i)
            boot["total"].append(s + i)
        bands = {
            comp: {
                float(q): np.quantile(np.array(rows), q, axis=0)
                for q in band_levels
            }
            for comp, rows in boot.items()
        }
    return PostExecProfile(
        days, sys_mean, idio_mean, sys_mean + idio_mean, sys_rows.shape[0], bands
    )


def postexec_profile(
    records, n_boot=0, seed=0, band_levels=(0.25, 0.75)
) -> PostExecProfile:
    """Side-signed average post-execution profile of a cohort.

    With ``n_boot`` > 0, pointwise bootstrap bands (resampling records with
    replacement) are attached for each component.
    """
    if len(records) == 0:
        raise ValueError("empty cohort")
    sys_rows, idio_rows = _component_matrices(records)
    return _profile_from_rows(sys_rows, idio_rows, n_boot, seed, band_levels)


def debias_profiles(
    records,
    followups,
    a,
    exponent=0.5,
    n_boot=0,
    seed=0,
    band_levels=(0.25, 0.75),
) -> PostExecProfile:
    """Post-execution profile with follow-up flow impact removed.

    ``followups[k, j]`` is the signed aggregate participation of metaorders
    on the same instrument at day offset j+1 for record k (net buy minus
    sell pressure; sums of side times participation).  Each day's
    idiosyncratic increment loses ``a * sign(A) * |A| ** exponent`` before
    the cumulative profile is formed, which removes the temporary impact of
    correlated follow-up flow under the fitted concave-power model.
    """
    if len(records) == 0:
        raise ValueError("empty cohort")
    if not a >= 0:
        raise ValueError("the impact coefficient must be nonnegative")
    if not 0.4 <= exponent <= 0.7:
        raise ValueError("exponent outside the supported range [0.4, 0.7]")
    followups = np.asarray(followups, dtype=float)
    if followups.shape != (len(records), WINDOW_AFTER):
        raise ValueError(
            f"followups must have shape ({len(records)}, {WINDOW_AFTER})"
        )
    if not np.all(np.isfinite(followups)):
        raise ValueError("follow-up participations must be finite")
    sys_rows, idio_rows = _component_matrices(
        records, adjustments=followups, exponent=exponent, a=a
    )
    return _profile_from_rows(sys_rows, idio_rows, n_boot, seed, band_levels)


@dataclass(frozen=True, eq=False)
class AutocorrResult:
    """Pooled autocorrelation of daily signed flow, with bootstrap quartiles."""

    lags: np.ndarray
    estimate: np.ndarray
    q25: np.ndarray
    median: np.ndarray
    q75: np.ndarray


def _series_autocorr(x, max_lag):
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0.0:
        raise ValueError("constant participation series")
    out = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        out[lag - 1] = float(x[:-lag] @ x[lag:]) / denom
    return out


def participation_autocorr(
    series_by_instrument, max_lag=20, n_boot=500, seed=0
) -> AutocorrResult:
    """Autocorrelation of aggregated signed participations, pooled over instruments.

    Each instrument contributes its own-mean-removed sample autocorrelation,
    weighted by the number of usable pairs; the bootstrap resamples whole
    instrument series.  Every series must be longer than ``max_lag``.
    """
    names = sorted(series_by_instrument)
    series = [np.asarray(series_by_instrument[k], dtype=float) for k in names]
    if not series:
        raise ValueError("no participation series given")
    for name, s in zip(names, series):
        if len(s) <= max_lag:
            raise ValueError(f"series {name!r} is shorter than the maximum lag")
    per = np.array([_series_autocorr(s, max_lag) for s in series])
    weights = np.array([len(s) for s in series], dtype=float)[:, None] - np.arange(
        1, max_lag + 1
    )

    def pooled(rows_idx):
        w = weights[rows_idx]
        return (per[rows_idx] * w).sum(axis=0) / w.sum(axis=0)

    estimate = pooled(np.arange(len(series)))
    rng = np.random.default_rng(seed)
    boot = np.empty((n_boot, max_lag))
    for k in range(n_boot):
        boot[k] = pooled(rng.integers(0, len(series), size=len(series)))
    q25, q50, q75 = np.quantile(boot, [0.25, 0.5, 0.75], axis=0)
    return AutocorrResult(np.arange(1, max_lag + 1), estimate, q25, q50, q75)


def fit_sqrt_model(responses, participations, exponent=0.5) -> float:
    """Least-squares coefficient of ``response = a * R ** exponent``.

    ``responses`` are the signed day-0 returns (side times close-to-close
    move), ``participations`` the matching R >= 0.  The concave exponent
    may be adjusted within [0.4, 0.7].
    """
    if not 0.4 <= exponent <= 0.7:
        raise ValueError("exponent outside the supported range [0.4, 0.7]")
    y = np.asarray(responses, dtype=float)
    R = np.asarray(participations, dtype=float)
    if y.shape != R.shape or y.ndim != 1:
        raise ValueError("responses and participations must be equal-length vectors")
    if np.any(R < 0):
        raise ValueError("participations must be nonnegative")
    x = R**exponent
    denom = float(x @ x)
    if denom == 0.0:
        raise ValueError("degenerate participations: nothing to fit")
    return float(x @ y) / denom


def build_followup_matrix(daily_records, metaorders, calendars) -> np.ndarray:
    """Signed aggregate follow-up participation per record and day offset.

    ``calendars`` maps instrument to its ordered trading dates; for each
    daily record the metaorder flow (sum of side times participation) on
    the same instrument is read off at calendar positions D+1..D+20.  Days
    beyond the calendar, or without metaorders, contribute zero.
    """
    flow = {}
    for rec in metaorders:
        key = (rec.instrument, rec.date)
        flow[key] = flow.get(key, 0.0) + rec.side * rec.participation
    out = np.zeros((len(daily_records), WINDOW_AFTER))
    for k, dr in enumerate(daily_records):
        inst = dr.record.instrument
        cal = list(calendars[inst])
        pos = cal.index(dr.record.date)
        for j in range(1, WINDOW_AFTER + 1):
            if pos + j < len(cal):
                out[k, j - 1] = flow.get((inst, cal[pos + j]), 0.0)
    return out
