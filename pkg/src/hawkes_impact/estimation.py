"""Empirical impact pipeline: from metaorder records and price series to
rescaled impact curves, conditional slices, power-law regressions, residual
traces, bootstrap exponent distributions, and decay diagnostics.

Records carry the execution metadata (side, volumes, duration); prices are
step functions sampled at or before the query time, never interpolated.
Everything downstream works on the signed relative return measured from the
execution start, averaged in rescaled time s = (t - t0) / T.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetaorderRecord",
    "PriceSeries",
    "ImpactCurve",
    "RegressionResult",
    "QuantileSlices",
    "ResidualTrace",
    "PowerLawFit",
    "BootstrapStats",
    "DecayTransform",
    "AnticipationResult",
    "return_proxy",
    "execution_returns",
    "rescaled_average",
    "quantile_slices",
    "direct_regression",
    "power_law_fit",
    "residual_trace",
    "transient_fit",
    "bootstrap_exponent",
    "decay_loglog",
    "anticipation_groups",
]


@dataclass(frozen=True)
class MetaorderRecord:
    """One executed metaorder and its market context.

    Volumes are in shares: ``v`` executed, ``V`` the full day's market
    volume, ``vbar`` the market volume during the execution window.  ``side``
    is +1 for a buy, -1 for a sell.  ``sigma`` (daily volatility) and ``psi``
    (average relative spread) are optional context, NaN when unknown.
    """

    id: str
    instrument: str
    date: str
    t0: float
    duration: float
    side: int
    v: float
    V: float
    vbar: float
    sigma: float = float("nan")
    psi: float = float("nan")

    def __post_init__(self):
        if self.side not in (-1, 1):
            raise ValueError(f"side must be +1 or -1, got {self.side}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not (0 < self.v <= self.V):
            raise ValueError("need 0 < v <= V")
        if not (0 < self.v <= self.vbar):
            raise ValueError("need 0 < v <= vbar (trading rate in (0, 1])")

    @property
    def participation(self) -> float:
        """Daily participation: executed over full-day market volume."""
        return self.v / self.V

    @property
    def rate(self) -> float:
        """Trading rate: executed over market volume during execution."""
        return self.v / self.vbar

    @property
    def nu_dot(self) -> float:
        """Participation per second of execution."""
        return self.participation / self.duration

    @property
    def end(self) -> float:
        return self.t0 + self.duration


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Mid-price samples for one instrument-date, as a step function."""

    times: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "prices", prices)
        if times.ndim != 1 or times.shape != prices.shape or len(times) == 0:
            raise ValueError("times and prices must be equal-length nonempty 1-d arrays")
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be sorted")
        if np.any(prices <= 0):
            raise ValueError("prices must be positive")

    def price_at(self, t):
        """Last sampled price at or before ``t``; errors before the first sample."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        if np.any(idx < 0):
            raise ValueError("price requested before the first sample")
        out = self.prices[idx]
        return out if out.ndim else float(out)

    def covers(self, start, stop) -> bool:
        return self.times[0] <= start and stop <= self.times[-1]


def return_proxy(series, t0, t):
    """Relative mid-price move between the execution start and ``t``."""
    if np.any(np.asarray(t) < t0):
        raise ValueError("query time precedes the execution start")
    p0 = series.price_at(t0)
    return (series.price_at(t) - p0) / p0


_NAMED_EXTRACTORS = {
    "R": lambda rec: rec.participation,
    "r": lambda rec: rec.rate,
    "T": lambda rec: rec.duration,
    "nu_dot": lambda rec: rec.nu_dot,
    "sigma": lambda rec: rec.sigma,
    "psi": lambda rec: rec.psi,
    "v": lambda rec: rec.v,
    "V": lambda rec: rec.V,
    "vbar": lambda rec: rec.vbar,
}


def _extractor(x):
    if callable(x):
        return x
    try:
        return _NAMED_EXTRACTORS[x]
    except KeyError:
        raise ValueError(
            f"unknown variable {x!r}; use one of {sorted(_NAMED_EXTRACTORS)} "
            "or pass a callable"
        ) from None


def _values(records, x):
    f = _extractor(x)
    out = np.array([f(rec) for rec in records], dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError("extractor produced non-finite values")
    return out


def execution_returns(records, series, multiple=1.0, normalize="none") -> np.ndarray:
    """Signed return proxy at ``t0 + multiple * T`` for each record.

    ``normalize="spread"`` divides each response by the record's average
    relative spread.  Records whose series is missing or too short raise;
    use :func:`rescaled_average` when skipping is wanted instead.
    """
    out = np.empty(len(records))
    for k, rec in enumerate(records):
        ps = series[rec.id]
        out[k] = rec.side * return_proxy(ps, rec.t0, rec.t0 + multiple * rec.duration)
        if normalize == "spread":
            out[k] /= rec.psi
        elif normalize != "none":
            raise ValueError(f"unknown normalization {normalize!r}")
    return out


@dataclass(frozen=True, eq=False)
class ImpactCurve:
    """Average signed impact in rescaled time, with counts and bands."""

    s: np.ndarray
    mean: np.ndarray
    counts: np.ndarray
    bands: dict = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        mean = np.asarray(self.mean, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "counts", counts)
        if not (s.shape == mean.shape == counts.shape) or s.ndim != 1:
            raise ValueError("s, mean, counts must be 1-d arrays of one length")

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def at(self, s):
        return np.interp(s, self.s, self.mean)

    def temporary_impact(self) -> float:
        """Curve value at the end of execution (s = 1)."""
        return float(self.at(1.0))


def _rescaled_matrix(records, series, s_grid):
    """Per-record signed rescaled return paths; None rows for skipped records.

    A record is skipped when its series is missing or does not cover
    ``[t0, t0 + s_max * T]`` entirely.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    rows = np.full((len(records), len(s_grid)), np.nan)
    included = np.zeros(len(records), dtype=bool)
    for k, rec in enumerate(records):
        ps = series.get(rec.id)
        if ps is None:
            continue
        stop = rec.t0 + float(s_grid[-1]) * rec.duration
        if not ps.covers(rec.t0, stop):
            continue
        t = rec.t0 + s_grid * rec.duration
        rows[k] = rec.side * return_proxy(ps, rec.t0, t)
        included[k] = True
    return rows, included


def rescaled_average(
    records,
    series,
    s_max=1.0,
    n_points=100,
    s_grid=None,
    band_levels=(0.25, 0.75),
) -> ImpactCurve:
    """Mean signed impact over records on a uniform rescaled-time grid.

    Each record contributes its signed relative return path, time-rescaled
    by its own duration.  Records without full series coverage are skipped;
    skipping everything is an error.  ``band_levels`` picks the pointwise
    quantile bands stored alongside the mean.
    """
    if s_grid is None:
        s_grid = np.linspace(0.0, s_max, n_points)
    else:
        s_grid = np.asarray(s_grid, dtype=float)
    rows, included = _rescaled_matrix(records, series, s_grid)
    n = int(included.sum())
    if n == 0:
        raise ValueError("no record has sufficient series coverage")
    kept = rows[included]
    mean = kept.mean(axis=0)
    counts = np.full(len(s_grid), n, dtype=np.int64)
    bands = {
        float(q): np.quantile(kept, q, axis=0) for q in (band_levels or ())
    }
    return ImpactCurve(s_grid, mean, counts, bands or None)


@dataclass(frozen=True, eq=False)
class QuantileSlices:
    """Equal-count conditioning buckets of one variable."""

    assignments: np.ndarray
    x_mean: np.ndarray
    counts: np.ndarray
    impact: np.ndarray = None


def _bucket_assignments(values, K):
    n = len(values)
    if K < 2:
        raise ValueError("need at least two buckets")
    if K > n:
        raise ValueError(f"cannot form {K} buckets from {n} records")
    if np.min(values) == np.max(values):
        raise ValueError("variable is constant; buckets would be degenerate")
    order = np.argsort(values, kind="stable")
    assignments = np.empty(n, dtype=np.int64)
    for i in range(K):
        lo, hi = (i * n) // K, ((i + 1) * n) // K
        assignments[order[lo:hi]] = i
    return assignments


def quantile_slices(records, x, K, series=None) -> QuantileSlices:
    """Split records into K equal-count buckets by a variable.

    Bucket boundaries follow the nearest-rank rule on the stably sorted
    values, so assignments are reproducible under ties.  When ``series`` is
    given, the per-bucket conditional impact at the end of execution is
    attached.
    """
    values = _values(records, x)
    assignments = _bucket_assignments(values, K)
    x_mean = np.array([values[assignments == i].mean() for i in range(K)])
    counts = np.array([(assignments == i).sum() for i in range(K)])
    impact = None
    if series is not None:
        impact = np.empty(K)
        for i in range(K):
            bucket = [rec for rec, a in zip(records, assignments) if a == i]
            curve = rescaled_average(
                bucket, series, s_grid=np.array([0.0, 1.0]), band_levels=()
            )
            impact[i] = curve.mean[-1]
    return QuantileSlices(assignments, x_mean, counts, impact)


# --------------------------------------------------------------------------
# direct power-law regression
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegressionResult:
    """Fitted multiplicative power-law model for the signed response."""

    prefactor: float
    exponents: dict
    loss: str
    loss_value: float
    residuals: np.ndarray
    n_used: int
    n_dropped: int = 0
    converged: bool = True

    def model_values(self, X):
        cols = np.asarray(X, dtype=float)
        g = np.array(list(self.exponents.values()))
        return self.prefactor * np.prod(cols**g, axis=1)


def _weighted_median(values, weights):
    order = np.argsort(values)
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    return float(v[np.searchsorted(cum, 0.5 * cum[-1])])


def _best_prefactor(y, m, loss):
    if loss == "l2":
        denom = float(m @ m)
        return float(y @ m) / denom if denom > 0 else 0.0
    # L1: the optimal a minimizes mean |y - a m| = sum m |y/m - a|, a weighted
    # median of the ratios (all m > 0 since covariates are positive).
    return _weighted_median(y / m, m)


def _golden_min(fn, lo, hi, tol=1e-12, max_iter=400):
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    inv_phi2 = (3.0 - math.sqrt(5.0)) / 2.0
    a, b = lo, hi
    h = b - a
    c, d = a + inv_phi2 * h, a + inv_phi * h
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if h < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + inv_phi2 * h
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + inv_phi * h
            fd = fn(d)
    return (a + b) / 2.0


def power_law_fit(y, X, loss="l2", bounds=(0.0, 2.0), names=None, sweeps=80):
    """Fit ``y ~ a * prod_j X_j ** g_j`` under the chosen loss.

    ``loglog`` solves the linear least-squares problem on logarithms,
    silently using only the strictly positive responses (their count is
    reported as ``n_dropped``).  ``l1``/``l2`` work on the raw scale with a
    nested strategy: closed-form prefactor inside, derivative-free
    coordinate descent on the bounded exponent box outside.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, m = X.shape
    if len(y) != n:
        raise ValueError("response and covariates disagree in length")
    if np.any(X <= 0):
        raise ValueError("covariates must be strictly positive")
    for j in range(m):
        if np.min(X[:, j]) == np.max(X[:, j]):
            raise ValueError(f"covariate {j} is constant; exponent unidentifiable")
    if names is None:
        names = [f"x{j}" for j in range(m)]
    lo, hi = bounds
    logX = np.log(X)

    if loss == "loglog":
        keep = y > 0
        if keep.sum() < m + 1:
            raise ValueError("too few positive responses for a log-log fit")
        design = np.column_stack([np.ones(int(keep.sum())), logX[keep]])
        coef, *_ = np.linalg.lstsq(design, np.log(y[keep]), rcond=None)
        a = math.exp(coef[0])
        g = coef[1:]
        model = a * np.exp(logX @ g)
        resid = y - model
        ll = float(np.mean((np.log(y[keep]) - np.log(model[keep])) ** 2))
        return RegressionResult(
            a, dict(zip(names, map(float, g))), "loglog", ll, resid,
            int(keep.sum()), int(n - keep.sum()),
        )

    if loss not in ("l1", "l2"):
        raise ValueError(f"unknown loss {loss!r}")

    def model_of(g):
        return np.exp(logX @ g)

    def loss_of(g):
        mvals = model_of(g)
        a = _best_prefactor(y, mvals, loss)
        r = y - a * mvals
        return float(np.mean(r * r)) if loss == "l2" else float(np.mean(np.abs(r)))

    # warm start from the log-log solution when it is available
    g = np.full(m, 0.5 * (lo + hi))
    if np.sum(y > 0) >= m + 1:
        try:
            warm = power_law_fit(y, X, loss="loglog", bounds=bounds, names=names)
            g = np.clip(np.array(list(warm.exponents.values())), lo, hi)
        except (ValueError, np.linalg.LinAlgError):
            pass

    best = loss_of(g)
    converged = False
    for _ in range(sweeps):
        moved = 0.0
        for j in range(m):
            def along(v, j=j):
                trial = g.copy()
                trial[j] = v
                return loss_of(trial)

            new = _golden_min(along, lo, hi)
            moved = max(moved, abs(new - g[j]))
            g[j] = new
        now = loss_of(g)
        if moved < 1e-11 or best - now < 1e-18 * (1.0 + best):
            converged = True
            best = now
            break
        best = now

    mvals = model_of(g)
    a = _best_prefactor(y, mvals, loss)
    resid = y - a * mvals
    return RegressionResult(
        float(a), dict(zip(names, map(float, g))), loss, best, resid, n,
        converged=converged,
    )


def direct_regression(records, response, variables=("R",), loss="l2", bounds=(0.0, 2.0)):
    """Power-law regression of the signed response on record variables.

    ``variables`` name record attributes (e.g. ``("R", "T")``) or provide
    callables; the response is typically :func:`execution_returns`.
    Residuals keep record order and estimate the non-impact part of each
    return.
    """
    X = np.column_stack([_values(records, v) for v in variables])
    names = [v if isinstance(v, str) else getattr(v, "__name__", f"x{j}")
             for j, v in enumerate(variables)]
    return power_law_fit(np.asarray(response, float), X, loss=loss, bounds=bounds,
                         names=names)


@dataclass(frozen=True, eq=False)
class ResidualTrace:
    """Bucket means of regression residuals against one variable."""

    y_mean: np.ndarray
    residual_mean: np.ndarray
    counts: np.ndarray
    assignments: np.ndarray

    def slope(self, log_x=True) -> float:
        """Least-squares slope of the trace (optionally in log of the variable)."""
        x = np.log(self.y_mean) if log_x else self.y_mean
        coef = np.polynomial.polynomial.polyfit(x, self.residual_mean, 1)
        return float(coef[1])


def residual_trace(result, records, y, K) -> ResidualTrace:
    """Mean residual per quantile bucket of a conditioning variable.

    A flat trace says the fitted model absorbed everything the variable
    explains; a sloped one localises what the model misses.
    """
    values = _values(records, y)
    if len(values) != len(result.residuals):
        raise ValueError("result and records disagree in length")
    assignments = _bucket_assignments(values, K)
    K = int(assignments.max()) + 1
    y_mean = np.array([values[assignments == i].mean() for i in range(K)])
    r_mean = np.array([result.residuals[assignments == i].mean() for i in range(K)])
    counts = np.array([(assignments == i).sum() for i in range(K)])
    return ResidualTrace(y_mean, r_mean, counts, assignments)


# --------------------------------------------------------------------------
# curve-shape fits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    n_points: int


def transient_fit(curve, s_range=(0.05, 1.0)) -> PowerLawFit:
    """Log-log slope of the impact curve during execution.

    The default range starts at 0.05 to keep away from log(0); values must
    be strictly positive on the range.
    """
    lo, hi = s_range
    mask = (curve.s >= lo) & (curve.s <= hi)
    if mask.sum() < 2:
        raise ValueError("fewer than two curve points in the fit range")
    s = curve.s[mask]
    v = curve.mean[mask]
    if np.any(v <= 0):
        raise ValueError("curve must be positive on the fit range")
    coef = np.polynomial.polynomial.polyfit(np.log(s), np.log(v), 1)
    return PowerLawFit(float(coef[1]), float(math.exp(coef[0])), int(mask.sum()))


@dataclass(frozen=True, eq=False)
class BootstrapStats:
    """Distribution of an estimate over subsample redraws."""

    mean: float
    q05: float
    q25: float
    q50: float
    q75: float
    q95: float
    samples: np.ndarray
    full: float

    @classmethod
    def from_samples(cls, samples, full):
        samples = np.asarray(samples, dtype=float)
        q = np.quantile(samples, [0.05, 0.25, 0.50, 0.75, 0.95])
        return cls(float(samples.mean()), *map(float, q), samples, float(full))


def bootstrap_exponent(
    records,
    series,
    n_draws=500,
    frac=0.8,
    seed=0,
    s_range=(0.05, 1.0),
    n_points=100,
) -> BootstrapStats:
    """Transient-exponent distribution over random subsamples.

    Each draw takes ``frac`` of the records without replacement, rebuilds
    the rescaled curve, and refits the transient exponent.  Deterministic
    given ``seed``.
    """
    if len(records) < 10:
        raise ValueError("need at least 10 records to bootstrap")
    s_grid = np.linspace(0.0, s_range[1], n_points)
    rows, included = _rescaled_matrix(records, series, s_grid)
    kept = rows[included]
    if kept.shape[0] < 10:
        raise ValueError("need at least 10 covered records to bootstrap")

    def fit_of(matrix):
        curve = ImpactCurve(
            s_grid, matrix.mean(axis=0), np.full(len(s_grid), matrix.shape[0])
        )
        return transient_fit(curve, s_range=s_range).exponent

    rng = np.random.default_rng(seed)
    n = kept.shape[0]
    m = max(1, int(round(frac * n)))
    samples = np.empty(n_draws)
    for k in range(n_draws):
        idx = rng.choice(n, size=m, replace=False)
        samples[k] = fit_of(kept[idx])
    return BootstrapStats.from_samples(samples, fit_of(kept))


@dataclass(frozen=True, eq=False)
class DecayTransform:
    """Log-log coordinates of the post-execution decay toward s = 2."""

    s: np.ndarray
    log_s_minus_1: np.ndarray
    log_excess: np.ndarray
    n_dropped: int

    @property
    def empty(self) -> bool:
        return len(self.s) == 0

    def slope(self, s_lo=1.0, s_hi=2.0) -> float:
        mask = (self.s > s_lo) & (self.s < s_hi)
        if mask.sum() < 2:
            raise ValueError("fewer than two decay points in the range")
        coef = np.polynomial.polynomial.polyfit(
            self.log_s_minus_1[mask], self.log_excess[mask], 1
        )
        return float(coef[1])


def decay_loglog(curve) -> DecayTransform:
    """Transform the after-execution part of a curve for tail reading.

    Pairs ``(log(s-1), log(curve(s) - curve(2)))`` for s in (1, 2); points
    where the curve has already crossed its s = 2 level are dropped and
    counted.
    """
    if curve.s_max < 2.0 - 1e-9:
        raise ValueError("curve must extend to s = 2")
    ref = curve.at(2.0)
    mask = (curve.s > 1.0) & (curve.s < 2.0)
    s = curve.s[mask]
    excess = curve.mean[mask] - ref
    keep = excess > 0
    return DecayTransform(
        s[keep], np.log(s[keep] - 1.0), np.log(excess[keep]), int((~keep).sum())
    )


@dataclass(frozen=True, eq=False)
class AnticipationResult:
    """Doubling-group curves and their overlap distances.

    ``curves[i]`` is the rescaled curve of group i (None when the group is
    empty); ``distances`` holds ``(i, sup-distance)`` for each adjacent pair
    of non-empty groups, comparing group i at s with group i+1 at s/2 on
    s in [0, 1]; ``skipped`` lists pairs lost to empty groups.
    """

    curves: list
    group_counts: np.ndarray
    distances: list
    skipped: list


def anticipation_groups(
    records, series, R0, T0, i_max=5, n_points=100
) -> AnticipationResult:
    """Compare execution shapes across doubling (participation, duration) cells.

    Group i collects records with R in [2^(i-1) R0, 2^i R0) and T in
    [2^(i-1) T0, 2^i T0).  Without anticipation, group i at rescaled time s
    matches group i+1 at s/2 (same elapsed physical time and rate), so small
    sup distances are the null signature.
    """
    s_grid = np.linspace(0.0, 1.0, n_points)
    curves, counts = [], []
    for i in range(1, i_max + 1):
        r_lo, r_hi = 2 ** (i - 1) * R0, 2**i * R0
        t_lo, t_hi = 2 ** (i - 1) * T0, 2**i * T0
        members = [
            rec
            for rec in records
            if r_lo <= rec.participation < r_hi and t_lo <= rec.duration < t_hi
        ]
        counts.append(len(members))
        if not members:
            curves.append(None)
            continue
        curves.append(
            rescaled_average(members, series, s_grid=s_grid, band_levels=())
        )
    distances, skipped = [], []
    for i in range(i_max - 1):
        a, b = curves[i], curves[i + 1]
        if a is None or b is None:
            skipped.append(i + 1)
            continue
        gap = np.max(np.abs(a.mean - b.at(s_grid / 2.0)))
        distances.append((i + 1, float(gap)))
    return AnticipationResult(curves, np.array(counts), distances, skipped)
