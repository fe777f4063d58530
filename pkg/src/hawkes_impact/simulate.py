"""Exact simulation of the two-sided self-exciting price model.

Ogata thinning with a piecewise-constant dominating intensity that is
recomputed after every candidate.  The bound is exact, not heuristic: the
deterministic part (baseline plus any exogenous intensity) is dominated by a
precomputed suffix maximum over its grid, and the excitation part only
decays between events because all kernels are nonincreasing.  Exponential
kernels are propagated in closed form through a Markov excitation state;
other kernels are evaluated from a fine grid over the event history.

The Monte Carlo drivers accumulate price and count statistics path by path
in a fixed order, so every aggregate is a pure function of (spec, seed).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .impact_model import ImpactModel, TradingSchedule
from .kernels import (
    DiracDelta,
    ExponentialKernel,
    SampledFunction,
    convolve,
    psi_series,
    sample_kernel,
)

__all__ = [
    "HawkesSpec",
    "EventStream",
    "PricePath",
    "SimulatedImpactCurve",
    "simulate",
    "expected_counts",
    "price_path",
    "monte_carlo_impact",
    "monte_carlo_counts",
]

logger = logging.getLogger(__name__)

_DT_DET = 1e-3  # grid step for deterministic intensities and kernel lookups


# --------------------------------------------------------------------------
# compiled cores
# --------------------------------------------------------------------------


@njit(cache=True)
def _suffix_max(values):
    out = np.empty_like(values)
    running = -1.0e300
    for i in range(values.shape[0] - 1, -1, -1):
        if values[i] > running:
            running = values[i]
        out[i] = running
    return out


@njit(cache=True)
def _thin_exp_path(
    seed,
    horizon,
    A,
    B,
    D,
    S,
    dt_det,
    up_dim,
    down_dim,
    t_grid,
    price_buf,
    counts_buf,
    ev_times,
    ev_dims,
    collect,
):
    """One thinning path with closed-form exponential excitation.

    Fills ``price_buf`` (price at the grid times) and ``counts_buf``
    (per-dimension event counts at the grid times); when ``collect`` is set,
    also records the events themselves.  Returns the number of events, or -1
    if the event buffers were too small.
    """
    np.random.seed(seed)
    d = A.shape[0]
    ng = D.shape[1]
    m = t_grid.shape[0]
    cap = ev_times.shape[0]

    E = np.zeros((d, d))
    lam = np.zeros(d)
    cnt = np.zeros(d)
    price_buf[:] = 0.0
    counts_buf[:, :] = 0.0

    t = 0.0
    p = 0.0
    gi = 0
    n_ev = 0
    while True:
        idx = int(t / dt_det)
        if idx > ng - 2:
            idx = ng - 2
        frac = (t - idx * dt_det) / dt_det
        bound = 0.0
        for i in range(d):
            vi = D[i, idx] + frac * (D[i, idx + 1] - D[i, idx])
            det = S[i, idx + 1]
            if vi > det:
                det = vi
            acc = det
            for j in range(d):
                acc += E[i, j]
            bound += acc
        if bound <= 1e-300:
            break
        w = np.random.exponential(1.0 / bound)
        tc = t + w
        if tc >= horizon:
            break
        for i in range(d):
            for j in range(d):
                if A[i, j] != 0.0:
                    E[i, j] *= math.exp(-B[i, j] * w)
        idx2 = int(tc / dt_det)
        if idx2 > ng - 2:
            idx2 = ng - 2
        fr2 = (tc - idx2 * dt_det) / dt_det
        total = 0.0
        for i in range(d):
            v = D[i, idx2] + fr2 * (D[i, idx2 + 1] - D[i, idx2])
            if v < 0.0:
                v = 0.0
            acc = v
            for j in range(d):
                acc += E[i, j]
            lam[i] = acc
            total += acc
        u = np.random.random() * bound
        t = tc
        if u > total:
            continue
        pick = d - 1
        c = 0.0
        for i in range(d):
            c += lam[i]
            if u <= c:
                pick = i
                break
        while gi < m and t_grid[gi] < tc:
            price_buf[gi] = p
            for i in range(d):
                counts_buf[i, gi] = cnt[i]
            gi += 1
        if collect:
            if n_ev >= cap:
                return -1
            ev_times[n_ev] = tc
            ev_dims[n_ev] = pick
        n_ev += 1
        cnt[pick] += 1.0
        for i in range(d):
            E[i, pick] += A[i, pick]
        if pick == up_dim:
            p += 1.0
        elif pick == down_dim:
            p -= 1.0
    while gi < m:
        price_buf[gi] = p
        for i in range(d):
            counts_buf[i, gi] = cnt[i]
        gi += 1
    return n_ev


@njit(cache=True)
def _thin_grid_path(
    seed,
    horizon,
    KV,
    dtk,
    D,
    S,
    dt_det,
    up_dim,
    down_dim,
    t_grid,
    price_buf,
    counts_buf,
    ev_times,
    ev_dims,
):
    """One thinning path with grid-interpolated kernels and full history.

    The event history is required here (excitation has no finite-dimensional
    state), so the path aborts with -1 when the buffers fill up.
    """
    np.random.seed(seed)
    d = D.shape[0]
    ng = D.shape[1]
    ngk = KV.shape[2]
    kern_end = dtk * (ngk - 1)
    m = t_grid.shape[0]
    cap = ev_times.shape[0]

    exc = np.zeros(d)
    lam = np.zeros(d)
    cnt = np.zeros(d)
    price_buf[:] = 0.0
    counts_buf[:, :] = 0.0

    t = 0.0
    p = 0.0
    gi = 0
    n_ev = 0
    while True:
        for i in range(d):
            exc[i] = 0.0
        for e in range(n_ev):
            dtau = t - ev_times[e]
            if dtau >= kern_end:
                continue
            ik = int(dtau / dtk)
            frk = (dtau - ik * dtk) / dtk
            j = ev_dims[e]
            for i in range(d):
                exc[i] += KV[i, j, ik] + frk * (KV[i, j, ik + 1] - KV[i, j, ik])
        idx = int(t / dt_det)
        if idx > ng - 2:
            idx = ng - 2
        frac = (t - idx * dt_det) / dt_det
        bound = 0.0
        for i in range(d):
            vi = D[i, idx] + frac * (D[i, idx + 1] - D[i, idx])
            det = S[i, idx + 1]
            if vi > det:
                det = vi
            bound += det + exc[i]
        if bound <= 1e-300:
            break
        w = np.random.exponential(1.0 / bound)
        tc = t + w
        if tc >= horizon:
            break
        for i in range(d):
            lam[i] = 0.0
        for e in range(n_ev):
            dtau = tc - ev_times[e]
            if dtau >= kern_end:
                continue
            ik = int(dtau / dtk)
            frk = (dtau - ik * dtk) / dtk
            j = ev_dims[e]
            for i in range(d):
                lam[i] += KV[i, j, ik] + frk * (KV[i, j, ik + 1] - KV[i, j, ik])
        idx2 = int(tc / dt_det)
        if idx2 > ng - 2:
            idx2 = ng - 2
        fr2 = (tc - idx2 * dt_det) / dt_det
        total = 0.0
        for i in range(d):
            v = D[i, idx2] + fr2 * (D[i, idx2 + 1] - D[i, idx2])
            if v < 0.0:
                v = 0.0
            lam[i] += v
            total += lam[i]
        u = np.random.random() * bound
        t = tc
        if u > total:
            continue
        pick = d - 1
        c = 0.0
        for i in range(d):
            c += lam[i]
            if u <= c:
                pick = i
                break
        while gi < m and t_grid[gi] < tc:
            price_buf[gi] = p
            for i in range(d):
                counts_buf[i, gi] = cnt[i]
            gi += 1
        if n_ev >= cap:
            return -1
        ev_times[n_ev] = tc
        ev_dims[n_ev] = pick
        n_ev += 1
        cnt[pick] += 1.0
        if pick == up_dim:
            p += 1.0
        elif pick == down_dim:
            p -= 1.0
    while gi < m:
        price_buf[gi] = p
        for i in range(d):
            counts_buf[i, gi] = cnt[i]
        gi += 1
    return n_ev


@njit(cache=True)
def _mc_driver_exp(
    seeds, horizon, A, B, D, S, dt_det, up_dim, down_dim, t_grid, psum, psq, csum, csq
):
    d = A.shape[0]
    m = t_grid.shape[0]
    price = np.zeros(m)
    counts = np.zeros((d, m))
    ev_t = np.zeros(1)
    ev_d = np.zeros(1, dtype=np.int64)
    total = 0
    for k in range(seeds.shape[0]):
        n = _thin_exp_path(
            seeds[k],
            horizon,
            A,
            B,
            D,
            S,
            dt_det,
            up_dim,
            down_dim,
            t_grid,
            price,
            counts,
            ev_t,
            ev_d,
            False,
        )
        total += n
        for a in range(m):
            psum[a] += price[a]
            psq[a] += price[a] * price[a]
        for i in range(d):
            for a in range(m):
                csum[i, a] += counts[i, a]
                csq[i, a] += counts[i, a] * counts[i, a]
    return total


@njit(cache=True)
def _mc_driver_grid(
    seeds,
    horizon,
    KV,
    dtk,
    D,
    S,
    dt_det,
    up_dim,
    down_dim,
    t_grid,
    cap,
    psum,
    psq,
    csum,
    csq,
):
    d = D.shape[0]
    m = t_grid.shape[0]
    price = np.zeros(m)
    counts = np.zeros((d, m))
    ev_t = np.zeros(cap)
    ev_d = np.zeros(cap, dtype=np.int64)
    total = 0
    for k in range(seeds.shape[0]):
        n = _thin_grid_path(
            seeds[k],
            horizon,
            KV,
            dtk,
            D,
            S,
            dt_det,
            up_dim,
            down_dim,
            t_grid,
            price,
            counts,
            ev_t,
            ev_d,
        )
        if n < 0:
            return -1
        total += n
        for a in range(m):
            psum[a] += price[a]
            psq[a] += price[a] * price[a]
        for i in range(d):
            for a in range(m):
                csum[i, a] += counts[i, a]
                csq[i, a] += counts[i, a] * counts[i, a]
    return total


# --------------------------------------------------------------------------
# public types
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HawkesSpec:
    """A d-dimensional self-exciting process on ``[0, horizon]``.

    ``mu`` holds one baseline per dimension: a constant, a
    :class:`~hawkes_impact.impact_model.TradingSchedule`, a sampled function, or any
    callable of time.  ``kernels`` is the d x d excitation matrix with
    ``None`` for absent links; stationarity requires the spectral radius of
    the matrix of kernel masses to stay below 1.
    """

    mu: tuple
    kernels: tuple
    horizon: float

    def __post_init__(self):
        mu = tuple(self.mu)
        kernels = tuple(tuple(row) for row in self.kernels)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "kernels", kernels)
        d = len(mu)
        if d == 0:
            raise ValueError("need at least one dimension")
        if len(kernels) != d or any(len(row) != d for row in kernels):
            raise ValueError(f"kernel matrix must be {d}x{d}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        rho = self.spectral_radius()
        if not rho < 1.0:
            raise ValueError(
                f"spectral radius of kernel masses must be < 1, got {rho:.6g}"
            )

    @property
    def d(self) -> int:
        return len(self.mu)

    def norm_matrix(self) -> np.ndarray:
        return np.array(
            [
                [0.0 if k is None else k.l1_norm() for k in row]
                for row in self.kernels
            ]
        )

    def spectral_radius(self) -> float:
        return float(max(abs(np.linalg.eigvals(self.norm_matrix()))))

    def all_exponential(self) -> bool:
        return all(
            k is None or isinstance(k, ExponentialKernel)
            for row in self.kernels
            for k in row
        )


@dataclass(frozen=True, eq=False)
class EventStream:
    """Sorted events of one realisation: times paired with dimensions."""

    times: np.ndarray
    dims: np.ndarray
    d: int
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        dims = np.asarray(self.dims, dtype=np.int64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "dims", dims)
        if times.shape != dims.shape or times.ndim != 1:
            raise ValueError("times and dims must be 1-d arrays of equal length")
        if len(times) and (np.any(np.diff(times) <= 0)):
            raise ValueError("event times must be strictly increasing")
        if len(dims) and (dims.min() < 0 or dims.max() >= self.d):
            raise ValueError("event dimensions out of range")

    def __len__(self):
        return len(self.times)

    def counts_at(self, t_grid) -> np.ndarray:
        """Per-dimension cumulative counts at the given times, shape (d, m)."""
        t = np.asarray(t_grid, dtype=float)
        out = np.zeros((self.d, len(t)))
        for i in range(self.d):
            out[i] = np.searchsorted(self.times[self.dims == i], t, side="right")
        return out


@dataclass(frozen=True, eq=False)
class PricePath:
    """Unit-tick price as a step function: value after each jump time."""

    times: np.ndarray
    values: np.ndarray
    horizon: float

    def at(self, t):
        """Price at time t (0 before the first jump)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate(([0.0], self.values))
        out = padded[idx]
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class SimulatedImpactCurve:
    """Monte Carlo mean price displacement with per-point standard errors."""

    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_paths: int


# --------------------------------------------------------------------------
# deterministic-intensity plumbing
# --------------------------------------------------------------------------


def _rate_nodes(obj, t_nodes):
    if obj is None:
        return np.zeros_like(t_nodes)
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return np.full_like(t_nodes, float(obj))
    if isinstance(obj, SampledFunction):
        return obj(t_nodes)
    if isinstance(obj, TradingSchedule):
        return obj.rate_at(t_nodes)
    if callable(obj):
        return np.asarray(obj(t_nodes), dtype=float)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a rate function")


def _det_arrays(spec, exogenous, dt_det):
    """Baseline-plus-exogenous node values and their suffix maxima."""
    n = int(math.ceil(spec.horizon / dt_det)) + 1
    t_nodes = np.arange(n) * dt_det
    if exogenous is None:
        exogenous = (None,) * spec.d
    if len(exogenous) != spec.d:
        raise ValueError(f"need one exogenous entry per dimension ({spec.d})")
    D = np.empty((spec.d, n))
    for i in range(spec.d):
        base = _rate_nodes(spec.mu[i], t_nodes)
        if np.any(base < 0):
            raise ValueError(f"baseline intensity of dimension {i} goes negative")
        extra = _rate_nodes(exogenous[i], t_nodes)
        if np.any(extra < -1e-12):
            raise ValueError(f"exogenous intensity of dimension {i} goes negative")
        D[i] = base + np.maximum(extra, 0.0)
    S = np.empty_like(D)
    for i in range(spec.d):
        S[i] = _suffix_max(D[i])
    return D, S


def _kernel_arrays_exp(spec):
    d = spec.d
    A = np.zeros((d, d))
    B = np.ones((d, d))
    for i in range(d):
        for j in range(d):
            k = spec.kernels[i][j]
            if k is not None:
                A[i, j] = k.amplitude
                B[i, j] = k.decay
    return A, B


def _kernel_arrays_grid(spec, dtk):
    d = spec.d
    ngk = int(math.ceil(spec.horizon / dtk)) + 2
    t_nodes = np.arange(ngk) * dtk
    KV = np.zeros((d, d, ngk))
    neglected = 0.0
    for i in range(d):
        for j in range(d):
            k = spec.kernels[i][j]
            if k is not None:
                KV[i, j] = k(t_nodes)
                neglected = max(neglected, k.tail_mass(t_nodes[-1]))
    if neglected > 0:
        logger.info(
            "kernel tails truncated at horizon; neglected mass up to %.3e per event",
            neglected,
        )
    return KV


def _expected_event_bound(spec, D, dt_det):
    """Crude upper bound on expected total events, for buffer sizing."""
    masses = np.trapezoid(D, dx=dt_det, axis=1)
    K = spec.norm_matrix()
    totals = np.linalg.solve(np.eye(spec.d) - K, masses)
    return float(np.sum(totals))


def _path_seeds(seed, n_paths):
    return np.random.SeedSequence(seed).generate_state(n_paths, dtype=np.uint32)


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------


def simulate(spec, exogenous=None, seed=0, dt_det=_DT_DET) -> EventStream:
    """Draw one exact realisation of the process.

    ``exogenous`` optionally adds one deterministic intensity per dimension
    (same accepted forms as the baselines).  The stream is a pure function
    of (spec, exogenous, seed).
    """
    D, S = _det_arrays(spec, exogenous, dt_det)
    s0 = _path_seeds(seed, 1)[0]
    cap = max(int(4 * _expected_event_bound(spec, D, dt_det)) + 256, 1024)
    t_grid = np.zeros(0)
    price = np.zeros(0)
    counts = np.zeros((spec.d, 0))
    for _ in range(12):
        ev_t = np.zeros(cap)
        ev_d = np.zeros(cap, dtype=np.int64)
        if spec.all_exponential():
            A, B = _kernel_arrays_exp(spec)
            n = _thin_exp_path(
                s0, spec.horizon, A, B, D, S, dt_det, -1, -1, t_grid,
                price, counts, ev_t, ev_d, True,
            )
        else:
            KV = _kernel_arrays_grid(spec, dt_det)
            n = _thin_grid_path(
                s0, spec.horizon, KV, dt_det, D, S, dt_det, -1, -1, t_grid,
                price, counts, ev_t, ev_d,
            )
        if n >= 0:
            return EventStream(ev_t[:n].copy(), ev_d[:n].copy(), spec.d, spec.horizon)
        cap *= 2
    raise RuntimeError("event buffers kept overflowing; check stationarity margin")


def price_path(stream, up_dim=0, down_dim=1) -> PricePath:
    """Difference of the two counting processes, as a step function."""
    for dim in (up_dim, down_dim):
        if not 0 <= dim < stream.d:
            raise ValueError(f"dimension {dim} out of range for d={stream.d}")
    mask = (stream.dims == up_dim) | (stream.dims == down_dim)
    times = stream.times[mask]
    steps = np.where(stream.dims[mask] == up_dim, 1.0, -1.0)
    return PricePath(times, np.cumsum(steps), stream.horizon)


def expected_counts(spec, t_grid, exogenous=None, dt=1e-2, tol=1e-8) -> np.ndarray:
    """Expected per-dimension counts via the renewal-series formula.

    Evaluates ``h + Psi * h`` (``*`` causal convolution) where ``h`` is the
    running integral of baseline plus exogenous intensity and ``Psi`` is the
    kernel renewal series.  Returns shape (d, len(t_grid)).
    """
    t = np.asarray(t_grid, dtype=float)
    horizon = float(np.max(t))
    n = int(math.ceil(horizon / dt)) + 1
    nodes = np.arange(n) * dt
    if exogenous is None:
        exogenous = (None,) * spec.d
    if len(exogenous) != spec.d:
        raise ValueError(f"need one exogenous entry per dimension ({spec.d})")
    h = []
    for i in range(spec.d):
        rate = _rate_nodes(spec.mu[i], nodes) + _rate_nodes(exogenous[i], nodes)
        h.append(SampledFunction(dt, rate).cumulative_integral())

    if all(k is None for row in spec.kernels for k in row):
        return np.stack([np.interp(t, nodes, hi.values) for hi in h])

    sampled = [
        [None if k is None else sample_kernel(k, dt, nodes[-1]) for k in row]
        for row in spec.kernels
    ]
    psi = psi_series(sampled, tol=tol)
    out = np.empty((spec.d, len(t)))
    for i in range(spec.d):
        acc = h[i].values.copy()
        for j in range(spec.d):
            acc += convolve(psi[i][j], h[j]).values
        out[i] = np.interp(t, nodes, acc)
    return out


def _hawkes_from_model(model, horizon) -> HawkesSpec:
    phi = model.phi
    return HawkesSpec(
        mu=(model.mu, model.mu),
        kernels=((None, phi), (phi, None)),
        horizon=horizon,
    )


def _metaorder_exogenous(model, dt_det, horizon):
    """The two deterministic intensity terms a metaorder adds.

    Same side: the instantaneous impact of the current rate.  Opposite side:
    the contrarian response, the impact flow pushed through the normalised
    kernel; for the impulsive variant this is evaluated with the exact
    kernel integrals, otherwise both sides are convolved on the grid.
    """
    n = int(math.ceil(horizon / dt_det)) + 1
    nodes = np.arange(n) * dt_det
    sched = model.schedule
    f = model.f_of_r
    flow = f(sched.rate_at(nodes))
    if model.is_impulsive:
        up = flow
        down = np.zeros(n)
        scale = model.C / model.phi.l1_norm()
        for left, right, rate in zip(sched.edges[:-1], sched.edges[1:], sched.rates):
            down += scale * f(rate) * (
                model.phi.integral(nodes - left) - model.phi.integral(nodes - right)
            )
    else:
        gp, gm = model.resolved_g()
        flow_f = SampledFunction(dt_det, flow)

        def pushed(g):
            if isinstance(g, DiracDelta):
                return flow
            return convolve(flow_f, sample_kernel(g, dt_det, nodes[-1])).values

        up = pushed(gp)
        down = pushed(gm)
    return SampledFunction(dt_det, up), SampledFunction(dt_det, down)


def monte_carlo_impact(
    model, n_paths, t_grid, seed=0, dt_det=_DT_DET
) -> SimulatedImpactCurve:
    """Monte Carlo estimate of the expected price displacement.

    Runs ``n_paths`` independent realisations of the two-sided process with
    the metaorder's exogenous terms switched on and averages the tick price
    on ``t_grid``.  Aggregation is ordered by path index, so results are a
    pure function of (model, n_paths, t_grid, seed).
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    t = np.asarray(t_grid, dtype=float)
    horizon = float(np.max(t)) + dt_det
    spec = _hawkes_from_model(model, horizon)
    exo_up, exo_down = _metaorder_exogenous(model, dt_det, horizon)
    D, S = _det_arrays(spec, (exo_up, exo_down), dt_det)
    seeds = _path_seeds(seed, n_paths)
    psum = np.zeros(len(t))
    psq = np.zeros(len(t))
    csum = np.zeros((2, len(t)))
    csq = np.zeros((2, len(t)))
    if spec.all_exponential():
        A, B = _kernel_arrays_exp(spec)
        _mc_driver_exp(seeds, horizon, A, B, D, S, dt_det, 0, 1, t, psum, psq, csum, csq)
    else:
        KV = _kernel_arrays_grid(spec, dt_det)
        cap = max(int(6 * _expected_event_bound(spec, D, dt_det)) + 256, 1024)
        for _ in range(12):
            n = _mc_driver_grid(
                seeds, horizon, KV, dt_det, D, S, dt_det, 0, 1, t, cap,
                psum, psq, csum, csq,
            )
            if n >= 0:
                break
            psum[:] = 0.0
            psq[:] = 0.0
            csum[:, :] = 0.0
            csq[:, :] = 0.0
            cap *= 2
        else:
            raise RuntimeError("event buffers kept overflowing")
    mean = psum / n_paths
    if n_paths > 1:
        var = np.maximum(psq / n_paths - mean**2, 0.0) * n_paths / (n_paths - 1)
        stderr = np.sqrt(var / n_paths)
    else:
        stderr = np.zeros_like(mean)
    return SimulatedImpactCurve(t, mean, stderr, n_paths)


def monte_carlo_counts(spec, t_grid, exogenous=None, n_paths=1000, seed=0, dt_det=_DT_DET):
    """Monte Carlo mean and standard error of per-dimension counts.

    The simulation twin of :func:`expected_counts`; returns a pair of arrays
    of shape (d, len(t_grid)).
    """
    t = np.asarray(t_grid, dtype=float)
    horizon = float(np.max(t)) + dt_det
    run_spec = HawkesSpec(spec.mu, spec.kernels, horizon)
    D, S = _det_arrays(run_spec, exogenous, dt_det)
    seeds = _path_seeds(seed, n_paths)
    psum = np.zeros(len(t))
    psq = np.zeros(len(t))
    csum = np.zeros((run_spec.d, len(t)))
    csq = np.zeros((run_spec.d, len(t)))
    if run_spec.all_exponential():
        A, B = _kernel_arrays_exp(run_spec)
        _mc_driver_exp(
            seeds, horizon, A, B, D, S, dt_det, -1, -1, t, psum, psq, csum, csq
        )
    else:
        KV = _kernel_arrays_grid(run_spec, dt_det)
        cap = max(int(6 * _expected_event_bound(run_spec, D, dt_det)) + 256, 1024)
        for _ in range(12):
            n = _mc_driver_grid(
                seeds, horizon, KV, dt_det, D, S, dt_det, -1, -1, t, cap,
                psum, psq, csum, csq,
            )
            if n >= 0:
                break
            csum[:, :] = 0.0
            csq[:, :] = 0.0
            cap *= 2
        else:
            raise RuntimeError("event buffers kept overflowing")
    mean = csum / n_paths
    if n_paths > 1:
        var = np.maximum(csq / n_paths - mean**2, 0.0) * n_paths / (n_paths - 1)
        stderr = np.sqrt(var / n_paths)
    else:
        stderr = np.zeros_like(mean)
    return mean, stderr
