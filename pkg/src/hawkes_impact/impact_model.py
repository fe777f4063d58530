"""Analytic impact curves of the two-sided self-exciting price model.

A metaorder executed at rate ``r_t`` on ``[t0, t0+T]`` perturbs the up/down
jump intensities through a pair of response kernels.  In the impulsive
variant the same-side response is an immediate point mass and the opposite
side receives ``C`` times the normalised excitation kernel, delayed through
it.  The expected price path then has a closed form built from the
alternating kernel series, and this module evaluates it, its permanent
limit, and the power-law decay diagnostic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    DIRAC,
    DiracDelta,
    ExponentialKernel,
    PowerLawKernel,
    SampledFunction,
    ScaledKernel,
    kappa_series,
    convolve,
    l1_norm,
    sample_kernel,
)

__all__ = [
    "ImpactFunction",
    "TradingSchedule",
    "ImpactModel",
    "ImpactCurveAnalytic",
    "DecayFit",
    "g_function",
    "h_function",
    "impact_curve_analytic",
    "permanent_impact",
    "decay_exponent",
]


@dataclass(frozen=True)
class ImpactFunction:
    """Instantaneous impact of trading at rate r, with f(0) = 0.

    ``form`` is ``"identity"`` (f(r) = r) or ``"power"`` (f(r) = a * r**p).
    """

    form: str = "identity"
    a: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if self.form not in ("identity", "power"):
            raise ValueError(f"unknown impact-function form {self.form!r}")
        if self.form == "power" and not self.p > 0:
            raise ValueError("power form needs p > 0 so that f(0) = 0")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.form == "identity":
            out = r
        else:
            out = self.a * np.sign(r) * np.abs(r) ** self.p
        return out if out.ndim else float(out)

    def to_dict(self):
        if self.form == "identity":
            return {"form": "identity"}
        return {"form": "power", "params": {"a": self.a, "p": self.p}}

    @classmethod
    def from_dict(cls, d):
        form = d.get("form", "identity")
        params = d.get("params", {})
        return cls(form=form, a=params.get("a", 1.0), p=params.get("p", 1.0))


@dataclass(frozen=True, eq=False)
class TradingSchedule:
    """Piecewise-constant trading rate, zero outside ``[t0, t0 + duration]``.

    ``edges`` are the ``k+1`` sorted breakpoints and ``rates`` the ``k``
    nonnegative rates on the intervals between them.
    """

    edges: np.ndarray
    rates: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, TradingSchedule):
            return NotImplemented
        return np.array_equal(self.edges, other.edges) and np.array_equal(
            self.rates, other.rates
        )

    def __hash__(self):
        return hash((self.edges.tobytes(), self.rates.tobytes()))

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "rates", rates)
        if edges.ndim != 1 or len(edges) < 2 or len(rates) != len(edges) - 1:
            raise ValueError("need k+1 edges for k rates")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise ValueError("rates must be finite and nonnegative")

    @classmethod
    def constant(cls, t0, duration, rate):
        return cls(np.array([t0, t0 + duration]), np.array([rate]))

    @property
    def t0(self) -> float:
        return float(self.edges[0])

    @property
    def duration(self) -> float:
        return float(self.edges[-1] - self.edges[0])

    @property
    def is_constant(self) -> bool:
        return len(self.rates) == 1

    def rate_at(self, t):
        """Rate at time t; right-continuous at breakpoints, 0 outside."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.edges, t, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.rates))
        out = np.where(inside, self.rates[np.clip(idx, 0, len(self.rates) - 1)], 0.0)
        return out if out.ndim else float(out)

    def to_dict(self):
        if self.is_constant:
            return {"t0": self.t0, "T": self.duration, "r": float(self.rates[0])}
        return {"edges": self.edges.tolist(), "rates": self.rates.tolist()}

    @classmethod
    def from_dict(cls, d):
        if "edges" in d:
            return cls(np.asarray(d["edges"]), np.asarray(d["rates"]))
        return cls.constant(d.get("t0", 0.0), d["T"], d["r"])


def _kernel_to_dict(kernel):
    if isinstance(kernel, PowerLawKernel):
        return {
            "family": "power_law",
            "alpha": kernel.amplitude,
            "b": kernel.exponent,
            "offset": kernel.offset,
        }
    if isinstance(kernel, ExponentialKernel):
        return {"family": "exponential", "alpha": kernel.amplitude, "beta": kernel.decay}
    raise TypeError(f"cannot serialise kernel of type {type(kernel).__name__}")


def _kernel_from_dict(d):
    family = d["family"]
    if family == "power_law":
        return PowerLawKernel(d["alpha"], d["b"], d.get("offset", 0.25))
    if family == "exponential":
        return ExponentialKernel(d["alpha"], d["beta"])
    raise ValueError(f"unknown kernel family {family!r}")


@dataclass(frozen=True)
class ImpactModel:
    """Full parameterisation of one metaorder in the impact model.

    ``g_plus``/``g_minus`` default to the impulsive variant: a unit point
    mass on the same side and ``C`` times the mass-normalised excitation
    kernel on the opposite side.  Pass explicit kernels for the general
    model.
    """

    mu: float
    phi: object
    C: float
    schedule: TradingSchedule
    f_of_r: ImpactFunction = field(default_factory=ImpactFunction)
    g_plus: object = None
    g_minus: object = None

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"baseline intensity must be >= 0, got {self.mu}")
        if not self.C >= 0:
            raise ValueError(f"contrarian ratio must be >= 0, got {self.C}")
        if not self.phi.l1_norm() < 1.0:
            raise ValueError(
                f"kernel mass must be < 1 for stationarity, got {self.phi.l1_norm():.6g}"
            )

    @property
    def is_impulsive(self) -> bool:
        return self.g_plus is None and self.g_minus is None

    def resolved_g(self):
        """The (g_plus, g_minus) pair with impulsive defaults filled in."""
        gp = DIRAC if self.g_plus is None else self.g_plus
        gm = (
            ScaledKernel(self.phi, self.C / self.phi.l1_norm())
            if self.g_minus is None
            else self.g_minus
        )
        return gp, gm

    def to_dict(self):
        if not self.is_impulsive:
            raise ValueError("only the impulsive variant has a JSON form")
        return {
            "mu": self.mu,
            "kernel": _kernel_to_dict(self.phi),
            "C": self.C,
            "f": self.f_of_r.to_dict(),
            "schedule": self.schedule.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            mu=d["mu"],
            phi=_kernel_from_dict(d["kernel"]),
            C=d["C"],
            schedule=TradingSchedule.from_dict(d["schedule"]),
            f_of_r=ImpactFunction.from_dict(d.get("f", {"form": "identity"})),
        )


@dataclass(frozen=True, eq=False)
class ImpactCurveAnalytic:
    """Expected price displacement on a time grid, in tick units."""

    t: np.ndarray
    values: np.ndarray
    spec: ImpactModel

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("t and values must be 1-d arrays of equal length")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")

    def at(self, t):
        return np.interp(t, self.t, self.values)


def g_function(g_plus, g_minus, dt, horizon) -> SampledFunction:
    """Cumulative net response ``G(t)``: integral of g_plus - g_minus on [0, t].

    A point mass at 0 contributes its full weight at every t >= 0 (the
    right-continuous convention), so the impulsive variant gives
    ``G(t) = 1 - (C/|phi|_1) * integral of phi``.  Parametric kernels are
    integrated exactly; sampled ones by cumulative trapezoid.
    """
    n = int(round(horizon / dt)) + 1
    t = np.arange(n) * dt

    def cum(g):
        if isinstance(g, DiracDelta):
            return np.ones(n)
        if isinstance(g, SampledFunction):
            return g.cumulative_integral()(t)
        return np.asarray(g.integral(t), dtype=float)

    return SampledFunction(dt, cum(g_plus) - cum(g_minus))


def h_function(phi, C, dt=1e-2, horizon=None, tol=1e-8, check=True) -> SampledFunction:
    """Unit-rate impact response ``H(t) = 1 - (1 + C/|phi|_1) * integral of kappa``.

    ``phi`` may be a parametric kernel (then ``horizon`` is required to place
    the grid) or an already-sampled kernel.  H starts at 1, and with a
    nonnegative series decreases to ``(1-C)/(1+|phi|_1)``.
    """
    if isinstance(phi, SampledFunction):
        sampled = phi
    else:
        if horizon is None:
            raise ValueError("horizon is required when phi is parametric")
        sampled = sample_kernel(phi, dt, horizon)
    mass = l1_norm(sampled)
    kappa = kappa_series(sampled, tol=tol, check=check)
    ik = kappa.cumulative_integral()
    return SampledFunction(sampled.dt, 1.0 - (1.0 + C / mass) * ik.values)


def _curve_from_response(schedule, f_of_r, response_cum, t_grid):
    """Impact curve from the cumulative integral of a unit response.

    For a piecewise-constant schedule the quadrature over the support is a
    finite difference of the cumulative response at the segment edges,
    evaluated exactly through interpolation on the response grid.
    """
    grid_t = response_cum.t
    grid_v = response_cum.values

    def icum(u):
        u = np.asarray(u, dtype=float)
        if np.any(u > grid_t[-1] + 1e-9):
            raise ValueError(
                "response grid horizon too short for the requested times"
            )
        return np.where(u <= 0.0, 0.0, np.interp(u, grid_t, grid_v))

    t = np.asarray(t_grid, dtype=float)
    out = np.zeros_like(t)
    for left, right, rate in zip(
        schedule.edges[:-1], schedule.edges[1:], schedule.rates
    ):
        out += f_of_r(rate) * (icum(t - left) - icum(t - right))
    return out


def impact_curve_analytic(
    spec, t_grid, dt=1e-2, tol=1e-8, method="auto"
) -> ImpactCurveAnalytic:
    """Expected price displacement for a scheduled metaorder.

    Two evaluation paths exist and agree on the impulsive variant:

    - ``"h"``: convolve the schedule with the closed-form unit response H
      (impulsive only);
    - ``"g"``: build G from the response kernels, subtract the series
      convolution, and convolve with the schedule (general).

    ``"auto"`` picks "h" for impulsive specs and "g" otherwise.
    """
    t = np.asarray(t_grid, dtype=float)
    if method == "auto":
        method = "h" if spec.is_impulsive else "g"
    horizon = max(float(np.max(t)) - spec.schedule.t0, spec.schedule.duration) + dt

    if method == "h":
        if not spec.is_impulsive:
            raise ValueError("the H path applies to the impulsive variant only")
        resp = h_function(spec.phi, spec.C, dt=dt, horizon=horizon, check=False)
    elif method == "g":
        gp, gm = spec.resolved_g()
        G = g_function(gp, gm, dt, horizon)
        sampled = sample_kernel(spec.phi, dt, horizon)
        kappa = kappa_series(sampled, tol=tol, check=False)
        resp = SampledFunction(dt, G.values - convolve(kappa, G).values)
    else:
        raise ValueError(f"unknown method {method!r}")

    values = _curve_from_response(
        spec.schedule, spec.f_of_r, resp.cumulative_integral(), t
    )
    return ImpactCurveAnalytic(t, values, spec)


def permanent_impact(spec) -> float:
    """Closed-form limit of the impact curve for a constant-rate metaorder.

    ``f(r) * T * (|g_plus|_1 - |g_minus|_1) / (1 + |phi|_1)``, which for the
    impulsive variant is ``f(r) * T * (1 - C) / (1 + |phi|_1)``.
    """
    if not spec.schedule.is_constant:
        raise ValueError(
            "closed form needs a constant rate; evaluate the curve at large t instead"
        )
    gp, gm = spec.resolved_g()
    net = gp.l1_norm() - gm.l1_norm()
    rate = float(spec.schedule.rates[0])
    return (
        spec.f_of_r(rate) * spec.schedule.duration * net / (1.0 + spec.phi.l1_norm())
    )


@dataclass(frozen=True)
class DecayFit:
    """Log-log tail fit of the relaxation toward the permanent level."""

    exponent: float
    prefactor: float
    power_law_tail: bool
    half_slopes: tuple

    def __iter__(self):  # convenient unpacking: exponent, flag
        yield self.exponent
        yield self.power_law_tail


def decay_exponent(
    spec, fit_window, dt=1e-2, n_points=60, slope_split_tol=0.35
) -> DecayFit:
    """Slope of ``log(eta_t - eta_inf)`` vs log time since execution end.

    ``fit_window = (t_lo, t_hi)`` is measured from the end of execution.  The
    exponent is fitted on log-spaced points; as a quality check the window is
    split in half (in log time) and the two half-window slopes are compared.
    If they disagree by more than ``slope_split_tol`` (relative to their
    mean magnitude, with an absolute floor) the tail is flagged as not
    power-law --- an exponential kernel, for instance, steepens without bound
    on a log-log scale.
    """
    t_lo, t_hi = fit_window
    if not 0 < t_lo < t_hi:
        raise ValueError("fit window must satisfy 0 < t_lo < t_hi")
    end = spec.schedule.t0 + spec.schedule.duration
    u = np.geomspace(t_lo, t_hi, n_points)
    curve = impact_curve_analytic(spec, end + u, dt=dt)
    eta_inf = permanent_impact(spec)
    excess = curve.values - eta_inf
    if np.any(excess <= 0):
        raise ValueError(
            "impact minus its permanent level must stay positive on the window"
        )

    x, y = np.log(u), np.log(excess)

    def slope(xs, ys):
        coef = np.polynomial.polynomial.polyfit(xs, ys, 1)
        return coef[1], coef[0]

    full, intercept = slope(x, y)
    half = n_points // 2
    s1, _ = slope(x[:half], y[:half])
    s2, _ = slope(x[half:], y[half:])
    scale = max(abs(full), 0.05)
    is_power = abs(s1 - s2) <= slope_split_tol * scale
    return DecayFit(float(full), float(math.exp(intercept)), bool(is_power), (s1, s2))
