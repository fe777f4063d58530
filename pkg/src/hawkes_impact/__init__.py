"""Hawkes-based market impact: analytic curves, simulation, estimation.

A two-sided self-exciting point process moves the price up and down by unit
ticks; a metaorder enters as an extra intensity term.  The package provides

- ``kernels``     excitation kernels and the series operations behind
                  the closed-form impact and expected-count formulas,
- ``impact_model``  metaorder schedules and analytic impact curves of
                  the feedback model,
- ``simulate``    exact thinning simulation and Monte Carlo impact curves,
- ``estimation``  the empirical pipeline from metaorder records and price
                  series to rescaled impact curves, regressions, and decay
                  diagnostics,
- ``calibration`` fitting the model to a family of measured curves,
- ``daily``       close-to-close decomposition and the debiasing of
                  post-execution profiles,
- ``synthetic``   generators for closed-loop testing without real data,
- ``io``          the CSV and JSON file formats, written atomically and
                  byte-reproducibly,
- ``svg``         dependency-free static line charts,
- ``cli``         the ``hawkes-impact`` command line.
"""

from . import (
    calibration,
    cli,
    daily,
    estimation,
    impact_model,
    io,
    kernels,
    simulate,
    svg,
    synthetic,
)

__version__ = "0.1.0"

__all__ = [
    "kernels",
    "impact_model",
    "simulate",
    "estimation",
    "calibration",
    "daily",
    "synthetic",
    "io",
    "svg",
    "cli",
    "__version__",
]
