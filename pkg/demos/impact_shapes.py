"""How the contrarian fraction and the kernel tail shape the impact curve.

Sweeps the contrarian fraction C over {0, 0.5, 1} for an exponential kernel
(curves settle at distinct permanent levels) and contrasts a heavy-tailed
kernel whose relaxation is a slow power law instead.  Prints the long-run
levels and the fitted tail exponents.
"""

import os

import numpy as np

from hawkes_impact.impact_model import (
    ImpactModel,
    TradingSchedule,
    decay_exponent,
    impact_curve_analytic,
    permanent_impact,
)
from hawkes_impact.kernels import ExponentialKernel, PowerLawKernel
from hawkes_impact.svg import line_chart

OUT = os.path.join(os.path.dirname(__file__), "output")


def main():
    os.makedirs(OUT, exist_ok=True)
    T = 60.0
    t = np.linspace(0.0, 6.0 * T, 181)
    schedule = TradingSchedule.constant(0.0, T, 1.0)

    series = []
    print("exponential kernel, varying contrarian fraction:")
    for C in (0.0, 0.5, 1.0):
        model = ImpactModel(
            mu=1.0, phi=ExponentialKernel(0.5, 1.0), C=C, schedule=schedule
        )
        curve = impact_curve_analytic(model, t, dt=1e-2)
        print(f"  C = {C:3.1f}: peak {curve.values.max():6.2f}, "
              f"permanent level {permanent_impact(model):6.2f}")
        series.append((f"C = {C:g}", t, curve.values))

    print("\nheavy-tailed kernel, relaxation exponent after the peak:")
    for b in (-1.5, -1.2):
        model = ImpactModel(
            mu=0.0,
            phi=PowerLawKernel.from_l1_norm(0.8456, b, offset=0.25),
            C=0.0,
            schedule=schedule,
        )
        fit = decay_exponent(model, (5 * T, 50 * T), dt=2e-2, n_points=40)
        print(f"  kernel exponent {b}: impact relaxes like t^{fit.exponent:.2f} "
              f"(power-law tail: {fit.power_law_tail})")

    path = os.path.join(OUT, "impact_shapes.svg")
    line_chart(
        series,
        path=path,
        title="Impact curves across contrarian fractions",
        x_label="time (s)",
        y_label="expected displacement (ticks)",
    )
    print(f"\nwrote {path}")


if __name__ == "__main__":
    main()
