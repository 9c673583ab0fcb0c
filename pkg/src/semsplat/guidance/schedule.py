"""DDPM-style noise schedule and the forward noising map."""
from __future__ import annotations

import numpy as np

from semsplat.errors import InvalidParameterError

DEFAULT_T = 1000
DEFAULT_BETA_START = 8.5e-4
DEFAULT_BETA_END = 1.2e-2


class NoiseSchedule:
    """Linear-beta schedule; alpha_bar_t = prod_{s<=t} (1 - beta_s).

    Timesteps are 1-based: t in [1, T]. w(t) weights the distillation
    gradient; the default 1 - alpha_bar_t emphasizes noisier steps, and
    "constant" gives w(t) = 1.
    """

    def __init__(self, total_steps=DEFAULT_T, beta_start=DEFAULT_BETA_START,
                 beta_end=DEFAULT_BETA_END, weighting="one_minus_alpha_bar"):
        if total_steps < 1:
            raise InvalidParameterError("schedule needs at least one step")
        if not 0.0 < beta_start < beta_end < 1.0:
            raise InvalidParameterError("need 0 < beta_start < beta_end < 1")
        if weighting not in ("one_minus_alpha_bar", "constant"):
            raise InvalidParameterError(f"unknown weighting {weighting!r}")
        self.total_steps = total_steps
        self.betas = np.linspace(beta_start, beta_end, total_steps)
        self.alpha_bars = np.cumprod(1.0 - self.betas)
        self.weighting = weighting

    def _check_t(self, t):
        if not 1 <= t <= self.total_steps:
            raise InvalidParameterError(
                f"timestep {t} outside [1, {self.total_steps}]"
            )

    def alpha_bar(self, t):
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def weight(self, t):
        self._check_t(t)
        if self.weighting == "constant":
            return 1.0
        return 1.0 - self.alpha_bar(t)


def add_noise(x0, t, epsilon, schedule: NoiseSchedule):
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) epsilon."""
    x0 = np.asarray(x0)
    epsilon = np.asarray(epsilon)
    if epsilon.shape != x0.shape:
        raise InvalidParameterError("noise shape must match the input")
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * epsilon
