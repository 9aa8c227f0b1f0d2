"""Log-log power-law regression."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScalingFit:
    xs: tuple
    ys: tuple
    exponent: float
    prefactor: float
    r_squared: float
    residuals: tuple = field(default=())

    def predict(self, x):
        return self.prefactor * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(xs, ys) -> ScalingFit:
    """OLS fit of ln y = ln A + exponent * ln x."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1D and of equal length")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points for a power-law fit, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))) or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive, finite values")
    if np.any(np.diff(x) <= 0):
        raise ValueError("xs must be strictly increasing")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (intercept + slope * lx)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(res**2) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(tuple(x), tuple(y), float(slope), float(np.exp(intercept)),
                      float(min(max(r2, 0.0), 1.0)), tuple(res))


def local_exponents(xs, ys):
    """Successive-pair slopes d ln y / d ln x, handy for spotting crossovers."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return np.diff(ly) / np.diff(lx)
