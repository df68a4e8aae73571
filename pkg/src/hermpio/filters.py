"""C-infinity low-pass filters H: 1 on [0, 1/2], 0 on [1, inf)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FILTER_KINDS = ("smooth_bump",)


@dataclass(frozen=True)
class FilterSpec:
    kind: str = "smooth_bump"

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; choose from {FILTER_KINDS}")

    def __call__(self, t):
        return filter_eval(self, t)


def _g(s):
    # exp(-1/s) for s > 0, 0 otherwise; flat to all orders at s = 0
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def filter_eval(spec: FilterSpec, t):
    """Evaluate H at ``t >= 0`` (scalar or array).

    Inside the transition band (1/2, 1) the smooth-bump filter is
    ``g(1 - t) / (g(1 - t) + g(t - 1/2))`` with ``g(s) = exp(-1/s)``.
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("filter argument must be finite")
    if np.any(t < 0):
        raise ValueError("filter argument must be nonnegative")

    out = np.zeros_like(t)
    out[t <= 0.5] = 1.0
    band = (t > 0.5) & (t < 1.0)
    if np.any(band):
        tb = t[band]
        up = _g(1.0 - tb)
        down = _g(tb - 0.5)
        out[band] = up / (up + down)
    return float(out) if scalar else out
