"""Orthonormal Hermite functions, multi-indices and the associated kernels.

The univariate functions are generated by the weighted three-term recurrence

    psi_j(x) = x sqrt(2/j) psi_{j-1}(x) - sqrt((j-1)/j) psi_{j-2}(x)

seeded with psi_0(x) = pi^{-1/4} exp(-x^2/2), so the Gaussian factor is carried
along instead of multiplying a (possibly huge) polynomial by a (possibly tiny)
weight at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

PI_M14 = math.pi ** -0.25

# |x - y| at or below this uses direct summation in christoffel_darboux
CD_SWITCH_TOL = 1e-6

_RESCALE_AT = 1e150


def hermite_table(x, max_degree: int, gaussian: bool = True) -> np.ndarray:
    """Return ``psi_j(x)`` for ``j = 0..max_degree`` stacked along axis 0.

    ``x`` may be a scalar or an array; the result has shape
    ``(max_degree + 1,) + np.shape(x)``.  With ``gaussian=False`` the factor
    ``exp(-x^2/2)`` is left out, which is what Gauss-Hermite quadrature wants.
    """
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Hermite functions need finite arguments")

    shape = x.shape
    x = x.reshape(-1)
    out = np.empty((max_degree + 1, x.size))
    if gaussian:
        _weighted_recurrence(x, out)
        # exp(-x^2/2) underflows out here; those points take the rescaled path
        far = 0.5 * x * x > 600.0
        if np.any(far):
            out[:, far] = _rescaled_recurrence(x[far], max_degree)
    else:
        _weighted_recurrence(x, out, seed=np.full_like(x, PI_M14))
    return out.reshape((max_degree + 1,) + shape)


def _weighted_recurrence(x, out, seed=None):
    prev = PI_M14 * np.exp(-0.5 * x * x) if seed is None else seed
    out[0] = prev
    if len(out) == 1:
        return
    cur = math.sqrt(2.0) * x * prev
    out[1] = cur
    for j in range(2, len(out)):
        prev, cur = cur, x * math.sqrt(2.0 / j) * cur - math.sqrt((j - 1) / j) * prev
        out[j] = cur


def _rescaled_recurrence(x, max_degree):
    # values tracked as p * exp(log_scale); p is renormalised whenever it grows large
    out = np.empty((max_degree + 1,) + x.shape)
    log_scale = -0.5 * x * x
    prev = np.full_like(x, PI_M14)
    out[0] = _apply_scale(prev, log_scale)
    if max_degree == 0:
        return out
    cur = math.sqrt(2.0) * x * prev
    out[1] = _apply_scale(cur, log_scale)
    for j in range(2, max_degree + 1):
        prev, cur = cur, x * math.sqrt(2.0 / j) * cur - math.sqrt((j - 1) / j) * prev
        big = np.abs(cur) > _RESCALE_AT
        if np.any(big):
            cur = np.where(big, cur / _RESCALE_AT, cur)
            prev = np.where(big, prev / _RESCALE_AT, prev)
            log_scale = np.where(big, log_scale + math.log(_RESCALE_AT), log_scale)
        out[j] = _apply_scale(cur, log_scale)
    return out


def _apply_scale(p, log_scale):
    # p * exp(log_scale) without the factor underflowing on its own
    with np.errstate(divide="ignore"):
        return np.sign(p) * np.exp(np.log(np.abs(p)) + log_scale)


def hermite_eval_univariate(x: float, max_degree: int) -> np.ndarray:
    """psi_0(x), ..., psi_max_degree(x) for a single real ``x``."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite argument {x!r}")
    return hermite_table(float(x), max_degree)


def hermite_eval_multivariate(x: Sequence[float], k: Sequence[int]) -> float:
    """Tensor-product Hermite function psi_k(x) = prod_i psi_{k_i}(x_i)."""
    x = np.asarray(x, dtype=float).ravel()
    k = tuple(int(v) for v in k)
    if x.size != len(k):
        raise ValueError(f"point has dimension {x.size} but index has {len(k)}")
    if any(v < 0 for v in k):
        raise ValueError(f"negative degree in {k}")
    value = 1.0
    for xi, ki in zip(x, k):
        value *= hermite_table(xi, ki)[ki]
    return float(value)


def total_degree(k: Sequence[int]) -> int:
    return int(sum(k))


@lru_cache(maxsize=64)
def _indices(q: int, bound: int) -> np.ndarray:
    rows: list[tuple[int, ...]] = []

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    for t in range(bound):
        rows.extend(compositions(t, q))
    arr = np.array(rows, dtype=np.int64).reshape(-1, q)
    arr.setflags(write=False)
    return arr


def enumerate_indices(q: int, total_degree_bound: int) -> np.ndarray:
    """All multi-indices with ``|j|_1 < total_degree_bound`` in graded-lex order.

    Returned as a read-only ``(count, q)`` integer array.  Because the order is
    graded, the indices below any smaller bound form a prefix.
    """
    if q < 1:
        raise ValueError(f"dimension q must be >= 1, got {q}")
    if total_degree_bound < 0:
        raise ValueError(f"degree bound must be >= 0, got {total_degree_bound}")
    return _indices(int(q), int(total_degree_bound))


def index_count(q: int, total_degree_bound: int) -> int:
    if total_degree_bound <= 0:
        return 0
    return math.comb(total_degree_bound - 1 + q, q)


def christoffel_darboux(x: float, y: float, n: int) -> float:
    """sum_{j<n} psi_j(x) psi_j(y).

    Off the diagonal the Christoffel-Darboux quotient is used; within
    ``CD_SWITCH_TOL`` of it the terms are summed directly.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    px = hermite_table(x, n)
    py = hermite_table(y, n)
    if abs(x - y) <= CD_SWITCH_TOL:
        return float(np.dot(px[:n], py[:n]))
    num = px[n] * py[n - 1] - py[n] * px[n - 1]
    return float(math.sqrt(n / 2.0) * num / (x - y))


def mehler_closed_form(y, z, r: float) -> float:
    """Closed form of sum_j psi_j(y) psi_j(z) r^{|j|_1} in any dimension."""
    if not abs(r) < 1.0:
        raise ValueError(f"Mehler formula needs |r| < 1, got {r}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if y.shape != z.shape:
        raise ValueError("y and z must have the same dimension")
    q = y.size
    s2 = float(y @ y + z @ z)
    yz = float(y @ z)
    one_m = 1.0 - r * r
    pref = (math.pi * one_m) ** (-q / 2.0)
    return pref * math.exp((2.0 * yz * r - s2 * r * r) / one_m) * math.exp(-s2 / 2.0)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_q, hi_q]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be nonempty and of equal length")
        if not all(math.isfinite(v) for v in lo + hi):
            raise ValueError("box bounds must be finite")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"box has lo > hi: {lo} vs {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, q: int) -> "Box":
        return cls((lo,) * q, (hi,) * q)

    @property
    def q(self) -> int:
        return len(self.lo)

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= np.array(self.lo)) and np.all(x <= np.array(self.hi)))

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, obj) -> "Box":
        return cls(tuple(obj["lo"]), tuple(obj["hi"]))
