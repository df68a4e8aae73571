"""The point-mass isolation operator

    T_n(m; x) = n^{-q} sum_{|j|_1 < n^2} H(sqrt(|j|_1) / n) m(j) psi_j(x)

and its kernel Phi_n(x, y) = T_n(psi(y); x).

Every node of every evaluation accumulates the same terms in the same
(graded-lex) order, term by term, so a value never depends on which other
points were evaluated alongside it or on how the work was split between
threads.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .basis import Box, enumerate_indices, hermite_table
from .filters import FilterSpec, filter_eval
from .moments import MomentSet, as_spatial

DEFAULT_NODE_CAP = 10**7


@dataclass(frozen=True)
class PioConfig:
    n: int
    q: int
    filter: FilterSpec = field(default_factory=FilterSpec)
    compensated: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"scale n must be a positive integer, got {self.n}")
        if self.q < 1:
            raise ValueError(f"dimension q must be >= 1, got {self.q}")

    @property
    def degree_bound(self) -> int:
        return self.n * self.n

    @property
    def indices(self) -> np.ndarray:
        return enumerate_indices(self.q, self.degree_bound)

    @property
    def weights(self) -> np.ndarray:
        """n^{-q} H(sqrt(|j|_1)/n) for every index, in graded-lex order."""
        return _weights(self.n, self.q, self.filter)


@lru_cache(maxsize=32)
def _weights(n: int, q: int, spec: FilterSpec) -> np.ndarray:
    idx = enumerate_indices(q, n * n)
    w = float(n) ** (-q) * filter_eval(spec, np.sqrt(idx.sum(axis=1)) / n)
    w = np.asarray(w, dtype=float)
    w.setflags(write=False)
    return w


def _coefficients(cfg: PioConfig, m: MomentSet) -> np.ndarray:
    m = as_spatial(m)
    if m.q != cfg.q:
        raise ValueError(f"moment set has q={m.q}, operator has q={cfg.q}")
    if m.max_total_degree < cfg.degree_bound:
        raise ValueError(
            f"moment set holds degrees < {m.max_total_degree} but n={cfg.n} needs < {cfg.degree_bound}"
        )
    # graded-lex order makes the needed indices a prefix
    return m.values[: len(cfg.indices)]


def _accumulate(cfg: PioConfig, coeffs: np.ndarray, tables: Sequence[np.ndarray], lattice: bool):
    weights = cfg.weights
    idx = cfg.indices
    if lattice:
        shape = tuple(t.shape[1] for t in tables)
    else:
        shape = (tables[0].shape[1],)
    acc = np.zeros(shape, dtype=complex)
    comp = np.zeros(shape, dtype=complex) if cfg.compensated else None

    for j in range(len(idx)):
        k = idx[j]
        if lattice:
            psi = tables[0][k[0]]
            for axis in range(1, len(tables)):
                psi = np.multiply.outer(psi, tables[axis][k[axis]])
        else:
            psi = tables[0][k[0]]
            for axis in range(1, len(tables)):
                psi = psi * tables[axis][k[axis]]
        term = weights[j] * (coeffs[j] * psi)
        if comp is None:
            acc += term
        else:
            y = term - comp
            t = acc + y
            comp = (t - acc) - y
            acc = t
    return acc


def _tables(cfg: PioConfig, coords: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [hermite_table(np.asarray(c, dtype=float), cfg.degree_bound - 1) for c in coords]


def pio_eval_points(cfg: PioConfig, m: MomentSet, points) -> np.ndarray:
    """T_n at each row of an ``(N, q)`` array of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, cfg.q)
    coeffs = _coefficients(cfg, m)
    return _accumulate(cfg, coeffs, _tables(cfg, pts.T), lattice=False)


def pio_eval(cfg: PioConfig, m: MomentSet, x) -> complex:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != cfg.q:
        raise ValueError(f"point has dimension {x.size}, operator has q={cfg.q}")
    return complex(pio_eval_points(cfg, m, x.reshape(1, -1))[0])


def kernel_pairs(cfg: PioConfig, xs, ys) -> np.ndarray:
    """Phi_n(x_i, y_i) for matching rows of two ``(N, q)`` arrays."""
    xs = np.asarray(xs, dtype=float).reshape(-1, cfg.q)
    ys = np.asarray(ys, dtype=float).reshape(-1, cfg.q)
    if xs.shape != ys.shape:
        raise ValueError("kernel_pairs needs equally many x and y points")
    tx = _tables(cfg, xs.T)
    ty = _tables(cfg, ys.T)
    weights = cfg.weights
    acc = np.zeros(len(xs))
    comp = np.zeros(len(xs)) if cfg.compensated else None
    for j, k in enumerate(cfg.indices):
        px = tx[0][k[0]]
        py = ty[0][k[0]]
        for axis in range(1, cfg.q):
            px = px * tx[axis][k[axis]]
            py = py * ty[axis][k[axis]]
        term = weights[j] * (py * px)
        if comp is None:
            acc += term
        else:
            y = term - comp
            t = acc + y
            comp = (t - acc) - y
            acc = t
    return acc


def kernel_eval(cfg: PioConfig, x, y) -> float:
    """Phi_n(x, y); symmetric in its arguments bit for bit."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.size != cfg.q or y.size != cfg.q:
        raise ValueError(f"points must have dimension q={cfg.q}")
    return float(kernel_pairs(cfg, x.reshape(1, -1), y.reshape(1, -1))[0])


def kernel_diag(cfg: PioConfig, x) -> float:
    """Phi_n(x, x) >= 0."""
    return kernel_eval(cfg, x, x)


def kernel_diag_points(cfg: PioConfig, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, cfg.q)
    return kernel_pairs(cfg, pts, pts)


def lattice_axes(box: Box, spacing: float) -> list[np.ndarray]:
    """Nodes ``lo + i*spacing`` along each axis, up to and including ``hi``."""
    if not (spacing > 0 and math.isfinite(spacing)):
        raise ValueError(f"spacing must be positive, got {spacing}")
    axes = []
    for lo, hi in zip(box.lo, box.hi):
        count = int(math.floor((hi - lo) / spacing + 1e-9)) + 1
        axes.append(lo + spacing * np.arange(count))
    return axes


@dataclass
class GridEvaluation:
    """T_n sampled on a rectangular lattice; ``values[i1, ..., iq]``."""

    axes: list[np.ndarray]
    spacing: float
    values: np.ndarray

    @property
    def q(self) -> int:
        return len(self.axes)

    @property
    def node_count(self) -> int:
        return int(self.values.size)

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def max_modulus(self) -> float:
        return float(self.modulus.max()) if self.values.size else 0.0

    @property
    def stats(self) -> dict:
        return {
            "node_count": self.node_count,
            "shape": list(self.values.shape),
            "spacing": self.spacing,
            "max_modulus": self.max_modulus,
        }

    def coords(self, nodes) -> np.ndarray:
        """Coordinates of lattice nodes given as an ``(K, q)`` array of integer positions."""
        nodes = np.asarray(nodes, dtype=np.int64).reshape(-1, self.q)
        return np.stack([self.axes[i][nodes[:, i]] for i in range(self.q)], axis=1)

    def all_coords(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)

    def to_csv(self) -> str:
        pts = self.all_coords()
        vals = self.values.reshape(-1)
        buf = io.StringIO()
        header = ",".join([f"x{i + 1}" for i in range(self.q)] + ["re", "im", "abs"])
        buf.write(header + "\n")
        for p, v in zip(pts, vals):
            v = complex(v)
            fields = [repr(float(c)) for c in p] + [repr(v.real), repr(v.imag), repr(abs(v))]
            buf.write(",".join(fields) + "\n")
        return buf.getvalue()

    def gnuplot_script(self, data_file: str, title: str = "|T_n|") -> str:
        if self.q == 1:
            return (
                "set datafile separator ','\n"
                f"set title '{title}'\n"
                "set xlabel 'x'\n"
                f"plot '{data_file}' every ::1 using 1:5 with lines title 'abs', \\\n"
                f"     '{data_file}' every ::1 using 1:3 with lines title 're'\n"
            )
        if self.q == 2:
            return (
                "set datafile separator ','\n"
                f"set title '{title}'\n"
                "set view map\n"
                "set xlabel 'x1'\nset ylabel 'x2'\n"
                f"set dgrid3d {self.values.shape[0]},{self.values.shape[1]}\n"
                f"splot '{data_file}' every ::1 using 1:2:5 with pm3d notitle\n"
            )
        raise ValueError("gnuplot scripts are only produced for q = 1 or 2")


def pio_eval_lattice(cfg: PioConfig, m: MomentSet, axes: Sequence[np.ndarray], workers: int = 1) -> np.ndarray:
    """T_n on the tensor lattice spanned by ``axes``.

    Work is split along the first axis when ``workers > 1``; per-node sums are
    unaffected by the split.
    """
    if len(axes) != cfg.q:
        raise ValueError(f"need {cfg.q} axes, got {len(axes)}")
    coeffs = _coefficients(cfg, m)
    tables = _tables(cfg, axes)
    n0 = len(axes[0])
    if workers <= 1 or n0 < 2:
        return _accumulate(cfg, coeffs, tables, lattice=True)

    bounds = np.linspace(0, n0, min(workers, n0) + 1).astype(int)
    chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def run(chunk):
        a, b = chunk
        return _accumulate(cfg, coeffs, [tables[0][:, a:b]] + list(tables[1:]), lattice=True)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(run, chunks))
    return np.concatenate(parts, axis=0)


def pio_eval_grid(
    cfg: PioConfig,
    m: MomentSet,
    box: Box,
    spacing: float,
    workers: int = 1,
    node_cap: int = DEFAULT_NODE_CAP,
) -> GridEvaluation:
    """Evaluate T_n at every node of the lattice over ``box`` with the given spacing."""
    if box.q != cfg.q:
        raise ValueError(f"box has dimension {box.q}, operator has q={cfg.q}")
    axes = lattice_axes(box, spacing)
    count = math.prod(len(a) for a in axes)
    if count > node_cap:
        raise ValueError(
            f"lattice would have {count} nodes (cap {node_cap}); increase the spacing, "
            "shrink the box, or raise node_cap"
        )
    values = pio_eval_lattice(cfg, m, axes, workers=workers)
    return GridEvaluation(axes, float(spacing), values)
