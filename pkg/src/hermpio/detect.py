"""Spike recovery: threshold T_n on a coarse lattice, split the super-level set
into clusters, refine each cluster's argmax on a finer lattice and read off
the amplitude as T_n(x) / Phi_n(x, x).

The detection threshold stands in for the unknown A_2 mu / 2 and the linkage
radius for eta / 2; both are user inputs, never derived from fitted constants.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .basis import PI_M14, Box
from .filters import FilterSpec
from .moments import MomentSet, as_spatial
from .pio import (
    GridEvaluation,
    PioConfig,
    kernel_diag,
    pio_eval,
    pio_eval_grid,
    pio_eval_lattice,
)


@dataclass(frozen=True)
class DetectConfig:
    n: int
    box: Box
    coarse_spacing: float
    refine_factor: int = 8
    threshold_abs: float | None = None
    threshold_rel: float | None = None
    linkage_radius: float | None = None
    filter: FilterSpec = field(default_factory=FilterSpec)
    workers: int = 1
    diag_floor: float = 1e-12

    def __post_init__(self):
        if (self.threshold_abs is None) == (self.threshold_rel is None):
            raise ValueError("set exactly one of threshold_abs / threshold_rel")
        if self.threshold_abs is not None and not self.threshold_abs > 0:
            raise ValueError("threshold_abs must be positive")
        if self.threshold_rel is not None and not 0 < self.threshold_rel < 1:
            raise ValueError("threshold_rel must lie in (0, 1)")
        if not self.coarse_spacing > 0:
            raise ValueError("coarse_spacing must be positive")
        if int(self.refine_factor) != self.refine_factor or self.refine_factor < 1:
            raise ValueError("refine_factor must be an integer >= 1")
        if self.linkage_radius is not None and not self.linkage_radius > self.coarse_spacing:
            raise ValueError("linkage_radius must exceed the coarse spacing")

    @property
    def q(self) -> int:
        return self.box.q

    @property
    def pio(self) -> PioConfig:
        return PioConfig(self.n, self.q, self.filter)

    @property
    def fine_spacing(self) -> float:
        return self.coarse_spacing / self.refine_factor

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "box": self.box.to_json(),
            "coarse_spacing": self.coarse_spacing,
            "refine_factor": self.refine_factor,
            "threshold_abs": self.threshold_abs,
            "threshold_rel": self.threshold_rel,
            "linkage_radius": self.linkage_radius,
            "filter": self.filter.kind,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class DetectedSpike:
    location: tuple[float, ...]
    amplitude: complex | None
    peak_value: complex
    cluster_id: int
    cluster_node_count: int
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(float(c) for c in self.location))
        if self.amplitude is not None:
            object.__setattr__(self, "amplitude", complex(self.amplitude))
        object.__setattr__(self, "peak_value", complex(self.peak_value))

    def to_json(self) -> dict:
        out = {
            "x": list(self.location),
            "a": None if self.amplitude is None else [self.amplitude.real, self.amplitude.imag],
            "peak": [self.peak_value.real, self.peak_value.imag],
            "cluster": self.cluster_id,
            "nodes": self.cluster_node_count,
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out


@dataclass
class DetectionResult:
    spikes: list[DetectedSpike]
    diagnostics: dict

    @property
    def count(self) -> int:
        return len(self.spikes)

    @property
    def locations(self) -> np.ndarray:
        q = len(self.spikes[0].location) if self.spikes else 0
        return np.array([s.location for s in self.spikes], dtype=float).reshape(-1, q)

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "spikes": [s.to_json() for s in self.spikes],
            "diagnostics": self.diagnostics,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        q = len(self.spikes[0].location) if self.spikes else 0
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [f"x{i + 1}" for i in range(q)] + ["a_re", "a_im", "peak_re", "peak_im", "cluster", "nodes"]
        )
        for s in self.spikes:
            a = s.amplitude
            writer.writerow(
                [repr(c) for c in s.location]
                + ([repr(a.real), repr(a.imag)] if a is not None else ["", ""])
                + [repr(s.peak_value.real), repr(s.peak_value.imag), s.cluster_id, s.cluster_node_count]
            )
        return buf.getvalue()


def threshold_value(grid: GridEvaluation, cfg: DetectConfig) -> float:
    if cfg.threshold_abs is not None:
        return float(cfg.threshold_abs)
    return float(cfg.threshold_rel * grid.max_modulus)


def super_level_set(grid: GridEvaluation, cfg: DetectConfig) -> np.ndarray:
    """Integer lattice positions (``(K, q)``, C order) where |T_n| >= threshold.

    A grid that is identically zero yields the empty set under either
    threshold convention.
    """
    mod = grid.modulus
    theta = threshold_value(grid, cfg)
    if grid.max_modulus == 0.0:
        return np.zeros((0, grid.q), dtype=np.int64)
    return np.argwhere(mod >= theta)


def cluster(points, linkage_radius: float) -> list[np.ndarray]:
    """Single-linkage clusters of ``points`` (``(K, q)``) at ``linkage_radius``.

    Returns arrays of row indices.  Clusters are ordered by their
    lexicographically smallest member point, and members are listed in
    lexicographic order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return []
    pts = pts.reshape(len(pts), -1)
    k = len(pts)
    pairs = cKDTree(pts).query_pairs(linkage_radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(k, k))
    _, labels = connected_components(graph, directed=False)

    order = np.lexsort(pts.T[::-1])
    groups: dict[int, list[int]] = {}
    for row in order:
        groups.setdefault(int(labels[row]), []).append(int(row))
    # dict keeps first-seen order, i.e. by smallest member
    return [np.array(members, dtype=np.int64) for members in groups.values()]


def _resolve_linkage(points: np.ndarray, cfg: DetectConfig) -> float:
    if cfg.linkage_radius is not None:
        return float(cfg.linkage_radius)
    # lattice neighbours (diagonals included) always link
    adjacent = 1.01 * cfg.coarse_spacing * math.sqrt(cfg.q)
    comps = cluster(points, adjacent)
    if len(comps) < 2:
        return adjacent
    trees = [cKDTree(points[c]) for c in comps]
    gap = math.inf
    for a in range(len(comps)):
        for b in range(a + 1, len(comps)):
            d, _ = trees[b].query(points[comps[a]])
            gap = min(gap, float(np.min(d)))
    return max(adjacent, 0.5 * gap)


def _fine_axes(cfg: DetectConfig, members: np.ndarray) -> list[np.ndarray]:
    h = cfg.coarse_spacing
    r = cfg.refine_factor
    fine = h / r
    axes = []
    for axis in range(cfg.q):
        lo = float(members[:, axis].min()) - h
        hi = float(members[:, axis].max()) + h
        origin = cfg.box.lo[axis]
        k0 = int(math.ceil((lo - origin) / fine - 1e-9))
        k1 = int(math.floor((hi - origin) / fine + 1e-9))
        # fine nodes share the coarse lattice origin, so refine_factor=1 reproduces it
        axes.append(origin + fine * np.arange(k0, k1 + 1))
    return axes


def refine_argmax(cfg: DetectConfig, m: MomentSet, members) -> tuple[tuple[float, ...], complex]:
    """Maximiser of |T_n| on the fine lattice around one cluster.

    The search covers fine nodes within one coarse cell (Euclidean) of a
    cluster member; ties go to the lexicographically smallest coordinates.
    Returns the location and T_n there.
    """
    members = np.asarray(members, dtype=float).reshape(-1, cfg.q)
    if members.size == 0:
        raise ValueError("cannot refine an empty cluster")
    axes = _fine_axes(cfg, members)
    values = pio_eval_lattice(cfg.pio, m, axes, workers=cfg.workers)
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.reshape(-1) for g in mesh], axis=1)
    dist, _ = cKDTree(members).query(coords)
    mod = np.abs(values).reshape(-1)
    mod = np.where(dist <= cfg.coarse_spacing * (1 + 1e-9), mod, -np.inf)
    # C-order flattening with ascending axes: first maximum is the lex-smallest one
    best = int(np.argmax(mod))
    return tuple(float(c) for c in coords[best]), complex(values.reshape(-1)[best])


def amplitude_at(cfg: DetectConfig, m: MomentSet, x, floor: float | None = None) -> complex | None:
    """T_n(x) / Phi_n(x, x), or ``None`` when the diagonal kernel vanishes."""
    pio = cfg.pio
    diag = kernel_diag(pio, x)
    floor = cfg.diag_floor if floor is None else floor
    if not diag > floor:
        return None
    return pio_eval(pio, m, x) / diag


def noise_bound(cfg: DetectConfig, eps_max: float) -> float:
    """Worst-case sup |E_n| for moment errors bounded by ``eps_max``.

    Uses |psi_k(x)| <= pi^{-q/4} for every k and x.
    """
    return float(eps_max * cfg.pio.weights.sum() * PI_M14**cfg.q)


def coarse_grid(cfg: DetectConfig, m: MomentSet) -> GridEvaluation:
    return pio_eval_grid(cfg.pio, as_spatial(m), cfg.box, cfg.coarse_spacing, workers=cfg.workers)


def detect(cfg: DetectConfig, m: MomentSet, grid: GridEvaluation | None = None) -> DetectionResult:
    """Run the full recovery pipeline.

    ``grid`` may carry a coarse evaluation already computed by ``coarse_grid``.
    """
    m = as_spatial(m)
    if m.q != cfg.q:
        raise ValueError(f"moment set has q={m.q}, detection box has q={cfg.q}")
    if grid is None:
        grid = coarse_grid(cfg, m)
    theta = threshold_value(grid, cfg)
    nodes = super_level_set(grid, cfg)
    points = grid.coords(nodes)
    linkage = _resolve_linkage(points, cfg) if len(points) else (cfg.linkage_radius or 0.0)
    clusters = cluster(points, linkage)

    spikes = []
    for cid, rows in enumerate(clusters):
        members = points[rows]
        loc, peak = refine_argmax(cfg, m, members)
        amp = amplitude_at(cfg, m, loc)
        flags = () if amp is not None else ("vanishing_diagonal",)
        spikes.append(DetectedSpike(loc, amp, peak, cid, len(rows), flags))

    locs = np.array([s.location for s in spikes], dtype=float).reshape(len(spikes), cfg.q)
    if len(spikes) > 1:
        d = np.sqrt(((locs[:, None] - locs[None]) ** 2).sum(-1))
        min_dist = float(d[np.triu_indices(len(spikes), 1)].min())
    else:
        min_dist = None

    diagnostics = {
        "threshold": theta,
        "threshold_mode": "abs" if cfg.threshold_abs is not None else "rel",
        "linkage_radius": linkage,
        "grid": grid.stats,
        "level_set_nodes": int(len(nodes)),
        "fine_spacing": cfg.fine_spacing,
        "min_spike_distance": min_dist,
    }
    eps = m.diagnostics.get("noise_max")
    if eps is not None:
        bound = noise_bound(cfg, float(eps))
        diagnostics["noise_bound"] = bound
        diagnostics["threshold_noise_ratio"] = theta / bound if bound > 0 else None
        diagnostics["noise_margin_ok"] = bool(bound < theta / 4)
    return DetectionResult(spikes, diagnostics)
