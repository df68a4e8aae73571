"""Hermite moment sets: construction from point masses or densities, side
conversion, perturbation and JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .basis import Box, enumerate_indices, hermite_table, index_count

SIDES = ("spatial", "fourier")
PERTURBATION_KINDS = ("none", "uniform_disk", "fixed_table")


@dataclass(frozen=True)
class PointMass:
    location: tuple[float, ...]
    amplitude: complex

    def __post_init__(self):
        loc = tuple(float(v) for v in np.atleast_1d(self.location))
        if not all(math.isfinite(v) for v in loc):
            raise ValueError(f"non-finite location {loc}")
        amp = complex(self.amplitude)
        if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
            raise ValueError(f"non-finite amplitude {amp}")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "amplitude", amp)

    @property
    def q(self) -> int:
        return len(self.location)


@dataclass(frozen=True)
class Scenario:
    """Ground-truth point masses inside a box."""

    q: int
    masses: tuple[PointMass, ...]
    box: Box

    def __post_init__(self):
        masses = tuple(self.masses)
        object.__setattr__(self, "masses", masses)
        if self.box.q != self.q:
            raise ValueError(f"box dimension {self.box.q} != q={self.q}")
        for pm in masses:
            if pm.q != self.q:
                raise ValueError(f"mass at {pm.location} has dimension {pm.q}, expected {self.q}")
            if not self.box.contains(pm.location):
                raise ValueError(f"mass at {pm.location} lies outside the box")

    @property
    def total_mass(self) -> float:
        """M = sum |a_l|."""
        return float(sum(abs(pm.amplitude) for pm in self.masses))

    @property
    def min_amplitude(self) -> float:
        """mu = min |a_l| (0 for an empty scenario)."""
        return float(min((abs(pm.amplitude) for pm in self.masses), default=0.0))

    @property
    def min_separation(self) -> float:
        """eta = min pairwise distance (inf when fewer than two masses)."""
        if len(self.masses) < 2:
            return math.inf
        x = self.locations
        d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
        return float(d[np.triu_indices(len(x), 1)].min())

    @property
    def extent(self) -> float:
        """B = max |x_l|_inf."""
        if not self.masses:
            return 0.0
        return float(np.abs(self.locations).max())

    @property
    def locations(self) -> np.ndarray:
        return np.array([pm.location for pm in self.masses], dtype=float).reshape(-1, self.q)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([pm.amplitude for pm in self.masses], dtype=complex)

    def scaled(self, factor: complex) -> "Scenario":
        return replace(
            self, masses=tuple(PointMass(pm.location, factor * pm.amplitude) for pm in self.masses)
        )

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "masses": [
                {"x": list(pm.location), "a": [pm.amplitude.real, pm.amplitude.imag]}
                for pm in self.masses
            ],
            "box": self.box.to_json(),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Scenario":
        q = int(obj["q"])
        masses = []
        for entry in obj.get("masses", []):
            a = entry.get("a", [1.0, 0.0])
            amp = complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a)
            masses.append(PointMass(tuple(entry["x"]), amp))
        return cls(q, tuple(masses), Box.from_json(obj["box"]))


@dataclass(frozen=True, eq=False)
class MomentSet:
    """Hermite moments for every multi-index with ``|k|_1 < max_total_degree``.

    ``values[i]`` belongs to ``indices[i]``, the graded-lex enumeration.
    """

    q: int
    side: str
    max_total_degree: int
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    # exact pre-image when this set was produced by convert_side
    _origin: "MomentSet | None" = field(default=None, repr=False)

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        vals = np.array(self.values, dtype=complex).reshape(-1)
        expected = index_count(self.q, self.max_total_degree)
        if vals.size != expected:
            raise ValueError(
                f"expected {expected} values for q={self.q}, degree < {self.max_total_degree}; "
                f"got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("moment values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def indices(self) -> np.ndarray:
        return enumerate_indices(self.q, self.max_total_degree)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k) -> complex:
        return complex(self.values[self._position(tuple(int(v) for v in k))])

    def _position(self, k: tuple[int, ...]) -> int:
        if len(k) != self.q or min(k) < 0:
            raise KeyError(k)
        t = sum(k)
        if t >= self.max_total_degree:
            raise KeyError(k)
        # offset of degree block t, then lex rank of k inside it
        pos = index_count(self.q, t)
        rest = t
        for axis in range(self.q - 1):
            parts = self.q - axis - 1
            for first in range(k[axis]):
                pos += math.comb(rest - first + parts - 1, parts - 1)
            rest -= k[axis]
        return pos

    def as_dict(self) -> dict[tuple[int, ...], complex]:
        return {tuple(int(v) for v in k): complex(v) for k, v in zip(self.indices, self.values)}

    def equals(self, other: "MomentSet") -> bool:
        """Bitwise equality of the stored data (diagnostics ignored)."""
        return (
            self.q == other.q
            and self.side == other.side
            and self.max_total_degree == other.max_total_degree
            and np.array_equal(self.values.view(np.float64), other.values.view(np.float64))
        )

    def with_values(self, values, **diagnostics) -> "MomentSet":
        return MomentSet(self.q, self.side, self.max_total_degree, values, {**self.diagnostics, **diagnostics})

    def __add__(self, other: "MomentSet") -> "MomentSet":
        _check_compatible(self, other)
        return MomentSet(self.q, self.side, self.max_total_degree, self.values + other.values)

    def __mul__(self, scalar) -> "MomentSet":
        return MomentSet(self.q, self.side, self.max_total_degree, complex(scalar) * self.values)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, q: int, max_total_degree: int, side: str = "spatial") -> "MomentSet":
        return cls(q, side, max_total_degree, np.zeros(index_count(q, max_total_degree), complex))

    @classmethod
    def from_mapping(cls, q: int, side: str, max_total_degree: int, mapping: Mapping) -> "MomentSet":
        """Build from a sparse ``{index: value}`` mapping; absent indices are 0."""
        out = cls.zeros(q, max_total_degree, side)
        vals = np.array(out.values)
        for k, v in mapping.items():
            vals[out._position(tuple(int(c) for c in k))] = complex(v)
        return cls(q, side, max_total_degree, vals)

    def to_json(self) -> dict:
        out = {
            "q": self.q,
            "side": self.side,
            "max_total_degree": self.max_total_degree,
            "values": [
                {"k": [int(c) for c in k], "v": [float(v.real), float(v.imag)]}
                for k, v in zip(self.indices, self.values)
            ],
        }
        if self.diagnostics:
            out["diagnostics"] = dict(self.diagnostics)
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "MomentSet":
        mapping = {}
        for entry in obj["values"]:
            v = entry["v"]
            mapping[tuple(entry["k"])] = complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
        m = cls.from_mapping(int(obj["q"]), obj["side"], int(obj["max_total_degree"]), mapping)
        diag = obj.get("diagnostics")
        return m.with_values(m.values, **diag) if diag else m

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def _check_compatible(a: MomentSet, b: MomentSet):
    if (a.q, a.side, a.max_total_degree) != (b.q, b.side, b.max_total_degree):
        raise ValueError("moment sets differ in dimension, side or depth")


def _point_tables(locations: np.ndarray, max_degree: int) -> list[np.ndarray]:
    # one (max_degree + 1, n_points) table per axis
    return [hermite_table(locations[:, i], max_degree) for i in range(locations.shape[1])]


def tensor_values(indices: np.ndarray, tables: Sequence[np.ndarray]) -> np.ndarray:
    """psi_k at scattered points: rows follow ``indices``, columns the points."""
    prod = tables[0][indices[:, 0]]
    for axis in range(1, len(tables)):
        prod = prod * tables[axis][indices[:, axis]]
    return prod


def moments_from_masses(scenario: Scenario, n: int) -> MomentSet:
    """Exact spatial moments sum_l a_l psi_k(x_l) for all ``|k|_1 < n^2``.

    Masses are accumulated in a canonical (sorted) order so the result does
    not depend on how the scenario lists them.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return moments_from_masses_degree(scenario, n * n)


def moments_from_masses_degree(scenario: Scenario, max_total_degree: int) -> MomentSet:
    q = scenario.q
    indices = enumerate_indices(q, max_total_degree)
    values = np.zeros(len(indices), dtype=complex)
    masses = sorted(
        scenario.masses, key=lambda pm: (pm.location, pm.amplitude.real, pm.amplitude.imag)
    )
    if masses and max_total_degree > 0:
        locs = np.array([pm.location for pm in masses], dtype=float).reshape(-1, q)
        psi = tensor_values(indices, _point_tables(locs, max_total_degree - 1))
        for col, pm in enumerate(masses):
            values = values + pm.amplitude * psi[:, col]
    return MomentSet(q, "spatial", max_total_degree, values)


def _side_factors(indices: np.ndarray) -> np.ndarray:
    # (-i)^t cycles through 1, -i, -1, i; exact complex units
    units = np.array([1.0, -1.0j, -1.0, 1.0j])
    return units[indices.sum(axis=1) % 4]


def convert_side(m: MomentSet) -> MomentSet:
    """Switch between spatial moments and moments of the Fourier-side data.

    spatial -> fourier multiplies moment k by (-i)^{|k|_1} (2 pi)^{q/2};
    fourier -> spatial divides.  Converting a converted set returns the
    original values exactly.
    """
    if m._origin is not None and m._origin.side != m.side:
        return m._origin
    units = _side_factors(m.indices)
    scale = (2.0 * math.pi) ** (m.q / 2.0)
    if m.side == "spatial":
        values = (m.values * units) * scale
        side = "fourier"
    else:
        values = (m.values / scale) * np.conj(units)
        side = "spatial"
    return MomentSet(m.q, side, m.max_total_degree, values, dict(m.diagnostics), _origin=m)


def as_spatial(m: MomentSet) -> MomentSet:
    return m if m.side == "spatial" else convert_side(m)


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str = "none"
    magnitude: float = 0.0
    seed: int = 0
    table: Mapping | None = None

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"perturbation kind must be one of {PERTURBATION_KINDS}")
        if not (math.isfinite(self.magnitude) and self.magnitude >= 0):
            raise ValueError("perturbation magnitude must be finite and >= 0")
        if self.kind == "fixed_table" and self.table is None:
            raise ValueError("fixed_table perturbation needs a table")

    @classmethod
    def parse(cls, text: str) -> "PerturbationSpec":
        """Parse ``none`` or ``uniform_disk:<eps>:<seed>``."""
        parts = text.split(":")
        if parts[0] == "none" and len(parts) == 1:
            return cls()
        if parts[0] == "uniform_disk" and len(parts) in (2, 3):
            seed = int(parts[2]) if len(parts) == 3 else 0
            return cls("uniform_disk", float(parts[1]), seed)
        raise ValueError(f"cannot parse noise spec {text!r}; use none or uniform_disk:<eps>:<seed>")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "magnitude": self.magnitude, "seed": self.seed}
        if self.table is not None:
            out["table"] = [
                {"k": list(k), "v": [complex(v).real, complex(v).imag]} for k, v in self.table.items()
            ]
        return out


def perturb(m: MomentSet, spec: PerturbationSpec) -> MomentSet:
    """Add eps_k to every stored moment; records ``noise_max`` = max |eps_k|."""
    if spec.kind == "none" or (spec.kind == "uniform_disk" and spec.magnitude == 0.0):
        return m.with_values(m.values, noise_kind=spec.kind, noise_max=0.0, noise_magnitude=spec.magnitude)

    if spec.kind == "uniform_disk":
        rng = np.random.default_rng(spec.seed)
        u = rng.random(len(m))
        phase = rng.random(len(m))
        eps = spec.magnitude * np.sqrt(u) * np.exp(2j * math.pi * phase)
        # sqrt(u) <= 1 up to rounding of the product; keep the bound honest
        radius = np.abs(eps)
        over = radius > spec.magnitude
        eps[over] *= spec.magnitude / radius[over]
    else:
        eps = np.zeros(len(m), dtype=complex)
        for k, v in spec.table.items():
            try:
                eps[m._position(tuple(int(c) for c in k))] = complex(v)
            except KeyError:
                raise ValueError(f"perturbation index {tuple(k)} not in the moment set") from None

    noise_max = float(np.abs(eps).max()) if eps.size else 0.0
    return m.with_values(
        m.values + eps, noise_kind=spec.kind, noise_max=noise_max, noise_magnitude=spec.magnitude
    )


@dataclass(frozen=True)
class GriddedDensity:
    """Density samples on the uniform lattice spanning ``box`` (endpoints included)."""

    box: Box
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != self.box.q:
            raise ValueError(f"density array has {vals.ndim} axes, box has {self.box.q}")
        if min(vals.shape) < 2:
            raise ValueError("density grid needs at least two samples per axis")
        object.__setattr__(self, "values", vals)

    @property
    def spacing(self) -> np.ndarray:
        return np.array(
            [(hi - lo) / (s - 1) for lo, hi, s in zip(self.box.lo, self.box.hi, self.values.shape)]
        )

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, s) for lo, hi, s in zip(self.box.lo, self.box.hi, self.values.shape)]

    def interpolator(self) -> Callable:
        from scipy.interpolate import RegularGridInterpolator

        method = "cubic" if min(self.values.shape) >= 4 else "linear"
        return RegularGridInterpolator(self.axes(), self.values, method=method)

    def to_json(self) -> dict:
        return {
            "q": self.box.q,
            "box": self.box.to_json(),
            "shape": list(self.values.shape),
            "values": self.values.reshape(-1).tolist(),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "GriddedDensity":
        box = Box.from_json(obj["box"])
        shape = tuple(int(s) for s in obj["shape"])
        if len(shape) != int(obj["q"]):
            raise ValueError("density shape does not match q")
        return cls(box, np.asarray(obj["values"], dtype=float).reshape(shape))


def moments_from_density(density, n: int, box: Box | None = None, nodes: int | None = None) -> MomentSet:
    """Moments int psi_k F for ``|k|_1 < n^2`` by tensor Gauss-Legendre quadrature.

    ``density`` is either a :class:`GriddedDensity` (interpolated between
    samples) or a callable taking an ``(N, q)`` array of points, in which case
    ``box`` must be given.  A gridded density must sample the highest-degree
    Hermite function at least twice per local half-wavelength, otherwise
    ``ValueError`` is raised.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    degree = n * n
    if isinstance(density, GriddedDensity):
        box = density.box
        # local frequency of psi_k is at most sqrt(2k + 1)
        max_freq = math.sqrt(2 * (degree - 1) + 1)
        if np.any(density.spacing > math.pi / (2.0 * max_freq)):
            raise ValueError(
                f"density grid spacing {density.spacing.max():.4g} too coarse for n={n}; "
                f"need <= {math.pi / (2.0 * max_freq):.4g}"
            )
        func = density.interpolator()
        resolution = max(density.values.shape)
    else:
        if box is None:
            raise ValueError("a box is required when the density is a callable")
        func = density
        resolution = 64
    if nodes is None:
        nodes = 2 * (degree + resolution) + 32

    q = box.q
    x, w = np.polynomial.legendre.leggauss(nodes)
    axes = []
    weights = []
    for lo, hi in zip(box.lo, box.hi):
        half = 0.5 * (hi - lo)
        axes.append(lo + half * (x + 1.0))
        weights.append(half * w)

    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=1)
    fvals = np.asarray(func(pts), dtype=complex).reshape((nodes,) * q)
    tables = [hermite_table(ax, degree - 1) for ax in axes]

    acc = fvals
    for axis in range(q):
        shape = [1] * q
        shape[axis] = nodes
        acc = acc * weights[axis].reshape(shape)
    # contract the node axes one at a time against the per-axis tables
    for axis in range(q):
        acc = np.moveaxis(np.tensordot(acc, tables[axis], axes=([axis], [1])), -1, axis)
    indices = enumerate_indices(q, degree)
    values = acc[tuple(indices.T)]
    return MomentSet(q, "spatial", degree, values)
