"""Grouping of detected spikes into composite objects (cells, galaxies).

A group X_k collects spikes linked by chains of steps no longer than the
grouping radius; its template is the list of (location, amplitude) rows.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .basis import Box
from .detect import DetectedSpike, cluster
from .moments import PointMass, Scenario


@dataclass(frozen=True)
class Group:
    id: int
    members: tuple[DetectedSpike, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def template(self) -> list[tuple[tuple[float, ...], complex | None]]:
        return [(s.location, s.amplitude) for s in self.members]

    @property
    def locations(self) -> np.ndarray:
        return np.array([s.location for s in self.members], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([0.0 if s.amplitude is None else abs(s.amplitude) for s in self.members])

    @property
    def total_abs_amplitude(self) -> float:
        return float(self.weights.sum())

    @property
    def centroid(self) -> tuple[float, ...]:
        """|a|-weighted mean location; plain mean if every weight is zero."""
        w = self.weights
        x = self.locations
        if w.sum() > 0:
            c = (w[:, None] * x).sum(0) / w.sum()
        else:
            c = x.mean(0)
        return tuple(float(v) for v in c)

    @property
    def bounding_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        x = self.locations
        return tuple(float(v) for v in x.min(0)), tuple(float(v) for v in x.max(0))

    def stats(self) -> dict:
        lo, hi = self.bounding_box
        return {
            "size": self.size,
            "centroid": list(self.centroid),
            "bbox": {"lo": list(lo), "hi": list(hi)},
            "total_abs_amplitude": self.total_abs_amplitude,
        }


def group_spikes(spikes, grouping_radius: float) -> list[Group]:
    if not grouping_radius > 0:
        raise ValueError("grouping_radius must be positive")
    spikes = list(spikes)
    if not spikes:
        return []
    pts = np.array([s.location for s in spikes], dtype=float)
    groups = []
    for gid, rows in enumerate(cluster(pts, grouping_radius)):
        members = tuple(spikes[i] for i in rows)
        groups.append(Group(gid, members))
    return groups


def group_report(groups) -> dict:
    """JSON-ready record: per-group template rows and summary stats."""
    out = []
    for g in groups:
        rows = [
            {"x": list(loc), "a": None if a is None else [a.real, a.imag]}
            for loc, a in g.template
        ]
        out.append({"id": g.id, "template": rows, **g.stats()})
    return {
        "group_count": len(out),
        "spike_count": int(sum(g["size"] for g in out)),
        "groups": out,
    }


def group_report_csv(groups) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    q = len(groups[0].members[0].location) if groups else 0
    writer.writerow(["group"] + [f"x{i + 1}" for i in range(q)] + ["a_re", "a_im"])
    for g in groups:
        for loc, a in g.template:
            amp = ["", ""] if a is None else [repr(a.real), repr(a.imag)]
            writer.writerow([g.id] + [repr(c) for c in loc] + amp)
    return buf.getvalue()


def group_gnuplot_script(data_file: str) -> str:
    """Scatter plot of a 2-D group CSV, one colour per group."""
    return (
        "set datafile separator ','\n"
        "set title 'spike groups'\n"
        "set xlabel 'x1'\nset ylabel 'x2'\n"
        "set palette maxcolors 12\n"
        f"plot '{data_file}' every ::1 using 2:3:1 with points pt 7 palette notitle\n"
    )


def grid_of_groups(
    rows: int,
    cols: int,
    group_size: int,
    pitch: float,
    spread: float,
    min_separation: float,
    seed: int = 0,
    box: Box | None = None,
    amplitude_range: tuple[float, float] = (0.5, 1.0),
    margin: float = 1.0,
) -> tuple[Scenario, list[int]]:
    """A 2-D scene of ``rows x cols`` groups centred on a square grid.

    Each group holds ``group_size`` spikes placed uniformly in a disk of
    radius ``spread`` around its centre, at least ``min_separation`` apart.
    Amplitudes are real, uniform in ``amplitude_range``.  Returns the scenario
    and the group label of every mass (in scenario order).
    """
    if rows < 1 or cols < 1 or group_size < 1:
        raise ValueError("rows, cols and group_size must be >= 1")
    if not pitch > 2 * spread:
        raise ValueError("pitch must exceed twice the spread so groups stay disjoint")
    rng = np.random.default_rng(seed)
    centres = [
        (pitch * (c - 0.5 * (cols - 1)), pitch * (0.5 * (rows - 1) - r))
        for r in range(rows)
        for c in range(cols)
    ]
    masses, labels = [], []
    for gid, (cx, cy) in enumerate(centres):
        placed: list[np.ndarray] = []
        tries = 0
        while len(placed) < group_size:
            tries += 1
            if tries > 10000:
                raise ValueError("could not place spikes; lower min_separation or raise spread")
            r = spread * np.sqrt(rng.random())
            phi = 2 * np.pi * rng.random()
            p = np.array([cx + r * np.cos(phi), cy + r * np.sin(phi)])
            if all(np.hypot(*(p - o)) >= min_separation for o in placed):
                placed.append(p)
        lo, hi = amplitude_range
        for p in placed:
            masses.append(PointMass(tuple(float(v) for v in p), float(lo + (hi - lo) * rng.random())))
            labels.append(gid)
    if box is None:
        half = pitch * 0.5 * max(rows - 1, cols - 1) + spread + margin
        box = Box.cube(-half, half, 2)
    return Scenario(2, tuple(masses), box), labels
