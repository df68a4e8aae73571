"""Numerical checks of the Hermite-function identities and kernel properties
the recovery method depends on.

Each check runs a fixed, fully recorded sweep and returns a CheckReport with
the worst discrepancy, a pass/fail verdict and any empirical constants the
sweep produced.  Nothing in the detection path reads these constants.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from .basis import PI_M14, enumerate_indices, hermite_table, mehler_closed_form
from .pio import PioConfig, kernel_diag_points, kernel_pairs


@dataclass
class CheckReport:
    name: str
    params: dict
    worst: float | None
    tolerance: float | None
    passed: bool
    constants: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def check_orthonormality(max_degree: int = 50, quadrature_nodes: int = 200, tol: float = 1e-8) -> CheckReport:
    """Gauss-Hermite Gram matrix of psi_0..psi_max_degree against the identity."""
    x, w = np.polynomial.hermite.hermgauss(quadrature_nodes)
    # psi_j(x)^2 = (psi_j(x) e^{x^2/2})^2 e^{-x^2}; the quadrature weight supplies e^{-x^2}
    poly = hermite_table(x, max_degree, gaussian=False)
    gram = (poly * w) @ poly.T
    worst = float(np.abs(gram - np.eye(max_degree + 1)).max())
    notes = []
    if quadrature_nodes < max_degree + 1:
        notes.append("quadrature cannot integrate the highest products exactly")
    return CheckReport(
        "orthonormality",
        {"max_degree": max_degree, "quadrature_nodes": quadrature_nodes},
        worst,
        tol,
        worst < tol,
        notes=notes,
    )


def _fourier_1d(u, wts, x, max_degree):
    # (2 pi)^{-1/2} int e^{-iux} psi_k(u) du for every k <= max_degree and every x
    psi = hermite_table(u, max_degree)
    phase = np.exp(-1j * np.outer(u, x))
    return (psi * wts) @ phase / math.sqrt(2 * math.pi)


def check_fourier_invariance(
    max_total_degree: int = 8,
    q: int = 1,
    tol: float = 1e-6,
    n_points: int = 10,
    half_width: float = 12.0,
    nodes: int = 240,
    seed: int = 0,
) -> CheckReport:
    """Quadrature Fourier transform of psi_k against (-i)^{|k|_1} psi_k."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-3.0, 3.0, size=(n_points, q))
    t, w = np.polynomial.legendre.leggauss(nodes)
    u = half_width * t
    wts = half_width * w
    per_axis = [_fourier_1d(u, wts, xs[:, i], max_total_degree) for i in range(q)]
    direct = [hermite_table(xs[:, i], max_total_degree) for i in range(q)]

    worst = 0.0
    for k in enumerate_indices(q, max_total_degree + 1):
        ft = np.ones(n_points, dtype=complex)
        ref = np.ones(n_points)
        for i in range(q):
            ft = ft * per_axis[i][k[i]]
            ref = ref * direct[i][k[i]]
        ref = ((-1j) ** int(k.sum())) * ref
        worst = max(worst, float(np.abs(ft - ref).max()))
    return CheckReport(
        "fourier_invariance",
        {
            "max_total_degree": max_total_degree,
            "q": q,
            "n_points": n_points,
            "half_width": half_width,
            "nodes": nodes,
            "seed": seed,
        },
        worst,
        tol,
        worst < tol,
    )


def mehler_truncation(r: float, q: int, tail_tol: float = 1e-13) -> int:
    """Smallest J with pi^{-q/2} sum_{t >= J} C(t+q-1, q-1) |r|^t below ``tail_tol``."""
    r = abs(r)
    if r == 0.0:
        return 1
    j = 1
    while True:
        # tail dominated by a geometric series once the ratio settles below 1
        term = math.comb(j + q - 1, q - 1) * r**j
        ratio = r * (j + q) / (j + 1)
        if ratio < 1 and PI_M14 ** (2 * q) * term / (1 - ratio) < tail_tol:
            return j
        j += 1


def mehler_series(y, z, r: float, terms: int) -> float:
    """sum over |j|_1 < terms of psi_j(y) psi_j(z) r^{|j|_1}."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    powers = r ** np.arange(terms)
    graded = None
    for yi, zi in zip(y, z):
        seq = hermite_table(yi, terms - 1) * hermite_table(zi, terms - 1) * powers
        graded = seq if graded is None else np.convolve(graded, seq)[:terms]
    return float(np.sum(graded))


def check_mehler(r_values=(0.2, 0.5, 0.8), q: int = 1, tol: float = 1e-10, n_pairs: int = 6, seed: int = 1) -> CheckReport:
    rng = np.random.default_rng(seed)
    pairs = [(np.zeros(q), np.zeros(q))]
    pairs += [(rng.uniform(-1.5, 1.5, q), rng.uniform(-1.5, 1.5, q)) for _ in range(n_pairs - 1)]
    worst = 0.0
    truncations = {}
    for r in r_values:
        terms = mehler_truncation(r, q)
        truncations[str(r)] = terms
        for y, z in pairs:
            err = abs(mehler_series(y, z, r, terms) - mehler_closed_form(y, z, r))
            worst = max(worst, err)
    return CheckReport(
        "mehler",
        {"r_values": list(r_values), "q": q, "n_pairs": n_pairs, "seed": seed},
        worst,
        tol,
        worst < tol,
        constants={"truncation": truncations},
    )


def _directions(q: int) -> np.ndarray:
    if q == 1:
        return np.array([[1.0], [-1.0]])
    ang = np.arange(8) * (np.pi / 4)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def localization_envelope(n: int, q: int = 1, half_width: float = 2.0, d_max: float = 4.0, samples: int = 200, x_step: float = 0.05):
    """Distances d on [2/n, d_max] and sup |Phi_n(x, x + d u)| over scanned x, u.

    Returns ``(d, raw, envelope)`` where ``envelope`` is the running maximum
    of ``raw`` taken from the far end, hence non-increasing.
    """
    cfg = PioConfig(n, q)
    d = np.linspace(2.0 / n, d_max, samples)
    axis = np.arange(-half_width, half_width + 1e-9, x_step if q == 1 else 4 * x_step)
    xs = np.array(list(product(axis, repeat=q)))
    dirs = _directions(q)
    raw = np.zeros_like(d)
    chunk = max(1, 20000 // (len(xs) * len(dirs)))
    for start in range(0, samples, chunk):
        dd = d[start : start + chunk]
        # (distance, direction, point) flattened
        x_all = np.broadcast_to(xs, (len(dd), len(dirs)) + xs.shape).reshape(-1, q)
        y_all = (xs[None, None] + dd[:, None, None, None] * dirs[None, :, None, :]).reshape(-1, q)
        vals = np.abs(kernel_pairs(cfg, x_all, y_all)).reshape(len(dd), -1)
        raw[start : start + chunk] = vals.max(axis=1)
    envelope = np.maximum.accumulate(raw[::-1])[::-1]
    return d, raw, envelope


def check_localization(n_values=(4, 6, 8), q: int = 1, S_probe: int | None = None, d_max: float = 4.0, min_decay: float = 10.0) -> CheckReport:
    if S_probe is None:
        S_probe = q + 2
    params = {"n_values": list(n_values), "q": q, "S_probe": S_probe, "d_max": d_max, "min_decay": min_decay}
    notes = []
    constants = {}
    passed = True
    worst_decay = None
    for n in n_values:
        if n == 1:
            notes.append("n=1: single-term kernel, localization not meaningful; skipped")
            continue
        d, raw, env = localization_envelope(n, q, d_max=d_max)
        decay = float(env[0] / env[-1]) if env[-1] > 0 else math.inf
        nd = n * d
        a_bound = float(np.max(env * np.maximum(1.0, nd**S_probe)))
        log_a = np.log(env) + S_probe * np.log(nd)
        resid = float(np.sqrt(np.mean((log_a - log_a.mean()) ** 2)))
        monotone = bool(np.all(np.diff(env) <= 0))
        raw_rises = int(np.sum(np.diff(raw) > 0))
        constants[str(n)] = {
            "envelope_start": float(env[0]),
            "envelope_end": float(env[-1]),
            "decay": decay,
            "A_bound": a_bound,
            "A_fit": float(np.exp(log_a.mean())),
            "log_residual": resid,
            "raw_increases": raw_rises,
        }
        ok = monotone and decay >= min_decay
        passed = passed and ok
        worst_decay = decay if worst_decay is None else min(worst_decay, decay)
    return CheckReport("localization", params, worst_decay, min_decay, passed, constants, notes)


def check_diag_floor(n_values=(4, 6, 8), q: int = 1, half_width: float | None = None, step: float = 0.01) -> CheckReport:
    """Minimum of Phi_n(x, x) over a box scan plus a Lipschitz slope estimate.

    The box defaults to ``[-n/2, n/2]^q`` for each n.
    """
    constants = {}
    floors = []
    for n in n_values:
        hw = n / 2.0 if half_width is None else half_width
        h = step if q == 1 else 10 * step
        axis = np.arange(-hw, hw + 1e-9, h)
        pts = np.array(list(product(axis, repeat=q)))
        diag = kernel_diag_points(PioConfig(n, q), pts).reshape((len(axis),) * q)
        slope = 0.0
        for ax in range(q):
            slope = max(slope, float(np.abs(np.diff(diag, axis=ax)).max() / h))
        floor = float(diag.min())
        floors.append(floor)
        constants[str(n)] = {
            "half_width": hw,
            "floor": floor,
            "max": float(diag.max()),
            "lipschitz": slope,
            "lipschitz_scaled": slope * n**q,
        }
    worst = min(floors) if floors else None
    return CheckReport(
        "diag_floor",
        {"n_values": list(n_values), "q": q, "half_width": half_width, "step": step},
        worst,
        0.0,
        bool(floors) and worst > 0,
        constants,
    )


def near_diag_radius(n: int, q: int = 1, y_step: float = 0.05, delta_step: float = 0.01, max_steps: int = 1000):
    """Scan |x - y| = k * delta_step / n around y in [-n/2, n/2]^q.

    Returns ``(rho, rho_strict, worst_excess)``: ``rho`` is the largest scanned
    radius where 0 <= Phi_n(x, y) <= max(Phi_n(x, x), Phi_n(y, y)) everywhere,
    ``rho_strict`` the same for 0 <= Phi_n(x, y) <= Phi_n(y, y), and
    ``worst_excess`` the largest relative excess Phi_n(x, y) / Phi_n(y, y) - 1
    seen up to ``rho``.
    """
    cfg = PioConfig(n, q)
    axis = np.arange(-n / 2.0, n / 2.0 + 1e-9, y_step if q == 1 else 10 * y_step)
    ys = np.array(list(product(axis, repeat=q)))
    dirs = _directions(q)
    dy = kernel_diag_points(cfg, ys)
    chunk = max(1, 20000 // (len(ys) * len(dirs)))

    ok_steps = []
    strict_steps = []
    excess_steps = []
    for start in range(1, max_steps + 1, chunk):
        ks = np.arange(start, min(start + chunk, max_steps + 1))
        deltas = ks * delta_step / n
        xs = (ys[None, None] + deltas[:, None, None, None] * dirs[None, :, None, :]).reshape(-1, q)
        y_all = np.broadcast_to(ys, (len(ks), len(dirs)) + ys.shape).reshape(-1, q)
        dy_all = np.broadcast_to(dy, (len(ks), len(dirs), len(ys))).reshape(-1)
        v = kernel_pairs(cfg, xs, y_all)
        dx = kernel_diag_points(cfg, xs)
        shape = (len(ks), -1)
        ok = ((v >= 0) & (v <= np.maximum(dx, dy_all))).reshape(shape).all(axis=1)
        strict = ((v >= 0) & (v <= dy_all)).reshape(shape).all(axis=1)
        ok_steps.extend(ok.tolist())
        strict_steps.extend(strict.tolist())
        excess_steps.extend((v / dy_all - 1.0).reshape(shape).max(axis=1).tolist())
        if not ok.all():
            break

    def radius(flags):
        count = 0
        for flag in flags:
            if not flag:
                break
            count += 1
        return count * delta_step / n, count

    rho, good = radius(ok_steps)
    rho_strict, _ = radius(strict_steps)
    worst_excess = max(excess_steps[: max(good, 1)])
    return rho, rho_strict, worst_excess


def check_near_diag_sign(n_values=(4, 6, 8), q: int = 1) -> CheckReport:
    constants = {}
    radii = []
    for n in n_values:
        rho, rho_strict, excess = near_diag_radius(n, q)
        radii.append(rho)
        constants[str(n)] = {
            "rho": rho,
            "alpha": rho * n,
            "rho_strict": rho_strict,
            "alpha_strict": rho_strict * n,
            "max_relative_excess": excess,
        }
    notes = [
        "rho uses the upper bound max(Phi(x,x), Phi(y,y)); rho_strict uses Phi(y,y) alone, "
        "which fails at first order wherever the diagonal increases toward x"
    ]
    worst = min(radii) if radii else None
    return CheckReport(
        "near_diag_sign",
        {"n_values": list(n_values), "q": q},
        worst,
        0.0,
        bool(radii) and worst > 0,
        constants,
        notes,
    )


def christoffel_sum_points(u: float, q: int, points) -> np.ndarray:
    """sum over sqrt(|j|_1) < u of psi_j(x)^2 at each row of ``points``."""
    bound = math.ceil(u * u)
    pts = np.asarray(points, dtype=float).reshape(-1, q)
    idx = enumerate_indices(q, bound)
    tables = [hermite_table(pts[:, i], max(bound - 1, 0)) for i in range(q)]
    total = np.zeros(len(pts))
    for k in idx:
        psi = tables[0][k[0]]
        for i in range(1, q):
            psi = psi * tables[i][k[i]]
        total += psi * psi
    return total


def check_growth(u_values=(2, 3, 4, 6, 8), q: int = 1, box_fraction: float = 0.5, step: float = 0.02) -> CheckReport:
    """Fit the u-exponent of max_x and min_x of the Christoffel sum over |x|_inf <= box_fraction * u."""
    maxima, minima = [], []
    for u in u_values:
        hw = box_fraction * u
        h = step if q == 1 else 5 * step
        axis = np.arange(-hw, hw + 1e-9, h)
        pts = np.array(list(product(axis, repeat=q)))
        vals = christoffel_sum_points(u, q, pts)
        maxima.append(float(vals.max()))
        minima.append(float(vals.min()))
    logu = np.log(np.asarray(u_values, dtype=float))
    slope_max = float(np.polyfit(logu, np.log(maxima), 1)[0])
    slope_min = float(np.polyfit(logu, np.log(minima), 1)[0])
    constants = {
        "exponent_max": slope_max,
        "exponent_min": slope_min,
        "upper_constant": float(np.max(np.array(maxima) / np.asarray(u_values, float) ** q)),
        "lower_constant": float(np.min(np.array(minima) / np.asarray(u_values, float) ** q)),
        "maxima": maxima,
        "minima": minima,
    }
    passed = abs(slope_max - q) <= 0.5
    return CheckReport(
        "growth",
        {"u_values": list(u_values), "q": q, "box_fraction": box_fraction, "step": step},
        abs(slope_max - q),
        0.5,
        passed,
        constants,
    )


CHECKS = ("orthonormality", "fourier", "mehler", "localization", "diag_floor", "near_diag", "growth")


def run_suite(q: int = 1, only=None, tolerance: float | None = None) -> list[CheckReport]:
    """Run the default sweep of every check (or the names in ``only``).

    ``tolerance`` overrides the identity checks' tolerances (orthonormality,
    Fourier invariance, Mehler).
    """
    names = list(CHECKS) if not only else list(only)
    unknown = set(names) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}; choose from {CHECKS}")

    def tol(default):
        return default if tolerance is None else tolerance

    reports = []
    for name in names:
        if name == "orthonormality":
            reports.append(check_orthonormality(50, 200, tol=tol(1e-8)))
        elif name == "fourier":
            reports.append(check_fourier_invariance(8, q, tol=tol(1e-6)))
        elif name == "mehler":
            reports.append(check_mehler((0.2, 0.5, 0.8), q, tol=tol(1e-10)))
        elif name == "localization":
            reports.append(check_localization((4, 6, 8), q))
        elif name == "diag_floor":
            reports.append(check_diag_floor((4, 6, 8), q))
        elif name == "near_diag":
            reports.append(check_near_diag_sign((4, 6, 8), q))
        elif name == "growth":
            reports.append(check_growth((2, 3, 4, 6, 8), q))
    return reports
