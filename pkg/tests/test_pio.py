import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermpio.basis import PI_M14, Box
from hermpio.filters import FilterSpec
from hermpio.moments import MomentSet, PointMass, Scenario, convert_side, moments_from_masses
from hermpio.pio import (
    GridEvaluation,
    PioConfig,
    kernel_diag,
    kernel_diag_points,
    kernel_eval,
    kernel_pairs,
    lattice_axes,
    pio_eval,
    pio_eval_grid,
    pio_eval_lattice,
    pio_eval_points,
)

mpmath.mp.dps = 30


def kernel_oracle(n, x, y):
    """Direct high-precision sum of the filtered kernel in one dimension."""
    H = FilterSpec()
    total = mpmath.mpf(0)
    for j in range(n * n):
        w = H(math.sqrt(j) / n)
        if w == 0:
            continue
        pj = lambda t: mpmath.hermite(j, t) * mpmath.exp(-t * t / 2) / mpmath.sqrt(
            mpmath.mpf(2) ** j * mpmath.factorial(j) * mpmath.sqrt(mpmath.pi)
        )
        total += mpmath.mpf(w) * pj(mpmath.mpf(x)) * pj(mpmath.mpf(y))
    return float(total / n)


def unit_mass(y, box=4.0):
    y = tuple(np.atleast_1d(y).astype(float))
    return Scenario(len(y), (PointMass(y, 1.0),), Box.cube(-box, box, len(y)))


def three_spikes_2d():
    return Scenario(
        2,
        (
            PointMass((-1.5, -1.0), 1.0),
            PointMass((1.2, 0.8), 0.8),
            PointMass((-0.3, 1.9), -0.9 + 0.3j),
        ),
        Box.cube(-4, 4, 2),
    )


# -- pointwise operator ------------------------------------------------------


def test_zero_moments_give_zero():
    cfg = PioConfig(5, 2)
    assert pio_eval(cfg, MomentSet.zeros(2, 25), (0.3, -1.0)) == 0


def test_n1_single_term():
    cfg = PioConfig(1, 1)
    m = moments_from_masses(unit_mass(0.0), 1)
    assert pio_eval(cfg, m, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    x = 0.8
    want = PI_M14 * PI_M14 * math.exp(-x * x / 2)
    assert pio_eval(cfg, m, x) == pytest.approx(want, rel=1e-15)


@pytest.mark.parametrize("q,y,x", [(1, 0.7, -0.2), (2, (0.5, -1.0), (0.1, 0.2))])
def test_delta_moments_equal_kernel_exactly(q, y, x):
    cfg = PioConfig(6, q)
    m = moments_from_masses(unit_mass(y), 6)
    assert pio_eval(cfg, m, x) == complex(kernel_eval(cfg, x, y))


def test_needs_enough_moments():
    with pytest.raises(ValueError):
        pio_eval(PioConfig(5, 1), MomentSet.zeros(1, 16), 0.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        pio_eval(PioConfig(2, 2), MomentSet.zeros(1, 4), 0.0)
    with pytest.raises(ValueError):
        pio_eval(PioConfig(2, 1), MomentSet.zeros(1, 4), (0.0, 1.0))


def test_bad_scale():
    with pytest.raises(ValueError):
        PioConfig(0, 1)


def test_fourier_input_is_converted():
    cfg = PioConfig(4, 1)
    m = moments_from_masses(unit_mass(0.4), 4)
    assert pio_eval(cfg, convert_side(m), 0.1) == pio_eval(cfg, m, 0.1)


def test_weights_carry_scale_factor():
    cfg = PioConfig(4, 2)
    assert cfg.weights[0] == 1 / 16
    assert np.all(cfg.weights >= 0)
    assert len(cfg.weights) == math.comb(16 - 1 + 2, 2)


masses_1d = st.lists(
    st.tuples(st.floats(-3, 3), st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)),
    max_size=4,
)


@given(masses_1d, st.floats(-4, 4))
@settings(max_examples=30, deadline=None)
def test_superposition(rows, x):
    n = 6
    cfg = PioConfig(n, 1)
    s = Scenario(1, tuple(PointMass((p,), a) for p, a in rows), Box.cube(-3, 3, 1))
    got = pio_eval(cfg, moments_from_masses(s, n), x)
    want = sum(a * kernel_eval(cfg, x, p) for p, a in rows)
    assert abs(got - want) < 1e-10


@given(masses_1d, masses_1d, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
@settings(max_examples=30, deadline=None)
def test_linearity(ra, rb, alpha):
    n = 5
    cfg = PioConfig(n, 1)
    box = Box.cube(-3, 3, 1)
    ma = moments_from_masses(Scenario(1, tuple(PointMass((p,), a) for p, a in ra), box), n)
    mb = moments_from_masses(Scenario(1, tuple(PointMass((p,), a) for p, a in rb), box), n)
    xs = np.linspace(-3, 3, 7).reshape(-1, 1)
    lhs = pio_eval_points(cfg, alpha * ma + mb, xs)
    rhs = alpha * pio_eval_points(cfg, ma, xs) + pio_eval_points(cfg, mb, xs)
    scale = max(1.0, np.abs(rhs).max())
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * scale


def test_compensated_summation_agrees():
    m = moments_from_masses(three_spikes_2d(), 8)
    pts = np.array([[-1.5, -1.0], [0.0, 0.0], [2.0, -3.0]])
    plain = pio_eval_points(PioConfig(8, 2), m, pts)
    comp = pio_eval_points(PioConfig(8, 2, compensated=True), m, pts)
    assert np.max(np.abs(plain - comp)) < 1e-13


# -- kernel ------------------------------------------------------------------


@given(st.floats(-6, 6), st.floats(-6, 6), st.integers(1, 8))
@settings(max_examples=50, deadline=None)
def test_kernel_symmetric_bitwise(x, y, n):
    cfg = PioConfig(n, 1)
    assert kernel_eval(cfg, x, y) == kernel_eval(cfg, y, x)


def test_kernel_symmetric_bitwise_2d():
    cfg = PioConfig(6, 2)
    rng = np.random.default_rng(4)
    xs, ys = rng.uniform(-3, 3, (2, 50, 2))
    assert np.array_equal(kernel_pairs(cfg, xs, ys), kernel_pairs(cfg, ys, xs))


def test_kernel_n1():
    cfg = PioConfig(1, 1)
    x, y = 0.3, -1.4
    want = PI_M14**2 * math.exp(-(x * x + y * y) / 2)
    assert kernel_eval(cfg, x, y) == pytest.approx(want, rel=1e-15)
    assert kernel_diag(cfg, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)


@pytest.mark.parametrize("x,y", [(0.0, 0.0), (0.0, 3.0), (1.2, 0.4), (-2.5, 2.5)])
def test_kernel_against_direct_oracle(x, y):
    assert kernel_eval(PioConfig(6, 1), x, y) == pytest.approx(kernel_oracle(6, x, y), rel=1e-12, abs=1e-15)


PHI6_RATIO = 0.005509696798136421  # |Phi_6(0,3)| / Phi_6(0,0), direct summation


def test_kernel_ratio_at_distance_three_frozen():
    cfg = PioConfig(6, 1)
    ratio = abs(kernel_eval(cfg, 0.0, 3.0)) / kernel_eval(cfg, 0.0, 0.0)
    oracle = abs(kernel_oracle(6, 0.0, 3.0)) / kernel_oracle(6, 0.0, 0.0)
    assert ratio == pytest.approx(oracle, rel=1e-10)
    assert ratio == pytest.approx(PHI6_RATIO, rel=1e-10)
    assert ratio < 1e-2


@pytest.mark.xfail(strict=True, reason="the ratio is about 5.5e-3; the stated 1e-3 is too optimistic")
def test_kernel_ratio_below_one_thousandth():
    cfg = PioConfig(6, 1)
    assert abs(kernel_eval(cfg, 0.0, 3.0)) / kernel_eval(cfg, 0.0, 0.0) < 1e-3


@given(st.floats(-20, 20), st.integers(1, 9))
@settings(max_examples=50, deadline=None)
def test_diag_nonnegative(x, n):
    assert kernel_diag(PioConfig(n, 1), x) >= 0


def test_diag_positive_on_central_box_n6():
    x = np.arange(-3.0, 3.0 + 1e-9, 1e-3)
    d = kernel_diag_points(PioConfig(6, 1), x)
    assert d.min() > 0.25


def envelope_restricted(n, step=0.01, samples=120):
    """sup |Phi_n(x, x + d)| over x, x + d in [-2, 2], for d in [2/n, 2]."""
    cfg = PioConfig(n, 1)
    x = np.arange(-2, 2 + 1e-9, step)
    ds = np.linspace(2.0 / n, 2.0, samples)
    sup = []
    for d in ds:
        xx = x[x + d <= 2 + 1e-12]
        sup.append(np.abs(kernel_pairs(cfg, xx, xx + d)).max())
    return np.array(sup)


@pytest.mark.parametrize("n", [6, 8])
def test_restricted_envelope_decays_tenfold(n):
    sup = envelope_restricted(n)
    env = np.maximum.accumulate(sup[::-1])[::-1]
    assert np.all(np.diff(env) <= 0)
    assert env[0] / env[-1] >= 10


@pytest.mark.xfail(strict=True, reason="at n=4 the drop over d in [1/2, 2] inside [-2, 2] is only about 4.9x")
def test_restricted_envelope_decays_tenfold_n4():
    sup = envelope_restricted(4)
    env = np.maximum.accumulate(sup[::-1])[::-1]
    assert env[0] / env[-1] >= 10


@pytest.mark.xfail(strict=True, reason="sidelobes make the raw distance profile oscillate; only its upper envelope is monotone")
def test_raw_distance_profile_monotone():
    assert np.all(np.diff(envelope_restricted(6)) <= 0)


# -- grids -------------------------------------------------------------------


def test_lattice_axes_include_endpoint():
    axes = lattice_axes(Box((-1.0, 0.0), (1.0, 0.5)), 0.25)
    assert len(axes[0]) == 9 and len(axes[1]) == 3
    assert axes[0][-1] == 1.0


def test_one_node_grid():
    cfg = PioConfig(4, 2)
    m = moments_from_masses(Scenario(2, (PointMass((0.2, 0.1), 1.0),), Box.cube(-1, 1, 2)), 4)
    grid = pio_eval_grid(cfg, m, Box((0.5, -0.5), (0.5, -0.5)), 0.1)
    assert grid.node_count == 1
    assert grid.values.reshape(-1)[0] == pio_eval(cfg, m, (0.5, -0.5))


def test_zero_moments_zero_grid():
    grid = pio_eval_grid(PioConfig(3, 1), MomentSet.zeros(1, 9), Box.cube(-2, 2, 1), 0.1)
    assert np.all(grid.values == 0)
    assert grid.max_modulus == 0


def test_node_cap():
    with pytest.raises(ValueError, match="cap"):
        pio_eval_grid(PioConfig(2, 2), MomentSet.zeros(2, 4), Box.cube(-4, 4, 2), 0.001)


@pytest.fixture(scope="module")
def big_grid():
    cfg = PioConfig(8, 2)
    m = moments_from_masses(three_spikes_2d(), 8)
    grid = pio_eval_grid(cfg, m, Box.cube(-4, 4, 2), 8 / 199)
    return cfg, m, grid


def test_grid_shape(big_grid):
    _, _, grid = big_grid
    assert grid.values.shape == (200, 200)


def test_grid_matches_pointwise_at_random_nodes(big_grid):
    cfg, m, grid = big_grid
    rng = np.random.default_rng(0)
    nodes = rng.integers(0, 200, (100, 2))
    pts = grid.coords(nodes)
    point = np.array([pio_eval(cfg, m, p) for p in pts])
    assert np.array_equal(point, grid.values[nodes[:, 0], nodes[:, 1]])


def test_grid_max_matches_pointwise_max(big_grid):
    cfg, m, grid = big_grid
    every = pio_eval_points(cfg, m, grid.all_coords())
    assert abs(np.abs(every).max() - grid.max_modulus) <= 1e-12
    assert np.array_equal(every, grid.values.reshape(-1))


@pytest.mark.parametrize("workers", [2, 3, 7])
def test_worker_count_is_invisible(big_grid, workers):
    cfg, m, grid = big_grid
    again = pio_eval_lattice(cfg, m, grid.axes, workers=workers)
    assert np.array_equal(again, grid.values)


def test_csv_export():
    cfg = PioConfig(3, 1)
    m = moments_from_masses(unit_mass(0.0), 3)
    grid = pio_eval_grid(cfg, m, Box.cube(-1, 1, 1), 0.5)
    lines = grid.to_csv().strip().split("\n")
    assert lines[0] == "x1,re,im,abs"
    assert len(lines) == 6
    x, re, im, ab = (float(v) for v in lines[3].split(","))
    assert x == 0.0 and re == grid.values[2].real and ab == abs(grid.values[2])


def test_gnuplot_scripts():
    g1 = GridEvaluation([np.zeros(2)], 0.1, np.zeros(2, complex))
    assert "plot 'd.csv'" in g1.gnuplot_script("d.csv")
    g2 = GridEvaluation([np.zeros(2), np.zeros(3)], 0.1, np.zeros((2, 3), complex))
    assert "splot 'd.csv'" in g2.gnuplot_script("d.csv")
    g3 = GridEvaluation([np.zeros(1)] * 3, 0.1, np.zeros((1, 1, 1), complex))
    with pytest.raises(ValueError):
        g3.gnuplot_script("d.csv")
