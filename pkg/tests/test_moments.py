import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermpio.basis import PI_M14, Box, enumerate_indices, hermite_eval_multivariate, hermite_eval_univariate
from hermpio.moments import (
    GriddedDensity,
    MomentSet,
    PerturbationSpec,
    PointMass,
    Scenario,
    as_spatial,
    convert_side,
    moments_from_density,
    moments_from_masses,
    perturb,
)

mpmath.mp.dps = 30


def psi_mp(j, x):
    norm = mpmath.sqrt(mpmath.mpf(2) ** j * mpmath.factorial(j) * mpmath.sqrt(mpmath.pi))
    return mpmath.hermite(j, x) * mpmath.exp(-x * x / 2) / norm


def scenario_1d(*pairs, box=(-4.0, 4.0)):
    return Scenario(1, tuple(PointMass((x,), a) for x, a in pairs), Box((box[0],), (box[1],)))


masses_2d = st.lists(
    st.tuples(
        st.floats(-3, 3),
        st.floats(-3, 3),
        st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
    ),
    min_size=0,
    max_size=4,
)


def scenario_2d(rows):
    return Scenario(2, tuple(PointMass((x, y), a) for x, y, a in rows), Box.cube(-3, 3, 2))


# -- scenarios ---------------------------------------------------------------


def test_scenario_derived_quantities():
    s = Scenario(
        2,
        (PointMass((0.0, 0.0), 1.0), PointMass((3.0, 4.0), -0.5j), PointMass((-1.0, 0.0), 2.0)),
        Box.cube(-5, 5, 2),
    )
    assert s.total_mass == pytest.approx(3.5)
    assert s.min_amplitude == pytest.approx(0.5)
    assert s.min_separation == pytest.approx(1.0)
    assert s.extent == pytest.approx(4.0)


def test_scenario_rejects_mass_outside_box():
    with pytest.raises(ValueError):
        scenario_1d((5.0, 1.0))


def test_scenario_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        Scenario(2, (PointMass((0.0,), 1.0),), Box.cube(-1, 1, 2))


def test_scenario_json_roundtrip():
    s = Scenario(2, (PointMass((0.5, -1.0), 1 - 0.25j),), Box.cube(-4, 4, 2))
    obj = json.loads(json.dumps(s.to_json()))
    assert obj["masses"][0] == {"x": [0.5, -1.0], "a": [1.0, -0.25]}
    assert Scenario.from_json(obj) == s


# -- moments from masses -----------------------------------------------------


def test_single_unit_mass_n1():
    m = moments_from_masses(scenario_1d((0.0, 1.0)), 1)
    assert m.max_total_degree == 1
    assert len(m) == 1
    assert m[(0,)] == pytest.approx(PI_M14, rel=1e-15)


def test_empty_scenario_gives_zeros():
    m = moments_from_masses(scenario_1d(), 5)
    assert len(m) == 25
    assert np.all(m.values == 0)


def test_antisymmetric_pair_has_no_even_moments():
    m = moments_from_masses(scenario_1d((1.0, 1.0), (-1.0, -1.0)), 6)
    even = m.values[::2]
    odd = m.values[1::2]
    assert np.all(np.abs(even) < 1e-15)
    assert np.any(np.abs(odd) > 0.1)


def test_masses_match_direct_evaluation():
    s = scenario_2d([(0.5, -1.0, 1.0), (-2.0, 1.5, 0.3 + 0.4j)])
    m = moments_from_masses(s, 4)
    for k in [(0, 0), (3, 2), (0, 15), (7, 8)]:
        want = sum(pm.amplitude * hermite_eval_multivariate(pm.location, k) for pm in s.masses)
        assert m[k] == pytest.approx(want, rel=1e-13, abs=1e-15)


@given(masses_2d, masses_2d)
@settings(max_examples=30, deadline=None)
def test_linearity(a, b):
    ma = moments_from_masses(scenario_2d(a), 3)
    mb = moments_from_masses(scenario_2d(b), 3)
    mab = moments_from_masses(scenario_2d(a + b), 3)
    scale = max(1.0, np.abs(mab.values).max())
    assert np.max(np.abs((ma + mb).values - mab.values)) < 1e-12 * scale


@given(masses_2d, st.randoms(use_true_random=False))
@settings(max_examples=30, deadline=None)
def test_permutation_invariance_is_bitwise(rows, rnd):
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a = moments_from_masses(scenario_2d(rows), 3)
    b = moments_from_masses(scenario_2d(shuffled), 3)
    assert a.equals(b)


def test_bad_scale():
    with pytest.raises(ValueError):
        moments_from_masses(scenario_1d(), 0)


# -- moment sets -------------------------------------------------------------


def test_lookup_and_missing_index():
    m = moments_from_masses(scenario_2d([(0.1, 0.2, 1.0)]), 3)
    assert m[(1, 1)] == m.values[4]
    with pytest.raises(KeyError):
        m[(9, 0)]


def test_values_are_read_only():
    m = MomentSet.zeros(1, 4)
    with pytest.raises(ValueError):
        m.values[0] = 1.0


def test_wrong_value_count_rejected():
    with pytest.raises(ValueError):
        MomentSet(1, "spatial", 4, np.zeros(3))


def test_non_finite_values_rejected():
    with pytest.raises(ValueError):
        MomentSet(1, "spatial", 2, [1.0, math.nan])


def test_from_mapping_fills_zeros():
    m = MomentSet.from_mapping(2, "spatial", 3, {(1, 1): 2.0})
    assert m[(1, 1)] == 2.0
    assert np.count_nonzero(m.values) == 1


@given(masses_2d)
@settings(max_examples=20, deadline=None)
def test_json_roundtrip_is_bitwise(rows):
    m = moments_from_masses(scenario_2d(rows), 3)
    back = MomentSet.from_json(json.loads(m.dumps()))
    assert back.equals(m)


def test_json_layout():
    m = moments_from_masses(scenario_2d([(0.5, -1.0, 1.0)]), 2)
    obj = m.to_json()
    assert obj["q"] == 2 and obj["side"] == "spatial" and obj["max_total_degree"] == 4
    assert [e["k"] for e in obj["values"]][:4] == [[0, 0], [0, 1], [1, 0], [0, 2]]
    assert len(obj["values"][0]["v"]) == 2


# -- side conversion ---------------------------------------------------------


def test_fourier_factor_degree_two_q1():
    m = MomentSet.from_mapping(1, "spatial", 3, {(2,): 0.7})
    f = convert_side(m)
    assert f.side == "fourier"
    assert f[(2,)] == pytest.approx(-math.sqrt(2 * math.pi) * 0.7, rel=1e-15)


def test_fourier_factor_degree_zero_q2():
    f = convert_side(MomentSet.from_mapping(2, "spatial", 1, {(0, 0): 1.0}))
    assert f[(0, 0)] == pytest.approx(2 * math.pi, rel=1e-15)


def test_fourier_factor_cycles_through_units():
    m = MomentSet.from_mapping(1, "spatial", 5, {(k,): 1.0 for k in range(5)})
    f = convert_side(m).values / math.sqrt(2 * math.pi)
    assert np.allclose(f, [1, -1j, -1, 1j, 1], rtol=1e-15, atol=0)


@given(masses_2d)
@settings(max_examples=20, deadline=None)
def test_conversion_involution_in_memory(rows):
    m = moments_from_masses(scenario_2d(rows), 3)
    assert convert_side(convert_side(m)).equals(m)
    assert as_spatial(convert_side(m)).equals(m)


@given(masses_2d)
@settings(max_examples=20, deadline=None)
def test_conversion_roundtrip_through_files(rows):
    # reloaded data carry no memory of their origin; binary64 scaling is exact to an ulp
    m = moments_from_masses(scenario_2d(rows), 3)
    f = MomentSet.from_json(json.loads(convert_side(m).dumps()))
    back = convert_side(f)
    scale = np.maximum(np.abs(m.values), 1e-300)
    assert np.all(np.abs(back.values - m.values) <= 1e-15 * scale)


def test_as_spatial_leaves_spatial_alone():
    m = MomentSet.zeros(1, 3)
    assert as_spatial(m) is m


# -- perturbation ------------------------------------------------------------


def unit_origin_n1():
    return moments_from_masses(scenario_1d((0.0, 1.0)), 1)


def test_perturb_none_unchanged():
    m = moments_from_masses(scenario_1d((0.3, 1.0)), 4)
    p = perturb(m, PerturbationSpec())
    assert p.equals(m)
    assert p.diagnostics["noise_max"] == 0.0


def test_perturb_zero_disk_unchanged():
    m = moments_from_masses(scenario_1d((0.3, 1.0)), 4)
    assert perturb(m, PerturbationSpec("uniform_disk", 0.0, 5)).equals(m)


def test_perturb_fixed_table():
    p = perturb(unit_origin_n1(), PerturbationSpec("fixed_table", 0.01, table={(0,): 0.01}))
    assert p[(0,)] == PI_M14 + 0.01
    assert p.diagnostics["noise_max"] == pytest.approx(0.01)


def test_perturb_fixed_table_unknown_index():
    with pytest.raises(ValueError):
        perturb(unit_origin_n1(), PerturbationSpec("fixed_table", 0.1, table={(3,): 0.1}))


@given(st.floats(1e-6, 1.0), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_disk_noise_bounded_and_seeded(eps, seed):
    m = moments_from_masses(scenario_1d((0.3, 1.0)), 5)
    spec = PerturbationSpec("uniform_disk", eps, seed)
    a = perturb(m, spec)
    b = perturb(m, spec)
    assert a.equals(b)
    assert a.diagnostics["noise_max"] <= eps
    assert np.all(np.abs(a.values - m.values) <= eps * (1 + 1e-15))


def test_disk_noise_fills_the_disk():
    m = MomentSet.zeros(1, 4000)
    e = perturb(m, PerturbationSpec("uniform_disk", 1.0, 3)).values
    r = np.abs(e)
    # uniform on the disk: P(r < 1/2) = 1/4
    assert abs(np.mean(r < 0.5) - 0.25) < 0.03
    assert abs(np.mean(e.real > 0) - 0.5) < 0.03


def test_parse_noise_spec():
    spec = PerturbationSpec.parse("uniform_disk:0.01:7")
    assert (spec.kind, spec.magnitude, spec.seed) == ("uniform_disk", 0.01, 7)
    assert PerturbationSpec.parse("none").kind == "none"
    with pytest.raises(ValueError):
        PerturbationSpec.parse("gaussian:0.1")


def test_negative_noise_rejected():
    with pytest.raises(ValueError):
        PerturbationSpec("uniform_disk", -1.0)


# -- densities ---------------------------------------------------------------


def test_zero_density():
    m = moments_from_density(lambda p: np.zeros(len(p)), 3, box=Box.cube(-2, 2, 1))
    assert np.all(m.values == 0)


def test_psi0_density_orthonormality():
    m = moments_from_density(lambda p: PI_M14 * np.exp(-0.5 * p[:, 0] ** 2), 2, box=Box.cube(-8, 8, 1))
    assert abs(m[(0,)] - 1) < 1e-6
    assert np.max(np.abs(m.values[1:])) < 1e-6


def gaussian(sigma):
    return lambda p: np.exp(-0.5 * (p[:, 0] / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def gaussian_moment_oracle(k, sigma):
    s = mpmath.mpf(sigma)
    f = lambda u: psi_mp(k, u) * mpmath.exp(-u * u / (2 * s * s)) / (s * mpmath.sqrt(2 * mpmath.pi))
    return float(mpmath.quad(f, [-12 * s, 0, 12 * s]))


def test_narrow_gaussian_density():
    sigma = 0.01
    m = moments_from_density(gaussian(sigma), 4, box=Box.cube(-0.3, 0.3, 1))
    psi0 = hermite_eval_univariate(0.0, 9)
    for k in range(10):
        assert abs(m[(k,)] - gaussian_moment_oracle(k, sigma)) < 1e-10
        assert abs(m[(k,)] - psi0[k]) < 1e-3


def test_gridded_density_against_quadrature_oracle():
    sigma = 0.5
    box = Box.cube(-6, 6, 1)
    x = np.linspace(-6, 6, 241)
    dens = GriddedDensity(box, np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi)))
    m = moments_from_density(dens, 3)
    for k in range(9):
        assert abs(m[(k,)] - gaussian_moment_oracle(k, sigma)) < 1e-4


def test_gridded_density_2d_product():
    sigma = 0.5
    box = Box.cube(-5, 5, 2)
    x = np.linspace(-5, 5, 101)
    g = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    m = moments_from_density(GriddedDensity(box, np.outer(g, g)), 2)
    one = [gaussian_moment_oracle(k, sigma) for k in range(4)]
    for k in enumerate_indices(2, 4):
        assert abs(m[tuple(k)] - one[k[0]] * one[k[1]]) < 1e-4


def test_gridded_density_too_coarse():
    box = Box.cube(-4, 4, 1)
    dens = GriddedDensity(box, np.ones(9))
    with pytest.raises(ValueError):
        moments_from_density(dens, 6)


def test_gridded_density_json_roundtrip():
    dens = GriddedDensity(Box.cube(-1, 1, 2), np.arange(12.0).reshape(3, 4))
    back = GriddedDensity.from_json(json.loads(json.dumps(dens.to_json())))
    assert back.box == dens.box
    assert np.array_equal(back.values, dens.values)


def test_callable_density_needs_box():
    with pytest.raises(ValueError):
        moments_from_density(lambda p: p[:, 0], 2)
