import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projgraph import autodiff as ad
from projgraph import manifolds as mf
from projgraph.checks import random_points
from projgraph.errors import CurvatureSignError, DimensionError, DomainError
from projgraph.manifolds import ComponentSpec, SpaceKind


def test_space_kind_has_exactly_five_tags():
    assert sorted(k.value for k in SpaceKind) == list("DEHPS")
    for letter in "DEHPS":
        assert SpaceKind.parse(letter).value == letter
    for bad in ("Q", "e", "", "EH"):
        with pytest.raises(ValueError):
            SpaceKind.parse(bad)


@pytest.mark.parametrize("kind, K", [("E", 1.0), ("H", 1.0), ("P", 0.0), ("S", -1.0), ("D", 0.0)])
def test_component_spec_rejects_wrong_sign(kind, K):
    with pytest.raises(CurvatureSignError):
        ComponentSpec(SpaceKind(kind), 2, K)


def test_component_ambient_dims_and_defaults():
    assert ComponentSpec(SpaceKind.HYPERBOLOID, 2).ambient_dim == 3
    assert ComponentSpec(SpaceKind.HYPERSPHERE, 4).ambient_dim == 5
    assert ComponentSpec(SpaceKind.POINCARE, 2).ambient_dim == 2
    assert ComponentSpec(SpaceKind.POINCARE, 2).curvature == -1.0
    assert ComponentSpec(SpaceKind.STEREO_SPHERE, 2).curvature == 1.0
    assert ComponentSpec(SpaceKind.EUCLIDEAN, 2).curvature == 0.0


def test_lorentz_inner_examples():
    assert mf.lorentz_inner([1, 0, 0], [1, 0, 0]) == -1.0
    assert mf.lorentz_inner([1, 0, 0], [0, 1, 0]) == 0.0
    v = mf.lorentz_inner([math.cosh(1), math.sinh(1), 0], [1, 0, 0])
    assert v == pytest.approx(-1.543081, abs=1e-6)
    with pytest.raises(DimensionError):
        mf.lorentz_inner([1, 0, 0], [1, 0])


def test_poincare_examples():
    assert mf.dist_poincare([0, 0], [0.5, 0], -1.0) == pytest.approx(math.log(3), abs=1e-12)
    assert mf.dist_poincare([0.3, 0.1], [0.3, 0.1], -1.0) == 0.0
    d = mf.dist_poincare([0.1, 0.2], [0.3, 0.1], -1e-8)
    assert d == pytest.approx(2 * math.sqrt(0.05), abs=1e-6)
    # the limit is also approached continuously just above the switch
    assert mf.dist_poincare([0.1, 0.2], [0.3, 0.1], -1e-6) == pytest.approx(0.447214, abs=1e-6)


def test_poincare_errors():
    with pytest.raises(DomainError):
        mf.dist_poincare([1.0, 0], [0, 0], -1.0)
    with pytest.raises(DomainError):
        mf.dist_poincare([0.0, 0], [0.6, 0], -4.0)
    with pytest.raises(CurvatureSignError):
        mf.dist_poincare([0, 0], [0.1, 0], 0.0)


def test_stereo_sphere_examples():
    assert mf.dist_stereo_sphere([0, 0], [1, 0], 1.0) == pytest.approx(math.pi / 2, abs=1e-12)
    assert mf.dist_stereo_sphere([2.0, -3.0], [2.0, -3.0], 1.0) == 0.0
    assert mf.dist_stereo_sphere([0.1, 0.2], [0.3, 0.1], 1e-8) == pytest.approx(0.447214, abs=1e-6)
    with pytest.raises(CurvatureSignError):
        mf.dist_stereo_sphere([0, 0], [1, 0], -1.0)


def test_hyperboloid_examples():
    y = [math.cosh(1), math.sinh(1), 0]
    assert mf.dist_hyperboloid([1, 0, 0], y, -1.0) == pytest.approx(1.0, abs=1e-12)
    assert mf.dist_hyperboloid(y, y, -1.0) == 0.0
    y4 = [0.5 * math.cosh(1), 0.5 * math.sinh(1), 0]
    assert mf.dist_hyperboloid([0.5, 0, 0], y4, -4.0) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DomainError):
        mf.dist_hyperboloid([2.0, 0, 0], y, -1.0)


def test_hypersphere_examples():
    assert mf.dist_hypersphere([1, 0, 0], [0, 1, 0], 1.0) == pytest.approx(math.pi / 2, abs=1e-12)
    assert mf.dist_hypersphere([0, 1, 0], [0, 1, 0], 1.0) == 0.0
    assert mf.dist_hypersphere([1, 0, 0], [-1, 0, 0], 1.0) == pytest.approx(math.pi, abs=1e-12)
    with pytest.raises(DomainError):
        mf.dist_hypersphere([1, 1, 0], [1, 0, 0], 1.0)


def test_exp_map_examples():
    assert np.allclose(mf.exp_map("P", [1.0, 0.0], -1.0), [math.tanh(1), 0], atol=1e-12)
    assert np.allclose(mf.exp_map("D", [math.pi / 4, 0.0], 1.0), [1.0, 0.0], atol=1e-12)
    assert np.allclose(mf.exp_map("H", [1.0, 0.0], -1.0), [math.cosh(1), math.sinh(1), 0], atol=1e-12)
    assert np.array_equal(mf.exp_map("E", [3.0, -1.0], 0.0), [3.0, -1.0])


@pytest.mark.parametrize("kind, K", [("E", 0.0), ("P", -2.0), ("D", 0.5), ("H", -0.25), ("S", 4.0)])
def test_exp_map_of_zero_is_base_point(kind, K):
    out = mf.exp_map(kind, np.zeros(3), K)
    assert np.array_equal(out, mf.base_point(kind, 3, K))


def test_exp_map_rejects_sign_mismatch():
    with pytest.raises(CurvatureSignError):
        mf.exp_map("P", [0.1, 0.2], 1.0)


def test_stereo_exp_map_is_clamped_and_monotone():
    radii = np.linspace(0.5, 10.0, 50)
    out = mf.exp_map("D", np.stack([radii, np.zeros_like(radii)], axis=1), 1.0)
    assert np.all(np.isfinite(out))
    assert np.all(np.diff(out[:, 0]) >= 0)
    assert out[-1, 0] == pytest.approx(math.tan(mf.STEREO_MAX_ANGLE))


def test_check_membership_examples():
    assert mf.check_membership(np.array([1.0, 0, 0]), "H", -1.0, 1e-8)
    assert mf.check_membership(np.array([0.99, 0]), "P", -1.0, 1e-8)
    assert not mf.check_membership(np.array([1.01, 0]), "P", -1.0, 1e-8)
    assert not mf.check_membership(np.array([1.0, 0]), "P", -1.0, 1e-8)
    assert not mf.check_membership(np.array([-1.0, 0, 0]), "H", -1.0, 1e-8)
    assert mf.check_membership(np.array([0.0, 0.6, 0.8]), "S", 1.0, 1e-8)
    assert not mf.check_membership(np.array([np.nan, 0]), "D", 1.0, 1e-8)
    assert mf.check_membership(np.array([1e6, -1e6]), "D", 1.0, 1e-8)


def test_distance_dispatch_matches_specific_functions(rng):
    x, y = rng.uniform(-0.4, 0.4, (2, 5, 2))
    assert np.array_equal(mf.distance("P", x, y, -1.0), mf.dist_poincare(x, y, -1.0))
    assert np.array_equal(mf.distance("E", x, y), np.linalg.norm(x - y, axis=-1))


# -- property tests --------------------------------------------------------

kinds = st.sampled_from(["P", "D", "H", "S"])
mags = st.sampled_from([0.25, 1.0, 4.0])


@settings(max_examples=60, deadline=None)
@given(kind=kinds, mag=mags, seed=st.integers(0, 2**32 - 1))
def test_metric_axioms_property(kind, mag, seed):
    K = SpaceKind(kind).sign * mag
    r = np.random.default_rng(seed)
    x, y, z = (random_points(kind, K, 20, 2, r) for _ in range(3))
    dxy = mf.distance(kind, x, y, K)
    assert np.all(dxy >= 0)
    assert np.array_equal(dxy, mf.distance(kind, y, x, K))
    assert np.all(mf.distance(kind, x, x, K) <= 1e-10)
    assert np.all(mf.distance(kind, x, z, K) <= dxy + mf.distance(kind, y, z, K) + 1e-9)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(list("EHSPD")), mag=mags,
       v=st.lists(st.floats(-20, 20), min_size=3, max_size=3))
def test_exp_map_containment_property(kind, mag, v):
    K = SpaceKind(kind).sign * mag
    p = mf.exp_map(kind, np.array(v), K)
    assert mf.check_membership(p, kind, K, 1e-8)
    if kind == "P":
        assert np.sum(p * p) < -1.0 / K


@settings(max_examples=50, deadline=None)
@given(lam=st.floats(0.1, 10.0), seed=st.integers(0, 2**32 - 1))
def test_poincare_curvature_rescaling_property(lam, seed):
    r = np.random.default_rng(seed)
    x, y = random_points("P", -1.0, 2, 2, r)
    base = mf.dist_poincare(x, y, -1.0)
    scaled = mf.dist_poincare(math.sqrt(lam) * x, math.sqrt(lam) * y, -1.0 / lam) / math.sqrt(lam)
    assert abs(base - scaled) <= 1e-9


@pytest.mark.parametrize("kind", ["P", "D"])
def test_zero_curvature_limit(kind):
    r = np.random.default_rng(0)
    x, y = r.uniform(-0.5, 0.5, (2, 1000, 2))
    flat = 2 * np.linalg.norm(x - y, axis=1)
    gaps = []
    for mag in (1e-2, 1e-4, 1e-6):
        d = mf.distance(kind, x, y, SpaceKind(kind).sign * mag)
        gap = np.max(np.abs(d - flat) / np.maximum(flat, 1e-12))
        assert gap <= 10 * mag
        gaps.append(gap)
    assert gaps[0] > gaps[1] > gaps[2]


def test_angle_preservation_near_origin():
    r = np.random.default_rng(1)
    u, v = r.standard_normal((2, 200, 2)) * 1e-4
    pu, pv = mf.exp_map("P", u, -1.0), mf.exp_map("P", v, -1.0)

    def angle(a, b):
        c = np.sum(a * b, 1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        return np.arccos(np.clip(c, -1, 1))

    assert np.max(np.abs(angle(pu, pv) - angle(u, v))) <= 1e-6


# -- gradients -------------------------------------------------------------

def _fd_cases():
    return [("P", -1.0), ("P", -0.3), ("D", 1.0), ("D", 2.5), ("H", -1.0), ("H", -4.0),
            ("S", 1.0), ("S", 0.25), ("E", 0.0)]


@pytest.mark.parametrize("kind, K", _fd_cases())
def test_distance_gradients_match_finite_differences(kind, K):
    """Points are parametrised by tangent vectors so H/S stay on the manifold."""
    r = np.random.default_rng(7)
    sign = SpaceKind(kind).sign
    for _ in range(10):
        u, v = r.standard_normal((2, 2)) * 0.6
        x0 = np.concatenate([u, v, [abs(K)]])

        def f(z):
            Kz = 0.0 if sign == 0 else sign * ad.index(z, 4)
            a = mf.exp_map(kind, ad.index(z, slice(0, 2)), Kz)
            b = mf.exp_map(kind, ad.index(z, slice(2, 4)), Kz)
            return mf.distance(kind, a, b, Kz)

        assert ad.finite_diff_check(f, x0) <= 1e-4


@pytest.mark.parametrize("kind, K", [("P", -1.0), ("D", 1.0)])
def test_projected_distance_gradient_wrt_ambient_points(kind, K):
    r = np.random.default_rng(2)
    for _ in range(10):
        x0 = np.concatenate([r.uniform(-0.4, 0.4, 4), [abs(K)]])
        sign = SpaceKind(kind).sign

        def f(z):
            return mf.distance(kind, ad.index(z, slice(0, 2)), ad.index(z, slice(2, 4)), sign * ad.index(z, 4))

        assert ad.finite_diff_check(f, x0) <= 1e-4


def test_poincare_curvature_derivative_example():
    tape = ad.Tape()
    K = tape.variable(-1.0)
    d = mf.dist_poincare(np.zeros(2), np.array([0.5, 0.0]), K)
    g = float(tape.backward(d)[K])
    h = 1e-5
    central = (mf.dist_poincare([0, 0], [0.5, 0], -1 + h) - mf.dist_poincare([0, 0], [0.5, 0], -1 - h)) / (2 * h)
    assert abs(g - central) / abs(central) <= 1e-6


def test_coincident_points_have_finite_zero_gradient():
    tape = ad.Tape()
    x = tape.variable([0.2, 0.1])
    d = mf.dist_poincare(x, np.array([0.2, 0.1]), -1.0)
    assert np.all(np.isfinite(tape.backward(d)[x]))
