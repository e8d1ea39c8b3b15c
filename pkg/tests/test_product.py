import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projgraph import autodiff as ad
from projgraph import manifolds as mf
from projgraph.checks import brute_force_product_dist, random_signature
from projgraph.errors import DimensionError, DomainError, SignatureParseError
from projgraph.manifolds import ComponentSpec, SpaceKind
from projgraph.product import (
    ManifoldSignature, ProductPoint, pairwise_product_dist, parse_signature, product_dist, product_exp,
)


def test_parse_signature_ehp():
    sig = parse_signature("EHP")
    assert [c.kind.value for c in sig] == ["E", "H", "P"]
    assert sig.curvatures == [0.0, -1.0, -1.0]
    assert sig.tangent_dim == 6
    assert sig.ambient_dim == 7


def test_parse_signature_singleton_and_dims():
    sig = parse_signature("E")
    assert len(sig) == 1 and sig[0].dim == 2
    sig = parse_signature("E4H2S")
    assert sig.tangent_sizes == [4, 2, 2]
    assert sig.ambient_sizes == [4, 3, 3]
    assert sig.label() == "E4H2S2"


@pytest.mark.parametrize("text, bad", [("Q", "Q"), ("EHx", "x"), ("E-P", "-")])
def test_parse_signature_names_the_bad_character(text, bad):
    with pytest.raises(SignatureParseError, match=repr(bad)):
        parse_signature(text)


def test_parse_signature_rejects_empty_and_zero_dim():
    with pytest.raises(SignatureParseError):
        parse_signature("")
    with pytest.raises(SignatureParseError):
        parse_signature("E0")


def test_product_exp_examples():
    assert np.array_equal(product_exp(parse_signature("E"), [3.0, -1.0]).parts[0], [3.0, -1.0])
    p = product_exp(parse_signature("P"), [1.0, 0.0]).parts[0]
    assert np.allclose(p, [0.761594, 0], atol=1e-6)
    parts = product_exp(parse_signature("EP"), [3.0, -1.0, 1.0, 0.0]).parts
    assert np.array_equal(parts[0], [3.0, -1.0])
    assert np.allclose(parts[1], [math.tanh(1), 0], atol=1e-12)


def test_product_exp_length_mismatch():
    with pytest.raises(DimensionError):
        product_exp(parse_signature("EP"), [1.0, 2.0, 3.0])


def test_product_dist_examples():
    sig = parse_signature("EP")
    a = product_exp(sig, np.zeros(4))
    b = product_exp(sig, [1.0, 0.0, math.atanh(0.5), 0.0])
    assert np.allclose(b.parts[1], [0.5, 0.0], atol=1e-15)
    assert product_dist(sig, a, b) == pytest.approx(math.sqrt(1 + math.log(3) ** 2), abs=1e-12)
    assert product_dist(sig, a, b) == pytest.approx(1.485580, abs=1e-6)
    assert product_dist(sig, b, b) == 0.0


def test_product_dist_pythagorean():
    sig = parse_signature("E1E1")
    a = ProductPoint([np.array([0.0]), np.array([0.0])])
    b = ProductPoint([np.array([3.0]), np.array([4.0])])
    assert product_dist(sig, a, b) == 5.0


def test_product_dist_reports_component_index():
    sig = parse_signature("EP")
    a = ProductPoint([np.zeros(2), np.zeros(2)])
    b = ProductPoint([np.zeros(2), np.array([1.2, 0.0])])
    with pytest.raises(DomainError, match="component 1"):
        product_dist(sig, a, b)


def test_singleton_signature_equals_component_distance(rng):
    for kind in "EHSPD":
        sig = parse_signature(kind)
        K = sig[0].curvature
        a, b = (mf.exp_map(kind, rng.standard_normal(2), K) for _ in range(2))
        assert product_dist(sig, ProductPoint([a]), ProductPoint([b])) == mf.distance(kind, a, b, K)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_product_dist_matches_brute_force_oracle(seed):
    r = np.random.default_rng(seed)
    sig = random_signature(r)
    a = product_exp(sig, r.standard_normal(sig.tangent_dim))
    b = product_exp(sig, r.standard_normal(sig.tangent_dim))
    assert abs(product_dist(sig, a, b) - brute_force_product_dist(sig, a, b)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_product_dist_permutation_invariance_is_exact(seed):
    r = np.random.default_rng(seed)
    sig = random_signature(r)
    a = product_exp(sig, r.standard_normal(sig.tangent_dim))
    b = product_exp(sig, r.standard_normal(sig.tangent_dim))
    order = r.permutation(len(sig))
    pa = ProductPoint([a.parts[i] for i in order])
    pb = ProductPoint([b.parts[i] for i in order])
    assert product_dist(sig, a, b) == product_dist(sig.permuted(order), pa, pb)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_product_metric_axioms(seed):
    r = np.random.default_rng(seed)
    sig = random_signature(r)
    x, y, z = (product_exp(sig, r.standard_normal(sig.tangent_dim)) for _ in range(3))
    dxy, dyz, dxz = product_dist(sig, x, y), product_dist(sig, y, z), product_dist(sig, x, z)
    assert dxy >= 0
    assert dxy == product_dist(sig, y, x)
    assert product_dist(sig, x, x) <= 1e-10
    assert dxz <= dxy + dyz + 1e-9


def test_signature_rejects_wrong_sign_curvatures():
    sig = parse_signature("HP")
    with pytest.raises(ValueError):
        product_exp(sig, np.zeros(4), curvatures=[-1.0, 1.0])


def test_pairwise_matches_product_dist(rng):
    sig = ManifoldSignature([ComponentSpec(SpaceKind(k), 2, c) for k, c in
                             [("E", 0.0), ("H", -0.5), ("S", 2.0), ("P", -1.5), ("D", 0.7)]])
    pts = product_exp(sig, rng.standard_normal((9, sig.tangent_dim))).concat()
    D = pairwise_product_dist(sig, pts)
    for i in range(9):
        for j in range(9):
            a = ProductPoint.from_concat(sig, pts[i])
            b = ProductPoint.from_concat(sig, pts[j])
            assert D[i, j] == pytest.approx(product_dist(sig, a, b), abs=1e-12)
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)


def test_pairwise_rejects_off_manifold_rows():
    sig = parse_signature("P")
    x = np.array([[0.0, 0.0], [0.2, 0.1], [1.5, 0.0]])
    with pytest.raises(DomainError, match="node 2"):
        pairwise_product_dist(sig, x)


def test_pairwise_gradient_wrt_points_and_curvatures(rng):
    sig = parse_signature("EHSPD")
    v0 = rng.standard_normal((5, sig.tangent_dim)) * 0.7
    k0 = np.array([0.8, 1.3, 0.6, 1.7])
    x0 = np.concatenate([v0.ravel(), k0])
    weights = rng.standard_normal((5, 5))

    def f(z):
        v = ad.reshape(ad.index(z, slice(0, v0.size)), v0.shape)
        mags = [ad.index(z, v0.size + i) for i in range(4)]
        curv = [0.0, -mags[0], mags[1], -mags[2], mags[3]]
        pts = product_exp(sig, v, curv).concat()
        return ad.sum(pairwise_product_dist(sig, pts, curv) * weights)

    assert ad.finite_diff_check(f, x0) <= 1e-4
