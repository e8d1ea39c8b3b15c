"""Geometric property suites run by ``projgraph geomcheck``.

Each suite returns a :class:`SuiteResult`; a failing result names the violated
property and the seed that reproduces it. Distance functions are looked up on
the :mod:`projgraph.manifolds` module at call time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dgm, manifolds
from .manifolds import SpaceKind
from .product import ManifoldSignature, ProductPoint, product_dist, product_exp
from .manifolds import ComponentSpec

CURVED = ("P", "D", "H", "S")
CURVATURE_MAGNITUDES = (0.25, 1.0, 4.0)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seed: int

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status:4}  {self.name:<44} {self.detail}  (seed={self.seed})"


def random_points(kind, K, n, dim, rng) -> np.ndarray:
    """``n`` valid points of the model space, spread over a moderate radius."""
    kind = SpaceKind.parse(kind)
    if kind is SpaceKind.POINCARE:
        r = 1.0 / math.sqrt(-K)
        u = rng.standard_normal((n, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return u * (r * 0.95 * rng.random((n, 1)) ** (1.0 / dim))
    if kind is SpaceKind.STEREO_SPHERE:
        return rng.standard_normal((n, dim)) / math.sqrt(K)
    if kind is SpaceKind.EUCLIDEAN:
        return rng.standard_normal((n, dim))
    return manifolds.exp_map(kind, rng.standard_normal((n, dim)) * 1.5 / math.sqrt(abs(K)), K)


def _dist(kind, x, y, K):
    return np.asarray(manifolds.distance(kind, x, y, K), dtype=float)


def metric_axioms(kind, K, samples=1000, seed=0, dim=2):
    rng = np.random.default_rng(seed)
    x, y, z = (random_points(kind, K, samples, dim, rng) for _ in range(3))
    dxy, dyx = _dist(kind, x, y, K), _dist(kind, y, x, K)
    dyz, dxz = _dist(kind, y, z, K), _dist(kind, x, z, K)
    dxx = _dist(kind, x, x, K)
    problems = []
    if not np.all(dxy >= 0):
        problems.append("nonnegativity")
    if not np.all(dxx <= 1e-10):
        problems.append(f"identity (max d(x,x)={dxx.max():.2e})")
    if not np.array_equal(dxy, dyx):
        problems.append("symmetry")
    slack = dxz - (dxy + dyz)
    if not np.all(slack <= 1e-9):
        problems.append(f"triangle inequality (worst excess {slack.max():.2e})")
    name = f"metric axioms {kind} K={K:g}"
    if problems:
        return SuiteResult(name, False, "violated: " + ", ".join(problems), seed)
    return SuiteResult(name, True, f"{samples} triples", seed)


def zero_curvature_limit(kind, samples=1000, seed=0, curvatures=(1e-2, 1e-4, 1e-6)):
    """Relative gap to 2||x - y|| is at most 10|K| and shrinks with |K|."""
    kind = SpaceKind.parse(kind)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, (samples, 2))
    y = rng.uniform(-0.5, 0.5, (samples, 2))
    flat = 2.0 * np.linalg.norm(x - y, axis=1)
    worst = []
    sign = kind.sign
    for mag in curvatures:
        d = _dist(kind, x, y, sign * mag)
        rel = np.abs(d - flat) / np.maximum(flat, 1e-12)
        worst.append(float(rel.max()))
        if rel.max() > 10 * mag:
            return SuiteResult(f"zero-curvature limit {kind}", False,
                               f"relative gap {rel.max():.2e} > 10|K| at |K|={mag:g}", seed)
    if not all(a > b for a, b in zip(worst, worst[1:])):
        return SuiteResult(f"zero-curvature limit {kind}", False,
                           f"gap not decreasing: {[f'{w:.1e}' for w in worst]}", seed)
    return SuiteResult(f"zero-curvature limit {kind}", True,
                       "max gaps " + ", ".join(f"{w:.1e}" for w in worst), seed)


def exp_containment(kind, K, samples=1000, seed=0, dim=2):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, dim)) * 2.0
    pts = manifolds.exp_map(kind, v, K)
    ok = [manifolds.check_membership(p, kind, K, 1e-8) for p in pts]
    name = f"exp-map containment {kind} K={K:g}"
    if not all(ok):
        return SuiteResult(name, False, f"{ok.count(False)} images off the manifold", seed)
    return SuiteResult(name, True, f"{samples} vectors", seed)


def _angle(u, v):
    c = np.sum(u * v, axis=-1) / (np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1))
    return np.arccos(np.clip(c, -1.0, 1.0))


def angle_preservation(K=-1.0, samples=1000, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, 2))
    v = rng.standard_normal((samples, 2))
    u *= 1e-3 * rng.random((samples, 1)) / np.linalg.norm(u, axis=1, keepdims=True)
    v *= 1e-3 * rng.random((samples, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
    gap = np.abs(_angle(manifolds.exp_map("P", u, K), manifolds.exp_map("P", v, K)) - _angle(u, v))
    ok = bool(gap.max() <= 1e-6)
    return SuiteResult(f"angle preservation P K={K:g}", ok, f"max angle gap {gap.max():.1e}", seed)


def curvature_rescaling(K=-1.0, samples=100, seed=0):
    rng = np.random.default_rng(seed)
    x = random_points("P", K, samples, 2, rng)
    y = random_points("P", K, samples, 2, rng)
    lam = rng.uniform(0.1, 10.0, (samples, 1))
    base = _dist("P", x, y, K)
    scaled = np.array([_dist("P", np.sqrt(l) * a, np.sqrt(l) * b, K / l[0]) / np.sqrt(l[0])
                       for l, a, b in zip(lam, x, y)])
    gap = np.abs(base - scaled)
    ok = bool(gap.max() <= 1e-9)
    return SuiteResult(f"curvature rescaling P K={K:g}", ok, f"max gap {gap.max():.1e}", seed)


def random_signature(rng, max_len=4) -> ManifoldSignature:
    comps = []
    for _ in range(int(rng.integers(1, max_len + 1))):
        kind = SpaceKind("EHSPD"[int(rng.integers(5))])
        K = 0.0 if kind.sign == 0 else kind.sign * float(rng.choice(CURVATURE_MAGNITUDES))
        comps.append(ComponentSpec(kind, int(rng.integers(1, 4)), K))
    return ManifoldSignature(comps)


def brute_force_product_dist(sig, a, b) -> float:
    squares = []
    for comp, pa, pb in zip(sig, a.parts, b.parts):
        d = float(manifolds.distance(comp.kind, pa, pb, comp.curvature))
        squares.append(d * d)
    return math.sqrt(sum(squares))


def product_oracle(samples=500, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        sig = random_signature(rng)
        a = product_exp(sig, rng.standard_normal(sig.tangent_dim))
        b = product_exp(sig, rng.standard_normal(sig.tangent_dim))
        worst = max(worst, abs(float(product_dist(sig, a, b)) - brute_force_product_dist(sig, a, b)))
    return SuiteResult("product distance oracle", worst <= 1e-12, f"max gap {worst:.1e}", seed)


def product_permutation(samples=500, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        sig = random_signature(rng)
        a = product_exp(sig, rng.standard_normal(sig.tangent_dim))
        b = product_exp(sig, rng.standard_normal(sig.tangent_dim))
        order = rng.permutation(len(sig))
        pa = ProductPoint([a.parts[i] for i in order])
        pb = ProductPoint([b.parts[i] for i in order])
        d0 = float(product_dist(sig, a, b))
        d1 = float(product_dist(sig.permuted(order), pa, pb))
        if d0 != d1:
            return SuiteResult("product permutation invariance", False, f"{d0!r} vs {d1!r}", seed)
    return SuiteResult("product permutation invariance", True, f"{samples} signatures", seed)


def gumbel_fidelity(draws=200_000, seed=0, logits=(0.0, 1.0, -0.5, 2.0, 0.3)):
    """Top-1 Gumbel frequencies against the softmax, at 3 binomial sigmas."""
    rng = np.random.default_rng(seed)
    row = np.asarray(logits, dtype=float)
    p = np.exp(row - row.max())
    p /= p.sum()
    scores = row + dgm.gumbel_noise((draws, row.size), rng)
    counts = np.bincount(np.argmax(scores, axis=1), minlength=row.size)
    sigma = np.sqrt(draws * p * (1 - p))
    z = np.abs(counts - draws * p) / sigma
    return SuiteResult("gumbel-max fidelity", bool(np.all(z <= 3.0)), f"max |z| {z.max():.2f}", seed)


def no_self_loops(draws=10_000, seed=0, n=6, k=2):
    rng = np.random.default_rng(seed)
    for _ in range(draws // n):
        logits = rng.standard_normal((n, n))
        np.fill_diagonal(logits, -np.inf)
        s = dgm.gumbel_topk(logits, k, rng)
        if np.any(s.edges == np.arange(n)[:, None]):
            return SuiteResult("no self-loops", False, "self-loop sampled", seed)
    return SuiteResult("no self-loops", True, f"{draws} rows", seed)


def run_all(space=None, curvature=None, samples=1000, seed=0) -> list[SuiteResult]:
    """Every suite, optionally restricted to one space and/or curvature."""
    kinds = [space] if space else list(CURVED)
    results = []
    for kind in kinds:
        kind = SpaceKind.parse(kind).value
        if kind == "E":
            results.append(metric_axioms("E", 0.0, samples, seed))
            continue
        sign = SpaceKind(kind).sign
        mags = [abs(curvature)] if curvature is not None else CURVATURE_MAGNITUDES
        for mag in mags:
            results.append(metric_axioms(kind, sign * mag, samples, seed))
            results.append(exp_containment(kind, sign * mag, samples, seed))
        if kind in ("P", "D"):
            results.append(zero_curvature_limit(kind, samples, seed))
        if kind == "P":
            K = -abs(curvature) if curvature is not None else -1.0
            results.append(angle_preservation(K, samples, seed))
            results.append(curvature_rescaling(K, min(samples, 100), seed))
    if space is None:
        results.append(product_oracle(min(samples, 500), seed))
        results.append(product_permutation(min(samples, 500), seed))
        results.append(gumbel_fidelity(200 * samples, seed))
        results.append(no_self_loops(10 * samples, seed))
    return results
