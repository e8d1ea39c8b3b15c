"""Constant-curvature model spaces: distances, exponential maps, membership.

Five spaces are supported, tagged by a single letter:

====  ===================================  ===========  ===============
tag   space                                curvature    ambient dim
====  ===================================  ===========  ===============
E     Euclidean plane                      K = 0        d
H     hyperboloid (Lorentz model)          K < 0        d + 1
S     hypersphere                          K > 0        d + 1
P     Poincare ball                        K < 0        d
D     stereographically projected sphere   K > 0        d
====  ===================================  ===========  ===============

Every function accepts numpy arrays (batched over leading axes) or
:class:`~projgraph.autodiff.Tensor` values; curvature may be a float or a
scalar tensor, so the same code is used for evaluation and for training.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import CurvatureSignError, DimensionError, DomainError, SignatureParseError

#: Below this |K| the projected-space distances switch to the flat limit 2||x - y||.
SMALL_CURVATURE = 1e-8
#: Largest geodesic radius fed to tan() in the projected-sphere exponential map.
STEREO_MAX_ANGLE = math.pi / 2 - 1e-3
#: Largest geodesic radius fed to tanh() in the Poincare exponential map; keeps
#: images at most (1 - 1e-5) of the way to the boundary.
POINCARE_MAX_ANGLE = math.atanh(1.0 - 1e-5)
#: Membership tolerance used by the distance functions themselves.
DOMAIN_TOL = 1e-6


class SpaceKind(enum.Enum):
    EUCLIDEAN = "E"
    HYPERBOLOID = "H"
    HYPERSPHERE = "S"
    POINCARE = "P"
    STEREO_SPHERE = "D"

    @classmethod
    def parse(cls, tag) -> "SpaceKind":
        if isinstance(tag, SpaceKind):
            return tag
        try:
            return cls(tag)
        except ValueError:
            raise SignatureParseError(f"unknown model space {tag!r}; expected one of E, H, S, P, D") from None

    @property
    def sign(self) -> int:
        """Required sign of the curvature (0 for the Euclidean plane)."""
        return _SIGN[self]

    @property
    def extra_dims(self) -> int:
        """Ambient coordinates beyond the tangent dimension."""
        return 1 if self in (SpaceKind.HYPERBOLOID, SpaceKind.HYPERSPHERE) else 0

    def __str__(self):
        return self.value


_SIGN = {
    SpaceKind.EUCLIDEAN: 0,
    SpaceKind.HYPERBOLOID: -1,
    SpaceKind.HYPERSPHERE: 1,
    SpaceKind.POINCARE: -1,
    SpaceKind.STEREO_SPHERE: 1,
}

#: Default curvature magnitude: unit curvature with the sign of the space.
DEFAULT_CURVATURE = {k: float(s) for k, s in _SIGN.items()}


@dataclass
class ComponentSpec:
    """One factor of a product manifold."""

    kind: SpaceKind
    dim: int = 2
    curvature: float | None = None

    def __post_init__(self):
        self.kind = SpaceKind.parse(self.kind)
        if int(self.dim) != self.dim or self.dim < 1:
            raise DimensionError(f"component dimension must be a positive integer, got {self.dim}")
        self.dim = int(self.dim)
        if self.curvature is None:
            self.curvature = DEFAULT_CURVATURE[self.kind]
        check_curvature_sign(self.kind, self.curvature)

    @property
    def ambient_dim(self) -> int:
        return self.dim + self.kind.extra_dims


def check_curvature_sign(kind, K) -> None:
    kind = SpaceKind.parse(kind)
    k = float(ad.value_of(K))
    ok = {0: k == 0.0, -1: k < 0.0, 1: k > 0.0}[kind.sign]
    if not ok or not math.isfinite(k):
        want = {0: "K = 0", -1: "K < 0", 1: "K > 0"}[kind.sign]
        raise CurvatureSignError(f"space {kind.value} requires {want}, got K={k!r}")


def _coerce(*xs):
    """Leave tensors alone; turn array-likes into float arrays."""
    return tuple(x if ad.is_tensor(x) else np.asarray(x, dtype=float) for x in xs)


def _sqnorm(x):
    return ad.sum(ad.square(x), axis=-1)


def lorentz_inner(x, y):
    """Minkowski bilinear form -x0*y0 + sum_i xi*yi over the last axis."""
    x, y = _coerce(x, y)
    xv, yv = ad.value_of(x), ad.value_of(y)
    if xv.shape[-1:] != yv.shape[-1:] or xv.shape[-1] < 2:
        raise DimensionError(f"Lorentz inner product needs equal lengths >= 2, got {xv.shape} and {yv.shape}")
    prod = x * y
    n = xv.shape[-1]
    signs = np.ones(n)
    signs[0] = -1.0
    return ad.sum(prod * signs, axis=-1)


# -- membership ----------------------------------------------------------------

def _membership_mask(p, kind, K, tol):
    pv = np.asarray(ad.value_of(p), dtype=float)
    k = float(ad.value_of(K))
    finite = np.all(np.isfinite(pv), axis=-1)
    if kind is SpaceKind.EUCLIDEAN or kind is SpaceKind.STEREO_SPHERE:
        return finite
    if kind is SpaceKind.POINCARE:
        return finite & (np.sum(pv * pv, axis=-1) * (-k) < 1.0)
    sq = np.sum(pv * pv, axis=-1)
    scale = tol * np.maximum(1.0, sq)
    if kind is SpaceKind.HYPERBOLOID:
        inner = sq - 2.0 * pv[..., 0] ** 2
        return finite & (pv[..., 0] > 0) & (np.abs(inner - 1.0 / k) <= scale)
    return finite & (np.abs(sq - 1.0 / k) <= scale)


def check_membership(p, kind, K, tol: float = 1e-8) -> bool:
    """True iff ``p`` lies on the model space ``kind`` of curvature ``K``.

    For the quadric models (H, S) the constraint is checked to ``tol`` scaled
    by ``max(1, ||p||^2)``, which keeps the test meaningful far from the base
    point where the coordinates grow. Never raises.
    """
    try:
        kind = SpaceKind.parse(kind)
        check_curvature_sign(kind, K)
        pv = np.asarray(ad.value_of(p), dtype=float)
        if pv.ndim == 0 or pv.shape[-1] < 1 + kind.extra_dims:
            return False
        return bool(np.all(_membership_mask(pv, kind, K, tol)))
    except (CurvatureSignError, SignatureParseError, TypeError, ValueError):
        return False


def _require_members(p, kind, K, tol, what):
    mask = _membership_mask(p, kind, K, tol)
    if not np.all(mask):
        bad = np.argwhere(~np.atleast_1d(mask))
        where = f" at index {tuple(bad[0])}" if np.ndim(mask) else ""
        raise DomainError(f"{what} is not on the {kind.value} model space with K={float(ad.value_of(K))}{where}")


def _same_shape(x, y):
    xs, ys = ad.value_of(x).shape, ad.value_of(y).shape
    if xs[-1:] != ys[-1:]:
        raise DimensionError(f"point dimensions differ: {xs} vs {ys}")


# -- distances -----------------------------------------------------------------

def dist_euclidean(x, y):
    x, y = _coerce(x, y)
    _same_shape(x, y)
    return ad.norm2(x - y, axis=-1)


def _projected_z(x, y, K, sign):
    # 2|K| ||x-y||^2 / ((1 + K||x||^2)(1 + K||y||^2)) with the sign folded in
    den = (1.0 + K * _sqnorm(x)) * (1.0 + K * _sqnorm(y))
    return (2.0 * sign) * K * _sqnorm(x - y) / den


def dist_poincare(x, y, K):
    """Geodesic distance in the Poincare ball of curvature ``K < 0``."""
    x, y = _coerce(x, y)
    check_curvature_sign(SpaceKind.POINCARE, K)
    _same_shape(x, y)
    _require_members(x, SpaceKind.POINCARE, K, 0.0, "first point")
    _require_members(y, SpaceKind.POINCARE, K, 0.0, "second point")
    if abs(float(ad.value_of(K))) < SMALL_CURVATURE:
        return 2.0 * ad.norm2(x - y, axis=-1)
    z = _projected_z(x, y, K, -1.0)
    return ad.acosh1p(z) / ad.sqrt(-K)


def dist_stereo_sphere(x, y, K):
    """Geodesic distance in the stereographic projection of the sphere, ``K > 0``."""
    x, y = _coerce(x, y)
    check_curvature_sign(SpaceKind.STEREO_SPHERE, K)
    _same_shape(x, y)
    if float(ad.value_of(K)) < SMALL_CURVATURE:
        return 2.0 * ad.norm2(x - y, axis=-1)
    z = _projected_z(x, y, K, 1.0)
    return ad.acos1m(z) / ad.sqrt(K)


def dist_hyperboloid(x, y, K):
    """Geodesic distance on the hyperboloid ``<x, x>_L = 1/K``, ``K < 0``.

    Uses ``K<x, y>_L = 1 - (K/2)<x - y, x - y>_L`` (exact on the manifold),
    which is free of cancellation for nearby points.
    """
    x, y = _coerce(x, y)
    check_curvature_sign(SpaceKind.HYPERBOLOID, K)
    _same_shape(x, y)
    _require_members(x, SpaceKind.HYPERBOLOID, K, DOMAIN_TOL, "first point")
    _require_members(y, SpaceKind.HYPERBOLOID, K, DOMAIN_TOL, "second point")
    diff = x - y
    z = (-0.5 * K) * lorentz_inner(diff, diff)
    return ad.acosh1p(z) / ad.sqrt(-K)


def dist_hypersphere(x, y, K):
    """Great-circle distance on the sphere ``<x, x> = 1/K``, ``K > 0``."""
    x, y = _coerce(x, y)
    check_curvature_sign(SpaceKind.HYPERSPHERE, K)
    _same_shape(x, y)
    _require_members(x, SpaceKind.HYPERSPHERE, K, DOMAIN_TOL, "first point")
    _require_members(y, SpaceKind.HYPERSPHERE, K, DOMAIN_TOL, "second point")
    z = (0.5 * K) * _sqnorm(x - y)
    return ad.acos1m(z) / ad.sqrt(K)


def distance(kind, x, y, K=None):
    """Dispatch to the distance function of ``kind``."""
    kind = SpaceKind.parse(kind)
    if kind is SpaceKind.EUCLIDEAN:
        return dist_euclidean(x, y)
    fn = {
        SpaceKind.HYPERBOLOID: dist_hyperboloid,
        SpaceKind.HYPERSPHERE: dist_hypersphere,
        SpaceKind.POINCARE: dist_poincare,
        SpaceKind.STEREO_SPHERE: dist_stereo_sphere,
    }[kind]
    return fn(x, y, K)


# -- exponential maps ----------------------------------------------------------

def base_point(kind, dim: int, K) -> np.ndarray:
    """Anchor of the exponential map: the origin, or the pole ``(1/sqrt|K|, 0, ...)``."""
    kind = SpaceKind.parse(kind)
    p = np.zeros(dim + kind.extra_dims)
    if kind.extra_dims:
        p[0] = 1.0 / math.sqrt(abs(float(ad.value_of(K))))
    return p


def _scaled(v, fn, theta, nonzero, cap=None):
    """``v * fn(min(theta, cap)) / theta``, equal to ``v`` where ``theta == 0``.

    Dividing ``v`` by ``theta`` first keeps the clamped image exactly constant
    along a ray.
    """
    safe = ad.where(nonzero, theta, 1.0)
    arg = safe if cap is None else ad.minimum(safe, cap)
    return ad.where(nonzero, (v / safe) * fn(arg), v)


def exp_map(kind, v, K=None):
    """Exponential map at the canonical base point of ``kind``.

    ``v`` is a tangent vector (or a batch along leading axes). The result lies
    in the ambient coordinates of the space.
    """
    kind = SpaceKind.parse(kind)
    if K is None:
        K = DEFAULT_CURVATURE[kind]
    check_curvature_sign(kind, K)
    (v,) = _coerce(v)
    vv = ad.value_of(v)
    if not np.all(np.isfinite(vv)):
        raise DomainError("tangent vector must be finite")
    if kind is SpaceKind.EUCLIDEAN:
        return v
    sqrt_k = ad.sqrt(K * float(kind.sign))
    norm = ad.norm2(v, axis=-1, keepdims=True)
    theta = sqrt_k * norm
    nonzero = ad.value_of(theta) > 0
    if kind is SpaceKind.POINCARE:
        return _scaled(v, ad.tanh, theta, nonzero, POINCARE_MAX_ANGLE)
    if kind is SpaceKind.STEREO_SPHERE:
        return _scaled(v, ad.tan, theta, nonzero, STEREO_MAX_ANGLE)
    if kind is SpaceKind.HYPERBOLOID:
        head = ad.cosh(theta) / sqrt_k
        tail = _scaled(v, ad.sinh, theta, nonzero)
    else:
        head = ad.cos(theta) / sqrt_k
        tail = _scaled(v, ad.sin, theta, nonzero)
    return ad.concatenate([head, tail], axis=-1)
