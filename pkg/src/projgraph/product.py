"""Product manifolds built from a signature string such as ``"EHP"`` or ``"E4H2"``."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import kernels
from .errors import DimensionError, DomainError, SignatureParseError
from .manifolds import (
    DOMAIN_TOL, ComponentSpec, SpaceKind, _membership_mask, check_curvature_sign, distance, exp_map,
)

_TOKEN = re.compile(r"([EHSPD])(\d*)")


@dataclass
class ManifoldSignature:
    components: list[ComponentSpec] = field(default_factory=list)

    def __post_init__(self):
        if not self.components:
            raise SignatureParseError("a signature needs at least one component")

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    @property
    def kinds(self) -> list[SpaceKind]:
        return [c.kind for c in self.components]

    @property
    def tangent_sizes(self) -> list[int]:
        return [c.dim for c in self.components]

    @property
    def ambient_sizes(self) -> list[int]:
        return [c.ambient_dim for c in self.components]

    @property
    def tangent_dim(self) -> int:
        return sum(self.tangent_sizes)

    @property
    def ambient_dim(self) -> int:
        return sum(self.ambient_sizes)

    @property
    def curvatures(self) -> list[float]:
        return [c.curvature for c in self.components]

    @property
    def curved_indices(self) -> list[int]:
        """Positions of the components whose curvature is learnable (all but E)."""
        return [i for i, c in enumerate(self.components) if c.kind is not SpaceKind.EUCLIDEAN]

    def label(self) -> str:
        if all(c.dim == 2 for c in self.components):
            return "".join(c.kind.value for c in self.components)
        return "".join(f"{c.kind.value}{c.dim}" for c in self.components)

    def permuted(self, order: Sequence[int]) -> "ManifoldSignature":
        return ManifoldSignature([self.components[i] for i in order])

    def _resolve(self, curvatures):
        if curvatures is None:
            return self.curvatures
        if len(curvatures) != len(self):
            raise DimensionError(f"expected {len(self)} curvatures, got {len(curvatures)}")
        for comp, K in zip(self.components, curvatures):
            check_curvature_sign(comp.kind, K)
        return list(curvatures)


@dataclass
class ProductPoint:
    """One ambient block per component; blocks may carry leading batch axes."""

    parts: list

    def concat(self):
        return ad.concatenate(self.parts, axis=-1)

    @classmethod
    def from_concat(cls, sig: ManifoldSignature, x) -> "ProductPoint":
        xv = ad.value_of(x)
        if xv.shape[-1] != sig.ambient_dim:
            raise DimensionError(f"expected {sig.ambient_dim} ambient coordinates, got {xv.shape[-1]}")
        return cls(ad.split(x, sig.ambient_sizes, axis=-1))


def parse_signature(text: str, default_dim: int = 2) -> ManifoldSignature:
    """Parse a signature string into its components (unit curvature of the right sign).

    >>> parse_signature("EHP").ambient_dim
    7
    """
    if not text:
        raise SignatureParseError("empty signature")
    comps, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SignatureParseError(f"invalid character {text[pos]!r} at position {pos} in signature {text!r}")
        dim = int(m.group(2)) if m.group(2) else default_dim
        if dim < 1:
            raise SignatureParseError(f"component dimension must be positive in {text!r}")
        comps.append(ComponentSpec(SpaceKind(m.group(1)), dim))
        pos = m.end()
    return ManifoldSignature(comps)


def product_exp(sig: ManifoldSignature, v, curvatures=None) -> ProductPoint:
    """Concatenated per-component exponential maps of a tangent vector (or batch)."""
    curv = sig._resolve(curvatures)
    vv = ad.value_of(v)
    if vv.shape[-1] != sig.tangent_dim:
        raise DimensionError(f"tangent vector has length {vv.shape[-1]}, signature needs {sig.tangent_dim}")
    blocks = ad.split(v, sig.tangent_sizes, axis=-1)
    return ProductPoint([exp_map(c.kind, b, K) for c, b, K in zip(sig, blocks, curv)])


def product_dist(sig: ManifoldSignature, a: ProductPoint, b: ProductPoint, curvatures=None):
    """Root of the summed squared component distances."""
    curv = sig._resolve(curvatures)
    if len(a.parts) != len(sig) or len(b.parts) != len(sig):
        raise DimensionError("points do not match the signature's component count")
    squares = []
    for i, (comp, pa, pb, K) in enumerate(zip(sig, a.parts, b.parts, curv)):
        try:
            d = distance(comp.kind, pa, pb, K)
        except DomainError as exc:
            raise DomainError(f"component {i} ({comp.kind.value}): {exc}") from exc
        if len(sig) == 1:
            return d
        sq = ad.square(d)
        squares.append(ad.reshape(sq, ad.value_of(sq).shape + (1,)))
    # summing in ascending order makes the result independent of component order
    stacked = ad.concatenate(squares, axis=-1)
    order = np.argsort(ad.value_of(stacked), axis=-1, kind="stable")
    return ad.sqrt(ad.sum(ad.take_along_axis(stacked, order, axis=-1), axis=-1))


def validate_points(sig: ManifoldSignature, x, curvatures=None) -> None:
    """Raise :class:`DomainError` naming the first node/component off its manifold."""
    curv = sig._resolve(curvatures)
    xv = ad.value_of(x)
    start = 0
    for i, (comp, K) in enumerate(zip(sig, curv)):
        block = xv[:, start:start + comp.ambient_dim]
        start += comp.ambient_dim
        tol = DOMAIN_TOL if comp.kind.extra_dims else 0.0
        ok = _membership_mask(block, comp.kind, K, tol)
        if not np.all(ok):
            node = int(np.flatnonzero(~ok)[0])
            raise DomainError(f"node {node}: component {i} ({comp.kind.value}) is off the manifold")


def pairwise_product_dist(sig: ManifoldSignature, x, curvatures=None, check: bool = True):
    """All-pairs product distance of the rows of the ambient matrix ``x``.

    Runs the fused kernel (compiled when available) and records a single node
    whose adjoint flows into both ``x`` and any tensor curvatures.
    """
    curv = sig._resolve(curvatures)
    xv = ad.value_of(x)
    if xv.ndim != 2 or xv.shape[1] != sig.ambient_dim:
        raise DimensionError(f"expected an (N, {sig.ambient_dim}) matrix, got {xv.shape}")
    if check:
        validate_points(sig, xv, curv)
    sizes = np.array(sig.ambient_sizes)
    stops = np.cumsum(sizes)
    starts = stops - sizes
    codes = np.array([kernels.KIND_CODES[k.value] for k in sig.kinds], dtype=np.int64)
    kvals = np.array([float(ad.value_of(K)) for K in curv])
    total, comps = kernels.pairwise_forward(xv, starts, stops, codes, kvals)

    inputs = [x] + [K for K in curv]
    tape = ad._tape_of(inputs)
    if tape is None:
        return total

    def vjp(g):
        gx, gk = kernels.pairwise_backward(g, xv, starts, stops, codes, kvals, total, comps)
        return (gx,) + tuple(np.float64(v) for v in gk)

    ids = [t.index if ad.is_tensor(t) else None for t in inputs]
    return tape.record("pairwise_product_dist", ids, total, vjp)
