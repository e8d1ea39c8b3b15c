"""Diffusion layers and the end-to-end latent-graph classifier."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse

from . import autodiff as ad
from .dgm import EdgeSample, adjacency_from_sample, edge_logits, gumbel_topk
from .errors import ConfigError, DimensionError
from .manifolds import SpaceKind
from .product import ManifoldSignature, parse_signature, product_exp

BACKBONES = ("GCN", "GAT", "MLP")
_MODEL_NAME = re.compile(r"^(GCN|GAT|MLP)(?:-dDGM(\*?)-((?:[EHSPD]\d*)+))?$")
_UNIT_SOFTPLUS_INV = math.log(math.e - 1.0)


def softplus_inverse(y: float) -> float:
    return float(y + math.log(-math.expm1(-y)))


@dataclass
class ModelSpec:
    """Architecture choice, mirroring names like ``GCN-dDGM*-EHP``.

    ``signature is None`` denotes a plain baseline (``GCN``, ``GAT``, ``MLP``).
    """

    backbone: str = "GCN"
    signature: str | None = "E"
    uses_input_graph: bool = False
    k: int = 3
    hidden: int = 32
    n_diffusion: int = 2
    symmetrize: bool = False
    init_temperature: float = 1.0

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        if self.k < 1:
            raise ConfigError("k must be positive")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "ModelSpec":
        m = _MODEL_NAME.match(name)
        if m is None:
            raise ConfigError(f"cannot parse model name {name!r}; expected e.g. GCN-dDGM*-EHP or MLP")
        backbone, star, sig = m.groups()
        if sig is None:
            return cls(backbone=backbone, signature=None, uses_input_graph=backbone != "MLP", **kwargs)
        return cls(backbone=backbone, signature=sig, uses_input_graph=star != "*", **kwargs)

    @property
    def uses_dgm(self) -> bool:
        return self.signature is not None

    @property
    def name(self) -> str:
        if not self.uses_dgm:
            return self.backbone
        return f"{self.backbone}-dDGM{'' if self.uses_input_graph else '*'}-{self.signature}"

    def parsed_signature(self) -> ManifoldSignature:
        return parse_signature(self.signature)


@dataclass
class LayerParams:
    weight: object
    bias: object = None
    attention: object = None


@dataclass
class ModelParams:
    dgm_transform: list = field(default_factory=list)
    diffusion: list = field(default_factory=list)
    head: LayerParams | None = None
    temperature_pre: object = None
    curvature_pre: object = None

    def named(self) -> dict:
        out = {}
        for group, layers in (("dgm", self.dgm_transform), ("diffusion", self.diffusion), ("head", [self.head])):
            for i, lp in enumerate(layers):
                for attr in ("weight", "bias", "attention"):
                    v = getattr(lp, attr)
                    if v is not None:
                        out[f"{group}.{i}.{attr}"] = v
        if self.temperature_pre is not None:
            out["temperature_pre"] = self.temperature_pre
        if self.curvature_pre is not None and np.size(ad.value_of(self.curvature_pre)):
            out["curvature_pre"] = self.curvature_pre
        return out

    def map(self, fn) -> "ModelParams":
        """New params with every named entry replaced by ``fn(name, value)``."""
        def layer(group, i, lp):
            return LayerParams(*(None if getattr(lp, a) is None else fn(f"{group}.{i}.{a}", getattr(lp, a))
                                 for a in ("weight", "bias", "attention")))
        curv = self.curvature_pre
        if curv is not None and np.size(ad.value_of(curv)):
            curv = fn("curvature_pre", curv)
        return ModelParams(
            [layer("dgm", i, lp) for i, lp in enumerate(self.dgm_transform)],
            [layer("diffusion", i, lp) for i, lp in enumerate(self.diffusion)],
            layer("head", 0, self.head),
            None if self.temperature_pre is None else fn("temperature_pre", self.temperature_pre),
            curv,
        )

    def copy(self) -> "ModelParams":
        return self.map(lambda name, v: np.array(ad.value_of(v), dtype=float))


def init_layer(rng: np.random.Generator, fan_in: int, fan_out: int, attention: bool = False) -> LayerParams:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    att = rng.uniform(-limit, limit, size=2 * fan_out) if attention else None
    return LayerParams(w, None if attention else np.zeros(fan_out), att)


def init_params(spec: ModelSpec, in_dim: int, n_classes: int, rng: np.random.Generator) -> ModelParams:
    params = ModelParams()
    if spec.uses_dgm:
        sig = spec.parsed_signature()
        params.dgm_transform = [init_layer(rng, in_dim, sig.tangent_dim)]
        params.temperature_pre = np.array(softplus_inverse(spec.init_temperature))
        params.curvature_pre = np.full(len(sig.curved_indices), _UNIT_SOFTPLUS_INV)
    width = in_dim
    for _ in range(spec.n_diffusion):
        params.diffusion.append(init_layer(rng, width, spec.hidden, attention=spec.backbone == "GAT"))
        width = spec.hidden
    params.head = init_layer(rng, width, n_classes)
    return params


# -- layers --------------------------------------------------------------------

def normalized_adjacency(A) -> sparse.csr_array:
    """``D^-1/2 (A + I) D^-1/2`` with D the row degrees of ``A + I``."""
    A = sparse.csr_array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"adjacency must be square, got {A.shape}")
    At = A + sparse.eye_array(n, format="csr")
    deg = np.asarray(At.sum(axis=1)).ravel()
    inv = sparse.dia_array((1.0 / np.sqrt(deg), 0), shape=(n, n))
    return sparse.csr_array(inv @ At @ inv)


def _check_rows(H, A):
    n = ad.value_of(H).shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"adjacency {A.shape} does not match {n} feature rows")


def linear(H, params: LayerParams):
    out = ad.matmul(H, params.weight)
    return out if params.bias is None else out + params.bias


def mlp_layer(H, params: LayerParams, activation=ad.relu):
    out = linear(H, params)
    return activation(out) if activation else out


def gcn_layer(H, A, params: LayerParams, activation=ad.relu):
    """Symmetric-normalised graph convolution with self-loops."""
    _check_rows(H, A)
    out = ad.spmm(normalized_adjacency(A), ad.matmul(H, params.weight))
    if params.bias is not None:
        out = out + params.bias
    return activation(out) if activation else out


def gat_layer(H, A, params: LayerParams, activation=ad.relu, slope: float = 0.2):
    """Single-head graph attention over ``N(i)`` plus the node itself."""
    _check_rows(H, A)
    hw = ad.matmul(H, params.weight)
    f = ad.value_of(hw).shape[1]
    a_src, a_dst = params.attention[:f], params.attention[f:]
    scores = ad.leaky_relu(ad.reshape(ad.matmul(hw, a_src), (-1, 1))
                           + ad.reshape(ad.matmul(hw, a_dst), (1, -1)), slope)
    n = ad.value_of(hw).shape[0]
    allowed = (sparse.csr_array(A).toarray() != 0) | np.eye(n, dtype=bool)
    masked = ad.where(allowed, scores, -np.inf)
    alpha = ad.softmax(masked, axis=1)
    out = ad.matmul(alpha, hw)
    return activation(out) if activation else out


def diffuse(H, A, params: LayerParams, backbone: str):
    if backbone == "GCN":
        return gcn_layer(H, A, params)
    if backbone == "GAT":
        return gat_layer(H, A, params)
    return mlp_layer(H, params)


# -- end-to-end forward ----------------------------------------------------------

class ForwardResult(NamedTuple):
    log_probs: object
    samples: list
    points: object = None
    edge_logits: object = None
    curvatures: list | None = None
    temperature: object = None


def realized_curvatures(sig: ManifoldSignature, curvature_pre) -> list:
    """K = -softplus(pre) for H/P, +softplus(pre) for S/D, 0 for E."""
    out, j = [], 0
    for comp in sig:
        if comp.kind is SpaceKind.EUCLIDEAN:
            out.append(0.0)
            continue
        out.append(float(comp.kind.sign) * ad.softplus(curvature_pre[j]))
        j += 1
    return out


def ddgm_forward(X, A_input, params: ModelParams, spec: ModelSpec, rng: np.random.Generator | None,
                 sample: EdgeSample | None = None, perturb: bool = True) -> ForwardResult:
    """Class log-probabilities (and the latent graph sample) for every node.

    ``sample`` fixes the latent edges instead of drawing them; ``perturb=False``
    replaces Gumbel sampling by the deterministic top-k.
    """
    n = ad.value_of(X).shape[0]
    if n == 0:
        raise ConfigError("empty feature matrix")
    if spec.uses_input_graph and A_input is None:
        raise ConfigError(f"{spec.name} needs the dataset's input graph, but none was given")
    if not spec.uses_dgm:
        H = X
        for lp in params.diffusion:
            H = diffuse(H, A_input, lp, spec.backbone)
        return ForwardResult(ad.log_softmax(linear(H, params.head), axis=1), [])

    sig = spec.parsed_signature()
    if spec.k >= n:
        raise ConfigError(f"k={spec.k} must be smaller than the node count {n}")
    transform = params.dgm_transform[0]
    if spec.uses_input_graph:
        tangent = gcn_layer(X, A_input, transform, activation=None)
    else:
        tangent = linear(X, transform)
    curv = realized_curvatures(sig, params.curvature_pre)
    points = product_exp(sig, tangent, curv).concat()
    T = ad.softplus(params.temperature_pre)
    logits = edge_logits(points, sig, T, curv)
    if sample is None:
        sample = gumbel_topk(logits, spec.k, rng, perturb=perturb)
    else:
        sample = EdgeSample(sample.edges, ad.take_along_axis(ad.log_softmax(logits, axis=1), sample.edges, axis=1))
    A_latent = adjacency_from_sample(sample, n, symmetric=spec.symmetrize)
    H = X
    for lp in params.diffusion:
        H = diffuse(H, A_latent, lp, spec.backbone)
    out = ad.log_softmax(linear(H, params.head), axis=1)
    return ForwardResult(out, [sample], points, logits, curv, T)
