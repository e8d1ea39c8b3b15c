"""Discrete differentiable graph module: geodesic edge logits, Gumbel top-k
edge sampling, and the score-function loss that trains the sampler."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import autodiff as ad
from . import kernels
from .errors import SamplingError
from .product import ManifoldSignature, ProductPoint, pairwise_product_dist


@dataclass
class EdgeSample:
    """``edges[i]`` lists the k targets drawn for node i; ``log_probs`` matches its shape.

    With ``graph=False`` the rows are independent draws rather than nodes, so
    the self-loop rule does not apply.
    """

    edges: np.ndarray
    log_probs: object
    graph: bool = True

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64)
        if self.edges.ndim != 2:
            raise SamplingError("edges must be an (N, k) integer array")
        n, k = self.edges.shape
        rows = np.arange(n)[:, None]
        if self.graph and np.any(self.edges == rows):
            raise SamplingError("sample contains a self-loop")
        if k > 1 and np.any(np.diff(np.sort(self.edges, axis=1), axis=1) == 0):
            raise SamplingError("sample repeats a target within a row")
        if ad.value_of(self.log_probs).shape != self.edges.shape:
            raise SamplingError("log_probs shape does not match edges")

    @property
    def k(self) -> int:
        return self.edges.shape[1]

    @property
    def n(self) -> int:
        return self.edges.shape[0]


def edge_logits(embedded, sig: ManifoldSignature, T, curvatures=None):
    """Matrix of ``-T * d(x_i, x_j)`` with ``-inf`` on the diagonal.

    ``embedded`` is a :class:`ProductPoint` with one row per node, or the
    concatenated (N, ambient) matrix.
    """
    x = embedded.concat() if isinstance(embedded, ProductPoint) else embedded
    if ad.value_of(x).shape[0] < 2:
        raise SamplingError("edge logits need at least two nodes")
    dist = pairwise_product_dist(sig, x, curvatures)
    return ad.fill_diagonal(-(T * dist), -np.inf)


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shape)
    u = np.where(u > 0.0, u, np.finfo(float).tiny)
    return -np.log(-np.log(u))


def gumbel_topk(logits, k: int, rng: np.random.Generator | None, perturb: bool = True) -> EdgeSample:
    """Draw k distinct targets per row by perturbing logits with Gumbel noise.

    ``perturb=False`` (or ``rng=None``) gives the deterministic top-k of the
    logits. Log-probabilities are those of the row-softmax of the unperturbed
    logits and stay on the tape when ``logits`` is a tensor.
    """
    lv = ad.value_of(logits)
    if k < 1:
        raise SamplingError("k must be positive")
    finite = np.isfinite(lv).sum(axis=1)
    if np.any(finite < k):
        row = int(np.flatnonzero(finite < k)[0])
        raise SamplingError(f"row {row} has {int(finite[row])} finite logits, fewer than k={k}")
    scores = lv + gumbel_noise(lv.shape, rng) if (perturb and rng is not None) else lv
    edges = kernels.topk_rows(scores, k)
    log_probs = ad.take_along_axis(ad.log_softmax(logits, axis=1), edges, axis=1)
    return EdgeSample(edges, log_probs, graph=lv.shape[0] == lv.shape[1])


def adjacency_from_sample(sample: EdgeSample, n: int, symmetric: bool = False) -> sparse.csr_array:
    """Directed 0/1 adjacency with ``A[i, j] = 1`` for every sampled edge ``i -> j``."""
    if not sample.graph:
        raise SamplingError("sample rows are not graph nodes")
    rows = np.repeat(np.arange(sample.n), sample.k)
    cols = sample.edges.ravel()
    A = sparse.csr_array((np.ones(rows.size), (rows, cols)), shape=(n, n))
    if symmetric:
        A = ((A + A.T) > 0).astype(float)
    A.sum_duplicates()
    return sparse.csr_array(A)


def graph_reward_loss(samples, correct, baseline, mask=None):
    """Sum over layers and nodes of ``(baseline_i - correct_i) * sum_j log p_ij``.

    Minimising it raises the probability of edges sampled for nodes that did
    better than their running baseline and lowers it otherwise. ``mask``
    restricts the sum to nodes whose correctness is known.
    """
    advantage = np.asarray(baseline, dtype=float) - np.asarray(correct, dtype=float)
    if mask is not None:
        advantage = np.where(np.asarray(mask, dtype=bool), advantage, 0.0)
    total = 0.0
    for s in samples:
        total = total + ad.sum(ad.sum(s.log_probs, axis=1) * advantage)
    return total


class AccuracyBaseline:
    """Per-node exponential moving average of the correctness indicator."""

    def __init__(self, n: int, init: float, decay: float = 0.9):
        self.values = np.full(n, float(init))
        self.decay = decay

    def update(self, correct, mask=None) -> None:
        correct = np.asarray(correct, dtype=float)
        new = self.decay * self.values + (1.0 - self.decay) * correct
        if mask is None:
            self.values = new
        else:
            self.values = np.where(np.asarray(mask, dtype=bool), new, self.values)
