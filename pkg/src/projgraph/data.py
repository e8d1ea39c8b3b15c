"""Datasets: JSON schema, loader/saver, stochastic block model generator, splits."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ConfigError, DataError, DatasetParseError, SplitError

TRAIN, VAL, TEST = 0, 1, 2
ROLE_NAMES = ("train", "val", "test")


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    n: int
    n_classes: int
    features: np.ndarray
    labels: np.ndarray
    edges: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] != self.n:
            raise DataError(f"features must be an ({self.n}, F) matrix, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise DataError("features contain non-finite values")
        if labels.shape != (self.n,):
            raise DataError(f"expected {self.n} labels, got {labels.shape[0] if labels.ndim else 0}")
        if self.n_classes < 1:
            raise DataError("n_classes must be positive")
        if self.n and (labels.min() < 0 or labels.max() >= self.n_classes):
            bad = int(np.flatnonzero((labels < 0) | (labels >= self.n_classes))[0])
            raise DataError(f"label {int(labels[bad])} of node {bad} is outside [0, {self.n_classes})")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if self.edges is not None:
            e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
            if e.size and (e.min() < 0 or e.max() >= self.n):
                raise DataError("edge references a node id outside the dataset")
            loops = np.flatnonzero(e[:, 0] == e[:, 1])
            if loops.size:
                raise DataError(f"edge {loops[0]} is a self-loop on node {int(e[loops[0], 0])}")
            object.__setattr__(self, "edges", e)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def adjacency(self) -> sparse.csr_array | None:
        """Symmetrised 0/1 input adjacency, or ``None`` when the dataset has no graph."""
        if self.edges is None:
            return None
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        A = sparse.csr_array((np.ones(rows.size), (rows, cols)), shape=(self.n, self.n))
        A.sum_duplicates()
        A.data[:] = 1.0
        return A

    def without_graph(self) -> "Dataset":
        return Dataset(self.name, self.n, self.n_classes, self.features, self.labels, None)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n": int(self.n),
            "n_classes": int(self.n_classes),
            "features": self.features.tolist(),
            "labels": self.labels.tolist(),
            "edges": None if self.edges is None else self.edges.tolist(),
        }


def _field(doc, key, kind, where="document"):
    if key not in doc:
        raise DatasetParseError(f"{where}: missing field {key!r}")
    v = doc[key]
    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise DatasetParseError(f"{where}: field {key!r} must be an integer")
    if kind is str and not isinstance(v, str):
        raise DatasetParseError(f"{where}: field {key!r} must be a string")
    return v


def dataset_from_json(doc) -> Dataset:
    if not isinstance(doc, dict):
        raise DatasetParseError("top-level JSON value must be an object")
    name = _field(doc, "name", str)
    n = _field(doc, "n", int)
    n_classes = _field(doc, "n_classes", int)
    feats = _field(doc, "features", list)
    labels = _field(doc, "labels", list)
    edges = doc.get("edges", None)
    if len(feats) != n:
        raise DatasetParseError(f"field 'features' has {len(feats)} rows, expected n={n}")
    width = None
    for i, row in enumerate(feats):
        if not isinstance(row, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise DatasetParseError(f"field 'features' row {i} must be a list of numbers")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetParseError(f"field 'features' row {i} has {len(row)} entries, expected {width}")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in labels):
        raise DatasetParseError("field 'labels' must be a list of integers")
    if edges is not None:
        if not isinstance(edges, list):
            raise DatasetParseError("field 'edges' must be a list of [int, int] pairs or null")
        for i, e in enumerate(edges):
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
                raise DatasetParseError(f"field 'edges' entry {i} must be a pair of integers")
    features = np.array(feats, dtype=float).reshape(n, width or 0)
    e = None if edges is None else np.array(edges, dtype=np.int64).reshape(-1, 2)
    return Dataset(name, n, n_classes, features, np.array(labels, dtype=np.int64), e)


def load_dataset(path) -> Dataset:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return dataset_from_json(doc)


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(json.dumps(ds.to_json()))


def generate_sbm(n: int, n_classes: int, p_in: float, p_out: float, feature_dim: int,
                 noise: float, seed: int, name: str = "sbm") -> Dataset:
    """Balanced stochastic block model with noisy one-hot class features.

    Node ``i`` belongs to class ``i % n_classes``; each unordered pair is an
    edge with probability ``p_in`` (same class) or ``p_out``.
    """
    for label, p in (("p_in", p_in), ("p_out", p_out)):
        if not (0.0 <= p <= 1.0) or math.isnan(p):
            raise ConfigError(f"{label} must be a probability, got {p}")
    if n_classes < 1 or n < n_classes:
        raise ConfigError(f"need n >= n_classes >= 1, got n={n}, n_classes={n_classes}")
    if feature_dim < n_classes:
        raise ConfigError("feature_dim must be at least n_classes")
    if noise < 0:
        raise ConfigError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    features = np.zeros((n, feature_dim))
    features[np.arange(n), labels] = 1.0
    features += noise * rng.standard_normal((n, feature_dim))
    return Dataset(name, n, n_classes, features, labels, edges)


def homophily(ds: Dataset) -> float:
    """Fraction of input edges joining nodes of the same class."""
    if ds.edges is None or len(ds.edges) == 0:
        return float("nan")
    return float(np.mean(ds.labels[ds.edges[:, 0]] == ds.labels[ds.edges[:, 1]]))


@dataclass(frozen=True, eq=False)
class SplitMask:
    roles: np.ndarray

    @property
    def train(self) -> np.ndarray:
        return self.roles == TRAIN

    @property
    def val(self) -> np.ndarray:
        return self.roles == VAL

    @property
    def test(self) -> np.ndarray:
        return self.roles == TEST

    def sizes(self) -> tuple[int, int, int]:
        return int(self.train.sum()), int(self.val.sum()), int(self.test.sum())


def _check_fractions(fractions):
    f = [float(x) for x in fractions]
    if len(f) != 3 or any(x < 0 for x in f) or abs(sum(f) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    return f


def _counts(n, fractions):
    raw = np.array(fractions) * n
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[: n - counts.sum()]] += 1
    return counts


def make_splits(n: int, fractions, labels, seed: int) -> SplitMask:
    """Stratified random train/val/test partition with exact rounded sizes.

    Each class is shuffled and spread evenly along one global ordering, so
    every prefix of that ordering is (nearly) class-balanced; the prefix becomes
    the training set.
    """
    f = _check_fractions(fractions)
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ConfigError("labels must have one entry per node")
    rng = np.random.default_rng(seed)
    rank = np.empty(n)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        rank[members] = (np.arange(members.size) + rng.random()) / members.size
    order = np.lexsort((rng.random(n), rank))
    n_train, n_val, _ = _counts(n, f)
    roles = np.full(n, TEST, dtype=np.int8)
    roles[order[:n_train]] = TRAIN
    roles[order[n_train:n_train + n_val]] = VAL
    n_present = np.unique(labels).size
    if 0 < n_train and np.unique(labels[roles == TRAIN]).size < min(n_present, n_train):
        raise SplitError("a class is missing from the training split")
    return SplitMask(roles)


#: Desk-scale stand-ins for homophilic and heterophilic benchmark graphs.
SBM_PRESETS = {
    "homophilic": dict(n=300, n_classes=3, p_in=0.1, p_out=0.01, feature_dim=16, noise=0.5),
    "heterophilic": dict(n=300, n_classes=3, p_in=0.01, p_out=0.1, feature_dim=16, noise=0.5),
}


def sbm_preset(name: str, seed: int = 0) -> Dataset:
    if name not in SBM_PRESETS:
        raise ConfigError(f"unknown SBM preset {name!r}; choose from {sorted(SBM_PRESETS)}")
    return generate_sbm(**SBM_PRESETS[name], seed=seed, name=f"sbm-{name}")
