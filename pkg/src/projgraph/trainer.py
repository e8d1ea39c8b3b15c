"""Training loop, losses, and repeated-run statistics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import Dataset, SplitMask, make_splits
from .dgm import AccuracyBaseline, graph_reward_loss
from .errors import ConfigError, DataError, NonFiniteError, TrainingError
from .gnn import ModelParams, ModelSpec, ddgm_forward, init_params

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    model: str = "GCN-dDGM*-E"
    k: int = 3
    epochs: int = 300
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    n_runs: int = 1
    splits: tuple = (0.6, 0.2, 0.2)
    graph_loss_weight: float = 1.0
    baseline_decay: float = 0.9
    hidden: int = 32
    eval_mode: str = "topk"

    def __post_init__(self):
        f = self.splits
        if len(f) != 3 or any(x < 0 for x in f) or abs(sum(f) - 1.0) > 1e-9 or f[0] <= 0:
            raise ConfigError(f"split fractions must be positive-train and sum to 1, got {f}")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be at least 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.eval_mode not in ("topk", "sample"):
            raise ConfigError("eval_mode must be 'topk' or 'sample'")

    def model_spec(self) -> ModelSpec:
        return ModelSpec.from_name(self.model, k=self.k, hidden=self.hidden)


@dataclass
class RunMetrics:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    test_acc: float = float("nan")
    best_epoch: int = 0
    curvatures: list = field(default_factory=list)
    temperature: list = field(default_factory=list)
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "test_acc": self.test_acc,
            "best_epoch": self.best_epoch,
            "best_val_acc": self.val_acc[self.best_epoch] if self.val_acc else None,
            "final_train_loss": self.train_loss[-1] if self.train_loss else None,
            "curvatures": self.curvatures[-1] if self.curvatures else [],
            "temperature": self.temperature[-1] if self.temperature else None,
        }


class Adam:
    def __init__(self, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        out = {}
        for name, p in params.items():
            g = grads[name]
            m = self.beta1 * self.m.get(name, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(name, 0.0) + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            mhat = m / (1 - self.beta1 ** self.t)
            vhat = v / (1 - self.beta2 ** self.t)
            out[name] = p - self.lr * mhat / (np.sqrt(vhat) + self.eps)
        return out


def nll_loss(log_probs, labels, mask):
    labels = np.asarray(labels)
    idx = np.flatnonzero(mask)
    picked = ad.index(log_probs, (idx, labels[idx]))
    return -ad.mean(picked)


def total_loss(log_probs, labels, samples, baseline, correct, mask, graph_weight: float = 1.0):
    """Mean NLL over the masked nodes plus the weighted graph reward loss."""
    n_classes = ad.value_of(log_probs).shape[1]
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes})")
    loss = nll_loss(log_probs, labels, mask)
    if samples and graph_weight:
        loss = loss + graph_weight * graph_reward_loss(samples, correct, baseline, mask)
    return loss


def _accuracy(correct, mask):
    return float(np.mean(correct[mask])) if mask.any() else float("nan")


def _curvature_values(res) -> list:
    return [] if res.curvatures is None else [float(ad.value_of(k)) for k in res.curvatures]


def train(config: TrainConfig, data: Dataset, splits: SplitMask | None = None):
    """Fit one model; returns the best-validation parameters and the run history.

    Each epoch draws one latent graph, evaluates all splits on that forward
    pass, then takes one Adam step on the training loss.
    """
    spec = config.model_spec()
    A = data.adjacency()
    if spec.uses_input_graph and A is None:
        raise ConfigError(f"{spec.name} uses the input graph, but dataset {data.name!r} has no edges")
    if splits is None:
        splits = make_splits(data.n, config.splits, data.labels, config.seed)
    rng = np.random.default_rng(config.seed)
    params = init_params(spec, data.n_features, data.n_classes, rng)
    sample_rng = np.random.default_rng([config.seed, 1])
    opt = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    baseline = AccuracyBaseline(data.n, 1.0 / data.n_classes, config.baseline_decay)
    metrics = RunMetrics(seed=config.seed)
    train_mask = splits.train
    best = (-1.0, params.copy(), float("nan"))
    for epoch in range(config.epochs + 1):
        tape = ad.Tape()
        bound = params.map(lambda name, v: tape.variable(v, name))
        try:
            res = ddgm_forward(data.features, A, bound, spec, sample_rng)
            correct = (np.argmax(ad.value_of(res.log_probs), axis=1) == data.labels).astype(float)
            loss = total_loss(res.log_probs, data.labels, res.samples, baseline.values, correct,
                              train_mask, config.graph_loss_weight)
        except NonFiniteError as exc:
            raise TrainingError(f"non-finite values at epoch {epoch}: {exc}", epoch=epoch) from exc
        lval = float(ad.value_of(loss))
        if not math.isfinite(lval):
            raise TrainingError(f"loss diverged at epoch {epoch}", epoch=epoch)
        curv = _curvature_values(res)
        if spec.uses_dgm:
            sig = spec.parsed_signature()
            for comp, kv in zip(sig, curv):
                if comp.kind.sign and np.sign(kv) != comp.kind.sign:
                    raise TrainingError(f"curvature of {comp.kind.value} changed sign at epoch {epoch}", epoch=epoch)
            t = float(ad.value_of(res.temperature))
            if not t > 0:
                raise TrainingError(f"temperature not positive at epoch {epoch}", epoch=epoch)
            metrics.temperature.append(t)
            metrics.curvatures.append(curv)
        metrics.train_loss.append(lval)
        metrics.train_acc.append(_accuracy(correct, train_mask))
        scored = correct
        if spec.uses_dgm and config.eval_mode == "topk":
            mode = ddgm_forward(data.features, A, params, spec, None, perturb=False)
            scored = (np.argmax(mode.log_probs, axis=1) == data.labels).astype(float)
        val = _accuracy(scored, splits.val) if splits.val.any() else metrics.train_acc[-1]
        metrics.val_acc.append(val)
        if val >= best[0]:
            best = (val, params, _accuracy(scored, splits.test))
            metrics.best_epoch = epoch
        if epoch == config.epochs:
            break
        grads = tape.backward(loss)
        baseline.update(correct, train_mask)
        named = bound.named()
        new = opt.step(params.named(), {k: grads[t] for k, t in named.items()})
        params = params.map(lambda name, v: new[name])
        log.debug("epoch %d loss %.4f val %.3f", epoch, lval, val)
    metrics.test_acc = best[2]
    return best[1].copy(), metrics


@dataclass
class RepeatResult:
    mean_acc: float
    std_acc: float
    runs: list

    @property
    def accuracies(self) -> list:
        return [r.test_acc for r in self.runs]


def repeat_runs(config: TrainConfig, data: Dataset, train_fn=None) -> RepeatResult:
    """Train ``n_runs`` times with seeds ``seed + r`` and fresh splits; mean and sample std."""
    train_fn = train_fn or train
    runs = []
    for r in range(config.n_runs):
        cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + r, "n_runs": 1})
        try:
            _, m = train_fn(cfg, data)
        except TrainingError as exc:
            raise TrainingError(f"run {r}: {exc}", epoch=exc.epoch, run=r) from exc
        runs.append(m)
    acc = np.array([m.test_acc for m in runs])
    std = float(np.std(acc, ddof=1)) if len(acc) > 1 else 0.0
    return RepeatResult(float(np.mean(acc)), std, runs)
