"""Joint maximum-likelihood training of the two-headed density model."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import Dataset, Standardizer
from .errors import DimensionMismatch, EmptyDataset, NonFiniteGradient
from .nade import KrdaModel, log_likelihood, log_likelihood_grad

log = logging.getLogger(__name__)

METRICS_HEADER = "epoch,source_train_ll,target_train_ll,source_val_ll,target_val_ll,elapsed_ms"


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    validation_fraction: float = 0.1
    patience: Optional[int] = 30  # None or 0 disables early stopping

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not 0 <= self.validation_fraction <= 0.5:
            raise ValueError("validation_fraction must lie in [0, 0.5]")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam *ascent* step, updating ``params`` in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name!r} at step {state.step + 1}")
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[name] += cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)


def _split(n, fraction, rng):
    perm = rng.permutation(n)
    n_val = int(math.floor(fraction * n))
    if n_val and n - n_val < 1:
        n_val = n - 1
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _batches(n, size, rng):
    perm = rng.permutation(n)
    return [perm[k:k + size] for k in range(0, n, size)]


def _mean_ll(model, which, x):
    if x.shape[0] == 0:
        return float("nan")
    return float(np.mean(log_likelihood(model, which, x)))


def fit_joint(
    source: Dataset,
    target: Dataset,
    d: Optional[int] = None,
    H: int = 50,
    N: int = 5,
    cfg: Optional[TrainConfig] = None,
    *,
    metrics: Optional[Callable[[str], None]] = None,
    train_heads=("source", "target"),
) -> KrdaModel:
    """Fit backbone and both heads by alternating source and target minibatches.

    Each step draws one source batch (updates backbone + source head) and one
    target batch (backbone + target head).  The returned model is the one with
    the best summed validation mean log-likelihood, or the last one when no
    validation split is used.  ``metrics`` receives one CSV line per epoch.
    ``train_heads`` restricts training to a subset of domains; the heads of
    excluded domains are left untouched.
    """
    cfg = cfg or TrainConfig()
    d = source.d if d is None else d
    if source.d != d or target.d != d:
        raise DimensionMismatch(f"source has d={source.d}, target has d={target.d}, expected d={d}")
    if source.n < 2 or target.n < 2:
        raise EmptyDataset(f"need at least 2 rows per domain (source n={source.n}, target n={target.n})")

    rng = np.random.default_rng(cfg.seed)
    init_seed, split_seed, shuffle_seed = rng.integers(0, 2**63, size=3)
    split_rng = np.random.default_rng(split_seed)
    shuffle_rng = np.random.default_rng(shuffle_seed)

    std = Standardizer.fit(source.features, target.features)
    model = KrdaModel.init(d, H, N, seed=int(init_seed), standardizer=std)
    data = {"source": std.apply(source.features), "target": std.apply(target.features)}
    train, val = {}, {}
    for which in ("source", "target"):
        tr, va = _split(data[which].shape[0], cfg.validation_fraction, split_rng)
        train[which], val[which] = data[which][tr], data[which][va]
    use_val = all(v.shape[0] > 0 for v in val.values())

    backbone_params = model.backbone.arrays()
    states = {"backbone": AdamState(), "source": AdamState(), "target": AdamState()}
    patience = cfg.patience or 0

    best_score = -math.inf
    best_model = None
    stale = 0
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        order = {w: _batches(train[w].shape[0], cfg.batch_size, shuffle_rng) for w in ("source", "target")}
        n_steps = max((len(order[w]) for w in train_heads), default=0)
        for step in range(n_steps):
            for which in train_heads:
                rows = order[which][step % len(order[which])]
                g = log_likelihood_grad(model, which, train[which][rows])
                head_grad = g.source_head if which == "source" else g.target_head
                adam_step(backbone_params, g.backbone.arrays(), states["backbone"], cfg)
                adam_step(model.head(which).arrays(), head_grad.arrays(), states[which], cfg)

        tr_ll = {w: _mean_ll(model, w, train[w]) for w in ("source", "target")}
        va_ll = {w: _mean_ll(model, w, val[w]) for w in ("source", "target")}
        if not all(math.isfinite(tr_ll[w]) for w in train_heads):
            raise NonFiniteGradient(f"training log-likelihood became non-finite at epoch {epoch}")
        if metrics is not None:
            elapsed = int(round(1000 * (time.perf_counter() - t0)))
            metrics(
                f"{epoch},{tr_ll['source']!r},{tr_ll['target']!r},{va_ll['source']!r},{va_ll['target']!r},{elapsed}"
            )
        if not use_val:
            continue
        score = sum(va_ll[w] for w in train_heads)
        if score > best_score:
            best_score = score
            best_model = model.copy()
            stale = 0
        else:
            stale += 1
            if patience and stale >= patience:
                log.info("early stop at epoch %d (best validation %.4f)", epoch, best_score)
                break
    return best_model if best_model is not None else model
