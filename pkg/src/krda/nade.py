"""Autoregressive Gaussian-mixture density model with a shared NADE backbone.

The backbone ``(c, W)`` runs the additive recurrence

    a^1 = c,    a^{i+1} = a^i + x^i * W[:, i]

and each domain head turns ``h^i = relu(rescale[i] * a^i)`` into mixture
weights (softmax), means and standard deviations (``exp(0.5 * logvar)``).
Two heads, ``"source"`` and ``"target"``, share one backbone.

All inputs are in standardized coordinates; ``KrdaModel.standardizer`` maps
to and from the original feature space.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .data import Standardizer
from .errors import DimensionMismatch
from .mixture import SIGMA_FLOOR, GaussianMixture1D, log_pdf_batch, sample_batch

FORMAT_VERSION = 1
HEADS = ("source", "target")


@dataclass
class Backbone:
    c: np.ndarray  # (H,)
    W: np.ndarray  # (H, d)

    def arrays(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class DomainHead:
    rescale: np.ndarray  # (d,)
    w_weight: np.ndarray  # (N, H)
    w_bias: np.ndarray  # (N,)
    mu_weight: np.ndarray
    mu_bias: np.ndarray
    logvar_weight: np.ndarray
    logvar_bias: np.ndarray

    def arrays(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def zeros(cls, d, H, N) -> "DomainHead":
        return cls(
            rescale=np.ones(d),
            w_weight=np.zeros((N, H)), w_bias=np.zeros(N),
            mu_weight=np.zeros((N, H)), mu_bias=np.zeros(N),
            logvar_weight=np.zeros((N, H)), logvar_bias=np.zeros(N),
        )


@dataclass
class KrdaModel:
    d: int
    H: int
    N: int
    backbone: Backbone
    source_head: DomainHead
    target_head: DomainHead
    standardizer: Standardizer

    @classmethod
    def init(cls, d, H=50, N=5, seed=0, standardizer: Optional[Standardizer] = None) -> "KrdaModel":
        """Fan-in uniform weights, unit rescaling, zero weight/log-variance biases.

        Mean biases start at the standard-normal quantiles ``(k + 0.5) / N``;
        identical starting means form a symmetric saddle that gradient ascent
        leaves only very slowly.
        """
        if d < 1 or H < 1 or N < 1:
            raise ValueError("d, H and N must all be >= 1")
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(H)
        spread = ndtri((np.arange(N) + 0.5) / N)

        def u(*shape):
            return rng.uniform(-bound, bound, size=shape)

        backbone = Backbone(c=u(H), W=u(H, d))

        def head():
            return DomainHead(
                rescale=np.ones(d),
                w_weight=u(N, H), w_bias=np.zeros(N),
                mu_weight=u(N, H), mu_bias=spread.copy(),
                logvar_weight=u(N, H), logvar_bias=np.zeros(N),
            )

        src = head()
        tgt = head()
        if standardizer is None:
            standardizer = Standardizer(np.zeros(d), np.ones(d))
        return cls(d, H, N, backbone, src, tgt, standardizer)

    def head(self, which: str) -> DomainHead:
        if which == "source":
            return self.source_head
        if which == "target":
            return self.target_head
        raise ValueError(f"unknown head {which!r}; expected 'source' or 'target'")

    def copy(self) -> "KrdaModel":
        return copy.deepcopy(self)


@dataclass
class Gradient:
    backbone: Backbone
    source_head: DomainHead
    target_head: DomainHead


def _check_rows(model: KrdaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.d:
        raise DimensionMismatch(f"input has {x.shape[-1]} components, model expects d={model.d}")
    return x


def _affine_rowwise(h, weight, bias):
    # Fixed summation order over hidden units, so a row's output is bit-identical
    # whatever the other rows in the batch are.
    out = np.broadcast_to(bias, h.shape[:-1] + bias.shape).copy()
    for j in range(h.shape[-1]):
        out += h[..., j:j + 1] * weight[:, j]
    return out


def _affine_fast(h, weight, bias):
    return h @ weight.T + bias


def _head_outputs(head: DomainHead, h, affine):
    logits = affine(h, head.w_weight, head.w_bias)
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    weights = e / e.sum(axis=-1, keepdims=True)
    means = affine(h, head.mu_weight, head.mu_bias)
    logvar = affine(h, head.logvar_weight, head.logvar_bias)
    with np.errstate(over="ignore"):
        stds = np.maximum(np.exp(0.5 * logvar), SIGMA_FLOOR)
    return weights, means, stds, logvar


def activations(model: KrdaModel, x) -> np.ndarray:
    """Hidden activations ``a^1..a^d`` for rows of ``x``; shape ``(..., d, H)``."""
    x = _check_rows(model, x)
    W = model.backbone.W
    out = np.empty(x.shape[:-1] + (model.d, model.H))
    a = np.broadcast_to(model.backbone.c, x.shape[:-1] + (model.H,)).copy()
    for i in range(model.d):
        out[..., i, :] = a
        a = a + x[..., i:i + 1] * W[:, i]
    return out


def forward_activations(model: KrdaModel, x) -> list:
    x = _check_rows(model, x)
    if x.ndim != 1:
        raise DimensionMismatch("forward_activations takes a single vector")
    return list(activations(model, x))


def factor_params(model: KrdaModel, which: str, a_i, i: int):
    """Mixture parameters of factor ``i`` (0-based) from activation ``a^i``."""
    head = model.head(which)
    h = np.maximum(head.rescale[i] * a_i, 0.0)
    w, mu, s, _ = _head_outputs(head, h, _affine_rowwise)
    return w, mu, s


def mixture_params(model: KrdaModel, which: str, x):
    """Parameters of every conditional factor for rows of ``x``: three ``(..., d, N)`` arrays."""
    acts = activations(model, x)
    ws, mus, ss = [], [], []
    for i in range(model.d):
        w, mu, s = factor_params(model, which, acts[..., i, :], i)
        ws.append(w)
        mus.append(mu)
        ss.append(s)
    return np.stack(ws, axis=-2), np.stack(mus, axis=-2), np.stack(ss, axis=-2)


def conditional_mixture(model: KrdaModel, which: str, x, i: int) -> GaussianMixture1D:
    """Conditional of component ``i`` (1-based) given ``x[:i-1]``."""
    x = _check_rows(model, x)
    if x.ndim != 1:
        raise DimensionMismatch("conditional_mixture takes a single vector")
    if not 1 <= i <= model.d:
        raise IndexError(f"component index {i} outside 1..{model.d}")
    a = activations(model, x)[i - 1]
    w, mu, s = factor_params(model, which, a, i - 1)
    return GaussianMixture1D(w, mu, s)


def log_likelihood_factors(model: KrdaModel, which: str, x) -> np.ndarray:
    """Per-factor conditional log-densities, shape ``(..., d)``."""
    x = _check_rows(model, x)
    w, mu, s = mixture_params(model, which, x)
    return log_pdf_batch(w, mu, s, x)


def log_likelihood(model: KrdaModel, which: str, x):
    """Log-density of standardized rows ``x`` under one head."""
    return log_likelihood_factors(model, which, x).sum(axis=-1)


def log_likelihood_grad(model: KrdaModel, which: str, batch) -> Gradient:
    """Exact gradient of the batch-mean log-likelihood.

    Only the selected head receives a nonzero gradient; the other head's
    entries are exact zeros.
    """
    X = _check_rows(model, batch)
    if X.ndim != 2:
        raise DimensionMismatch("batch must be a matrix")
    n = X.shape[0]
    head = model.head(which)
    c, W = model.backbone.c, model.backbone.W
    d, H = model.d, model.H

    g_head = DomainHead.zeros(d, H, model.N)
    g_head.rescale[:] = 0.0
    grad_a = np.zeros((n, d, H))

    a = np.broadcast_to(c, (n, H)).copy()
    acts = []
    for i in range(d):
        acts.append(a)
        pre = head.rescale[i] * a
        h = np.maximum(pre, 0.0)
        w, mu, s, logvar = _head_outputs(head, h, _affine_fast)
        x = X[:, i:i + 1]
        z = (x - mu) / s
        terms = np.log(w) - np.log(s) - 0.5 * z * z
        r = np.exp(terms - terms.max(axis=1, keepdims=True))
        r /= r.sum(axis=1, keepdims=True)

        d_logits = r - w
        d_mu = r * z / s
        floored = np.exp(0.5 * logvar) < SIGMA_FLOOR
        d_logvar = np.where(floored, 0.0, 0.5 * r * (z * z - 1.0))

        g_head.w_weight += d_logits.T @ h
        g_head.w_bias += d_logits.sum(axis=0)
        g_head.mu_weight += d_mu.T @ h
        g_head.mu_bias += d_mu.sum(axis=0)
        g_head.logvar_weight += d_logvar.T @ h
        g_head.logvar_bias += d_logvar.sum(axis=0)

        d_h = d_logits @ head.w_weight + d_mu @ head.mu_weight + d_logvar @ head.logvar_weight
        d_pre = np.where(pre > 0.0, d_h, 0.0)
        g_head.rescale[i] = np.sum(d_pre * a)
        grad_a[:, i, :] = d_pre * head.rescale[i]
        a = a + x * W[:, i]

    g_c = grad_a.sum(axis=(0, 1))
    g_W = np.zeros_like(W)
    # a^i depends on x^j W[:, j] for every j < i
    downstream = np.zeros((n, H))
    for j in range(d - 1, -1, -1):
        g_W[:, j] = X[:, j] @ downstream
        downstream = downstream + grad_a[:, j, :]

    scale = 1.0 / n
    g_backbone = Backbone(c=g_c * scale, W=g_W * scale)
    for name, arr in g_head.arrays().items():
        arr *= scale
    zero = DomainHead.zeros(d, H, model.N)
    zero.rescale[:] = 0.0
    if which == "source":
        return Gradient(g_backbone, g_head, zero)
    return Gradient(g_backbone, zero, g_head)


def sample(model: KrdaModel, which: str, rng: np.random.Generator, n: Optional[int] = None):
    """Ancestral sampling in standardized coordinates."""
    rows = 1 if n is None else n
    x = np.zeros((rows, model.d))
    a = np.broadcast_to(model.backbone.c, (rows, model.H)).copy()
    for i in range(model.d):
        w, mu, s = factor_params(model, which, a, i)
        x[:, i] = sample_batch(w, mu, s, rng)
        a = a + x[:, i:i + 1] * model.backbone.W[:, i]
    return x[0] if n is None else x


def _head_to_dict(head: DomainHead) -> dict:
    return {k: v.tolist() for k, v in head.arrays().items()}


def to_dict(model: KrdaModel) -> dict:
    return {
        "format": "krda-model",
        "format_version": FORMAT_VERSION,
        "d": model.d,
        "H": model.H,
        "N": model.N,
        "backbone": {k: v.tolist() for k, v in model.backbone.arrays().items()},
        "source_head": _head_to_dict(model.source_head),
        "target_head": _head_to_dict(model.target_head),
        "standardizer": {"mean": model.standardizer.mean.tolist(), "std": model.standardizer.std.tolist()},
    }


def from_dict(doc: dict) -> KrdaModel:
    if doc.get("format") != "krda-model":
        raise ValueError("not a krda model document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
    d, H, N = int(doc["d"]), int(doc["H"]), int(doc["N"])

    def arr(v, shape):
        return np.array(v, dtype=float).reshape(shape)

    backbone = Backbone(c=arr(doc["backbone"]["c"], (H,)), W=arr(doc["backbone"]["W"], (H, d)))

    def head(h):
        return DomainHead(
            rescale=arr(h["rescale"], (d,)),
            w_weight=arr(h["w_weight"], (N, H)), w_bias=arr(h["w_bias"], (N,)),
            mu_weight=arr(h["mu_weight"], (N, H)), mu_bias=arr(h["mu_bias"], (N,)),
            logvar_weight=arr(h["logvar_weight"], (N, H)), logvar_bias=arr(h["logvar_bias"], (N,)),
        )

    st = doc["standardizer"]
    standardizer = Standardizer(arr(st["mean"], (d,)), arr(st["std"], (d,)))
    if np.any(standardizer.std < 1e-12):
        raise ValueError("standardizer std below floor")
    return KrdaModel(d, H, N, backbone, head(doc["source_head"]), head(doc["target_head"]), standardizer)


def dumps(model: KrdaModel) -> str:
    return json.dumps(to_dict(model), indent=1)


def save_model(model: KrdaModel, path) -> None:
    Path(path).write_text(dumps(model) + "\n", encoding="utf-8")


def load_model(path) -> KrdaModel:
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
