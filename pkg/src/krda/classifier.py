"""RBF-kernel SVM trained with a simplified SMO solver."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, EmptyDataset, SingleClassData

KKT_TOL = 1e-3
MAX_PASSES = 50
MAX_ITER = 100_000
_ALPHA_EPS = 1e-12


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # (m, d)
    dual_coef: np.ndarray  # (m,), alpha_j * y_j
    bias: float
    gamma: float
    C: float

    def decision_function(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"input has {x.shape[1]} features, model expects {self.support_vectors.shape[1]}"
            )
        return rbf_kernel(x, self.support_vectors, self.gamma) @ self.dual_coef + self.bias


def rbf_kernel(a, b, gamma):
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def auto_gamma(x) -> float:
    """``1 / (d * mean per-column variance)``."""
    var = float(np.mean(np.var(x, axis=0)))
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0


def _signed_labels(labels) -> np.ndarray:
    y = np.asarray(labels).astype(int)
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    return np.where(y == 1, 1.0, -1.0)


def svm_fit(train: Dataset, C: float = 1.0, gamma: Union[float, str] = "auto", seed=0,
            tol: float = KKT_TOL, max_passes: int = MAX_PASSES) -> SvmModel:
    """Simplified SMO.

    Every KKT violator ``i`` is paired with a random ``j``; if that pair makes
    no progress the remaining indices are tried in random order.  Training
    stops after ``max_passes`` consecutive sweeps without a change.
    """
    if train.labels is None:
        raise ValueError("training data needs labels")
    if train.n < 2:
        raise EmptyDataset("need at least two training rows")
    X = train.features
    y = _signed_labels(train.labels)
    if np.all(y == y[0]):
        raise SingleClassData("training labels contain a single class")
    g = auto_gamma(X) if gamma == "auto" else float(gamma)
    if not g > 0 or not C > 0:
        raise ValueError("gamma and C must be positive")

    rng = np.random.default_rng(seed)
    n = X.shape[0]
    K = rbf_kernel(X, X, g)
    alpha = np.zeros(n)
    b = 0.0
    f = np.zeros(n)  # sum_j alpha_j y_j K(x_j, x) without bias

    def take_step(i, j):
        nonlocal b, f
        if i == j:
            return False
        Ei = f[i] + b - y[i]
        Ej = f[j] + b - y[j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        if H - L < _ALPHA_EPS:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0:
            return False
        aj_new = min(H, max(L, aj - y[j] * (Ei - Ej) / eta))
        if abs(aj_new - aj) < 1e-10 * (aj_new + aj + 1e-10):
            return False
        ai_new = ai + y[i] * y[j] * (aj - aj_new)
        ai_new = min(C, max(0.0, ai_new))
        b1 = b - Ei - y[i] * (ai_new - ai) * K[i, i] - y[j] * (aj_new - aj) * K[i, j]
        b2 = b - Ej - y[i] * (ai_new - ai) * K[i, j] - y[j] * (aj_new - aj) * K[j, j]
        if 0 < ai_new < C:
            b = b1
        elif 0 < aj_new < C:
            b = b2
        else:
            b = 0.5 * (b1 + b2)
        f += (ai_new - ai) * y[i] * K[i] + (aj_new - aj) * y[j] * K[j]
        alpha[i], alpha[j] = ai_new, aj_new
        return True

    passes = 0
    iters = 0
    while passes < max_passes and iters < MAX_ITER:
        changed = 0
        for i in range(n):
            r = y[i] * (f[i] + b - y[i])
            if (r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0):
                j = int(rng.integers(n - 1))
                j += j >= i
                if take_step(i, j):
                    changed += 1
                    continue
                for j in rng.permutation(n):
                    if take_step(i, int(j)):
                        changed += 1
                        break
        iters += 1
        passes = passes + 1 if changed == 0 else 0

    # Polish with maximal violating pairs; this test does not depend on b.
    while iters < MAX_ITER:
        up, low = _index_sets(alpha, y, C)
        gap = y - f
        i = int(np.flatnonzero(up)[np.argmax(gap[up])])
        j = int(np.flatnonzero(low)[np.argmin(gap[low])])
        if gap[i] - gap[j] <= 2.0 * tol or not take_step(i, j):
            break
        iters += 1
    up, low = _index_sets(alpha, y, C)
    gap = y - f
    b = 0.5 * (float(gap[up].max()) + float(gap[low].min()))
    sv = alpha > _ALPHA_EPS
    return SvmModel(X[sv].copy(), (alpha * y)[sv], float(b), g, float(C))


def _index_sets(alpha, y, C):
    """Rows whose multiplier may move so that ``y * alpha`` grows (up) or shrinks (low).

    With ``g = y - f`` the KKT conditions say ``max g[up] <= b <= min g[low]``.
    """
    below_c = alpha < C - _ALPHA_EPS
    above_0 = alpha > _ALPHA_EPS
    up = (y > 0) & below_c | (y < 0) & above_0
    low = (y > 0) & above_0 | (y < 0) & below_c
    return up, low


def svm_predict(model: SvmModel, x):
    """Labels in {0, 1}; a decision value of exactly 0 maps to 1."""
    x = np.asarray(x, dtype=float)
    scores = model.decision_function(x)
    labels = (scores >= 0).astype(int)
    return int(labels[0]) if x.ndim == 1 else labels


def accuracy(model: SvmModel, test: Dataset) -> float:
    if test.n == 0:
        raise EmptyDataset("accuracy of an empty test set is undefined")
    if test.labels is None:
        raise ValueError("test data needs labels")
    return float(np.mean(svm_predict(model, test.features) == test.labels))


def dumps(model: SvmModel) -> str:
    return json.dumps({
        "format": "krda-svm",
        "format_version": 1,
        "kernel": "rbf",
        "gamma": model.gamma,
        "C": model.C,
        "bias": model.bias,
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
    }, indent=1)


def loads(text: str) -> SvmModel:
    doc = json.loads(text)
    if doc.get("format") != "krda-svm":
        raise ValueError("not a krda SVM document")
    sv = np.array(doc["support_vectors"], dtype=float)
    return SvmModel(sv.reshape(len(doc["dual_coef"]), -1), np.array(doc["dual_coef"], dtype=float),
                    float(doc["bias"]), float(doc["gamma"]), float(doc["C"]))


def save_svm(model: SvmModel, path) -> None:
    Path(path).write_text(dumps(model) + "\n", encoding="utf-8")
