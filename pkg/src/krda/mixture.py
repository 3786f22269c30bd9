"""One-dimensional Gaussian mixtures: density, CDF, quantile function, sampling.

The ``*_batch`` functions take parameter arrays whose last axis indexes the
mixture components, so a whole column of conditionals (one per data row) can
be evaluated or inverted at once.  Every row is processed independently, so a
row's result does not depend on which other rows share the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import BracketNotFound

SIGMA_FLOOR = 1e-6
QUANTILE_EPS = 1e-8
MAX_BRACKET_EXPONENT = 64
MAX_BISECTION_ITERS = 200

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianMixture1D:
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.atleast_1d(np.asarray(self.means, dtype=float))
        s = np.atleast_1d(np.asarray(self.stds, dtype=float))
        if w.ndim != 1 or w.shape != mu.shape or w.shape != s.shape:
            raise ValueError("weights, means and stds must be 1-D arrays of equal length")
        if w.size < 1:
            raise ValueError("a mixture needs at least one component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if not np.all(np.isfinite(mu)):
            raise ValueError("means must be finite")
        if np.any(~(s >= SIGMA_FLOOR)):
            raise ValueError(f"stds must be >= {SIGMA_FLOOR}")
        for name, arr in (("weights", w), ("means", mu), ("stds", s)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return self.weights.size


def std_normal_cdf(z):
    """Standard normal CDF, accurate to ~1e-16 absolute over the whole line."""
    return ndtr(z)


def log_pdf_batch(weights, means, stds, x):
    """Mixture log-density; ``x`` broadcasts against the leading axes."""
    x = np.asarray(x, dtype=float)[..., None]
    z = (x - means) / stds
    with np.errstate(divide="ignore"):
        terms = np.log(weights) - np.log(stds) - _LOG_SQRT_2PI - 0.5 * z * z
    top = np.max(terms, axis=-1, keepdims=True)
    out = top[..., 0] + np.log(np.sum(np.exp(terms - top), axis=-1))
    return out


def cdf_batch(weights, means, stds, x):
    x = np.asarray(x, dtype=float)[..., None]
    return np.sum(weights * ndtr((x - means) / stds), axis=-1)


def inverse_cdf_batch(weights, means, stds, q):
    """Pseudo-inverse CDF ``inf{z : F(z) > q}`` by bracketed bisection.

    ``q`` is clipped to ``[QUANTILE_EPS, 1 - QUANTILE_EPS]``.  The bracket is
    the smallest ``[-2**k, 2**k]`` with ``F(-2**k) <= q < F(2**k)``; bisection
    keeps that invariant and runs until the endpoints are adjacent floats (or
    the iteration cap), then returns the upper endpoint.  Because the
    computed CDF is monotone in floating point, the answer does not depend on
    the bracket found, which makes the map monotone in ``q`` and
    deterministic per row.

    Returns ``(z, ok)``; rows with ``ok == False`` had no bracket and hold NaN.
    """
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    q = np.clip(np.asarray(q, dtype=float), QUANTILE_EPS, 1.0 - QUANTILE_EPS)
    shape = np.broadcast_shapes(q.shape, weights.shape[:-1])
    q = np.broadcast_to(q, shape).copy()
    weights, means, stds = (np.broadcast_to(a, shape + a.shape[-1:]) for a in (weights, means, stds))
    if shape == ():
        z, found = inverse_cdf_batch(weights[None], means[None], stds[None], q[None])
        return z[0], found[0]

    lo = np.full(shape, np.nan)
    hi = np.full(shape, np.nan)
    found = np.zeros(shape, dtype=bool)
    for k in range(MAX_BRACKET_EXPONENT + 1):
        bound = 2.0 ** k
        ok = (cdf_batch(weights, means, stds, -bound) <= q) & (q < cdf_batch(weights, means, stds, bound))
        new = ok & ~found
        lo[new] = -bound
        hi[new] = bound
        found |= new
        if found.all():
            break

    active = found.copy()
    for _ in range(MAX_BISECTION_ITERS):
        if not active.any():
            break
        idx = np.nonzero(active)
        a, b = lo[idx], hi[idx]
        mid = 0.5 * (a + b)
        done = (mid <= a) | (mid >= b)
        f = cdf_batch(weights[idx], means[idx], stds[idx], mid)
        go_right = (f <= q[idx]) & ~done
        go_left = (f > q[idx]) & ~done
        lo[idx] = np.where(go_right, mid, a)
        hi[idx] = np.where(go_left, mid, b)
        still = active[idx] & ~done
        active[idx] = still
    return hi, found


def mixture_pdf(m: GaussianMixture1D, x):
    return np.exp(log_pdf_batch(m.weights, m.means, m.stds, x))


def mixture_log_pdf(m: GaussianMixture1D, x):
    return log_pdf_batch(m.weights, m.means, m.stds, x)


def mixture_cdf(m: GaussianMixture1D, x):
    return cdf_batch(m.weights, m.means, m.stds, x)


def mixture_inverse_cdf(m: GaussianMixture1D, q):
    """Quantile of ``m`` at probability ``q`` (scalar or array)."""
    q_arr = np.asarray(q, dtype=float)
    z, ok = inverse_cdf_batch(m.weights, m.means, m.stds, q_arr)
    if not np.all(ok):
        raise BracketNotFound(f"no bracket [-2**k, 2**k], k <= {MAX_BRACKET_EXPONENT}, contains the quantile")
    return float(z) if q_arr.ndim == 0 else z


def sample_batch(weights, means, stds, rng):
    """One draw per leading-axis row; ancestral: component, then Gaussian."""
    weights = np.asarray(weights, dtype=float)
    u = rng.random(weights.shape[:-1])
    cum = np.cumsum(weights, axis=-1)
    k = np.sum(cum < (u * cum[..., -1])[..., None], axis=-1)
    k = np.minimum(k, weights.shape[-1] - 1)
    mu = np.take_along_axis(np.asarray(means, dtype=float), k[..., None], axis=-1)[..., 0]
    s = np.take_along_axis(np.asarray(stds, dtype=float), k[..., None], axis=-1)[..., 0]
    return mu + s * rng.standard_normal(weights.shape[:-1])


def mixture_sample(m: GaussianMixture1D, rng: np.random.Generator, size=None):
    if size is None:
        return float(sample_batch(m.weights, m.means, m.stds, rng))
    w, mu, s = (np.broadcast_to(a, (size, m.n_components)) for a in (m.weights, m.means, m.stds))
    return sample_batch(w, mu, s, rng)
