"""Independent reference computations shared by the unit and acceptance tests."""

import math

import numpy as np
from scipy import integrate

from krda.mixture import GaussianMixture1D, mixture_cdf
from krda.nade import Backbone, DomainHead, KrdaModel, log_likelihood, log_likelihood_grad


def ref_pdf(w, mu, s, x):
    return sum(wk * math.exp(-0.5 * ((x - mk) / sk) ** 2) / (sk * math.sqrt(2 * math.pi))
               for wk, mk, sk in zip(w, mu, s))


def quad_cdf(m: GaussianMixture1D, x: float) -> float:
    """CDF by adaptive quadrature of each component density, split at its mean."""
    total = 0.0
    for wk, mk, sk in zip(m.weights, m.means, m.stds):
        dens = lambda t, mk=mk, sk=sk: math.exp(-0.5 * ((t - mk) / sk) ** 2) / (sk * math.sqrt(2 * math.pi))
        if x <= mk:
            val = integrate.quad(dens, -np.inf, x, epsabs=1e-14, epsrel=1e-12)[0]
        else:
            val = 0.5 + integrate.quad(dens, mk, x, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        total += wk * val
    return total


def random_mixture(rng, n_max=10, mu_abs=50.0, s_lo=1e-6, s_hi=20.0) -> GaussianMixture1D:
    n = int(rng.integers(1, n_max + 1))
    w = rng.dirichlet(np.ones(n))
    w = w / w.sum()
    s = np.exp(rng.uniform(math.log(s_lo), math.log(s_hi), n))
    return GaussianMixture1D(w, rng.uniform(-mu_abs, mu_abs, n), s)


def round_trip_ok(m: GaussianMixture1D, q: float, z: float, tol: float = 1e-9) -> bool:
    """``F(z)`` within ``tol`` of the clipped ``q``, unless float64 cannot resolve it.

    When the CDF jumps by more than ``tol`` between ``z`` and the next float
    below it, no float achieves the tolerance; then ``z`` must be the exact
    float pseudo-inverse: ``F(prev(z)) <= q < F(z)``.
    """
    q = min(max(q, 1e-8), 1 - 1e-8)
    fz = float(mixture_cdf(m, z))
    if abs(fz - q) <= tol:
        return True
    prev = float(mixture_cdf(m, np.nextafter(z, -np.inf)))
    return fz - prev > tol and prev <= q < fz


def random_model(rng, d=3, H=6, N=3, scale=0.8) -> KrdaModel:
    """A model with every parameter random (rescale included) for gradient checks."""
    def u(*shape):
        return rng.uniform(-scale, scale, shape)

    def head():
        return DomainHead(rng.uniform(0.5, 1.5, d), u(N, H), u(N), u(N, H), u(N), u(N, H) * 0.5, u(N) * 0.5)

    return KrdaModel(d, H, N, Backbone(u(H), u(H, d)), head(), head(), None)


def _flat_params(model):
    out = []
    for group in ("backbone", "source_head", "target_head"):
        for name, arr in getattr(model, group).arrays().items():
            for idx in np.ndindex(arr.shape):
                out.append((group, name, idx))
    return out


def safe_for_fd(model, which, batch, margin=1e-4) -> bool:
    """True when no relu input is within ``margin`` of its kink."""
    from krda.nade import activations
    head = model.head(which)
    a = activations(model, batch)  # (n, d, H)
    pre = a * head.rescale[None, :, None]
    return bool(np.all(np.abs(pre) > margin))


def fd_check(model, which, batch, step=1e-5):
    """Max relative error of the analytic gradient against central differences."""
    grad = log_likelihood_grad(model, which, batch)
    worst = 0.0
    for group, name, idx in _flat_params(model):
        arr = getattr(model, group).arrays()[name]
        old = arr[idx]
        arr[idx] = old + step
        up = np.mean(log_likelihood(model, which, batch))
        arr[idx] = old - step
        down = np.mean(log_likelihood(model, which, batch))
        arr[idx] = old
        fd = (up - down) / (2 * step)
        an = getattr(grad, group).arrays()[name][idx]
        worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-8))
    return worst
