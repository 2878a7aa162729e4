"""Observed-data state occupation probabilities built from a hazard triple.

States: -1 censored, 0 event-free and uncensored, 1 cause 1, 2 cause 2.
Occupation arrays returned by models are indexed ``[x, t, state + 1]``.
"""
import csv
from pathlib import Path

import numpy as np

from . import kernels
from .hazards import WeibullHazard, ZeroHazard, _as_2d

STATE_INDEX = {-1: 0, 0: 1, 1: 2, 2: 3}
DEFAULT_TOL = 1e-8

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def merge_increments(hazards, X, t_max=None):
    """Common sorted jump grid and each hazard's increments aligned to it.

    Returns ``(grid, [inc_0, inc_1, ...])`` with ``inc_k`` of shape
    ``(len(X), len(grid))``.
    """
    X = _as_2d(X)
    parts = []
    for h in hazards:
        jt = h.jump_times if t_max is None else h.jump_times[h.jump_times <= t_max]
        parts.append(jt)
    grid = np.unique(np.concatenate(parts)) if parts else np.empty(0)
    out = []
    for h, jt in zip(hazards, parts):
        inc = np.zeros((X.shape[0], grid.shape[0]))
        if jt.shape[0]:
            inc[:, np.searchsorted(grid, jt)] = h.increments(X, t_max)
        out.append(inc)
    return grid, out


def occupation_from_increments(dA1, dA2, dAc, product_limit=False):
    """State probabilities right after each grid point, shape (n, G, 4)."""
    dA = dA1 + dA2 + dAc
    if product_limit:
        f0 = np.cumprod(1.0 - dA, axis=1)
    else:
        f0 = np.exp(-np.cumsum(dA, axis=1))
    left = np.hstack([np.ones((dA.shape[0], 1)), f0[:, :-1]])
    return np.stack([np.cumsum(left * dAc, axis=1), f0,
                     np.cumsum(left * dA1, axis=1), np.cumsum(left * dA2, axis=1)], axis=2)


class StepStateModel:
    """Composition of three step cumulative hazards.

    F(t,0,x) = exp(-(L1 + L2 + G)(t|x)) and, for the other states, the
    Lebesgue-Stieltjes sum of F(s-,0,x) times the matching hazard jump.
    ``product_limit=True`` swaps the exponential for prod(1 - dA).
    """

    is_step = True

    def __init__(self, lambda1, lambda2, gamma, product_limit=False):
        self.source = (lambda1, lambda2, gamma)
        self.product_limit = product_limit

    def grid(self, x=None):
        return np.unique(np.concatenate([h.jump_times for h in self.source]))

    def aligned(self, X, t_max=None):
        return merge_increments(self.source, X, t_max)

    def occupation(self, t, X):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        X = _as_2d(X)
        grid, (d1, d2, dc) = self.aligned(X)
        F = occupation_from_increments(d1, d2, dc, self.product_limit)
        init = np.zeros((X.shape[0], 1, 4))
        init[:, 0, 1] = 1.0
        F = np.concatenate([init, F], axis=1)
        return F[:, np.searchsorted(grid, t, side="right"), :]

    def evaluate(self, t, l, X):
        return self.occupation(t, X)[:, :, STATE_INDEX[l]]

    def brier(self, time, status, X, tau):
        grid, (d1, d2, dc) = self.aligned(X, tau)
        return kernels.brier_step(np.asarray(time, dtype=float), np.asarray(status, dtype=np.int64),
                                  grid, d1, d2, dc, float(tau), bool(self.product_limit))


def _weibull_params(hazards, X):
    X = _as_2d(X)
    c = np.zeros((X.shape[0], 3))
    nu = np.ones(3)
    for k, h in enumerate(hazards):
        if isinstance(h, WeibullHazard):
            c[:, k] = h.rate(X)
            nu[k] = h.shape
        elif not isinstance(h, ZeroHazard):
            raise TypeError("continuous composition needs Weibull or zero hazards")
    return np.ascontiguousarray(c), nu


class WeibullStateModel:
    """Composition of continuous Weibull (or zero) hazards by adaptive Simpson quadrature."""

    is_step = False

    def __init__(self, lambda1, lambda2, gamma, tol=DEFAULT_TOL):
        self.source = (lambda1, lambda2, gamma)
        self.tol = tol

    def params(self, X):
        return _weibull_params(self.source, X)

    def occupation(self, t, X):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ut, inv = np.unique(t, return_inverse=True)
        c, nu = self.params(X)
        F = kernels.weibull_occupation(c, nu, ut, self.tol * 1e-2)
        return F[:, inv, :]

    def evaluate(self, t, l, X):
        return self.occupation(t, X)[:, :, STATE_INDEX[l]]

    def brier(self, time, status, X, tau):
        c, nu = self.params(X)
        return kernels.weibull_brier(c, nu, np.asarray(time, dtype=float),
                                     np.asarray(status, dtype=np.int64), float(tau), self.tol)


def compose(lambda1, lambda2, gamma, product_limit=False, tol=DEFAULT_TOL):
    hs = (lambda1, lambda2, gamma)
    if all(getattr(h, "is_step", False) for h in hs):
        return StepStateModel(lambda1, lambda2, gamma, product_limit)
    if all(isinstance(h, (WeibullHazard, ZeroHazard)) for h in hs):
        return WeibullStateModel(lambda1, lambda2, gamma, tol)
    raise TypeError("cannot compose step and continuous hazards together")


def eta(o, t):
    """State of the observed process at time t (right-continuous at o.time)."""
    if t < o.time:
        return 0
    return -1 if o.status == 0 else int(o.status)


def eta_array(time, status, t):
    time = np.asarray(time, dtype=float)[:, None]
    status = np.asarray(status)[:, None]
    state = np.where(status == 0, -1, status)
    return np.where(np.asarray(t)[None, :] < time, 0, state)


def mc_norm_squared(f, f_true, x_sampler, m, tau, grid_size=200, seed=0):
    """Monte Carlo estimate of ||f - f_true||_P^2 and its standard error.

    ``x_sampler(rng, m)`` returns m covariate rows drawn from H; the time
    integral uses the trapezoidal rule on ``grid_size`` equispaced points.
    """
    rng = np.random.default_rng(seed)
    X = x_sampler(rng, m)
    t = np.linspace(0.0, tau, grid_size)
    vals = np.empty(X.shape[0])
    for s in range(0, X.shape[0], 1000):
        diff = f.occupation(t, X[s:s + 1000]) - f_true.occupation(t, X[s:s + 1000])
        vals[s:s + 1000] = _trapezoid((diff ** 2).sum(axis=2), t, axis=1)
    se = vals.std(ddof=1) / np.sqrt(vals.shape[0]) if vals.shape[0] > 1 else 0.0
    return float(vals.mean()), float(se)


def export_curves(model, X, t, path):
    """Write F(t, l, x) to CSV with columns t, l, x_id, F."""
    F = model.occupation(t, X)
    t = np.atleast_1d(t)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "l", "x_id", "F"])
        for i in range(F.shape[0]):
            for l, k in STATE_INDEX.items():
                for j in range(t.shape[0]):
                    w.writerow([repr(float(t[j])), l, i, repr(float(F[i, j, k]))])
