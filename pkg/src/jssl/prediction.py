"""Absolute risk and survival predictions from fitted hazards."""
import numpy as np

from . import kernels
from .composition import merge_increments
from .errors import InvalidConfigurationError
from .hazards import WeibullHazard, ZeroHazard, _as_2d

CHUNK = 2000


def _times(t):
    return np.atleast_1d(np.asarray(t, dtype=float))


def _squeeze(out, t, X):
    # scalar t and a single covariate vector give a scalar back
    if np.ndim(t) == 0 and np.asarray(X).ndim == 1:
        return float(out[0, 0])
    return out


def _continuous(h):
    return isinstance(h, (WeibullHazard, ZeroHazard))


def _risk_chunk(lambda1, lambda2, t, X, j):
    if lambda1.is_step and lambda2.is_step:
        grid, (d1, d2) = merge_increments([lambda1, lambda2], X, float(t.max()) if t.size else 0.0)
        order = np.argsort(t, kind="stable")
        out = np.empty((X.shape[0], t.shape[0]))
        out[:, order] = kernels.step_cif(grid, d1, d2, np.ascontiguousarray(t[order]), j)
        return out
    if _continuous(lambda1) and _continuous(lambda2):
        from .composition import _weibull_params
        c, nu = _weibull_params((lambda1, lambda2, ZeroHazard()), X)
        ut, inv = np.unique(t, return_inverse=True)
        F = kernels.weibull_occupation(c, nu, ut, 1e-10)
        return F[:, inv, 1 + j]
    raise TypeError("cannot mix step and continuous hazards")


def cause_specific_risk(lambda1, lambda2, t, x, j):
    """Q(T <= t, D = j | x) = int_0^t exp(-L1(u-|x) - L2(u-|x)) L_j(du|x)."""
    if j not in (1, 2):
        raise InvalidConfigurationError(f"cause must be 1 or 2, got {j}")
    tt = _times(t)
    X = _as_2d(x)
    out = np.empty((X.shape[0], tt.shape[0]))
    for s in range(0, X.shape[0], CHUNK):
        out[s:s + CHUNK] = _risk_chunk(lambda1, lambda2, tt, X[s:s + CHUNK], j)
    return _squeeze(out, t, x)


def event_free_survival(lambda1, lambda2, t, x):
    tt = _times(t)
    X = _as_2d(x)
    out = np.exp(-lambda1.cumhaz(tt, X) - lambda2.cumhaz(tt, X))
    return _squeeze(out, t, x)


def censoring_survival(gamma, t, x):
    tt = _times(t)
    X = _as_2d(x)
    return _squeeze(np.exp(-gamma.cumhaz(tt, X)), t, x)


class RiskPredictionModel:
    """Predictions from a fitted (Lambda1, Lambda2[, Gamma]) on the horizon [0, tau]."""

    def __init__(self, lambda1, lambda2, tau, gamma=None, names=None):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.gamma = gamma
        self.tau = float(tau)
        self.names = names

    def _check(self, t):
        tt = _times(t)
        bad = (tt < 0) | (tt > self.tau) | ~np.isfinite(tt)
        if bad.any():
            raise InvalidConfigurationError(
                f"prediction time {tt[bad][0]} outside [0, {self.tau}]")
        return tt

    def predict(self, t, X, cause=1):
        """Absolute risk of ``cause``, shape (n_x, n_t)."""
        return cause_specific_risk(self.lambda1, self.lambda2, self._check(t), _as_2d(X), cause)

    def survival(self, t, X):
        return event_free_survival(self.lambda1, self.lambda2, self._check(t), _as_2d(X))

    def censoring(self, t, X):
        if self.gamma is None:
            raise InvalidConfigurationError("model carries no censoring hazard")
        return censoring_survival(self.gamma, self._check(t), _as_2d(X))
