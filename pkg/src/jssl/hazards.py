"""Fitted conditional cumulative hazards and the learner library."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigurationError
from .rng import derive_seed

TARGETS = ("cause1", "cause2", "censoring")


def _as_2d(X, p=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if p is None or X.shape[0] == p else X.reshape(-1, p)
    return X


class FittedCumulativeHazard:
    """Right-continuous step cumulative hazard t -> Lambda(t | x).

    Subclasses provide ``jump_times`` and :meth:`increments`; everything
    else is derived from those two.
    """

    is_step = True
    jump_times: np.ndarray

    def increments(self, X, t_max=None):
        """Jump sizes at ``jump_times`` (up to ``t_max``) for each row of X."""
        raise NotImplementedError

    def _n_cols(self, t_max):
        if t_max is None:
            return self.jump_times.shape[0]
        return int(np.searchsorted(self.jump_times, t_max, side="right"))

    def cumhaz(self, t, X):
        """Lambda(t | x) for each row of X (axis 0) and time in t (axis 1)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        X = _as_2d(X)
        cum = np.cumsum(self.increments(X), axis=1)
        pos = np.searchsorted(self.jump_times, t, side="right")
        cum = np.hstack([np.zeros((X.shape[0], 1)), cum])
        return cum[:, pos]

    def cumhaz_left(self, t, X):
        """Left limit Lambda(t- | x)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        X = _as_2d(X)
        cum = np.hstack([np.zeros((X.shape[0], 1)), np.cumsum(self.increments(X), axis=1)])
        return cum[:, np.searchsorted(self.jump_times, t, side="left")]

    def evaluate(self, t, x):
        return float(self.cumhaz([t], _as_2d(x))[0, 0])

    def increment_pairs(self, x):
        x = _as_2d(x)
        return list(zip(self.jump_times.tolist(), self.increments(x)[0].tolist()))

    def to_dict(self):
        raise NotImplementedError


class ZeroHazard(FittedCumulativeHazard):
    def __init__(self):
        self.jump_times = np.empty(0)

    def increments(self, X, t_max=None):
        return np.zeros((_as_2d(X).shape[0], 0))

    def to_dict(self):
        return {"type": "zero"}


class NelsonAalenHazard(FittedCumulativeHazard):
    """Covariate-free step hazard with fixed increments."""

    def __init__(self, jump_times, dL):
        self.jump_times = np.asarray(jump_times, dtype=float)
        self.dL = np.asarray(dL, dtype=float)

    def increments(self, X, t_max=None):
        m = self._n_cols(t_max)
        return np.broadcast_to(self.dL[:m], (_as_2d(X).shape[0], m)).copy()

    def to_dict(self):
        return {"type": "nelson_aalen", "jump_times": self.jump_times.tolist(), "dL": self.dL.tolist()}


class CoxHazard(FittedCumulativeHazard):
    """Breslow baseline times exp(beta'(x - center))."""

    def __init__(self, jump_times, dL0, beta, center, loglik=None, n_iter=0):
        self.jump_times = np.asarray(jump_times, dtype=float)
        self.dL0 = np.asarray(dL0, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.loglik = loglik
        self.n_iter = n_iter

    def linear_predictor(self, X):
        return (_as_2d(X, self.beta.shape[0]) - self.center) @ self.beta

    def increments(self, X, t_max=None):
        m = self._n_cols(t_max)
        r = np.exp(self.linear_predictor(X))
        return r[:, None] * self.dL0[None, :m]

    def to_dict(self):
        return {"type": "cox", "jump_times": self.jump_times.tolist(), "dL0": self.dL0.tolist(),
                "beta": self.beta.tolist(), "center": self.center.tolist()}


class WeibullHazard:
    """Continuous hazard Lambda(t|x) = scale * t**shape * exp(beta'x)."""

    is_step = False

    def __init__(self, scale, shape, coef):
        if scale < 0 or shape <= 0:
            raise InvalidConfigurationError("Weibull scale must be >= 0 and shape > 0")
        self.scale = float(scale)
        self.shape = float(shape)
        self.coef = np.asarray(coef, dtype=float)

    def rate(self, X):
        X = _as_2d(X, self.coef.shape[0]) if self.coef.shape[0] else np.zeros((_as_2d(X).shape[0], 0))
        return self.scale * np.exp(X @ self.coef)

    def cumhaz(self, t, X):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.rate(X)[:, None] * t[None, :] ** self.shape

    cumhaz_left = cumhaz

    def hazard(self, t, X):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.rate(X)[:, None] * self.shape * t[None, :] ** (self.shape - 1.0)

    def evaluate(self, t, x):
        return float(self.cumhaz([t], x)[0, 0])

    def scaled(self, factor):
        return WeibullHazard(self.scale * factor, self.shape, self.coef)

    def to_dict(self):
        return {"type": "weibull", "scale": self.scale, "shape": self.shape, "coef": self.coef.tolist()}


def nelson_aalen_increments(time, event):
    """Distinct event times and d(s)/Y(s), Y(s) = #{time >= s}."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    if not event.any():
        return np.empty(0), np.empty(0)
    ut, inv = np.unique(time, return_inverse=True)
    at_risk = time.shape[0] - np.concatenate([[0], np.cumsum(np.bincount(inv))[:-1]])
    d = np.bincount(inv, weights=event.astype(float), minlength=ut.shape[0])
    keep = d > 0
    return ut[keep], d[keep] / at_risk[keep].astype(float)


def fit_nelson_aalen(d, target="cause1"):
    jt, dL = nelson_aalen_increments(d.time, d.event_indicator(target))
    if jt.shape[0] == 0:
        return ZeroHazard()
    return NelsonAalenHazard(jt, dL)


def hazard_from_dict(obj):
    kind = obj["type"]
    if kind == "zero":
        return ZeroHazard()
    if kind == "nelson_aalen":
        return NelsonAalenHazard(obj["jump_times"], obj["dL"])
    if kind == "cox":
        return CoxHazard(obj["jump_times"], obj["dL0"], obj["beta"], obj["center"])
    if kind == "weibull":
        return WeibullHazard(obj["scale"], obj["shape"], obj["coef"])
    if kind == "forest":
        from .forest import ForestHazard
        return ForestHazard.from_dict(obj)
    raise InvalidConfigurationError(f"unknown hazard type {kind!r}")


# ---------------------------------------------------------------------------
# learner specifications
# ---------------------------------------------------------------------------

KINDS = ("nelson_aalen", "cox", "cox_elastic_net", "survival_forest")

_ALLOWED = {
    "nelson_aalen": set(),
    "cox": {"tol", "max_iter", "beta_cap"},
    "cox_elastic_net": {"alpha", "lambda_grid_size", "inner_folds", "lambda_", "lambda_min_ratio",
                        "tol", "max_iter", "lambda_rule"},
    "survival_forest": {"n_trees", "mtry", "min_node_size", "bootstrap", "max_cuts"},
}

_DISPLAY = {"nelson_aalen": "Nelson-Aalen", "cox": "Cox", "cox_elastic_net": "elastic net",
            "survival_forest": "random forest"}


@dataclass(frozen=True)
class LearnerSpec:
    """A learner: maps a training Dataset to a FittedCumulativeHazard."""

    kind: str
    target: str = "cause1"
    hyperparameters: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfigurationError(f"unknown learner kind {self.kind!r}")
        if self.target not in TARGETS:
            raise InvalidConfigurationError(f"unknown target {self.target!r}")
        extra = set(self.hyperparameters) - _ALLOWED[self.kind]
        if extra:
            raise InvalidConfigurationError(f"{self.kind}: unknown hyperparameters {sorted(extra)}")
        hp = self.hyperparameters
        if self.kind == "cox_elastic_net":
            a = hp.get("alpha", 1.0)
            if not 0.0 <= a <= 1.0:
                raise InvalidConfigurationError(f"alpha must be in [0, 1], got {a}")
        if self.kind == "survival_forest":
            for key in ("n_trees", "min_node_size"):
                if key in hp and int(hp[key]) < 1:
                    raise InvalidConfigurationError(f"{key} must be >= 1")
        if not self.name:
            object.__setattr__(self, "name", _default_name(self.kind, hp))

    def with_target(self, target):
        return LearnerSpec(self.kind, target, dict(self.hyperparameters), self.name)

    def fit(self, d, target=None, seed=0):
        target = target or self.target
        hp = self.hyperparameters
        if self.kind == "nelson_aalen":
            return fit_nelson_aalen(d, target)
        if self.kind == "cox":
            from .cox import fit_cox
            return fit_cox(d, target, **hp)
        if self.kind == "cox_elastic_net":
            from .cox import fit_cox_elastic_net
            return fit_cox_elastic_net(d, target, seed=seed, **hp)
        from .forest import fit_survival_forest
        return fit_survival_forest(d, target, seed=seed, **hp)

    def to_dict(self):
        return {"kind": self.kind, "target": self.target,
                "hyperparameters": dict(self.hyperparameters), "name": self.name}

    @classmethod
    def from_dict(cls, obj, target=None):
        return cls(obj["kind"], target or obj.get("target", "cause1"),
                   dict(obj.get("hyperparameters", {})), obj.get("name", ""))


def _default_name(kind, hp):
    if kind == "cox_elastic_net":
        a = hp.get("alpha", 1.0)
        return "lasso" if a == 1.0 else ("ridge" if a == 0.0 else "elastic net")
    return _DISPLAY[kind]


def fit_seed(master_seed, repetition, fold, learner_name):
    """Per-fit seed; independent of execution order and worker count."""
    return derive_seed(int(master_seed), repetition, fold, learner_name) >> 1


def check_hazard(h, X, tau, n_grid=200):
    """Verify the FittedCumulativeHazard invariants on a probe grid; returns a list of violations."""
    t = np.linspace(0.0, tau, n_grid + 1)
    L = h.cumhaz(t, X)
    problems = []
    if not np.all(np.isfinite(L)):
        problems.append("non-finite values")
    if np.any(np.diff(L, axis=1) < -1e-12):
        problems.append("not non-decreasing")
    if np.any(np.abs(L[:, 0]) > 0) and (not h.is_step or np.any(h.jump_times <= 0)):
        problems.append("nonzero at 0")
    if h.is_step and h.jump_times.shape[0]:
        jt = h.jump_times[h.jump_times <= tau]
        if np.any(np.abs(h.cumhaz(jt, X) - h.cumhaz(jt + 1e-12 * np.maximum(1.0, jt), X)) > 1e-12):
            problems.append("not right-continuous")
    if math.isinf(np.max(L, initial=0.0)):
        problems.append("infinite at tau")
    return problems
