"""IPCW super learners, the index of prediction accuracy and the oracle selector."""
from dataclasses import asdict, dataclass
import math
import warnings

import numpy as np

from .cox import fit_cox
from .errors import InvalidConfigurationError, NumericalError, PositivityError, UndefinedIPAError
from .hazards import ZeroHazard, fit_nelson_aalen, fit_seed
from .prediction import RiskPredictionModel

N_GRID = 100
POSITIVITY_EPS = 1e-6


def censoring_function(gamma):
    """Wrap a censoring hazard as G(t|x) = exp(-Gamma(t|x)), with optional left limits."""
    def G(t, X, left=False):
        L = gamma.cumhaz_left(t, X) if left else gamma.cumhaz(t, X)
        return np.exp(-L)
    return G


def _as_censor_fn(censor_model):
    if hasattr(censor_model, "cumhaz"):
        return censoring_function(censor_model)
    return censor_model


def _risks(risk_model, t, X):
    if hasattr(risk_model, "predict"):
        return np.asarray(risk_model.predict(t, X, 1), dtype=float)
    return np.asarray(risk_model(t, X), dtype=float)


def _guard(G, mask, eps, truncate, what):
    bad = mask & (G <= eps)
    if bad.any():
        if truncate:
            return np.maximum(G, eps)
        i = int(np.argwhere(bad)[0][0])
        raise PositivityError(f"censoring survival {G[bad].min():.3g} <= {eps} at {what} "
                              f"of observation {i}", i)
    return G


def ipcw_brier(risk_model, d, censor_model, t_star, integrated=False, eps=POSITIVITY_EPS,
               truncate=False):
    """Inverse probability of censoring weighted Brier score of cause-1 risk at t_star.

    Cause-1 events before t contribute (1 - r)^2 / G(T-), cause-2 events
    contribute (0 - r)^2 / G(T-), subjects still at risk contribute
    r^2 / G(t); subjects censored before t get weight 0. The integrated
    variant averages over t = t_star * k / 100, k = 1..100.
    """
    t = np.array([t_star * (k + 1) / N_GRID for k in range(N_GRID)]) if integrated else np.array([t_star])
    G = _as_censor_fn(censor_model)
    X = d.X
    r = _risks(risk_model, t, X)
    T = d.time[:, None]
    uncensored = (d.status != 0)[:, None]
    before = (T <= t[None, :]) & uncensored
    after = T > t[None, :]
    g_event = _left_at_own_time(G, d)
    g_event = _guard(g_event, uncensored[:, 0] & (d.time <= t[-1]), eps, truncate, "its event time")
    g_t = G(t, X)
    g_t = _guard(g_t, after, eps, truncate, "the evaluation time")
    y = (d.status == 1)[:, None].astype(float)
    w = np.where(before, 1.0 / g_event[:, None], 0.0) + np.where(after, 1.0 / np.where(after, g_t, 1.0), 0.0)
    target = np.where(before, y, 0.0)
    if not (before | after).any():
        warnings.warn("no observation carries IPCW weight; returning 0", RuntimeWarning, stacklevel=2)
        return 0.0
    per_t = (w * (target - r) ** 2).sum(axis=0) / d.n
    return float(per_t.mean())


def _left_at_own_time(G, d):
    # G(T_i- | X_i) for every row, in blocks to bound memory
    out = np.empty(d.n)
    for s in range(0, d.n, 2000):
        sl = slice(s, s + 2000)
        out[sl] = np.diagonal(G(d.time[sl], d.X[sl], left=True))
    return out


def fit_censoring_model(train, censor_kind):
    if censor_kind == "km":
        return fit_nelson_aalen(train, "censoring")
    if censor_kind == "cox":
        if not (train.status == 0).any():
            return ZeroHazard()
        return fit_cox(train, "censoring")
    raise InvalidConfigurationError(f"censor_kind must be 'km' or 'cox', got {censor_kind!r}")


def ipcw_fold_losses(A1, censor_kind, d, plan, t_star, master_seed=0, cache=None, truncate=False):
    """Integrated IPCW Brier score of each learner per (repetition, fold)."""
    from .scoring import FitCache, _fit_one
    cache = FitCache() if cache is None else cache
    out = np.empty((plan.repetitions, plan.K, len(A1)))
    for r in range(plan.repetitions):
        for k in range(1, plan.K + 1):
            train = d.subset(plan.train_index(r, k))
            test = d.subset(plan.test_index(r, k))
            try:
                G = cache.get((r, k, "ipcw-censoring", censor_kind),
                              lambda: fit_censoring_model(train, censor_kind))
            except NumericalError as exc:
                raise type(exc)(f"repetition {r}, fold {k}: {exc}") from exc
            h2 = fit_nelson_aalen(train, "cause2")
            for a, learner in enumerate(A1):
                key = (r, k, "cause1", learner.name)
                seed = fit_seed(master_seed, r, k, learner.name)
                h, err = cache.get(key, lambda l=learner, s=seed: _fit_one(l, train, "cause1", s))
                if err is not None:
                    out[r, k - 1, a] = np.inf
                    continue
                model = RiskPredictionModel(h, h2, t_star)
                try:
                    out[r, k - 1, a] = ipcw_brier(model, test, G, t_star, integrated=True,
                                                  truncate=truncate)
                except PositivityError as exc:
                    raise PositivityError(f"repetition {r}, fold {k}: {exc}", exc.index) from exc
    return out


def select_ipcw_sl(A1, censor_kind, d, plan, t_star, master_seed=0, cache=None, truncate=False):
    """IPCW super learner over event learners; returns (index, mean losses)."""
    if not A1:
        raise InvalidConfigurationError("event learner library is empty")
    losses = ipcw_fold_losses(A1, censor_kind, d, plan, t_star, master_seed, cache, truncate)
    mean = losses.mean(axis=1).mean(axis=0)
    return int(np.argmin(mean)), mean


@dataclass
class EvaluationReport:
    method: str
    ipa: float
    brier: float
    null_brier: float
    n_test: int
    t_star: float
    se: float = math.nan

    def to_dict(self):
        return asdict(self)


def outcome_indicator(test, t_star):
    if (test.status == 0).any():
        raise InvalidConfigurationError("IPA needs an uncensored test set")
    return ((test.time <= t_star) & (test.status == 1)).astype(float)


def ipa(risk_model, test, t_star, method="model", risks=None):
    """Index of prediction accuracy against the covariate-free empirical risk."""
    y = outcome_indicator(test, t_star)
    r = _risks(risk_model, np.array([t_star]), test.X)[:, 0] if risks is None else np.asarray(risks)
    null = y.mean()
    b_null = float(np.mean((y - null) ** 2))
    if b_null == 0.0:
        raise UndefinedIPAError("outcome is constant on the test set; IPA is undefined")
    b = float(np.mean((y - r) ** 2))
    return EvaluationReport(method, 1.0 - b / b_null, b, b_null, test.n, float(t_star))


def oracle_select(candidates, test, t_star):
    """Index of the candidate with the highest IPA; first index wins ties."""
    if not candidates:
        raise InvalidConfigurationError("no candidates")
    scores = [ipa(c, test, t_star).ipa for c in candidates]
    return int(np.argmax(scores))

