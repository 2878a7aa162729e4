"""Integrated Brier score, cross-validated risk and the discrete selector."""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .composition import STATE_INDEX, compose, eta, merge_increments
from .errors import InvalidConfigurationError, NumericalError, SelectionError
from .hazards import fit_seed

ROLES = ("cause1", "cause2", "censoring")


def _check_tau(tau):
    if not tau > 0:
        raise InvalidConfigurationError(f"tau must be positive, got {tau}")


def integrated_brier(f, o, tau):
    """Integrated Brier score of state-occupation model f for one observation.

    Step models are integrated exactly, one constant piece at a time;
    continuous models use adaptive Simpson quadrature.
    """
    _check_tau(tau)
    x = np.asarray(o.covariates, dtype=float).reshape(1, -1)
    if hasattr(f, "brier"):
        return float(f.brier(np.array([o.time]), np.array([o.status]), x, tau)[0])
    return _piecewise_brier(f, o, x, tau)


def _piecewise_brier(f, o, x, tau):
    # generic step path: the integrand is constant between consecutive breakpoints
    pts = np.asarray(f.grid(x), dtype=float)
    pts = np.unique(np.concatenate([pts[(pts > 0) & (pts < tau)], [0.0, tau],
                                    [o.time] if 0 < o.time < tau else []]))
    mids = 0.5 * (pts[:-1] + pts[1:])
    F = f.occupation(mids, x)[0]
    total = 0.0
    for k, m in enumerate(mids):
        target = np.zeros(4)
        target[STATE_INDEX[eta(o, m)]] = 1.0
        total += float(np.sum((F[k] - target) ** 2)) * (pts[k + 1] - pts[k])
    return total


def brier_many(f, time, status, X, tau):
    """Per-observation integrated Brier scores for arrays of observations."""
    _check_tau(tau)
    return np.asarray(f.brier(np.asarray(time, dtype=float), np.asarray(status, dtype=np.int64),
                              X, tau))


@dataclass(frozen=True)
class TripleKey:
    a1: int
    a2: int
    b: int
    names: tuple = ("", "", "")

    @property
    def index(self):
        return (self.a1, self.a2, self.b)


@dataclass
class RiskTable:
    """Cross-validated loss of every triple, ranked."""

    keys: list
    loss: np.ndarray
    per_repetition: np.ndarray
    tau: float
    K: int
    R: int
    seed: int
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        self.loss = np.asarray(self.loss, dtype=float)
        self.per_repetition = np.asarray(self.per_repetition, dtype=float)
        # stable sort on loss keeps lexicographic (a1, a2, b) order among ties
        self.order = np.argsort(self.loss, kind="stable")
        self.rank = np.empty(len(self.keys), dtype=np.int64)
        self.rank[self.order] = np.arange(1, len(self.keys) + 1)

    @property
    def sd(self):
        if self.R < 2:
            return np.zeros(len(self.keys))
        with np.errstate(invalid="ignore"):
            sd = self.per_repetition.std(axis=1, ddof=1)
        return np.where(np.isfinite(sd), sd, np.where(np.isinf(self.loss), np.inf, 0.0))

    @property
    def best(self):
        return self.keys[int(self.order[0])]

    def rows(self):
        sd = self.sd
        for i in self.order:
            k = self.keys[i]
            yield {"rank": int(self.rank[i]), "a1": k.a1, "a2": k.a2, "b": k.b,
                   "cause1_learner": k.names[0], "cause2_learner": k.names[1],
                   "censoring_learner": k.names[2], "loss": float(self.loss[i]),
                   "sd": float(sd[i]), "per_repetition": self.per_repetition[i].tolist()}

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "cause1_learner", "cause2_learner", "censoring_learner", "loss", "sd"])
            for r in self.rows():
                w.writerow([r["rank"], r["cause1_learner"], r["cause2_learner"],
                            r["censoring_learner"], repr(r["loss"]), repr(r["sd"])])

    def to_dict(self):
        return {"tau": self.tau, "K": self.K, "R": self.R, "seed": self.seed,
                "rows": list(self.rows()), "diagnostics": self.diagnostics}

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True) + "\n")


class FitCache:
    """Per-(repetition, fold, role, learner) fits, shared by every triple using them."""

    def __init__(self):
        self.fits = {}
        self.count = 0

    def get(self, key, thunk):
        if key not in self.fits:
            self.count += 1
            self.fits[key] = thunk()
        return self.fits[key]


def _fit_one(learner, train, role, seed):
    try:
        return learner.fit(train, role, seed), None
    except NumericalError as exc:
        return None, exc


def fold_losses(libraries, d, plan, tau, master_seed=0, product_limit=False, cache=None,
                diagnostics=None):
    """Fold-mean integrated Brier scores of all triples.

    Returns an array of shape (R, K, |A1|, |A2|, |B|); a triple with a
    failed component in some fold gets +inf there.
    """
    _check_tau(tau)
    cache = FitCache() if cache is None else cache
    diagnostics = [] if diagnostics is None else diagnostics
    sizes = [len(lib) for lib in libraries]
    out = np.empty((plan.repetitions, plan.K, *sizes))
    for r in range(plan.repetitions):
        for k in range(1, plan.K + 1):
            train = d.subset(plan.train_index(r, k))
            test = d.subset(plan.test_index(r, k))
            fits = []
            for role, lib in zip(ROLES, libraries):
                row = []
                for learner in lib:
                    key = (r, k, role, learner.name)
                    seed = fit_seed(master_seed, r, k, learner.name)
                    fresh = key not in cache.fits
                    h, err = cache.get(key, lambda l=learner, s=seed, ro=role: _fit_one(l, train, ro, s))
                    if err is not None and fresh:
                        diagnostics.append({"repetition": r, "fold": k, "role": role,
                                            "learner": learner.name, "error": str(err)})
                    row.append(h)
                fits.append(row)
            ok = [[h for h in row if h is not None] for row in fits]
            grid, incs = merge_increments([h for row in ok for h in row], test.X, tau)
            it = iter(incs)
            aligned = [[next(it) if h is not None else None for h in row] for row in fits]
            time = np.ascontiguousarray(test.time)
            status = np.ascontiguousarray(test.status.astype(np.int64))
            for a1, a2, b in itertools.product(*(range(s) for s in sizes)):
                d1, d2, dc = aligned[0][a1], aligned[1][a2], aligned[2][b]
                if d1 is None or d2 is None or dc is None:
                    out[r, k - 1, a1, a2, b] = np.inf
                    continue
                losses = kernels.brier_step(time, status, grid, d1, d2, dc, float(tau), bool(product_limit))
                # fsum makes the fold mean independent of row order
                out[r, k - 1, a1, a2, b] = math.fsum(losses) / losses.shape[0]
    return out


def cv_risk(triple, libraries, d, plan, tau, master_seed=0, product_limit=False):
    """Cross-validated risk of one triple: (mean over repetitions, per-repetition values)."""
    a1, a2, b = triple.index if isinstance(triple, TripleKey) else triple
    libs = ([libraries[0][a1]], [libraries[1][a2]], [libraries[2][b]])
    per_fold = fold_losses(libs, d, plan, tau, master_seed, product_limit)[:, :, 0, 0, 0]
    per_rep = per_fold.mean(axis=1)
    return float(per_rep.mean()), per_rep


def select_discrete_jssl(A1, A2, B, d, plan, tau, master_seed=0, product_limit=False, cache=None):
    """Discrete joint survival super learner: the triple with least CV risk.

    Returns ``(TripleKey, RiskTable)``.
    """
    libraries = (list(A1), list(A2), list(B))
    if not all(libraries):
        raise InvalidConfigurationError("all three libraries must be non-empty")
    for lib in libraries:
        names = [learner.name for learner in lib]
        if len(set(names)) != len(names):
            raise InvalidConfigurationError(f"learner names within a library must be unique: {names}")
    diagnostics = []
    per_fold = fold_losses(libraries, d, plan, tau, master_seed, product_limit, cache, diagnostics)
    per_rep = per_fold.mean(axis=1)
    sizes = per_rep.shape[1:]
    keys = [TripleKey(a1, a2, b, (A1[a1].name, A2[a2].name, B[b].name))
            for a1, a2, b in itertools.product(*(range(s) for s in sizes))]
    per_rep = per_rep.reshape(plan.repetitions, -1).T
    loss = per_rep.mean(axis=1)
    table = RiskTable(keys, loss, per_rep, float(tau), plan.K, plan.repetitions, plan.seed, diagnostics)
    if not np.isfinite(loss).any():
        raise SelectionError("every triple failed in at least one fold", diagnostics)
    return table.best, table


def refit_triple(key, A1, A2, B, d, master_seed=0, product_limit=False):
    """Fit the selected triple on the full data and compose it."""
    hs = [lib[i].fit(d, role, fit_seed(master_seed, -1, 0, lib[i].name))
          for lib, i, role in zip((A1, A2, B), key.index, ROLES)]
    return hs, compose(*hs, product_limit=product_limit)
