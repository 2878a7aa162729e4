"""Monte Carlo checks of the loss: strict properness and the excess-risk identity.

Both checks draw observations from a scenario with known hazards, so the
true state occupation function F_P is available in closed form up to
quadrature. Perturbed models change only the cause-1 hazard.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .composition import WeibullStateModel, mc_norm_squared
from .hazards import WeibullHazard
from .rng import derive_seed
from .simulation import sample_covariates, simulate_dataset

SCALE_FACTORS = (0.5, 0.8, 1.25, 2.0)


def perturbed_models(scenario, tol=1e-8):
    """(label, model) pairs: cause-1 scale times 0.5, 0.8, 1.25, 2.0, and a covariate-blind cause 1.

    The covariate-blind hazard keeps the Weibull shape and sets the rate
    to scale * exp(beta' E[X]), i.e. the hazard of an average subject.
    """
    l1, l2, gamma = scenario.hazards()
    out = [(f"cause1 x{f:g}", WeibullStateModel(l1.scaled(f), l2, gamma, tol)) for f in SCALE_FACTORS]
    mean_x = _covariate_means(scenario)
    blind = WeibullHazard(l1.scale * math.exp(float(l1.coef @ mean_x)), l1.shape, np.zeros_like(l1.coef))
    out.append(("covariate-blind", WeibullStateModel(blind, l2, gamma, tol)))
    return out


def _covariate_means(scenario):
    means = []
    for c in scenario.covariates:
        if c.kind == "gaussian":
            means.append(c.mean)
        elif c.kind == "bernoulli":
            means.append(c.p)
        else:
            means.append(float(np.dot(c.levels, c.probabilities)))
    return np.asarray(means, dtype=float)


@dataclass
class CheckResult:
    model: str
    value: float
    reference: float
    se: float
    statistic: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def _scores(scenario, n, seed, tol):
    d, _ = simulate_dataset(scenario, n, derive_seed(seed, "verify", scenario.name))
    truth = WeibullStateModel(*scenario.hazards(), tol=tol)
    base = truth.brier(d.time, d.status, d.X, scenario.tau)
    return d, truth, base


def properness_check(scenario, n=10_000, seed=0, z=3.0, tol=1e-8):
    """Mean integrated Brier at F_P against each perturbed model.

    Differences are paired on the same observations; a model passes when
    its mean loss exceeds that of F_P by more than ``z`` standard errors.
    """
    d, _, base = _scores(scenario, n, seed, tol)
    out = []
    for label, f in perturbed_models(scenario, tol):
        diff = f.brier(d.time, d.status, d.X, scenario.tau) - base
        se = diff.std(ddof=1) / math.sqrt(n)
        gap = float(diff.mean())
        out.append(CheckResult(label, gap, 0.0, float(se), gap / se if se > 0 else math.inf,
                               bool(gap > z * se)))
    return out


def excess_risk_check(scenario, n=10_000, m=4000, seed=0, z=3.0, tol=1e-8, grid_size=200):
    """MC excess risk of each perturbed model against the MC squared distance to F_P."""
    d, truth, base = _scores(scenario, n, seed, tol)
    sampler = sample_covariates(scenario)
    out = []
    for k, (label, f) in enumerate(perturbed_models(scenario, tol)):
        diff = f.brier(d.time, d.status, d.X, scenario.tau) - base
        excess = float(diff.mean())
        se_excess = diff.std(ddof=1) / math.sqrt(n)
        norm, se_norm = mc_norm_squared(f, truth, sampler, m, scenario.tau, grid_size,
                                        seed=derive_seed(seed, "norm", k) >> 1)
        se = math.hypot(se_excess, se_norm)
        stat = abs(excess - norm) / se if se > 0 else math.inf
        out.append(CheckResult(label, excess, norm, se, stat, bool(stat <= z)))
    return out
