"""Cause-specific Cox regression with Breslow ties.

Competing events and censoring both count as censored for the fitted
cause. Covariates are standardised internally; coefficients are reported
on the original scale together with the centring vector used by the
Breslow baseline.
"""
import numpy as np

from .data import make_folds
from .errors import ConvergenceError, FitError, InvalidConfigurationError, SingularInformationError
from .hazards import CoxHazard


class PartialLikelihood:
    """Breslow log partial likelihood of one cause, with derivatives.

    Rows are sorted by descending time once at construction; the risk set
    of an observation is every row with time greater or equal to its own.
    """

    def __init__(self, X, time, event):
        X = np.asarray(X, dtype=float)
        order = np.argsort(-np.asarray(time, dtype=float), kind="stable")
        self.X = X[order]
        self.time = np.asarray(time, dtype=float)[order]
        self.event = np.asarray(event, dtype=bool)[order]
        t = self.time
        n = t.shape[0]
        # index of the last row (in descending order) sharing each row's time
        last = np.empty(n, dtype=np.int64)
        if n:
            change = np.flatnonzero(np.append(t[1:] != t[:-1], True))
            grp = np.searchsorted(change, np.arange(n))
            last = change[grp]
        self.last = last
        self.n = n

    def value(self, beta):
        eta = self.X @ beta
        shift = eta.max() if self.n else 0.0
        w = np.exp(eta - shift)
        s0 = np.cumsum(w)[self.last]
        ev = self.event
        return float(np.sum(eta[ev] - np.log(s0[ev]) - shift))

    def derivatives(self, beta):
        """Log partial likelihood, gradient and Hessian at beta."""
        X = self.X
        eta = X @ beta
        shift = eta.max() if self.n else 0.0
        w = np.exp(eta - shift)
        s0 = np.cumsum(w)[self.last]
        s1 = np.cumsum(w[:, None] * X, axis=0)[self.last]
        s2 = np.cumsum(w[:, None, None] * X[:, :, None] * X[:, None, :], axis=0)[self.last]
        ev = self.event
        xbar = s1[ev] / s0[ev, None]
        loglik = float(np.sum(eta[ev] - np.log(s0[ev]) - shift))
        grad = np.sum(X[ev] - xbar, axis=0)
        hess = -np.sum(s2[ev] / s0[ev, None, None] - xbar[:, :, None] * xbar[:, None, :], axis=0)
        return loglik, grad, hess


def breslow(time, event, lp):
    """Breslow baseline increments dLambda0(s) = d(s) / sum_{time >= s} exp(lp)."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    if not event.any():
        return np.empty(0), np.empty(0)
    ut, inv = np.unique(time, return_inverse=True)
    w = np.exp(lp)
    tot = np.bincount(inv, weights=w, minlength=ut.shape[0])
    s0 = np.cumsum(tot[::-1])[::-1]
    d = np.bincount(inv, weights=event.astype(float), minlength=ut.shape[0])
    keep = d > 0
    return ut[keep], d[keep] / s0[keep]


def _standardize(X):
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0) if X.shape[0] else np.zeros(X.shape[1])
    sd = X.std(axis=0) if X.shape[0] else np.ones(X.shape[1])
    active = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
    Z = np.zeros_like(X)
    Z[:, active] = (X[:, active] - mu[active]) / sd[active]
    return Z, mu, sd, active


def _assemble(d, event, beta_std, mu, sd, active, **extra):
    beta = np.zeros(d.p)
    beta[active] = beta_std[active] / sd[active]
    lp = (d.X - mu) @ beta
    jt, dL0 = breslow(d.time, event, lp)
    h = CoxHazard(jt, dL0, beta, mu)
    for k, v in extra.items():
        setattr(h, k, v)
    return h


def newton_raphson(pl, beta0, tol=1e-9, max_iter=50, beta_cap=500.0, max_halvings=10):
    """Maximise a PartialLikelihood; returns (beta, loglik, trace)."""
    beta = np.array(beta0, dtype=float)
    loglik, grad, hess = pl.derivatives(beta)
    trace = [loglik]
    if max_iter == 0:
        return beta, loglik, trace
    for _ in range(max_iter):
        info = -hess
        try:
            np.linalg.cholesky(info)
        except np.linalg.LinAlgError:
            raise SingularInformationError(
                "information matrix is singular; consider removing collinear or "
                "uninformative covariates", trace) from None
        ev = np.linalg.eigvalsh(info)
        if ev[0] <= 1e-12 * max(ev[-1], 1.0):
            raise SingularInformationError(
                "information matrix is numerically singular; consider removing covariates", trace)
        step = np.linalg.solve(info, grad)
        accepted = False
        for h in range(max_halvings + 1):
            cand = beta + step * 0.5 ** h
            new = pl.value(cand)
            if np.isfinite(new) and new >= loglik:
                accepted = True
                break
        if not accepted:
            # no ascent possible along the Newton direction: numerically at the optimum
            return beta, loglik, trace
        if np.max(np.abs(cand)) > beta_cap:
            raise ConvergenceError(
                f"coefficients exceed the cap {beta_cap} (monotone likelihood)", trace + [new])
        change = abs(new - loglik)
        beta = cand
        loglik, grad, hess = pl.derivatives(beta)
        trace.append(loglik)
        if change <= tol * (abs(trace[-2]) + tol):
            return beta, loglik, trace
    raise ConvergenceError(f"Newton-Raphson did not converge in {max_iter} iterations", trace)


def fit_cox(d, target="cause1", tol=1e-9, max_iter=50, beta_cap=500.0):
    """Cause-specific Cox model by Newton-Raphson from beta = 0."""
    if d.p < 1:
        raise FitError("Cox regression needs at least one covariate")
    event = d.event_indicator(target)
    if not event.any():
        raise FitError(f"no events for target {target!r}")
    Z, mu, sd, active = _standardize(d.X)
    beta_std = np.zeros(d.p)
    loglik = None
    trace = []
    if active.any():
        pl = PartialLikelihood(Z[:, active], d.time, event)
        b, loglik, trace = newton_raphson(pl, np.zeros(active.sum()), tol, max_iter, beta_cap)
        beta_std[active] = b
    return _assemble(d, event, beta_std, mu, sd, active, loglik=loglik, n_iter=len(trace) - 1,
                     trace=trace)


# ---------------------------------------------------------------------------
# elastic net
# ---------------------------------------------------------------------------

def _soft(z, g):
    return np.sign(z) * max(abs(z) - g, 0.0)


def _penalty(beta, lam, alpha):
    return lam * (alpha * np.abs(beta).sum() + 0.5 * (1.0 - alpha) * beta @ beta)


def _enet_solve(pl, beta, lam, alpha, tol=1e-7, max_iter=100):
    """Minimise -l(beta)/n + penalty by coordinate descent on successive quadratic models."""
    n = max(pl.n, 1)
    p = beta.shape[0]
    beta = beta.copy()
    loglik, grad, hess = pl.derivatives(beta)
    obj = -loglik / n + _penalty(beta, lam, alpha)
    for _ in range(max_iter):
        g = grad / n
        H = -hess / n
        new = beta.copy()
        for _sweep in range(1000):
            biggest = 0.0
            for j in range(p):
                delta = new - beta
                z = g[j] + H[j, j] * beta[j] - (H[j] @ delta - H[j, j] * delta[j])
                denom = H[j, j] + lam * (1.0 - alpha)
                bj = _soft(z, lam * alpha) / denom if denom > 0 else 0.0
                biggest = max(biggest, abs(bj - new[j]))
                new[j] = bj
            if biggest < 1e-10:
                break
        step = new - beta
        for _h in range(20):
            cand = beta + step
            cand_obj = -pl.value(cand) / n + _penalty(cand, lam, alpha)
            if cand_obj <= obj + 1e-15:
                break
            step = step * 0.5
        else:
            return beta
        done = abs(obj - cand_obj) <= tol * (abs(obj) + tol)
        beta, obj = cand, cand_obj
        if done or np.max(np.abs(step)) < 1e-10:
            return beta
        loglik, grad, hess = pl.derivatives(beta)
    return beta


def enet_lambda_max(pl, alpha):
    _, grad, _ = pl.derivatives(np.zeros(pl.X.shape[1]))
    return float(np.max(np.abs(grad)) / max(pl.n, 1) / max(alpha, 1e-3)) if grad.size else 0.0


def enet_path(pl, lambdas, alpha, tol=1e-7, max_iter=100):
    beta = np.zeros(pl.X.shape[1])
    out = np.empty((len(lambdas), beta.shape[0]))
    for k, lam in enumerate(lambdas):
        beta = _enet_solve(pl, beta, lam, alpha, tol, max_iter)
        out[k] = beta
    return out


def fit_cox_elastic_net(d, target="cause1", alpha=1.0, lambda_grid_size=50, inner_folds=5,
                        lambda_=None, lambda_min_ratio=1e-3, tol=1e-7, max_iter=100, seed=0,
                        lambda_rule="min"):
    """Penalised cause-specific Cox model.

    Without ``lambda_`` the penalty is picked from a log-spaced path by
    cross-validated partial likelihood deviance (van Houwelingen form:
    full-data minus training-data log partial likelihood per fold).
    ``lambda_rule="1se"`` takes the largest penalty whose deviance is
    within one fold standard error of the minimum.
    """
    if lambda_rule not in ("min", "1se"):
        raise InvalidConfigurationError(f"lambda_rule must be 'min' or '1se', got {lambda_rule!r}")
    if d.p < 1:
        raise FitError("Cox regression needs at least one covariate")
    event = d.event_indicator(target)
    if not event.any():
        raise FitError(f"no events for target {target!r}")
    Z, mu, sd, active = _standardize(d.X)
    beta_std = np.zeros(d.p)
    if not active.any():
        return _assemble(d, event, beta_std, mu, sd, active, lambda_=np.inf, alpha=alpha)
    Za = Z[:, active]
    pl = PartialLikelihood(Za, d.time, event)
    if lambda_ is not None:
        lam = float(lambda_)
        grid = enet_lambda_max(pl, alpha) * np.logspace(0, np.log10(lambda_min_ratio), lambda_grid_size)
        lambdas = [float(l) for l in grid if l > lam] + [lam]
        beta_std[active] = enet_path(pl, lambdas, alpha, tol, max_iter)[-1]
        return _assemble(d, event, beta_std, mu, sd, active, lambda_=lam, alpha=alpha)
    lmax = enet_lambda_max(pl, alpha)
    if lmax <= 0.0:
        return _assemble(d, event, beta_std, mu, sd, active, lambda_=0.0, alpha=alpha)
    lambdas = lmax * np.logspace(0, np.log10(lambda_min_ratio), lambda_grid_size)
    full_path = enet_path(pl, lambdas, alpha, tol, max_iter)
    k_inner = min(int(inner_folds), d.n)
    if k_inner >= 2:
        plan = make_folds(d.n, k_inner, 1, seed)
        fold_dev = np.zeros((k_inner, len(lambdas)))
        for k in range(1, k_inner + 1):
            tr = plan.train_index(0, k)
            pl_tr = PartialLikelihood(Za[tr], d.time[tr], event[tr])
            betas = enet_path(pl_tr, lambdas, alpha, tol, max_iter)
            fold_dev[k - 1] = [-2.0 * (pl.value(b) - pl_tr.value(b)) for b in betas]
        dev = fold_dev.sum(axis=0)
        best = int(np.argmin(dev))
        if lambda_rule == "1se":
            se = k_inner * fold_dev.std(axis=0, ddof=1)[best] / np.sqrt(k_inner)
            # lambdas run from largest to smallest, so the first hit is the sparsest
            best = int(np.flatnonzero(dev <= dev[best] + se)[0])
    else:
        best = len(lambdas) - 1
    beta_std[active] = full_path[best]
    return _assemble(d, event, beta_std, mu, sd, active, lambda_=float(lambdas[best]), alpha=alpha)

