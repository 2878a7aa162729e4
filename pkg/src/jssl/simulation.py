"""Cox-Weibull simulator with latent event and censoring times."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .composition import WeibullStateModel
from .data import Dataset, Observation
from .errors import CalibrationError, InvalidConfigurationError
from .hazards import WeibullHazard, ZeroHazard
from .rng import make_rng

COVARIATE_KINDS = ("gaussian", "bernoulli", "categorical")


@dataclass(frozen=True)
class CovariateSpec:
    name: str
    kind: str
    mean: float = 0.0
    sd: float = 1.0
    p: float = 0.5
    levels: tuple = ()
    probabilities: tuple = ()

    def __post_init__(self):
        if self.kind not in COVARIATE_KINDS:
            raise InvalidConfigurationError(f"unknown covariate kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sd > 0:
            raise InvalidConfigurationError(f"{self.name}: sd must be positive")
        if self.kind == "bernoulli" and not 0.0 <= self.p <= 1.0:
            raise InvalidConfigurationError(f"{self.name}: p must lie in [0, 1]")
        if self.kind == "categorical":
            probs = np.asarray(self.probabilities, dtype=float)
            if len(self.levels) != len(probs) or not len(probs) or np.any(probs < 0) \
                    or abs(probs.sum() - 1.0) > 1e-9:
                raise InvalidConfigurationError(f"{self.name}: bad categorical levels/probabilities")

    def draw(self, rng, n):
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.sd, n)
        if self.kind == "bernoulli":
            return (rng.random(n) < self.p).astype(float)
        idx = rng.choice(len(self.levels), size=n, p=np.asarray(self.probabilities, dtype=float))
        return np.asarray(self.levels, dtype=float)[idx]

    def to_dict(self):
        out = {"name": self.name, "kind": self.kind}
        if self.kind == "gaussian":
            out.update(mean=self.mean, sd=self.sd)
        elif self.kind == "bernoulli":
            out.update(p=self.p)
        else:
            out.update(levels=list(self.levels), probabilities=list(self.probabilities))
        return out

    @classmethod
    def from_dict(cls, obj):
        obj = dict(obj)
        for key in ("levels", "probabilities"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return cls(**obj)


@dataclass(frozen=True)
class WeibullSpec:
    scale: float
    shape: float
    coef: tuple

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise InvalidConfigurationError("Weibull scale and shape must be positive")
        object.__setattr__(self, "coef", tuple(float(c) for c in self.coef))

    def hazard(self):
        return WeibullHazard(self.scale, self.shape, self.coef)

    def to_dict(self):
        return {"scale": self.scale, "shape": self.shape, "coef": list(self.coef)}


@dataclass(frozen=True)
class SimulationScenario:
    """Ground truth: covariate marginals and Cox-Weibull cause and censoring hazards."""

    name: str
    covariates: tuple
    cause1: WeibullSpec
    censoring: WeibullSpec
    cause2: WeibullSpec | None = None
    censoring_mode: str = "dependent"
    tau: float = 36.0
    admin_censoring_time: float | None = None
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        p = len(self.covariates)
        for label, spec in (("cause1", self.cause1), ("cause2", self.cause2), ("censoring", self.censoring)):
            if spec is not None and len(spec.coef) != p:
                raise InvalidConfigurationError(f"{label}: {len(spec.coef)} coefficients for {p} covariates")
        if self.censoring_mode not in ("dependent", "independent"):
            raise InvalidConfigurationError(f"unknown censoring mode {self.censoring_mode!r}")
        if not self.tau > 0:
            raise InvalidConfigurationError("tau must be positive")

    @property
    def p(self):
        return len(self.covariates)

    @property
    def covariate_names(self):
        return [c.name for c in self.covariates]

    @property
    def admin_time(self):
        return 2.0 * self.tau if self.admin_censoring_time is None else float(self.admin_censoring_time)

    def censoring_coef(self):
        if self.censoring_mode == "independent":
            return np.zeros(self.p)
        return np.asarray(self.censoring.coef)

    def hazards(self):
        """True (Lambda1, Lambda2, Gamma)."""
        l2 = self.cause2.hazard() if self.cause2 is not None else ZeroHazard()
        gamma = WeibullHazard(self.censoring.scale, self.censoring.shape, self.censoring_coef())
        return self.cause1.hazard(), l2, gamma

    def to_dict(self):
        return {"name": self.name, "covariates": [c.to_dict() for c in self.covariates],
                "cause1": self.cause1.to_dict(),
                "cause2": None if self.cause2 is None else self.cause2.to_dict(),
                "censoring": self.censoring.to_dict(), "censoring_mode": self.censoring_mode,
                "tau": self.tau, "admin_censoring_time": self.admin_censoring_time,
                "notes": self.notes}

    @classmethod
    def from_dict(cls, obj):
        try:
            return cls(
                name=obj.get("name", "scenario"),
                covariates=tuple(CovariateSpec.from_dict(c) for c in obj["covariates"]),
                cause1=WeibullSpec(**obj["cause1"]),
                censoring=WeibullSpec(**obj["censoring"]),
                cause2=WeibullSpec(**obj["cause2"]) if obj.get("cause2") else None,
                censoring_mode=obj.get("censoring_mode", "dependent"),
                tau=float(obj.get("tau", 36.0)),
                admin_censoring_time=obj.get("admin_censoring_time"),
                notes=obj.get("notes", ""))
        except (KeyError, TypeError) as exc:
            raise InvalidConfigurationError(f"malformed scenario: {exc}") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def load_scenario(path_or_name):
    """Load a scenario JSON file, or a bundled scenario by name."""
    path = Path(path_or_name)
    if path.suffix != ".json" and not path.exists():
        bundled = resources.files("jssl.scenarios").joinpath(f"{path_or_name}.json")
        if not bundled.is_file():
            known = sorted(f.name[:-5] for f in resources.files("jssl.scenarios").iterdir()
                           if f.name.endswith(".json"))
            raise InvalidConfigurationError(f"no scenario file {path_or_name!r} and no bundled "
                                            f"scenario of that name (bundled: {', '.join(known)})")
        text = bundled.read_text()
    else:
        try:
            text = path.read_text()
        except OSError as exc:
            raise InvalidConfigurationError(f"cannot read scenario {path}: {exc}") from exc
    try:
        return SimulationScenario.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InvalidConfigurationError(f"scenario {path_or_name} is not valid JSON: {exc}") from exc


def invert_weibull(u, scale, shape, lp=0.0):
    """Time t with exp(-scale * t**shape * exp(lp)) = u."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise InvalidConfigurationError("u must lie strictly inside (0, 1)")
    if not (scale > 0 and shape > 0):
        raise InvalidConfigurationError("scale and shape must be positive")
    # a hazard that underflows to zero gives an infinite time
    with np.errstate(divide="ignore", over="ignore"):
        t = (-np.log(u) / (scale * np.exp(lp))) ** (1.0 / shape)
    return float(t) if t.ndim == 0 else t


def _uniform(rng, n):
    u = rng.random(n)
    return np.where(u == 0.0, np.nextafter(0.0, 1.0), u)


@dataclass(frozen=True)
class LatentRecord:
    T: float
    D: int
    C: float
    x: tuple
    observed: Observation


@dataclass
class LatentData:
    """Latent truths of a simulated sample, column-wise."""

    T: np.ndarray
    D: np.ndarray
    C: np.ndarray
    X: np.ndarray
    admin_time: float

    def records(self, observed):
        return [LatentRecord(float(self.T[i]), int(self.D[i]), float(self.C[i]), tuple(self.X[i]),
                             observed.observation(i)) for i in range(self.T.shape[0])]

    def uncensored(self, names):
        """Dataset of the latent (T, D) pairs, for evaluation without censoring."""
        return Dataset(self.T, self.D, self.X, tuple(names))


def _draws(s, n, rng):
    X = np.column_stack([c.draw(rng, n) for c in s.covariates]) if s.p else np.zeros((n, 0))
    U1 = _uniform(rng, n)
    U2 = _uniform(rng, n) if s.cause2 is not None else None
    Uc = _uniform(rng, n)
    return X, U1, U2, Uc


def _latent_times(s, X, U1, U2, Uc, scale1=None, scale_c=None):
    c1, cc = s.cause1, s.censoring
    T1 = invert_weibull(U1, c1.scale if scale1 is None else scale1, c1.shape, X @ np.asarray(c1.coef))
    if U2 is not None:
        T2 = invert_weibull(U2, s.cause2.scale, s.cause2.shape, X @ np.asarray(s.cause2.coef))
    else:
        T2 = np.full_like(T1, np.inf)
    C = invert_weibull(Uc, cc.scale if scale_c is None else scale_c, cc.shape, X @ s.censoring_coef())
    return T1, T2, C


def simulate_dataset(s, n, seed=0):
    """Draw n observations; returns (observed Dataset, LatentData)."""
    if n < 1:
        raise InvalidConfigurationError("n must be at least 1")
    rng = make_rng("simulate", int(seed))
    X, U1, U2, Uc = _draws(s, n, rng)
    T1, T2, C = _latent_times(s, X, U1, U2, Uc)
    T = np.minimum(T1, T2)
    D = np.where(T2 < T1, 2, 1)
    admin = s.admin_time
    time = np.minimum(np.minimum(T, C), admin)
    status = np.where((T <= C) & (T <= admin), D, 0)
    d = Dataset(time, status, X, tuple(s.covariate_names))
    return d, LatentData(T, D, C, X, admin)


def true_state_occupation(s, tol=1e-8):
    """F_P composed from the true hazards."""
    return WeibullStateModel(*s.hazards(), tol=tol)


def sample_covariates(s):
    """x_sampler for mc_norm_squared: (rng, m) -> covariate rows drawn from the scenario."""
    return lambda rng, m: np.column_stack([c.draw(rng, m) for c in s.covariates])


def marginal_rates(s, horizon, n=50_000, seed=0):
    """Latent P(T <= h, D = 1) and P(C <= h) by Monte Carlo."""
    rng = make_rng("calibrate", int(seed))
    X, U1, U2, Uc = _draws(s, n, rng)
    T1, T2, C = _latent_times(s, X, U1, U2, Uc)
    return float(np.mean((T1 <= horizon) & (T1 <= T2))), float(np.mean(C <= horizon))


def _bisect(rate, target, start, label, iters=200):
    # rate is non-decreasing in the scale; search on the log scale
    lo = hi = math.log(start)
    r_lo = r_hi = rate(math.exp(lo))
    step = 1.0
    while r_lo > target and lo > -745:
        lo = max(lo - step, -745.0)
        step *= 2
        r_lo = rate(math.exp(lo))
    step = 1.0
    while r_hi < target and hi < 709:
        hi = min(hi + step, 709.0)
        step *= 2
        r_hi = rate(math.exp(hi))
    if not r_lo <= target <= r_hi:
        raise CalibrationError(f"{label} target {target} outside achievable range [{r_lo}, {r_hi}]",
                               (r_lo, r_hi))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if rate(math.exp(mid)) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return math.exp(0.5 * (lo + hi))


def calibrate_scenario(targets, template, n=50_000, seed=0):
    """Rescale cause-1 and censoring so latent marginal rates at the horizon hit the targets.

    ``targets`` holds ``event_rate`` (P(T <= h, D = 1)), ``censor_rate``
    (P(C <= h)) and ``horizon``. Common random numbers make both rates
    monotone step functions of the scales, so bisection is exact up to
    Monte Carlo error.
    """
    h = float(targets.get("horizon", template.tau))
    ev, cr = float(targets["event_rate"]), float(targets["censor_rate"])
    for v in (ev, cr):
        if not 0.0 < v < 1.0:
            raise InvalidConfigurationError("calibration targets must lie in (0, 1)")
    rng = make_rng("calibrate", int(seed))
    X, U1, U2, Uc = _draws(template, n, rng)
    _, T2, _ = _latent_times(template, X, U1, U2, Uc)
    c1, cc = template.cause1, template.censoring
    lp1 = X @ np.asarray(c1.coef)
    lpc = X @ template.censoring_coef()
    # T1 <= h  iff  scale * h**shape * exp(lp) >= -log U1
    with np.errstate(divide="ignore", over="ignore"):
        a1 = -np.log(U1) / (h ** c1.shape * np.exp(lp1))
        ac = -np.log(Uc) / (h ** cc.shape * np.exp(lpc))
    a1_comp = a1 * np.maximum((h / np.minimum(T2, h)) ** c1.shape, 1.0)

    def event_rate(scale):
        return float(np.mean(scale >= a1_comp))

    def censor_rate(scale):
        return float(np.mean(scale >= ac))

    s1 = _bisect(event_rate, ev, c1.scale, "event_rate")
    sc = _bisect(censor_rate, cr, cc.scale, "censor_rate")
    return replace(template, cause1=replace(c1, scale=s1), censoring=replace(cc, scale=sc))
