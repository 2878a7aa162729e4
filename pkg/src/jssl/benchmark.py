"""Monte Carlo comparison of the joint super learner with IPCW baselines.

A benchmark cell is one (sample size, repetition) pair: simulate a
training set, run every method, and score the selected cause-1 learner
by IPA on one large uncensored test set shared by all cells of the
scenario. Cells are independent and may run in worker processes; the
collector sorts results so output files do not depend on scheduling.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import ipa, select_ipcw_sl
from .data import make_folds
from .errors import InvalidConfigurationError, JSSLError
from .hazards import LearnerSpec, fit_seed
from .prediction import RiskPredictionModel
from .rng import derive_seed
from .scoring import FitCache, ROLES, select_discrete_jssl
from .simulation import SimulationScenario, load_scenario, simulate_dataset

METHODS = ("jssl", "ipcw_km", "ipcw_cox", "oracle")
IPCW_CENSOR_KIND = {"ipcw_km": "km", "ipcw_cox": "cox"}

DEFAULT_LIBRARY = [
    {"kind": "nelson_aalen"},
    {"kind": "cox"},
    {"kind": "survival_forest", "hyperparameters": {"n_trees": 100}},
]


@dataclass
class BenchmarkConfig:
    scenario: object = "dependent"
    sizes: list = field(default_factory=lambda: [300, 1000, 2000])
    repetitions: int = 100
    methods: list = field(default_factory=lambda: list(METHODS))
    libraries: dict = field(default_factory=lambda: {
        "cause1": DEFAULT_LIBRARY, "cause2": [{"kind": "nelson_aalen"}], "censoring": DEFAULT_LIBRARY})
    K: int = 5
    R: int = 1
    tau: float = 36.0
    t_star: float = 36.0
    seed: int = 1
    test_size: int = 20_000
    output_dir: str = "benchmark_out"

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidConfigurationError(f"unknown methods {sorted(unknown)}")
        if not self.methods:
            raise InvalidConfigurationError("no methods requested")
        if self.repetitions < 1:
            raise InvalidConfigurationError("repetitions must be >= 1")
        for n in self.sizes:
            if n < 2 * self.K:
                raise InvalidConfigurationError(f"sample size {n} is below 2K = {2 * self.K}")
        for role in ROLES:
            if role not in self.libraries or not self.libraries[role]:
                raise InvalidConfigurationError(f"library for {role} is missing or empty")
        self.learners()

    def load_scenario(self) -> SimulationScenario:
        if isinstance(self.scenario, dict):
            return SimulationScenario.from_dict(self.scenario)
        return load_scenario(self.scenario)

    def learners(self):
        return tuple([LearnerSpec.from_dict(obj, role) for obj in self.libraries[role]] for role in ROLES)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, obj):
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfigurationError(f"unknown config keys {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfigurationError(f"cannot read config {path}: {exc}") from exc


_TEST_SETS = {}


def shared_test_set(scenario, size, seed):
    """The uncensored evaluation sample of a scenario (memoized per process)."""
    key = (json.dumps(scenario.to_dict(), sort_keys=True), size, seed)
    if key not in _TEST_SETS:
        _, latent = simulate_dataset(scenario, size, derive_seed(seed, "test", scenario.name))
        _TEST_SETS[key] = latent.uncensored(scenario.covariate_names)
    return _TEST_SETS[key]


def _failed(base, method, exc, selected=""):
    return dict(base, method=method, selected=selected, ipa=math.nan, brier=math.nan, null_brier=math.nan,
                oracle_agree="", error=exc if isinstance(exc, str) else f"{type(exc).__name__}: {exc}")


def run_cell(config: BenchmarkConfig, n, rep):
    """All methods on one simulated training set; returns a list of result rows.

    A method that fails (e.g. a positivity violation in an IPCW weight)
    gets an error row; the other methods of the cell are unaffected.
    """
    scenario = config.load_scenario()
    A1, A2, B = config.learners()
    cell_seed = derive_seed(config.seed, "cell", scenario.name, n, rep)
    base = {"scenario": scenario.name, "n": n, "rep": rep, "seed": cell_seed}
    t0 = time.perf_counter()
    try:
        train, _ = simulate_dataset(scenario, n, cell_seed)
        test = shared_test_set(scenario, config.test_size, config.seed)
        plan = make_folds(n, config.K, config.R, derive_seed(cell_seed, "folds"))
        # each cause-1 learner refit on the full training set, scored once on the test set
        h2 = A2[0].fit(train, "cause2", fit_seed(cell_seed, -1, 0, A2[0].name))
    except JSSLError as exc:
        return [_failed(base, m, exc) for m in config.methods]
    reports = []
    for learner in A1:
        try:
            h1 = learner.fit(train, "cause1", fit_seed(cell_seed, -1, 0, learner.name))
            model = RiskPredictionModel(h1, h2, config.t_star)
            reports.append(ipa(model, test, config.t_star, learner.name))
        except JSSLError:
            reports.append(None)
    scores = [r.ipa if r is not None else -math.inf for r in reports]
    oracle = int(np.argmax(scores))
    cache = FitCache()
    rows = []
    for m in config.methods:
        try:
            if m == "jssl":
                idx = select_discrete_jssl(A1, A2, B, train, plan, config.tau, cell_seed, cache=cache)[0].a1
            elif m == "oracle":
                idx = oracle
            else:
                idx = select_ipcw_sl(A1, IPCW_CENSOR_KIND[m], train, plan, config.t_star, cell_seed,
                                     cache=cache)[0]
        except JSSLError as exc:
            rows.append(_failed(base, m, exc))
            continue
        rep_ = reports[idx]
        if rep_ is None:
            rows.append(_failed(base, m, "refit of selected learner failed", A1[idx].name))
            continue
        rows.append(dict(base, method=m, selected=A1[idx].name, ipa=rep_.ipa, brier=rep_.brier,
                         null_brier=rep_.null_brier, oracle_agree=int(idx == oracle), error=""))
    elapsed = time.perf_counter() - t0
    for r in rows:
        r["_elapsed"] = elapsed
    return rows


def _cell_task(args):
    cfg, n, rep = args
    return run_cell(BenchmarkConfig.from_dict(cfg), n, rep)


def run_benchmark(config: BenchmarkConfig, jobs=1, progress=None):
    """Run every (n, repetition) cell; returns the tidy rows in sorted order."""
    cells = [(config.to_dict(), n, rep) for n in config.sizes for rep in range(config.repetitions)]
    rows = []
    if jobs <= 1:
        for i, c in enumerate(cells):
            rows.extend(_cell_task(c))
            if progress:
                progress(i + 1, len(cells))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for i, res in enumerate(ex.map(_cell_task, cells)):
                rows.extend(res)
                if progress:
                    progress(i + 1, len(cells))
    order = {m: k for k, m in enumerate(METHODS)}
    rows.sort(key=lambda r: (r["n"], r["rep"], order[r["method"]]))
    return rows


TIDY_COLUMNS = ["scenario", "n", "rep", "seed", "method", "selected", "ipa", "brier", "null_brier",
                "oracle_agree", "error"]
AGG_COLUMNS = ["scenario", "n", "method", "reps", "failed", "mean_ipa", "se_ipa", "mean_brier",
               "oracle_agreement"]


def aggregate(rows):
    """Mean IPA with Monte Carlo standard error per (scenario, n, method)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["n"], r["method"]), []).append(r)
    order = {m: k for k, m in enumerate(METHODS)}
    out = []
    for (sc, n, m) in sorted(groups, key=lambda k: (k[0], k[1], order[k[2]])):
        g = groups[(sc, n, m)]
        ok = [r for r in g if not r["error"]]
        ipas = np.array([r["ipa"] for r in ok], dtype=float)
        briers = np.array([r["brier"] for r in ok], dtype=float)
        agree = [r["oracle_agree"] for r in g if r["oracle_agree"] != ""]
        out.append({
            "scenario": sc, "n": n, "method": m, "reps": len(g), "failed": len(g) - len(ok),
            "mean_ipa": float(ipas.mean()) if ipas.size else math.nan,
            "se_ipa": float(ipas.std(ddof=1) / math.sqrt(ipas.size)) if ipas.size > 1 else math.nan,
            "mean_brier": float(briers.mean()) if briers.size else math.nan,
            "oracle_agreement": float(np.mean(agree)) if agree else math.nan,
        })
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(rows, columns, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_outputs(rows, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    agg = aggregate(rows)
    write_csv(rows, TIDY_COLUMNS, outdir / "results.csv")
    write_csv(agg, AGG_COLUMNS, outdir / "aggregate.csv")
    return agg
