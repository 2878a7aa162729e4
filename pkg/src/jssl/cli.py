"""Command-line interface: simulate, select, predict, benchmark, verify.

Exit codes: 0 success, 2 usage or configuration error, 3 data or schema
error (including per-row prediction failures), 4 numerical failure.
The environment variable JSSL_SEED, when set, replaces the seed given in
a select or benchmark config and the --seed of verify.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .data import load_dataset, make_folds, save_dataset
from .errors import DataError, InvalidConfigurationError, JSSLError, NumericalError, SchemaError
from .hazards import LearnerSpec, hazard_from_dict
from .scoring import ROLES, refit_triple, select_discrete_jssl

log = logging.getLogger("jssl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _seed(value):
    env = os.environ.get("JSSL_SEED")
    if env is None:
        return int(value)
    try:
        return int(env)
    except ValueError:
        raise InvalidConfigurationError(f"JSSL_SEED must be an integer, got {env!r}") from None


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidConfigurationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfigurationError(f"{path} is not valid JSON: {exc}") from exc


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    from .simulation import load_scenario, simulate_dataset
    s = load_scenario(args.scenario)
    d, latent = simulate_dataset(s, args.n, args.seed)
    save_dataset(d, args.out)
    if args.latent:
        with Path(args.latent).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["T", "D", "C"])
            for i in range(d.n):
                w.writerow([repr(float(latent.T[i])), int(latent.D[i]), repr(float(latent.C[i]))])
    h = s.tau
    ev = float(np.mean((latent.T <= h) & (latent.D == 1)))
    cens = float(np.mean(latent.C <= h))
    print(f"n={d.n} latent cause-1 risk by {h:g}: {ev:.4f}  latent censoring by {h:g}: {cens:.4f}")
    print("observed status counts: " + ", ".join(f"{k}={int(np.sum(d.status == k))}" for k in (0, 1, 2)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# select
# ---------------------------------------------------------------------------

def load_library_config(path):
    """Libraries per role plus K, R, tau, seed and product_limit from a JSON file."""
    cfg = _read_json(path)
    libs = cfg.get("libraries")
    if not isinstance(libs, dict):
        raise InvalidConfigurationError(f"{path}: 'libraries' must map roles to learner lists")
    out = {"libraries": tuple([LearnerSpec.from_dict(o, role) for o in libs.get(role, [])] for role in ROLES)}
    for key, default in (("K", 5), ("R", 1), ("tau", None), ("seed", 0), ("product_limit", False)):
        out[key] = cfg.get(key, default)
    return out


def cmd_select(args):
    cfg = load_library_config(args.config)
    for key in ("K", "R", "tau", "seed"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if cfg["tau"] is None:
        raise InvalidConfigurationError("tau must be given in the config or with --tau")
    seed = _seed(cfg["seed"])
    d = load_dataset(args.data)
    plan = make_folds(d.n, int(cfg["K"]), int(cfg["R"]), seed)
    A1, A2, B = cfg["libraries"]
    key, table = select_discrete_jssl(A1, A2, B, d, plan, float(cfg["tau"]), seed, bool(cfg["product_limit"]))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "risk_table.csv")
    table.to_json(out / "risk_table.json")
    hs, _ = refit_triple(key, A1, A2, B, d, seed, bool(cfg["product_limit"]))
    manifest = {
        "tau": float(cfg["tau"]), "seed": seed, "covariate_names": list(d.covariate_names),
        "product_limit": bool(cfg["product_limit"]),
        "selected": {role: lib[i].to_dict() for role, lib, i in zip(ROLES, (A1, A2, B), key.index)},
        "loss": float(table.loss[table.order[0]]),
        "models": {role: h.to_dict() for role, h in zip(ROLES, hs)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest) + "\n")
    for row in list(table.rows())[: args.show]:
        print(f"{row['rank']:>4}  {row['cause1_learner']:<16} {row['cause2_learner']:<16} "
              f"{row['censoring_learner']:<16} {row['loss']:.6g}")
    for diag in table.diagnostics:
        log.warning("fit failed: %s", diag)
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def load_manifest(path):
    from .prediction import RiskPredictionModel
    m = _read_json(path)
    try:
        models = {role: hazard_from_dict(m["models"][role]) for role in ROLES}
        model = RiskPredictionModel(models["cause1"], models["cause2"], m["tau"], models["censoring"],
                                    names=[m["selected"][r]["name"] for r in ROLES])
        return model, list(m["covariate_names"])
    except (KeyError, TypeError) as exc:
        raise InvalidConfigurationError(f"{path}: malformed manifest ({exc})") from exc


def _read_query(path, names, time_col):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    missing = [c for c in [time_col, *names] if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}; the model expects {names} and {time_col!r}")
    idx = [header.index(c) for c in names]
    ti = header.index(time_col)
    t = np.empty(len(rows))
    X = np.empty((len(rows), len(names)))
    for r, row in enumerate(rows):
        try:
            t[r] = float(row[ti])
            X[r] = [float(row[k]) for k in idx]
        except (ValueError, IndexError):
            raise SchemaError(f"{path}: row {r + 1} is not numeric") from None
    return t, X


def cmd_predict(args):
    model, names = load_manifest(args.manifest)
    t, X = _read_query(args.query, names, args.time_col)
    ok = (t >= 0) & (t <= model.tau) & np.isfinite(t)
    risk1 = np.full(t.shape, math.nan)
    risk2 = np.full(t.shape, math.nan)
    surv = np.full(t.shape, math.nan)
    cens = np.full(t.shape, math.nan)
    # rows sharing a time are predicted together
    for tv in np.unique(t[ok]):
        rows = np.flatnonzero(ok & (t == tv))
        risk1[rows] = model.predict(tv, X[rows], 1)[:, 0]
        risk2[rows] = model.predict(tv, X[rows], 2)[:, 0]
        surv[rows] = model.survival(tv, X[rows])[:, 0]
        cens[rows] = model.censoring(tv, X[rows])[:, 0]
    with Path(args.out).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_id", "t", "risk_cause1", "risk_cause2", "event_free_survival",
                    "censoring_survival", "error"])
        for i in range(t.shape[0]):
            if ok[i]:
                w.writerow([i + 1, repr(float(t[i])), *(repr(float(a[i])) for a in (risk1, risk2, surv, cens)),
                            ""])
            else:
                w.writerow([i + 1, repr(float(t[i])), "", "", "", "", f"t outside [0, {model.tau:g}]"])
    bad = int((~ok).sum())
    if bad:
        print(f"{bad} of {t.shape[0]} rows could not be predicted", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def cmd_benchmark(args):
    from .benchmark import BenchmarkConfig, run_benchmark, write_outputs
    cfg = _read_json(args.config)
    if "seed" in cfg or os.environ.get("JSSL_SEED") is not None:
        cfg["seed"] = _seed(cfg.get("seed", 1))
    config = BenchmarkConfig.from_dict(cfg)
    outdir = args.out_dir or config.output_dir

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} cells", end="" if done < total else "\n", file=sys.stderr, flush=True)

    rows = run_benchmark(config, jobs=args.jobs, progress=progress)
    agg = write_outputs(rows, outdir)
    for r in agg:
        print(f"{r['scenario']} n={r['n']:<6} {r['method']:<9} IPA {r['mean_ipa']:.4f} "
              f"(se {r['se_ipa']:.4f})  oracle agreement {r['oracle_agreement']:.2f}")
    failed = sum(1 for r in rows if r["error"])
    if failed:
        log.warning("%d method results failed; see results.csv", failed)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args):
    from .simulation import load_scenario
    from .verification import excess_risk_check, properness_check
    s = load_scenario(args.scenario)
    seed = _seed(args.seed)
    report = {"properness": [r.to_dict() for r in properness_check(s, args.n, seed)],
              "excess_risk": [r.to_dict() for r in excess_risk_check(s, args.n, args.m, seed)]}
    all_ok = True
    for name, results in report.items():
        for r in results:
            all_ok &= r["passed"]
            print(f"{name:<12} {r['model']:<16} value {r['value']:.5f} ref {r['reference']:.5f} "
                  f"z {r['statistic']:.2f} {'pass' if r['passed'] else 'FAIL'}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK if all_ok else EXIT_NUMERICAL


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="jssl", description="Joint survival super learner for competing risks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a dataset from a scenario")
    s.add_argument("--scenario", required=True, help="scenario JSON file or bundled name")
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="observed-data CSV")
    s.add_argument("--latent", help="optional CSV of latent T, D, C")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("select", help="cross-validate all learner triples and refit the best")
    s.add_argument("--data", required=True, help="CSV with time, status and covariate columns")
    s.add_argument("--config", required=True, help="JSON with libraries, K, R, tau, seed")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--K", type=int)
    s.add_argument("--R", type=int)
    s.add_argument("--tau", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--show", type=int, default=5, help="ranked rows to print")
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("predict", help="absolute risks from a selected-triple manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--query", required=True, help="CSV of covariates and a time column")
    s.add_argument("--time-col", default="t")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("benchmark", help="Monte Carlo comparison with IPCW super learners")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=_positive_int, default=1)
    s.add_argument("--out-dir")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("verify", help="properness and excess-risk Monte Carlo checks")
    s.add_argument("--scenario", default="dependent")
    s.add_argument("--n", type=_positive_int, default=10_000)
    s.add_argument("--m", type=_positive_int, default=4000, help="covariate draws for the distance")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="JSON report")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except JSSLError as exc:  # pragma: no cover - every subclass is mapped above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
