"""Observed competing-risks data, role reversal and cross-validation folds."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, InvalidConfigurationError, ParseError, SchemaError
from .rng import make_rng

STATUS_CODES = (0, 1, 2)
STATES = (-1, 0, 1, 2)


@dataclass(frozen=True)
class Observation:
    time: float
    status: int
    covariates: tuple

    def __post_init__(self):
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValueError(f"time must be finite and >= 0, got {self.time}")
        if self.status not in STATUS_CODES:
            raise ValueError(f"status must be in {{0,1,2}}, got {self.status}")
        if not all(math.isfinite(v) for v in self.covariates):
            raise ValueError("covariates must be finite")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented container of n observations with p covariates.

    Arrays are copied and made read-only on construction.
    """

    time: np.ndarray
    status: np.ndarray
    X: np.ndarray
    covariate_names: tuple = field(default=())

    def __post_init__(self):
        time = np.array(self.time, dtype=float).reshape(-1)
        status = np.array(self.status, dtype=np.int64).reshape(-1)
        n = time.shape[0]
        X = np.array(self.X, dtype=float)
        if X.size == 0:
            X = X.reshape(n, -1) if n else X.reshape(0, len(self.covariate_names))
        if X.ndim == 1:
            X = X.reshape(n, -1)
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if status.shape[0] != n or X.shape[0] != n:
            raise ValueError("time, status and X must have the same number of rows")
        if len(names) != X.shape[1]:
            raise ValueError("covariate_names length must equal the number of columns")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise ValueError("times must be finite and non-negative")
        if not np.all(np.isin(status, STATUS_CODES)):
            raise ValueError("status must take values in {0,1,2}")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        for a in (time, status, X):
            a.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_observations(cls, observations, covariate_names=()):
        obs = list(observations)
        p = len(covariate_names) if covariate_names else (len(obs[0].covariates) if obs else 0)
        X = np.array([o.covariates for o in obs], dtype=float).reshape(len(obs), p)
        return cls([o.time for o in obs], [o.status for o in obs], X, tuple(covariate_names))

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def observation(self, i):
        return Observation(float(self.time[i]), int(self.status[i]), tuple(self.X[i].tolist()))

    @property
    def observations(self):
        return [self.observation(i) for i in range(self.n)]

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.time[idx], self.status[idx], self.X[idx], self.covariate_names)

    def event_indicator(self, target):
        """Boolean event vector for a target role ('cause1', 'cause2', 'censoring')."""
        return self.status == target_status(target)


def target_status(target):
    try:
        return {"cause1": 1, "cause2": 2, "censoring": 0}[target]
    except KeyError:
        raise InvalidConfigurationError(f"unknown target {target!r}") from None


def load_dataset(path, time_col="time", status_col="status", covariates=None):
    """Read a CSV file with a header row into a :class:`Dataset`.

    Covariate columns default to every column other than the time and
    status columns, in header order. Missing values are rejected.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyInputError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    for col in (time_col, status_col):
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    if covariates is None:
        covariates = [h for h in header if h not in (time_col, status_col)]
    for col in covariates:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    ti, si = header.index(time_col), header.index(status_col)
    ci = [header.index(c) for c in covariates]
    n = len(rows)
    time = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    X = np.empty((n, len(ci)))
    for r, row in enumerate(rows):
        rownum = r + 1  # data rows counted from 1, header excluded
        if len(row) != len(header):
            raise ParseError(f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}", rownum)
        try:
            t = float(row[ti])
        except ValueError:
            raise ParseError(f"{path}: row {rownum}: non-numeric time {row[ti]!r}", rownum) from None
        if not math.isfinite(t) or t < 0:
            raise ParseError(f"{path}: row {rownum}: invalid time {row[ti]!r}", rownum)
        try:
            s = float(row[si])
        except ValueError:
            raise ParseError(f"{path}: row {rownum}: non-numeric status {row[si]!r}", rownum) from None
        if s not in STATUS_CODES:
            raise ParseError(f"{path}: row {rownum}: status {row[si]!r} not in {{0,1,2}}", rownum)
        time[r], status[r] = t, int(s)
        for k, c in enumerate(ci):
            cell = row[c].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {rownum}: covariate {header[c]!r} value {cell!r} "
                                 "is missing or non-numeric", rownum) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {rownum}: covariate {header[c]!r} not finite", rownum)
            X[r, k] = v
    return Dataset(time, status, X, tuple(covariates))


def save_dataset(d, path, precision=17, time_col="time", status_col="status"):
    fmt = f"{{:.{precision}g}}"
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([time_col, status_col, *d.covariate_names])
        for i in range(d.n):
            w.writerow([fmt.format(d.time[i]), int(d.status[i]), *(fmt.format(v) for v in d.X[i])])


def reverse_roles(d):
    """Swap the roles of censoring and events: status becomes 1 - Delta."""
    return Dataset(d.time, (d.status == 0).astype(np.int64), d.X, d.covariate_names)


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold assignments, one row per repetition, values in 1..K."""

    assignments: np.ndarray
    K: int
    seed: int

    @property
    def repetitions(self):
        return self.assignments.shape[0]

    @property
    def n(self):
        return self.assignments.shape[1]

    def test_index(self, rep, fold):
        """Indices of the hold-out set for 0-based repetition and 1-based fold."""
        return np.flatnonzero(self.assignments[rep] == fold)

    def train_index(self, rep, fold):
        return np.flatnonzero(self.assignments[rep] != fold)

    def to_json(self):
        return {"seed": int(self.seed), "K": int(self.K),
                "repetitions": self.assignments.tolist()}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))


def make_folds(n, K, R=1, seed=0, strata=None):
    """Random partition of range(n) into K near-equal folds, R times.

    Each repetition draws an independent permutation from a PCG64 stream
    keyed by (seed, repetition) and slices it into contiguous blocks.
    With ``strata`` (e.g. the status vector) the permutation is dealt out
    round-robin within each stratum instead.
    """
    if K < 2 or K > n:
        raise InvalidConfigurationError(f"need 2 <= K <= n, got K={K}, n={n}")
    if R < 1:
        raise InvalidConfigurationError(f"need R >= 1, got {R}")
    out = np.empty((R, n), dtype=np.int64)
    for r in range(R):
        perm = make_rng("folds", int(seed), r).permutation(n)
        if strata is None:
            sizes = np.full(K, n // K)
            sizes[: n % K] += 1
            out[r, perm] = np.repeat(np.arange(1, K + 1), sizes)
        else:
            strata = np.asarray(strata)
            order = perm[np.argsort(strata[perm], kind="stable")]
            out[r, order] = np.arange(n) % K + 1
    out.setflags(write=False)
    return FoldPlan(out, int(K), int(seed))
