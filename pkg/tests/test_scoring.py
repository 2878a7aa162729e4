import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jssl.composition import compose, eta_array
from jssl.data import Dataset, Observation, make_folds
from jssl.errors import FitError, InvalidConfigurationError, SelectionError
from jssl.hazards import LearnerSpec, NelsonAalenHazard, ZeroHazard
from jssl.scoring import (FitCache, RiskTable, TripleKey, brier_many, cv_risk, fold_losses,
                          integrated_brier, refit_triple, select_discrete_jssl)

from conftest import ConstantOccupation, FixedLearner, random_dataset, step_hazard

# exact value of the jump example: (exp(-1/2) - 1)^2 + 1/4 on [1, 2)
JUMP_EXAMPLE = (math.exp(-0.5) - 1.0) ** 2 + 0.25


class FailingLearner:
    def __init__(self, name):
        self.name = name

    def fit(self, d, target=None, seed=0):
        raise FitError(f"{self.name} always fails")


def _riemann(f, o, tau, m=1_000_000):
    t = (np.arange(m) + 0.5) * tau / m
    F = f.occupation(t, np.atleast_2d(o.covariates))[0]
    target = np.zeros_like(F)
    target[np.arange(m), eta_array([o.time], [o.status], t)[0] + 1] = 1.0
    return float(((F - target) ** 2).sum(axis=1).mean() * tau)


def test_perfect_constant_prediction():
    o = Observation(5.0, 0, np.zeros(1))
    assert integrated_brier(ConstantOccupation([0, 1, 0, 0]), o, 2.0) == 0.0


def test_wrong_state_everywhere():
    o = Observation(0.5, 0, np.zeros(1))
    assert integrated_brier(ConstantOccupation([0, 0, 1, 0]), o, 1.0) == pytest.approx(2.0, abs=1e-15)


def test_jump_example_matches_riemann_sum():
    f = compose(NelsonAalenHazard([1.0], [0.5]), ZeroHazard(), ZeroHazard())
    o = Observation(2.0, 1, np.zeros(1))
    value = integrated_brier(f, o, 2.0)
    assert value == pytest.approx(JUMP_EXAMPLE, abs=1e-14)
    assert value == pytest.approx(0.404818121746175, abs=1e-12)
    assert abs(value - _riemann(f, o, 2.0)) < 1e-6


@given(seed=st.integers(0, 2**31), time=st.floats(0.01, 20), status=st.sampled_from([0, 1, 2]),
       tau=st.floats(0.5, 15))
def test_integrated_brier_range_and_quadrature(seed, time, status, tau):
    r = np.random.default_rng(seed)
    f = compose(step_hazard(r), step_hazard(r), step_hazard(r))
    o = Observation(time, status, np.zeros(1))
    v = integrated_brier(f, o, tau)
    assert 0.0 <= v <= 4 * tau
    assert abs(v - _riemann(f, o, tau, 20_000)) <= 4 * tau * 1e-3


def test_step_and_generic_paths_agree(rng):
    f = compose(step_hazard(rng), step_hazard(rng), step_hazard(rng))

    class Generic:
        is_step = True
        grid = lambda self, x: f.grid()
        occupation = lambda self, t, X: f.occupation(t, X)

    for time, status in ((0.7, 1), (4.0, 0), (9.5, 2), (30.0, 1)):
        o = Observation(time, status, np.zeros(1))
        assert integrated_brier(Generic(), o, 10.0) == pytest.approx(integrated_brier(f, o, 10.0), abs=1e-12)


@pytest.mark.parametrize("tau", [0.0, -1.0, math.nan])
def test_tau_must_be_positive(tau):
    with pytest.raises(InvalidConfigurationError):
        integrated_brier(ConstantOccupation([0, 1, 0, 0]), Observation(1.0, 1, [0.0]), tau)


def _fixed_libraries(rng):
    return ([FixedLearner(step_hazard(rng), "a")], [FixedLearner(step_hazard(rng), "b")],
            [FixedLearner(step_hazard(rng), "c")])


def test_cv_risk_of_fixed_learner_is_sample_mean(rng):
    d = random_dataset(rng, n=40, p=1)
    libs = _fixed_libraries(rng)
    f = compose(libs[0][0].hazard, libs[1][0].hazard, libs[2][0].hazard)
    plan = make_folds(40, 2, 1, seed=3)
    mean, per_rep = cv_risk((0, 0, 0), libs, d, plan, 10.0)
    direct = brier_many(f, d.time, d.status, d.X, 10.0).mean()
    assert mean == pytest.approx(direct, abs=1e-14)
    assert per_rep.shape == (1,)


def test_cv_risk_all_survivors_is_zero(rng):
    d = Dataset(rng.uniform(20, 30, 12), np.zeros(12, dtype=int), np.zeros((12, 1)))
    z = [[FixedLearner(ZeroHazard(), "zero")]] * 3
    assert cv_risk((0, 0, 0), z, d, make_folds(12, 3, 2, seed=0), 10.0)[0] == 0.0


def test_cv_risk_row_shuffle_invariance(rng):
    d = random_dataset(rng, n=45, p=2)
    libs = tuple([LearnerSpec(kind, role)] for kind, role in
                 (("cox", "cause1"), ("nelson_aalen", "cause2"), ("cox", "censoring")))
    plan = make_folds(45, 3, 2, seed=9)
    perm = rng.permutation(45)
    shuffled = d.subset(perm)
    plan2 = type(plan)(plan.assignments[:, perm], plan.K, plan.seed)
    a = cv_risk((0, 0, 0), libs, d, plan, 20.0)[0]
    b = cv_risk((0, 0, 0), libs, shuffled, plan2, 20.0)[0]
    assert a == pytest.approx(b, rel=1e-12)


def test_singleton_library(rng):
    d = random_dataset(rng, n=30)
    key, table = select_discrete_jssl(*_fixed_libraries(rng), d, make_folds(30, 3), 10.0)
    assert key.index == (0, 0, 0)
    assert len(table.keys) == 1 and table.rank.tolist() == [1]


def test_argmin_selection(rng):
    d = random_dataset(rng, n=30)
    good = FixedLearner(ZeroHazard(), "zero")
    bad = FixedLearner(NelsonAalenHazard([0.01], [5.0]), "huge")
    key, table = select_discrete_jssl([bad, good], [good], [good], d, make_folds(30, 3), 10.0)
    assert key.names[0] == "zero"
    assert table.loss[1] < table.loss[0]


def test_125_triples_share_fits(rng, tmp_path):
    d = random_dataset(rng, n=50, p=1)
    libs = [[FixedLearner(step_hazard(rng), f"{r}{i}") for i in range(5)] for r in "abc"]
    cache = FitCache()
    plan = make_folds(50, 4, 2, seed=1)
    key, table = select_discrete_jssl(*libs, d, plan, 10.0, cache=cache)
    assert len(table.keys) == 125
    assert cache.count == 15 * 4 * 2
    assert all(l.calls == 8 for lib in libs for l in lib)
    assert sorted(table.rank.tolist()) == list(range(1, 126))
    assert np.all(np.diff(table.loss[table.order]) >= 0)
    assert table.best == key
    table.to_csv(tmp_path / "t.csv")
    rows = list(csv.DictReader((tmp_path / "t.csv").open()))
    assert len(rows) == 125 and rows[0]["rank"] == "1"
    table.to_json(tmp_path / "t.json")
    assert len(json.loads((tmp_path / "t.json").read_text())["rows"]) == 125


def test_failed_learner_gets_infinite_loss(rng):
    d = random_dataset(rng, n=30)
    ok = FixedLearner(ZeroHazard(), "zero")
    key, table = select_discrete_jssl([FailingLearner("broken"), ok], [ok], [ok], d, make_folds(30, 3), 10.0)
    assert key.a1 == 1
    assert math.isinf(table.loss[0])
    assert table.rank[0] == 2
    assert len(table.diagnostics) == 3
    assert {x["learner"] for x in table.diagnostics} == {"broken"}


def test_all_failed_raises(rng):
    d = random_dataset(rng, n=30)
    ok = FixedLearner(ZeroHazard(), "zero")
    with pytest.raises(SelectionError) as exc:
        select_discrete_jssl([FailingLearner("x")], [ok], [ok], d, make_folds(30, 3), 10.0)
    assert exc.value.diagnostics


def test_library_validation(rng):
    d = random_dataset(rng, n=30)
    ok = FixedLearner(ZeroHazard(), "zero")
    with pytest.raises(InvalidConfigurationError):
        select_discrete_jssl([], [ok], [ok], d, make_folds(30, 3), 10.0)
    with pytest.raises(InvalidConfigurationError):
        select_discrete_jssl([ok, FixedLearner(ZeroHazard(), "zero")], [ok], [ok], d, make_folds(30, 3), 10.0)


def test_risk_table_ties_and_sd():
    keys = [TripleKey(0, 0, b) for b in range(4)]
    t = RiskTable(keys, [2.0, 1.0, 1.0, np.inf], [[2.0], [1.0], [1.0], [np.inf]], 5.0, 5, 1, 0)
    assert t.rank.tolist() == [3, 1, 2, 4]
    assert t.best.b == 1
    assert np.array_equal(t.sd, np.zeros(4))
    t2 = RiskTable(keys[:2], [1.5, 1.0], [[1.0, 2.0], [1.0, 1.0]], 5.0, 5, 2, 0)
    assert t2.sd.tolist() == pytest.approx([math.sqrt(0.5), 0.0])


def test_fold_losses_shape(rng):
    d = random_dataset(rng, n=30)
    libs = [[FixedLearner(step_hazard(rng), f"{r}{i}") for i in range(2)] for r in "abc"]
    out = fold_losses(libs, d, make_folds(30, 3, 2), 10.0)
    assert out.shape == (2, 3, 2, 2, 2)
    assert np.all(np.isfinite(out) & (out >= 0))


def test_refit_triple(rng):
    d = random_dataset(rng, n=60)
    A = [LearnerSpec("nelson_aalen", "cause1")], [LearnerSpec("nelson_aalen", "cause2")], \
        [LearnerSpec("cox", "censoring")]
    hs, model = refit_triple(TripleKey(0, 0, 0), *A, d)
    assert len(hs) == 3
    F = model.occupation([0.0, 100.0], d.X[:3])
    assert np.allclose(F[:, 0, 1], 1.0)
    assert np.allclose(F[:, 1].sum(axis=1), 1.0, atol=0.1)
