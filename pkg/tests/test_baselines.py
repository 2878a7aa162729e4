import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jssl.baselines import (censoring_function, ipa, ipcw_brier, ipcw_fold_losses, oracle_select,
                            outcome_indicator, select_ipcw_sl)
from jssl.data import Dataset, make_folds
from jssl.errors import InvalidConfigurationError, PositivityError, UndefinedIPAError
from jssl.hazards import LearnerSpec, NelsonAalenHazard, ZeroHazard
from jssl.prediction import RiskPredictionModel
from jssl.simulation import load_scenario, simulate_dataset

from conftest import random_dataset


def const_G(value):
    return lambda t, X, left=False: np.full((np.atleast_2d(X).shape[0], np.size(t)), value)


def fixed_risks(r):
    r = np.asarray(r, dtype=float)
    return lambda t, X: np.repeat(r[:, None], np.size(t), axis=1)


def test_unit_weights_equal_plain_brier(rng):
    n = 50
    d = Dataset(rng.exponential(5, n), rng.choice([1, 2], n), np.zeros((n, 1)))
    r = rng.uniform(size=n)
    y = ((d.time <= 4.0) & (d.status == 1)).astype(float)
    assert ipcw_brier(fixed_risks(r), d, const_G(1.0), 4.0) == pytest.approx(np.mean((y - r) ** 2), abs=1e-15)


def test_hand_example():
    d = Dataset([1, 2, 3, 5], [1, 0, 1, 0], np.zeros((4, 1)))
    v = ipcw_brier(fixed_risks([0.2, 0.4, 0.6, 0.8]), d, const_G(0.5), 4.0)
    assert v == pytest.approx(0.72, abs=1e-12)


def test_all_censored_before_horizon_warns():
    d = Dataset([1, 2], [0, 0], np.zeros((2, 1)))
    with pytest.warns(RuntimeWarning):
        assert ipcw_brier(fixed_risks([0.1, 0.2]), d, const_G(0.9), 5.0) == 0.0


def test_positivity_violation_names_observation():
    d = Dataset([1, 2, 3], [1, 1, 0], np.zeros((3, 1)))
    G = lambda t, X, left=False: np.where(np.atleast_1d(t)[None, :] >= 2, 1e-9, 1.0) * np.ones((len(X), 1))
    with pytest.raises(PositivityError) as exc:
        ipcw_brier(fixed_risks([0.1, 0.2, 0.3]), d, G, 2.5)
    assert exc.value.index == 1
    # the truncation flag floors G instead
    assert math.isfinite(ipcw_brier(fixed_risks([0.1, 0.2, 0.3]), d, G, 2.5, truncate=True))


def test_integrated_variant_averages_grid(rng):
    d = random_dataset(rng, n=40, p=1)
    m = RiskPredictionModel(NelsonAalenHazard([2.0, 6.0], [0.1, 0.3]), ZeroHazard(), 10.0)
    single = [ipcw_brier(m, d, const_G(0.8), 10.0 * k / 100) for k in range(1, 101)]
    # grid points are t* k/100, each scored as its own horizon
    integ = ipcw_brier(m, d, const_G(0.8), 10.0, integrated=True)
    assert integ == pytest.approx(np.mean(single), rel=1e-12)


def test_censoring_function_left_limits():
    G = censoring_function(NelsonAalenHazard([1.0], [math.log(2)]))
    assert G(np.array([1.0]), np.zeros((1, 1)))[0, 0] == pytest.approx(0.5)
    assert G(np.array([1.0]), np.zeros((1, 1)), left=True)[0, 0] == 1.0


def _library():
    return [LearnerSpec("nelson_aalen", "cause1"), LearnerSpec("cox", "cause1")]


def test_singleton_ipcw_library(rng):
    d = random_dataset(rng, n=60, p=2)
    idx, losses = select_ipcw_sl([LearnerSpec("cox", "cause1")], "km", d, make_folds(60, 3), 8.0)
    assert idx == 0 and losses.shape == (1,)


def test_uncensored_km_and_cox_coincide(rng):
    n = 80
    X = rng.normal(size=(n, 2))
    d = Dataset(rng.exponential(np.exp(-X[:, 0]) * 5), np.ones(n, dtype=int), X)
    plan = make_folds(n, 4, 1, seed=2)
    ik, lk = select_ipcw_sl(_library(), "km", d, plan, 4.0)
    ic, lc = select_ipcw_sl(_library(), "cox", d, plan, 4.0)
    assert ik == ic
    assert np.array_equal(lk, lc)


def test_ipcw_validation(rng):
    d = random_dataset(rng, n=30)
    with pytest.raises(InvalidConfigurationError):
        select_ipcw_sl([], "km", d, make_folds(30, 3), 5.0)
    with pytest.raises(InvalidConfigurationError):
        select_ipcw_sl(_library(), "forest", d, make_folds(30, 3), 5.0)


def test_fold_losses_shape(rng):
    d = random_dataset(rng, n=45, p=2)
    out = ipcw_fold_losses(_library(), "cox", d, make_folds(45, 3, 2), 5.0)
    assert out.shape == (2, 3, 2)
    assert np.all(np.isfinite(out))


def _uncensored(rng, n=200):
    return Dataset(rng.exponential(5, n), rng.choice([1, 2], n), rng.normal(size=(n, 1)))


def test_ipa_null_model_is_zero(rng):
    test = _uncensored(rng)
    y = outcome_indicator(test, 3.0)
    rep = ipa(fixed_risks(np.full(test.n, y.mean())), test, 3.0)
    assert rep.ipa == pytest.approx(0.0, abs=1e-14)


def test_ipa_perfect_model(rng):
    test = _uncensored(rng)
    rep = ipa(None, test, 3.0, risks=outcome_indicator(test, 3.0))
    assert rep.ipa == 1.0 and rep.brier == 0.0


def test_ipa_constant_model_hand_formula():
    test = Dataset([1, 2, 3, 4, 6, 7, 8, 9], [1, 1, 2, 2, 1, 1, 1, 2], np.zeros((8, 1)))
    y = np.array([1, 1, 0, 0, 0, 0, 0, 0.0])
    rep = ipa(fixed_risks(np.full(8, 0.3)), test, 5.0)
    expected = 1 - np.sum((y - 0.3) ** 2) / np.sum((y - 0.25) ** 2)
    assert rep.ipa == pytest.approx(expected, abs=1e-12)
    assert rep.null_brier == pytest.approx(0.1875, abs=1e-15)
    assert rep.n_test == 8


def test_ipa_errors():
    with pytest.raises(UndefinedIPAError):
        ipa(fixed_risks([0.1, 0.2]), Dataset([5, 6], [1, 1], np.zeros((2, 1))), 2.0)
    with pytest.raises(InvalidConfigurationError):
        ipa(fixed_risks([0.1, 0.2]), Dataset([1, 6], [0, 1], np.zeros((2, 1))), 2.0)


@pytest.fixture(scope="module")
def oracle_setup():
    s = load_scenario("dependent")
    _, latent = simulate_dataset(s, 20_000, 7)
    test = latent.uncensored(s.covariate_names)
    l1, l2, _ = s.hazards()
    truth = RiskPredictionModel(l1, l2, s.tau)
    y = outcome_indicator(test, s.tau)
    const = fixed_risks(np.full(test.n, y.mean() + 0.05))
    return truth, const, test, s.tau


def test_oracle_picks_true_model(oracle_setup):
    truth, const, test, tau = oracle_setup
    assert oracle_select([truth], test, tau) == 0
    assert oracle_select([const, truth], test, tau) == 1
    assert oracle_select([truth, const], test, tau) == 0
    with pytest.raises(InvalidConfigurationError):
        oracle_select([], test, tau)


@given(st.permutations(range(4)))
def test_oracle_permutation(perm):
    test = Dataset(np.arange(1, 9), [1, 2] * 4, np.zeros((8, 1)))
    cands = [fixed_risks(np.full(8, c)) for c in (0.1, 0.3, 0.45, 0.7)]
    base = oracle_select(cands, test, 5.0)
    assert perm[oracle_select([cands[i] for i in perm], test, 5.0)] == base
