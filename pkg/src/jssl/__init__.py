"""Joint survival super learner for right-censored competing-risks data."""
from .composition import compose, eta, mc_norm_squared
from .data import Dataset, FoldPlan, Observation, load_dataset, make_folds, reverse_roles, save_dataset
from .hazards import LearnerSpec, fit_nelson_aalen
from .prediction import RiskPredictionModel, cause_specific_risk, censoring_survival, event_free_survival
from .scoring import RiskTable, TripleKey, cv_risk, integrated_brier, select_discrete_jssl
from .simulation import SimulationScenario, calibrate_scenario, simulate_dataset, true_state_occupation

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FoldPlan", "LearnerSpec", "Observation", "RiskPredictionModel", "RiskTable",
    "SimulationScenario", "TripleKey", "calibrate_scenario", "cause_specific_risk",
    "censoring_survival", "compose", "cv_risk", "eta", "event_free_survival", "fit_nelson_aalen",
    "integrated_brier", "load_dataset", "make_folds", "mc_norm_squared", "reverse_roles",
    "save_dataset", "select_discrete_jssl", "simulate_dataset", "true_state_occupation",
]
