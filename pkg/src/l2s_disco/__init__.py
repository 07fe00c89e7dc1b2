"""Bayesian optimization over discrete structures with learned local-search restarts."""

from .acquisition import AcquisitionState, expected_improvement, ucb_beta, upper_confidence_bound
from .afo import (
    AfoOutcome,
    exhaustive_afo,
    fixed_strategy_afo,
    hill_climb,
    l2s_disco_afo,
    random_restart_afo,
    simulated_annealing_afo,
)
from .bo import BoConfig, History, run_bo, run_method, run_random_search
from .objectives import Contamination, IsingSparsification, Labs, SyntheticPlacement, make_objective
from .ranker import RankerConfig, RankerModel, Trajectory, generate_pairs
from .space import HAMMING1, SWAP, DiscreteSpace, Neighborhood
from .surrogate import ForestConfig, ForestModel

__version__ = "0.1.0"
