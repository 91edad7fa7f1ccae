"""Desk-scale laboratory for budgeted visual active search on grids.

A task hides binary target labels behind the cells of a grid; a policy
spends a query budget revealing them one (or a few) at a time, scoring a
point per target found. The package provides the query environment, a
two-network policy (per-cell probability predictor feeding a query-
distribution searcher) trained with REINFORCE plus supervised prediction
loss, a meta-learned variant whose predictor is re-fit after every query,
classical baselines, synthetic task generation, and an evaluation harness.
"""

from .backend import backend_name
from .env import (
    AlreadyExploredError,
    CostModel,
    EpisodeState,
    GridDims,
    InsufficientBudgetError,
    QueryOutcome,
    Task,
    affordable_unexplored,
    apply_query,
    is_terminal,
    query_cost,
)
from .evaluation import EvalReport, brute_force_value, dump_trajectory, evaluate
from .nn import AdamState, ParamSet
from .predictor import PredictorParams, adapt_inner, init_predictor, predict
from .searcher import SearcherParams, distribution, init_searcher, masked_distribution
from .taskgen import GenConfig, generate_task, load_task, save_task, shift_class
from .training import (
    EpisodeRecord,
    TrainConfig,
    Transition,
    discounted_returns,
    run_episode_mpsvas,
    run_episode_psvas,
    run_inference,
    train,
)

__version__ = "0.1.0"
