"""Budgeted grid-query environment.

A task is a grid of cells with hidden binary labels and per-cell feature
vectors. Queries reveal one label at a time, cost budget according to the
cost model, and accrue a unit reward per discovered target. The environment
never issues a query it cannot afford, so the budget constraint is an
invariant rather than something a caller has to police.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIFORM = "uniform"
MANHATTAN = "manhattan"


class QueryError(Exception):
    """A query that violates the environment contract."""


class AlreadyExploredError(QueryError):
    pass


class InsufficientBudgetError(QueryError):
    pass


@dataclass(frozen=True)
class GridDims:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def n(self) -> int:
        return self.rows * self.cols

    def cell_rc(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.cols)

    def cell_index(self, row: int, col: int) -> int:
        return row * self.cols + col


@dataclass
class Task:
    """One search instance: grid dims, per-cell features, hidden labels."""

    dims: GridDims
    features: np.ndarray  # (N, D)
    labels: np.ndarray  # (N,) in {0, 1}
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        n = self.dims.n
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(f"features must be ({n}, D), got {self.features.shape}")
        if self.labels.shape != (n,):
            raise ValueError(f"labels must be ({n},), got {self.labels.shape}")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_targets(self) -> int:
        return int(self.labels.sum())


@dataclass(frozen=True)
class CostModel:
    """Per-query movement cost. `initial_cost` applies from the dummy start
    cell (the position before any query has been made)."""

    kind: str
    initial_cost: float

    def __post_init__(self):
        if self.kind not in (UNIFORM, MANHATTAN):
            raise ValueError(f"unknown cost model {self.kind!r}")
        if self.initial_cost < 0:
            raise ValueError("initial_cost must be nonnegative")

    @classmethod
    def uniform(cls, initial_cost: float = 1.0) -> "CostModel":
        return cls(UNIFORM, initial_cost)

    @classmethod
    def manhattan(cls, initial_cost: float = 0.0) -> "CostModel":
        return cls(MANHATTAN, initial_cost)


def query_cost(model: CostModel, dims: GridDims, from_cell: int | None, to_cell: int) -> float:
    """Cost of moving the query resource from `from_cell` (None = dummy start
    cell) to `to_cell`."""
    if not 0 <= to_cell < dims.n:
        raise IndexError(f"cell {to_cell} out of range [0, {dims.n})")
    if from_cell is None:
        return float(model.initial_cost)
    if not 0 <= from_cell < dims.n:
        raise IndexError(f"cell {from_cell} out of range [0, {dims.n})")
    if model.kind == UNIFORM:
        return 1.0
    r0, c0 = dims.cell_rc(from_cell)
    r1, c1 = dims.cell_rc(to_cell)
    return float(abs(r0 - r1) + abs(c0 - c1))


def cost_vector(model: CostModel, dims: GridDims, from_cell: int | None) -> np.ndarray:
    """query_cost from `from_cell` to every cell, as a length-N vector."""
    n = dims.n
    if from_cell is None:
        return np.full(n, float(model.initial_cost))
    if not 0 <= from_cell < n:
        raise IndexError(f"cell {from_cell} out of range [0, {n})")
    if model.kind == UNIFORM:
        return np.ones(n)
    rows = np.arange(n) // dims.cols
    cols = np.arange(n) % dims.cols
    r0, c0 = dims.cell_rc(from_cell)
    return (np.abs(rows - r0) + np.abs(cols - c0)).astype(np.float64)


@dataclass(frozen=True)
class QueryOutcome:
    cell: int
    label: int
    reward: int  # equals label
    cost: float


@dataclass
class EpisodeState:
    """Live search state. Operations return new states; a state is never
    shared between concurrent episodes."""

    o: np.ndarray  # (N,) over {-1, 0, +1}; o[j] = 2*label - 1 once explored
    explored: set[int]
    remaining_budget: float
    last_cell: int | None
    step: int
    log: list[QueryOutcome]
    initial_budget: float

    @classmethod
    def initial(cls, task: Task, budget: float) -> "EpisodeState":
        if budget < 0:
            raise ValueError("budget must be nonnegative")
        return cls(
            o=np.zeros(task.dims.n),
            explored=set(),
            remaining_budget=float(budget),
            last_cell=None,
            step=0,
            log=[],
            initial_budget=float(budget),
        )

    @property
    def total_reward(self) -> int:
        return sum(out.reward for out in self.log)


def affordable_unexplored(state: EpisodeState, task: Task, model: CostModel) -> np.ndarray:
    """All unexplored cells reachable within the remaining budget, ascending."""
    costs = cost_vector(model, task.dims, state.last_cell)
    ok = costs <= state.remaining_budget
    if state.explored:
        ok[list(state.explored)] = False
    return np.flatnonzero(ok)


def apply_query(
    state: EpisodeState, task: Task, model: CostModel, cell: int
) -> tuple[QueryOutcome, EpisodeState]:
    """Queries `cell`, revealing its label. Returns the outcome and the new
    state; the input state is not modified."""
    n = task.dims.n
    if not 0 <= cell < n:
        raise IndexError(f"cell {cell} out of range [0, {n})")
    if cell in state.explored:
        raise AlreadyExploredError(f"cell {cell} was already queried")
    cost = query_cost(model, task.dims, state.last_cell, cell)
    if cost > state.remaining_budget:
        raise InsufficientBudgetError(
            f"cell {cell} costs {cost}, only {state.remaining_budget} left"
        )
    label = int(task.labels[cell])
    outcome = QueryOutcome(cell=cell, label=label, reward=label, cost=cost)
    o = state.o.copy()
    o[cell] = 2.0 * label - 1.0
    new_state = EpisodeState(
        o=o,
        explored=state.explored | {cell},
        remaining_budget=state.remaining_budget - cost,
        last_cell=cell,
        step=state.step + 1,
        log=state.log + [outcome],
        initial_budget=state.initial_budget,
    )
    return outcome, new_state


def is_terminal(state: EpisodeState, task: Task, model: CostModel) -> bool:
    """True iff no affordable unexplored cell remains."""
    return affordable_unexplored(state, task, model).size == 0
