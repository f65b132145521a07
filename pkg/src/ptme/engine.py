"""Archive-filling main loops: parametric, fixed-task, and random-search modes.

A run consumes an exact budget of fitness evaluations and returns every one
of them, in order, as an :class:`EvaluationLog`.  The parametric mode samples
a fresh task at each iteration and alternates between SBX with a
bandit-tuned task tournament and the local-linear-regression operator.
Fixed-task mode restricts tasks to a CVT-sampled pool (one archive cell per
task, no regression operator).  Random search just logs uniform samples.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .problems import Problem
from .seeding import RUN_NS, TESSELLATION_NS, derive_seed
from .tessellation import Tessellation, build_adjacency, cvt_centroids
from .variation import (
    BanditState,
    bandit_update,
    local_linear_candidate,
    sbx_crossover,
    tournament_select_task,
    ucb1_select,
)

DEFAULT_TOURNAMENT_SIZES = (1, 5, 10, 50, 100, 500)

MODES = ("parametric", "fixed_tasks", "random_search")


class LogParseError(ValueError):
    """A JSON-Lines evaluation log contains a malformed line."""


@dataclass
class Evaluation:
    """One fitness evaluation: who asked (operator) and what came back."""

    iteration: int
    theta: np.ndarray
    x: np.ndarray
    f: float
    operator: str


class EvaluationLog:
    """Every evaluation of a run, in order, as column arrays plus metadata."""

    def __init__(
        self,
        thetas: np.ndarray,
        xs: np.ndarray,
        fs: np.ndarray,
        operators: np.ndarray,
        metadata: dict | None = None,
    ):
        self.thetas = np.asarray(thetas, dtype=float)
        self.xs = np.asarray(xs, dtype=float)
        self.fs = np.asarray(fs, dtype=float)
        self.operators = np.asarray(operators)
        self.metadata = metadata or {}

    def __len__(self) -> int:
        return len(self.fs)

    def __getitem__(self, i: int) -> Evaluation:
        return Evaluation(
            iteration=i,
            theta=self.thetas[i],
            x=self.xs[i],
            f=float(self.fs[i]),
            operator=str(self.operators[i]),
        )

    def write_jsonl(self, path) -> None:
        """One compact JSON object per line; floats round-trip bit-exactly."""
        with open(path, "w") as fh:
            for i in range(len(self)):
                fh.write(
                    json.dumps(
                        {
                            "i": i,
                            "op": str(self.operators[i]),
                            "theta": self.thetas[i].tolist(),
                            "x": self.xs[i].tolist(),
                            "f": float(self.fs[i]),
                        },
                        separators=(",", ":"),
                    )
                )
                fh.write("\n")

    @classmethod
    def read_jsonl(cls, path, metadata: dict | None = None) -> "EvaluationLog":
        thetas, xs, fs, ops = [], [], [], []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    ops.append(rec["op"])
                    thetas.append(rec["theta"])
                    xs.append(rec["x"])
                    fs.append(float(rec["f"]))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise LogParseError(f"{path}:{lineno}: {exc}") from exc
        return cls(
            np.asarray(thetas, dtype=float),
            np.asarray(xs, dtype=float),
            np.asarray(fs, dtype=float),
            np.asarray(ops),
            metadata=metadata,
        )


class Archive:
    """One elite (theta, x, f) per tessellation cell; replacement is >= elitist."""

    def __init__(self, tessellation: Tessellation, thetas, xs, fs):
        self.tessellation = tessellation
        self.thetas = np.asarray(thetas, dtype=float)
        self.xs = np.asarray(xs, dtype=float)
        self.fs = np.asarray(fs, dtype=float)

    @property
    def n_cells(self) -> int:
        return len(self.fs)

    def update(self, cell: int, theta, x, f: float) -> bool:
        """Install the candidate as the cell's elite iff f >= the current f."""
        if f >= self.fs[cell]:
            self.thetas[cell] = theta
            self.xs[cell] = x
            self.fs[cell] = f
            return True
        return False


@dataclass
class RunConfig:
    """Everything that determines a run, including every random draw."""

    budget: int
    cells: int = 200
    tournament_sizes: tuple[int, ...] = DEFAULT_TOURNAMENT_SIZES
    sigma_sbx: float = 10.0
    sigma_reg: float = 1.0
    regression_fraction: float = 0.5
    tournament_enabled: bool = True
    mode: str = "parametric"
    fixed_task_count: int | None = None
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.cells < 1:
            problems.append(f"cells must be >= 1, got {self.cells}")
        if self.mode == "fixed_tasks":
            if self.fixed_task_count is None or self.fixed_task_count < 1:
                problems.append("fixed_tasks mode needs fixed_task_count >= 1")
            elif self.budget <= self.fixed_task_count:
                problems.append(
                    f"budget must exceed fixed_task_count, got "
                    f"{self.budget} <= {self.fixed_task_count}"
                )
        elif self.mode == "parametric" and self.budget <= self.cells:
            problems.append(f"budget must exceed cells, got {self.budget} <= {self.cells}")
        elif self.budget < 1:
            problems.append(f"budget must be >= 1, got {self.budget}")
        if not (0.0 <= self.regression_fraction <= 1.0):
            problems.append(
                f"regression_fraction must be in [0,1], got {self.regression_fraction}"
            )
        if not self.tournament_sizes or any(s < 1 for s in self.tournament_sizes):
            problems.append(f"tournament_sizes must be >= 1, got {self.tournament_sizes}")
        if self.sigma_sbx <= 0:
            problems.append(f"sigma_sbx must be positive, got {self.sigma_sbx}")
        if self.sigma_reg < 0:
            problems.append(f"sigma_reg must be >= 0, got {self.sigma_reg}")
        if problems:
            raise ValueError("invalid config: " + "; ".join(problems))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["tournament_sizes"] = list(self.tournament_sizes)
        return doc


def initialize_archive(
    problem: Problem, tessellation: Tessellation, rng: np.random.Generator
) -> Archive:
    """One uniform-random solution per cell, evaluated at the cell's centroid."""
    n = tessellation.n_cells
    thetas = np.array(tessellation.centroids, dtype=float, copy=True)
    xs = rng.random((n, problem.dx))
    fs = np.array([problem.evaluate(xs[i], thetas[i]) for i in range(n)])
    return Archive(tessellation, thetas, xs, fs)


def _metadata(problem: Problem, config: RunConfig, wall_time: float) -> dict:
    return {
        "problem": problem.name,
        "config": config.to_dict(),
        "wall_time_s": wall_time,
    }


def ptme_run(problem: Problem, config: RunConfig) -> EvaluationLog:
    """Parametric-task main loop; also realizes the ablation variants.

    Each iteration flips a coin with probability ``regression_fraction`` for
    the regression operator; otherwise SBX produces the candidate, with the
    evaluation task drawn by a tournament whose size the UCB1 bandit tunes
    (fixed to 1 when the tournament is disabled).  Bandit counters move only
    on tournament iterations, crediting a success when the candidate became
    an elite.  Deterministic given the config seed.
    """
    config.validate()
    t0 = time.perf_counter()
    budget, n_cells = config.budget, config.cells
    tess = cvt_centroids(
        n_cells, problem.dtheta, derive_seed(config.seed, TESSELLATION_NS)
    )
    build_adjacency(tess)
    rng = np.random.default_rng(derive_seed(config.seed, RUN_NS))

    thetas = np.empty((budget, problem.dtheta))
    xs = np.empty((budget, problem.dx))
    fs = np.empty(budget)
    ops = np.empty(budget, dtype="<U10")

    archive = initialize_archive(problem, tess, rng)
    thetas[:n_cells] = archive.thetas
    xs[:n_cells] = archive.xs
    fs[:n_cells] = archive.fs
    ops[:n_cells] = "init"

    bandit = BanditState(list(config.tournament_sizes))
    for i in range(n_cells, budget):
        if rng.random() < config.regression_fraction:
            theta = rng.random(problem.dtheta)
            x = local_linear_candidate(archive, tess, theta, config.sigma_reg, rng)
            op, size = "regression", None
        else:
            parents = rng.integers(n_cells, size=2)
            size = ucb1_select(bandit) if config.tournament_enabled else 1
            theta = tournament_select_task(
                archive.thetas[parents[0]], size, problem.dtheta, rng
            )
            x = sbx_crossover(
                archive.xs[parents[0]], archive.xs[parents[1]], config.sigma_sbx, rng
            )
            op = "sbx"
        cell = tess.nearest_cell(theta)
        f = problem.evaluate(x, theta)
        thetas[i], xs[i], fs[i], ops[i] = theta, x, f, op
        became_elite = archive.update(cell, theta, x, f)
        if op == "sbx" and config.tournament_enabled:
            bandit_update(bandit, size, became_elite)

    meta = _metadata(problem, config, time.perf_counter() - t0)
    return EvaluationLog(thetas, xs, fs, ops, metadata=meta)


def fixed_task_run(problem: Problem, config: RunConfig) -> EvaluationLog:
    """Multi-task loop over a fixed CVT-sampled task pool (one cell per task).

    The tournament draws its candidates from the pool instead of the
    continuum, and there is no regression operator.
    """
    config.validate()
    if config.mode != "fixed_tasks":
        raise ValueError(f"fixed_task_run needs mode='fixed_tasks', got {config.mode!r}")
    t0 = time.perf_counter()
    budget, n_tasks = config.budget, config.fixed_task_count
    tess = cvt_centroids(
        n_tasks, problem.dtheta, derive_seed(config.seed, TESSELLATION_NS)
    )
    rng = np.random.default_rng(derive_seed(config.seed, RUN_NS))

    thetas = np.empty((budget, problem.dtheta))
    xs = np.empty((budget, problem.dx))
    fs = np.empty(budget)
    ops = np.empty(budget, dtype="<U10")

    archive = initialize_archive(problem, tess, rng)
    pool = tess.centroids
    thetas[:n_tasks] = archive.thetas
    xs[:n_tasks] = archive.xs
    fs[:n_tasks] = archive.fs
    ops[:n_tasks] = "init"

    bandit = BanditState(list(config.tournament_sizes))
    for i in range(n_tasks, budget):
        parents = rng.integers(n_tasks, size=2)
        size = ucb1_select(bandit) if config.tournament_enabled else 1
        candidates = rng.integers(n_tasks, size=size)
        reference = archive.thetas[parents[0]]
        d2 = ((pool[candidates] - reference) ** 2).sum(axis=1)
        cell = int(candidates[int(np.argmin(d2))])
        theta = pool[cell]
        x = sbx_crossover(
            archive.xs[parents[0]], archive.xs[parents[1]], config.sigma_sbx, rng
        )
        f = problem.evaluate(x, theta)
        thetas[i], xs[i], fs[i], ops[i] = theta, x, f, "fixed-task"
        became_elite = archive.update(cell, theta, x, f)
        if config.tournament_enabled:
            bandit_update(bandit, size, became_elite)

    meta = _metadata(problem, config, time.perf_counter() - t0)
    return EvaluationLog(thetas, xs, fs, ops, metadata=meta)


def random_search_run(problem: Problem, config: RunConfig) -> EvaluationLog:
    """Uniform (theta, x) sampling; nothing but the log."""
    config.validate()
    t0 = time.perf_counter()
    rng = np.random.default_rng(derive_seed(config.seed, RUN_NS))
    thetas = rng.random((config.budget, problem.dtheta))
    xs = rng.random((config.budget, problem.dx))
    fs = problem.evaluate_batch(xs, thetas)
    ops = np.full(config.budget, "random", dtype="<U10")
    meta = _metadata(problem, config, time.perf_counter() - t0)
    return EvaluationLog(thetas, xs, fs, ops, metadata=meta)


def run(problem: Problem, config: RunConfig) -> EvaluationLog:
    """Dispatch on config.mode; every mode emits exactly ``budget`` evaluations."""
    if config.mode == "parametric":
        return ptme_run(problem, config)
    if config.mode == "fixed_tasks":
        return fixed_task_run(problem, config)
    if config.mode == "random_search":
        return random_search_run(problem, config)
    raise ValueError(f"unknown mode {config.mode!r}")
