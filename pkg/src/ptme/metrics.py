"""Re-archiving at arbitrary resolution and the scores computed from it.

A run is compared to others by replaying its evaluation log into fresh CVT
archives of varying cell counts: QD-Score sums the elites' fitness (empty
cells count 0), and the multi-resolution score averages QD-Score over a
logspace schedule of resolutions.  Inference quality of a distilled policy
is the mean fitness over a CVT-sampled probe set of unseen tasks.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import mannwhitneyu

from .engine import EvaluationLog
from .problems import Problem
from .seeding import PROBE_NS, REARCHIVE_NS, derive_seed
from .tessellation import Tessellation, cvt_centroids

MAX_RESOLUTION = 100_000

# Resolution geometries are expensive to build and shared across every log
# in a comparison (the CVT seed is a pure function of (master seed, n)), so
# they are cached per process.
_TESS_CACHE: dict[tuple[int, int, int], Tessellation] = {}


@dataclass
class ResolutionSchedule:
    """Cell counts at which a log is re-archived; positive and nondecreasing."""

    resolutions: list[int]

    def __post_init__(self):
        res = [int(r) for r in self.resolutions]
        if not res or any(r < 1 for r in res):
            raise ValueError(f"resolutions must be positive, got {res}")
        if any(b < a for a, b in zip(res, res[1:])):
            raise ValueError(f"resolutions must be nondecreasing, got {res}")
        self.resolutions = res

    def __iter__(self):
        return iter(self.resolutions)

    def __len__(self):
        return len(self.resolutions)

    @classmethod
    def logspace(cls, lo: int, hi: int, count: int) -> "ResolutionSchedule":
        points = np.logspace(np.log10(lo), np.log10(hi), count)
        return cls(sorted(set(int(round(p)) for p in points)))

    @classmethod
    def default(cls, budget: int, count: int = 50) -> "ResolutionSchedule":
        # Cannot fill more cells than there were evaluations.
        return cls.logspace(1, min(MAX_RESOLUTION, budget), count)


class ResolutionArchive:
    """Elites of a log replayed into an n-cell CVT; cells may stay empty (f=0)."""

    def __init__(self, tessellation: Tessellation, thetas, xs, fs, filled):
        self.tessellation = tessellation
        self.thetas = thetas
        self.xs = xs
        self.fs = fs
        self.filled = filled

    @property
    def n_cells(self) -> int:
        return len(self.fs)

    def elite_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(thetas, xs) of the non-empty cells, for distillation."""
        return self.thetas[self.filled], self.xs[self.filled]


def _resolution_tessellation(n: int, dim: int, seed: int) -> Tessellation:
    tess_seed = derive_seed(seed, REARCHIVE_NS, n)
    key = (n, dim, tess_seed)
    if key not in _TESS_CACHE:
        _TESS_CACHE[key] = cvt_centroids(n, dim, tess_seed)
    return _TESS_CACHE[key]


def _build_for_cache(args: tuple[int, int, int]) -> tuple[tuple, Tessellation]:
    n, dim, tess_seed = args
    return (n, dim, tess_seed), cvt_centroids(n, dim, tess_seed)


def warm_tessellations(
    resolutions, dim: int, seed: int = 0, jobs: int = 1
) -> None:
    """Prebuild (optionally in parallel) the geometries a schedule will need."""
    missing = []
    for n in resolutions:
        tess_seed = derive_seed(seed, REARCHIVE_NS, int(n))
        if (int(n), dim, tess_seed) not in _TESS_CACHE:
            missing.append((int(n), dim, tess_seed))
    if not missing:
        return
    if jobs <= 1:
        for args in missing:
            _TESS_CACHE[args] = cvt_centroids(*args)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for key, tess in pool.map(_build_for_cache, missing):
            _TESS_CACHE[key] = tess


def rearchive(log: EvaluationLog, n: int, seed: int = 0) -> ResolutionArchive:
    """Replay a log, in order, into a fresh n-cell archive.

    Each evaluation claims its nearest cell iff its fitness is >= the cell's
    current value (cells start at 0, which every logged fitness can match).
    """
    if n < 1:
        raise ValueError(f"resolution must be >= 1, got {n}")
    dim = log.thetas.shape[1]
    tess = _resolution_tessellation(n, dim, seed)
    labels = tess.nearest_cells(log.thetas)

    # Sorting by (cell, f, position) makes the last row of each cell group the
    # survivor of the sequential >= replay: highest f, latest on f ties.
    m = len(log)
    order = np.lexsort((np.arange(m), log.fs, labels))
    sorted_labels = labels[order]
    last_of_group = np.r_[sorted_labels[1:] != sorted_labels[:-1], True]
    winners = order[last_of_group]
    cells = labels[winners]

    thetas = np.zeros((n, dim))
    xs = np.zeros((n, log.xs.shape[1]))
    fs = np.zeros(n)
    filled = np.zeros(n, dtype=bool)
    thetas[cells] = log.thetas[winners]
    xs[cells] = log.xs[winners]
    fs[cells] = log.fs[winners]
    filled[cells] = True
    return ResolutionArchive(tess, thetas, xs, fs, filled)


def qd_score(archive) -> float:
    """Sum of elite fitness over all cells; empty cells contribute 0."""
    return float(np.sum(archive.fs))


def mr_qd_score(log: EvaluationLog, schedule=None, seed: int = 0) -> float:
    """Mean QD-Score over a schedule of re-archiving resolutions."""
    if schedule is None:
        schedule = ResolutionSchedule.default(len(log))
    elif not isinstance(schedule, ResolutionSchedule):
        schedule = ResolutionSchedule(list(schedule))
    scores = [qd_score(rearchive(log, n, seed=seed)) for n in schedule]
    return float(np.mean(scores))


def inference_score(policy, problem: Problem, m: int, seed: int = 0) -> float:
    """Mean fitness of policy(theta) over m CVT-spread unseen tasks."""
    if m < 1:
        raise ValueError(f"probe count must be >= 1, got {m}")
    probe_seed = derive_seed(seed, PROBE_NS, m)
    key = (m, problem.dtheta, probe_seed)
    if key not in _TESS_CACHE:
        _TESS_CACHE[key] = cvt_centroids(m, problem.dtheta, probe_seed)
    thetas = _TESS_CACHE[key].centroids
    if hasattr(policy, "infer_batch"):
        xs = policy.infer_batch(thetas)
    else:
        xs = np.array([policy(t) for t in thetas])
    return float(np.mean(problem.evaluate_batch(xs, thetas)))


def rank_sum_test(sample_a, sample_b) -> float:
    """One-sided Mann-Whitney p-value for "a tends to exceed b".

    Exact null distribution when the smaller sample has at most 8 values,
    normal approximation otherwise.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("rank_sum_test needs two nonempty samples")
    method = "exact" if min(a.size, b.size) <= 8 else "asymptotic"
    result = mannwhitneyu(a, b, alternative="greater", method=method)
    return float(result.pvalue)
