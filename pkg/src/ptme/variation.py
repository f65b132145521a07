"""Candidate-producing operators: SBX, task tournament, UCB1, local regression.

All operators are pure given their inputs and generator; outputs are always
clipped back into the unit solution cube.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tessellation import Tessellation

RIDGE = 1e-8


def sbx_crossover(
    p1: np.ndarray, p2: np.ndarray, eta: float, rng: np.random.Generator
) -> np.ndarray:
    """Simulated binary crossover, one child, clipped to [0,1].

    Per coordinate the spread factor beta is drawn from the SBX distribution
    with index ``eta`` (larger eta concentrates children at the parents), and
    the child takes either the contracted or the mirrored expanded side with
    probability 0.5.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    u = rng.random(p1.shape)
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)),
        (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
    )
    mirror = rng.random(p1.shape) < 0.5
    signed = np.where(mirror, -beta, beta)
    child = 0.5 * ((1.0 + signed) * p1 + (1.0 - signed) * p2)
    return np.clip(child, 0.0, 1.0)


def tournament_select_task(
    reference_theta: np.ndarray, s: int, dtheta: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``s`` uniform tasks and keep the one closest to the reference.

    s = 1 degenerates to uniform sampling; large s concentrates near the
    reference task.
    """
    candidates = rng.random((s, dtheta))
    if s == 1:
        return candidates[0]
    d2 = ((candidates - np.asarray(reference_theta, dtype=float)) ** 2).sum(axis=1)
    return candidates[int(np.argmin(d2))]


@dataclass
class BanditState:
    """UCB1 counters over candidate tournament sizes."""

    sizes: list[int]
    selected: np.ndarray | None = field(default=None)
    successes: np.ndarray | None = field(default=None)
    current: int | None = None

    def __post_init__(self):
        if self.selected is None:
            self.selected = np.zeros(len(self.sizes), dtype=np.int64)
        if self.successes is None:
            self.successes = np.zeros(len(self.sizes), dtype=np.int64)
        if self.current is None:
            self.current = self.sizes[0]


def ucb1_select(bandit: BanditState) -> int:
    """Tournament size with the best UCB1 score (ties: lowest index).

    Warm-up: any size never selected yet is returned first, in list order,
    since the UCB1 score is undefined at zero selections.
    """
    for j, count in enumerate(bandit.selected):
        if count == 0:
            bandit.current = bandit.sizes[j]
            return bandit.current
    total = bandit.selected.sum()
    score = bandit.successes / bandit.selected + np.sqrt(
        2.0 * np.log(total) / bandit.selected
    )
    bandit.current = bandit.sizes[int(np.argmax(score))]
    return bandit.current


def bandit_update(bandit: BanditState, size: int, success: bool) -> BanditState:
    """Count one selection of ``size`` and whether it produced a new elite."""
    try:
        j = bandit.sizes.index(size)
    except ValueError:
        raise ValueError(f"size {size} not in bandit sizes {bandit.sizes}") from None
    bandit.selected[j] += 1
    if success:
        bandit.successes[j] += 1
    return bandit


def local_linear_candidate(
    archive,
    tessellation: Tessellation,
    theta: np.ndarray,
    sigma_reg: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Predict a solution for ``theta`` from the elites around its cell.

    Fits an affine least-squares model from the task points of the cell's
    elite and its adjacent cells' elites to their solutions (ridge-stabilized
    against collinear neighborhoods), evaluates it at theta, and adds
    Gaussian exploration noise scaled per coordinate by the empirical
    variance of the gathered solutions.  Falls back to a uniform random
    solution when fewer than two elites are available.
    """
    theta = np.asarray(theta, dtype=float)
    cell = tessellation.nearest_cell(theta)
    members = [cell] + sorted(tessellation.neighbors(cell))
    if len(members) < 2:
        return rng.random(archive.xs.shape[1])
    thetas = archive.thetas[members]
    xs = archive.xs[members]

    design = np.hstack([thetas, np.ones((len(members), 1))])
    gram = design.T @ design + RIDGE * np.eye(design.shape[1])
    coef = np.linalg.solve(gram, design.T @ xs)
    prediction = np.append(theta, 1.0) @ coef
    noise = rng.standard_normal(xs.shape[1]) * np.sqrt(xs.var(axis=0))
    return np.clip(prediction + sigma_reg * noise, 0.0, 1.0)
