"""Condition-number criterion for scoring sensor placements.

The spectral condition number of the augmented matrix W sandwiches the
relative reconstruction error under measurement perturbations; smaller is
better. The criterion needs no field data, only the discretized physics,
which is what makes placement optimization possible before any
measurements exist. ``verify_bounds`` checks the two-sided error-bound
inequality empirically on consistent systems with range-space
perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientError
from .rbffd import DiscreteOperator
from .system import AugmentedSystem, Placement

#: Fitness assigned to infeasible/rank-deficient placements; keeps the GA
#: loop exception-free and the fitness total-ordered.
PENALTY = 1.0e12


@dataclass(frozen=True)
class CriterionValue:
    """Spectral condition number with a rank flag (kappa = inf when deficient)."""

    kappa: float
    log10_kappa: float
    rank_ok: bool


def condition_number(W: np.ndarray) -> CriterionValue:
    """sigma_max / sigma_min of a tall matrix from its singular values.

    Rank is judged at the tolerance max(rows, cols) * eps * sigma_max;
    rank-deficient matrices get kappa = inf rather than an exception.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] < W.shape[1]:
        raise ValueError("expected a tall (rows >= cols) matrix")
    s = np.linalg.svd(W, compute_uv=False)
    tol = max(W.shape) * np.finfo(float).eps * s[0]
    if s[-1] <= tol:
        return CriterionValue(np.inf, np.inf, False)
    kappa = float(s[0] / s[-1])
    return CriterionValue(kappa, float(np.log10(kappa)), True)


class FitnessContext:
    """Reusable scoring context: operator, gamma, and the dense physics block.

    The physics block [gamma*W1 | -gamma*source_basis] never changes during
    a placement search, so it is densified once; each evaluation only
    stacks k selection rows underneath and computes singular values.
    Scores are cached per index set (row order cannot change singular
    values).
    """

    def __init__(self, op: DiscreteOperator, gamma: float = 1.0):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.op = op
        self.gamma = gamma
        self.n = op.n
        self.l = op.l
        top = np.zeros((self.n, self.n + self.l))
        top[:, : self.n] = gamma * op.W1.toarray()
        top[:, self.n :] = -gamma * op.source_basis
        self._top = top
        self._cache: dict[tuple[int, ...], float] = {}

    def fitness(self, indices) -> float:
        """log10 condition number of the augmented system for these sensors.

        Invalid index sets (duplicates, out of range, empty) and
        rank-deficient systems score PENALTY instead of raising.
        """
        idx = [int(i) for i in indices]
        if len(idx) == 0 or len(set(idx)) != len(idx):
            return PENALTY
        if min(idx) < 0 or max(idx) >= self.n:
            return PENALTY
        if len(idx) < self.l:
            # fewer sensors than source intensities: W is wider than tall
            return PENALTY
        key = tuple(sorted(idx))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        k = len(idx)
        M = np.empty((self.n + k, self.n + self.l))
        M[: self.n] = self._top
        bottom = M[self.n :]
        bottom[:] = 0.0
        bottom[np.arange(k), key] = 1.0
        s = np.linalg.svd(M, compute_uv=False)
        tol = max(M.shape) * np.finfo(float).eps * s[0]
        value = PENALTY if s[-1] <= tol else float(np.log10(s[0] / s[-1]))
        self._cache[key] = value
        return value


def placement_fitness(placement: Placement | np.ndarray, ctx: FitnessContext) -> float:
    """GA fitness of a placement: log10 kappa, or PENALTY when infeasible."""
    indices = placement.indices if isinstance(placement, Placement) else placement
    return ctx.fitness(indices)


@dataclass
class BoundReport:
    """Empirical check of the error-bound sandwich over random range-space
    perturbations.

    tightest_ratio_low  : min over trials of observed/lower-bound (>= 1)
    tightest_ratio_high : max over trials of observed/upper-bound (<= 1)
    """

    violations: int
    tightest_ratio_low: float
    tightest_ratio_high: float
    kappa: float
    trials: int


def verify_bounds(
    sys: AugmentedSystem,
    trials: int,
    perturb_scale: float,
    seed: int = 0,
) -> BoundReport:
    """Check (1/kappa)*|dC|/|C| <= |dU|/|U| <= kappa*|dC|/|C| empirically.

    Requires a consistent system (C = W @ U_exact, e.g. built by
    ``consistent_system``). Each trial draws z, perturbs by dC =
    perturb_scale * W z (a range-of-W perturbation, the regime where the
    sandwich holds exactly), re-solves, and tests both inequalities.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    U, s, Vt = np.linalg.svd(sys.W, full_matrices=False)
    ncols = sys.W.shape[1]
    tol = max(sys.W.shape) * np.finfo(float).eps * s[0]
    rank = int(np.sum(s > tol))
    if rank < ncols:
        raise RankDeficientError(rank, ncols)
    kappa = float(s[0] / s[-1])

    solve = lambda rhs: Vt.T @ ((U.T @ rhs) / (s[:, None] if rhs.ndim == 2 else s))
    u_star = solve(sys.C)
    norm_u = np.linalg.norm(u_star)
    norm_c = np.linalg.norm(sys.C)

    if perturb_scale == 0.0:
        return BoundReport(0, 0.0, 0.0, kappa, trials)

    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((ncols, trials))
    dC = perturb_scale * (sys.W @ Z)
    dU = solve(sys.C[:, None] + dC) - u_star[:, None]
    rel_u = np.linalg.norm(dU, axis=0) / norm_u
    rel_c = np.linalg.norm(dC, axis=0) / norm_c
    lower = rel_c / kappa
    upper = kappa * rel_c
    violations = int(np.sum((rel_u < lower) | (rel_u > upper)))
    return BoundReport(
        violations,
        float(np.min(rel_u / lower)),
        float(np.max(rel_u / upper)),
        kappa,
        trials,
    )
