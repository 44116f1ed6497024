"""Placement optimizers: GA on the physics criterion plus baselines.

The genetic algorithm encodes a placement as a fixed-size set of k
distinct candidate indices (not a bitmask: the cardinality constraint is
structural). Baselines cover random (rs), uniform (us), the greedy
condition-number selector on POD modes (cns), the clustering/correlation
selector (ecs), and an exhaustive oracle for small test instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from itertools import combinations

import numpy as np
from scipy.cluster.vq import kmeans2

from .cloud import PointCloud
from .criterion import FitnessContext
from .errors import SelectionFailedError
from .reconstruct import pod_fit
from .system import Placement


@dataclass(frozen=True)
class GaConfig:
    """Fixed-size subset GA settings.

    mutation_prob defaults to 1/k when left as None. Tournament size 3
    and single-individual elitism are pinned for determinism.
    """

    population_size: int = 10
    generations: int = 2000
    crossover_prob: float = 0.9
    mutation_prob: float | None = None
    seed: int = 0
    elitism: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if self.mutation_prob is not None and not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must be < population_size")


@dataclass
class SnapshotMatrix:
    """n x N matrix of field snapshots (one column per field)."""

    data: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ValueError("snapshots must be a n x N matrix with N >= 1")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("snapshots contain non-finite entries")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def count(self) -> int:
        return self.data.shape[1]


_TOURNAMENT = 3


def _repair(genes: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Replace duplicate genes with random unused indices (first stays)."""
    seen: set[int] = set()
    dup_slots = []
    for slot, gene in enumerate(genes):
        if gene in seen:
            dup_slots.append(slot)
        else:
            seen.add(int(gene))
    if dup_slots:
        unused = np.setdiff1d(np.arange(n), genes, assume_unique=False)
        picks = rng.choice(unused, size=len(dup_slots), replace=False)
        genes[dup_slots] = picks
    return genes


def ga_optimize(
    ctx: FitnessContext,
    k: int,
    cfg: GaConfig,
) -> tuple[Placement, np.ndarray]:
    """Minimize the placement criterion with a seeded genetic algorithm.

    Chromosome: k distinct indices. Per generation: tournament selection
    (size 3), uniform set-crossover with duplicate repair, per-gene reset
    mutation, elitism. Returns the best-ever placement and the per-
    generation best fitness (non-increasing by elitism).
    """
    n = ctx.n
    if k > n:
        raise ValueError(f"k={k} exceeds candidate count n={n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    mut_prob = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / k

    pop = [rng.choice(n, size=k, replace=False) for _ in range(cfg.population_size)]
    fit = np.array([ctx.fitness(ind) for ind in pop])
    best_idx = int(np.argmin(fit))
    best = pop[best_idx].copy()
    best_fit = float(fit[best_idx])
    history = [best_fit]

    for _ in range(cfg.generations):
        new_pop = [best.copy() for _ in range(cfg.elitism)]
        while len(new_pop) < cfg.population_size:
            parents = []
            for _ in range(2):
                contenders = rng.integers(0, cfg.population_size, size=_TOURNAMENT)
                parents.append(pop[contenders[np.argmin(fit[contenders])]])
            if rng.random() < cfg.crossover_prob:
                mask = rng.random(k) < 0.5
                child = np.where(mask, parents[0], parents[1]).copy()
                child = _repair(child, n, rng)
            else:
                child = parents[0].copy()
            mut_mask = rng.random(k) < mut_prob
            if mut_mask.any():
                child[mut_mask] = rng.integers(0, n, size=int(mut_mask.sum()))
                child = _repair(child, n, rng)
            new_pop.append(child)
        pop = new_pop
        fit = np.array([ctx.fitness(ind) for ind in pop])
        gen_best = int(np.argmin(fit))
        if fit[gen_best] < best_fit:
            best_fit = float(fit[gen_best])
            best = pop[gen_best].copy()
        history.append(best_fit)

    return Placement(tuple(int(i) for i in best), n), np.asarray(history)


def random_placement(n: int, k: int, seed: int) -> Placement:
    """k distinct uniform indices, deterministic per seed."""
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=k, replace=False)
    return Placement(tuple(int(i) for i in idx), n)


def uniform_placement(n: int, k: int) -> Placement:
    """Evenly spread indices round(i*(n-1)/(k-1)); k=1 takes the middle.

    Rounding collisions (k close to n) are repaired by moving to the
    nearest unused index.
    """
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if k == 1:
        return Placement(((n - 1) // 2,), n)
    raw = [int(np.rint(i * (n - 1) / (k - 1))) for i in range(k)]
    used: set[int] = set()
    out = []
    for idx in raw:
        if idx not in used:
            used.add(idx)
            out.append(idx)
            continue
        for offset in range(1, n):
            for cand in (idx - offset, idx + offset):
                if 0 <= cand < n and cand not in used:
                    used.add(cand)
                    out.append(cand)
                    break
            else:
                continue
            break
    return Placement(tuple(out), n)


def _greedy_kappa(rows: np.ndarray, sub_r: bool) -> tuple[float, float]:
    """(kappa, sigma_min) of a candidate measurement matrix.

    While fewer rows than modes exist the matrix cannot have full column
    rank, so kappa is taken over the nonzero singular values and sigma_min
    (the smallest nonzero one) serves as the secondary ranking key.
    """
    s = np.linalg.svd(rows, compute_uv=False)
    if sub_r:
        nz = s[s > max(rows.shape) * np.finfo(float).eps * (s[0] if s[0] > 0 else 1.0)]
        if len(nz) == 0:
            return np.inf, 0.0
        return float(nz[0] / nz[-1]), float(nz[-1])
    tol = max(rows.shape) * np.finfo(float).eps * (s[0] if s[0] > 0 else 1.0)
    if s[-1] <= tol:
        return np.inf, float(s[-1])
    return float(s[0] / s[-1]), float(s[-1])


def cns_select(snapshots: SnapshotMatrix, r: int, k: int) -> Placement:
    """Greedy selector minimizing the condition number of the sampled
    POD-mode matrix, one sensor at a time.

    Sub-r steps rank by kappa over nonzero singular values with
    max-sigma_min as tie rule (kappa alone cannot rank single rows);
    remaining ties go to the lower index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = snapshots.n
    if k > n:
        raise ValueError(f"k={k} exceeds candidate count n={n}")
    basis = pod_fit(snapshots, r)
    if basis.singular_values[0] <= 0.0:
        raise SelectionFailedError("snapshots carry no signal to rank candidates")
    modes = basis.modes
    selected: list[int] = []
    for step in range(k):
        sub_r = (step + 1) < r
        best_key = None
        best_i = -1
        for i in range(n):
            if i in selected:
                continue
            rows = modes[selected + [i], :]
            kappa, smin = _greedy_kappa(rows, sub_r)
            if not np.isfinite(kappa):
                continue
            key = (kappa, -smin)
            if best_key is None or key < best_key:
                best_key = key
                best_i = i
        if best_i < 0:
            raise SelectionFailedError(f"no finite-kappa candidate at step {step}")
        selected.append(best_i)
    return Placement(tuple(selected), n)


def _pearson_rows(data: np.ndarray) -> np.ndarray:
    """Row-wise standardized copies; zero-variance rows become zero vectors
    so their correlation with anything is 0 (uninformative location)."""
    centered = data - data.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    out = centered / safe
    out[norms[:, 0] == 0] = 0.0
    return out


def ecs_select(
    snapshots: SnapshotMatrix,
    cloud: PointCloud,
    k: int,
    seed: int = 0,
) -> Placement:
    """Clustering-based selector: spatial k-means cells, one representative
    per cell (nearest the centroid), ordered by minimum snapshot
    correlation with already-chosen sensors.

    The first sensor is the representative of the most populated cell;
    each next sensor is the pool member whose maximum absolute Pearson
    correlation against the selected rows is smallest. Empty k-means cells
    (rare) are backfilled from all unselected candidates by the same rule.
    """
    n = snapshots.n
    if k > n:
        raise ValueError(f"k={k} exceeds candidate count n={n}")
    if snapshots.count < 2:
        raise ValueError("need at least 2 snapshots for correlations")
    if cloud.n != n:
        raise ValueError("cloud size does not match snapshot rows")
    pts = cloud.points
    if k == 1:
        centroid = pts.mean(axis=0)
        rep = int(np.argmin(np.linalg.norm(pts - centroid, axis=1)))
        return Placement((rep,), n)

    centroids, labels = kmeans2(pts, k, minit="++", seed=seed)
    pool: list[int] = []
    cell_sizes: dict[int, int] = {}
    for cell in range(k):
        members = np.flatnonzero(labels == cell)
        if len(members) == 0:
            continue
        dists = np.linalg.norm(pts[members] - centroids[cell], axis=1)
        pool.append(int(members[np.argmin(dists)]))
        cell_sizes[pool[-1]] = len(members)

    std_rows = _pearson_rows(snapshots.data)
    first = max(pool, key=lambda i: (cell_sizes[i], -i))
    selected = [first]
    remaining = [i for i in pool if i != first]
    while len(selected) < k:
        if not remaining:  # backfill for empty cells
            remaining = [i for i in range(n) if i not in selected]
        corr = np.abs(std_rows[remaining] @ std_rows[selected].T)
        worst = corr.max(axis=1)
        pick = int(np.argmin(worst))
        selected.append(remaining.pop(pick))
    return Placement(tuple(selected), n)


def exhaustive_select(ctx: FitnessContext, k: int) -> Placement:
    """True argmin of the criterion over all k-subsets (test oracle).

    Guarded to C(n, k) <= 1e6; ties resolve to the lexicographically
    smallest subset.
    """
    n = ctx.n
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    total = comb(n, k)
    if total > 10**6:
        raise ValueError(f"C({n},{k}) = {total} exceeds the 1e6 enumeration guard")
    best_fit = np.inf
    best: tuple[int, ...] | None = None
    for combo in combinations(range(n), k):
        f = ctx.fitness(combo)
        if f < best_fit:
            best_fit = f
            best = combo
    assert best is not None
    return Placement(best, n)
