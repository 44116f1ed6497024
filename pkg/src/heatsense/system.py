"""Augmented least-squares systems coupling physics rows with sensor rows.

A placement of k sensors turns the discrete constraint into the stacked
least-squares problem

    min_U || W U - C ||^2,   W = [ gamma*W1  -gamma*source_basis ]
                                 [   O1            0             ]

with unknowns U = (u, lam), physics right-hand side C1 = gamma*(f_fixed+g)
and measurement block C2. The same object is used in two modes: scoring
(no measurements, criterion evaluation only) and reconstruction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RankDeficientError
from .rbffd import DiscreteOperator, forward_solve


@dataclass(frozen=True)
class Placement:
    """Ordered set of k distinct candidate indices into an n-point cloud."""

    indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        k = len(self.indices)
        if not 1 <= k <= self.n:
            raise ValueError(f"placement size k={k} outside [1, n={self.n}]")
        if len(set(self.indices)) != k:
            raise ValueError("placement indices must be distinct")
        if min(self.indices) < 0 or max(self.indices) >= self.n:
            raise ValueError("placement index out of range")

    @property
    def k(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


@dataclass(frozen=True)
class NoiseModel:
    """Relative Gaussian sensor noise u*(1+eps), eps ~ N(0, sigma^2)."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass
class AugmentedSystem:
    """Stacked matrix W, right-hand side C and split metadata (n, l, k)."""

    W: np.ndarray
    C: np.ndarray
    gamma: float
    n: int
    l: int
    k: int
    has_measurements: bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.W.shape


def selection_matrix(placement: Placement, n: int | None = None) -> np.ndarray:
    """k x n 0/1 matrix with row r selecting entry placement.indices[r]."""
    n = placement.n if n is None else n
    if n != placement.n:
        raise ValueError("selection size does not match placement")
    O1 = np.zeros((placement.k, n))
    O1[np.arange(placement.k), placement.as_array()] = 1.0
    return O1


def apply_noise(values: np.ndarray, nm: NoiseModel) -> np.ndarray:
    """Multiply each entry by (1 + eps_i), deterministic under the seed."""
    values = np.asarray(values, dtype=float)
    if nm.sigma == 0.0:
        return values.copy()
    rng = np.random.default_rng(nm.seed)
    eps = rng.normal(0.0, nm.sigma, size=values.shape)
    return values * (1.0 + eps)


def build_augmented(
    op: DiscreteOperator,
    placement: Placement,
    gamma: float = 1.0,
    measurements: np.ndarray | None = None,
) -> AugmentedSystem:
    """Stack gamma-weighted physics rows over unweighted sensor rows.

    Without measurements the system is in scoring mode: C2 is zero-filled
    and flagged unset, usable for the condition-number criterion only.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n, l, k = op.n, op.l, placement.k
    if placement.n != n:
        raise ValueError(f"placement built for n={placement.n}, operator has n={n}")
    W = np.zeros((n + k, n + l))
    W[:n, :n] = gamma * op.W1.toarray()
    W[:n, n:] = -gamma * op.source_basis
    W[n:, :n] = selection_matrix(placement)

    C = np.zeros(n + k)
    C[:n] = gamma * (op.f_fixed + op.g)
    has_measurements = measurements is not None
    if has_measurements:
        measurements = np.asarray(measurements, dtype=float)
        if measurements.shape != (k,):
            raise ValueError(f"expected {k} measurements, got shape {measurements.shape}")
        C[n:] = measurements
    return AugmentedSystem(W, C, gamma, n, l, k, has_measurements)


@dataclass
class LsqSolution:
    field: np.ndarray
    lambdas: np.ndarray
    residual_norm: float


class AugmentedFactor:
    """SVD factorization of one augmented matrix, reusable across many
    right-hand sides (the matrix depends only on the placement, not on the
    measurements)."""

    def __init__(self, sys: AugmentedSystem):
        U, s, Vt = np.linalg.svd(sys.W, full_matrices=False)
        ncols = sys.W.shape[1]
        tol = max(sys.W.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
        rank = int(np.sum(s > tol))
        if rank < ncols:
            raise RankDeficientError(rank, ncols)
        self._U, self._s, self._Vt = U, s, Vt
        self.n = sys.n
        self.l = sys.l
        self.k = sys.k
        self.gamma = sys.gamma
        self._c1 = sys.C[: sys.n].copy()

    @property
    def kappa(self) -> float:
        return float(self._s[0] / self._s[-1])

    def solve_measurements(self, measurements: np.ndarray) -> LsqSolution:
        """Least-squares solution for one measurement vector (the physics
        block of the right-hand side is fixed at factorization time)."""
        measurements = np.asarray(measurements, dtype=float)
        if measurements.shape != (self.k,):
            raise ValueError(f"expected {self.k} measurements")
        C = np.concatenate([self._c1, measurements])
        x = self._Vt.T @ ((self._U.T @ C) / self._s)
        resid = float(np.linalg.norm(self._U @ (self._s * (self._Vt @ x)) - C))
        return LsqSolution(x[: self.n], x[self.n :], resid)


def lsq_solve(sys: AugmentedSystem) -> LsqSolution:
    """Minimum-norm least-squares solution, split into field and intensities.

    Raises RankDeficientError (carrying the numerical rank) when W does not
    have full column rank at the spectral tolerance max(shape)*eps*sigma_max.
    """
    if not sys.has_measurements:
        raise ValueError("system has no measurements; built in scoring mode")
    ncols = sys.W.shape[1]
    U, s, Vt = np.linalg.svd(sys.W, full_matrices=False)
    tol = max(sys.W.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    rank = int(np.sum(s > tol))
    if rank < ncols:
        raise RankDeficientError(rank, ncols)
    x = Vt.T @ ((U.T @ sys.C) / s)
    resid = float(np.linalg.norm(sys.W @ x - sys.C))
    return LsqSolution(x[: sys.n], x[sys.n :], resid)


def consistent_system(
    op: DiscreteOperator,
    placement: Placement,
    gamma: float,
    lambdas: np.ndarray,
) -> tuple[AugmentedSystem, np.ndarray]:
    """Noiseless augmented system whose C equals W @ (field, lambdas).

    The measurement block holds the forward-solve field sampled at the
    sensors, so the exact solution is known; used by the error-bound
    verifier and consistency tests. Returns (system, exact_solution).
    """
    u = forward_solve(op, lambdas)
    meas = u[placement.as_array()]
    sys = build_augmented(op, placement, gamma, meas)
    exact = np.concatenate([u, np.asarray(lambdas, dtype=float)])
    return sys, exact


def save_placement(
    placement: Placement,
    path,
    criterion_log10: float,
    gamma: float,
    seed: int,
) -> None:
    """Placement JSON: {"n", "k", "indices", "criterion_log10", "gamma", "seed"}."""
    payload = {
        "n": placement.n,
        "k": placement.k,
        "indices": list(placement.indices),
        "criterion_log10": float(criterion_log10),
        "gamma": float(gamma),
        "seed": int(seed),
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_placement(path) -> tuple[Placement, dict]:
    payload = json.loads(Path(path).read_text())
    placement = Placement(tuple(payload["indices"]), payload["n"])
    if placement.k != payload["k"]:
        raise ValueError("placement file k does not match indices")
    return placement, payload
