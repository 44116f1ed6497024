"""RBF-FD discretization of the steady heat constraint.

Differentiation weights come from polyharmonic-spline interpolation
(phi(r) = r^p, odd p, default cubic) augmented with monomials up to a
configurable total degree. Each stencil solves the local saddle system

    [ A  P ] [ w ]   [ b ]
    [ P' 0 ] [ v ] = [ c ]

where A is the pairwise kernel matrix, P the monomial Vandermonde, and
(b, c) the target operator applied to kernel translates and monomials at
the stencil center. The polynomial block makes the weights exact for all
polynomials up to the augmentation degree.

The assembled operator has one row per cloud point: a scaled Laplacian
row at interior points, a unit (identity) row at Dirichlet points and an
outward normal-derivative row at Neumann points, so that

    W1 u = source_basis @ lam + f_fixed + g

holds for the discrete field u and source intensities lam.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cloud import DIRICHLET, INTERIOR, NEUMANN, PointCloud, StencilSet
from .errors import DegenerateStencilError, IllPosedModelError

LAPLACIAN = "laplacian"
IDENTITY = "identity"
NORMAL_DERIVATIVE = "normal_derivative"


@dataclass(frozen=True)
class RbfConfig:
    """Kernel and augmentation settings for weight computation."""

    phs_exponent: int = 3
    poly_degree: int = 2

    def __post_init__(self):
        if self.phs_exponent < 3 or self.phs_exponent % 2 == 0:
            raise ValueError("phs_exponent must be an odd integer >= 3")
        if self.poly_degree < 1:
            raise ValueError("poly_degree must be >= 1")

    def q(self, dim: int) -> int:
        """Number of augmentation monomials in ``dim`` dimensions."""
        return comb(self.poly_degree + dim, dim)


@dataclass
class SourceSpec:
    """Separated source term f(x; lam) = sum_j basis[j](x) * lam_j + fixed(x)."""

    basis: Sequence[Callable[[np.ndarray], np.ndarray]]
    fixed: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def l(self) -> int:
        return len(self.basis)


@dataclass
class PhysicsSpec:
    """Interior equation laplace_coeff * Lap(u) = f, plus boundary data.

    ``dirichlet_value`` and ``neumann_flux`` are either scalars or
    callables mapping (k, d) boundary coordinates to values; the Neumann
    datum is the outward normal derivative of the field itself.
    """

    source: SourceSpec
    laplace_coeff: float = 1.0
    dirichlet_value: float | Callable[[np.ndarray], np.ndarray] = 0.0
    neumann_flux: float | Callable[[np.ndarray], np.ndarray] = 0.0


@dataclass
class DiscreteOperator:
    """Assembled constraint: W1 u = source_basis @ lam + f_fixed + g."""

    W1: sp.csr_matrix
    g: np.ndarray
    source_basis: np.ndarray
    f_fixed: np.ndarray
    _lu: spla.SuperLU | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.W1.shape[1]

    @property
    def l(self) -> int:
        return self.source_basis.shape[1]


def _monomial_exponents(degree: int, dim: int) -> list[tuple[int, ...]]:
    if dim == 1:
        return [(a,) for a in range(degree + 1)]
    return [
        (a, b)
        for total in range(degree + 1)
        for a in range(total, -1, -1)
        for b in (total - a,)
    ]


def _monomial_values(local: np.ndarray, exps: list[tuple[int, ...]]) -> np.ndarray:
    cols = [np.prod([local[:, k] ** e[k] for k in range(local.shape[1])], axis=0) for e in exps]
    return np.column_stack(cols)


def local_weights(
    cloud: PointCloud,
    stencil: np.ndarray,
    center: int,
    op_kind: str,
    cfg: RbfConfig,
) -> np.ndarray:
    """Differentiation weights for one stencil, evaluated at its center.

    Weights w satisfy sum_j w_j u(x_j) = L u(x_center) exactly for every
    polynomial up to cfg.poly_degree. The Lagrange block of the saddle
    solve is discarded.
    """
    stencil = np.asarray(stencil, dtype=np.int64)
    m = len(stencil)
    where_center = np.flatnonzero(stencil == center)
    if len(where_center) != 1:
        raise ValueError("stencil must contain its center exactly once")
    if op_kind == IDENTITY:
        w = np.zeros(m)
        w[int(where_center[0])] = 1.0
        return w

    d = cloud.dim
    q = cfg.q(d)
    if m < q:
        raise ValueError(f"stencil size {m} < augmentation size {q}")
    p = cfg.phs_exponent
    local = cloud.points[stencil] - cloud.points[center]
    diff = local[:, None, :] - local[None, :, :]
    r_pair = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    A = r_pair**p
    exps = _monomial_exponents(cfg.poly_degree, d)
    P = _monomial_values(local, exps)

    r0 = np.linalg.norm(local, axis=1)
    if op_kind == LAPLACIAN:
        # Lap r^p = p (p + d - 2) r^(p-2); cubic kernel: 6r in 1D, 9r in 2D
        b = p * (p + d - 2) * r0 ** (p - 2)
        c = np.array([2.0 if sorted(e, reverse=True) == [2] + [0] * (d - 1) else 0.0 for e in exps])
    elif op_kind == NORMAL_DERIVATIVE:
        nvec = cloud.normals[center]
        b = -p * r0 ** (p - 2) * (local @ nvec)
        c = np.zeros(q)
        for j, e in enumerate(exps):
            if sum(e) == 1:
                c[j] = nvec[e.index(1)]
    else:
        raise ValueError(f"unknown operator kind {op_kind!r}")

    saddle = np.zeros((m + q, m + q))
    saddle[:m, :m] = A
    saddle[:m, m:] = P
    saddle[m:, :m] = P.T
    rhs = np.concatenate([b, c])
    try:
        sol = np.linalg.solve(saddle, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateStencilError(center, f"singular stencil system at point {center}: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise DegenerateStencilError(center)
    return sol[:m]


def assemble(
    cloud: PointCloud,
    stencils: StencilSet,
    cfg: RbfConfig,
    physics: PhysicsSpec,
) -> DiscreteOperator:
    """Assemble the global operator, boundary vector and source columns."""
    n = cloud.n
    if stencils.indices.shape[0] != n:
        raise ValueError("stencil set does not match cloud")
    rows, cols, vals = [], [], []
    g = np.zeros(n)
    pts = cloud.points

    dir_idx = cloud.indices_where(DIRICHLET)
    neu_idx = cloud.indices_where(NEUMANN)
    int_idx = cloud.indices_where(INTERIOR)

    for i in int_idx:
        sten = stencils.row(i)
        w = physics.laplace_coeff * local_weights(cloud, sten, i, LAPLACIAN, cfg)
        rows.extend([i] * len(sten))
        cols.extend(sten.tolist())
        vals.extend(w.tolist())
    for i in dir_idx:
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
    for i in neu_idx:
        sten = stencils.row(i)
        w = local_weights(cloud, sten, i, NORMAL_DERIVATIVE, cfg)
        rows.extend([i] * len(sten))
        cols.extend(sten.tolist())
        vals.extend(w.tolist())

    W1 = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    def _eval(spec, idx):
        if callable(spec):
            return np.asarray(spec(pts[idx]), dtype=float)
        return np.full(len(idx), float(spec))

    if len(dir_idx):
        g[dir_idx] = _eval(physics.dirichlet_value, dir_idx)
    if len(neu_idx):
        g[neu_idx] = _eval(physics.neumann_flux, neu_idx)

    l = physics.source.l
    source_basis = np.zeros((n, l))
    f_fixed = np.zeros(n)
    if len(int_idx):
        for j, phi in enumerate(physics.source.basis):
            source_basis[int_idx, j] = np.asarray(phi(pts[int_idx]), dtype=float)
        if physics.source.fixed is not None:
            f_fixed[int_idx] = np.asarray(physics.source.fixed(pts[int_idx]), dtype=float)
    return DiscreteOperator(W1, g, source_basis, f_fixed)


def forward_solve(op: DiscreteOperator, lambdas: np.ndarray) -> np.ndarray:
    """Solve W1 u = source_basis @ lam + f_fixed + g for the field u.

    Used as the ground-truth generator; the LU factorization is cached on
    the operator for repeated solves over different intensities.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != (op.l,):
        raise ValueError(f"expected {op.l} source intensities, got shape {lambdas.shape}")
    rhs = op.source_basis @ lambdas + op.f_fixed + op.g
    if op._lu is None:
        try:
            op._lu = spla.splu(op.W1.tocsc())
        except RuntimeError as exc:
            raise IllPosedModelError(f"singular discrete operator: {exc}") from exc
    u = op._lu.solve(rhs)
    if not np.all(np.isfinite(u)):
        raise IllPosedModelError("non-finite forward solution")
    resid = np.linalg.norm(op.W1 @ u - rhs)
    scale = np.linalg.norm(rhs) + spla.norm(op.W1) * np.linalg.norm(u)
    if resid > 1e-8 * max(scale, 1.0):
        raise IllPosedModelError(f"forward solve residual {resid:.3e} too large")
    return u


def export_operator(op: DiscreteOperator, directory) -> None:
    """Triplet-text export: w1 as ``row,col,value`` plus g / basis / fixed files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    coo = op.W1.tocoo()
    with open(directory / "w1_triplets.csv", "w") as fh:
        fh.write("row,col,value\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r},{c},{v:.17g}\n")
    np.savetxt(directory / "g.csv", op.g, fmt="%.17g")
    np.savetxt(directory / "source_basis.csv", op.source_basis, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "f_fixed.csv", op.f_fixed, fmt="%.17g")
    meta = {"n": op.n, "l": op.l, "format": 1}
    (directory / "operator.json").write_text(json.dumps(meta))


def load_operator(directory) -> DiscreteOperator:
    directory = Path(directory)
    meta = json.loads((directory / "operator.json").read_text())
    n, l = meta["n"], meta["l"]
    trip = np.loadtxt(directory / "w1_triplets.csv", delimiter=",", skiprows=1, ndmin=2)
    W1 = sp.coo_matrix(
        (trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))), shape=(n, n)
    ).tocsr()
    g = np.loadtxt(directory / "g.csv").reshape(n)
    source_basis = np.loadtxt(directory / "source_basis.csv", delimiter=",").reshape(n, l)
    f_fixed = np.loadtxt(directory / "f_fixed.csv").reshape(n)
    return DiscreteOperator(W1, g, source_basis, f_fixed)
