"""Field reconstructors used to validate sensor placements.

Three independent routes from k sensor readings to an n-point field:

* direct physics least squares on the augmented system (no training),
* linear gappy POD: pseudo-inverse of the sampled mode matrix,
* dense feed-forward regressors (end-to-end field output, or POD
  coefficients for the reduced-order variant), trained full-batch with
  Adam on mean-squared error.

The network code is deliberately self-contained numpy: training is
bit-reproducible per seed and the analytic gradients are testable against
finite differences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import DegeneratePlacementError, DivergenceError
from .rbffd import DiscreteOperator
from .system import Placement, build_augmented, lsq_solve

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Metrics:
    """Maximum absolute error and mean squared error over field points."""

    max_ae: float
    mse: float


def metrics(pred: np.ndarray, truth: np.ndarray) -> Metrics:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    diff = pred - truth
    return Metrics(float(np.max(np.abs(diff))), float(np.mean(diff * diff)))


# ---------------------------------------------------------------------------
# proper orthogonal decomposition


@dataclass
class PODBasis:
    """Orthonormal reduced basis from snapshot SVD (modes are left singular
    vectors; ``mean`` is nonzero only when fitted with mean removal)."""

    modes: np.ndarray
    singular_values: np.ndarray
    mean_removed: bool = False
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.modes.shape[0])

    @property
    def r(self) -> int:
        return self.modes.shape[1]


def pod_fit(snapshots, r: int, mean_removed: bool = False) -> PODBasis:
    """Leading r left singular vectors of the n x N snapshot matrix."""
    data = np.asarray(getattr(snapshots, "data", snapshots), dtype=float)
    if data.ndim != 2:
        raise ValueError("snapshots must be an n x N matrix")
    n, N = data.shape
    if not 1 <= r <= min(n, N):
        raise ValueError(f"r={r} outside [1, min(n={n}, N={N})]")
    mean = data.mean(axis=1) if mean_removed else np.zeros(n)
    U, s, _ = np.linalg.svd(data - mean[:, None], full_matrices=False)
    return PODBasis(U[:, :r], s[:r], mean_removed, mean)


def gappy_pod_reconstruct(basis: PODBasis, placement: Placement, s: np.ndarray) -> np.ndarray:
    """Least-squares POD coefficients from sparse samples, expanded to the
    full field. The sampled mode matrix must have full column rank."""
    s = np.asarray(s, dtype=float)
    if s.shape != (placement.k,):
        raise ValueError(f"expected {placement.k} measurements, got {s.shape}")
    M = basis.modes[placement.as_array(), :]
    sv = np.linalg.svd(M, compute_uv=False)
    tol = max(M.shape) * np.finfo(float).eps * (sv[0] if sv[0] > 0 else 1.0)
    if M.shape[0] < basis.r or sv[-1] <= tol:
        raise DegeneratePlacementError(
            f"sampled mode matrix is rank-deficient (k={placement.k}, r={basis.r})"
        )
    alpha, *_ = np.linalg.lstsq(M, s - basis.mean[placement.as_array()], rcond=None)
    return basis.mean + basis.modes @ alpha


def pod_coefficients(basis: PODBasis, fields: np.ndarray) -> np.ndarray:
    """Projection coefficients of full fields (columns or single vector);
    orthonormal modes make the pseudo-inverse a plain transpose."""
    fields = np.asarray(fields, dtype=float)
    if fields.ndim == 1:
        return basis.modes.T @ (fields - basis.mean)
    return basis.modes.T @ (fields - basis.mean[:, None])


# ---------------------------------------------------------------------------
# dense feed-forward regressor


@dataclass
class Dataset:
    """Paired measurement rows and target rows with a split tag."""

    inputs: np.ndarray
    targets: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs/targets row counts differ")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite entries")

    @property
    def count(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class MlpConfig:
    layers: tuple[int, ...]
    adam_iters: int = 4000
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("need at least input and output layers")
        if any(s < 1 for s in self.layers):
            raise ValueError("layer sizes must be positive")
        if self.adam_iters < 0:
            raise ValueError("adam_iters must be >= 0")


@dataclass
class MlpModel:
    """GELU hidden layers, identity output; weights stored as (fan_in, fan_out)."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "gelu"
    loss_trace: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]


def _gelu_forward(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    phi = 0.5 * (1.0 + erf(z / _SQRT2))
    return z * phi, phi


def _gelu_backward(z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return phi + z * _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def mlp_init(cfg: MlpConfig) -> MlpModel:
    """Fan-in-scaled normal weights (std 1/sqrt(fan_in)), zero biases."""
    rng = np.random.default_rng(cfg.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(cfg.layers[:-1], cfg.layers[1:]):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(tuple(cfg.layers), weights, biases)


def mlp_predict(model: MlpModel, s: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; accepts a single row or a batch."""
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    a = s[None, :] if single else s
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        a = _gelu_forward(z)[0] if i < last else z
    return a[0] if single else a


def loss_and_grad(
    model: MlpModel, X: np.ndarray, Y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """MSE loss (mean over all output entries) and its parameter gradients."""
    last = len(model.weights) - 1
    a = X
    acts = [a]
    hidden = []
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        if i < last:
            a, phi = _gelu_forward(z)
            hidden.append((z, phi))
        else:
            a = z
        acts.append(a)
    diff = a - Y
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    gws: list[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
    gbs: list[np.ndarray] = [None] * len(model.biases)  # type: ignore[list-item]
    for i in range(last, -1, -1):
        if i < last:
            z, phi = hidden[i]
            grad = grad * _gelu_backward(z, phi)
        gws[i] = acts[i].T @ grad
        gbs[i] = grad.sum(axis=0)
        if i > 0:
            grad = grad @ model.weights[i].T
    return loss, gws, gbs


def mlp_train(data: Dataset, cfg: MlpConfig) -> MlpModel:
    """Full-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on MSE.

    The model keeps its per-iteration loss trace; training is
    bit-reproducible for a fixed config and dataset.
    """
    if cfg.layers[0] != data.inputs.shape[1]:
        raise ValueError(
            f"input layer {cfg.layers[0]} does not match dataset width {data.inputs.shape[1]}"
        )
    if cfg.layers[-1] != data.targets.shape[1]:
        raise ValueError(
            f"output layer {cfg.layers[-1]} does not match target width {data.targets.shape[1]}"
        )
    model = mlp_init(cfg)
    params = model.weights + model.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    trace = np.empty(cfg.adam_iters)
    for step in range(cfg.adam_iters):
        loss, gws, gbs = loss_and_grad(model, data.inputs, data.targets)
        if not np.isfinite(loss):
            raise DivergenceError(step)
        trace[step] = loss
        grads = gws + gbs
        t = step + 1
        corr1 = 1.0 - beta1**t
        corr2 = 1.0 - beta2**t
        for p, g, mi, vi in zip(params, grads, m, v):
            mi += (1.0 - beta1) * (g - mi)
            vi += (1.0 - beta2) * (g * g - vi)
            p -= cfg.lr * (mi / corr1) / (np.sqrt(vi / corr2) + eps)
    model.loss_trace = trace
    return model


def pod_nn_reconstruct(model: MlpModel, basis: PODBasis, s: np.ndarray) -> np.ndarray:
    """Field from predicted POD coefficients: mean + modes @ model(s)."""
    alpha = mlp_predict(model, s)
    if alpha.ndim == 1:
        return basis.mean + basis.modes @ alpha
    return basis.mean[None, :] + alpha @ basis.modes.T


# ---------------------------------------------------------------------------
# direct physics least squares


def physics_reconstruct(
    op: DiscreteOperator,
    placement: Placement,
    noisy_measurements: np.ndarray,
    gamma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the augmented system for (field, source intensities)."""
    sys = build_augmented(op, placement, gamma, noisy_measurements)
    sol = lsq_solve(sys)
    return sol.field, sol.lambdas


# ---------------------------------------------------------------------------
# persistence

_MODEL_FORMAT = 1


def save_model(model: MlpModel, path) -> None:
    arrays = {f"w{i}": w for i, w in enumerate(model.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(model.biases)})
    np.savez(
        path,
        version=np.array(_MODEL_FORMAT),
        layer_sizes=np.array(model.layer_sizes),
        activation=np.array(model.activation),
        **arrays,
    )


def load_model(path) -> MlpModel:
    with np.load(path, allow_pickle=False) as data:
        if int(data["version"]) != _MODEL_FORMAT:
            raise ValueError(f"unsupported model format {int(data['version'])}")
        sizes = tuple(int(s) for s in data["layer_sizes"])
        depth = len(sizes) - 1
        weights = [data[f"w{i}"].copy() for i in range(depth)]
        biases = [data[f"b{i}"].copy() for i in range(depth)]
        return MlpModel(sizes, weights, biases, str(data["activation"]))


def save_dataset(data: Dataset, path) -> None:
    """CSV with one row per sample: s_* input columns then t_* targets."""
    k = data.inputs.shape[1]
    out = data.targets.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"s{i}" for i in range(k)] + [f"t{i}" for i in range(out)])
        for row_in, row_t in zip(data.inputs, data.targets):
            writer.writerow([f"{v:.17g}" for v in row_in] + [f"{v:.17g}" for v in row_t])


def load_dataset(path, split: str = "train") -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        k = sum(1 for name in header if name.startswith("s"))
        rows = [[float(v) for v in row] for row in reader]
    arr = np.asarray(rows)
    return Dataset(arr[:, :k], arr[:, k:], split)
