"""End-to-end experiment orchestration: place, measure, reconstruct, score.

Protocol
--------
Each experiment fixes a case and a sensor budget k. Selector methods
produce placements (pspo needs only the discretized physics; cns/ecs
consume the training snapshots; rs/us need nothing). Reconstructors are
fitted on a training set of forward-solve fields with noisy sensor
inputs, then scored on the case's canonical scenario: the reference
field at the canonical source intensities, observed through the sensors
under per-seed noise draws. Reported metrics compare reconstructions
against that reference field, mirroring the single-scenario tables the
benchmark is defined by.

Report rows are keyed (method, k, sigma, reconstructor, seed). For
deterministic methods the seed enumerates evaluation noise draws; for
the rs baseline it enumerates random placements, each row aggregating
the mean over the same noise draws so medians across placements are
directly comparable.

Noise is realized as common random fields: each train sample and each
evaluation seed draws one relative-noise value per candidate location,
and every placement reads its own sensors out of that shared noisy
world. Per sensor the noise is i.i.d. Gaussian exactly as specified;
sharing the fields across placements is a paired-comparison design that
keeps method orderings from hinging on which placement drew luckier
noise.

Everything is derived from one master seed through named hash seeds, so
two runs of the same config are bit-identical apart from wall-clock
columns.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .cases import CaseSpec, build_cloud, build_operator, case_by_name
from .cloud import PointCloud
from .criterion import FitnessContext
from .errors import ConfigError, ExperimentCellError, HeatsenseError
from .placement import (
    GaConfig,
    SnapshotMatrix,
    cns_select,
    ecs_select,
    ga_optimize,
    random_placement,
    uniform_placement,
)
from .rbffd import DiscreteOperator, forward_solve
from .reconstruct import (
    Dataset,
    MlpConfig,
    PODBasis,
    gappy_pod_reconstruct,
    metrics,
    mlp_predict,
    mlp_train,
    pod_coefficients,
    pod_fit,
)
from .system import AugmentedFactor, Placement, build_augmented, save_placement

METHODS = ("pspo", "us", "rs", "cns", "ecs")
RECONSTRUCTORS = ("physics", "gappy_pod", "pod_nn", "mlp")

#: POD modes whose snapshot energy falls below this relative threshold are
#: excluded from the linear gappy route: they carry no field information
#: and only amplify sensor noise. The NN route keeps the full mode count.
GAPPY_ENERGY_TOL = 1e-8


@dataclass
class ExperimentConfig:
    case: CaseSpec
    methods: tuple[str, ...] = ("pspo", "us", "rs")
    ks: tuple[int, ...] = (10,)
    sigmas: tuple[float, ...] = (0.1,)
    n_eval_seeds: int = 20
    reconstructors: tuple[str, ...] = ("physics", "gappy_pod", "pod_nn", "mlp")
    rs_count: int = 100
    gamma: float = 1.0
    master_seed: int = 0
    ga_population: int | None = None
    ga_generations: int | None = None
    ga_crossover: float = 0.9
    ga_mutation: float | None = None
    nn_iters: int | None = None
    pod_modes: int | None = None
    n_train: int | None = None
    n_test: int | None = None
    out_dir: Path | None = None

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        for r in self.reconstructors:
            if r not in RECONSTRUCTORS:
                raise ConfigError(f"unknown reconstructor {r!r}")
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("sigmas must be >= 0")
        if any(k < 1 or k > self.case.n_points for k in self.ks):
            raise ConfigError("every k must satisfy 1 <= k <= n")
        if self.n_eval_seeds < 1 or self.rs_count < 1:
            raise ConfigError("seed and rs counts must be >= 1")
        if min(self.resolved("n_train"), self.resolved("n_test")) < 1:
            raise ConfigError("dataset sizes must be >= 1")

    def resolved(self, name: str):
        """Config override if set, else the case default of the same name."""
        value = getattr(self, name)
        return value if value is not None else getattr(self.case, name)

    def canonical_dict(self) -> dict:
        d = {
            "case": self.case.name,
            "n_points": self.case.n_points,
            "m": self.case.m,
            "poly_degree": self.case.poly_degree,
            "methods": list(self.methods),
            "ks": list(self.ks),
            "sigmas": list(self.sigmas),
            "n_eval_seeds": self.n_eval_seeds,
            "reconstructors": list(self.reconstructors),
            "rs_count": self.rs_count,
            "gamma": self.gamma,
            "master_seed": self.master_seed,
            "ga_population": self.resolved("ga_population"),
            "ga_generations": self.resolved("ga_generations"),
            "ga_crossover": self.ga_crossover,
            "ga_mutation": self.ga_mutation,
            "nn_iters": self.resolved("nn_iters"),
            "pod_modes": self.resolved("pod_modes"),
            "n_train": self.resolved("n_train"),
            "n_test": self.resolved("n_test"),
        }
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRow:
    case: str
    method: str
    k: int
    sigma: float
    seed: int
    reconstructor: str
    max_ae: float
    mse: float
    log10_kappa: float
    wall_ms: float
    placement_path: str
    config_hash: str


@dataclass
class RunReport:
    rows: list[RunRow]
    config_hash: str
    summary: dict = field(default_factory=dict)


CSV_COLUMNS = (
    "case,method,k,sigma,seed,reconstructor,max_ae,mse,log10_kappa,wall_ms,placement_path"
)


def _seed_for(master: int, *key) -> int:
    """Stable per-component seed derived from the master seed and a name."""
    blob = json.dumps([master, *key]).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


@dataclass
class ExperimentData:
    """Shared per-experiment state: discretization, fields, reference."""

    cloud: PointCloud
    op: DiscreteOperator
    ctx: FitnessContext
    train_fields: np.ndarray  # (n_train, n)
    test_fields: np.ndarray  # (n_test, n)
    u_ref: np.ndarray

    def train_noise_fields(self, master_seed: int, sigma: float) -> np.ndarray:
        """One relative-noise value per (train sample, candidate location)."""
        rng = np.random.default_rng(_seed_for(master_seed, "train-noise", sigma))
        return rng.normal(0.0, sigma, size=self.train_fields.shape)

    def eval_noise_field(self, master_seed: int, sigma: float, seed_index: int) -> np.ndarray:
        """The shared noisy world for one evaluation seed."""
        rng = np.random.default_rng(_seed_for(master_seed, "eval-noise", sigma, seed_index))
        return rng.normal(0.0, sigma, size=self.u_ref.shape)


def _sample_box(box: np.ndarray, count: int, seed: int) -> np.ndarray:
    """Scrambled Halton draw over the parameter box.

    Low-discrepancy sampling keeps every region of the box covered at any
    sample count; iid uniform draws leave corners empty often enough to
    destabilize the reduced-order and network reconstructors.
    """
    sampler = qmc.Halton(d=box.shape[0], scramble=True, seed=seed)
    return qmc.scale(sampler.random(count), box[:, 0], box[:, 1])


def prepare_data(cfg: ExperimentConfig) -> ExperimentData:
    case = cfg.case
    cloud = build_cloud(case)
    op = build_operator(case, cloud)
    ctx = FitnessContext(op, cfg.gamma)
    box = case.param_box
    lam_train = _sample_box(box, cfg.resolved("n_train"), _seed_for(cfg.master_seed, "train-params"))
    lam_test = _sample_box(box, cfg.resolved("n_test"), _seed_for(cfg.master_seed, "test-params"))
    train_fields = np.stack([forward_solve(op, lam) for lam in lam_train])
    test_fields = np.stack([forward_solve(op, lam) for lam in lam_test])
    u_ref = forward_solve(op, case.canonical_params)
    return ExperimentData(cloud, op, ctx, train_fields, test_fields, u_ref)


def select_placement(
    cfg: ExperimentConfig,
    data: ExperimentData,
    method: str,
    k: int,
    rs_index: int = 0,
) -> Placement:
    """Run one selector; deterministic given the config's master seed."""
    n = data.op.n
    if method == "us":
        return uniform_placement(n, k)
    if method == "rs":
        return random_placement(n, k, _seed_for(cfg.master_seed, "rs", k, rs_index))
    if method == "pspo":
        ga = GaConfig(
            population_size=cfg.resolved("ga_population"),
            generations=cfg.resolved("ga_generations"),
            crossover_prob=cfg.ga_crossover,
            mutation_prob=cfg.ga_mutation,
            seed=_seed_for(cfg.master_seed, "pspo", k),
        )
        best, _ = ga_optimize(data.ctx, k, ga)
        return best
    snapshots = SnapshotMatrix(data.train_fields.T, provenance="train forward solves")
    if method == "cns":
        r = min(cfg.resolved("pod_modes"), *snapshots.data.shape)
        return cns_select(snapshots, r, k)
    if method == "ecs":
        return ecs_select(snapshots, data.cloud, k, seed=_seed_for(cfg.master_seed, "ecs", k))
    raise ConfigError(f"unknown method {method!r}")


class _Scaler:
    """Affine standardization; scalar over the whole array or per column."""

    def __init__(self, X: np.ndarray, per_feature: bool = False):
        if per_feature:
            self.mu = X.mean(axis=0)
            self.sd = np.maximum(X.std(axis=0), 1e-12)
        else:
            self.mu = float(X.mean())
            self.sd = float(X.std()) or 1.0

    def fwd(self, X):
        return (X - self.mu) / self.sd

    def inv(self, X):
        return X * self.sd + self.mu


@dataclass
class TrainedReconstructors:
    """Fitted per-(placement, sigma) reconstruction bundle."""

    placement: Placement
    sigma: float
    physics_factor: AugmentedFactor | None = None
    gappy_basis: PODBasis | None = None
    nn_basis: PODBasis | None = None
    mlp_model: object = None
    mlp_x: _Scaler | None = None
    mlp_y: _Scaler | None = None
    podnn_model: object = None
    podnn_x: _Scaler | None = None
    podnn_y: _Scaler | None = None


def train_reconstructors(
    cfg: ExperimentConfig,
    data: ExperimentData,
    placement: Placement,
    sigma: float,
    which: tuple[str, ...],
) -> TrainedReconstructors:
    """Fit the data-driven reconstructors for one placement and noise level.

    Training inputs are the train fields sampled at the sensors with one
    noise realization per sample; targets stay clean. Inputs and targets
    are standardized around the network (scalar for fields, per-mode for
    POD coefficients); the linear gappy basis is truncated at the
    snapshot energy rank.
    """
    bundle = TrainedReconstructors(placement, sigma)
    sensors = placement.as_array()
    fields = data.train_fields
    if "physics" in which:
        scoring = build_augmented(data.op, placement, cfg.gamma)
        bundle.physics_factor = AugmentedFactor(scoring)
    need_pod = "gappy_pod" in which or "pod_nn" in which
    if need_pod:
        snap = fields.T
        sv = np.linalg.svd(snap, compute_uv=False)
        energy_rank = max(1, int(np.sum(sv > GAPPY_ENERGY_TOL * sv[0])))
        r = min(cfg.resolved("pod_modes"), *snap.shape)
        if "gappy_pod" in which:
            bundle.gappy_basis = pod_fit(snap, min(r, energy_rank))
        if "pod_nn" in which:
            bundle.nn_basis = pod_fit(snap, r)
    if "mlp" in which or "pod_nn" in which:
        eps = data.train_noise_fields(cfg.master_seed, sigma)
        inputs = fields[:, sensors] * (1.0 + eps[:, sensors])
        hidden = cfg.case.hidden
        iters = cfg.resolved("nn_iters")
        if "mlp" in which:
            sx, sy = _Scaler(inputs), _Scaler(fields)
            mlp_cfg = MlpConfig(
                (placement.k, *hidden, fields.shape[1]),
                adam_iters=iters,
                seed=_seed_for(cfg.master_seed, "mlp-init", placement.indices, sigma),
            )
            bundle.mlp_model = mlp_train(Dataset(sx.fwd(inputs), sy.fwd(fields)), mlp_cfg)
            bundle.mlp_x, bundle.mlp_y = sx, sy
        if "pod_nn" in which:
            alphas = pod_coefficients(bundle.nn_basis, fields.T).T
            sx = _Scaler(inputs)
            sy = _Scaler(alphas, per_feature=True)
            podnn_cfg = MlpConfig(
                (placement.k, *hidden, alphas.shape[1]),
                adam_iters=iters,
                seed=_seed_for(cfg.master_seed, "podnn-init", placement.indices, sigma),
            )
            bundle.podnn_model = mlp_train(Dataset(sx.fwd(inputs), sy.fwd(alphas)), podnn_cfg)
            bundle.podnn_x, bundle.podnn_y = sx, sy
    return bundle


def reconstruct_scenario(
    cfg: ExperimentConfig,
    data: ExperimentData,
    bundle: TrainedReconstructors,
    measurements: np.ndarray,
    which: tuple[str, ...],
) -> dict[str, np.ndarray]:
    """Apply each requested reconstructor to one measurement vector."""
    out: dict[str, np.ndarray] = {}
    p = bundle.placement
    if "physics" in which:
        out["physics"] = bundle.physics_factor.solve_measurements(measurements).field
    if "gappy_pod" in which:
        out["gappy_pod"] = gappy_pod_reconstruct(bundle.gappy_basis, p, measurements)
    if "pod_nn" in which:
        alpha = bundle.podnn_y.inv(mlp_predict(bundle.podnn_model, bundle.podnn_x.fwd(measurements)))
        out["pod_nn"] = bundle.nn_basis.mean + bundle.nn_basis.modes @ alpha
    if "mlp" in which:
        out["mlp"] = bundle.mlp_y.inv(mlp_predict(bundle.mlp_model, bundle.mlp_x.fwd(measurements)))
    return out


def _evaluate_cell(
    cfg: ExperimentConfig,
    data: ExperimentData,
    placement: Placement,
    sigma: float,
    which: tuple[str, ...],
) -> dict[str, list]:
    """Per-eval-seed metrics for one (placement, sigma) cell."""
    bundle = train_reconstructors(cfg, data, placement, sigma, which)
    sensors = placement.as_array()
    per_recon: dict[str, list] = {r: [] for r in which}
    for s in range(cfg.n_eval_seeds):
        eps = data.eval_noise_field(cfg.master_seed, sigma, s)
        meas = data.u_ref[sensors] * (1.0 + eps[sensors])
        fields = reconstruct_scenario(cfg, data, bundle, meas, which)
        for name, pred in fields.items():
            per_recon[name].append(metrics(pred, data.u_ref))
    return per_recon


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Execute the full (method, k, sigma, reconstructor, seed) grid."""
    data = prepare_data(cfg)
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()
    rows: list[RunRow] = []
    summary: dict = {"config": cfg.canonical_dict(), "placements": {}}

    for method in cfg.methods:
        for k in cfg.ks:
            n_reps = cfg.rs_count if method == "rs" else 1
            for rep in range(n_reps):
                placement = select_placement(cfg, data, method, k, rep)
                fitness = data.ctx.fitness(placement.indices)
                tag = f"{method}_k{k}" + (f"_r{rep}" if method == "rs" else "")
                ppath = ""
                if out_dir is not None:
                    ppath = str(out_dir / f"placement_{tag}.json")
                    save_placement(placement, ppath, fitness, cfg.gamma, cfg.master_seed)
                summary["placements"][tag] = {
                    "indices": list(placement.indices),
                    "log10_kappa": fitness,
                }
                for sigma in cfg.sigmas:
                    t_sigma = time.perf_counter()
                    try:
                        per_recon = _evaluate_cell(cfg, data, placement, sigma, cfg.reconstructors)
                    except HeatsenseError as exc:
                        if out_dir is not None:  # flush partial results
                            rows.sort(key=lambda r: (r.method, r.k, r.sigma, r.reconstructor, r.seed))
                            write_report_csv(RunReport(rows, chash, summary), out_dir / "report.partial.csv")
                        raise ExperimentCellError(method, k, sigma, exc) from exc
                    wall = (time.perf_counter() - t_sigma) * 1000.0
                    for recon in cfg.reconstructors:
                        ms = per_recon[recon]
                        if method == "rs":
                            rows.append(
                                RunRow(
                                    cfg.case.name, method, k, sigma, rep, recon,
                                    float(np.mean([m.max_ae for m in ms])),
                                    float(np.mean([m.mse for m in ms])),
                                    fitness, wall, ppath, chash,
                                )
                            )
                        else:
                            for s, m in enumerate(ms):
                                rows.append(
                                    RunRow(
                                        cfg.case.name, method, k, sigma, s, recon,
                                        m.max_ae, m.mse, fitness, wall, ppath, chash,
                                    )
                                )

    rows.sort(key=lambda r: (r.method, r.k, r.sigma, r.reconstructor, r.seed))
    report = RunReport(rows, chash, summary)
    if out_dir is not None:
        write_report_csv(report, out_dir / "report.csv")
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return report


def write_report_csv(report: RunReport, path) -> None:
    """Fixed-format CSV; identical configs give identical bytes except for
    the wall_ms column."""
    lines = [CSV_COLUMNS]
    for r in report.rows:
        lines.append(
            f"{r.case},{r.method},{r.k},{r.sigma:.6g},{r.seed},{r.reconstructor},"
            f"{r.max_ae:.12e},{r.mse:.12e},{r.log10_kappa:.12e},{r.wall_ms:.1f},"
            f"{r.placement_path}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def report_frame(report: RunReport) -> dict[tuple, RunRow]:
    """Index rows by (method, k, sigma, reconstructor, seed)."""
    return {(r.method, r.k, r.sigma, r.reconstructor, r.seed): r for r in report.rows}


# ---------------------------------------------------------------------------
# config files


_SECTIONS = {"case", "method", "noise", "reconstructors", "output"}
_KEYS = {
    "case": {"name", "n", "nx", "ny", "m", "poly_degree"},
    "method": {
        "names", "ks", "gamma", "rs_count", "seed",
        "ga_population", "ga_generations", "ga_crossover", "ga_mutation",
    },
    "noise": {"sigmas", "eval_seeds"},
    "reconstructors": {"names", "pod_modes", "nn_iters", "n_train", "n_test"},
    "output": {"dir"},
}


def load_config(path) -> ExperimentConfig:
    """Parse the sectioned key=value experiment file into a config."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    def get(section, key, fallback=None):
        return parser.get(section, key, fallback=fallback)

    try:
        name = get("case", "name", "heat1d")
        overrides = {}
        if name == "heat1d" and get("case", "n"):
            overrides["n"] = int(get("case", "n"))
        if name == "plate2d":
            if get("case", "nx"):
                overrides["nx"] = int(get("case", "nx"))
            if get("case", "ny"):
                overrides["ny"] = int(get("case", "ny"))
        if get("case", "m"):
            overrides["m"] = int(get("case", "m"))
        if get("case", "poly_degree"):
            overrides["poly_degree"] = int(get("case", "poly_degree"))
        case = case_by_name(name, **overrides)

        def tuple_of(raw, cast):
            return tuple(cast(v.strip()) for v in raw.split(",") if v.strip())

        cfg = ExperimentConfig(
            case=case,
            methods=tuple_of(get("method", "names", "pspo,us,rs"), str),
            ks=tuple_of(get("method", "ks", "10"), int),
            sigmas=tuple_of(get("noise", "sigmas", "0.1"), float),
            n_eval_seeds=int(get("noise", "eval_seeds", "20")),
            reconstructors=tuple_of(
                get("reconstructors", "names", "physics,gappy_pod,pod_nn,mlp"), str
            ),
            rs_count=int(get("method", "rs_count", "100")),
            gamma=float(get("method", "gamma", "1.0")),
            master_seed=int(get("method", "seed", "0")),
            ga_population=_opt_int(get("method", "ga_population")),
            ga_generations=_opt_int(get("method", "ga_generations")),
            ga_crossover=float(get("method", "ga_crossover", "0.9")),
            ga_mutation=_opt_float(get("method", "ga_mutation")),
            nn_iters=_opt_int(get("reconstructors", "nn_iters")),
            pod_modes=_opt_int(get("reconstructors", "pod_modes")),
            n_train=_opt_int(get("reconstructors", "n_train")),
            n_test=_opt_int(get("reconstructors", "n_test")),
            out_dir=Path(get("output", "dir")) if get("output", "dir") else None,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return cfg


def _opt_int(raw):
    return int(raw) if raw not in (None, "") else None


def _opt_float(raw):
    return float(raw) if raw not in (None, "") else None
