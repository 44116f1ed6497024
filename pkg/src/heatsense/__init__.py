"""heatsense: physics-driven sensor placement for temperature field
reconstruction.

Pick sparse sensor locations before any data exists: discretize the heat
equation on a point cloud with RBF-FD, score candidate placements by the
condition number of the augmented physics/measurement system, optimize
with a genetic algorithm, and validate against random/uniform/data-driven
baselines using several reconstructors.
"""

from .cases import CaseSpec, case_by_name, ground_truth, heat1d_case, plate2d_case
from .cloud import (
    DIRICHLET,
    INTERIOR,
    NEUMANN,
    PointCloud,
    StencilSet,
    generate_1d,
    generate_grid_2d,
    generate_random_1d,
    generate_random_2d,
    knn_stencils,
)
from .criterion import (
    BoundReport,
    CriterionValue,
    FitnessContext,
    condition_number,
    placement_fitness,
    verify_bounds,
)
from .harness import ExperimentConfig, RunReport, load_config, run_experiment
from .placement import (
    GaConfig,
    SnapshotMatrix,
    cns_select,
    ecs_select,
    exhaustive_select,
    ga_optimize,
    random_placement,
    uniform_placement,
)
from .rbffd import (
    DiscreteOperator,
    PhysicsSpec,
    RbfConfig,
    SourceSpec,
    assemble,
    forward_solve,
    local_weights,
)
from .reconstruct import (
    Dataset,
    Metrics,
    MlpConfig,
    MlpModel,
    PODBasis,
    gappy_pod_reconstruct,
    metrics,
    mlp_predict,
    mlp_train,
    pod_fit,
    pod_nn_reconstruct,
    physics_reconstruct,
)
from .system import (
    AugmentedSystem,
    NoiseModel,
    Placement,
    apply_noise,
    build_augmented,
    consistent_system,
    lsq_solve,
    selection_matrix,
)

__version__ = "0.1.0"
