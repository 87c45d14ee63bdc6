"""Bregman-projection methods for split feasibility problems."""

from .objectives import (
    ElasticNet,
    GroupElasticNet,
    GroupedMax,
    InvalidSubgradient,
    PrimalDualPair,
    ProductObjective,
    SquaredNorm,
    bregman_distance,
    fenchel_gap,
    pair_from_dual,
    soft_shrink,
)
from .projections import (
    AffineSubspace,
    Box,
    FeasiblePoint,
    Halfspace,
    Hyperplane,
    NonnegCone,
    NormBall,
    Point,
    bregman_project,
    exact_linesearch,
    project_l1_ball,
    project_simplex,
    separating_halfspace,
)
from .linops import (
    BlockRow,
    DenseMatrix,
    Grad2D,
    PartialDCT,
    ScaledIdentity,
    SparseOperator,
    ZeroOperator,
    build_parallel_projector,
    operator_norm,
)
from .solver import (
    Constant,
    Custom,
    Cyclic,
    Difficult,
    Dynamic,
    Exact,
    Inexact,
    RandomUniform,
    Simple,
    SolverConfig,
    SolverResult,
    history_to_csv,
    preset,
    run,
)
from .comparator import PDConfig, StepSizeViolation, run_pd

__all__ = [
    "AffineSubspace",
    "BlockRow",
    "Box",
    "Constant",
    "Custom",
    "Cyclic",
    "DenseMatrix",
    "Difficult",
    "Dynamic",
    "ElasticNet",
    "Exact",
    "FeasiblePoint",
    "Grad2D",
    "GroupElasticNet",
    "GroupedMax",
    "Halfspace",
    "Hyperplane",
    "Inexact",
    "InvalidSubgradient",
    "NonnegCone",
    "NormBall",
    "PDConfig",
    "PartialDCT",
    "Point",
    "PrimalDualPair",
    "ProductObjective",
    "RandomUniform",
    "ScaledIdentity",
    "Simple",
    "SolverConfig",
    "SolverResult",
    "SparseOperator",
    "SquaredNorm",
    "StepSizeViolation",
    "ZeroOperator",
    "bregman_distance",
    "bregman_project",
    "build_parallel_projector",
    "exact_linesearch",
    "fenchel_gap",
    "history_to_csv",
    "operator_norm",
    "pair_from_dual",
    "preset",
    "project_l1_ball",
    "project_simplex",
    "run",
    "run_pd",
    "separating_halfspace",
    "soft_shrink",
]
