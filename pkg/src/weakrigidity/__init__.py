"""Generalized weak rigidity: rank tests and gradient-flow formation control."""
from .errors import (
    AmbiguousRoot,
    DegenerateConfiguration,
    InvalidArgument,
    InvalidPrecondition,
    InvalidSpec,
    NoRealRoot,
    NotCollinear,
    NotGIWR,
    ScenarioError,
)
from .graph import Configuration, FrameworkSpec, SensingGraph, sensing_graph, validate
from .rigidity import (
    RigidityReport,
    check_distance_rigidity_implication,
    classify,
    eval_fw,
    is_regular_point,
    numerical_rank,
    partition_constraints,
    trivial_motion_basis,
    weak_rigidity_matrix,
)

__version__ = "0.1.0"
