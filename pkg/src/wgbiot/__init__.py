"""Stabilizer-free weak Galerkin solver for Biot consolidation on polygonal meshes."""

from .assembly import Discretization, MaterialParams
from .errors import ConvergenceRecord, compute_orders, errors_vs_exact, format_table
from .exceptions import (
    ArgumentError,
    ConditioningError,
    ConfigError,
    GeometryError,
    ScenarioError,
    SingularSystemError,
    UnsupportedError,
    WGError,
)
from .mesh import BoundaryTag, CutStyle, Mesh, build_nonconvex_grid
from .scenarios import heterogeneous_steady, manufactured_biot
from .stepper import Problem, TransientState, initialize, run, step
from .weakops import RPolicy

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "BoundaryTag",
    "ConditioningError",
    "ConfigError",
    "ConvergenceRecord",
    "CutStyle",
    "Discretization",
    "GeometryError",
    "MaterialParams",
    "Mesh",
    "Problem",
    "RPolicy",
    "ScenarioError",
    "SingularSystemError",
    "TransientState",
    "UnsupportedError",
    "WGError",
    "build_nonconvex_grid",
    "compute_orders",
    "errors_vs_exact",
    "format_table",
    "heterogeneous_steady",
    "initialize",
    "manufactured_biot",
    "run",
    "step",
]
