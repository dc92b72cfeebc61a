"""Fuzzy terminal iterative learning control with a thermoforming-oven bench."""

from .controller import CrispTilc, FirstOrderTilc, FuzzyTilc, TilcRun, fit_affine
from .filters import FilterRuleTable, FilterState, crisp_filter_step, fuzzy_filter_step
from .inverse import InverseModel, InversionError, NonMonotoneError, SingularCellError, evaluate_inverse, invert_model
from .kriging import ExperimentDatabase, build_database, build_model, fit_cell, solve_dense
from .oven import DISTURBED, NOMINAL, Oven, OvenParams
from .partition import FuzzyPartition, membership, uniform_partition
from .stats import KwResult, gaussian_block, kruskal_wallis
from .tsk import TskModel, evaluate

__all__ = [
    "CrispTilc", "FirstOrderTilc", "FuzzyTilc", "TilcRun", "fit_affine",
    "FilterRuleTable", "FilterState", "crisp_filter_step", "fuzzy_filter_step",
    "InverseModel", "InversionError", "NonMonotoneError", "SingularCellError", "evaluate_inverse", "invert_model",
    "ExperimentDatabase", "build_database", "build_model", "fit_cell", "solve_dense",
    "DISTURBED", "NOMINAL", "Oven", "OvenParams",
    "FuzzyPartition", "membership", "uniform_partition",
    "KwResult", "gaussian_block", "kruskal_wallis",
    "TskModel", "evaluate",
]
__version__ = "0.1.0"
