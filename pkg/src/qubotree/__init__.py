"""Regression trees whose categorical splits are solved exactly by casting
the variance-reduction objective as a sequence of binary quadratic programs.
"""

from .datasets import (
    ColumnSchema,
    DataError,
    Dataset,
    SplitSpecification,
    infer_schema,
    load_csv,
    parse_schema,
    partition,
    write_csv,
)
from .dinkelbach import DinkelbachConfig, IterationTrace, dinkelbach_split, lambda_upper_bound
from .generators import generate_datagen, generate_df
from .pruning import (
    ProtocolReport,
    PruneStep,
    SelectionReport,
    evaluate_protocol,
    ladder_mse,
    prune_sequence,
    select_subtree,
)
from .qubo import FractionalParts, QuboProblem, build_qubo, eval_fractional, split_cost
from .solvers import AnnealConfig, SolveOutcome, SolverConfig, solve, solve_anneal, solve_exhaustive
from .splitting import (
    SplitCandidate,
    SplitRule,
    best_categorical_split_exhaustive,
    best_categorical_split_greedy,
    best_categorical_split_qubo,
    best_numeric_split,
    best_split,
)
from .stats import (
    CategoryAggregate,
    NodeStats,
    VMatrix,
    aggregate_categories,
    build_v_matrix,
    node_variance,
    pairwise_variance,
)
from .tree import (
    GrowConfig,
    RegressionTree,
    TreeNode,
    describe,
    evaluate_mse,
    grow,
    load_model,
    predict,
    predict_many,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealConfig",
    "CategoryAggregate",
    "ColumnSchema",
    "DataError",
    "Dataset",
    "DinkelbachConfig",
    "FractionalParts",
    "GrowConfig",
    "IterationTrace",
    "NodeStats",
    "ProtocolReport",
    "PruneStep",
    "QuboProblem",
    "RegressionTree",
    "SelectionReport",
    "SolveOutcome",
    "SolverConfig",
    "SplitCandidate",
    "SplitRule",
    "SplitSpecification",
    "TreeNode",
    "VMatrix",
    "aggregate_categories",
    "best_categorical_split_exhaustive",
    "best_categorical_split_greedy",
    "best_categorical_split_qubo",
    "best_numeric_split",
    "best_split",
    "build_qubo",
    "build_v_matrix",
    "describe",
    "dinkelbach_split",
    "eval_fractional",
    "evaluate_mse",
    "evaluate_protocol",
    "generate_datagen",
    "generate_df",
    "grow",
    "infer_schema",
    "ladder_mse",
    "lambda_upper_bound",
    "load_csv",
    "load_model",
    "node_variance",
    "pairwise_variance",
    "parse_schema",
    "partition",
    "predict",
    "predict_many",
    "prune_sequence",
    "save_model",
    "select_subtree",
    "solve",
    "solve_anneal",
    "solve_exhaustive",
    "split_cost",
    "write_csv",
]
