"""Decision trees by greedy induction and alternating optimization."""

from .dataset import (
    CLASSIFICATION,
    REGRESSION,
    DataError,
    Dataset,
    FoldAssignment,
    MinMaxScaler,
    SplitSpec,
    Task,
    kfold,
    load_csv,
    load_libsvm,
    save_libsvm,
    train_test_split,
)
from .tree import (
    AxisSplit,
    Leaf,
    ModelFormatError,
    Node,
    ObliqueSplit,
    Tree,
    complete_tree,
    deserialize,
    export_rules,
    prune_dead,
    serialize,
    trees_equal,
)
from .cart import CartParams, PruningPath, gini, grow, prune_select, pruning_path
from .solver import HyperplaneSolution, WeightedSamples, best_axis_split, l1_logistic
from .tao import (
    AXIS,
    OBLIQUE,
    SQUARED,
    ZERO_ONE,
    ReducedProblem,
    TaoParams,
    TraceEntry,
    build_internal_reduced,
    objective,
    optimize_leaf,
    reaching_set,
    tao_fit,
    tao_iteration,
)
from .bench import (
    DatasetSpec,
    ExperimentConfig,
    ResultRow,
    TrainingError,
    accuracy,
    emit_table,
    fit_model,
    grid_search_cv,
    load_config,
    rmse,
    run_experiment,
)

__version__ = "0.1.0"
