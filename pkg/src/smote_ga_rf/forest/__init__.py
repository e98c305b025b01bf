from .forest import (
    ForestConfig,
    ImportanceReport,
    OobResult,
    RandomForest,
    fit,
    forest_from_dict,
    forest_to_dict,
    leave_out_fraction,
    load_forest,
    oob_error,
    oob_predictions,
    save_forest,
    variable_importance,
)
from .tree import Split, Tree, best_split, entropy, grow_tree

__all__ = [
    "ForestConfig", "ImportanceReport", "OobResult", "RandomForest", "Split", "Tree",
    "best_split", "entropy", "fit", "forest_from_dict", "forest_to_dict", "grow_tree",
    "leave_out_fraction", "load_forest", "oob_error", "oob_predictions", "save_forest",
    "variable_importance",
]
