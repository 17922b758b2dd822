"""Fault-injection toolkit for small CNNs.

The compiled core exposes networks, the three perturbation treatments,
sweeps and the statistics used to analyze them; this wrapper adds
dict-friendly conveniences on top of the JSON-string core API.
"""

import json as _json

from ._core import (
    Network,
    RuntimeError,
    ValidationError,
    apply_perturbation,
    build_network,
    chance_level,
    derive_seed,
    describe,
    evaluate_topk,
    fit_falloff,
    layer_param_stats,
    linear_fit,
    load,
    load_idx,
    normalize,
    predict,
    save,
    split_train_test,
    synth_dataset,
    top_k_accuracy,
    train,
    wilcoxon_rank_sum,
    write_idx,
)
from ._core import compare_cells as _compare_cells_json
from ._core import run_sweep as _run_sweep_json
from ._core import sweep_csv as _sweep_csv_json


def run_sweep(config):
    """Run a perturbation sweep; `config` is a dict or JSON string."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _json.loads(_run_sweep_json(config))


def sweep_csv(result):
    """Render a sweep result (dict or JSON string) as the canonical CSV."""
    if not isinstance(result, str):
        result = _json.dumps(result)
    return _sweep_csv_json(result)


def compare_cells(result_a, cell_a, result_b=None, cell_b=None):
    """Wilcoxon rank-sum between two (layer, magnitude) cells.

    Cells are (layer, magnitude) tuples; results are dicts or JSON strings.
    """
    if cell_b is None:
        raise TypeError("compare_cells needs two cells")
    if result_b is None:
        result_b = result_a
    if not isinstance(result_a, str):
        result_a = _json.dumps(result_a)
    if not isinstance(result_b, str):
        result_b = _json.dumps(result_b)
    return _compare_cells_json(result_a, cell_a[0], cell_a[1], result_b, cell_b[0], cell_b[1])


__all__ = [
    "Network",
    "RuntimeError",
    "ValidationError",
    "apply_perturbation",
    "build_network",
    "chance_level",
    "compare_cells",
    "derive_seed",
    "describe",
    "evaluate_topk",
    "fit_falloff",
    "layer_param_stats",
    "linear_fit",
    "load",
    "load_idx",
    "normalize",
    "predict",
    "run_sweep",
    "save",
    "sweep_csv",
    "split_train_test",
    "synth_dataset",
    "top_k_accuracy",
    "train",
    "wilcoxon_rank_sum",
    "write_idx",
]
