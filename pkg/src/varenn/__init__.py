"""varenn: climate time series to RGB images, CNN trend classification,
and combinatorial experiment tooling with a synthetic-climate oracle."""

from .cube import (ClimateCube, GridCell, ScalingStats, VariableId, VARIABLES,
                   global_minmax, load_cube, save_cube, variable)
from .encode import Knockout, VarennImage, compose_rgb, export_png, rasterize, scale01
from .errors import VarennError
from .experiments import (ExperimentSpec, enumerate_combinations, run_ablations,
                          run_experiment, run_suite)
from .lenet import LeNetConfig, LeNetParams, TrainConfig, forward, predict, train
from .stats import (ConfusionMatrix, accuracy, kruskal_wallis, mann_whitney_u,
                    ols_regression, weighted_kappa)
from .synth import SynthSpec, VariableSynth, synth_generate
from .windows import (LabelCategory, WindowSpec, enumerate_windows, label_pre,
                      label_tmp, trend_delta)

__version__ = "0.1.0"

__all__ = [
    "ClimateCube", "GridCell", "ScalingStats", "VariableId", "VARIABLES",
    "global_minmax", "load_cube", "save_cube", "variable",
    "Knockout", "VarennImage", "compose_rgb", "export_png", "rasterize", "scale01",
    "VarennError",
    "ExperimentSpec", "enumerate_combinations", "run_ablations", "run_experiment", "run_suite",
    "LeNetConfig", "LeNetParams", "TrainConfig", "forward", "predict", "train",
    "ConfusionMatrix", "accuracy", "kruskal_wallis", "mann_whitney_u",
    "ols_regression", "weighted_kappa",
    "SynthSpec", "VariableSynth", "synth_generate",
    "LabelCategory", "WindowSpec", "enumerate_windows", "label_pre", "label_tmp", "trend_delta",
    "__version__",
]
