"""Testing MAPE-K feedback loops against architectural runtime models."""

from pathlib import Path

from .compare import Diff, apply_diff, check_constraints, diff, equal
from .mape import Phase, Snapshot, StepFunctions, Trace, load_trace, record, save_trace
from .model import RTM, Annotation, AnnotationKind, Component, Connector, Lifecycle, load, mutate, save

__version__ = "0.1.0"

# example models, suites, the fault automaton and property file shipped with the package
DATA_DIR = Path(__file__).with_name("data")

__all__ = [
    "DATA_DIR",
    "RTM",
    "Component",
    "Connector",
    "Annotation",
    "AnnotationKind",
    "Lifecycle",
    "mutate",
    "load",
    "save",
    "Diff",
    "diff",
    "equal",
    "apply_diff",
    "check_constraints",
    "Phase",
    "Snapshot",
    "Trace",
    "StepFunctions",
    "record",
    "load_trace",
    "save_trace",
]
