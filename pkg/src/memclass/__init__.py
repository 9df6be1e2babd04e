"""Memory classifiers: route inputs to prototype memories chosen with an
expert similarity function, then classify with per-memory learners."""
from .core import (
    ConfigurationError,
    Image,
    LabeledDataset,
    MemoryClassifier,
    MemorySet,
    SelectionResult,
    classify,
    select_memory,
)

__version__ = "0.1.0"
