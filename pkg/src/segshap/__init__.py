"""Black-box Shapley feature attribution for language models on code tasks."""

from .comparators import Comparator, ComparatorConfig, ComparatorKind, make_comparator
from .core import (
    AttributionResult,
    Coalition,
    Feature,
    FeaturePartition,
    InputDocument,
    Mode,
    ModelOutput,
    Task,
    assemble,
    read_dataset,
)
from .engine import attribute, attribute_partition
from .errors import SegShapError
from .models import ChatCompletionsProvider, MockProvider, MockScript, ProviderConfig
from .sampling import build_plan
from .shapley import ValueTable, exact_shapley, mc_shapley, normalize
from .splitters import SplitterConfig, SplitterKind, split

__version__ = "0.1.0"

__all__ = [
    "AttributionResult",
    "ChatCompletionsProvider",
    "Coalition",
    "Comparator",
    "ComparatorConfig",
    "ComparatorKind",
    "Feature",
    "FeaturePartition",
    "InputDocument",
    "MockProvider",
    "MockScript",
    "Mode",
    "ModelOutput",
    "ProviderConfig",
    "SegShapError",
    "SplitterConfig",
    "SplitterKind",
    "Task",
    "ValueTable",
    "assemble",
    "attribute",
    "attribute_partition",
    "build_plan",
    "exact_shapley",
    "mc_shapley",
    "normalize",
    "read_dataset",
    "split",
]
