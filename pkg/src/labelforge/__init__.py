"""labelforge: programmatic labeling with explored and exploited label functions."""

from .corpus import Dataset, Document, LabeledExample, LabelSpace, load_dataset, save_dataset
from .lf_core import ABSTAIN, Category, LabelFunction, LabelMatrix, build_label_matrix

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN",
    "Category",
    "Dataset",
    "Document",
    "LabelFunction",
    "LabelMatrix",
    "LabelSpace",
    "LabeledExample",
    "build_label_matrix",
    "load_dataset",
    "save_dataset",
    "__version__",
]
