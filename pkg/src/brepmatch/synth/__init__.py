"""Synthetic part generator with name-tracked ground truth."""

from .dataset import Dataset, Sample, generate_base_model, generate_dataset, load_dataset, write_dataset
from .edits import apply_constructive, apply_deformation

__all__ = [
    "Dataset", "Sample", "apply_constructive", "apply_deformation", "generate_base_model",
    "generate_dataset", "load_dataset", "write_dataset",
]
