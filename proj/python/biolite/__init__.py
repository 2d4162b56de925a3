"""BioLite U-Net: lightweight bioink/nozzle segmentation engine."""

from ._biolite import (
    ArchConfig,
    Model,
    __version__,
    clahe,
    evaluate,
    generate_dataset,
    train,
    write_dataset,
)

__all__ = [
    "ArchConfig",
    "Model",
    "__version__",
    "clahe",
    "evaluate",
    "generate_dataset",
    "train",
    "write_dataset",
]
