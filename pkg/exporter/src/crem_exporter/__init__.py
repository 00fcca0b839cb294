"""Layer-embedding exporter targeting the CREM interchange format."""

from ._version import __version__
from .errors import ExportError, IoError, LayerError, ParamError, ShapeError
from .export import (
    CONSTRUCTORS,
    ExportReport,
    ExportSpec,
    clip_rows,
    export_embeddings,
    load_inputs,
    load_model,
    resolve_layer,
    write_crem,
)

__all__ = [
    "__version__",
    "CONSTRUCTORS",
    "ExportError",
    "ExportReport",
    "ExportSpec",
    "IoError",
    "LayerError",
    "ParamError",
    "ShapeError",
    "clip_rows",
    "export_embeddings",
    "load_inputs",
    "load_model",
    "resolve_layer",
    "write_crem",
]
