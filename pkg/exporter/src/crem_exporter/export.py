"""Pull one layer's activations out of a torch model and write them as a
CREM file.

The exporter is a format bridge and nothing more: it owns no statistics
and no decision logic. A model is loaded from a checkpoint (or built from
a registered constructor name), a forward hook is attached to exactly one
named module, the supplied inputs are pushed through in batches, and the
collected rows land on disk in the 24-byte-header binary layout the
verification pipeline reads. Runs are deterministic: eval mode, no
gradients, CPU tensors, and an atomic temp-file rename at the end.
"""

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import IoError, LayerError, ParamError, ShapeError

MAGIC = b"CREM"
FORMAT_VERSION = 1
DTYPE_F64 = 2
HEADER = struct.Struct("<4sHHQQ")

# same idempotence tolerance as the verifier's clipper, so rows clipped
# here are accepted verbatim by a downstream re-clip at the same radius
CLIP_REL_TOL = 1e-9

# model sources that are constructor names rather than checkpoint paths
CONSTRUCTORS = {"identity": nn.Identity}


@dataclass(frozen=True)
class ExportSpec:
    """One export job: where the model and inputs come from, which layer
    to tap, and where the file goes."""

    model: str
    layer: str
    inputs: str
    out: str
    batch: int = 64
    clip: float | None = None

    def __post_init__(self) -> None:
        if not self.model:
            raise ParamError("model source must be nonempty")
        if not self.inputs:
            raise ParamError("inputs source must be nonempty")
        if not self.out:
            raise ParamError("output path must be nonempty")
        if self.batch < 1:
            raise ParamError(f"batch size must be >= 1, got {self.batch}")
        if self.clip is not None:
            c = float(self.clip)
            if not np.isfinite(c) or c <= 0.0:
                raise ParamError(f"clip radius must be a positive real, got {self.clip!r}")


@dataclass(frozen=True)
class ExportReport:
    path: str
    n: int
    d: int
    clipped: bool


def load_model(source: str) -> nn.Module:
    """A registered constructor name, or a checkpoint holding a full module."""
    ctor = CONSTRUCTORS.get(source)
    if ctor is not None:
        return ctor()
    path = Path(source)
    if not path.is_file():
        names = ", ".join(sorted(CONSTRUCTORS))
        raise IoError(f"model {source!r} is neither a checkpoint file nor one of: {names}")
    try:
        obj = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise IoError(f"cannot load checkpoint {source!r}: {exc}") from exc
    if not isinstance(obj, nn.Module):
        raise ParamError(
            f"checkpoint {source!r} holds {type(obj).__name__}, not a module; "
            "save the full model, not a state_dict"
        )
    return obj


def _load_block(path: Path) -> np.ndarray:
    try:
        arr = np.load(path)
    except Exception as exc:
        raise IoError(f"cannot read inputs from {path}: {exc}") from exc
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError(f"{path.name}: inputs must be a vector or a matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ParamError(f"{path.name}: inputs contain non-finite values")
    return arr


def load_inputs(source: str) -> np.ndarray:
    """One ``.npy`` file, or a directory of them stacked in name order.

    Row order is the contract: row i of the export corresponds to input i.
    """
    path = Path(source)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == ".npy")
        if not files:
            raise IoError(f"no .npy files in directory {source!r}")
        blocks = [_load_block(p) for p in files]
        widths = sorted({b.shape[1] for b in blocks})
        if len(widths) > 1:
            raise ShapeError(f"input files disagree on width: {widths}")
        return np.vstack(blocks)
    if not path.is_file():
        raise IoError(f"inputs {source!r} do not exist")
    return _load_block(path)


def resolve_layer(model: nn.Module, name: str) -> nn.Module:
    modules = dict(model.named_modules())
    if name in modules:
        return modules[name]
    known = ", ".join(repr(k) for k in modules if k) or "(root only)"
    raise LayerError(f"no module named {name!r}; known layers: {known}")


def clip_rows(values: np.ndarray, radius: float) -> np.ndarray:
    # mirrors the verifier: rows inside the tolerance band stay bit-exact
    r = float(radius)
    norms = np.linalg.norm(values, axis=1)
    outside = norms > r * (1.0 + CLIP_REL_TOL)
    if np.any(outside):
        values = values.copy()
        values[outside] *= (r / norms[outside])[:, None]
    return values


def write_crem(values: np.ndarray, path: str | Path) -> None:
    """Atomic write: payload lands under a temp name and is renamed over
    the target, so a crash never leaves a half-written file behind."""
    out = Path(path)
    n, d = values.shape
    header = HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F64, n, d)
    payload = np.ascontiguousarray(values, dtype="<f8").tobytes()
    try:
        fd, tmp = tempfile.mkstemp(dir=out.parent or Path("."), prefix=out.name + ".")
    except OSError as exc:
        raise IoError(f"cannot create temp file next to {out}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, out)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"cannot write {out}: {exc}") from exc


def export_embeddings(spec: ExportSpec) -> ExportReport:
    """Run the model over the inputs and write the tapped layer's rows.

    The hook must fire exactly once per forward pass; a module that never
    runs or runs twice is an ambiguous tap point and is rejected.
    """
    model = load_model(spec.model)
    model.eval()
    target = resolve_layer(model, spec.layer)
    inputs = load_inputs(spec.inputs)

    param = next(model.parameters(), None)
    in_dtype = param.dtype if param is not None else torch.float64

    captured: list[torch.Tensor] = []

    def hook(_module, _inputs, output):
        captured.append(output)

    handle = target.register_forward_hook(hook)
    blocks: list[np.ndarray] = []
    d: int | None = None
    try:
        with torch.no_grad():
            for start in range(0, inputs.shape[0], spec.batch):
                chunk = inputs[start : start + spec.batch]
                captured.clear()
                model(torch.as_tensor(chunk, dtype=in_dtype))
                if not captured:
                    raise LayerError(f"layer {spec.layer!r} never ran during the forward pass")
                if len(captured) > 1:
                    raise LayerError(
                        f"layer {spec.layer!r} ran {len(captured)} times per forward pass; "
                        "the tap point is ambiguous"
                    )
                out = captured[0]
                if not isinstance(out, torch.Tensor):
                    raise ShapeError(
                        f"layer {spec.layer!r} produced {type(out).__name__}, not a tensor"
                    )
                if out.shape[0] != chunk.shape[0]:
                    raise ShapeError(
                        f"batch of {chunk.shape[0]} inputs produced {out.shape[0]} rows"
                    )
                rows = out.detach().to(torch.float64).cpu().reshape(out.shape[0], -1).numpy()
                if d is None:
                    d = rows.shape[1]
                elif rows.shape[1] != d:
                    raise ShapeError(f"layer width changed from {d} to {rows.shape[1]} between batches")
                blocks.append(rows)
    finally:
        handle.remove()

    values = np.ascontiguousarray(np.vstack(blocks), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ParamError("model produced non-finite embeddings")
    if spec.clip is not None:
        values = clip_rows(values, spec.clip)
    write_crem(values, spec.out)
    return ExportReport(
        path=str(spec.out),
        n=int(values.shape[0]),
        d=int(values.shape[1]),
        clipped=spec.clip is not None,
    )
