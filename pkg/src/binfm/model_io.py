"""Model files for the command-line tools.

Binarized models use the bit-packed "BFM1" format from :mod:`binfm.packing`.
Full-precision models (plain FM and the subspace-encoded baseline) use an
analogous float format "FFM1". One-vs-all multiclass models wrap one
single-head record per class in a length-prefixed container ("BFMM"/"FFMM").
All integers and floats are little-endian.
"""

from __future__ import annotations

import dataclasses
import struct

import numpy as np

from . import packing
from .binarized import BinFmOvrModel
from .encoding import BinningSpec, STRATEGIES, encode_dataset
from .fm import FmModel, FmOvrModel
from .packing import ModelFormatError

FLOAT_MAGIC = b"FFM1"
MULTI_BIN_MAGIC = b"BFMM"
MULTI_FLOAT_MAGIC = b"FFMM"
CONTAINER_VERSION = 1
FLOAT_VERSION = 1

KIND_FM = 0
KIND_SEFM = 1


@dataclasses.dataclass
class LoadedModel:
    """A model file in memory: one scoring head per class.

    ``kind`` is "binfm" (PackedModel heads), "sefm" or "fm" (FmModel heads);
    ``binning`` is present except for raw-feature FM.
    """

    kind: str
    heads: list
    binning: BinningSpec | None
    classes: int

    @property
    def dim(self) -> int:
        return self.binning.dim if self.binning else self.heads[0].n_features

    @property
    def rank(self) -> int:
        return self.heads[0].rank


def _float_record(model: FmModel, binning: BinningSpec | None) -> bytes:
    kind = KIND_FM if binning is None else KIND_SEFM
    out = [struct.pack("<4sIIQQ", FLOAT_MAGIC, FLOAT_VERSION, kind,
                       model.n_features, model.rank)]
    if binning is not None:
        if binning.encoded_dim != model.n_features:
            raise ValueError("binning width does not match model")
        out.append(struct.pack("<QQI", binning.dim, binning.bins,
                               STRATEGIES.index(binning.strategy)))
        out.append(np.ascontiguousarray(binning.boundaries, dtype="<f8").tobytes())
    out.append(np.ascontiguousarray(model.w, dtype="<f8").tobytes())
    out.append(np.ascontiguousarray(model.V, dtype="<f8").tobytes())
    return b"".join(out)


def _parse_float_record(data: bytes) -> tuple[FmModel, BinningSpec | None]:
    head = struct.Struct("<4sIIQQ")
    if len(data) < head.size:
        raise ModelFormatError("truncated header")
    magic, version, kind, p, rank = head.unpack_from(data, 0)
    if magic != FLOAT_MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != FLOAT_VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    if kind not in (KIND_FM, KIND_SEFM) or p < 1 or rank < 1:
        raise ModelFormatError("inconsistent header")
    off = head.size
    binning = None
    if kind == KIND_SEFM:
        dim, bins, tag = _unpack(data, off, "<QQI")
        off += struct.calcsize("<QQI")
        if tag >= len(STRATEGIES) or bins < 2 or dim * bins != p:
            raise ModelFormatError("inconsistent binning header")
        cuts = _floats(data, off, dim * (bins - 1)).reshape(dim, bins - 1)
        off += 8 * dim * (bins - 1)
        binning = BinningSpec(dim=dim, bins=bins, boundaries=cuts,
                              strategy=STRATEGIES[tag])
    w = _floats(data, off, p)
    off += 8 * p
    V = _floats(data, off, p * rank).reshape(p, rank)
    off += 8 * p * rank
    if off != len(data):
        raise ModelFormatError("trailing bytes after model payload")
    return FmModel(w=w, V=V), binning


def _unpack(data: bytes, off: int, fmt: str):
    size = struct.calcsize(fmt)
    if off + size > len(data):
        raise ModelFormatError("truncated file")
    return struct.unpack_from(fmt, data, off)


def _floats(data: bytes, off: int, count: int) -> np.ndarray:
    if off + 8 * count > len(data):
        raise ModelFormatError("truncated file")
    return np.frombuffer(data, dtype="<f8", count=count, offset=off).copy()


def _write_container(path, magic: bytes, records: list[bytes]) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIQ", magic, CONTAINER_VERSION, len(records)))
        for rec in records:
            fh.write(struct.pack("<Q", len(rec)))
            fh.write(rec)


def _read_container(data: bytes) -> list[bytes]:
    magic, version, n_heads = _unpack(data, 0, "<4sIQ")
    if version != CONTAINER_VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    if n_heads < 2:
        raise ModelFormatError("multiclass container needs at least 2 heads")
    off = struct.calcsize("<4sIQ")
    records = []
    for _ in range(n_heads):
        (length,) = _unpack(data, off, "<Q")
        off += 8
        if off + length > len(data):
            raise ModelFormatError("truncated file")
        records.append(data[off : off + length])
        off += length
    if off != len(data):
        raise ModelFormatError("trailing bytes after model payload")
    return records


def save_binarized(path, ovr: BinFmOvrModel, binning: BinningSpec) -> None:
    """Binary problems write a plain "BFM1" file; one-vs-all models write a
    "BFMM" container of per-class records."""
    packed = [packing.pack(h, binning) for h in ovr.heads]
    if len(packed) == 1:
        packing.save(packed[0], path)
        return
    _write_container(path, MULTI_BIN_MAGIC, [packing.dumps(pm) for pm in packed])


def save_float(path, ovr: FmOvrModel, binning: BinningSpec | None) -> None:
    records = [_float_record(h, binning) for h in ovr.heads]
    if len(records) == 1:
        with open(path, "wb") as fh:
            fh.write(records[0])
        return
    _write_container(path, MULTI_FLOAT_MAGIC, records)


def load_model(path) -> LoadedModel:
    """Read any of the model formats, dispatching on the magic bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise ModelFormatError("truncated file")
    magic = data[:4]
    if magic == packing.MAGIC:
        pm = packing.loads(data)
        return LoadedModel("binfm", [pm], pm.binning, classes=2)
    if magic == FLOAT_MAGIC:
        model, binning = _parse_float_record(data)
        kind = "fm" if binning is None else "sefm"
        return LoadedModel(kind, [model], binning, classes=2)
    if magic == MULTI_BIN_MAGIC:
        heads = [packing.loads(rec) for rec in _read_container(data)]
        return LoadedModel("binfm", heads, heads[0].binning, classes=len(heads))
    if magic == MULTI_FLOAT_MAGIC:
        parsed = [_parse_float_record(rec) for rec in _read_container(data)]
        heads = [m for m, _ in parsed]
        binning = parsed[0][1]
        kind = "fm" if binning is None else "sefm"
        return LoadedModel(kind, heads, binning, classes=len(heads))
    raise ModelFormatError(f"bad magic {magic!r}")


def prepare_inputs(loaded: LoadedModel, ds):
    """Turn a raw Dataset into whatever the heads score directly: active
    masks for bit-packed heads, an EncodedDataset for encoded float heads,
    the dataset itself for raw FM."""
    if loaded.binning is not None:
        if ds.dim != loaded.binning.dim:
            raise ModelFormatError(
                f"model expects {loaded.binning.dim} features, data has {ds.dim}"
            )
        enc = encode_dataset(loaded.binning, ds)
        if loaded.kind == "binfm":
            return packing.active_masks_batch(enc.active, enc.encoded_dim)
        return enc
    if ds.dim != loaded.heads[0].n_features:
        raise ModelFormatError(
            f"model expects {loaded.heads[0].n_features} features, data has {ds.dim}"
            " (use --dim to pad a sparse test set)"
        )
    return ds


def score_matrix(loaded: LoadedModel, prepared) -> np.ndarray:
    """Per-head decision scores, shape (n, heads). This is the timed
    inference path: packed heads run on mask words via popcount."""
    if loaded.kind == "binfm":
        cols = [packing.popcount_predict_batch(h, prepared) for h in loaded.heads]
    else:
        from .fm import decision_scores

        cols = [decision_scores(h, prepared) for h in loaded.heads]
    return np.column_stack(cols)


def predicted_labels(scores: np.ndarray, classes: int) -> np.ndarray:
    """Class ids from a score matrix: sign rule for binary, argmax with
    lowest-id tie-breaking otherwise."""
    if classes == 2 and scores.shape[1] == 1:
        return (scores[:, 0] > 0).astype(np.int64)
    return np.argmax(scores, axis=1)
