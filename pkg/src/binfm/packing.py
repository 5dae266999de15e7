"""Bit-packed deployable model and popcount inference.

Every sign is stored in one bit (bit 1 is +1), packed little-endian into
64-bit words: parameter index 64*i + k lives in bit k of word i, and padding
bits past the parameter count are zero. An encoded sample becomes an active
mask with exactly d bits set, and a sum of signs over the active set is
recovered as 2 * popcount(mask AND sign_bits) - d, so scoring needs only
word-wide AND, popcount, and a handful of float ops on the per-factor sums.

The on-disk format ("BFM1", little-endian) carries the dimensions, both
scales, the embedded binning boundaries, and the raw sign words, making the
file the complete interchange artifact between training and serving.
"""

from __future__ import annotations

import dataclasses
import struct

import numpy as np

from .binarized import BinFmModel
from .encoding import BinningSpec, EncodedSample, STRATEGIES

WORD_BITS = 64

MAGIC = b"BFM1"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Corrupt, truncated, or incompatible model file."""


def _n_words(n_params: int) -> int:
    return (n_params + WORD_BITS - 1) // WORD_BITS


def pack_signs(signs: np.ndarray) -> np.ndarray:
    """Pack a +/-1 vector into uint64 words (bit set means +1)."""
    bits = np.asarray(signs) > 0
    padded = np.zeros(_n_words(len(bits)) * WORD_BITS, dtype=bool)
    padded[: len(bits)] = bits
    return np.packbits(padded, bitorder="little").view("<u8").copy()


def unpack_signs(words: np.ndarray, n_params: int) -> np.ndarray:
    """Inverse of pack_signs: +/-1.0 floats of length n_params."""
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:n_params]
    return bits.astype(np.float64) * 2.0 - 1.0


def active_mask(active, n_params: int) -> np.ndarray:
    """Bitset of an encoded sample's active indices, as uint64 words."""
    idx = active.active if isinstance(active, EncodedSample) else np.asarray(active)
    if len(idx) and (idx.min() < 0 or idx.max() >= n_params):
        raise ValueError("active index out of range")
    words = np.zeros(_n_words(n_params), dtype=np.uint64)
    u = idx.astype(np.uint64)
    np.bitwise_or.at(words, u >> np.uint64(6), np.uint64(1) << (u & np.uint64(63)))
    return words


def active_masks_batch(active: np.ndarray, n_params: int) -> np.ndarray:
    """Build one mask row per encoded sample from an (n, d) index matrix."""
    n, d = active.shape
    if n and (active.min() < 0 or active.max() >= n_params):
        raise ValueError("active index out of range")
    words = np.zeros((n, _n_words(n_params)), dtype=np.uint64)
    u = active.astype(np.uint64)
    rows = np.repeat(np.arange(n), d)
    np.bitwise_or.at(
        words,
        (rows, (u >> np.uint64(6)).ravel()),
        (np.uint64(1) << (u & np.uint64(63))).ravel(),
    )
    return words


def popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


@dataclasses.dataclass(frozen=True)
class PackedModel:
    """One-bit-per-coefficient model: sign words, scales, and the binning
    needed to encode raw samples at serving time."""

    dim: int
    bins: int
    rank: int
    alpha: float
    beta: float
    w_bits: np.ndarray
    v_bits: np.ndarray
    binning: BinningSpec

    @property
    def n_params(self) -> int:
        return self.dim * self.bins

    def sign_payload_bits(self) -> int:
        """Exactly p * (1 + rank) bits of signs, independent of content."""
        return self.n_params * (1 + self.rank)


def pack(model: BinFmModel, spec: BinningSpec) -> PackedModel:
    """Freeze a trained model's signs into bits; proxies and optimizer state
    are dropped."""
    p = model.n_features
    if spec.encoded_dim != p:
        raise ValueError(
            f"binning encodes {spec.encoded_dim} inputs but model has {p}"
        )
    v_bits = np.stack([pack_signs(model.sign_V[:, f]) for f in range(model.rank)])
    return PackedModel(
        dim=spec.dim,
        bins=spec.bins,
        rank=model.rank,
        alpha=model.alpha,
        beta=model.beta,
        w_bits=pack_signs(model.sign_w),
        v_bits=v_bits,
        binning=spec,
    )


def unpack(pm: PackedModel) -> tuple[np.ndarray, np.ndarray]:
    """Recover the +/-1 sign arrays (w of length p, V of shape (p, rank))."""
    p = pm.n_params
    sign_w = unpack_signs(pm.w_bits, p)
    sign_V = np.column_stack([unpack_signs(pm.v_bits[f], p) for f in range(pm.rank)])
    return sign_w, sign_V


def popcount_predict(pm: PackedModel, mask: np.ndarray) -> float:
    """Score an active mask with word-wide AND + popcount only.

    Each sum of signs over the d active positions is 2 * popcount(mask AND
    bits) - d; no per-coefficient multiplication happens anywhere.
    """
    d = popcount(mask)
    if d != pm.dim:
        raise ValueError(f"mask has {d} active bits, expected {pm.dim}")
    linear = pm.alpha * (2 * popcount(mask & pm.w_bits) - d)
    factor_sums = 2 * np.bitwise_count(mask[None, :] & pm.v_bits).sum(axis=1).astype(
        np.int64
    ) - d
    interaction = 0.5 * pm.beta**2 * float((factor_sums * factor_sums - d).sum())
    return linear + interaction


def popcount_predict_batch(pm: PackedModel, masks: np.ndarray) -> np.ndarray:
    """Vectorized popcount_predict over an (n, words) mask matrix."""
    d = pm.dim
    linear = pm.alpha * (
        2 * np.bitwise_count(masks & pm.w_bits).sum(axis=1).astype(np.int64) - d
    )
    inter = np.zeros(len(masks))
    for f in range(pm.rank):
        s = 2 * np.bitwise_count(masks & pm.v_bits[f]).sum(axis=1).astype(np.int64) - d
        inter += s * s - d
    return linear + 0.5 * pm.beta**2 * inter


_HEADER = struct.Struct("<4sIQQQQdd")


def dumps(pm: PackedModel) -> bytes:
    """Serialize to the little-endian "BFM1" binary format."""
    spec = pm.binning
    return b"".join(
        [
            _HEADER.pack(
                MAGIC, FORMAT_VERSION, pm.n_params, pm.rank, pm.dim, pm.bins,
                pm.alpha, pm.beta,
            ),
            struct.pack("<I", STRATEGIES.index(spec.strategy)),
            np.ascontiguousarray(spec.boundaries, dtype="<f8").tobytes(),
            pm.w_bits.astype("<u8").tobytes(),
            pm.v_bits.astype("<u8").tobytes(),
        ]
    )


def save(pm: PackedModel, path) -> None:
    """Write the "BFM1" format to a file."""
    with open(path, "wb") as fh:
        fh.write(dumps(pm))


def load(path) -> PackedModel:
    """Read and validate a "BFM1" file; rejects bad magic, version, truncation,
    and inconsistent dimensions."""
    with open(path, "rb") as fh:
        data = fh.read()
    return loads(data)


def loads(data: bytes) -> PackedModel:
    if len(data) < _HEADER.size:
        raise ModelFormatError("truncated header")
    magic, version, p, rank, dim, bins, alpha, beta = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    if dim < 1 or bins < 2 or rank < 1 or p != dim * bins:
        raise ModelFormatError("inconsistent dimensions")
    off = _HEADER.size
    (strategy_tag,) = _read(data, off, "<I")
    off += 4
    if strategy_tag >= len(STRATEGIES):
        raise ModelFormatError(f"unknown binning strategy tag {strategy_tag}")
    n_cuts = dim * (bins - 1)
    boundaries = _read_array(data, off, "<f8", n_cuts).reshape(dim, bins - 1)
    off += 8 * n_cuts
    words = _n_words(p)
    w_bits = _read_array(data, off, "<u8", words)
    off += 8 * words
    v_bits = _read_array(data, off, "<u8", rank * words).reshape(rank, words)
    off += 8 * rank * words
    if off != len(data):
        raise ModelFormatError("trailing bytes after model payload")
    spec = BinningSpec(
        dim=dim, bins=bins, boundaries=boundaries, strategy=STRATEGIES[strategy_tag]
    )
    return PackedModel(
        dim=dim, bins=bins, rank=rank, alpha=alpha, beta=beta,
        w_bits=w_bits, v_bits=v_bits, binning=spec,
    )


def _read(data: bytes, off: int, fmt: str):
    size = struct.calcsize(fmt)
    if off + size > len(data):
        raise ModelFormatError("truncated file")
    return struct.unpack_from(fmt, data, off)


def _read_array(data: bytes, off: int, dtype: str, count: int) -> np.ndarray:
    size = np.dtype(dtype).itemsize * count
    if off + size > len(data):
        raise ModelFormatError("truncated file")
    return np.frombuffer(data, dtype=dtype, count=count, offset=off).copy()


@dataclasses.dataclass(frozen=True)
class MemoryCost:
    bits: int
    ratio_vs_fm: float


def memory_report(dim: int, bins: int, rank: int) -> dict[str, MemoryCost]:
    """Model-parameter storage in bits for each method, with ratios
    normalized by the 32-bit-float FM baseline."""
    if dim < 1 or bins < 1 or rank < 1:
        raise ValueError("dim, bins, and rank must be >= 1")
    fm = 32 * (dim + rank * dim)
    costs = {
        "FM": fm,
        "SEFM": 32 * (dim * bins + rank * dim * bins),
        "DFM": 32 * dim + rank * dim,
        "Binarized FM": dim * bins + rank * dim * bins,
    }
    return {name: MemoryCost(bits, bits / fm) for name, bits in costs.items()}
