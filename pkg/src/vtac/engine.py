"""Bit-exact functional simulator of the matmul engine.

The engine consumes quantized activation codes and binary weights and
produces integer accumulators; scales stay outside the datapath and are
reapplied on the host.  Binary weights reduce every multiply to an add or
subtract of the input code.  The simulator reproduces the exact tiled
traversal of the hardware (output-channel tiles, head groups, input-channel
tiles) so tiling or indexing mistakes change results; packing factors only
affect timing and never values, so they do not appear here.

Full-precision layers run the same traversal on float operands.  Attention
layers feed activations as both operands (the second operand arrives as
quantized codes rather than binary weights); fully connected layers
accumulate across all head groups, attention layers keep one result per
head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LayerKind, MatMulLayer
from .perf import AcceleratorParams


@dataclass(frozen=True)
class QuantizedTensor:
    """Integer activation codes with one shared scale."""

    codes: np.ndarray
    scale: float
    bits: int


@dataclass(frozen=True)
class BinarizedWeights:
    """Sign matrix (+1/-1) with one shared magnitude."""

    signs: np.ndarray
    scale: float


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(v) + 0.5), v)


def quantize_activations(x: np.ndarray, bits: int) -> QuantizedTensor:
    """Symmetric uniform quantization with a per-tensor scale.

    The scale maps the largest magnitude onto the top positive code;
    rounding is half away from zero with a saturating clamp.  At one bit
    the codes collapse to {-1, 0, 1} with the scale equal to the largest
    magnitude.
    """
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must be in [1, 16], got {bits}")
    x = np.asarray(x, dtype=np.float64)
    amax = float(np.max(np.abs(x))) if x.size else 0.0
    top = max((1 << (bits - 1)) - 1, 1)
    if amax == 0.0:
        return QuantizedTensor(np.zeros(x.shape, dtype=np.int64), 0.0, bits)
    scale = amax / top
    codes = _round_half_away(x / scale)
    lo = -(1 << (bits - 1)) if bits > 1 else -1
    codes = np.clip(codes, lo, top).astype(np.int64)
    return QuantizedTensor(codes, scale, bits)


def dequantize(t: QuantizedTensor) -> np.ndarray:
    return t.codes.astype(np.float64) * t.scale


def binarize_weights(w: np.ndarray) -> BinarizedWeights:
    """Collapse a weight matrix to signs and its mean magnitude.

    Each weight becomes +scale when positive and -scale otherwise, with the
    scale chosen as the l1 norm over the element count.  An all-zero matrix
    yields scale 0 with all signs negative.
    """
    w = np.asarray(w, dtype=np.float64)
    scale = float(np.sum(np.abs(w)) / w.size) if w.size else 0.0
    signs = np.where(w > 0, 1, -1).astype(np.int8)
    return BinarizedWeights(signs, scale)


def _operand(x):
    """Normalize an engine operand to (array, scale, integral)."""
    if isinstance(x, QuantizedTensor):
        return x.codes.astype(np.int64), x.scale, True
    if isinstance(x, BinarizedWeights):
        return x.signs.astype(np.int64), x.scale, True
    arr = np.asarray(x, dtype=np.float64)
    return arr, 1.0, False


def _grouped(arr: np.ndarray, heads: int, per_head: int) -> np.ndarray:
    """Split the trailing channel axis of a 2-D operand into head groups,
    zero-padding the last group when channels do not divide evenly."""
    rows, chans = arr.shape
    padded = heads * per_head
    if padded != chans:
        ext = np.zeros((rows, padded), dtype=arr.dtype)
        ext[:, :chans] = arr
        arr = ext
    return np.ascontiguousarray(
        arr.reshape(rows, heads, per_head).transpose(1, 0, 2)
    )


def simulate_matmul_engine(layer: MatMulLayer, params: AcceleratorParams,
                           inputs, weights):
    """Run one layer through the tiled engine.

    ``inputs`` is a QuantizedTensor (or raw float array on the 16-bit path)
    shaped (seq, in_channels) for FC layers or (heads, seq, per_head_in)
    for attention layers.  ``weights`` follows the same grouping with shape
    (out_channels, in_channels) or (heads, out_channels, per_head_in) and
    may be BinarizedWeights, a QuantizedTensor (attention operands), or a
    raw float array.

    Returns (accumulators, scale): integer accumulators when both operands
    are integral, float64 otherwise; scale is the product of the operand
    scales.  FC outputs are (seq, out_channels); attention outputs keep the
    per-head axis: (heads, seq, out_channels).
    """
    params.validate_for(layer.heads)
    x, x_scale, x_int = _operand(inputs)
    w, w_scale, w_int = _operand(weights)
    heads = layer.heads
    per_head = layer.per_head_in
    seq, m = layer.seq_len, layer.out_channels

    if layer.kind is LayerKind.FC:
        if x.shape != (seq, layer.in_channels):
            raise ValueError(
                f"{layer.name}: input shape {x.shape} != {(seq, layer.in_channels)}"
            )
        if w.shape != (m, layer.in_channels):
            raise ValueError(
                f"{layer.name}: weight shape {w.shape} != {(m, layer.in_channels)}"
            )
        xg = _grouped(x, heads, per_head)
        wg = _grouped(w, heads, per_head)
    else:
        if x.shape != (heads, seq, per_head):
            raise ValueError(
                f"{layer.name}: input shape {x.shape} != {(heads, seq, per_head)}"
            )
        if w.shape != (heads, m, per_head):
            raise ValueError(
                f"{layer.name}: weight shape {w.shape} != {(heads, m, per_head)}"
            )
        xg, wg = x, w

    tile_m = params.tile_m_q if layer.quant_in else params.tile_m
    tile_n = params.tile_n_q if layer.quant_in else params.tile_n
    if tile_m > m:
        raise ValueError(f"{layer.name}: output tile {tile_m} exceeds {m} channels")
    if tile_n > per_head:
        raise ValueError(
            f"{layer.name}: input tile {tile_n} exceeds {per_head} channels per head"
        )

    dtype = np.int64 if (x_int and w_int) else np.float64
    acc = np.zeros((heads, seq, m), dtype=dtype)
    ph = params.head_par
    for m0 in range(0, m, tile_m):
        m1 = min(m0 + tile_m, m)
        for n0 in range(0, per_head, tile_n):
            n1 = min(n0 + tile_n, per_head)
            for h0 in range(0, heads, ph):
                h1 = h0 + ph
                acc[h0:h1, :, m0:m1] += np.einsum(
                    "hfn,hmn->hfm", xg[h0:h1, :, n0:n1], wg[h0:h1, m0:m1, n0:n1]
                )

    if layer.kind is LayerKind.FC:
        acc = acc.sum(axis=0)  # partial sums joined across head groups
    return acc, x_scale * w_scale


