"""Vision transformer structure and its expansion into accelerator workloads.

A transformer is described by a handful of scalars (image size, patch size,
embedding width, depth, head count).  The accelerator only executes dense
matrix multiplications; everything else (normalization, softmax, activation
functions, residual adds, token bookkeeping) runs on the host CPU and is
modeled with zero accelerator cycles.  This module expands a configuration
into the exact sequence of matmul layers and host operations one inference
performs.

Conventions for matmul layers:

* ``out_channels`` / ``in_channels`` / ``seq_len`` are the (M, N, F) dims of
  an F x N by N x M product producing F x M outputs.
* The engine always splits input channels into ``heads`` groups.  Fully
  connected layers accumulate partial sums across all groups; attention
  layers keep one independent result per head.
* For attention layers ``in_channels`` is the total width across heads, so
  the per-head operand width is ``in_channels // heads``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Union


class LayerKind(Enum):
    FC = "fc"
    ATTN_SCORE = "attn_score"
    ATTN_CONTEXT = "attn_context"


class HostKind(Enum):
    LAYERNORM = "layernorm"
    SOFTMAX = "softmax"
    SCALE = "scale"
    GELU = "gelu"
    SKIP_ADD = "skip_add"
    CONCAT = "concat"


# JSON field names accepted by ViTConfig.from_json / emitted by to_dict.
_CONFIG_FIELDS = (
    "image_height",
    "image_width",
    "in_channels",
    "patch_size",
    "embed_dim",
    "depth",
    "num_heads",
    "mlp_ratio",
    "num_classes",
)


@dataclass(frozen=True)
class ViTConfig:
    """Static description of a vision transformer classifier."""

    image_height: int
    image_width: int
    in_channels: int
    patch_size: int
    embed_dim: int
    depth: int
    num_heads: int
    mlp_ratio: int = 4
    num_classes: int = 1000
    name: str = "vit"

    def __post_init__(self):
        for f in _CONFIG_FIELDS:
            v = getattr(self, f)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"{f} must be a positive integer, got {v!r}")
        if self.image_height % self.patch_size or self.image_width % self.patch_size:
            raise ValueError(
                f"patch size {self.patch_size} must divide image "
                f"{self.image_height}x{self.image_width}"
            )
        if self.embed_dim % self.num_heads:
            raise ValueError(
                f"num_heads {self.num_heads} must divide embed_dim {self.embed_dim}"
            )

    @property
    def num_patches(self) -> int:
        return (self.image_height // self.patch_size) * (
            self.image_width // self.patch_size
        )

    @property
    def seq_len(self) -> int:
        """Encoder sequence length: one token per patch plus the class token."""
        return self.num_patches + 1

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads

    @classmethod
    def from_json(cls, path: str) -> "ViTConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data, name=data.get("name", "vit"))

    @classmethod
    def from_dict(cls, data: dict, name: str = "vit") -> "ViTConfig":
        missing = [f for f in _CONFIG_FIELDS if f not in data]
        if missing:
            raise ValueError(f"model config missing fields: {', '.join(missing)}")
        kwargs = {f: data[f] for f in _CONFIG_FIELDS}
        return cls(name=data.get("name", name), **kwargs)

    def to_dict(self) -> dict:
        d = {"name": self.name}
        d.update({f: getattr(self, f) for f in _CONFIG_FIELDS})
        return d


@dataclass(frozen=True)
class MatMulLayer:
    """One dense product executed on the accelerator.

    ``quant_in`` marks the input/weight operands as low precision (quantized
    activations, binary weights); ``quant_out`` marks the outputs as stored
    in quantized form.  The first layer and the classifier head keep both
    flags clear and run through the 16-bit datapath.
    """

    name: str
    kind: LayerKind
    out_channels: int
    in_channels: int
    seq_len: int
    heads: int
    quant_in: bool = False
    quant_out: bool = False

    def __post_init__(self):
        for f in ("out_channels", "in_channels", "seq_len", "heads"):
            v = getattr(self, f)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"{f} must be a positive integer, got {v!r}")
        if self.is_attention and self.in_channels % self.heads:
            raise ValueError(
                f"attention layer {self.name}: in_channels {self.in_channels} "
                f"not divisible by heads {self.heads}"
            )

    @property
    def is_attention(self) -> bool:
        return self.kind is not LayerKind.FC

    @property
    def per_head_in(self) -> int:
        """Input channels per head group (zero-padded when uneven)."""
        return -(-self.in_channels // self.heads)

    @property
    def macs(self) -> int:
        # Attention kinds: per-head (M x N/heads x F) products, one per head,
        # which multiplies back to M*N*F because N is the total width.
        return self.out_channels * self.in_channels * self.seq_len


@dataclass(frozen=True)
class HostOp:
    """CPU-side operation; occupies no accelerator cycles."""

    name: str
    kind: HostKind
    rows: int
    cols: int
    factor: float | None = None


ScheduleItem = Union[MatMulLayer, HostOp]


@dataclass(frozen=True)
class LayerSchedule:
    """Ordered inference workload for one frame."""

    config: ViTConfig
    items: tuple[ScheduleItem, ...] = field(default_factory=tuple)

    def matmuls(self) -> Iterator[MatMulLayer]:
        return (it for it in self.items if isinstance(it, MatMulLayer))

    def host_ops(self) -> Iterator[HostOp]:
        return (it for it in self.items if isinstance(it, HostOp))

    @property
    def max_seq_len(self) -> int:
        return max(l.seq_len for l in self.matmuls())

    def has_quantized(self) -> bool:
        return any(l.quant_in or l.quant_out for l in self.matmuls())


def convert_patch_embed(config: ViTConfig) -> MatMulLayer:
    """Patch embedding as a dense layer.

    The strided convolution over non-overlapping patches is exactly one
    matmul: each patch is flattened to a C*P*P vector and projected to the
    embedding width, one output token per patch.  Runs unquantized.
    """
    return MatMulLayer(
        name="patch_embed",
        kind=LayerKind.FC,
        out_channels=config.embed_dim,
        in_channels=config.in_channels * config.patch_size * config.patch_size,
        seq_len=config.num_patches,
        heads=config.num_heads,
    )


def _encoder_items(config: ViTConfig, index: int) -> list[ScheduleItem]:
    m = config.embed_dim
    f = config.seq_len
    h = config.num_heads
    hd = config.head_dim
    hidden = config.mlp_ratio * m
    p = f"enc{index}"

    def fc(name, out_ch, in_ch):
        return MatMulLayer(
            name=f"{p}.{name}",
            kind=LayerKind.FC,
            out_channels=out_ch,
            in_channels=in_ch,
            seq_len=f,
            heads=h,
            quant_in=True,
            quant_out=True,
        )

    return [
        HostOp(f"{p}.norm1", HostKind.LAYERNORM, f, m),
        fc("attn.q", m, m),
        fc("attn.k", m, m),
        fc("attn.v", m, m),
        # Per-head F x hd by hd x F products; total input width across
        # heads equals the embedding width.
        MatMulLayer(
            name=f"{p}.attn.score",
            kind=LayerKind.ATTN_SCORE,
            out_channels=f,
            in_channels=m,
            seq_len=f,
            heads=h,
            quant_in=True,
            quant_out=True,
        ),
        HostOp(f"{p}.attn.scale", HostKind.SCALE, f, f, factor=1.0 / math.sqrt(hd)),
        HostOp(f"{p}.attn.softmax", HostKind.SOFTMAX, f, f),
        # Per-head F x F by F x hd products; input width is F per head.
        MatMulLayer(
            name=f"{p}.attn.context",
            kind=LayerKind.ATTN_CONTEXT,
            out_channels=hd,
            in_channels=h * f,
            seq_len=f,
            heads=h,
            quant_in=True,
            quant_out=True,
        ),
        HostOp(f"{p}.attn.concat", HostKind.CONCAT, f, m),
        fc("attn.proj", m, m),
        HostOp(f"{p}.add1", HostKind.SKIP_ADD, f, m),
        HostOp(f"{p}.norm2", HostKind.LAYERNORM, f, m),
        fc("mlp.fc1", hidden, m),
        HostOp(f"{p}.gelu", HostKind.GELU, f, hidden),
        fc("mlp.fc2", m, hidden),
        HostOp(f"{p}.add2", HostKind.SKIP_ADD, f, m),
    ]


def expand_model(config: ViTConfig) -> LayerSchedule:
    """Expand a configuration into the full per-frame workload.

    Patch embedding and the classifier head stay unquantized; every encoder
    matmul is marked quantized on both sides.  Class-token concatenation and
    the positional-embedding add run on the host between the embedding and
    the first encoder.
    """
    items: list[ScheduleItem] = [convert_patch_embed(config)]
    items.append(HostOp("cls_concat", HostKind.CONCAT, config.seq_len, config.embed_dim))
    items.append(HostOp("pos_add", HostKind.SKIP_ADD, config.seq_len, config.embed_dim))
    for i in range(config.depth):
        items.extend(_encoder_items(config, i))
    items.append(HostOp("norm", HostKind.LAYERNORM, config.seq_len, config.embed_dim))
    # Classification head reads only the class token.
    items.append(
        MatMulLayer(
            name="head",
            kind=LayerKind.FC,
            out_channels=config.num_classes,
            in_channels=config.embed_dim,
            seq_len=1,
            heads=config.num_heads,
        )
    )
    return LayerSchedule(config=config, items=tuple(items))


def unquantized_view(schedule: LayerSchedule) -> LayerSchedule:
    """The same workload with every matmul forced to the 16-bit datapath.

    Used to evaluate the baseline accelerator, which runs unquantized models.
    """
    items = tuple(
        replace(it, quant_in=False, quant_out=False)
        if isinstance(it, MatMulLayer)
        else it
        for it in schedule.items
    )
    return LayerSchedule(config=schedule.config, items=items)


def count_operations(schedule: LayerSchedule) -> int:
    """Multiply-accumulate operation count for one frame, counted as 2*M*N*F
    per matmul (multiplies and adds separately)."""
    return sum(2 * l.macs for l in schedule.matmuls())
