"""Analytical latency and resource model for the tiled accelerator.

The accelerator streams one matmul layer at a time.  Input activations,
weights and outputs live in on-chip buffers sized for one tile; off-chip
transfers are double buffered against compute.  Per layer, the engine walks
output-channel tiles; within each output tile it iterates input-channel
groups, loading the next group's operand tiles while computing the current
one, and overlaps the store of the previous output tile with the next
tile's accumulation.

Cycle model per layer (all divisions are ceilings):

* input load per group      heads * (tile_n / pack) * (seq / in_ports)
* weight load per group     heads * (tile_n / pack) * (tile_m / wgt_ports)
* compute per group         seq * (heads / head_par)
* output store per tile     bcast * (tile_m / pack) * (seq / out_ports)
  where bcast is the head count for attention layers (every head stores its
  own result) and 1 otherwise
* group pipeline            max(input, weight, compute) per iteration, plus
  one trailing compute
* per output tile           max(group pipeline, store of previous tile)
* layer total               tiles * per-tile + one exposed final store

Quantized layers substitute the quantized tile sizes and packing factor on
the input side and for output storage; the weight-burst length stays tied
to the 16-bit output tile width, mirroring the weight buffer layout (see
resource_usage).

On-chip buffering, in 18 kbit block-RAM units and double buffered (factor
2).  The quantized datapath shares buffers with the 16-bit one, so each
buffer is sized for the larger of the two layouts:

* input    2 * heads * max(rows * unit(seq*pack*16b), rows_q * unit(seq*pack_q*act_bits))
* weights  2 * heads * max(rows * unit(tile_m*pack*16b), rows_q * unit(tile_m*pack_q))
* output   2 * heads * max(rows_m * unit(seq*pack*16b), rows_mq * unit(seq*pack_q*act_bits))

where rows = ceil(tile_n/pack) etc. and unit(b) = ceil(b / 18432).  The
quantized weight rows hold one bit per value, hence no bit-width factor.

Compute resources: the 16-bit datapath spends one DSP multiplier per
parallel MAC (tile_m * head_par * tile_n); the quantized datapath builds
add/subtract MACs out of LUTs (lut_per_mac * tile_m_q * head_par *
tile_n_q).  Usable fractions of the device (dsp_ratio, lut_ratio) model
placement and routing headroom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .model import LayerSchedule, MatMulLayer, count_operations

BRAM_BITS = 18432  # one 18 kbit block


def _ceil(a: int, b: int) -> int:
    return -(-a // b)


# FpgaSpec JSON field names; everything except name is required.
_SPEC_FIELDS = (
    "dsp",
    "lut",
    "bram_18k",
    "port_bits",
    "in_ports",
    "wgt_ports",
    "out_ports",
    "clock_hz",
    "dsp_ratio",
    "lut_ratio",
    "lut_per_mac",
    "baseline_bits",
)


@dataclass(frozen=True)
class FpgaSpec:
    """Device budget plus calibration constants.

    ``in_ports`` / ``wgt_ports`` / ``out_ports`` count memory-port words
    movable per cycle for each stream; ``lut_per_mac`` is the LUT cost of
    one quantized add/subtract MAC; ``dsp_ratio`` and ``lut_ratio`` bound
    the usable fraction of each resource.
    """

    name: str = "custom"
    dsp: int = 2520
    lut: int = 274000
    bram_18k: int = 1824
    port_bits: int = 64
    in_ports: int = 2
    wgt_ports: int = 2
    out_ports: int = 2
    clock_hz: float = 150e6
    dsp_ratio: float = 0.9
    lut_ratio: float = 0.7
    lut_per_mac: int = 12
    baseline_bits: int = 16

    def __post_init__(self):
        for f in ("dsp", "lut", "bram_18k", "port_bits", "in_ports", "wgt_ports",
                  "out_ports", "lut_per_mac", "baseline_bits"):
            v = getattr(self, f)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"{f} must be a positive integer, got {v!r}")
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be positive")
        for f in ("dsp_ratio", "lut_ratio"):
            v = getattr(self, f)
            if not 0 < v <= 1:
                raise ValueError(f"{f} must be in (0, 1], got {v!r}")
        if self.baseline_bits > self.port_bits:
            raise ValueError("baseline_bits wider than a memory port word")

    @classmethod
    def from_json(cls, path: str) -> "FpgaSpec":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "FpgaSpec":
        missing = [f for f in _SPEC_FIELDS if f not in data]
        if missing:
            raise ValueError(f"fpga spec missing fields: {', '.join(missing)}")
        kwargs = {f: data[f] for f in _SPEC_FIELDS}
        return cls(name=data.get("name", "custom"), **kwargs)

    def to_dict(self) -> dict:
        d = {"name": self.name}
        d.update({f: getattr(self, f) for f in _SPEC_FIELDS})
        return d


def pack_factor(port_bits: int, value_bits: int) -> int:
    """Values packed per memory-port word; leftover bits stay unused.

    A 64-bit port carries 4 16-bit values, 8 8-bit values, or 10 6-bit
    values (60 of the 64 bits exploited).
    """
    if value_bits < 1:
        raise ValueError(f"value_bits must be >= 1, got {value_bits}")
    if value_bits > port_bits:
        raise ValueError(f"value_bits {value_bits} exceeds port width {port_bits}")
    return port_bits // value_bits


@dataclass(frozen=True)
class AcceleratorParams:
    """Sized accelerator instance.

    ``tile_m`` / ``tile_n`` are the 16-bit datapath output/input tile
    widths, ``tile_m_q`` / ``tile_n_q`` the quantized ones.  ``pack`` and
    ``pack_q`` are values per port word for each datapath, ``head_par`` the
    number of head groups computed in parallel, ``act_bits`` the quantized
    activation precision.
    """

    tile_m: int
    tile_n: int
    tile_m_q: int
    tile_n_q: int
    pack: int
    pack_q: int
    head_par: int
    act_bits: int

    def __post_init__(self):
        for f in ("tile_m", "tile_n", "tile_m_q", "tile_n_q", "pack", "pack_q",
                  "head_par"):
            v = getattr(self, f)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"{f} must be a positive integer, got {v!r}")
        if not 1 <= self.act_bits <= 16:
            raise ValueError(f"act_bits must be in [1, 16], got {self.act_bits}")

    def validate_for(self, heads: int) -> None:
        if heads % self.head_par:
            raise ValueError(
                f"head_par {self.head_par} does not divide head count {heads}"
            )

    def alignment_errors(self) -> list[str]:
        """Packing alignment required of searched designs: output tile
        widths store through packed ports, so both must divide evenly under
        both packing factors.  Hand-built params may ignore this."""
        errs = []
        for f in ("tile_m", "tile_m_q"):
            v = getattr(self, f)
            if v % self.pack or v % self.pack_q:
                errs.append(
                    f"{f}={v} not divisible by pack={self.pack} "
                    f"and pack_q={self.pack_q}"
                )
        return errs

    @classmethod
    def from_dict(cls, data: dict) -> "AcceleratorParams":
        fields = ("tile_m", "tile_n", "tile_m_q", "tile_n_q", "pack", "pack_q",
                  "head_par", "act_bits")
        missing = [f for f in fields if f not in data]
        if missing:
            raise ValueError(f"params missing fields: {', '.join(missing)}")
        return cls(**{f: data[f] for f in fields})

    def to_dict(self) -> dict:
        return {
            "tile_m": self.tile_m,
            "tile_n": self.tile_n,
            "tile_m_q": self.tile_m_q,
            "tile_n_q": self.tile_n_q,
            "pack": self.pack,
            "pack_q": self.pack_q,
            "head_par": self.head_par,
            "act_bits": self.act_bits,
        }


@dataclass(frozen=True)
class LayerCost:
    """Per-layer cycle breakdown.

    ``group_cycles`` is the double-buffered pipeline period (max of the two
    loads and compute); ``tile_cycles`` the span of one output tile
    including the overlapped store of its predecessor; ``total_cycles`` the
    layer latency.
    """

    input_cycles: int
    weight_cycles: int
    output_cycles: int
    compute_cycles: int
    group_cycles: int
    tile_cycles: int
    total_cycles: int
    groups: int
    tiles: int


def layer_cycles(layer: MatMulLayer, params: AcceleratorParams,
                 spec: FpgaSpec) -> LayerCost:
    """Closed-form latency of one layer on a sized accelerator."""
    params.validate_for(layer.heads)
    heads = layer.heads
    quant_in = layer.quant_in
    quant_out = layer.quant_out

    # Operand-side tile geometry: packed input-channel rows per head and
    # input-group iterations per output tile.
    if quant_in:
        in_rows = _ceil(params.tile_n_q, params.pack_q)
        groups = _ceil(layer.in_channels, heads * params.tile_n_q)
    else:
        in_rows = _ceil(params.tile_n, params.pack)
        groups = _ceil(layer.in_channels, heads * params.tile_n)

    input_cycles = heads * in_rows * _ceil(layer.seq_len, spec.in_ports)
    # The weight buffer always spans the 16-bit output tile width, so the
    # burst per packed row is tile_m words on either datapath.
    weight_cycles = heads * in_rows * _ceil(params.tile_m, spec.wgt_ports)
    compute_cycles = layer.seq_len * _ceil(heads, params.head_par)

    # Attention layers store every head's result; FC layers store one.
    bcast = heads if layer.is_attention else 1
    if quant_out:
        out_rows = _ceil(params.tile_m_q, params.pack_q)
        tiles = _ceil(layer.out_channels, params.tile_m_q)
    else:
        out_rows = _ceil(params.tile_m, params.pack)
        tiles = _ceil(layer.out_channels, params.tile_m)
    output_cycles = bcast * out_rows * _ceil(layer.seq_len, spec.out_ports)

    group_cycles = max(input_cycles, weight_cycles, compute_cycles)
    tile_cycles = max(group_cycles * groups + compute_cycles, output_cycles)
    total_cycles = tiles * tile_cycles + output_cycles

    return LayerCost(
        input_cycles=input_cycles,
        weight_cycles=weight_cycles,
        output_cycles=output_cycles,
        compute_cycles=compute_cycles,
        group_cycles=group_cycles,
        tile_cycles=tile_cycles,
        total_cycles=total_cycles,
        groups=groups,
        tiles=tiles,
    )


@dataclass(frozen=True)
class LatencySummary:
    cycles: int
    seconds: float
    fps: float
    gops: float


def model_latency(schedule: LayerSchedule, params: AcceleratorParams,
                  spec: FpgaSpec) -> LatencySummary:
    """Whole-frame latency: sum of per-layer totals; host ops are free."""
    totals = [layer_cycles(l, params, spec).total_cycles for l in schedule.matmuls()]
    if not totals:
        raise ValueError("schedule contains no matmul layers")
    cycles = sum(totals)
    seconds = cycles / spec.clock_hz
    fps = 1.0 / seconds
    gops = count_operations(schedule) * fps / 1e9
    return LatencySummary(cycles=cycles, seconds=seconds, fps=fps, gops=gops)


@dataclass(frozen=True)
class ResourceUsage:
    bram_in: int
    bram_wgt: int
    bram_out: int
    bram_18k: int
    dsp: int
    lut_mac: int


def resource_usage(params: AcceleratorParams, spec: FpgaSpec, heads: int,
                   seq_len: int, include_quantized: bool = True) -> ResourceUsage:
    """On-chip buffer, DSP and LUT usage of a sized accelerator.

    ``seq_len`` must be the longest sequence any layer runs (buffers are
    sized once for the whole model).  ``include_quantized`` drops the
    quantized datapath, for designs that only run unquantized layers.
    """
    base_bits = spec.baseline_bits
    rows_n = _ceil(params.tile_n, params.pack)
    rows_m = _ceil(params.tile_m, params.pack)

    in_base = rows_n * _ceil(seq_len * params.pack * base_bits, BRAM_BITS)
    wgt_base = rows_n * _ceil(params.tile_m * params.pack * base_bits, BRAM_BITS)
    out_base = rows_m * _ceil(seq_len * params.pack * base_bits, BRAM_BITS)

    if include_quantized:
        rows_nq = _ceil(params.tile_n_q, params.pack_q)
        rows_mq = _ceil(params.tile_m_q, params.pack_q)
        in_q = rows_nq * _ceil(seq_len * params.pack_q * params.act_bits, BRAM_BITS)
        # One bit per binary weight, pack_q values per row slice.
        wgt_q = rows_nq * _ceil(params.tile_m * params.pack_q, BRAM_BITS)
        out_q = rows_mq * _ceil(seq_len * params.pack_q * params.act_bits, BRAM_BITS)
    else:
        in_q = wgt_q = out_q = 0

    bram_in = 2 * heads * max(in_base, in_q)
    bram_wgt = 2 * heads * max(wgt_base, wgt_q)
    bram_out = 2 * heads * max(out_base, out_q)

    dsp = params.tile_m * params.head_par * params.tile_n
    lut_mac = (
        spec.lut_per_mac * params.tile_m_q * params.head_par * params.tile_n_q
        if include_quantized
        else 0
    )
    return ResourceUsage(
        bram_in=bram_in,
        bram_wgt=bram_wgt,
        bram_out=bram_out,
        bram_18k=bram_in + bram_wgt + bram_out,
        dsp=dsp,
        lut_mac=lut_mac,
    )


@dataclass(frozen=True)
class ConstraintReport:
    feasible: bool
    violations: tuple[str, ...]
    slack: dict

    def __bool__(self) -> bool:
        return self.feasible


def check_constraints(usage: ResourceUsage, spec: FpgaSpec) -> ConstraintReport:
    """Feasibility of a usage vector against the device budget."""
    budgets = {
        "bram_18k": (usage.bram_18k, spec.bram_18k),
        "dsp": (usage.dsp, int(spec.dsp * spec.dsp_ratio)),
        "lut": (usage.lut_mac, int(spec.lut * spec.lut_ratio)),
    }
    slack = {k: budget - used for k, (used, budget) in budgets.items()}
    violations = tuple(k for k, s in slack.items() if s < 0)
    return ConstraintReport(feasible=not violations, violations=violations,
                            slack=slack)


def baseline_params(tile_m: int, tile_n: int, spec: FpgaSpec,
                    head_par: int) -> AcceleratorParams:
    """16-bit design: the quantized datapath mirrors the baseline one."""
    g = pack_factor(spec.port_bits, spec.baseline_bits)
    return AcceleratorParams(
        tile_m=tile_m,
        tile_n=tile_n,
        tile_m_q=tile_m,
        tile_n_q=tile_n,
        pack=g,
        pack_q=g,
        head_par=head_par,
        act_bits=spec.baseline_bits,
    )
