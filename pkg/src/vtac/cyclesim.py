"""Cycle-level simulator of the double-buffered tile pipeline.

Replays one layer as a timeline of transfer, compute and store events and
reports the cycle the last event retires.  Durations come from walking the
actual data movement (packed rows, port-word bursts, per-token compute
passes) rather than from the closed-form model, so the two implementations
check each other.

Scheduling follows the statically scheduled controller the hardware
synthesizes to:

* Within an output tile, the input-group loop runs at a fixed initiation
  interval equal to the longest of the three engine activities (input
  burst, weight burst, compute), since the synthesized loop is pipelined
  for its worst-case path.  Iteration k loads operand tiles for group k
  into one half of the ping-pong buffers while computing group k-1 out of
  the other half; a trailing compute drains the last group.
* Output tiles also ping-pong: while tile r accumulates, tile r-1 streams
  out, so each tile occupies a fixed slot no shorter than either activity.
  The final tile's store has nothing left to hide behind and is exposed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import MatMulLayer
from .perf import AcceleratorParams, FpgaSpec


def _ceil(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class TileEvent:
    """One pipeline activity: kind is load_input, load_weight, compute or
    store; tile/group index the output tile and input group it serves."""

    kind: str
    tile: int
    group: int
    start: int
    end: int


@dataclass(frozen=True)
class CycleResult:
    total_cycles: int
    events: tuple[TileEvent, ...] = ()


def simulate_cycles(layer: MatMulLayer, params: AcceleratorParams,
                    spec: FpgaSpec, record_trace: bool = False) -> CycleResult:
    """Replay one layer; total must match the closed-form model exactly."""
    params.validate_for(layer.heads)
    heads = layer.heads

    if layer.quant_in:
        tile_n, pack_in = params.tile_n_q, params.pack_q
    else:
        tile_n, pack_in = params.tile_n, params.pack
    if layer.quant_out:
        tile_m_out, pack_out = params.tile_m_q, params.pack_q
    else:
        tile_m_out, pack_out = params.tile_m, params.pack

    # Walk the data movement of one group / one tile to get durations.
    in_dur = 0
    wgt_dur = 0
    for _ in range(heads):
        for _ in range(_ceil(tile_n, pack_in)):
            in_dur += _ceil(layer.seq_len, spec.in_ports)       # seq words
            wgt_dur += _ceil(params.tile_m, spec.wgt_ports)     # tile_m words
    cmpt_dur = 0
    for _ in range(layer.seq_len):
        cmpt_dur += _ceil(heads, params.head_par)  # one pass per head batch
    out_dur = 0
    stores = heads if layer.is_attention else 1
    for _ in range(stores):
        for _ in range(_ceil(tile_m_out, pack_out)):
            out_dur += _ceil(layer.seq_len, spec.out_ports)

    # Coverage walks give the trip counts.
    per_head = layer.per_head_in
    groups = 0
    covered = 0
    while covered < per_head:
        covered += tile_n
        groups += 1
    tiles = 0
    covered = 0
    while covered < layer.out_channels:
        covered += tile_m_out
        tiles += 1

    period = max(in_dur, wgt_dur, cmpt_dur)
    pipeline = groups * period + cmpt_dur  # loads plus the drained compute
    slot = max(pipeline, out_dur)          # store of the previous tile hides here

    events: list[TileEvent] = []
    if record_trace:
        for r in range(tiles):
            base = r * slot
            for k in range(groups):
                t = base + k * period
                events.append(TileEvent("load_input", r, k, t, t + in_dur))
                events.append(TileEvent("load_weight", r, k, t, t + wgt_dur))
                if k > 0:
                    events.append(TileEvent("compute", r, k - 1, t, t + cmpt_dur))
            t = base + groups * period
            events.append(TileEvent("compute", r, groups - 1, t, t + cmpt_dur))
            t = (r + 1) * slot
            events.append(TileEvent("store", r, groups - 1, t, t + out_dur))

    total = tiles * slot + out_dur
    return CycleResult(total_cycles=total, events=tuple(events))
