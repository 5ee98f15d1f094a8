"""Report serialization and accelerator source generation.

``emit_report`` flattens compilation results into one JSON-ready document
with a fixed key order, so identical inputs always serialize to identical
bytes.  ``emit_accelerator_source`` substitutes the sized parameters into
the bundled HLS-style template; every ``{{placeholder}}`` must resolve, and
``parse_source_params`` recovers the exact constants from the generated
text.  File writes go through a temp file plus rename so readers never see
a half-written artifact.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from importlib import resources

from . import __version__
from .dse import CompilationResult
from .model import LayerSchedule, count_operations
from .perf import AcceleratorParams, FpgaSpec

REPORT_FORMAT = 1
_TEMPLATE_RESOURCE = "templates/accelerator.tmpl"
_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")

# Column order of the per-layer cost table (report and CSV agree).
_LAYER_COLUMNS = (
    "name", "kind", "heads", "out_channels", "in_channels", "seq_len",
    "quant_in", "quant_out", "macs", "groups", "tiles", "input_cycles",
    "weight_cycles", "compute_cycles", "output_cycles", "tile_cycles",
    "total_cycles",
)


def _accumulator_bits(schedule: LayerSchedule, act_bits: int) -> int:
    """Exact-integer accumulator width: ceil(log2(N)) + activation bits for
    the deepest contraction N in the schedule."""
    depth = max(l.in_channels for l in schedule.matmuls())
    return math.ceil(math.log2(depth)) + act_bits


def _layer_row(layer, cost) -> dict:
    row = {
        "name": layer.name,
        "kind": layer.kind.value,
        "heads": layer.heads,
        "out_channels": layer.out_channels,
        "in_channels": layer.in_channels,
        "seq_len": layer.seq_len,
        "quant_in": layer.quant_in,
        "quant_out": layer.quant_out,
        "macs": layer.macs,
        "groups": cost.groups,
        "tiles": cost.tiles,
        "input_cycles": cost.input_cycles,
        "weight_cycles": cost.weight_cycles,
        "compute_cycles": cost.compute_cycles,
        "output_cycles": cost.output_cycles,
        "tile_cycles": cost.tile_cycles,
        "total_cycles": cost.total_cycles,
    }
    assert tuple(row) == _LAYER_COLUMNS
    return row


def _trace_entry(ev) -> dict:
    entry = {"act_bits": ev.act_bits, "feasible": ev.feasible, "fps": ev.fps}
    if ev.note:
        entry["note"] = ev.note
    return entry


def _pct(used: int, total: int) -> float:
    return round(100.0 * used / total, 3)


def _result_entry(result: CompilationResult, schedule: LayerSchedule,
                  spec: FpgaSpec) -> dict:
    entry = {
        # target_fps 0 marks a plain estimate (no search ran)
        "target_fps": result.target_fps if result.target_fps > 0 else None,
        "feasible": result.feasible,
        "fr_max_fps": result.fr_max,
        "evaluations": result.evaluations,
        "search_trace": [_trace_entry(e) for e in result.search_trace],
    }
    if not result.feasible:
        entry["diagnostic"] = result.diagnostic
        return entry

    lat, usage = result.latency, result.usage
    entry["act_bits"] = result.act_bits
    entry["accelerator"] = result.params.to_dict()
    entry["accumulator_bits"] = _accumulator_bits(schedule, result.act_bits)
    entry["performance"] = {
        "cycles": lat.cycles,
        "latency_s": lat.seconds,
        "fps": lat.fps,
        "gops": lat.gops,
        "gops_per_dsp": lat.gops / usage.dsp,
        # MAC-array LUTs are zero on the pure 16-bit datapath
        "gops_per_klut": (lat.gops / (usage.lut_mac / 1000.0)
                          if usage.lut_mac else None),
    }
    entry["resources"] = {
        "dsp": usage.dsp,
        "dsp_pct": _pct(usage.dsp, spec.dsp),
        "lut_mac": usage.lut_mac,
        "lut_pct": _pct(usage.lut_mac, spec.lut),
        "bram_18k": usage.bram_18k,
        "bram_36k": (usage.bram_18k + 1) // 2,
        "bram_pct": _pct(usage.bram_18k, spec.bram_18k),
        "bram_in": usage.bram_in,
        "bram_wgt": usage.bram_wgt,
        "bram_out": usage.bram_out,
    }
    entry["constraints"] = {
        "feasible": result.constraints.feasible,
        "violations": list(result.constraints.violations),
        "slack": dict(result.constraints.slack),
    }
    entry["layers"] = [_layer_row(l, c) for l, c in result.layer_costs]
    return entry


def emit_report(results, schedule: LayerSchedule, spec: FpgaSpec) -> dict:
    """Build the report document for one or more compilation results."""
    results = list(results)
    if not results:
        raise ValueError("emit_report needs at least one result")
    cfg = schedule.config
    model = cfg.to_dict()
    model["seq_len"] = cfg.seq_len
    model["matmul_layers"] = sum(1 for _ in schedule.matmuls())
    model["operations_per_frame"] = count_operations(schedule)
    return {
        "format_version": REPORT_FORMAT,
        "generator": f"vtac {__version__}",
        "model": model,
        "fpga": spec.to_dict(),
        "assumptions": [
            "host operations (layernorm, softmax, scaling, gelu, residual "
            "adds, patch extraction) cost zero accelerator cycles",
            f"stream widths are calibration constants: in_ports="
            f"{spec.in_ports}, wgt_ports={spec.wgt_ports}, out_ports="
            f"{spec.out_ports} port words per cycle",
            f"quantized MACs cost lut_per_mac={spec.lut_per_mac} LUTs; the "
            f"LUT figure covers the MAC array only, not control logic",
            f"usable resource fractions: dsp_ratio={spec.dsp_ratio:g}, "
            f"lut_ratio={spec.lut_ratio:g}",
            "accumulators are exact integers of width ceil(log2(N)) + "
            "act_bits; no saturation is modeled",
            "block RAM is counted in 18k-bit units; bram_36k is the "
            "equivalent 36k-unit figure for vendor-report comparison",
        ],
        "results": [_result_entry(r, schedule, spec) for r in results],
    }


def render_report(report: dict) -> str:
    """Serialize with a trailing newline; key order is construction order."""
    return json.dumps(report, indent=2) + "\n"


def write_text_atomic(path: str, text: str) -> None:
    """Write via temp file + rename; readers never see partial content."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".vtac-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)  # mkstemp defaults to owner-only
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def emit_layer_csv(result: CompilationResult) -> str:
    """Per-layer cost table as CSV text (feasible results only)."""
    if not result.feasible:
        raise ValueError("no layer costs on an infeasible result")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_LAYER_COLUMNS)
    for layer, cost in result.layer_costs:
        row = _layer_row(layer, cost)
        writer.writerow([row[c] for c in _LAYER_COLUMNS])
    return buf.getvalue()


def _default_template() -> str:
    return (resources.files(__package__) / _TEMPLATE_RESOURCE).read_text()


def emit_accelerator_source(params: AcceleratorParams,
                            schedule: LayerSchedule,
                            template_text: str | None = None,
                            port_bits: int = 64) -> str:
    """Fill the HLS-style source template with one sized design."""
    if template_text is None:
        template_text = _default_template()
    matmuls = list(schedule.matmuls())
    rows = "\n".join(
        f'    {{"{l.name}", {l.heads}, {l.out_channels}, {l.in_channels}, '
        f"{l.seq_len}, {str(l.quant_in).lower()}, "
        f"{str(l.quant_out).lower()}}}," for l in matmuls
    )
    context = {
        "tool": f"vtac {__version__}",
        "model_name": schedule.config.name,
        "tile_m": params.tile_m,
        "tile_n": params.tile_n,
        "tile_m_q": params.tile_m_q,
        "tile_n_q": params.tile_n_q,
        "pack": params.pack,
        "pack_q": params.pack_q,
        "head_par": params.head_par,
        "act_bits": params.act_bits,
        "used_bits": params.act_bits * params.pack_q,
        "port_bits": port_bits,
        "num_layers": len(matmuls),
        "accumulator_bits": _accumulator_bits(schedule, params.act_bits),
        "layer_table": rows,
    }

    unknown = []

    def fill(match: re.Match) -> str:
        key = match.group(1)
        if key not in context:
            unknown.append(key)
            return match.group(0)
        return str(context[key])

    out = _PLACEHOLDER.sub(fill, template_text)
    if unknown:
        raise ValueError(
            f"template placeholders without values: {', '.join(sorted(set(unknown)))}"
        )
    if "{{" in out:
        raise ValueError("malformed placeholder left in template output")
    return out


# Constants recovered by parse_source_params, in AcceleratorParams order.
_SOURCE_CONSTANTS = (
    ("TILE_M", "tile_m"),
    ("TILE_N", "tile_n"),
    ("TILE_M_Q", "tile_m_q"),
    ("TILE_N_Q", "tile_n_q"),
    ("PACK", "pack"),
    ("PACK_Q", "pack_q"),
    ("HEAD_PAR", "head_par"),
    ("ACT_BITS", "act_bits"),
)


def parse_source_params(text: str) -> AcceleratorParams:
    """Recover the emitted parameter constants from generated source."""
    values = {}
    for symbol, field in _SOURCE_CONSTANTS:
        match = re.search(rf"constexpr int {symbol} = (\d+);", text)
        if match is None:
            raise ValueError(f"constant {symbol} not found in source")
        values[field] = int(match.group(1))
    return AcceleratorParams(**values)
