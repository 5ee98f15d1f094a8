"""Command-line entry point.

Subcommands: ``compile`` (search precision per frame-rate target and emit
report, per-layer CSV, figures and an accelerator source skeleton),
``estimate`` (evaluate one explicit design without searching), ``simulate``
(cycle-accurate simulator vs the closed-form model on a full schedule) and
``verify`` (randomized equivalence suites).

Exit codes are a stable contract: 0 success, 1 verification mismatch,
2 configuration error, 3 infeasible target (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources

from .cyclesim import simulate_cycles
from .dse import (
    CompilationResult,
    InfeasibleError,
    SearchTarget,
    adjust_params,
    init_params,
    optimize_baseline,
    search_precision,
)
from .emit import (
    emit_accelerator_source,
    emit_layer_csv,
    emit_report,
    render_report,
    write_text_atomic,
)
from .model import ViTConfig, expand_model, unquantized_view
from .perf import (
    AcceleratorParams,
    FpgaSpec,
    check_constraints,
    layer_cycles,
    model_latency,
    resource_usage,
)
from .verify import run_cycle_suite, run_engine_suite

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

PRESET_DIR_ENV = "VTAC_PRESET_DIR"

log = logging.getLogger("vtac")


class ConfigError(Exception):
    """Bad invocation or unreadable configuration; maps to exit 2."""


def _resolve_config(arg: str, what: str) -> str:
    """Accept a JSON file path or a bundled preset name."""
    if os.path.isfile(arg):
        return arg
    if os.sep in arg or arg.endswith(".json"):
        raise ConfigError(f"{what} file not found: {arg}")
    tried = []
    override = os.environ.get(PRESET_DIR_ENV)
    if override:
        cand = os.path.join(override, f"{arg}.json")
        if os.path.isfile(cand):
            return cand
        tried.append(cand)
    bundled = resources.files(__package__) / f"presets/{arg}.json"
    if bundled.is_file():
        return str(bundled)
    tried.append(str(bundled))
    raise ConfigError(
        f"no {what} file or preset named {arg!r} (tried: {', '.join(tried)})"
    )


def _load_model(arg: str) -> ViTConfig:
    path = _resolve_config(arg, "model")
    try:
        return ViTConfig.from_json(path)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"model config {path}: {err}") from err


def _load_fpga(arg: str) -> FpgaSpec:
    path = _resolve_config(arg, "fpga")
    try:
        return FpgaSpec.from_json(path)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"fpga spec {path}: {err}") from err


def _load_params(path: str) -> AcceleratorParams:
    try:
        with open(path) as fh:
            return AcceleratorParams.from_dict(json.load(fh))
    except (ValueError, OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"params file {path}: {err}") from err


def _tag(target_fps: float | None) -> str:
    return "estimate" if target_fps is None else f"{target_fps:g}fps"


def _write_outputs(args, results, schedule, spec, with_source: bool) -> str:
    os.makedirs(args.out, exist_ok=True)
    report = emit_report(results, schedule, spec)
    report_path = os.path.join(args.out, "report.json")
    write_text_atomic(report_path, render_report(report))
    log.info("wrote %s", report_path)

    template_text = None
    if getattr(args, "template", None):
        with open(args.template) as fh:
            template_text = fh.read()

    for result in results:
        if not result.feasible:
            continue
        tag = _tag(result.target_fps if result.target_fps > 0 else None)
        csv_path = os.path.join(args.out, f"layer_costs_{tag}.csv")
        write_text_atomic(csv_path, emit_layer_csv(result))
        log.info("wrote %s", csv_path)
        if with_source:
            sched = (unquantized_view(schedule)
                     if result.act_bits == spec.baseline_bits else schedule)
            src = emit_accelerator_source(result.params, sched,
                                          template_text=template_text,
                                          port_bits=spec.port_bits)
            src_path = os.path.join(args.out, f"accelerator_{tag}.h")
            write_text_atomic(src_path, src)
            log.info("wrote %s", src_path)

    if not args.no_figures:
        from .plots import render_figures  # matplotlib import stays lazy

        for path in render_figures(report, args.out):
            log.info("wrote %s", path)
    return report_path


def cmd_compile(args) -> int:
    config = _load_model(args.model)
    spec = _load_fpga(args.fpga)
    if not args.target_fps:
        raise ConfigError("compile needs at least one --target-fps value")
    schedule = expand_model(config)

    results = []
    try:
        baseline = optimize_baseline(schedule, spec)
    except InfeasibleError as err:
        results = [
            CompilationResult(
                target_fps=t, feasible=False, fr_max=0.0, evaluations=0,
                search_trace=(), diagnostic=f"no 16-bit baseline design: {err}",
            )
            for t in args.target_fps
        ]
    else:
        for t in args.target_fps:
            results.append(
                search_precision(schedule, spec, SearchTarget(t),
                                 baseline=baseline)
            )

    _write_outputs(args, results, schedule, spec, with_source=True)
    for result in results:
        if result.feasible:
            print(f"target {result.target_fps:g} FPS: act_bits="
                  f"{result.act_bits}, estimated {result.latency.fps:.2f} FPS "
                  f"({result.evaluations} evaluations)")
        else:
            print(f"target {result.target_fps:g} FPS: infeasible, "
                  f"{result.diagnostic}")
    return EXIT_OK if all(r.feasible for r in results) else EXIT_INFEASIBLE


def cmd_estimate(args) -> int:
    config = _load_model(args.model)
    spec = _load_fpga(args.fpga)
    params = _load_params(args.params)
    schedule = expand_model(config)

    errs = params.alignment_errors()
    try:
        params.validate_for(config.num_heads)
    except ValueError as err:
        errs.append(str(err))
    if errs:
        raise ConfigError("invalid params: " + "; ".join(errs))

    sched = (unquantized_view(schedule)
             if params.act_bits == spec.baseline_bits else schedule)
    latency = model_latency(sched, params, spec)
    usage = resource_usage(params, spec, config.num_heads,
                           schedule.max_seq_len,
                           include_quantized=sched.has_quantized())
    result = CompilationResult(
        target_fps=0.0, feasible=True, fr_max=0.0, evaluations=0,
        search_trace=(), act_bits=params.act_bits, params=params,
        latency=latency, usage=usage,
        constraints=check_constraints(usage, spec),
        layer_costs=tuple((l, layer_cycles(l, params, spec))
                          for l in sched.matmuls()),
    )
    _write_outputs(args, [result], schedule, spec, with_source=False)
    print(f"estimate: act_bits={params.act_bits}, {latency.fps:.2f} FPS, "
          f"dsp={usage.dsp} lut_mac={usage.lut_mac} bram_18k={usage.bram_18k}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load_model(args.model)
    spec = _load_fpga(args.fpga)
    schedule = expand_model(config)

    if args.params:
        params = _load_params(args.params)
    else:
        try:
            baseline = optimize_baseline(schedule, spec)
            params = (baseline if args.bits == spec.baseline_bits else
                      adjust_params(init_params(baseline, spec, args.bits),
                                    spec, schedule))
        except InfeasibleError as err:
            print(f"infeasible at {args.bits}-bit activations: {err}")
            return EXIT_INFEASIBLE

    sched = (unquantized_view(schedule)
             if params.act_bits == spec.baseline_bits else schedule)
    mismatches = 0
    model_total = sim_total = 0
    for layer in sched.matmuls():
        model = layer_cycles(layer, params, spec).total_cycles
        sim = simulate_cycles(layer, params, spec).total_cycles
        model_total += model
        sim_total += sim
        mark = "" if model == sim else "  <-- MISMATCH"
        if args.verbose or model != sim:
            print(f"{layer.name:18s} model={model:10d} sim={sim:10d}{mark}")
        if model != sim:
            mismatches += 1
    print(f"total: model={model_total} sim={sim_total} "
          f"({'agree' if model_total == sim_total and not mismatches else 'DISAGREE'})")
    return EXIT_OK if mismatches == 0 else EXIT_MISMATCH


def cmd_verify(args) -> int:
    engine_cases = args.cases or 150
    cycle_cases = args.cases or 1000
    status = EXIT_OK
    for suite in (run_engine_suite(args.seed, engine_cases),
                  run_cycle_suite(args.seed, cycle_cases)):
        if suite.ok:
            print(f"{suite.name}: PASS ({suite.cases} cases)")
        else:
            print(f"{suite.name}: FAIL ({suite.failures}/{suite.cases} cases)")
            print(f"  first counterexample: {suite.first_failure}")
            status = EXIT_MISMATCH
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vtac",
        description="Compiler and design-space explorer for binary-weight "
                    "vision transformer accelerators.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log written files and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True,
                        help="model config JSON path or preset name")
    common.add_argument("--fpga", required=True,
                        help="fpga spec JSON path or preset name")

    outputs = argparse.ArgumentParser(add_help=False)
    outputs.add_argument("--out", default="vtac-out",
                         help="output directory (default: vtac-out)")
    outputs.add_argument("--no-figures", action="store_true",
                         help="skip rendering PNG figures")

    p = sub.add_parser("compile", parents=[common, outputs],
                       help="search precision per target and emit artifacts")
    p.add_argument("--target-fps", type=float, nargs="+", required=True,
                   help="one or more frame-rate targets")
    p.add_argument("--template", help="override the source skeleton template")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("estimate", parents=[common, outputs],
                       help="evaluate one explicit design without searching")
    p.add_argument("--params", required=True,
                   help="accelerator params JSON file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", parents=[common],
                       help="cycle-level simulator vs analytical model")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--params", help="accelerator params JSON file")
    group.add_argument("--bits", type=int, default=8,
                       help="activation precision to size for (default 8)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify",
                       help="randomized equivalence suites (engine, cycles)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=0,
                   help="case count for both suites (default 150/1000)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="vtac: %(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
