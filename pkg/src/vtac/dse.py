"""Design-space exploration.

Sizing happens in three stages:

1. ``optimize_baseline`` grid-searches the 16-bit tile sizes that minimize
   whole-frame cycles for the unquantized model under the DSP and block-RAM
   budgets.  The baseline design is what ships when no quantization is
   needed, and its tile sizes seed every quantized design.
2. ``init_params`` / ``adjust_params`` derive a quantized design for one
   activation precision: packing factors follow from the precision, the
   quantized input tile grows with the packing gain, and the output tile
   widths are nudged onto packing-aligned values and then re-balanced
   against the budgets (shrink the 16-bit tile while DSPs overflow, shrink
   the quantized tile while LUTs or block RAM overflow, then grow the
   quantized output tile as long as a feasible step lowers total cycles).
3. ``search_precision`` picks the largest activation precision whose
   estimated frame rate still meets the target, by bisection over the
   1..16-bit range with a feasibility probe at 1 bit.  Estimated frame rate
   never improves with more bits, so bisection needs at most four rounds;
   a monotonicity guard falls back to a full linear scan if the cached
   evaluations ever contradict that assumption.

The highest precision doubles as the no-quantization case: at the baseline
bit width the model runs entirely on the 16-bit datapath with the baseline
tile sizes, so its estimate equals the baseline's by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .model import LayerSchedule, unquantized_view
from .perf import (
    AcceleratorParams,
    ConstraintReport,
    FpgaSpec,
    LatencySummary,
    LayerCost,
    baseline_params,
    check_constraints,
    layer_cycles,
    model_latency,
    pack_factor,
    resource_usage,
)


class InfeasibleError(Exception):
    """No parameter choice satisfies the resource budget."""


@dataclass(frozen=True)
class SearchTarget:
    target_fps: float

    def __post_init__(self):
        if not self.target_fps > 0:
            raise ValueError(f"target_fps must be positive, got {self.target_fps}")


@dataclass(frozen=True)
class PrecisionEval:
    """One evaluated precision during the search."""

    act_bits: int
    feasible: bool
    fps: float
    params: AcceleratorParams | None
    note: str = ""


@dataclass(frozen=True)
class CompilationResult:
    """Outcome of compiling one frame-rate target."""

    target_fps: float
    feasible: bool
    fr_max: float
    evaluations: int
    search_trace: tuple[PrecisionEval, ...]
    act_bits: int | None = None
    params: AcceleratorParams | None = None
    latency: LatencySummary | None = None
    usage: object = None
    constraints: ConstraintReport | None = None
    layer_costs: tuple = ()
    diagnostic: str = ""


def head_parallelism(heads: int) -> int:
    """Head groups computed in parallel: the largest divisor of the head
    count not exceeding 4 (e.g. 3 heads -> 3, 6 -> 3, 8 or 12 -> 4)."""
    return max(d for d in range(1, min(heads, 4) + 1) if heads % d == 0)


def _schedule_cycles(schedule: LayerSchedule, params: AcceleratorParams,
                     spec: FpgaSpec) -> int:
    return sum(layer_cycles(l, params, spec).total_cycles
               for l in schedule.matmuls())


def _round_up(v: int, step: int) -> int:
    return -(-v // step) * step


def optimize_baseline(schedule: LayerSchedule, spec: FpgaSpec) -> AcceleratorParams:
    """Grid-search 16-bit tile sizes minimizing whole-frame cycles.

    Candidates are multiples of the packing factor up to the layer dims;
    ties break toward the smaller output tile, then the smaller input tile.
    The quantized datapath is absent from the baseline design, so only the
    DSP and block-RAM budgets apply.
    """
    unq = unquantized_view(schedule)
    matmuls = list(unq.matmuls())
    if not matmuls:
        raise ValueError("schedule contains no matmul layers")
    g = pack_factor(spec.port_bits, spec.baseline_bits)
    ph = head_parallelism(schedule.config.num_heads)
    seq = unq.max_seq_len
    heads = schedule.config.num_heads

    m_cap = _round_up(max(l.out_channels for l in matmuls), g)
    n_cap = _round_up(max(l.per_head_in for l in matmuls), g)
    dsp_budget = int(spec.dsp * spec.dsp_ratio)

    best = None
    for tile_m in range(g, m_cap + 1, g):
        if tile_m * ph * g > dsp_budget:
            break  # even the narrowest input tile no longer fits
        for tile_n in range(g, n_cap + 1, g):
            if tile_m * ph * tile_n > dsp_budget:
                break
            params = baseline_params(tile_m, tile_n, spec, ph)
            usage = resource_usage(params, spec, heads, seq,
                                   include_quantized=False)
            if not check_constraints(usage, spec):
                continue
            key = (_schedule_cycles(unq, params, spec), tile_m, tile_n)
            if best is None or key < best[0]:
                best = (key, params)
    if best is None:
        raise InfeasibleError(
            "no 16-bit tile size satisfies the DSP and block-RAM budgets"
        )
    return best[1]


def _nearest_multiple(value: int, step: int) -> int:
    """Nearest positive multiple of step; ties toward the smaller one."""
    lo = (value // step) * step
    hi = lo + step
    if lo < step:
        return hi
    return lo if value - lo <= hi - value else hi


def init_params(baseline: AcceleratorParams, spec: FpgaSpec,
                act_bits: int) -> AcceleratorParams:
    """Initial quantized design for one activation precision.

    The quantized input tile scales with the packing gain so a packed input
    row occupies the same number of port words on either datapath; output
    tile widths move to the nearest multiple of lcm(pack, pack_q) so stored
    tiles pack evenly, and the quantized output tile starts equal to the
    16-bit one.
    """
    if act_bits == spec.baseline_bits:
        return baseline
    gq = pack_factor(spec.port_bits, act_bits)
    g = baseline.pack
    step = math.lcm(g, gq)
    tile_m = _nearest_multiple(baseline.tile_m, step)
    return replace(
        baseline,
        tile_m=tile_m,
        tile_m_q=tile_m,
        tile_n_q=baseline.tile_n * gq // g,
        pack_q=gq,
        act_bits=act_bits,
    )


def adjust_params(params: AcceleratorParams, spec: FpgaSpec,
                  schedule: LayerSchedule) -> AcceleratorParams:
    """Re-balance tile widths against the resource budgets.

    Repair passes shrink the 16-bit output tile while DSPs overflow and the
    quantized output tile while LUTs or block RAM overflow, one packing-
    aligned step at a time.  A growth pass then widens the quantized output
    tile to whichever feasible aligned value minimizes whole-frame cycles
    (ties toward the narrower tile, so designs that cannot improve stay
    put).  Raises InfeasibleError when no repair reaches feasibility.
    """
    heads = schedule.config.num_heads
    seq = schedule.max_seq_len
    quantized = schedule.has_quantized()
    step = math.lcm(params.pack, params.pack_q)

    def usage_of(p):
        return resource_usage(p, spec, heads, seq, include_quantized=quantized)

    dsp_budget = int(spec.dsp * spec.dsp_ratio)
    lut_budget = int(spec.lut * spec.lut_ratio)

    while usage_of(params).dsp > dsp_budget and params.tile_m > step:
        params = replace(params, tile_m=params.tile_m - step)
    while usage_of(params).lut_mac > lut_budget and params.tile_m_q > step:
        params = replace(params, tile_m_q=params.tile_m_q - step)
    while usage_of(params).bram_18k > spec.bram_18k:
        if params.tile_m_q > step:
            params = replace(params, tile_m_q=params.tile_m_q - step)
        elif params.tile_m > step:
            params = replace(params, tile_m=params.tile_m - step)
        else:
            break
    if not check_constraints(usage_of(params), spec):
        raise InfeasibleError(
            f"budget unsatisfiable at minimum tiles for act_bits="
            f"{params.act_bits}: {check_constraints(usage_of(params), spec).violations}"
        )

    quant_m = [l.out_channels for l in schedule.matmuls() if l.quant_out]
    if not quant_m:
        return params
    cap = max(_round_up(max(quant_m), step), params.tile_m_q)
    best = (_schedule_cycles(schedule, params, spec), params.tile_m_q)
    for tile_m_q in range(params.tile_m_q + step, cap + 1, step):
        cand = replace(params, tile_m_q=tile_m_q)
        if not check_constraints(usage_of(cand), spec):
            continue
        key = (_schedule_cycles(schedule, cand, spec), tile_m_q)
        if key < best:
            best = key
    return replace(params, tile_m_q=best[1])


def search_precision(schedule: LayerSchedule, spec: FpgaSpec,
                     target: SearchTarget,
                     baseline: AcceleratorParams | None = None) -> CompilationResult:
    """Pick the largest activation precision meeting the frame-rate target.

    A probe at 1 bit establishes the highest reachable frame rate; targets
    above it are reported infeasible.  Bisection then finds the boundary
    precision in at most four more evaluations.  Every evaluation is cached
    and counted once.

    The bisection assumes 1 bit is buildable and frame rate never improves
    with more bits.  When either breaks (narrow precisions can exceed the
    LUT budget because the packing relation widens the quantized input
    tile), the search degrades to evaluating every precision once and
    returns the widest one that meets the target.
    """
    if baseline is None:
        baseline = optimize_baseline(schedule, spec)
    heads = schedule.config.num_heads
    seq = schedule.max_seq_len
    top = spec.baseline_bits

    cache: dict[int, PrecisionEval] = {}
    trace: list[PrecisionEval] = []

    def evaluate(bits: int) -> PrecisionEval:
        if bits in cache:
            return cache[bits]
        if bits == top:
            sched, params = unquantized_view(schedule), baseline
        else:
            sched = schedule
            try:
                params = adjust_params(init_params(baseline, spec, bits),
                                       spec, sched)
            except InfeasibleError as err:
                ev = PrecisionEval(bits, False, 0.0, None, note=str(err))
                cache[bits] = ev
                trace.append(ev)
                return ev
        fps = model_latency(sched, params, spec).fps
        ev = PrecisionEval(bits, True, fps, params)
        cache[bits] = ev
        trace.append(ev)
        return ev

    def finish(bits: int | None) -> CompilationResult:
        fr_max = max((e.fps for e in cache.values() if e.feasible),
                     default=0.0)
        if bits is None:
            if not cache[1].feasible:
                diag = (f"target {target.target_fps:g} FPS exceeds the "
                        f"frame-rate ceiling FR_max = {fr_max:.3f} FPS "
                        f"(1-bit designs exceed the resource budget: "
                        f"{cache[1].note})")
            else:
                diag = (f"target {target.target_fps:g} FPS exceeds the 1-bit "
                        f"frame-rate ceiling FR_max = {fr_max:.3f} FPS")
            return CompilationResult(
                target_fps=target.target_fps,
                feasible=False,
                fr_max=fr_max,
                evaluations=len(trace),
                search_trace=tuple(trace),
                diagnostic=diag,
            )
        ev = cache[bits]
        sched = unquantized_view(schedule) if bits == top else schedule
        latency = model_latency(sched, ev.params, spec)
        usage = resource_usage(ev.params, spec, heads, seq,
                               include_quantized=sched.has_quantized())
        costs = tuple((l, layer_cycles(l, ev.params, spec))
                      for l in sched.matmuls())
        return CompilationResult(
            target_fps=target.target_fps,
            feasible=True,
            fr_max=fr_max,
            evaluations=len(trace),
            search_trace=tuple(trace),
            act_bits=bits,
            params=ev.params,
            latency=latency,
            usage=usage,
            constraints=check_constraints(usage, spec),
            layer_costs=costs,
        )

    probe = evaluate(1)
    if not probe.feasible:
        # 16-bit always fits once the baseline exists, so scan the ladder
        for bits in range(2, top + 1):
            evaluate(bits)
        qualifying = [b for b, ev in cache.items()
                      if ev.feasible and ev.fps >= target.target_fps]
        return finish(max(qualifying) if qualifying else None)
    if probe.fps < target.target_fps:
        return finish(None)

    lo, hi = 1, top
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if evaluate(mid).fps >= target.target_fps:
            lo = mid
        else:
            hi = mid - 1

    # Guard: the bisection assumed frame rate never improves with more
    # bits.  If the cached evaluations contradict that, or the boundary
    # condition does not hold, fall back to scanning every precision.
    ordered = sorted(cache.values(), key=lambda e: e.act_bits)
    monotone = all(a.fps >= b.fps - 1e-9
                   for a, b in zip(ordered, ordered[1:]))
    boundary_ok = lo == top or evaluate(lo + 1).fps < target.target_fps
    if not (monotone and boundary_ok):
        for bits in range(1, top + 1):
            evaluate(bits)
        feasible_bits = [b for b in range(1, top + 1)
                         if cache[b].fps >= target.target_fps]
        return finish(max(feasible_bits))
    return finish(lo)
