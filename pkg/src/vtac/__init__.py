"""vtac: compiler and design-space explorer for binary-weight vision
transformer accelerators on FPGAs.

The toolchain takes a transformer structure, an FPGA resource budget and a
target frame rate, picks the lowest-effort activation precision that still
meets the target, sizes the accelerator (tile sizes, packing factors, head
parallelism) and emits a compilation report plus an HLS-style source
skeleton.  Built-in functional and cycle-level simulators validate the
analytical model.
"""

__version__ = "0.1.0"

from .model import (
    HostKind,
    HostOp,
    LayerKind,
    LayerSchedule,
    MatMulLayer,
    ViTConfig,
    convert_patch_embed,
    count_operations,
    expand_model,
    unquantized_view,
)
from .perf import (
    AcceleratorParams,
    ConstraintReport,
    FpgaSpec,
    LatencySummary,
    LayerCost,
    ResourceUsage,
    check_constraints,
    layer_cycles,
    model_latency,
    pack_factor,
    resource_usage,
)
from .dse import (
    CompilationResult,
    InfeasibleError,
    PrecisionEval,
    SearchTarget,
    adjust_params,
    head_parallelism,
    init_params,
    optimize_baseline,
    search_precision,
)
from .emit import (
    emit_accelerator_source,
    emit_layer_csv,
    emit_report,
    parse_source_params,
    render_report,
    write_text_atomic,
)
from .forward import generate_vit_weights, run_encoder_forward
from .verify import (
    naive_matmul,
    reference_forward,
    run_cycle_suite,
    run_engine_suite,
)
from .engine import (
    BinarizedWeights,
    QuantizedTensor,
    binarize_weights,
    dequantize,
    quantize_activations,
    simulate_matmul_engine,
)
from .cyclesim import CycleResult, TileEvent, simulate_cycles
