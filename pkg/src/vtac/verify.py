"""Independent oracles and randomized equivalence suites.

Everything here deliberately avoids the implementations it checks: the
matmul oracle is a per-head plain integer product, the float transformer
reference is written directly from the textbook formulation, and the cycle
suite compares the event-driven simulator against the closed-form model.
The ``verify`` CLI subcommand drives the two randomized suites; the test
suite reuses them with fixed seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cyclesim import simulate_cycles
from .engine import BinarizedWeights, QuantizedTensor, simulate_matmul_engine
from .forward import _gelu, _layernorm, _softmax, extract_patches
from .model import LayerKind, MatMulLayer, ViTConfig
from .perf import AcceleratorParams, FpgaSpec, layer_cycles


def naive_matmul(x: np.ndarray, w: np.ndarray, kind: LayerKind,
                 heads: int) -> np.ndarray:
    """Plain integer product, one head at a time.

    FC: (seq, in) x (out, in) -> (seq, out).  Attention: (heads, seq, per)
    x (heads, out, per) -> (heads, seq, out), never summed across heads.
    """
    x = np.asarray(x, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    if kind is LayerKind.FC:
        return x @ w.T
    return np.stack([x[h] @ w[h].T for h in range(heads)])


def reference_forward(config: ViTConfig, weights: dict,
                      image: np.ndarray) -> np.ndarray:
    """Float64 transformer forward written independently of the engine."""
    heads, hd = config.num_heads, config.head_dim

    x = extract_patches(config, image) @ weights["patch_embed"]["w"].T
    x = x + weights["patch_embed"]["b"]
    x = np.vstack([weights["cls"][None, :], x]) + weights["pos"]

    for i in range(config.depth):
        wb = weights[f"enc{i}"]
        y = _layernorm(x, wb["norm1"]["gamma"], wb["norm1"]["beta"])
        q = (y @ wb["q"]["w"].T + wb["q"]["b"]).reshape(-1, heads, hd)
        k = (y @ wb["k"]["w"].T + wb["k"]["b"]).reshape(-1, heads, hd)
        v = (y @ wb["v"]["w"].T + wb["v"]["b"]).reshape(-1, heads, hd)
        att = np.einsum("fhd,ghd->hfg", q, k) / math.sqrt(hd)
        ctx = np.einsum("hfg,ghd->fhd", _softmax(att), v).reshape(x.shape[0], -1)
        x = x + ctx @ wb["proj"]["w"].T + wb["proj"]["b"]
        y = _layernorm(x, wb["norm2"]["gamma"], wb["norm2"]["beta"])
        h1 = _gelu(y @ wb["fc1"]["w"].T + wb["fc1"]["b"])
        x = x + h1 @ wb["fc2"]["w"].T + wb["fc2"]["b"]

    x = _layernorm(x, weights["norm"]["gamma"], weights["norm"]["beta"])
    return x[0] @ weights["head"]["w"].T + weights["head"]["b"]


@dataclass
class SuiteResult:
    name: str
    cases: int
    failures: int
    first_failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failures == 0


def _random_engine_case(rng: np.random.Generator):
    kind = [LayerKind.FC, LayerKind.ATTN_SCORE, LayerKind.ATTN_CONTEXT][
        int(rng.integers(3))
    ]
    heads = int(rng.choice([1, 2, 3, 4]))
    per_head = int(rng.integers(1, 17))
    out_ch = int(rng.integers(1, 65))
    seq = int(rng.integers(1, 17))
    if kind is LayerKind.FC:
        # uneven widths exercise the zero-padding of the last head group
        in_ch = int(rng.integers(1, 65))
        per_head = -(-in_ch // heads)
    else:
        in_ch = heads * per_head
    quant = bool(rng.integers(2))
    layer = MatMulLayer("case", kind, out_ch, in_ch, seq, heads,
                        quant_in=quant, quant_out=quant)

    # three packing geometries; values must be identical under all of them
    pack, pack_q, bits = [(4, 8, 8), (4, 10, 6), (2, 16, 4)][int(rng.integers(3))]
    tile = int(rng.integers(1, out_ch + 1))
    tile_n = int(rng.integers(1, per_head + 1))
    divisors = [d for d in range(1, heads + 1) if heads % d == 0]
    params = AcceleratorParams(
        tile_m=tile, tile_n=tile_n, tile_m_q=tile, tile_n_q=tile_n,
        pack=pack, pack_q=pack_q,
        head_par=int(rng.choice(divisors)), act_bits=bits,
    )

    if kind is LayerKind.FC:
        codes = rng.integers(-127, 128, size=(seq, in_ch))
        wsigns = rng.choice([-1, 1], size=(out_ch, in_ch))
        weights = BinarizedWeights(wsigns.astype(np.int8), float(rng.uniform(0.01, 2)))
        oracle_w = wsigns
        # padded columns of the last head group contribute zero
        pad = heads * per_head - in_ch
        if pad:
            codes_o = np.hstack([codes, np.zeros((seq, pad), dtype=np.int64)])
            oracle_w = np.hstack([wsigns, np.zeros((out_ch, pad), dtype=np.int64)])
        else:
            codes_o = codes
        expected = naive_matmul(codes_o, oracle_w, kind, heads)
    else:
        codes = rng.integers(-127, 128, size=(heads, seq, per_head))
        wcodes = rng.integers(-127, 128, size=(heads, out_ch, per_head))
        weights = QuantizedTensor(wcodes.astype(np.int64),
                                  float(rng.uniform(0.01, 2)), bits)
        expected = naive_matmul(codes, wcodes, kind, heads)

    inputs = QuantizedTensor(codes.astype(np.int64), float(rng.uniform(0.01, 2)),
                             bits)
    return layer, params, inputs, weights, expected


def run_engine_suite(seed: int, cases: int) -> SuiteResult:
    """Tiled engine vs naive oracle, bit-identical integer results."""
    rng = np.random.default_rng(seed)
    failures = 0
    first = None
    for i in range(cases):
        layer, params, inputs, weights, expected = _random_engine_case(rng)
        got, scale = simulate_matmul_engine(layer, params, inputs, weights)
        w_scale = weights.scale
        if not np.array_equal(got, expected) or scale != inputs.scale * w_scale:
            failures += 1
            if first is None:
                first = (f"case {i}: layer={layer} params={params.to_dict()} "
                         f"max|diff|={np.max(np.abs(got - expected))}")
    return SuiteResult("engine-vs-oracle", cases, failures, first)


def _random_cycle_case(rng: np.random.Generator):
    port_bits = int(rng.choice([32, 64, 128]))
    bits = int(rng.integers(1, 17))
    spec = FpgaSpec(
        name="rand", port_bits=port_bits,
        in_ports=int(rng.integers(1, 5)), wgt_ports=int(rng.integers(1, 5)),
        out_ports=int(rng.integers(1, 5)),
    )
    pack = port_bits // 16
    pack_q = port_bits // bits
    step = math.lcm(pack, pack_q)
    kind = [LayerKind.FC, LayerKind.ATTN_SCORE, LayerKind.ATTN_CONTEXT][
        int(rng.integers(3))
    ]
    heads = int(rng.choice([1, 2, 3, 4, 6, 8, 12]))
    if kind is LayerKind.FC:
        in_ch = int(rng.integers(1, 513))
    else:
        in_ch = heads * int(rng.integers(1, 1 + 512 // heads))
    out_ch = int(rng.integers(1, 513))
    seq = int(rng.integers(1, 513))
    quant_in = bool(rng.integers(2))
    quant_out = bool(rng.integers(2))
    layer = MatMulLayer("case", kind, out_ch, in_ch, seq, heads,
                        quant_in=quant_in, quant_out=quant_out)
    divisors = [d for d in range(1, heads + 1) if heads % d == 0]
    params = AcceleratorParams(
        tile_m=step * int(rng.integers(1, 9)),
        tile_n=int(rng.integers(1, 129)),
        tile_m_q=step * int(rng.integers(1, 9)),
        tile_n_q=int(rng.integers(1, 129)),
        pack=pack, pack_q=pack_q,
        head_par=int(rng.choice(divisors)), act_bits=bits,
    )
    return layer, params, spec


def run_cycle_suite(seed: int, cases: int) -> SuiteResult:
    """Event-driven simulator vs closed-form model, exact totals."""
    rng = np.random.default_rng(seed)
    failures = 0
    first = None
    for i in range(cases):
        layer, params, spec = _random_cycle_case(rng)
        model = layer_cycles(layer, params, spec).total_cycles
        sim = simulate_cycles(layer, params, spec).total_cycles
        if model != sim:
            failures += 1
            if first is None:
                first = (f"case {i}: model={model} sim={sim} layer={layer} "
                         f"params={params.to_dict()}")
    return SuiteResult("cycles-vs-model", cases, failures, first)
