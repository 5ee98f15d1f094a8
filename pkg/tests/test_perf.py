"""Performance model: packing, cycle counts, resources, constraints.

The toy-layer cycle breakdowns are hand evaluations of the timing
equations, frozen before comparing against layer_cycles."""

import pytest
from hypothesis import given, settings, strategies as st

from vtac import (
    AcceleratorParams,
    FpgaSpec,
    LayerKind,
    LayerSchedule,
    MatMulLayer,
    ViTConfig,
    check_constraints,
    count_operations,
    layer_cycles,
    model_latency,
    pack_factor,
    resource_usage,
)

# single-port streams make the toy numbers tiny
TOY_SPEC = FpgaSpec(name="toy", in_ports=1, wgt_ports=1, out_ports=1)

TOY_CFG = ViTConfig(image_height=4, image_width=4, in_channels=1,
                    patch_size=4, embed_dim=8, depth=1, num_heads=1,
                    num_classes=2, name="toy")


def _toy_layer(quant: bool) -> MatMulLayer:
    return MatMulLayer("toy", LayerKind.FC, out_channels=8, in_channels=8,
                       seq_len=4, heads=1, quant_in=quant, quant_out=quant)


def _toy_params(**kw) -> AcceleratorParams:
    base = dict(tile_m=4, tile_n=4, tile_m_q=4, tile_n_q=4,
                pack=4, pack_q=4, head_par=1, act_bits=16)
    base.update(kw)
    return AcceleratorParams(**base)


def test_pack_factor_table():
    assert pack_factor(64, 16) == 4
    assert pack_factor(64, 8) == 8
    assert pack_factor(64, 6) == 10  # 60 of 64 bits carry data
    assert pack_factor(64, 64) == 1
    assert pack_factor(64, 1) == 64


def test_pack_factor_rejects_oversized_values():
    with pytest.raises(ValueError):
        pack_factor(64, 65)
    with pytest.raises(ValueError):
        pack_factor(64, 0)


@settings(max_examples=100, deadline=None)
@given(port=st.integers(1, 128), bits=st.integers(1, 128))
def test_pack_factor_is_floor_division(port, bits):
    if bits > port:
        with pytest.raises(ValueError):
            pack_factor(port, bits)
    else:
        assert pack_factor(port, bits) == port // bits


def test_toy_unquantized_breakdown():
    # hand evaluation: J_in = 1*ceil(4/4)*ceil(4/1) = 4; J_wgt = 1*1*4 = 4
    # J_cmpt = 4*1 = 4; J_out = 1*ceil(4/4)*ceil(4/1) = 4
    # J_s = max(4*ceil(8/(1*4)) + 4, 4) = 12; J_i = ceil(8/4)*12 + 4 = 28
    cost = layer_cycles(_toy_layer(False), _toy_params(), TOY_SPEC)
    assert cost.input_cycles == 4
    assert cost.weight_cycles == 4
    assert cost.compute_cycles == 4
    assert cost.output_cycles == 4
    assert cost.groups == 2
    assert cost.tile_cycles == 12
    assert cost.tiles == 2
    assert cost.total_cycles == 28


def test_toy_quantized_breakdown():
    # quantized branch with T_n^q=8, T_m^q=8, G^q=8:
    # J_in = 1*ceil(8/8)*4 = 4; J_s = max(4*1 + 4, 4) = 8
    # J_i = ceil(8/8)*8 + 4 = 12
    params = _toy_params(tile_m_q=8, tile_n_q=8, pack_q=8, act_bits=8)
    cost = layer_cycles(_toy_layer(True), params, TOY_SPEC)
    assert cost.input_cycles == 4
    assert cost.groups == 1
    assert cost.tile_cycles == 8
    assert cost.tiles == 1
    assert cost.total_cycles == 12


def test_attention_output_burst_scales_with_heads():
    # attention stores every head: J_out carries (1 + (N_h - 1))
    fc = MatMulLayer("fc", LayerKind.FC, 4, 8, 4, heads=2)
    attn = MatMulLayer("attn", LayerKind.ATTN_SCORE, 4, 8, 4, heads=2)
    params = _toy_params()
    fc_cost = layer_cycles(fc, params, TOY_SPEC)
    attn_cost = layer_cycles(attn, params, TOY_SPEC)
    assert attn_cost.output_cycles == 2 * fc_cost.output_cycles


def test_layer_cost_internal_invariants():
    cost = layer_cycles(_toy_layer(False), _toy_params(), TOY_SPEC)
    assert cost.tile_cycles >= cost.output_cycles
    assert cost.total_cycles >= cost.tile_cycles
    assert cost.tile_cycles >= max(cost.input_cycles, cost.weight_cycles,
                                   cost.compute_cycles)


def test_head_parallelism_divides_or_raises():
    layer = MatMulLayer("x", LayerKind.FC, 4, 8, 4, heads=3)
    with pytest.raises(ValueError, match="head"):
        layer_cycles(layer, _toy_params(head_par=2), TOY_SPEC)


def test_resource_usage_frozen_example():
    # B_in = 2*1*ceil(4/4)*ceil(4*4*16/18432) = 2, same for wgt and out
    params = _toy_params()
    usage = resource_usage(params, TOY_SPEC, heads=1, seq_len=4,
                           include_quantized=False)
    assert usage.bram_in == 2
    assert usage.bram_wgt == 2
    assert usage.bram_out == 2
    assert usage.bram_18k == 6
    assert usage.dsp == 16  # T_m * P_h * T_n
    assert usage.lut_mac == 0


def test_resource_usage_quantized_lut():
    params = _toy_params(tile_m_q=8, tile_n_q=8, pack_q=8, act_bits=8)
    usage = resource_usage(params, TOY_SPEC, heads=1, seq_len=4)
    assert usage.lut_mac == TOY_SPEC.lut_per_mac * 8 * 1 * 8


def test_unit_tile_uses_one_dsp():
    params = _toy_params(tile_m=1, tile_n=1, tile_m_q=1, tile_n_q=1)
    usage = resource_usage(params, TOY_SPEC, heads=1, seq_len=4,
                           include_quantized=False)
    assert usage.dsp == 1


@settings(max_examples=60, deadline=None)
@given(tile_n=st.integers(1, 64), seq=st.integers(1, 256),
       heads=st.sampled_from([1, 2, 4]))
def test_input_buffer_monotone_in_tile_width(tile_n, seq, heads):
    def bram_in(tn):
        params = _toy_params(tile_m=4, tile_n=tn, tile_m_q=4, tile_n_q=tn)
        return resource_usage(params, TOY_SPEC, heads=heads, seq_len=seq,
                              include_quantized=False).bram_in

    assert bram_in(2 * tile_n) >= bram_in(tile_n)


def test_check_constraints_verdicts():
    spec = FpgaSpec(name="t", dsp=2520, lut=274000, bram_18k=1824,
                    dsp_ratio=1.0, lut_ratio=1.0)
    usage = resource_usage(_toy_params(), spec, heads=1, seq_len=4,
                           include_quantized=False)
    report = check_constraints(usage, spec)
    assert report.feasible and not report.violations
    assert report.slack["dsp"] == 2520 - 16
    assert report.slack["bram_18k"] == 1824 - 6

    tiny = FpgaSpec(name="tiny", dsp=8, dsp_ratio=1.0)
    verdict = check_constraints(
        resource_usage(_toy_params(), tiny, heads=1, seq_len=4,
                       include_quantized=False), tiny)
    assert not verdict.feasible
    assert any("dsp" in v for v in verdict.violations)


def _single_layer_schedule() -> LayerSchedule:
    return LayerSchedule(config=TOY_CFG, items=(_toy_layer(False),))


def test_model_latency_frozen_single_layer():
    # one layer of J_i = 28 at 150 MHz
    lat = model_latency(_single_layer_schedule(), _toy_params(), TOY_SPEC)
    assert lat.cycles == 28
    assert lat.seconds == pytest.approx(1.8667e-7, rel=1e-4)
    assert lat.fps == pytest.approx(5.357e6, rel=1e-3)


def test_model_latency_gops_identity(base_schedule, zcu102):
    params = AcceleratorParams(tile_m=112, tile_n=4, tile_m_q=200,
                               tile_n_q=8, pack=4, pack_q=8, head_par=4,
                               act_bits=8)
    lat = model_latency(base_schedule, params, zcu102)
    assert lat.gops == count_operations(base_schedule) * lat.fps / 1e9


def test_model_latency_rejects_empty_schedule():
    empty = LayerSchedule(config=TOY_CFG, items=())
    with pytest.raises(ValueError, match="no matmul"):
        model_latency(empty, _toy_params(), TOY_SPEC)


def test_port_streams_speed_up_transfers():
    wide = FpgaSpec(name="wide", in_ports=4, wgt_ports=4, out_ports=4)
    slow = layer_cycles(_toy_layer(False), _toy_params(), TOY_SPEC)
    fast = layer_cycles(_toy_layer(False), _toy_params(), wide)
    assert fast.input_cycles <= slow.input_cycles
    assert fast.total_cycles <= slow.total_cycles
