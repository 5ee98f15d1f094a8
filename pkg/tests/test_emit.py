"""Report, CSV and source emission: deterministic output, schema-valid
JSON, and a source skeleton that round-trips its design constants."""

import io
import json
import os
from importlib import resources

import jsonschema
import pytest

from vtac import (
    SearchTarget,
    count_operations,
    emit_accelerator_source,
    emit_layer_csv,
    emit_report,
    parse_source_params,
    render_report,
    search_precision,
    write_text_atomic,
)


@pytest.fixture(scope="module")
def result24(base_schedule, zcu102):
    return search_precision(base_schedule, zcu102, SearchTarget(24.0))


@pytest.fixture(scope="module")
def infeasible_result(base_schedule, zcu102):
    return search_precision(base_schedule, zcu102, SearchTarget(1e9))


@pytest.fixture(scope="module")
def report(result24, infeasible_result, base_schedule, zcu102):
    return emit_report([result24, infeasible_result], base_schedule, zcu102)


def load_schema():
    path = resources.files("vtac") / "schemas/report.schema.json"
    return json.loads(path.read_text())


def test_report_validates_against_shipped_schema(report):
    jsonschema.validate(report, load_schema())


def test_report_top_level_contents(report, zcu102):
    assert report["format_version"] == 1
    assert report["generator"].startswith("vtac ")
    assert report["model"]["matmul_layers"] == 98
    assert report["model"]["operations_per_frame"] == 35127656448
    assert report["fpga"]["name"] == zcu102.name
    assert len(report["assumptions"]) == 6
    assert all(isinstance(a, str) for a in report["assumptions"])


def test_feasible_entry_consistency(report, result24, zcu102):
    entry = report["results"][0]
    assert entry["target_fps"] == 24.0
    assert entry["feasible"] is True
    assert entry["act_bits"] == 7
    assert entry["accelerator"] == result24.params.to_dict()
    assert len(entry["layers"]) == 98
    assert len(entry["search_trace"]) == entry["evaluations"] == 5

    perf = entry["performance"]
    assert perf["cycles"] == result24.latency.cycles
    assert perf["fps"] == pytest.approx(zcu102.clock_hz / perf["cycles"])
    ops = 35127656448
    assert perf["gops"] == pytest.approx(ops * perf["fps"] / 1e9)
    res = entry["resources"]
    assert perf["gops_per_dsp"] == pytest.approx(perf["gops"] / res["dsp"])
    assert perf["gops_per_klut"] == pytest.approx(
        perf["gops"] / (res["lut_mac"] / 1000))
    assert res["bram_36k"] == (res["bram_18k"] + 1) // 2
    assert entry["constraints"]["feasible"] is True
    assert entry["constraints"]["violations"] == []


def test_accumulator_width_covers_longest_dot_product(report):
    # widest quantized reduction is 3072 channels: ceil(log2) = 12, +8 bits
    entry = report["results"][0]
    assert entry["act_bits"] == 7
    assert entry["accumulator_bits"] == 12 + 7


def test_infeasible_entry_reports_ceiling(report):
    entry = report["results"][1]
    assert entry["feasible"] is False
    assert "FR_max" in entry["diagnostic"]
    assert "accelerator" not in entry
    assert entry["evaluations"] == 1


def test_report_layers_sum_to_total(report):
    entry = report["results"][0]
    assert (sum(row["total_cycles"] for row in entry["layers"])
            == entry["performance"]["cycles"])


def test_render_report_is_deterministic(result24, infeasible_result,
                                         base_schedule, zcu102):
    def render():
        rep = emit_report([result24, infeasible_result], base_schedule,
                          zcu102)
        return render_report(rep)

    first, second = render(), render()
    assert first == second
    assert first.endswith("\n")
    assert json.loads(first)  # well formed


def test_layer_csv_shape_and_totals(result24):
    text = emit_layer_csv(result24)
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    assert header[:4] == ["name", "kind", "heads", "out_channels"]
    assert "total_cycles" in header
    assert len(lines) == 1 + 98
    col = header.index("total_cycles")
    total = sum(int(r.split(",")[col]) for r in lines[1:])
    assert total == result24.latency.cycles


def test_layer_csv_requires_feasible_result(infeasible_result):
    with pytest.raises(ValueError):
        emit_layer_csv(infeasible_result)


def test_source_constants_round_trip(result24, base_schedule):
    text = emit_accelerator_source(result24.params, base_schedule)
    assert "{{" not in text
    assert parse_source_params(text) == result24.params
    assert f"constexpr int NUM_LAYERS = 98;" in text
    assert "#pragma HLS" in text


def test_source_packing_comment_states_used_bits(result24, base_schedule):
    from dataclasses import replace

    p6 = replace(result24.params, act_bits=6, pack_q=10, tile_n_q=10,
                 tile_m=120, tile_m_q=120)
    text = emit_accelerator_source(p6, base_schedule)
    assert "10 activations x 6 bits" in text
    assert "60 used bits of each 64-bit port word" in text


def test_source_rejects_unknown_placeholders(result24, base_schedule):
    with pytest.raises(ValueError, match="mystery"):
        emit_accelerator_source(result24.params, base_schedule,
                                template_text="int x = {{mystery}};")


def test_source_layer_table_matches_schedule(result24, base_schedule):
    text = emit_accelerator_source(result24.params, base_schedule)
    matmuls = list(base_schedule.matmuls())
    first, last = matmuls[0], matmuls[-1]
    assert f'{{"{first.name}"' in text
    assert f'{{"{last.name}"' in text


def test_write_text_atomic(tmp_path):
    target = tmp_path / "out" / "report.json"
    target.parent.mkdir()
    write_text_atomic(str(target), "one\n")
    write_text_atomic(str(target), "two\n")  # overwrite in place
    assert target.read_text() == "two\n"
    assert os.listdir(target.parent) == ["report.json"]  # no temp litter
    assert os.stat(target).st_mode & 0o777 == 0o644
