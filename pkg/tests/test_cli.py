"""Command-line interface: exit codes, artifact layout, and consistency
between the compile and estimate paths."""

import contextlib
import io
import json
import shutil

import pytest

from vtac.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_MISMATCH, EXIT_OK, main
from tests.conftest import preset_path

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    run_cli.last_err = err.getvalue()
    return code, out.getvalue()


def test_compile_writes_full_artifact_set(tmp_path):
    out = tmp_path / "build"
    code, text = run_cli("compile", "--model", "deit-base", "--fpga",
                         "zcu102", "--target-fps", "24", "--out", str(out))
    assert code == EXIT_OK
    assert "target 24" in text and "act_bits=7" in text

    report = json.loads((out / "report.json").read_text())
    assert report["results"][0]["act_bits"] == 7
    assert (out / "layer_costs_24fps.csv").exists()
    source = (out / "accelerator_24fps.h").read_text()
    assert "constexpr int ACT_BITS = 7;" in source
    pngs = sorted(p.name for p in out.glob("*.png"))
    assert pngs == ["fps_vs_precision.png", "latency_24fps.png",
                    "resources_24fps.png"]
    for p in out.glob("*.png"):
        assert p.read_bytes()[:8] == PNG_MAGIC


def test_compile_is_reproducible(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code, _ = run_cli("compile", "--model", "deit-base", "--fpga",
                          "zcu102", "--target-fps", "24", "--out", str(out),
                          "--no-figures")
        assert code == EXIT_OK
        outs.append(out)
    for fname in ("report.json", "layer_costs_24fps.csv",
                  "accelerator_24fps.h"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_compile_multiple_targets(tmp_path):
    out = tmp_path / "multi"
    code, _ = run_cli("compile", "--model", "deit-base", "--fpga", "zcu102",
                      "--target-fps", "10", "24", "--out", str(out),
                      "--no-figures")
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert [r["target_fps"] for r in report["results"]] == [10.0, 24.0]
    assert (out / "layer_costs_10fps.csv").exists()
    assert (out / "layer_costs_24fps.csv").exists()


def test_compile_no_figures_skips_pngs(tmp_path):
    out = tmp_path / "nofig"
    code, _ = run_cli("compile", "--model", "deit-base", "--fpga", "zcu102",
                      "--target-fps", "24", "--out", str(out), "--no-figures")
    assert code == EXIT_OK
    assert list(out.glob("*.png")) == []


def test_compile_unreachable_target_exits_infeasible(tmp_path):
    out = tmp_path / "fast"
    code, text = run_cli("compile", "--model", "deit-base", "--fpga",
                         "zcu102", "--target-fps", "1e9", "--out", str(out),
                         "--no-figures")
    assert code == EXIT_INFEASIBLE
    assert "FR_max" in text
    report = json.loads((out / "report.json").read_text())
    assert report["results"][0]["feasible"] is False


def test_unknown_preset_exits_config_error(tmp_path):
    code, _ = run_cli("compile", "--model", "no-such-model", "--fpga",
                      "zcu102", "--target-fps", "24", "--out",
                      str(tmp_path / "x"))
    assert code == EXIT_CONFIG
    assert "no-such-model" in run_cli.last_err


def test_malformed_model_file_exits_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _ = run_cli("compile", "--model", str(bad), "--fpga", "zcu102",
                      "--target-fps", "24", "--out", str(tmp_path / "x"))
    assert code == EXIT_CONFIG


def test_preset_dir_override(tmp_path, monkeypatch):
    shutil.copy(preset_path("deit-tiny"), tmp_path / "house-model.json")
    monkeypatch.setenv("VTAC_PRESET_DIR", str(tmp_path))
    out = tmp_path / "o"
    code, _ = run_cli("compile", "--model", "house-model", "--fpga",
                      "zcu102", "--target-fps", "24", "--out", str(out),
                      "--no-figures")
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["model"]["name"] == "deit-tiny"


def test_estimate_matches_compile_choice(tmp_path, params8_file):
    out = tmp_path / "est"
    code, _ = run_cli("estimate", "--model", "deit-base", "--fpga", "zcu102",
                      "--params", params8_file, "--out", str(out),
                      "--no-figures")
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    entry = report["results"][0]
    assert entry["target_fps"] is None  # plain estimate, no search
    assert entry["performance"]["cycles"] == 6269747
    assert entry["resources"]["dsp"] == 1792
    assert (out / "layer_costs_estimate.csv").exists()


def test_estimate_rejects_misaligned_params(tmp_path):
    params = {"tile_m": 114, "tile_n": 4, "tile_m_q": 200, "tile_n_q": 8,
              "pack": 4, "pack_q": 8, "head_par": 4, "act_bits": 8}
    pfile = tmp_path / "p.json"
    pfile.write_text(json.dumps(params))
    code, _ = run_cli("estimate", "--model", "deit-base", "--fpga", "zcu102",
                      "--params", str(pfile), "--out", str(tmp_path / "x"))
    assert code == EXIT_CONFIG


def test_simulate_agrees_with_model():
    code, text = run_cli("simulate", "--model", "deit-base", "--fpga",
                         "zcu102", "--bits", "8")
    assert code == EXIT_OK
    assert "agree" in text
    assert "6269747" in text.replace(",", "")


def test_verify_suites_pass():
    code, text = run_cli("verify", "--seed", "1", "--cases", "40")
    assert code == EXIT_OK
    assert text.count("PASS") == 2
