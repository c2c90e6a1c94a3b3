import json
import subprocess
import sys

import numpy as np
import pytest

from ajdc import io
from ajdc.cli import main
from ajdc.pipeline import assemble_model, whitening_from_total
from ajdc.diagset import from_matrices


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--kind", "ar", "--sensors", "4", "--length", "4096",
                 "--seed", "3", "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def model_dir(sim_dir, tmp_path_factory):
    d = tmp_path_factory.mktemp("sep")
    assert main(["separate", str(sim_dir / "recording.csv"), "--band", "1:40",
                 "--out", str(d)]) == 0
    return d


def test_simulate_is_byte_identical(tmp_path, sim_dir):
    assert main(["simulate", "--kind", "ar", "--sensors", "4", "--length", "4096",
                 "--seed", "3", "--out", str(tmp_path)]) == 0
    for name in ("recording.csv", "recording.json", "sources.csv", "truth.json"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes()


def test_simulate_kinds(tmp_path):
    assert main(["simulate", "--kind", "envelope", "--sensors", "3", "--length", "2048",
                 "--binary", "--out", str(tmp_path / "e")]) == 0
    rec = io.read_recording(tmp_path / "e" / "recording.bin")
    assert rec.channels.shape == (3, 2048) and len(rec.intervals()) == 4
    assert main(["simulate", "--kind", "condition", "--sensors", "2", "--length", "2048",
                 "--out", str(tmp_path / "c")]) == 0
    assert io.read_recording(tmp_path / "c" / "recording.csv").condition_labels == (1, 2, 1, 2)


def test_separate_outputs(model_dir):
    for name in ("model.json", "components.csv", "spectra.csv", "trace.csv", "set/set.json"):
        assert (model_dir / name).exists()
    model = json.loads((model_dir / "model.json").read_text())
    assert model["provenance"]["converged"] is True
    assert len(model["provenance"]["set_sha256"]) == 64


def test_evaluate_reports_good_separation(sim_dir, model_dir, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["evaluate", "--model", str(model_dir / "model.json"), "--truth", str(sim_dir),
                 "--recording", str(sim_dir / "recording.csv"), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["performance_index"] < 0.05
    assert min(rep["correlations"]) > 0.99
    assert sorted(rep["permutation"]) == [0, 1, 2, 3]


def _model_file(path, B):
    dset = from_matrices([np.eye(B.shape[1])])
    red = whitening_from_total(dset, B.shape[0])
    # F is an orthogonal (permutation) matrix here, so E = B F^T gives E F = B
    m = assemble_model(B @ red.F.T, red, np.eye(B.shape[1]))
    io.write_model(m, path)


def test_evaluate_perfect_and_random_models(sim_dir, tmp_path):
    truth = io.read_truth(sim_dir)
    _model_file(tmp_path / "perfect.json", np.linalg.inv(truth.mixing))
    assert main(["evaluate", "--model", str(tmp_path / "perfect.json"), "--truth", str(sim_dir),
                 "--out", str(tmp_path / "p.json")]) == 0
    assert json.loads((tmp_path / "p.json").read_text())["performance_index"] < 1e-10
    rand = np.random.default_rng(0).standard_normal((4, 4))
    _model_file(tmp_path / "rand.json", rand)
    assert main(["evaluate", "--model", str(tmp_path / "rand.json"), "--truth", str(sim_dir),
                 "--out", str(tmp_path / "r.json")]) == 0
    pi = json.loads((tmp_path / "r.json").read_text())["performance_index"]
    # frozen Monte-Carlo range for Gaussian 4x4 system matrices (median about 0.41)
    assert 0.2 < pi < 0.7


def test_evaluate_dimension_mismatch(sim_dir, tmp_path, capsys):
    io.write_model(assemble_model(np.eye(3), whitening_from_total(from_matrices([np.eye(3)]), 3),
                                  np.eye(3)), tmp_path / "m3.json")
    code = main(["evaluate", "--model", str(tmp_path / "m3.json"), "--truth", str(sim_dir)])
    assert code == 2
    assert "sensors" in capsys.readouterr().err


def test_apply_keep_all_reconstructs(sim_dir, model_dir, tmp_path):
    out = tmp_path / "f.csv"
    assert main(["apply", "--model", str(model_dir / "model.json"),
                 "--recording", str(sim_dir / "recording.csv"), "--keep", "1,1,1,1",
                 "--out", str(out)]) == 0
    a = io.read_recording(sim_dir / "recording.csv").channels
    assert np.allclose(io.read_recording(out).channels, a, atol=1e-9)
    assert main(["apply", "--model", str(model_dir / "model.json"),
                 "--recording", str(sim_dir / "recording.csv"), "--drop", "9",
                 "--out", str(out)]) == 2


def test_cospectra_command(sim_dir, tmp_path):
    assert main(["cospectra", str(sim_dir / "recording.csv"), "--epoch-length", "64",
                 "--intervals", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "stack_int0_cond1" / "stack.json").exists()
    assert len(list((tmp_path / "stack_int1_cond1").glob("cospec_f*.csv"))) == 33


def test_usage_errors(sim_dir, tmp_path, capsys):
    rec = str(sim_dir / "recording.csv")
    assert main(["simulate", "--sensors", "2", "--sources", "3", "--out", str(tmp_path)]) == 2
    assert main(["separate", rec, "--components", "12", "--out", str(tmp_path)]) == 2
    assert "[config]" in capsys.readouterr().err
    assert main(["separate", rec, "--epoch-length", "63", "--out", str(tmp_path)]) == 2
    assert main(["separate", rec, "--band", "0:10", "--out", str(tmp_path)]) == 2
    assert main(["separate", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as err:
        main(["separate", rec, "--solver", "magic", "--out", str(tmp_path)])
    assert err.value.code == 2


def test_non_convergence_exit_code(sim_dir, tmp_path):
    code = main(["separate", str(sim_dir / "recording.csv"), "--max-iterations", "1",
                 "--tolerance", "1e-15", "--out", str(tmp_path)])
    assert code == 3
    assert (tmp_path / "model.json").exists()


def test_config_file_and_flag_override(sim_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epoch_length": 64, "solver": "orthogonal"}))
    assert main(["separate", str(sim_dir / "recording.csv"), "--config", str(cfg),
                 "--solver", "nonorthogonal", "--out", str(tmp_path / "o")]) == 0
    prov = json.loads((tmp_path / "o" / "model.json").read_text())["provenance"]
    assert prov["config"]["epoch_length"] == 64 and prov["solver"] == "nonorthogonal"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["separate", str(sim_dir / "recording.csv"), "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ajdc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout


def test_two_source_demo_header(tmp_path):
    assert main(["simulate", "--sensors", "2", "--length", "512", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "recording.csv").read_text().splitlines()[0].split(",") == ["t", "ch1", "ch2"]


def test_end_to_end_eight_sources(tmp_path):
    assert main(["simulate", "--kind", "ar", "--sensors", "8", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    assert main(["separate", str(tmp_path / "recording.csv"), "--band", "1:40",
                 "--out", str(tmp_path / "sep")]) == 0
    assert main(["evaluate", "--model", str(tmp_path / "sep" / "model.json"),
                 "--truth", str(tmp_path), "--out", str(tmp_path / "rep.json")]) == 0
    assert json.loads((tmp_path / "rep.json").read_text())["performance_index"] < 0.1


def test_apply_drop_top_and_keep_none(sim_dir, model_dir, tmp_path):
    rec = io.read_recording(sim_dir / "recording.csv").channels
    assert main(["apply", "--model", str(model_dir / "model.json"),
                 "--recording", str(sim_dir / "recording.csv"), "--drop", "0",
                 "--out", str(tmp_path / "d.csv")]) == 0
    out = io.read_recording(tmp_path / "d.csv").channels
    assert np.trace(np.cov(out)) < np.trace(np.cov(rec))
    assert main(["apply", "--model", str(model_dir / "model.json"),
                 "--recording", str(sim_dir / "recording.csv"), "--keep", "0,0,0,0",
                 "--out", str(tmp_path / "z.csv")]) == 0
    assert not np.any(io.read_recording(tmp_path / "z.csv").channels)
    assert main(["apply", "--model", str(model_dir / "model.json"),
                 "--recording", str(sim_dir / "recording.csv"), "--keep", "1,1",
                 "--out", str(tmp_path / "z.csv")]) == 2
