import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hbi.cli import main
from hbi.config import load_config, parse_config
from hbi.errors import InvalidConfig, MatrixFileError, NonFiniteInput
from hbi.features import LEVELS
from hbi.fixtures import unit_rows, write_fixtures
from hbi.io import read_csv, read_matrix, write_csv, write_matrix
from hbi.objectives import QA_WEIGHTS, banzhaf_loss, contrastive_loss, distillation_loss, total_loss


@pytest.fixture(scope="module")
def fixtures(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    write_fixtures(out, seed=0)
    return out


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    """A small sampled-mode pipeline that runs in well under a second."""
    out = tmp_path_factory.mktemp("small")
    rng = np.random.default_rng(31)
    write_matrix(out / "video.hbim", unit_rows(rng, 6, 16))
    write_matrix(out / "text.hbim", unit_rows(rng, 9, 16))
    cfg = {
        "video": "video.hbim", "text": "text.hbim",
        "clusters": [3, 2, 4, 2], "mode": "sampled", "samples": 300, "seed": 4,
    }
    (out / "config.json").write_text(json.dumps(cfg), encoding="utf-8")
    return out


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@settings(max_examples=50, deadline=None)
@given(m=hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2, max_side=9),
                    elements=st.floats(allow_nan=False, allow_infinity=False, width=32)))
def test_matrix_round_trip_bit_exact(tmp_path_factory, m):
    path = tmp_path_factory.mktemp("rt") / "m.hbim"
    write_matrix(path, m)
    back = read_matrix(path)
    assert back.dtype == np.float32 and back.tobytes() == m.tobytes()
    assert path.stat().st_size == 16 + 4 * m.size


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((5, 7)) * 0.3
    write_csv(tmp_path / "m.csv", m)
    assert np.all(np.abs(read_csv(tmp_path / "m.csv") - m) <= 1e-8)
    raw = (tmp_path / "m.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_bad_matrix_files(tmp_path):
    write_matrix(tmp_path / "ok.hbim", np.ones((2, 2)))
    blob = (tmp_path / "ok.hbim").read_bytes()
    (tmp_path / "magic.hbim").write_bytes(b"XXXX" + blob[4:])
    (tmp_path / "short.hbim").write_bytes(blob[:-4])
    (tmp_path / "nan.hbim").write_bytes(blob[:16] + np.array([np.nan, 1, 1, 1], "<f4").tobytes())
    for name in ("magic", "short"):
        with pytest.raises(MatrixFileError):
            read_matrix(tmp_path / f"{name}.hbim")
    with pytest.raises(NonFiniteInput):
        read_matrix(tmp_path / "nan.hbim")
    with pytest.raises(MatrixFileError):
        read_matrix(tmp_path / "missing.hbim")


def test_config_defaults_and_errors(tmp_path):
    cfg = parse_config({}, tmp_path)
    h = cfg.hierarchy
    assert (h.video_action, h.video_event, h.text_action, h.text_event) == (6, 2, 16, 4)
    assert (cfg.loss.alpha, cfg.loss.beta, cfg.loss.lam, cfg.loss.tau) == (1.0, 1.0, 0.0, 0.01)
    for bad in ({"bogus": 1}, {"clusters": [1, 2]}, {"mode": "fast"}, {"video": "nope.hbim"},
                {"loss": {"tau": 0}}, {"clusters": {"video_action": 0}}):
        with pytest.raises(InvalidConfig):
            parse_config(bad, tmp_path)
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    with pytest.raises(InvalidConfig):
        load_config(tmp_path / "broken.json")


def test_banzhaf_additive(fixtures, capsys):
    code, out, _ = run_cli(capsys, "banzhaf", "--config", fixtures / "additive" / "config.json", "--pair", "0,1")
    assert code == 0
    result = json.loads(out)
    assert result["value"] == 0.0 and result["stderr"] == 0.0


def test_banzhaf_unanimity(fixtures, capsys):
    code, out, _ = run_cli(capsys, "banzhaf", "--config", fixtures / "unanimity" / "config.json", "--pair", "0,0")
    assert code == 0 and json.loads(out)["value"] == 1.0


def test_banzhaf_over_cap_exit_3(fixtures, capsys):
    code, _, err = run_cli(capsys, "banzhaf", "--config", fixtures / "overcap" / "config.json", "--pair", "0,0")
    assert code == 3 and "EnumerationTooLarge" in err


def test_hierarchy_too_many_clusters_exit_2(fixtures, tmp_path, capsys):
    code, _, err = run_cli(capsys, "hierarchy", "--config", fixtures / "too_many_clusters" / "config.json",
                           "--out", tmp_path)
    assert code == 2 and "ClusterCountExceedsTokens" in err


def test_missing_config_exit_2(tmp_path, capsys):
    code, _, err = run_cli(capsys, "banzhaf", "--config", tmp_path / "none.json", "--pair", "0,0")
    assert code == 2 and "InvalidConfig" in err


def test_hierarchy_outputs(small, tmp_path, capsys):
    code, _, _ = run_cli(capsys, "hierarchy", "--config", small / "config.json", "--out", tmp_path)
    assert code == 0
    shapes = [read_csv(tmp_path / f"{lv.value}.map.csv").shape for lv in LEVELS]
    assert shapes == [(6, 9), (3, 4), (2, 2)]
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["levels"]) == {"entity", "action", "event"}
    assert "timings" not in report
    assert report["levels"]["action"]["delta"] == [1.4] * 4
    clusters = json.loads((tmp_path / "clusters.json").read_text())
    assert len(clusters["action"]["video"]["centers"]) == 3


def test_hierarchy_reproducible_across_workers(small, tmp_path, capsys):
    outs = []
    for name, workers in (("a", 1), ("b", 1), ("c", 3)):
        assert run_cli(capsys, "hierarchy", "--config", small / "config.json", "--out", tmp_path / name,
                       "--workers", workers)[0] == 0
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())})
    assert outs[0] == outs[1] == outs[2]


def test_hierarchy_reproducible_across_blas_threads(small, tmp_path):
    outs = []
    for threads in ("1", "4"):
        env = dict(os.environ, OPENBLAS_NUM_THREADS=threads, OMP_NUM_THREADS=threads, MKL_NUM_THREADS=threads)
        target = tmp_path / threads
        subprocess.run([sys.executable, "-m", "hbi", "hierarchy", "--config", str(small / "config.json"),
                        "--out", str(target)], check=True, env=env, capture_output=True)
        outs.append({p.name: p.read_bytes() for p in sorted(target.iterdir())})
    assert outs[0] == outs[1]


def test_timings_flag(small, tmp_path, capsys):
    run_cli(capsys, "hierarchy", "--config", small / "config.json", "--out", tmp_path, "--timings")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["timings"]["total_seconds"] >= 0


def test_loss_prediction_equals_target(small, tmp_path, capsys):
    run_cli(capsys, "hierarchy", "--config", small / "config.json", "--out", tmp_path)
    args = []
    for lv in LEVELS:
        m = tmp_path / f"{lv.value}.hbim"
        write_matrix(m, read_csv(tmp_path / f"{lv.value}.map.csv"))
        args += ["--pred", f"{lv.value}={m}", "--target", f"{lv.value}={m}"]
    batch = tmp_path / "batch1.hbim"
    write_matrix(batch, [[0.3]])
    code, out, _ = run_cli(capsys, "loss", "--config", small / "config.json", *args, "--scores", batch)
    assert code == 0
    report = json.loads(out)
    for lv in LEVELS:
        assert abs(report["levels"][lv.value]["interaction"]) <= 1e-12
        assert report["levels"][lv.value]["contrastive"] == 0.0


def test_loss_runs_pipeline_for_targets(fixtures, capsys):
    rand = fixtures / "random"
    cfg = rand / "config.json"
    args = ["--samples", 50]
    for lv in LEVELS:
        args += ["--pred", f"{lv.value}={rand / f'pred_{lv.value}.hbim'}",
                 "--scores", f"{lv.value}={rand / f'scores_{lv.value}.hbim'}"]
    code, out, _ = run_cli(capsys, "loss", "--config", cfg, *args)
    assert code == 0
    report = json.loads(out)
    assert report["total"] == pytest.approx(
        sum(v["combined"] for v in report["levels"].values())
        + report["distill_e2a"] + report["distill_e2v"], abs=1e-9)


def test_loss_matches_library_seed_21(tmp_path, capsys):
    rng = np.random.default_rng(21)
    shapes = {"entity": (5, 7), "action": (3, 4), "event": (2, 2)}
    args = []
    for name, shape in shapes.items():
        for kind, m in (("pred", rng.standard_normal(shape)), ("target", rng.standard_normal(shape)),
                        ("scores", rng.standard_normal((6, 6)))):
            path = tmp_path / f"{kind}_{name}.hbim"
            write_matrix(path, m)
            args += [f"--{kind}", f"{name}={path}"]
    cfg = {"loss": {"alpha": 2.0, "beta": 1.0, "lambda": 2.5, "tau": 0.01}}
    (tmp_path / "config.json").write_text(json.dumps(cfg), encoding="utf-8")
    code, out, _ = run_cli(capsys, "loss", "--config", tmp_path / "config.json", *args, "--task-loss", 0.8)
    assert code == 0
    report = json.loads(out)

    def load(kind, name):
        return read_matrix(tmp_path / f"{kind}_{name}.hbim").astype(float)

    lc = {n: contrastive_loss(load("scores", n), 0.01) for n in shapes}
    li = {n: banzhaf_loss(load("pred", n), load("target", n)) for n in shapes}
    e2a = distillation_loss(load("scores", "entity"), load("scores", "action"))
    e2v = distillation_loss(load("scores", "entity"), load("scores", "event"))
    expected = total_loss(lc, li, e2a, e2v, 0.8, QA_WEIGHTS)
    assert abs(report["total"] - expected.total) <= 1e-9
    assert abs(report["total"] - expected.recompute()) <= 1e-9


def test_fixtures_command(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "fixtures", "--out", tmp_path)
    assert code == 0
    written = json.loads(out)["written"]
    assert all(Path(p).exists() for p in written)
    assert read_matrix(tmp_path / "random" / "video.hbim").shape == (12, 512)
