import os
import subprocess

import numpy as np
import pytest

pg = pytest.importorskip("promptgate")

TINY = {"unlabeled_per_client": 120, "test_per_client": 40, "dimension": 8,
        "num_classes": 3, "num_ood_modes": 2, "seed_labeled_per_class": 3}


def test_split_budget_examples():
    assert pg.split_budget(500, [2000] * 4) == [125] * 4
    assert pg.split_budget(10, [5, 100]) == [1, 9]


def test_l2_normalize():
    assert np.allclose(pg.l2_normalize([3.0, 4.0]), [0.6, 0.8])
    with pytest.raises(pg.PromptgateError):
        pg.l2_normalize([0.0, 0.0])


def test_synthetic_arrays_are_unit_rows():
    d = pg.generate_synthetic(3, TINY)
    emb = d["embeddings"]
    assert emb.shape[1] == 8
    assert np.allclose(np.linalg.norm(emb, axis=1), 1.0)
    assert d["anchors"].shape == (4, 8)
    assert len(set(d["sample_id"].tolist())) == emb.shape[0]
    again = pg.generate_synthetic(3, TINY)
    assert np.array_equal(emb, again["embeddings"])


def test_upper_bound_run():
    rows = pg.run_experiment("upper", "random", seed=0, rounds=2, budget=40, spec=TINY)
    assert len(rows) == 8
    assert all(r["qp"] == 1.0 for r in rows)
    assert rows == pg.run_experiment("upper", "random", seed=0, rounds=2, budget=40, spec=TINY,
                                     client_threads=1)


def test_bad_inputs_raise():
    with pytest.raises(pg.PromptgateError):
        pg.validate_config("name: x\nbudgit: 3\n")
    with pytest.raises(KeyError):
        pg.generate_synthetic(0, {"dimensions": 4})
    assert pg.validate_config("name: x\nseeds: [0, 1]\n")["experiments"] == 2


def test_cli_validate_and_run(tmp_path):
    cli = os.environ.get("PROMPTGATE_CLI")
    if not cli:
        pytest.skip("PROMPTGATE_CLI not set")
    cfg = tmp_path / "tiny.yaml"
    cfg.write_text("name: tiny\nrounds: 1\nbudget: 20\nseeds: [0]\nmodes: [upper]\n"
                   "dataset:\n  synthetic: {dimension: 8, num_classes: 3, num_ood_modes: 2,"
                   " unlabeled_per_client: 80, test_per_client: 30, seed_labeled_per_class: 2}\n")
    out = subprocess.run([cli, "validate", str(cfg)], capture_output=True, text=True)
    assert out.returncode == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: b\nbudgit: 1\n")
    out = subprocess.run([cli, "validate", str(bad)], capture_output=True, text=True)
    assert out.returncode == 2
    assert "budgit" in out.stderr
    res = tmp_path / "res"
    out = subprocess.run([cli, "run", str(cfg), "--out", str(res)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (res / "upper-random-seed0" / "rounds.csv").exists()
    summary = subprocess.run([cli, "summarize", str(res)], capture_output=True, text=True)
    assert summary.stdout.splitlines()[1].startswith("upper,100.0")
