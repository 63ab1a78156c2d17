import json
import math
import pathlib

import numpy as np
import pytest

import eventcast as ec


def test_ks_and_auroc():
    d, p = ec.ks_two_sample([1, 2, 3], [4, 5, 6])
    assert d == 1.0
    assert 0 < p < 1
    assert ec.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert ec.auroc([0.2, 0.3], [1, 1]) is None
    assert ec.auprc([0.5, 0.5, 0.5], [1, 0, 0]) == pytest.approx(1 / 3)


def test_rank_statistics():
    assert ec.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    h, _ = ec.kruskal_wallis([[1, 2, 3], [101, 102, 103]])
    assert h == pytest.approx(27 / 7)
    assert ec.kruskal_wallis([[1, 1], [1, 1]]) is None


def test_moving_average_and_folds():
    ma = ec.moving_average([1, 2, 3, 4], 2)
    assert math.isnan(ma[0]) and math.isnan(ma[1])
    assert list(ma[2:]) == [1.5, 2.5]
    folds = ec.make_folds(1413)
    assert [e - s + 1 for s, e in folds] == [283, 283, 283, 282, 282]
    start, end = folds[-1]
    purged = ec.purge_rows(start, end, 14, 1413)
    assert purged == list(range(start - 14, start))


def test_synth_ks_fit_and_cv():
    (ds,) = ec.synth_generate(n_days=300, m_features=12, imbalance=0.05, planted=True, seed=2)
    assert ds["X"].shape == (300, 12)
    assert int(ds["y"].sum()) == 15
    fit = ec.ks_fit(ds["X"], ds["y"], 10)
    assert len(fit["t"]) == 12 and all(1 <= t <= 10 for t in fit["t"])
    rep = ec.run_cv(ds["X"], ds["y"], window="dt*=10", model="rf", repeats=1, estimators=20)
    assert rep["audit"]["smote_parent_violations"] == 0
    assert rep["auroc_mean"] > 0.6


def test_coarse_demo_baseline():
    counts = ec.reference_attack_counts()
    assert sum(counts.values()) == 207
    d = ec.coarse_demo(counts, 1413, ["CA", "NY", "TX", "FL", "WA"])
    assert d["instances"] == 72063
    assert d["baseline_auroc"] == 0.5
    assert abs(d["prevalence"] - 0.003) <= 5e-4


def test_run_command_writes_fingerprinted_json(tmp_path: pathlib.Path):
    r = ec.run_command("coarse-demo", str(tmp_path), seed=1)
    report = json.loads((tmp_path / "coarse-demo.json").read_text())
    assert report["fingerprint"] == r["fingerprint"]
    assert "synth" in ec.command_names()
    with pytest.raises(Exception):
        ec.run_command("nope", str(tmp_path))
