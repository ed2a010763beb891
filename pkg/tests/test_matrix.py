import json
import logging

import numpy as np
import pytest

from lvc.buffering import Strategy
from lvc.framework import Framework
from lvc.matrix import Cell, ExperimentMatrix, MissingCheckpoints, results_csv, run_matrix, summarize
from lvc.plots import emit_plots, scatter_points

CURVE = [[0.05, 30.0], [0.1, 32.5], [0.2, 35.0], [0.4, 37.2]]


def test_default_grid_has_twenty_rows():
    cells = ExperimentMatrix().variants()
    assert len(cells) == 20 == len(set(cells))
    per_fw = {fw: [c.key for c in cells if c.framework.name == fw] for fw in ("RC", "CC", "CRC", "MCR")}
    for fw, keys in per_fw.items():
        assert sorted(keys) == sorted([f"{fw}-explicit", f"{fw}-implicit-67", f"{fw}-implicit-6",
                                       f"{fw}-hybrid-64", f"{fw}-hybrid-3"])
    assert sorted({c.budget for c in cells}) == [3, 6, 67]


def test_cell_parsing_and_validation():
    c = Cell.parse("mcr-Hybrid-64")
    assert (c.framework, c.strategy, c.ib, c.budget) == (Framework.MCR, Strategy.HYBRID, 64, 67)
    assert Cell.parse(c.key) == c
    for bad in ("RC-explicit-3", "RC-implicit", "RC", "XX-explicit", "RC-hybrid-3-4"):
        with pytest.raises(ValueError):
            Cell.parse(bad)
    with pytest.raises(ValueError):
        ExperimentMatrix(cells=["CC-explicit-6"])
    with pytest.raises(ValueError):
        ExperimentMatrix(frameworks=[])
    with pytest.raises(ValueError, match="unknown"):
        ExperimentMatrix.from_dict({"framework": ["RC"]})
    with pytest.raises(ValueError):
        ExperimentMatrix(budgets=[3])


def test_subset_selection():
    m = ExperimentMatrix(frameworks=["CC", "MCR"], strategies=["implicit", "hybrid"], budgets=[67])
    assert [c.key for c in m.variants()] == ["CC-implicit-67", "CC-hybrid-64", "MCR-implicit-67", "MCR-hybrid-64"]


def fake_results(cells, shift):
    out = {}
    for c in cells:
        s = shift.get(c.key, 1.0)
        pts = {f"d/{i}": [[r * s, q + i] for r, q in CURVE] for i in range(2)}
        out[c.key] = {"cell": c.key, "points": pts, "records": []}
    return out


def test_summary_rows_and_anchor_zero(tmp_path):
    cfg = ExperimentMatrix(datasets={"d": []}, output=str(tmp_path))
    cells = cfg.variants()
    res = summarize(cfg, cells, Cell.parse("RC-explicit"), fake_results(cells, {"MCR-hybrid-64": 0.9}))
    rows = {r["cell"]: r for r in res["rows"]}
    assert len(res["rows"]) == 20
    assert rows["RC-explicit"]["bd_mean"] == 0.0
    assert rows["MCR-hybrid-64"]["bd_d"] == pytest.approx(-10.0, abs=1e-6)
    assert set(res["scatter"]) == {"RC", "CC", "CRC", "MCR"}
    assert len(res["scatter"]["MCR"]) == 4  # two budgets x two sequences
    text = results_csv(res)
    assert text.splitlines()[0] == "variant,cell,framework,strategy,ib,budget,bd_d,bd_mean"
    assert len(text.splitlines()) == 21


def test_missing_checkpoints_listed(tmp_path):
    cfg = ExperimentMatrix(cells=["CC-explicit"], datasets={"d": []}, output=str(tmp_path), lambdas=[256])
    with pytest.raises(MissingCheckpoints) as exc:
        run_matrix(cfg)
    assert exc.value.missing == ["CC-explicit-l256.pt", "RC-explicit-l256.pt"]


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("matrix")
    rng = np.random.default_rng(0)
    from lvc.data import synthetic_clip

    seqs = []
    for i in range(2):
        p = root / f"seq{i}.npy"
        np.save(p, synthetic_clip(rng, 3, 64, 64))
        seqs.append(str(p))
    cfg = dict(cells=["RC-explicit", "MCR-implicit-6", "MCR-hybrid-3"], datasets={"syn": seqs},
               output=str(root / "out"), width=8, train_steps=2, train_batch=1, train_patch=32,
               num_frames=3, intra_period=2)
    results = run_matrix(ExperimentMatrix.from_dict(cfg), train=True)
    return root, cfg, results


def test_matrix_outputs(tiny_run):
    root, cfg, results = tiny_run
    out = root / "out"
    assert len(list((out / "checkpoints").glob("*.pt"))) == 12
    assert sorted(p.stem for p in (out / "cells").glob("*.json")) == sorted(cfg["cells"])
    assert [r["cell"] for r in results["rows"]] == ["RC-explicit", "MCR-implicit-6", "MCR-hybrid-3"]
    points = (out / "rd_points.csv").read_text().splitlines()
    assert points[0].startswith("sequence,framework,strategy,ib,lambda")
    assert len(points) == 1 + 3 * 4 * 2
    assert json.loads((out / "results.json").read_text())["anchor"] == "RC-explicit"
    assert set(results["complexity"]) == {"syn/seq0", "syn/seq1"}


def test_matrix_resumes_and_is_reproducible(tiny_run):
    root, cfg, _ = tiny_run
    out = root / "out"
    csv1 = (out / "results.csv").read_bytes()
    pts1 = (out / "rd_points.csv").read_bytes()
    mtimes = {p.name: p.stat().st_mtime_ns for p in (out / "cells").glob("*.json")}
    run_matrix(ExperimentMatrix.from_dict(cfg))
    assert {p.name: p.stat().st_mtime_ns for p in (out / "cells").glob("*.json")} == mtimes
    for p in (out / "cells").glob("*.json"):
        p.unlink()
    run_matrix(ExperimentMatrix.from_dict(cfg))
    assert (out / "results.csv").read_bytes() == csv1
    assert (out / "rd_points.csv").read_bytes() == pts1


# -- plots ------------------------------------------------------------------

def scatter_results(n_fw=2, n_seq=5):
    fws = ["CC", "MCR"][:n_fw]
    return {"scatter": {fw: [{"sequence": f"s{i}", "h": float(i), "bd_rate": -float(i), "budget": 67}
                             for i in range(n_seq)] for fw in fws},
            "rd": {"syn": {"RC-explicit": CURVE, "MCR-hybrid-64": CURVE}}}


def test_plot_counting(tmp_path):
    res = scatter_results()
    pts = scatter_points(res)
    assert {k: len(v) for k, v in pts.items()} == {"CC": 5, "MCR": 5}
    assert pts["CC"][0][:2] == (0.0, -0.0)  # h = 0 kept at x = 0
    paths = emit_plots(res, tmp_path)
    assert sorted(p.name for p in paths) == ["rd_syn.png", "scatter_cc.png", "scatter_mcr.png"]
    assert all(p.stat().st_size > 0 for p in paths)


def test_plot_missing_metrics(tmp_path, caplog):
    res = scatter_results(1, 2)
    res["scatter"]["CC"][1]["bd_rate"] = None
    res["scatter"]["MCR"] = [{"sequence": "x", "h": None, "bd_rate": 1.0}]
    with caplog.at_level(logging.WARNING):
        pts = scatter_points(res)
    assert {k: len(v) for k, v in pts.items()} == {"CC": 1}
    assert "missing metric" in caplog.text


def test_plot_empty(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        assert emit_plots({}, tmp_path / "p") == []
    assert "nothing to plot" in caplog.text
    assert not (tmp_path / "p").exists()
