import csv

import numpy as np
import pytest

from netclass import io
from netclass.cli import main
from netclass.features import FEATURE_NAMES, feature_vector
from netclass.gbt import load_model
from netclass.generators import ModelClass, desk_manifest
from netclass.graph import build_graph, format_edge_list
from netclass.pipeline import STREAMS, named_seed


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- io -----------------------------------------------------------------------------------

def test_manifest_round_trip():
    man = desk_manifest(seed=3, replicates=2)
    back = io.parse_manifest(io.manifest_to_yaml(man))
    assert back.seed == 3 and back.replicates == 2
    assert back.grids == man.grids


@pytest.mark.parametrize("text, line, fragment", [
    ("seed: 1\nclasses:\n  ER: {p: [0.5, 1.7]}\n", 3, "p"),
    ("seed: 1\nclasses:\n  ER: {p: [0.5]}\n  XX: {q: [1]}\n", 4, "unknown class"),
    ("seed: 1\nbogus: 2\nclasses:\n  ER: {p: [0.5]}\n", 2, "unknown key"),
    ("seed: x\nclasses:\n  ER: {p: [0.5]}\n", 1, "integer"),
    ("classes:\n  SW:\n    l: [2]\n    p_rewire: [oops]\n", 4, "numbers"),
    ("classes: [1, 2\n", 2, "invalid YAML"),
])
def test_manifest_errors_name_the_line(text, line, fragment):
    with pytest.raises(io.FormatError, match=f"m.yaml:{line}: .*{fragment}"):
        io.parse_manifest(text, "m.yaml")


def test_fmt_and_quantize():
    assert io.fmt(float("nan")) == ""
    assert io.fmt(0.1 + 0.2) == "0.3"
    x = np.array([1 / 3, 2 / 3])
    assert np.array_equal(io.quantize(x), [float(io.fmt(v)) for v in x])


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "a.txt"
    io.atomic_write(p, "hi\n")
    assert p.read_text() == "hi\n"
    assert [f.name for f in p.parent.iterdir()] == ["a.txt"]


def test_feature_table_header_check(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("graph_id,class,order\ng1,ER,3\n")
    with pytest.raises(io.FormatError, match="missing"):
        io.read_features(p)


def test_named_seeds_are_distinct_and_stable():
    seeds = [named_seed(7, s) for s in STREAMS]
    assert len(set(seeds)) == len(STREAMS)
    assert seeds == [named_seed(7, s) for s in STREAMS]
    assert named_seed(8, "split") != named_seed(7, "split")


# -- simulate ------------------------------------------------------------------------------------

def test_simulate_bad_manifest_exits_2_and_writes_nothing(tmp_path, capsys):
    man = tmp_path / "bad.yaml"
    man.write_text("seed: 1\nreplicates: 1\nclasses:\n  ER: {p: [2.0]}\n")
    out = tmp_path / "corpus"
    assert main(["simulate", "--manifest", str(man), "--out", str(out)]) == 2
    assert "bad.yaml:4" in capsys.readouterr().err
    assert not out.exists()


def test_simulate_outputs(small_run):
    corpus = small_run / "corpus"
    rows = read_rows(corpus / "index.csv")
    assert tuple(rows[0]) == io.INDEX_HEADER
    assert len(rows) - 1 == len(list((corpus / "graphs").glob("*.edges"))) == 20 * 6
    assert (corpus / "manifest.yaml").is_file()


def test_simulate_rerun_is_identical(tmp_path, small_run):
    out = tmp_path / "again"
    assert main(["simulate", "--manifest", str(small_run / "manifest.yaml"), "--out", str(out)]) == 0
    assert (out / "index.csv").read_bytes() == (small_run / "corpus" / "index.csv").read_bytes()
    g = sorted((out / "graphs").iterdir())[7]
    assert g.read_bytes() == (small_run / "corpus" / "graphs" / g.name).read_bytes()


# -- featurize ------------------------------------------------------------------------------------

def tiny_corpus(tmp_path, graphs):
    corpus = tmp_path / "corpus"
    (corpus / "graphs").mkdir(parents=True)
    rows = []
    for gid, g in graphs.items():
        (corpus / "graphs" / f"{gid}.edges").write_text(format_edge_list(g))
        rows.append([gid, "ER", g.n] + [""] * len(io.ALL_PARAMS) + ["0"])
    io.write_csv(corpus / "index.csv", io.INDEX_HEADER, rows)
    return corpus


def test_featurize_twelve_graphs_and_k5(tmp_path):
    rng = np.random.default_rng(0)
    graphs = {}
    for i in range(11):
        n = int(rng.integers(6, 15))
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.4]
        graphs[f"g{i:02d}"] = build_graph(n, pairs)
    graphs["k5"] = build_graph(5, [(a, b) for a in range(5) for b in range(a + 1, 5)])
    corpus = tiny_corpus(tmp_path, graphs)
    out = tmp_path / "features.csv"
    assert main(["featurize", str(corpus), "--out", str(out)]) == 0
    first = out.read_bytes()
    ids, _, X = io.read_features(out, require_labels=False)
    assert len(ids) == 12
    k5 = dict(zip(FEATURE_NAMES, X[ids.index("k5")]))
    assert k5["mean_degree"] == 4 and k5["num_edges"] == 10 and k5["diameter"] == 1
    assert k5["fiedler"] == pytest.approx(5) and k5["spectral_radius"] == pytest.approx(4)
    assert k5["transitivity"] == 1 and k5["min_cut"] == 4 and k5["graph_energy"] == pytest.approx(8)
    assert main(["featurize", str(corpus), "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_featurize_reports_bad_graphs(tmp_path):
    corpus = tiny_corpus(tmp_path, {"a": build_graph(4, [(0, 1), (1, 2)]),
                                    "b": build_graph(4, [(0, 1)])})
    (corpus / "graphs" / "b.edges").write_text("4 1\n0 zz\n")
    out = tmp_path / "f.csv"
    assert main(["featurize", str(corpus), "--out", str(out)]) == 1
    errors = read_rows(tmp_path / "f_errors.csv")
    assert errors[1][0] == "b" and "non-integer" in errors[1][1]
    assert len(read_rows(out)) == 2


def test_featurize_missing_index_exits_2(tmp_path):
    assert main(["featurize", str(tmp_path), "--out", str(tmp_path / "f.csv")]) == 2


# -- train ------------------------------------------------------------------------------------------

def test_train_artifacts(small_run):
    run = small_run / "run"
    for name in ("eval_report.csv", "cv_summary.csv", "cv_folds.csv", "split.csv", "model.json"):
        assert (run / name).is_file()
    rows = read_rows(run / "eval_report.csv")
    assert rows[1][:2] == ["summary", "accuracy"]
    split = read_rows(run / "split.csv")[1:]
    assert {r[1] for r in split} == {"train", "test"}
    assert len(split) == 120


def test_train_is_deterministic(tmp_path, small_run):
    out = tmp_path / "run2"
    assert main(["train", str(small_run / "features.csv"), "--out", str(out), "--seed", "5",
                 "--kfold", "3", "--hp", "trees=60", "--hp", "tree_depth=3"]) == 0
    for name in ("model.json", "eval_report.csv", "split.csv"):
        assert (out / name).read_bytes() == (small_run / "run" / name).read_bytes()


def test_train_search_log(tmp_path, small_run):
    out = tmp_path / "search"
    assert main(["train", str(small_run / "features.csv"), "--out", str(out), "--search", "3",
                 "--kfold", "2", "--hp", "trees=5"]) == 0
    rows = read_rows(out / "search_log.csv")
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
    accs = [float(r[5]) for r in rows[1:]]
    assert accs == sorted(accs, reverse=True)


@pytest.mark.parametrize("extra", [["--hp", "depth=3"], ["--kfold", "1"], ["--search", "2", "--kfold", "0"]])
def test_train_usage_errors(tmp_path, small_run, extra):
    assert main(["train", str(small_run / "features.csv"), "--out", str(tmp_path / "x")] + extra) == 2


def test_train_schema_mismatch_exits_2(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("graph_id,class\n")
    assert main(["train", str(p), "--out", str(tmp_path / "x")]) == 2


# -- predict -----------------------------------------------------------------------------------------

def test_predict_csv_and_edge_list_agree(tmp_path, small_run, capsys):
    model = small_run / "run" / "model.json"
    gid = "SP-0001-0002"
    edges = small_run / "corpus" / "graphs" / f"{gid}.edges"
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["predict", "--model", str(model), str(edges), "--out", str(out_a)]) == 0
    assert main(["predict", "--model", str(model), str(small_run / "features.csv"), "--out", str(out_b)]) == 0
    a = read_rows(out_a)
    b = {r[0]: r for r in read_rows(out_b)}
    assert a[0] == ["graph_id", "class", "proba_ER", "proba_SW", "proba_SF", "proba_SP", "proba_SBM"]
    assert a[1][1:] == b[gid][1:]
    assert "proba_ER" in capsys.readouterr().out


def test_predict_ring_lattice_is_small_world(tmp_path, small_run):
    n, l = 70, 4
    ring = build_graph(n, [(i, (i + k) % n) for i in range(n) for k in range(1, l + 1)])
    p = tmp_path / "ring.edges"
    p.write_text(format_edge_list(ring))
    out = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(small_run / "run" / "model.json"), str(p), "--out", str(out)]) == 0
    assert read_rows(out)[1][1] == "SW"


def test_predict_errors(tmp_path, small_run):
    bad = tmp_path / "g.edges"
    bad.write_text("3 1\n0 1\n")
    assert main(["predict", "--model", str(tmp_path / "none.json"), str(bad)]) == 2
    junk = tmp_path / "m.json"
    junk.write_text("{\"schema\": \"netclass.gbt\", \"version\": 7}")
    assert main(["predict", "--model", str(junk), str(bad)]) == 2
    bad.write_text("3 2\n0 1\n")
    assert main(["predict", "--model", str(small_run / "run" / "model.json"), str(bad)]) == 2


# -- explain -----------------------------------------------------------------------------------------

def test_explain_unknown_feature_lists_names(tmp_path, small_run, capsys):
    code = main(["explain", "--model", str(small_run / "run" / "model.json"),
                 str(small_run / "features.csv"), "--out", str(tmp_path / "ex"), "--dependence", "nope"])
    assert code == 2
    assert "normalized_fiedler" in capsys.readouterr().err
    assert not (tmp_path / "ex").exists()


def test_explain_summary_and_waterfall(tmp_path, small_run):
    out = tmp_path / "ex"
    feats = small_run / "features.csv"
    model_path = small_run / "run" / "model.json"
    gid = "SW-0002-0001"
    assert main(["explain", "--model", str(model_path), str(feats), "--out", str(out),
                 "--summary", "--waterfall", gid, "--dependence", "transitivity", "--color", "order"]) == 0
    summary = read_rows(out / "shap_summary.csv")
    assert summary[0] == ["class", "feature", "mean_abs_shap", "rank"]
    assert len(summary) - 1 == 5 * 18
    wf = read_rows(out / f"waterfall_{gid}.csv")[1:]
    assert len(wf) == 5 * 18
    model = load_model(model_path)
    ids, _, X = io.read_features(feats, require_labels=False)
    margin = model.predict_margin(X[ids.index(gid)][None, :])[0]
    for c, name in enumerate(["ER", "SW", "SF", "SP", "SBM"]):
        rows = [r for r in wf if r[0] == name]
        total = sum(float(r[3]) for r in rows) + float(rows[0][4])
        assert total == pytest.approx(margin[c], abs=1e-6)
    dep = read_rows(out / "dependence_transitivity.csv")
    assert len(dep) - 1 == 5 * len(ids)


def test_explain_hstats_pd_and_surface(tmp_path, small_run):
    out = tmp_path / "ex"
    assert main(["explain", "--model", str(small_run / "run" / "model.json"), str(small_run / "features.csv"),
                 "--out", str(out), "--class", "SP", "--hstats", "--order", "2", "--sample", "40",
                 "--interact2d", "transitivity", "mean_degree", "--bins", "5",
                 "--pd", "transitivity"]) == 0
    h = read_rows(out / "hstats.csv")
    assert h[0] == ["class", "order", "features", "h2"]
    assert {r[1] for r in h[1:]} == {"0", "1", "2"}
    assert all(r[3] == "" or float(r[3]) >= 0 for r in h[1:])
    surf = read_rows(out / "interact2d_transitivity_mean_degree.csv")
    assert len(surf) - 1 == 25
    pd = read_rows(out / "pd_transitivity.csv")
    assert all(r[0] == "SP" for r in pd[1:])


def test_explain_needs_an_action(tmp_path, small_run):
    assert main(["explain", "--model", str(small_run / "run" / "model.json"),
                 str(small_run / "features.csv"), "--out", str(tmp_path / "ex")]) == 2


def test_jobs_env_fallback(tmp_path, small_run, monkeypatch):
    monkeypatch.setenv("NETCLASS_JOBS", "abc")
    assert main(["simulate", "--manifest", str(small_run / "manifest.yaml"), "--out", str(tmp_path / "c")]) == 2
