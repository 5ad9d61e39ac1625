import csv
import json

import pytest

from conftest import FIXTURES, GOLDEN
from semedge.cli import main
from semedge.graph import load_graph, save_graph
from semedge.relations import EdgeDecomposition, RelationSet

PLANTED_RELATIONS_JSON = {"relations": [
    {"name": "Shared Topic", "description": "Both documents are about the same topic."},
    {"name": "Adjacent Topic", "description": "One topic follows the other in the cycle."},
]}


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert run("synth", "--n", 90, "--deg", 4, "--seed", 3, "--out", out) == 0
    (tmp_path / "relations.json").write_text(json.dumps(PLANTED_RELATIONS_JSON))
    return out


def test_synth_writes_files_and_manifest(synth_dir):
    assert (synth_dir / "graph.json").exists() and (synth_dir / "oracle.jsonl").exists()
    m = json.loads((synth_dir / "manifest.json").read_text())
    assert m["command"] == "synth" and m["seeds"] == [3]
    assert {str(synth_dir / "graph.json"), str(synth_dir / "oracle.jsonl")} <= set(m["outputs"])


def test_synth_reproducible(tmp_path):
    for d in ("a", "b"):
        assert run("synth", "--n", 60, "--seed", 5, "--out", tmp_path / d) == 0
    for f in ("graph.json", "oracle.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["config_digest"] == mb["config_digest"]


def test_synth_noise_keeps_truth_clean(tmp_path):
    assert run("synth", "--n", 60, "--noise", 0.3, "--seed", 1, "--out", tmp_path) == 0
    g = load_graph(tmp_path / "graph.json")
    truth = EdgeDecomposition.load(tmp_path / "oracle.jsonl")
    for (i, j), rels in truth.labels.items():
        assert rels == ({0} if g.labels[i] == g.labels[j] else {1})


def test_identify_cora(tmp_path, cora_graph, capsys):
    save_graph(cora_graph, tmp_path / "cora.json")
    out = tmp_path / "rel.json"
    code = run("identify", "--graph", tmp_path / "cora.json", "--backend", "scripted",
               "--fixture", FIXTURES / "cora_scripted.json", "--out", out)
    assert code == 0
    rs = RelationSet.load(out)
    assert len(rs) == 5 and "Shared Application Domain" in rs.names
    transcript = [json.loads(x) for x in out.with_suffix(".transcripts.jsonl").read_text().splitlines()]
    assert [t["role"] for t in transcript] == ["generator", "discriminator"]
    m = json.loads(out.with_suffix(".manifest.json").read_text())
    assert m["backend"] == "scripted" and m["queries"]["calls_by_role"]["generator"] == 1


def test_identify_skip_discriminator(tmp_path, cora_graph):
    save_graph(cora_graph, tmp_path / "cora.json")
    out = tmp_path / "rel.json"
    assert run("identify", "--graph", tmp_path / "cora.json", "--fixture", FIXTURES / "cora_scripted.json",
               "--out", out, "--skip-discriminator") == 0
    assert len(RelationSet.load(out)) == 10


def test_identify_pipeline_error_names_transcript(tmp_path, cora_graph, capsys):
    save_graph(cora_graph, tmp_path / "cora.json")
    fx = tmp_path / "fx.json"
    fx.write_text(json.dumps({"generator": "no list at all"}))
    code = run("identify", "--graph", tmp_path / "cora.json", "--fixture", fx, "--out", tmp_path / "r.json",
               "--max-retries", 0)
    assert code == 1
    assert "transcripts" in capsys.readouterr().err


def test_missing_graph_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("identify", "--out", tmp_path / "r.json")
    assert exc.value.code == 2


def test_decompose_full_oracle(synth_dir, tmp_path):
    out = tmp_path / "dec.jsonl"
    assert run("decompose", "--graph", synth_dir / "graph.json", "--relations", tmp_path / "relations.json",
               "--mode", "full", "--backend", "oracle", "--oracle", synth_dir / "oracle.jsonl", "--out", out) == 0
    assert EdgeDecomposition.load(out).labels == EdgeDecomposition.load(synth_dir / "oracle.jsonl").labels
    rows = list(csv.DictReader(out.with_suffix(".audit.csv").open()))
    assert list(rows[0]) == ["node", "edge", "cached"]
    assert len(rows) == len(EdgeDecomposition.load(out))


def test_decompose_efficient_dense_audit(tmp_path):
    d = tmp_path / "dense"
    assert run("synth", "--n", 120, "--deg", 10, "--seed", 2, "--out", d) == 0
    (tmp_path / "relations.json").write_text(json.dumps(PLANTED_RELATIONS_JSON))
    out = tmp_path / "eff.jsonl"
    assert run("decompose", "--graph", d / "graph.json", "--relations", tmp_path / "relations.json",
               "--mode", "efficient", "--gamma", 3, "--backend", "oracle", "--oracle", d / "oracle.jsonl",
               "--out", out) == 0
    rows = list(csv.DictReader(out.with_suffix(".audit.csv").open()))
    M = load_graph(d / "graph.json").num_edges
    assert len(rows) <= 0.5 * M
    per_node = {}
    for r in rows:
        per_node[r["node"]] = per_node.get(r["node"], 0) + 1
    assert max(per_node.values()) <= 3


def test_decompose_random_single_relation(synth_dir, tmp_path):
    out = tmp_path / "rand.jsonl"
    assert run("decompose", "--graph", synth_dir / "graph.json", "--mode", "random", "--num-relations", 1,
               "--out", out) == 0
    lines = [json.loads(x) for x in out.read_text().splitlines()]
    assert lines and all(x["relations"] == [0] for x in lines)


def test_decompose_distance_needs_embeddings(synth_dir, tmp_path):
    code = run("decompose", "--graph", synth_dir / "graph.json", "--mode", "distance", "--out", tmp_path / "d.jsonl")
    assert code == 2


def test_decompose_distance_with_embeddings(synth_dir, tmp_path):
    from semedge.embed import encode_texts, save_embeddings
    g = load_graph(synth_dir / "graph.json")
    save_embeddings(encode_texts(g.texts), tmp_path / "emb.csv")
    out = tmp_path / "d.jsonl"
    assert run("decompose", "--graph", synth_dir / "graph.json", "--mode", "distance", "--embeddings",
               tmp_path / "emb.csv", "--threshold", 0.6, "--out", out) == 0
    assert len(EdgeDecomposition.load(out)) == g.num_edges


def test_train_rgcn_needs_dec(synth_dir, tmp_path):
    assert run("train", "--graph", synth_dir / "graph.json", "--arch", "rgcn", "--report", tmp_path / "r") == 2


def test_train_gcn_ignores_dec(synth_dir, tmp_path, caplog):
    code = run("train", "--graph", synth_dir / "graph.json", "--arch", "gcn", "--dec", synth_dir / "oracle.jsonl",
               "--seeds", 1, "--epochs", 5, "--report", tmp_path / "r")
    assert code == 0
    assert "ignoring --dec" in caplog.text


def train_small(synth_dir, report, arch="rgcn"):
    return run("train", "--graph", synth_dir / "graph.json", "--arch", arch, "--dec", synth_dir / "oracle.jsonl",
               "--relations", synth_dir.parent / "relations.json", "--seeds", 2, "--split-seed", 4,
               "--epochs", 8, "--report", report)


def test_train_outputs_and_rerun_identical(synth_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert train_small(synth_dir, a) == 0 and train_small(synth_dir, b) == 0
    names = ["report.md", "leaderboard.csv", "seeds.csv", "model_seed4.bin", "model_seed5.bin",
             "accuracy_per_seed.png", "sim_mean.png", "loss_curves.png"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
    m = json.loads((a / "manifest.json").read_text())
    assert m["seeds"] == [4, 5]
    assert {str(a / n) for n in names} <= set(m["outputs"])
    md = (a / "report.md").read_text()
    assert "mean ± SEM" in md and "| 4 |" in md and "Sim_mean, raw features" in md


def test_train_gine(synth_dir, tmp_path):
    assert train_small(synth_dir, tmp_path / "g", arch="gine") == 0


def test_report_golden(synth_dir, tmp_path):
    assert train_small(synth_dir, tmp_path / "r") == 0
    assert (tmp_path / "r" / "report.md").read_text() == (GOLDEN / "report_rgcn.md").read_text()
    lb = (tmp_path / "r" / "leaderboard.csv").read_text().splitlines()
    assert lb[0] == "arch,lr,layers,dropout,val_acc,test_acc,seed"
