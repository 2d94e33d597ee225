import json

import pytest

from statutelab.cli import cli_dispatch
from statutelab.config import RunConfig, effective_sizes, load_config, merge_overrides


def run(capsys, *argv):
    code = cli_dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_corpus(tmp_path, rows=None):
    rows = rows or [
        {"id": "a1", "title": "", "text": "gift law writing act"},
        {"id": "a2", "title": "", "text": "(1) lease lien. (2) claim party."},
    ]
    p = tmp_path / "corpus.jsonl"
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return p


def test_no_args_usage_exit_1(capsys):
    code, _, err = run(capsys)
    assert code == 1
    assert "usage" in err.lower()


def test_unknown_subcommand_exit_1(capsys):
    code, _, _ = run(capsys, "frobnicate")
    assert code == 1


def test_eval_prf2_prints_hand_example(capsys):
    code, out, _ = run(capsys, "eval", "prf2", "--gold", "a,b", "--retrieved", "a")
    assert code == 0
    assert out.strip() == "1.0 0.5 0.5556"


def test_eval_accuracy_prints_testset_value(capsys):
    code, out, _ = run(capsys, "eval", "accuracy", "--correct", "43", "--total", "81")
    assert code == 0
    assert out.strip() == "0.5309"


def test_eval_human(capsys):
    code, out, _ = run(capsys, "eval", "human", "--positives", "1,3", "--total", "4")
    assert code == 0
    assert out.strip() == "0.5"


def test_corpus_stats_and_chunk(tmp_path, capsys):
    corpus = write_corpus(tmp_path)
    code, out, _ = run(capsys, "corpus", "stats", "--corpus", str(corpus))
    assert code == 0
    stats = json.loads(out)
    assert stats["count"] == 2
    out_dir = tmp_path / "run"
    code, _, _ = run(capsys, "corpus", "chunk", "--corpus", str(corpus), "--out", str(out_dir))
    assert code == 0
    lines = (out_dir / "chunked.jsonl").read_text().strip().split("\n")
    assert len(lines) == 2
    assert len(json.loads(lines[1])["statements"]) == 2
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert str(corpus) in manifest["inputs"]


def test_corpus_stats_missing_file_exit_1(tmp_path, capsys):
    code, _, err = run(capsys, "corpus", "stats", "--corpus", str(tmp_path / "nope.jsonl"))
    assert code == 1
    assert "error" in err


def test_augment_negate_roundtrip(tmp_path, capsys):
    data = tmp_path / "in.jsonl"
    data.write_text(json.dumps({"text": "The debtor shall pay.", "lawful": True}) + "\n")
    out_dir = tmp_path / "aug"
    code, _, _ = run(capsys, "augment", "negate", "--data", str(data), "--lang", "en", "--out", str(out_dir))
    assert code == 0
    rows = [json.loads(l) for l in (out_dir / "augmented.jsonl").read_text().strip().split("\n")]
    assert len(rows) == 2
    assert rows[1]["lawful"] is False and rows[1]["rule_rank"] == 2


def test_augment_negate_custom_rules(tmp_path, capsys):
    rules = tmp_path / "rules.tsv"
    rules.write_text("en\tvalid\tvoid\t1\n", encoding="utf-8")
    data = tmp_path / "in.jsonl"
    data.write_text(json.dumps({"text": "The deed is valid."}) + "\n")
    out_dir = tmp_path / "aug"
    code, _, _ = run(
        capsys, "augment", "negate", "--data", str(data), "--lang", "en",
        "--rules", str(rules), "--out", str(out_dir),
    )
    assert code == 0
    rows = [json.loads(l) for l in (out_dir / "augmented.jsonl").read_text().strip().split("\n")]
    assert rows[1]["text"] == "The deed is void."


def test_augment_negate_japanese(tmp_path, capsys):
    data = tmp_path / "in.jsonl"
    data.write_text(json.dumps({"text": "権利を行使できる", "lawful": True}, ensure_ascii=False) + "\n", encoding="utf-8")
    out_dir = tmp_path / "aug"
    code, _, _ = run(capsys, "augment", "negate", "--data", str(data), "--lang", "ja", "--out", str(out_dir))
    assert code == 0
    rows = [json.loads(l) for l in (out_dir / "augmented.jsonl").read_text(encoding="utf-8").strip().split("\n")]
    assert rows[1]["text"] == "権利を行使できない" and rows[1]["rule_rank"] == 2


def test_eval_prf2_judgments_file(tmp_path, capsys):
    path = tmp_path / "judgments.jsonl"
    path.write_text(
        json.dumps({"qid": "q1", "gold": ["a"], "retrieved": ["a", "b"]}) + "\n"
        + json.dumps({"qid": "q2", "gold": ["c"], "retrieved": ["x"]}) + "\n"
    )
    code, out, _ = run(capsys, "eval", "prf2", "--judgments", str(path), "--k", "1")
    assert code == 0
    assert out.strip() == "0.5 0.5 0.5"


def test_augment_lawfulness(tmp_path, capsys):
    corpus = write_corpus(tmp_path)
    queries = tmp_path / "queries.jsonl"
    queries.write_text(
        json.dumps({"id": "q1", "text": "x", "relevant_ids": [], "label": True}) + "\n"
        + json.dumps({"id": "q2", "text": "y", "relevant_ids": [], "label": False}) + "\n"
    )
    out_dir = tmp_path / "law"
    code, _, _ = run(capsys, "augment", "lawfulness", "--corpus", str(corpus), "--queries", str(queries), "--out", str(out_dir))
    assert code == 0
    rows = [json.loads(l) for l in (out_dir / "lawfulness.jsonl").read_text().strip().split("\n")]
    assert [r["lawful"] for r in rows] == [True, True, True, True, False]


def test_augment_nfsp_requires_seed(tmp_path, capsys):
    doc = tmp_path / "doc.jsonl"
    doc.write_text(json.dumps({"pairs": [["a1", "b1"], ["a2", "b2"]]}) + "\n")
    code, _, _ = run(capsys, "augment", "nfsp", "--doc", str(doc), "--out", str(tmp_path / "o"))
    assert code == 1  # --seed is required on randomized paths


def test_augment_nfsp_writes_pairs(tmp_path, capsys):
    doc = tmp_path / "doc.jsonl"
    doc.write_text(json.dumps({"pairs": [["a1", "b1"], ["a2", "b2"], ["a3", "b3"], ["a4", "b4"]]}) + "\n")
    out_dir = tmp_path / "nfsp"
    code, _, _ = run(capsys, "augment", "nfsp", "--doc", str(doc), "--seed", "3", "--out", str(out_dir))
    assert code == 0
    rows = [json.loads(l) for l in (out_dir / "pairs.jsonl").read_text().strip().split("\n")]
    assert {r["label"] for r in rows} == {"CONSECUTIVE", "NOT_CONSECUTIVE"}


def test_index_build(tmp_path, capsys):
    corpus = write_corpus(tmp_path)
    out_dir = tmp_path / "idx"
    code, out, _ = run(capsys, "index", "build", "--corpus", str(corpus), "--out", str(out_dir))
    assert code == 0
    assert (out_dir / "index.slix").read_bytes()[:5] == b"SLIX1"


def test_selftest_properties(capsys):
    code, out, _ = run(capsys, "selftest", "properties")
    assert code == 0
    assert "PASS" in out and "FAIL" not in out


def test_selftest_gradcheck_small(capsys):
    code, out, _ = run(capsys, "selftest", "gradcheck", "--instances", "3")
    assert code == 0
    assert "OK" in out


def test_inject_tag_stats(tmp_path, capsys):
    bioe = tmp_path / "x.tsv"
    bioe.write_text("Gifts\tB-R\tB-E\t-\nrevoked\tE-R\tE-E\t-\n", encoding="utf-8")
    code, out, _ = run(capsys, "inject", "tag-stats", "--bioe", str(bioe))
    assert code == 0
    counts = json.loads(out)
    assert counts["B-R"] == 1 and counts["O"] == 2


def test_classify_train_and_run(tmp_path, capsys):
    rows = [
        {"text": "the party may keep goods", "lawful": True},
        {"text": "the party may sell goods", "lawful": True},
        {"text": "the party never keeps goods", "lawful": False},
        {"text": "the party never sells goods", "lawful": False},
    ]
    data = tmp_path / "data.jsonl"
    data.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    out_dir = tmp_path / "clf"
    code, _, err = run(
        capsys, "classify", "train", "--data", str(data), "--out", str(out_dir),
        "--seed", "1", "--embed-dim", "6", "--filters", "6", "--attn-dim", "4",
        "--width", "1", "--lr", "0.3", "--epochs", "60",
    )
    assert code == 0, err
    run_dir = tmp_path / "preds"
    code, _, _ = run(
        capsys, "classify", "run", "--model", str(out_dir / "classifier.slrk"),
        "--data", str(data), "--out", str(run_dir),
    )
    assert code == 0
    preds = [json.loads(l) for l in (run_dir / "predictions.jsonl").read_text().strip().split("\n")]
    assert [p["lawful"] for p in preds] == [True, True, False, False]


def test_rank_pipeline_deterministic(tmp_path, capsys):
    rows = [{"id": f"a{i}", "title": "", "text": f"tok{i} bg"} for i in range(6)]
    corpus = write_corpus(tmp_path, rows)
    queries = tmp_path / "queries.jsonl"
    queries.write_text(
        "\n".join(
            json.dumps({"id": f"q{i}", "text": f"tok{i} bg", "relevant_ids": [f"a{i}"], "label": None})
            for i in range(6)
        )
        + "\n"
    )
    flags = [
        "--seed", "3", "--embed-dim", "6", "--filters", "6", "--attn-dim", "4",
        "--width", "1", "--epochs", "3", "--K", "2", "--lr", "0.2",
        "--n-predict", "6", "--alpha", "0.5",
    ]
    out_a, out_b = tmp_path / "runA", tmp_path / "runB"
    for out_dir in (out_a, out_b):
        code, _, err = run(
            capsys, "rank", "train", "--corpus", str(corpus), "--queries", str(queries),
            "--out", str(out_dir), *flags,
        )
        assert code == 0, err
        code, _, err = run(
            capsys, "rank", "run", "--model", str(out_dir / "model.slrk"),
            "--corpus", str(corpus), "--queries", str(queries),
            "--out", str(out_dir / "ranked"), *flags,
        )
        assert code == 0, err
    assert (out_a / "model.slrk").read_bytes() == (out_b / "model.slrk").read_bytes()
    assert (out_a / "ranked" / "run.jsonl").read_bytes() == (out_b / "ranked" / "run.jsonl").read_bytes()
    row = json.loads((out_a / "ranked" / "run.jsonl").read_text().split("\n")[0])
    assert set(row) == {"qid", "ranked"}
    assert set(row["ranked"][0]) == {"id", "s_l", "s_s", "s_f"}


def test_rank_grid_alpha_prints_json(tmp_path, capsys):
    rows = [{"id": f"a{i}", "title": "", "text": f"tok{i} bg"} for i in range(4)]
    corpus = write_corpus(tmp_path, rows)
    queries = tmp_path / "queries.jsonl"
    queries.write_text(
        "\n".join(
            json.dumps({"id": f"q{i}", "text": f"tok{i} bg", "relevant_ids": [f"a{i}"], "label": None})
            for i in range(4)
        )
        + "\n"
    )
    out_dir = tmp_path / "train"
    code, _, err = run(
        capsys, "rank", "train", "--corpus", str(corpus), "--queries", str(queries),
        "--out", str(out_dir), "--seed", "1", "--embed-dim", "4", "--filters", "4",
        "--attn-dim", "3", "--width", "1", "--epochs", "1", "--K", "1", "--n-predict", "4",
    )
    assert code == 0, err
    code, out, err = run(
        capsys, "rank", "grid-alpha", "--model", str(out_dir / "model.slrk"),
        "--corpus", str(corpus), "--queries", str(queries), "--step", "0.25", "--n-predict", "4",
    )
    assert code == 0, err
    result = json.loads(out)
    assert 0.0 <= result["alpha"] <= 1.0 and 0.0 <= result["f2"] <= 1.0


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"learning_rate": 0.1}))
    corpus = write_corpus(tmp_path)
    code, _, err = run(
        capsys, "rank", "train", "--corpus", str(corpus), "--queries", str(corpus),
        "--out", str(tmp_path / "o"), "--seed", "0", "--config", str(cfg),
    )
    assert code == 1
    assert "learning_rate" in err


def test_config_presets():
    cfg = RunConfig(preset="paper")
    sizes = effective_sizes(cfg)
    assert sizes == {"embed_dim": 512, "filters": 512, "attn_dim": 200, "dropout": 0.2}
    cfg = RunConfig(preset="desk")
    assert effective_sizes(cfg)["embed_dim"] == 64


def test_config_load_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{}")
    assert load_config(path) == RunConfig()  # empty object means all defaults
    path.write_text(json.dumps({"preset": "desk", "lr": 0.07, "alpha": "grid"}))
    cfg = load_config(path)
    assert cfg.lr == 0.07
    merged = merge_overrides(cfg, {"lr": 0.5, "alpha": 0.3, "seed": 4})
    assert merged.lr == 0.5 and merged.alpha == 0.3 and merged.seed == 4
    with pytest.raises(ValueError):
        merge_overrides(cfg, {"bogus": 1})
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(preset="huge").validate()
    with pytest.raises(ValueError):
        RunConfig(alpha=1.5).validate()
    with pytest.raises(ValueError):
        RunConfig(alpha="sometimes").validate()
    RunConfig(alpha="grid").validate()


def test_embed_commands(tmp_path, capsys):
    emb = tmp_path / "vec.txt"
    emb.write_text("lien 1.0 0.0\neast 2.0 0.0\nnorth 0.0 1.0\n")
    terms = tmp_path / "terms.txt"
    terms.write_text("lien\ntort\n")
    code, out, _ = run(capsys, "embed", "lvc", "--embeddings", str(emb), "--terms", str(terms))
    assert code == 0 and out.strip() == "0.5"
    corpus = write_corpus(tmp_path, [{"id": "a1", "title": "", "text": "north east"}])
    code, out, _ = run(capsys, "embed", "leca", "--embeddings", str(emb), "--terms", str(terms), "--corpus", str(corpus))
    assert code == 0
    rep = json.loads(out)
    assert rep["leca"] == pytest.approx(0.5)
    proj = tmp_path / "proj.tsv"
    code, _, _ = run(capsys, "embed", "project", "--embeddings", str(emb), "--terms", str(terms), "--top-k", "2", "--out", str(proj))
    assert code == 0
    assert len(proj.read_text().strip().split("\n")) == 2
