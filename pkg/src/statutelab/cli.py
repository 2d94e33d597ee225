"""Subcommand front door.

Exit codes: 0 success, 1 validation error (bad arguments, bad config, bad
input files), 2 runtime error.  Every command that writes an output
directory also writes a manifest (effective config, seed, input digests) so
a run can be replayed; outputs carry no timestamps, so identical
config+seed runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import augment as aug
from . import corpus as corpus_mod
from . import embedmetrics
from . import evalkit
from . import inject
from . import lexical
from . import rankers
from .config import RunConfig, effective_sizes, load_config, merge_overrides
from .selftest import gradcheck_suite, property_suite

__all__ = ["main", "cli_dispatch"]


class CliError(Exception):
    """Validation problem; maps to exit code 1."""


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write_json(path, obj) -> None:
    Path(path).write_text(_dump_json(obj), encoding="utf-8")


def _write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, out: Path, cfg: RunConfig | None, inputs: list) -> None:
    record = {
        "command": args.command + " " + args.subcommand,
        "seed": getattr(args, "seed", None),
        "config": dataclasses.asdict(cfg) if cfg is not None else None,
        "inputs": {str(p): _sha256(p) for p in inputs},
    }
    _write_json(out / "manifest.json", record)
    if cfg is not None:
        _write_json(out / "config.json", dataclasses.asdict(cfg))


_OVERRIDE_KEYS = (
    "seed", "preset", "model", "k1", "b", "n_train", "n_predict", "alpha",
    "step", "K", "lr", "epochs", "eval_k", "embed_dim", "filters",
    "attn_dim", "dropout", "width", "n_layers", "n_heads", "neg_ratio",
)


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for key in _OVERRIDE_KEYS:
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "positions", None):
        overrides["positions"] = [int(p) for p in args.positions.split(",")]
    if getattr(args, "portions", None):
        overrides["portions"] = [float(p) for p in args.portions.split(",")]
    if isinstance(overrides.get("alpha"), str) and overrides["alpha"] != "grid":
        overrides["alpha"] = float(overrides["alpha"])
    return merge_overrides(cfg, overrides)


def _threads() -> int:
    raw = os.environ.get("SLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError(f"SLAB_THREADS must be an integer, got {raw!r}")


# ---------------------------------------------------------------------------
# corpus


def _cmd_corpus_stats(args) -> int:
    articles = corpus_mod.load_corpus(args.corpus)
    if args.chunk:
        articles = corpus_mod.chunk_corpus(articles)
        texts = [s for a in articles for s in a.statements]
    else:
        texts = [a.text for a in articles]
    st = corpus_mod.corpus_stats(texts)
    print(_dump_json({"mean_len": st.mean_len, "std_len": st.std_len, "count": st.count}), end="")
    return 0


def _cmd_corpus_chunk(args) -> int:
    articles = corpus_mod.chunk_corpus(corpus_mod.load_corpus(args.corpus))
    out = _out_dir(args)
    _write_jsonl(
        out / "chunked.jsonl",
        (
            {"id": a.id, "title": a.title, "text": a.text, "statements": a.statements}
            for a in articles
        ),
    )
    _manifest(args, out, None, [args.corpus])
    print(f"wrote {out / 'chunked.jsonl'}")
    return 0


# ---------------------------------------------------------------------------
# augment


def _load_statements(path) -> list[aug.LabeledStatement]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "text" not in obj:
                raise CliError(f"line {lineno}: record has no text field")
            records.append(
                aug.LabeledStatement(
                    str(obj["text"]),
                    bool(obj.get("lawful", True)),
                    str(obj.get("provenance", "article_chunk")),
                    obj.get("rule_rank"),
                )
            )
    return records


def _statement_dicts(records):
    for r in records:
        yield {
            "text": r.text,
            "lawful": r.lawful,
            "provenance": r.provenance,
            "rule_rank": r.rule_rank,
        }


def _cmd_augment_negate(args) -> int:
    rules = aug.load_rules(args.rules) if args.rules else None
    records = _load_statements(args.data)
    out = _out_dir(args)
    augmented = aug.augment_negation(records, args.lang, rules)
    _write_jsonl(out / "augmented.jsonl", _statement_dicts(augmented))
    _manifest(args, out, None, [args.data] + ([args.rules] if args.rules else []))
    print(f"{len(records)} in, {len(augmented)} out")
    return 0


def _cmd_augment_lawfulness(args) -> int:
    articles = corpus_mod.chunk_corpus(corpus_mod.load_corpus(args.corpus))
    queries = corpus_mod.load_queries(args.queries)
    records = aug.derive_lawfulness(articles, queries)
    out = _out_dir(args)
    _write_jsonl(out / "lawfulness.jsonl", _statement_dicts(records))
    _manifest(args, out, None, [args.corpus, args.queries])
    print(f"{len(records)} labeled statements")
    return 0


def _cmd_augment_pairs(args) -> int:
    docs = aug.load_bilingual(args.doc)
    gen = aug.gen_nfsp if args.subcommand == "nfsp" else aug.gen_nmsp
    examples = []
    for i, doc in enumerate(docs):
        examples.extend(gen(doc, seed=args.seed + i, neg_ratio=args.neg_ratio))
    out = _out_dir(args)
    _write_jsonl(
        out / "pairs.jsonl",
        (
            {
                "first": e.first, "second": e.second, "label": e.label, "task": e.task,
                "first_index": e.first_index, "second_index": e.second_index,
                "first_side": e.first_side, "second_side": e.second_side,
            }
            for e in examples
        ),
    )
    _manifest(args, out, None, [args.doc])
    print(f"{len(examples)} examples")
    return 0


# ---------------------------------------------------------------------------
# index


def _cmd_index_build(args) -> int:
    articles = corpus_mod.load_corpus(args.corpus)
    idx = lexical.build_index(articles)
    out = _out_dir(args)
    lexical.save_index(idx, out / "index.slix")
    _manifest(args, out, None, [args.corpus])
    print(f"{idx.n_docs} docs, {len(idx.postings)} terms, avgdl {idx.avgdl:.2f}")
    return 0


# ---------------------------------------------------------------------------
# rank / classify


def _vocab_from(articles, queries) -> list[str]:
    words = set()
    for a in articles:
        words.update(lexical.tokenize(a.text))
    for q in queries:
        words.update(lexical.tokenize(q.text))
    return sorted(words)


def _build_ranker(cfg: RunConfig, vocab):
    sizes = effective_sizes(cfg)
    rcfg = rankers.RankerConfig(
        lr=cfg.lr, epochs=cfg.epochs, k_negatives=cfg.K, seed=cfg.seed or 0,
        n_train=cfg.n_train, n_predict=cfg.n_predict, eval_k=cfg.eval_k,
        k1=cfg.k1, b=cfg.b,
    )
    if cfg.model == "attentive_cnn":
        return rankers.build_attentive_cnn(
            vocab, sizes["embed_dim"], sizes["filters"], sizes["attn_dim"],
            seed=cfg.seed or 0, width=cfg.width, dropout=sizes["dropout"], config=rcfg,
        )
    return rankers.build_paraformer_lite(
        vocab, sizes["embed_dim"], cfg.n_layers, cfg.n_heads, sizes["attn_dim"],
        seed=cfg.seed or 0, config=rcfg,
    )


def _cmd_rank_train(args) -> int:
    cfg = _resolve_config(args)
    articles = corpus_mod.chunk_corpus(corpus_mod.load_corpus(args.corpus))
    queries = corpus_mod.load_queries(args.queries)
    model = _build_ranker(cfg, _vocab_from(articles, queries))
    # negatives come from each query's top-n_train lexical candidates
    index = lexical.build_index(articles)
    model, trace = rankers.train_ranker(model, articles, queries, index=index)
    out = _out_dir(args)
    rankers.save_model(model, out / "model.slrk")
    _write_json(out / "loss_trace.json", trace)
    _manifest(args, out, cfg, [args.corpus, args.queries])
    print(f"final epoch loss {trace[-1]:.4f}")
    return 0


def _rank_query(model, idx, articles, q, n_predict, alpha):
    cands = rankers.rank(model, idx, articles, q, n_predict=n_predict, alpha=alpha)
    return {
        "qid": q.id,
        "ranked": [
            {"id": c.article_id, "s_l": c.s_lexical, "s_s": c.s_semantic, "s_f": c.s_final}
            for c in cands
        ],
    }


def _cmd_rank_run(args) -> int:
    cfg = _resolve_config(args)
    model = rankers.load_model(args.model_path)
    articles = corpus_mod.chunk_corpus(corpus_mod.load_corpus(args.corpus))
    queries = corpus_mod.load_queries(args.queries)
    idx = lexical.load_index(args.index) if args.index else lexical.build_index(articles)
    alpha = cfg.alpha
    if alpha == "grid":
        alpha, _ = rankers.grid_search_alpha(
            model, idx, articles, queries, step=cfg.step,
            n_predict=cfg.n_predict, k=cfg.eval_k,
        )
    threads = _threads()
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(
                    lambda q: _rank_query(model, idx, articles, q, cfg.n_predict, alpha),
                    queries,
                )
            )
    else:
        rows = [_rank_query(model, idx, articles, q, cfg.n_predict, alpha) for q in queries]
    out = _out_dir(args)
    _write_jsonl(out / "run.jsonl", rows)
    _write_json(out / "alpha.json", {"alpha": alpha})
    _manifest(args, out, cfg, [args.corpus, args.queries, args.model_path])
    print(f"ranked {len(rows)} queries at alpha {alpha}")
    return 0


def _cmd_rank_grid_alpha(args) -> int:
    cfg = _resolve_config(args)
    model = rankers.load_model(args.model_path)
    articles = corpus_mod.chunk_corpus(corpus_mod.load_corpus(args.corpus))
    queries = corpus_mod.load_queries(args.queries)
    idx = lexical.load_index(args.index) if args.index else lexical.build_index(articles)
    alpha, f2 = rankers.grid_search_alpha(
        model, idx, articles, queries, step=cfg.step,
        n_predict=cfg.n_predict, k=cfg.eval_k,
    )
    result = {"alpha": alpha, "f2": f2}
    if args.out:
        out = _out_dir(args)
        _write_json(out / "grid.json", result)
        _manifest(args, out, cfg, [args.corpus, args.queries, args.model_path])
    print(_dump_json(result), end="")
    return 0


def _cmd_classify_train(args) -> int:
    cfg = _resolve_config(args)
    records = _load_statements(args.data)
    sizes = effective_sizes(cfg)
    vocab = sorted({w for r in records for w in lexical.tokenize(r.text)})
    clf = rankers.build_lawfulness_classifier(
        vocab, sizes["embed_dim"], sizes["filters"], sizes["attn_dim"],
        seed=cfg.seed or 0, width=cfg.width, lr=cfg.lr, epochs=cfg.epochs,
    )
    rankers.train_lawfulness(clf, records, seed=cfg.seed or 0)
    out = _out_dir(args)
    rankers.save_classifier(clf, out / "classifier.slrk")
    _manifest(args, out, cfg, [args.data])
    print("classifier saved")
    return 0


def _cmd_classify_run(args) -> int:
    clf = rankers.load_classifier(args.model_path)
    records = _load_statements(args.data)
    rows = []
    for r in records:
        p = rankers.lawful_probability(clf, r.text)
        rows.append({"text": r.text, "lawful_prob": p, "lawful": p >= 0.5})
    if args.out:
        out = _out_dir(args)
        _write_jsonl(out / "predictions.jsonl", rows)
        _manifest(args, out, None, [args.data, args.model_path])
    else:
        for row in rows:
            print(json.dumps(row, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# inject


def _cmd_inject_hydra_pretrain(args) -> int:
    samples = inject.load_sdoi(args.sdoi)
    if not samples:
        raise CliError("no samples in the relation file")
    rng = np.random.default_rng(args.seed)
    vocab = sorted({t for s in samples for t in s.tokens})
    table = {w: rng.normal(0.0, 1.0, size=args.d) for w in vocab}
    from .tensor import Tensor

    states = [Tensor(np.stack([table[t] for t in s.tokens])) for s in samples]
    heads = inject.init_hydra_heads(args.d, args.n_heads, args.seed)
    heads, trace = inject.hydra_pretrain(states, samples, heads, args.epochs, args.lr, args.seed)
    out = _out_dir(args)
    inject.save_hydra_heads(heads, out / "heads.slrk")
    _write_json(out / "loss_trace.json", trace)
    _manifest(args, out, None, [args.sdoi])
    print(f"final loss {trace[-1]:.6f}")
    return 0


def _cmd_inject_hydra_attach(args) -> int:
    body = inject.load_layer_stack(args.body)
    heads = inject.load_hydra_heads(args.heads)
    model = inject.hydra_attach(body, heads)
    out = _out_dir(args)
    inject.save_layer_stack(model, out / "model.slrk")
    _manifest(args, out, None, [args.body, args.heads])
    print(f"{len(body)} + 1 layers, {inject.count_parameters(model)} attention parameters")
    return 0


def _cmd_inject_tre_train(args) -> int:
    cfg = _resolve_config(args)
    data = inject.load_bioe(args.bioe)
    if cfg.portions is None:
        n = len(cfg.positions)
        portions = [1.0 / n] * n
        portions[-1] = 1.0 - sum(portions[:-1])
    else:
        portions = cfg.portions
    icfg = inject.InjectionConfig(cfg.positions, portions)
    vocab = sorted({t for s in data for t in s.tokens})
    sizes = effective_sizes(cfg)
    model = inject.build_tre_model(
        vocab, sizes["embed_dim"], cfg.n_layers, cfg.n_heads,
        seed=cfg.seed or 0, max_len=max(len(s.tokens) for s in data) + 1,
    )
    result = inject.tre_train(model, icfg, data, cfg.epochs, cfg.lr, cfg.seed or 0)
    out = _out_dir(args)
    inject.save_tre_model(result.model, out / "model.slrk")
    _write_json(out / "report.json", {"loss_trace": result.loss_trace, "metrics": result.metrics})
    _manifest(args, out, cfg, [args.bioe])
    print(f"token accuracy {result.metrics['token_accuracy']:.4f}")
    return 0


def _cmd_inject_tag_stats(args) -> int:
    data = inject.load_bioe(args.bioe)
    print(_dump_json(inject.tag_stats(data)), end="")
    return 0


def _cmd_inject_attn_report(args) -> int:
    model = inject.load_tre_model(args.model_path)
    tokens = args.tokens.split()
    report = inject.attention_weights_report(model, tokens)
    obj = [[head.tolist() for head in layer] for layer in report]
    if args.out:
        out = _out_dir(args)
        _write_json(out / "attention.json", obj)
        _manifest(args, out, None, [args.model_path])
    else:
        print(_dump_json(obj), end="")
    return 0


# ---------------------------------------------------------------------------
# embed


def _load_terms(path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def _cmd_embed_lvc(args) -> int:
    from .encoders import load_embeddings

    emb = load_embeddings(args.embeddings)
    value = embedmetrics.lvc(emb, _load_terms(args.terms))
    print(round(value, 4))
    return 0


def _cmd_embed_leca(args) -> int:
    from .encoders import load_embeddings

    emb = load_embeddings(args.embeddings)
    articles = corpus_mod.load_corpus(args.corpus)
    sentences = [lexical.tokenize(a.text) for a in articles]
    report = embedmetrics.metric_report(emb, _load_terms(args.terms), sentences)
    print(_dump_json(dataclasses.asdict(report)), end="")
    return 0


def _cmd_embed_project(args) -> int:
    from .encoders import load_embeddings

    emb = load_embeddings(args.embeddings)
    terms = _load_terms(args.terms)
    count = embedmetrics.export_projection(emb, terms, {}, args.top_k, args.out)
    print(f"wrote {count} rows to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _cmd_eval_prf2(args) -> int:
    if args.judgments:
        judgments = []
        with open(args.judgments, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                judgments.append(
                    evalkit.RetrievalJudgment(set(obj["gold"]), list(obj["retrieved"]))
                )
        p, r, f2 = evalkit.macro_f2(judgments, args.k)
    else:
        if args.gold is None or args.retrieved is None:
            raise CliError("need --gold and --retrieved, or --judgments")
        gold = set(args.gold.split(",")) if args.gold else set()
        retrieved = set(args.retrieved.split(",")) if args.retrieved else set()
        p, r, f2 = evalkit.prf2(gold, retrieved)
    print(round(p, 4), round(r, 4), round(f2, 4))
    return 0


def _cmd_eval_accuracy(args) -> int:
    if args.preds:
        preds, golds = [], []
        with open(args.preds, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                preds.append(bool(obj["pred"]))
                golds.append(bool(obj["gold"]))
        value = evalkit.accuracy(preds, golds)
    else:
        if args.correct is None or args.total is None:
            raise CliError("need --correct and --total, or --preds")
        preds = [True] * args.total
        golds = [True] * args.correct + [False] * (args.total - args.correct)
        value = evalkit.accuracy(preds, golds)
    print(round(value, 4))
    return 0


def _cmd_eval_human(args) -> int:
    positives = [int(p) for p in args.positives.split(",")]
    print(round(evalkit.aggregate_human_eval(positives, args.total), 4))
    return 0


# ---------------------------------------------------------------------------
# selftest


def _cmd_selftest_gradcheck(args) -> int:
    results = gradcheck_suite(instances=args.instances, seed=args.seed or 20240501)
    worst = 0.0
    for name in sorted(results):
        print(f"{name}: max rel err {results[name]:.3e}")
        worst = max(worst, results[name])
    print("OK" if worst < 1e-4 else "FAIL")
    return 0 if worst < 1e-4 else 2


def _cmd_selftest_properties(args) -> int:
    results = property_suite(seed=args.seed or 7)
    ok = True
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'} {name} ({detail})")
        ok = ok and passed
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# parser


def _add_config_flags(p, seed_required=False):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--preset", choices=["paper", "desk"])
    p.add_argument("--model-kind", dest="model", choices=["attentive_cnn", "paraformer_lite"])
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--n-predict", dest="n_predict", type=int)
    p.add_argument("--alpha")
    p.add_argument("--step", type=float)
    p.add_argument("--K", dest="K", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--eval-k", dest="eval_k", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--filters", type=int)
    p.add_argument("--attn-dim", dest="attn_dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--width", type=int)
    p.add_argument("--n-layers", dest="n_layers", type=int)
    p.add_argument("--n-heads", dest="n_heads", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slab", description=__doc__)
    top = parser.add_subparsers(dest="command", required=False)

    def sub(group, name, fn, **kwargs):
        p = group.add_parser(name, **kwargs)
        p.set_defaults(handler=fn, subcommand=name)
        return p

    corpus_p = top.add_parser("corpus").add_subparsers(dest="subcommand", required=True)
    p = sub(corpus_p, "stats", _cmd_corpus_stats)
    p.add_argument("--corpus", required=True)
    p.add_argument("--chunk", action="store_true")
    p = sub(corpus_p, "chunk", _cmd_corpus_chunk)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    augment_p = top.add_parser("augment").add_subparsers(dest="subcommand", required=True)
    p = sub(augment_p, "negate", _cmd_augment_negate)
    p.add_argument("--data", required=True)
    p.add_argument("--lang", choices=["en", "ja"], default="en")
    p.add_argument("--rules")
    p.add_argument("--out", required=True)
    p = sub(augment_p, "lawfulness", _cmd_augment_lawfulness)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    for name in ("nfsp", "nmsp"):
        p = sub(augment_p, name, _cmd_augment_pairs)
        p.add_argument("--doc", required=True)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--neg-ratio", dest="neg_ratio", type=float, default=1.0)
        p.add_argument("--out", required=True)

    index_p = top.add_parser("index").add_subparsers(dest="subcommand", required=True)
    p = sub(index_p, "build", _cmd_index_build)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    rank_p = top.add_parser("rank").add_subparsers(dest="subcommand", required=True)
    p = sub(rank_p, "train", _cmd_rank_train)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, seed_required=True)
    p = sub(rank_p, "run", _cmd_rank_run)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--index")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p = sub(rank_p, "grid-alpha", _cmd_rank_grid_alpha)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--index")
    p.add_argument("--out")
    _add_config_flags(p)

    classify_p = top.add_parser("classify").add_subparsers(dest="subcommand", required=True)
    p = sub(classify_p, "train", _cmd_classify_train)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, seed_required=True)
    p = sub(classify_p, "run", _cmd_classify_run)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")

    inject_p = top.add_parser("inject").add_subparsers(dest="subcommand", required=True)
    p = sub(inject_p, "hydra-pretrain", _cmd_inject_hydra_pretrain)
    p.add_argument("--sdoi", required=True)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--n-heads", dest="n_heads", type=int, default=2)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p = sub(inject_p, "hydra-attach", _cmd_inject_hydra_attach)
    p.add_argument("--body", required=True)
    p.add_argument("--heads", required=True)
    p.add_argument("--out", required=True)
    p = sub(inject_p, "tre-train", _cmd_inject_tre_train)
    p.add_argument("--bioe", required=True)
    p.add_argument("--positions")
    p.add_argument("--portions")
    p.add_argument("--out", required=True)
    _add_config_flags(p, seed_required=True)
    p = sub(inject_p, "tag-stats", _cmd_inject_tag_stats)
    p.add_argument("--bioe", required=True)
    p = sub(inject_p, "attn-report", _cmd_inject_attn_report)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--tokens", required=True)
    p.add_argument("--out")

    embed_p = top.add_parser("embed").add_subparsers(dest="subcommand", required=True)
    p = sub(embed_p, "lvc", _cmd_embed_lvc)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--terms", required=True)
    p = sub(embed_p, "leca", _cmd_embed_leca)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--terms", required=True)
    p.add_argument("--corpus", required=True)
    p = sub(embed_p, "project", _cmd_embed_project)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--terms", required=True)
    p.add_argument("--top-k", dest="top_k", type=int, required=True)
    p.add_argument("--out", required=True)

    eval_p = top.add_parser("eval").add_subparsers(dest="subcommand", required=True)
    p = sub(eval_p, "prf2", _cmd_eval_prf2)
    p.add_argument("--gold")
    p.add_argument("--retrieved")
    p.add_argument("--judgments")
    p.add_argument("--k", type=int, default=1)
    p = sub(eval_p, "accuracy", _cmd_eval_accuracy)
    p.add_argument("--preds")
    p.add_argument("--correct", type=int)
    p.add_argument("--total", type=int)
    p = sub(eval_p, "human", _cmd_eval_human)
    p.add_argument("--positives", required=True)
    p.add_argument("--total", type=int, required=True)

    selftest_p = top.add_parser("selftest").add_subparsers(dest="subcommand", required=True)
    p = sub(selftest_p, "gradcheck", _cmd_selftest_gradcheck)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int)
    p = sub(selftest_p, "properties", _cmd_selftest_properties)
    p.add_argument("--seed", type=int)

    return parser


def cli_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return handler(args)
    except (CliError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return cli_dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
