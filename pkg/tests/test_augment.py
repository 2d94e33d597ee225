import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statutelab.augment import (
    EN_RULES,
    JA_RULES,
    BilingualDoc,
    LabeledStatement,
    augment_negation,
    derive_lawfulness,
    dump_rules,
    gen_nfsp,
    gen_nmsp,
    load_rules,
    negate,
)
from statutelab.corpus import Article, Query

# one sentence per English rule, crafted so that exactly that rule fires first
EN_RULE_SENTENCES = {
    1: "Gifts not in writing may be revoked.",
    2: "The debtor shall pay the fee.",
    3: "The court should weigh the claim.",
    4: "An unborn child may be given a gift.",
    5: "The party must deliver the goods.",
    6: "The claim is valid.",
    7: "The terms are binding.",
    8: "The lien will be extinguished.",
    9: "The owner can exercise the right.",
    10: "The owner cannot exercise the right.",
    11: "The deed comes with a warranty.",
    12: "The deed comes without a warranty.",
    13: "A gift becomes effective on delivery.",
    14: "An heir takes the estate.",
}

JA_RULE_SENTENCES = {
    1: "権利を行使できません",
    2: "権利を行使できる",
    3: "権利を行使できない",
    4: "契約を解除した",
    5: "当事者でない",
    6: "履行を完了できた",
    7: "義務を履行させる",
    8: "効力を有している",
    9: "異議がない",
    10: "無効ではない",
    11: "取り消すことがある",
    12: "届出をしなければならない",
    13: "その効力は妨げとならない",
}


def test_every_english_rule_fires_on_its_sentence():
    for rank, sentence in EN_RULE_SENTENCES.items():
        hit = negate(sentence, "en")
        assert hit is not None, f"rule {rank} did not fire"
        assert hit[1] == rank, f"expected rule {rank} on {sentence!r}, got {hit[1]}"


def test_every_japanese_rule_fires_on_its_sentence():
    for rank, sentence in JA_RULE_SENTENCES.items():
        hit = negate(sentence, "ja")
        assert hit is not None, f"rule {rank} did not fire"
        assert hit[1] == rank, f"expected rule {rank} on {sentence!r}, got {hit[1]}"


def test_negate_examples():
    out = negate("An unborn child may be given a gift", "en")
    assert out == ("An unborn child may not be given a gift", 4)
    out = negate("X cannot do Y", "en")
    assert out == ("X can do Y", 10)
    assert negate("zzz qqq", "en") is None


def test_not_removal_cleans_spacing():
    out = negate("Gifts not in writing", "en")
    assert out == ("Gifts in writing", 1)


def test_first_occurrence_only():
    out = negate("The debtor shall pay and shall report.", "en")
    assert out == ("The debtor shall not pay and shall report.", 2)


def test_word_boundaries():
    # "cannot" must not trigger the bare "not" or "can" rules
    assert negate("The owner cannot act.", "en")[1] == 10
    # "A"/"An" match only capitalized standalone tokens
    assert negate("a minor takes a gift", "en") is None
    assert negate("A minor takes a gift", "en") == ("No minor takes a gift", 13)


def test_japanese_last_occurrence():
    text = "権利を行使できる者は、義務を負うことを行使できる"
    out, rank = negate(text, "ja")
    assert rank == 2
    assert out == "権利を行使できる者は、義務を負うことを行使できない"


def test_involutions():
    for text in ("X can do Y", "done with care", "A right without a duty exists here"):
        first = negate(text, "en")
        assert first is not None
        second = negate(first[0], "en")
        assert second is not None and second[0] == text


def test_negate_leaves_rest_of_text_untouched():
    text = "The party must deliver the goods."
    out, _ = negate(text, "en")
    assert out.replace("must not", "must") == text


def test_rule_table_shapes():
    assert len(EN_RULES) == 14
    assert len(JA_RULES) == 13
    assert [r.rank for r in EN_RULES] == list(range(1, 15))
    assert [r.rank for r in JA_RULES] == list(range(1, 14))


def test_rules_tsv_roundtrip(tmp_path):
    path = tmp_path / "rules.tsv"
    dump_rules(EN_RULES + JA_RULES, path)
    back = load_rules(path)
    assert back == sorted(EN_RULES + JA_RULES, key=lambda r: (r.language, r.rank))


def test_rules_validation(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text("en\tfoo\tfoo\t1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_rules(path)
    path.write_text("en\ta\tb\t1\nen\tc\td\t1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_rules(path)


def test_derive_lawfulness():
    art = Article("a1", "", "(1) First. (2) Second.")
    art.statements = ["(1) First.", "(2) Second."]
    queries = [
        Query("q1", "lawful one", set(), True),
        Query("q2", "unlawful one", set(), False),
        Query("q3", "no label", set(), None),
    ]
    recs = derive_lawfulness([art], queries)
    assert [r.lawful for r in recs] == [True, True, True, False]
    assert [r.provenance for r in recs] == [
        "article_chunk", "article_chunk", "entailed_query", "non_entailed_query",
    ]
    assert derive_lawfulness([], []) == []


def test_derive_lawfulness_requires_chunked():
    with pytest.raises(ValueError):
        derive_lawfulness([Article("a1", "", "text")], [])


def test_augment_negation_counts_and_flips():
    recs = [
        LabeledStatement("The debtor shall pay.", True, "article_chunk"),
        LabeledStatement("zzz qqq", True, "article_chunk"),
    ]
    out = augment_negation(recs, "en")
    assert len(out) == 3
    assert out[:2] == recs
    neg = out[2]
    assert neg.text == "The debtor shall not pay."
    assert neg.lawful is False
    assert neg.provenance == "negated" and neg.rule_rank == 2


@given(st.lists(st.sampled_from(sorted(EN_RULE_SENTENCES.values())), max_size=8))
def test_augment_negation_size_invariant(texts):
    recs = [LabeledStatement(t, True, "article_chunk") for t in texts]
    out = augment_negation(recs, "en")
    fired = sum(1 for t in texts if negate(t, "en") is not None)
    assert len(out) == len(recs) + fired
    for neg in out[len(recs) :]:
        assert neg.lawful is False and neg.rule_rank is not None


def _doc(n):
    return BilingualDoc([(f"en sentence {i}.", f"ja 文 {i}。") for i in range(n)])


def test_nfsp_greeting_example():
    doc = BilingualDoc([("Hello.", "こんにちは。"), ("How are you?", "お元気ですか？")])
    out = gen_nfsp(doc, seed=0, neg_ratio=0.0)
    texts = {(e.first, e.second) for e in out}
    assert ("Hello.", "お元気ですか？") in texts
    assert ("こんにちは。", "How are you?") in texts
    assert len(out) == 2 and all(e.label == "CONSECUTIVE" for e in out)


def test_nfsp_requires_two_pairs():
    with pytest.raises(ValueError):
        gen_nfsp(_doc(1), seed=0)


def test_nfsp_two_pair_doc_cannot_sample_negatives():
    # a 2-pair doc has no index pair with gap >= 2
    with pytest.raises(ValueError):
        gen_nfsp(_doc(2), seed=0, neg_ratio=1.0)
    with pytest.raises(ValueError):
        gen_nmsp(_doc(2), seed=0, neg_ratio=0.5)


def test_nfsp_negative_gap_oracle():
    doc = _doc(8)
    out = gen_nfsp(doc, seed=3, neg_ratio=1.0)
    positives = [e for e in out if e.label == "CONSECUTIVE"]
    negatives = [e for e in out if e.label == "NOT_CONSECUTIVE"]
    assert len(positives) == 2 * 7
    assert len(negatives) == math.ceil(1.0 * len(positives))
    # brute-force index scan: locate each sentence in the doc and check gap
    for e in negatives:
        i = [k for k, p in enumerate(doc.pairs) if e.first in p][0]
        j = [k for k, p in enumerate(doc.pairs) if e.second in p][0]
        assert abs(i - j) >= 2
        assert e.first_side != e.second_side  # cross-lingual


def test_nmsp_counts_and_orders():
    out = gen_nmsp(_doc(2), seed=1, neg_ratio=0.0)
    nexts = [e for e in out if e.label == "NEXT"]
    prevs = [e for e in out if e.label == "PREV"]
    assert len(nexts) == 4 and len(prevs) == 4
    # (b_2, a_1) appears as a PREV example
    assert any(e.first == "ja 文 1。" and e.second == "en sentence 0." for e in prevs)


def test_nmsp_determinism():
    a = gen_nmsp(_doc(6), seed=9, neg_ratio=1.0)
    b = gen_nmsp(_doc(6), seed=9, neg_ratio=1.0)
    assert a == b


@settings(deadline=None)
@given(st.integers(min_value=2, max_value=10), st.integers(min_value=0, max_value=1000))
def test_pair_generation_labels_exhaustive_oracle(n, seed):
    doc = _doc(n)
    index_of = {}
    for k, (a, b) in enumerate(doc.pairs):
        index_of[a] = k
        index_of[b] = k
    nfsp = gen_nfsp(doc, seed=seed, neg_ratio=1.0) if n >= 4 else gen_nfsp(doc, seed=seed, neg_ratio=0.0)
    for e in nfsp:
        gap = index_of[e.second] - index_of[e.first]
        if e.label == "CONSECUTIVE":
            assert gap == 1
        else:
            assert abs(gap) >= 2
    nmsp = gen_nmsp(doc, seed=seed, neg_ratio=1.0) if n >= 4 else gen_nmsp(doc, seed=seed, neg_ratio=0.0)
    for e in nmsp:
        gap = index_of[e.second] - index_of[e.first]
        if e.label == "NEXT":
            assert gap == 1
        elif e.label == "PREV":
            assert gap == -1
        else:
            assert abs(gap) >= 2


def test_negative_count_matches_ratio():
    doc = _doc(6)
    for ratio in (0.5, 1.0, 2.0):
        out = gen_nfsp(doc, seed=4, neg_ratio=ratio)
        pos = sum(1 for e in out if e.label == "CONSECUTIVE")
        neg = sum(1 for e in out if e.label == "NOT_CONSECUTIVE")
        assert neg == math.ceil(ratio * pos)
        assert abs(neg - ratio * pos) <= 1
