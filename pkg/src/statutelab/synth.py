"""Synthetic data generators used by the verification suites and scripts.

The planted retrieval world gives BM25 and the neural reranker
complementary signals via three query families:

* pair queries share their lexical token with exactly two articles, so
  BM25 ties and only a learned query-token/article-token association can
  break the tie;
* decoy queries name their target with a unique lexical token but carry a
  semantic token pointing at a *different* trained group, so a
  semantic-only ranker is actively misled;
* alignment queries consist of the semantic token alone, with the whole
  semantic group as gold, which forces training to learn the association
  rather than lean on token overlap.

Pair partners are never semantic-group mates, so the ensemble pins the
target uniquely while either single signal stays ambiguous or misled.

The bracket grammar emits three-level B/I/O/E samples whose segments are
delimited by dedicated begin/inside/end vocabularies, one segment type per
level, which a small self-attention stack can tag almost perfectly.
"""

from __future__ import annotations

import numpy as np

from .corpus import Article, Query
from .inject import BioeSample

__all__ = ["planted_retrieval_world", "bracket_grammar"]

_SEM_GROUPS = 20
_ALIGN_SPAN = (120, 160)  # alignment-query indices; keep inside the train split


def _family(t: int) -> str:
    if _ALIGN_SPAN[0] <= t < _ALIGN_SPAN[1]:
        return "align"
    if t % 10 == 0:
        return "decoy"
    return "pair"


def planted_retrieval_world(n_articles: int = 300, n_queries: int = 200):
    """Deterministic corpus and query set with complementary planted signals.

    Returns (articles, queries); query t targets article t (alignment
    queries target their whole semantic group).  Query ids order the
    intended split: the first 160 train, the last 40 validate.
    """
    if n_queries > n_articles:
        raise ValueError("cannot have more queries than target articles")
    families = {t: _family(t) for t in range(n_queries)}
    unique_lex = {t for t, f in families.items() if f == "decoy"}
    paired = [t for t in range(n_articles) if t not in unique_lex]
    pair_of: dict[int, int] = {}
    for i in range(0, len(paired) - 1, 2):
        pair_of[paired[i]] = i // 2
        pair_of[paired[i + 1]] = i // 2
    if len(paired) % 2:
        pair_of[paired[-1]] = (len(paired) - 1) // 2

    articles = []
    sem_groups: dict[int, set[str]] = {}
    for t in range(n_articles):
        if t in unique_lex:
            lex, sem = f"lexb{t:03d}", f"asemz{t:03d}"
        else:
            lex, sem = f"lexa{pair_of[t]:03d}", f"asem{t % _SEM_GROUPS:02d}"
            sem_groups.setdefault(t % _SEM_GROUPS, set()).add(f"a{t:03d}")
        articles.append(Article(f"a{t:03d}", f"article {t}", f"{lex} {sem} bg"))

    queries = []
    for t in range(n_queries):
        fam = families[t]
        if fam == "align":
            g = t % _SEM_GROUPS
            queries.append(Query(f"q{t:03d}", f"qsem{g:02d} bg", set(sem_groups[g])))
        elif fam == "decoy":
            sem = f"qsem{(t + 3) % _SEM_GROUPS:02d}"
            queries.append(Query(f"q{t:03d}", f"lexb{t:03d} {sem} bg", {f"a{t:03d}"}))
        else:
            sem = f"qsem{t % _SEM_GROUPS:02d}"
            queries.append(
                Query(f"q{t:03d}", f"lexa{pair_of[t]:03d} {sem} bg", {f"a{t:03d}"})
            )
    return articles, queries


_SEG_LEVEL = {"R": 0, "E": 1, "U": 2}


def _segment(rng, typ: str) -> tuple[list[str], list[str]]:
    """One typ segment: begin token, 0-2 inside tokens, end token."""
    n_inside = int(rng.integers(0, 3))
    tokens = [f"{typ.lower()}b{rng.integers(0, 3)}"]
    tags = [f"B-{typ}"]
    for _ in range(n_inside):
        tokens.append(f"{typ.lower()}m{rng.integers(0, 3)}")
        tags.append(f"I-{typ}")
    tokens.append(f"{typ.lower()}e{rng.integers(0, 3)}")
    tags.append(f"E-{typ}")
    return tokens, tags


def bracket_grammar(n_samples: int, seed: int) -> list[BioeSample]:
    """Sentences of requisite/effectuation segments, optional unless tail,
    with filler tokens tagged O on all levels."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_samples):
        tokens: list[str] = []
        tags: list[list[str]] = [[], [], []]

        def pad(k):
            for _ in range(k):
                tokens.append(f"o{rng.integers(0, 4)}")
                for lv in range(3):
                    tags[lv].append("O")

        def emit(typ):
            seg_tokens, seg_tags = _segment(rng, typ)
            level = _SEG_LEVEL[typ]
            for tok, tag in zip(seg_tokens, seg_tags):
                tokens.append(tok)
                for lv in range(3):
                    tags[lv].append(tag if lv == level else "O")

        pad(int(rng.integers(0, 2)))
        emit("R")
        pad(int(rng.integers(0, 2)))
        emit("E")
        if rng.random() < 0.5:
            pad(int(rng.integers(0, 2)))
            emit("U")
        pad(int(rng.integers(0, 2)))
        samples.append(BioeSample(tokens, tags))
    return samples
