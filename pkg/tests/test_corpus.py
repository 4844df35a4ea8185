import math

import numpy as np
import pytest

from kdretrieval.corpus import (
    CandidateSet,
    Claim,
    Document,
    SplitSpec,
    Vocabulary,
    assemble_dataset,
    build_tfidf_index,
    coverage_stats,
    make_synthetic,
    mine_candidates,
    read_dataset,
    split_claims,
    tokenize,
    write_dataset,
)
from kdretrieval.exceptions import EmptyCorpusError, InsufficientCorpusError, SplitError

TOY = [
    Document("a", "the cat sat on the mat"),
    Document("b", "a dog sat on a log"),
    Document("c", "the cat chased the dog"),
    Document("d", "stock markets fell sharply"),
    Document("e", "the mat was red"),
]


def dense_cosines(docs, query):
    """Brute-force TF-IDF cosine: dense matrix over every term in sight."""
    def grams(text):
        toks = tokenize(text)
        return toks + [a + " " + b for a, b in zip(toks, toks[1:])]

    doc_terms = [grams(d.text) for d in docs]
    q_terms = grams(query)
    vocab = sorted(set(t for ts in doc_terms for t in ts) | set(q_terms))
    col = {t: i for i, t in enumerate(vocab)}
    D = len(docs)
    tf = np.zeros((D, len(vocab)))
    for i, ts in enumerate(doc_terms):
        for t in ts:
            tf[i, col[t]] += 1
    df = (tf > 0).sum(axis=0)
    idf = np.log((1 + D) / (1 + df)) + 1
    q = np.zeros(len(vocab))
    for t in q_terms:
        q[col[t]] += 1
    X, qv = tf * idf, q * idf
    out = np.zeros(D)
    for i in range(D):
        n = np.linalg.norm(X[i]) * np.linalg.norm(qv)
        out[i] = X[i] @ qv / n if n > 0 else 0.0
    return out


def brute_rank(docs, query):
    s = dense_cosines(docs, query)
    # exact ties only arise from identical term multisets; 1e-10 rounding recovers them
    return [d.id for _, d in sorted(zip(s, docs), key=lambda p: (-round(p[0], 10), p[1].id))], s


def test_tokenize_rules():
    assert tokenize("") == []
    assert tokenize("The FEVER task.") == ["the", "fever", "task"]
    assert tokenize("C=10") == ["c", "10"]


def test_vocabulary_reserves_pad_unk():
    v = Vocabulary.build(["b a a", "c"])
    assert v.stoi["<pad>"] == 0 and v.stoi["<unk>"] == 1
    assert v.to_list() == ["a", "b", "c"]
    assert v.encode("a zzz") == [2, 1]
    assert v.decode(v.encode("c b")) == ["c", "b"]


def test_self_similarity_and_orthogonality():
    idx = build_tfidf_index([Document("x", "alpha beta gamma")])
    assert idx.scores("alpha beta gamma") == [1.0]
    idx = build_tfidf_index([Document("x", "alpha beta"), Document("y", "gamma delta")])
    assert idx.cosine(0, 1) == 0.0
    assert idx.cosine(0, 0) == 1.0


def test_toy_cosine_matrix_matches_dense():
    idx = build_tfidf_index(TOY)
    for j, d in enumerate(TOY):
        dense = dense_cosines(TOY, d.text)
        for i in range(len(TOY)):
            assert abs(idx.cosine(i, j) - dense[i]) < 1e-12


def test_idf_formula():
    idx = build_tfidf_index(TOY)
    assert idx.idf["the"] == math.log(6 / 4) + 1
    assert idx.idf["stock"] == math.log(6 / 2) + 1


def test_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        build_tfidf_index([])
    with pytest.raises(EmptyCorpusError):
        build_tfidf_index([Document("a", "..."), Document("b", "")])


def test_mine_identical_text_first():
    top = mine_candidates(Claim("q", TOY[3].text, ("d",)), build_tfidf_index(TOY), 2)
    assert top[0] == ("d", 1.0)


def test_mine_no_shared_vocabulary():
    res = mine_candidates("zebra quantum", build_tfidf_index(TOY), 5)
    assert [d for d, _ in res] == ["a", "b", "c", "d", "e"]
    assert all(s == 0.0 for _, s in res)
    res = mine_candidates("", build_tfidf_index(TOY), 5)
    assert [d for d, _ in res] == ["a", "b", "c", "d", "e"]


def test_mine_k_too_large():
    with pytest.raises(InsufficientCorpusError):
        mine_candidates("cat", build_tfidf_index(TOY), 6)


def _random_corpus(seed, n_docs=20):
    rng = np.random.default_rng(seed)
    words = [f"t{i}" for i in range(8)]
    ids = rng.permutation(1000)[:n_docs]  # shuffled ids so corpus order != id order
    docs = [Document(f"doc{int(i):03d}", " ".join(rng.choice(words, int(rng.integers(1, 7))))) for i in ids]
    query = " ".join(rng.choice(words, int(rng.integers(1, 5))))
    return docs, query


def test_mine_twenty_docs_k5():
    docs, query = _random_corpus(123)
    expected, _ = brute_rank(docs, query)
    assert [d for d, _ in mine_candidates(query, build_tfidf_index(docs), 5)] == expected[:5]


@pytest.mark.parametrize("seed", range(100))
def test_mine_matches_exhaustive_oracle(seed):
    docs, query = _random_corpus(seed)
    expected, dense = brute_rank(docs, query)
    got = mine_candidates(query, build_tfidf_index(docs), len(docs))
    assert [d for d, _ in got] == expected
    by_id = {d.id: s for d, s in zip(docs, dense)}
    assert all(abs(s - by_id[d]) < 1e-12 for d, s in got)


# -- candidate sets ---------------------------------------------------------

def test_c1_single_positive():
    sets = assemble_dataset([Claim("q", "dog log", ("b",))], TOY, 1)
    assert sets[0].candidates == ["b"] and sets[0].labels == [1]


def test_gold_third_by_tfidf():
    claim = Claim("q", "the cat sat on the mat", ("e",))
    ranked = [d for d, _ in mine_candidates(claim, build_tfidf_index(TOY), 3)]
    assert ranked[2] == "e"
    s = assemble_dataset([claim], TOY, 3)[0]
    assert s.candidates == ranked and s.labels == [0, 0, 1]


def test_gold_outside_top_c_is_kept_after_mined():
    claim = Claim("q", "the cat sat on the mat", ("d",))
    s = assemble_dataset([claim], TOY, 3)[0]
    ranked = [d for d, _ in build_tfidf_index(TOY).rank(claim.text)]
    assert s.candidates == ranked[:2] + ["d"] and s.labels == [0, 0, 1]


def test_two_positives_c10():
    docs, claims = make_synthetic(n_docs=30, n_claims=40, vocab_size=60, seed=2)
    two = [c for c in claims if len(c.relevant_doc_ids) == 2]
    assert two
    for s in assemble_dataset(two, docs, 10):
        assert sum(s.labels) == 2 and len(s.candidates) == 10 and len(set(s.candidates)) == 10


def test_more_positives_than_c_truncates_to_most_similar():
    claim = Claim("q", "the cat sat on the mat", ("a", "b", "c", "e"))
    s = assemble_dataset([claim], TOY, 2)[0]
    assert s.labels == [1, 1]
    ranked = [d for d, _ in build_tfidf_index(TOY).rank(claim.text) if d in claim.relevant_doc_ids]
    assert s.candidates == ranked[:2]


def test_assemble_too_small_corpus():
    with pytest.raises(InsufficientCorpusError):
        assemble_dataset([Claim("q", "cat", ("a",))], TOY, 6)


def test_dataset_file_is_byte_identical(tmp_path):
    docs, claims = make_synthetic(n_docs=30, n_claims=20, vocab_size=60, seed=4)
    write_dataset(tmp_path / "a.jsonl", assemble_dataset(claims, docs, 5))
    write_dataset(tmp_path / "b.jsonl", assemble_dataset(claims, docs, 5))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    back = read_dataset(tmp_path / "a.jsonl")
    assert [s.to_json() for s in back] == [s.to_json() for s in assemble_dataset(claims, docs, 5)]


def test_candidate_set_invariants():
    with pytest.raises(ValueError):
        CandidateSet("q", ["a", "a"], [1, 0])
    with pytest.raises(ValueError):
        CandidateSet("q", ["a", "b"], [0, 0])


# -- coverage ---------------------------------------------------------------

def test_coverage_matches_exhaustive_recount():
    docs, claims = make_synthetic(n_docs=60, n_claims=100, vocab_size=120, seed=5)
    Cs = [1, 2, 3, 5, 10, 20, 60]
    got = coverage_stats(claims, docs, Cs)
    for C in Cs:
        hits = 0
        for c in claims:
            top = set(brute_rank(docs, c.text)[0][:C])
            hits += all(g in top for g in c.relevant_doc_ids)
        assert got[C] == 100.0 * hits / len(claims)
    vals = [got[C] for C in Cs]
    assert vals == sorted(vals) and vals[-1] == 100.0


# -- splits ------------------------------------------------------------------

def test_split_sizes_and_determinism():
    claims = [Claim(f"c{i}", "x", ("a",)) for i in range(175)]
    s = split_claims(claims, SplitSpec(), seed=3)
    assert (len(s.train), len(s.dev), len(s.test)) == (145, 20, 10)
    ids = [c.id for part in (s.train, s.dev, s.test) for c in part]
    assert sorted(ids) == sorted(c.id for c in claims)
    t = split_claims(claims, SplitSpec(), seed=3)
    assert [c.id for c in t.dev] == [c.id for c in s.dev]
    everything = split_claims(claims, SplitSpec(175, 0, 0))
    assert len(everything.train) == 175


def test_split_oversubscribed():
    with pytest.raises(SplitError):
        split_claims([Claim("c", "x", ("a",))] * 3, SplitSpec(2, 2, 0))
