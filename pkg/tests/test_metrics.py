import math

import numpy as np
import pytest

from kdretrieval.corpus import CandidateSet
from kdretrieval.exceptions import AlignmentError, EmptyError
from kdretrieval.metrics import dcg, evaluate, rank_claim, recall_macro, recall_micro, report


def oracle(instances, k):
    """Plain-loop recomputation straight from the definitions."""
    hits = rel = 0
    macro = ndcg = 0.0
    for cands, labels, scores in instances:
        order = sorted(range(len(cands)), key=lambda j: (-scores[j], cands[j]))
        ranked = [labels[j] for j in order]
        h = sum(ranked[:k])
        hits += h
        rel += sum(labels)
        macro += h / sum(labels)
        g = sum(r / math.log2(j + 2) for j, r in enumerate(ranked))
        ideal = sum(1 / math.log2(j + 2) for j in range(sum(labels)))
        ndcg += g / ideal
    n = len(instances)
    return 100 * hits / rel, 100 * macro / n, 100 * ndcg / n


def random_instance(rng, C=10):
    labels = [0] * C
    for j in rng.choice(C, int(rng.integers(1, 4)), replace=False):
        labels[j] = 1
    # coarse scores so ties are common
    scores = rng.integers(0, 4, C).astype(float)
    return [f"d{j:02d}" for j in rng.permutation(C)], labels, scores


def test_thousand_random_instances_match_oracle():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        inst = [random_instance(rng) for _ in range(int(rng.integers(1, 5)))]
        ranked = [rank_claim(str(i), c, l, s) for i, (c, l, s) in enumerate(inst)]
        for k in (1, 3, 5):
            mi, ma, dc = oracle(inst, k)
            assert abs(recall_micro(ranked, k) - mi) < 1e-9
            assert abs(recall_macro(ranked, k) - ma) < 1e-9
            assert abs(dcg(ranked) - dc) < 1e-9


def test_monotone_in_k_and_full_recall_at_c():
    rng = np.random.default_rng(1)
    ranked = [rank_claim(str(i), *random_instance(rng)) for i in range(30)]
    micro = [recall_micro(ranked, k) for k in range(1, 11)]
    assert micro == sorted(micro) and micro[-1] == 100.0 and recall_macro(ranked, 10) == 100.0


def test_oracle_scores_give_perfect_metrics():
    sets = [CandidateSet("a", ["x", "y", "z"], [0, 1, 1]), CandidateSet("b", ["p", "q", "r"], [1, 0, 0])]
    rep = evaluate({s.claim_id: s.labels for s in sets}, sets)
    assert (rep.r1, rep.recall_micro_3, rep.recall_macro_3, rep.dcg) == (pytest.approx(200 / 3), 100.0, 100.0, 100.0)
    single = [CandidateSet(str(i), [f"d{j}" for j in range(10)], [int(j == i) for j in range(10)]) for i in range(10)]
    rep = evaluate({s.claim_id: s.labels for s in single}, single)
    assert all(v == 100.0 for v in rep.row())


def test_anti_oracle_single_gold():
    s = CandidateSet("a", [f"d{j}" for j in range(10)], [1] + [0] * 9)
    ranked = [rank_claim("a", s.candidates, s.labels, [-v for v in s.labels])]
    assert recall_micro(ranked, 3) == 0.0 and recall_micro(ranked, 5) == 0.0
    assert dcg(ranked) == pytest.approx(100 / math.log2(11), abs=1e-12)


def test_ties_break_by_ascending_id():
    r = rank_claim("a", ["d3", "d1", "d2"], [1, 0, 0], [0.5, 0.5, 0.5])
    assert r.ranked_doc_ids == ("d1", "d2", "d3")
    assert recall_micro([r], 1) == 0.0 and recall_micro([r], 3) == 100.0


def test_report_columns():
    rng = np.random.default_rng(2)
    ranked = [rank_claim(str(i), *random_instance(rng)) for i in range(7)]
    rep = report(ranked)
    assert rep.r1 == recall_micro(ranked, 1) and rep.recall_macro_5 == recall_macro(ranked, 5) and rep.n == 7


def test_errors():
    with pytest.raises(EmptyError):
        report([])
    with pytest.raises(AlignmentError):
        rank_claim("a", ["x", "y"], [1, 0], [0.1])
    with pytest.raises(AlignmentError):
        rank_claim("a", ["x", "y"], [1, 0], [0.1, float("nan")])
    with pytest.raises(EmptyError):
        report([rank_claim("a", ["x", "y"], [0, 0], [1, 2])])
    with pytest.raises(ValueError):
        recall_micro([rank_claim("a", ["x", "y"], [1, 0], [1, 2])], 3)
    with pytest.raises(AlignmentError):
        evaluate({}, [CandidateSet("a", ["x"], [1])])
