import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kdretrieval.corpus import assemble_dataset, make_synthetic
from kdretrieval.distillation import TokenStore
from kdretrieval.estimators import CandidateMiner, StudentRanker, TeacherRanker


@pytest.fixture(scope="module")
def data():
    docs, claims = make_synthetic(n_docs=25, n_claims=20, vocab_size=50, doc_len=6, claim_len=4, overlap=4, seed=3)
    return docs, claims, TokenStore(docs, claims)


def test_miner_matches_functional_api(data):
    docs, claims, _ = data
    miner = CandidateMiner(n_candidates=5).fit(docs)
    assert [s.to_json() for s in miner.transform(claims)] == [s.to_json() for s in assemble_dataset(claims, docs, 5)]
    assert miner.n_documents_ == 25
    assert len(miner.rank(claims[0], 3)) == 3
    with pytest.raises(NotFittedError):
        CandidateMiner().transform(claims)


def test_params_and_clone():
    s = StudentRanker(variant="cnn", alpha=0.2, temperature=3.0)
    assert s.get_params()["alpha"] == 0.2 and clone(s).get_params() == s.get_params()
    assert TeacherRanker().get_params()["hidden_dim"] == 200
    assert s.set_params(alpha=0.5).alpha == 0.5


def test_teacher_then_distilled_student(data):
    docs, claims, store = data
    sets = CandidateMiner(4).fit(docs).transform(claims)
    teacher = TeacherRanker(embed_dim=6, hidden_dim=5, epochs=1).fit(sets, store=store)
    cache = teacher.logit_cache(sets, store)
    student = StudentRanker(embed_dim=6, hidden_dim=5, alpha=0.5, temperature=3.0, epochs=1)
    student.fit(sets, store=store, teacher_logits=cache)
    pred = student.predict(sets, store)
    assert pred.shape == (20, 4) and np.all(np.isfinite(pred))
    assert 0 <= student.score(sets, store) <= 100
    again = clone(student).fit(sets, store=store, teacher_logits=cache)
    assert again.model_.to_bytes() == student.model_.to_bytes()
