import numpy as np
import pytest

from kdretrieval.autodiff import Tape, Tensor, grad_check, ops
from kdretrieval.distillation import LossConfig, combined_loss
from kdretrieval.exceptions import CheckpointError, ShapeError, VocabError
from kdretrieval.models import (
    EncoderConfig,
    StudentModel,
    TeacherConfig,
    TeacherModel,
    count_params,
    encode_claim,
    encode_document,
    init_params,
    load_model,
    model_from_bytes,
    student_score,
    teacher_score,
)

V = 502  # synthetic corpus vocabulary (500 words + PAD/UNK)


def small(variant="lstm", seed=0, **kw):
    cfg = dict(vocab_size=12, embed_dim=4, hidden_dim=3, kernel_widths=(2, 3), filters=2, seed=seed)
    cfg.update(kw)
    return StudentModel(EncoderConfig(**cfg), variant)


def small_teacher(seed=0, **kw):
    cfg = dict(vocab_size=12, embed_dim=4, hidden_dim=3, seed=seed)
    cfg.update(kw)
    return TeacherModel(TeacherConfig(**cfg))


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


# -- initialisation ---------------------------------------------------------

def test_init_is_seeded():
    a, b, c = small(seed=3), small(seed=3), small(seed=4)
    for k in a.params:
        assert a.params[k].data.tobytes() == b.params[k].data.tobytes()
    assert any(not np.array_equal(a.params[k].data, c.params[k].data) for k in a.params if k != "join.b"
               and not k.endswith(".b"))


def test_embedding_is_first_forty_draws():
    m = StudentModel(EncoderConfig(vocab_size=10, embed_dim=4, seed=0), "lstm")
    ref = np.random.default_rng(0).uniform(-0.1, 0.1, size=40).reshape(10, 4)
    assert np.array_equal(m.params["embedding"].data, ref)


def test_biases_zero_weights_in_range():
    p = init_params([("w", (50, 3), False), ("b", (3,), True)], seed=1)
    assert np.all(p["b"].data == 0)
    assert np.all(np.abs(p["w"].data) <= 0.1)


# -- encoders ----------------------------------------------------------------

@pytest.mark.parametrize("variant", ["lstm", "cnn"])
def test_encoder_determinism_and_padding(variant):
    m = small(variant)
    doc = [3, 4, 5, 6]
    assert np.array_equal(encode_document(m, doc), encode_document(m, list(doc)))
    assert np.array_equal(encode_claim(m, [2, 9]), encode_claim(m, [2, 9]))
    pad = encode_document(m, [0, 0, 0])
    assert pad.shape == (3,) and np.all(np.isfinite(pad))
    assert np.all(np.isfinite(encode_document(m, [])))
    with pytest.raises(VocabError):
        encode_document(m, [12])


@pytest.mark.parametrize("variant", ["lstm", "cnn"])
def test_batched_encoding_matches_single(variant):
    m = small(variant)
    docs = [[3, 4, 5, 6, 7], [2], [8, 9, 10]]
    batch = m.encode_documents(docs).data
    for i, d in enumerate(docs):
        np.testing.assert_allclose(batch[i], encode_document(m, d), rtol=0, atol=1e-14)


def test_claim_encoding_ignores_documents():
    m = small("lstm")
    before = encode_claim(m, [2, 3, 4])
    m.encode_documents([[5, 6, 7, 8]])
    assert np.array_equal(before, encode_claim(m, [2, 3, 4]))
    # the document tower has no claim input at all; scoring two docs leaves claim encodings fixed
    logits1 = m.score_candidates([[2, 3, 4]], [[5, 6], [7, 8]], [[0, 1]]).data
    logits2 = m.score_candidates([[2, 3, 4]], [[5, 6], [9, 9, 9]], [[0, 1]]).data
    assert logits1[0, 0] == logits2[0, 0]


def test_cnn_hand_forward():
    m = StudentModel(EncoderConfig(vocab_size=6, embed_dim=2, hidden_dim=2, kernel_widths=(2,), filters=1, seed=5),
                     "cnn")
    p = {k: v.data for k, v in m.params.items()}
    toks = [1, 4, 2]
    x = p["embedding"][toks]                                  # (3, 2)
    K, b = p["doc.conv2.K"], p["doc.conv2.b"]                 # (2, 2, 1), (1,)
    conv = [max(0.0, sum(x[t + j] @ K[j, :, 0] for j in range(2)) + b[0]) for t in range(2)]
    pooled = np.array([max(conv)])
    expected = np.tanh(pooled @ p["doc.proj.W"] + p["doc.proj.b"])
    np.testing.assert_allclose(encode_document(m, toks), expected, rtol=0, atol=1e-14)


def test_lstm_single_token_is_one_cell_step():
    m = small("lstm", seed=2)
    p = {k: v.data for k, v in m.params.items()}
    e = p["embedding"][7]
    H = 3
    z = e @ p["claim.lstm.W"] + p["claim.lstm.b"]  # h0 = c0 = 0
    i, f, o, g = sigmoid(z[:H]), sigmoid(z[H:2 * H]), sigmoid(z[2 * H:3 * H]), np.tanh(z[3 * H:])
    c = i * g
    h = o * np.tanh(c)
    np.testing.assert_allclose(encode_claim(m, [7]), h, rtol=0, atol=1e-15)
    h2, _ = ops.lstm_cell(Tensor(e[None]), Tensor(np.zeros((1, H))), Tensor(np.zeros((1, H))),
                          m.params["claim.lstm.W"], m.params["claim.lstm.U"], m.params["claim.lstm.b"])
    np.testing.assert_allclose(h2.data[0], h, rtol=0, atol=1e-15)


# -- join head ---------------------------------------------------------------

def test_zero_head_scores_zero():
    m = small()
    m.params["join.w"].data = np.zeros(9)
    assert student_score(m, np.ones(3), np.arange(3.0)) == 0.0


def test_head_is_linear_in_weights():
    m = small(seed=1)
    c, d = encode_claim(m, [2, 3]), encode_document(m, [4, 5, 6])
    s1 = student_score(m, c, d)
    m.params["join.w"].data = 2 * m.params["join.w"].data
    assert student_score(m, c, d) == pytest.approx(2 * s1, rel=1e-14)


def test_head_hand_computation():
    m = small(seed=6)
    m.params["join.b"].data = np.array(0.25)
    c, d = np.array([0.1, -0.2, 0.3]), np.array([0.5, 0.4, -0.6])
    w = m.params["join.w"].data
    expected = w[:3] @ c + w[3:6] @ d + w[6:] @ (c * d) + 0.25
    assert student_score(m, c, d) == pytest.approx(expected, abs=1e-15)
    with pytest.raises(ShapeError):
        student_score(m, np.ones(3), np.ones(4))


# -- teacher ------------------------------------------------------------------

def test_teacher_determinism_and_cross_dependence():
    for seed in range(10):
        t = small_teacher(seed=seed)
        base = teacher_score(t, [2, 3, 4], [5, 6, 7, 8])
        assert base == teacher_score(t, [2, 3, 4], [5, 6, 7, 8])
        assert abs(teacher_score(t, [2, 9, 4], [5, 6, 7, 8]) - base) > 0


def test_teacher_affinity_is_product():
    t = TeacherModel(TeacherConfig(vocab_size=6, embed_dim=2, hidden_dim=2, seed=1))
    out = t.coattend([[2, 3]], [[4, 5]])
    D, Q = out["D"].data[0], out["Q"].data[0]
    L = np.array([[sum(D[i, k] * Q[j, k] for k in range(2)) for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(out["affinity"].data[0], L, rtol=0, atol=1e-16)


def test_teacher_pairs_batch_consistent():
    t = small_teacher(seed=3)
    claims, docs = [[2, 3], [4, 5, 6, 7]], [[8, 9, 10], [2]]
    batch = t.score_pairs(claims, docs).data
    for i in range(2):
        assert batch[i] == pytest.approx(teacher_score(t, claims[i], docs[i]), abs=1e-13)


# -- end-to-end gradients -----------------------------------------------------

@pytest.mark.parametrize("variant", ["lstm", "cnn"])
def test_student_loss_gradcheck(variant):
    for seed in range(10):
        m = small(variant, seed=seed)
        rng = np.random.default_rng(seed)
        t = rng.normal(size=(1, 2))

        def f(*ps):
            return combined_loss(LossConfig(0.5, 2.0, "ce"), np.array([[1.0, 0.0]]), t,
                                 m.score_candidates([[2, 3, 4]], [[5, 6, 7], [8, 9]], [[0, 1]]))

        # each parameter tensor is perturbed in place; max_coords keeps the suite quick
        assert grad_check(f, list(m.params.values()), max_coords=6, seed=seed) < 1e-4


def test_teacher_gradcheck():
    for seed in range(10):
        t = small_teacher(seed=seed)

        def f(*ps):
            return ops.sum(t.score_pairs([[2, 3, 4], [5]], [[6, 7], [8, 9, 10]]))

        assert grad_check(f, list(t.params.values()), max_coords=6, seed=seed) < 1e-4


# -- parameter counts ---------------------------------------------------------

def test_affine_count():
    from kdretrieval.models.base import affine_param_count

    assert affine_param_count(7, 3) == 24


def test_default_counts_match_formulas():
    s = StudentModel(EncoderConfig(V), "lstm")
    c = StudentModel(EncoderConfig(V), "cnn")
    t = TeacherModel(TeacherConfig(V))
    for m in (s, c, t):
        assert count_params(m) == m.expected_param_count()
    E, H = 64, 64
    lstm = 4 * H * (E + H) + 4 * H
    assert count_params(s) == V * E + 2 * lstm + 3 * H + 1
    assert count_params(t) / count_params(s) >= 10


# -- checkpoints ---------------------------------------------------------------

@pytest.mark.parametrize("make", [lambda: small("lstm"), lambda: small("cnn"), lambda: small_teacher()])
def test_checkpoint_round_trip(tmp_path, make):
    m = make()
    digest = m.save(tmp_path / "m.ckpt")
    back = load_model(tmp_path / "m.ckpt")
    assert type(back) is type(m) and back.variant == m.variant and back.config == m.config
    for k in m.params:
        assert m.params[k].data.tobytes() == back.params[k].data.tobytes()
    assert back.to_bytes() == m.to_bytes() and digest == m.fingerprint()


def test_corrupt_checkpoint():
    blob = small().to_bytes()
    with pytest.raises(CheckpointError):
        model_from_bytes(b"XXXXXXXX" + blob[8:])
    with pytest.raises(CheckpointError):
        model_from_bytes(blob[:-8])
