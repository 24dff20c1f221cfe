import numpy as np
import pytest

from flowfusion import tensor as T
from flowfusion.encoders import (EncoderConfig, StubEncoders, encode_text_stub, encode_video_stub,
                                 level_length, level_transform, pool_matrix, sinusoidal_positions)
from flowfusion.params import ParamStore


def make_encoders(seed=0, **kw):
    cfg = EncoderConfig(seed=seed, **kw)
    return cfg, StubEncoders(cfg, ParamStore(), np.random.default_rng(seed))


class TestTextStub:
    def test_empty_sequence(self):
        cfg, enc = make_encoders()
        with pytest.raises(ValueError):
            encode_text_stub(np.zeros(0, dtype=int), enc.table, cfg)

    def test_out_of_vocabulary(self):
        cfg, enc = make_encoders()
        with pytest.raises(ValueError):
            encode_text_stub(np.array([0, cfg.vocab_size]), enc.table, cfg)

    def test_deterministic(self):
        tokens = np.arange(16) % 7
        ca, ea = make_encoders(3)
        cb, eb = make_encoders(3)
        a = encode_text_stub(tokens, ea.table, ca)
        b = encode_text_stub(tokens, eb.table, cb)
        np.testing.assert_array_equal(a.data, b.data)

    def test_seeds_differ(self):
        tokens = np.arange(16) % 7
        c0, e0 = make_encoders(0)
        c1, e1 = make_encoders(1)
        assert np.any(encode_text_stub(tokens, e0.table, c0).data != encode_text_stub(tokens, e1.table, c1).data)

    def test_embedding_plus_positions(self):
        cfg, enc = make_encoders()
        tokens = np.array([[5, 1, 5, 2]])
        out = encode_text_stub(tokens, enc.table, cfg).data
        expect = enc.table.data[tokens[0]] + sinusoidal_positions(4, cfg.model_dim)
        np.testing.assert_allclose(out[0], expect, atol=1e-15)

    def test_embedding_gradient_accumulates_repeats(self):
        cfg, enc = make_encoders()
        T.backward(T.sum(encode_text_stub(np.array([5, 1, 5]), enc.table, cfg)))
        assert np.all(enc.table.grad[5] == 2.0)
        assert np.all(enc.table.grad[1] == 1.0)
        assert not enc.table.grad[0].any()


class TestVideoStub:
    def test_zero_affine(self):
        cfg = EncoderConfig(raw_dim=3, model_dim=3)
        out = encode_video_stub(np.zeros((5, 3)), T.Tensor(np.zeros((3, 3))), T.Tensor(np.zeros(3)), cfg)
        assert not out.data.any()

    def test_identity_affine(self):
        cfg = EncoderConfig(raw_dim=3, model_dim=3)
        x = np.random.default_rng(0).normal(size=(5, 3))
        out = encode_video_stub(x, T.Tensor(np.eye(3)), T.Tensor(np.zeros(3)), cfg)
        np.testing.assert_array_equal(out.data, x)

    def test_per_row_oracle(self):
        rng = np.random.default_rng(1)
        cfg = EncoderConfig(raw_dim=4, model_dim=6)
        x, w, b = rng.normal(size=(2, 5, 4)), rng.normal(size=(6, 4)), rng.normal(size=6)
        out = encode_video_stub(x, T.Tensor(w), T.Tensor(b), cfg).data
        for i in range(2):
            for r in range(5):
                np.testing.assert_allclose(out[i, r], w @ x[i, r] + b, atol=1e-12)

    def test_wrong_raw_dim(self):
        cfg = EncoderConfig(raw_dim=4)
        with pytest.raises(T.DimensionError):
            encode_video_stub(np.zeros((5, 3)), T.Tensor(np.zeros((16, 4))), T.Tensor(np.zeros(16)), cfg)


class TestLevelTransform:
    def test_pooling_only(self):
        x = T.Tensor(np.array([[0.0], [2.0], [4.0], [6.0]]))
        out = level_transform(x, T.Tensor(np.eye(1)), T.Tensor(np.zeros(1)), nonlinear=False)
        np.testing.assert_array_equal(out.data, [[1.0], [5.0]])

    def test_two_rows_single_output(self):
        x = T.Tensor(np.ones((2, 3)))
        assert level_transform(x, T.Tensor(np.eye(3)), T.Tensor(np.zeros(3))).shape == (1, 3)

    def test_zero_affine(self):
        x = T.Tensor(np.random.default_rng(0).normal(size=(6, 3)))
        out = level_transform(x, T.Tensor(np.zeros((3, 3))), T.Tensor(np.zeros(3)))
        np.testing.assert_array_equal(out.data, np.zeros((3, 3)))

    def test_single_row_rejected(self):
        with pytest.raises(ValueError):
            level_transform(T.Tensor(np.ones((1, 3))), T.Tensor(np.eye(3)), T.Tensor(np.zeros(3)))

    def test_odd_tail_kept(self):
        np.testing.assert_array_equal(pool_matrix(3), [[0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])


class TestPyramid:
    def test_level_lengths(self):
        cfg, enc = make_encoders(levels=3, text_len=16, video_len=12)
        tokens = np.zeros((2, 16), dtype=int)
        frames = np.zeros((2, 12, cfg.raw_dim))
        p = enc.build_pyramid(tokens, frames)
        assert [t.shape for t in p.text] == [(2, 16, 16), (2, 8, 16), (2, 4, 16)]
        assert [v.shape[1] for v in p.video] == [12, 6, 3]
        assert [level_length(12, l) for l in (1, 2, 3)] == [12, 6, 3]

    def test_too_short_for_levels(self):
        with pytest.raises(ValueError):
            EncoderConfig(levels=4, text_len=4)

    def test_parameter_names(self):
        _, enc = make_encoders(levels=2)
        store = ParamStore()
        StubEncoders(EncoderConfig(levels=2), store, np.random.default_rng(0))
        assert store.names() == [
            "text_encoder.embedding", "video_encoder.weight", "video_encoder.bias",
            "levels.text2.weight", "levels.text2.bias", "levels.video2.weight", "levels.video2.bias",
        ]
