from dataclasses import replace

import numpy as np
import pytest

from flowfusion.harness import (LADDER, Adam, AdamState, DivergenceError, SyntheticDatasetConfig,
                                TrainConfig, adam_step, generate_dataset, run_ablation_ladder, train)
from flowfusion.harness import checkpoint
from flowfusion.harness.data import nearest_motif_predict
from flowfusion.harness.training import build_model, metrics_jsonl, restore_model
from flowfusion.metrics import accuracy
from flowfusion.tensor import Parameter

TINY_DATA = SyntheticDatasetConfig(num_samples=40, text_len=8, video_len=8, raw_dim=4, vocab_size=16,
                                   noise_sigma=0.5)
TINY_TRAIN = TrainConfig(epochs=2, batch_size=8, levels=2, model_dim=4, d_out=4, windows=2,
                         learning_rate=1e-2)


class TestData:
    def test_same_seed_same_bytes(self):
        assert generate_dataset(TINY_DATA).to_bytes() == generate_dataset(TINY_DATA).to_bytes()

    def test_seeds_differ(self):
        other = replace(TINY_DATA, seed=1)
        assert generate_dataset(TINY_DATA).to_bytes() != generate_dataset(other).to_bytes()

    def test_shapes_and_balance(self):
        d = generate_dataset(SyntheticDatasetConfig(num_samples=100))
        assert d.tokens.shape == (100, 16) and d.frames.shape == (100, 16, 8)
        assert np.bincount(d.classes).tolist() == [25] * 4
        assert set(d.sentiments) == {0, 1}

    def test_sentiment_channel(self):
        d = generate_dataset(SyntheticDatasetConfig(num_samples=200, noise_sigma=0.0))
        amp = d.frames[:, 0, 0]
        assert np.all((amp > 0) == (d.sentiments == 1))

    def test_nearest_motif_separable(self):
        cfg = SyntheticDatasetConfig(num_samples=400, noise_sigma=0.0, motif_strength=10.0)
        d = generate_dataset(cfg)
        assert accuracy(nearest_motif_predict(d, cfg.motif_frames), d.classes) == 1.0

    def test_permuted_labels_near_chance(self):
        cfg = SyntheticDatasetConfig(num_samples=1000, noise_sigma=0.0, motif_strength=10.0)
        d = generate_dataset(cfg)
        pred = nearest_motif_predict(d, cfg.motif_frames)
        accs = [accuracy(pred, np.random.default_rng(s).permutation(d.classes)) for s in range(5)]
        assert abs(np.mean(accs) - 0.25) <= 0.1

    def test_split_is_stratified_and_disjoint(self):
        d = generate_dataset(SyntheticDatasetConfig(num_samples=100))
        tr, va = d.split(0.2)
        assert len(tr) == 80 and len(va) == 20
        assert np.bincount(va.classes).tolist() == [5] * 4

    @pytest.mark.parametrize("kw", [dict(noise_sigma=-1.0), dict(motif_strength=0.0), dict(num_classes=1),
                                    dict(vocab_size=8), dict(motif_frames=20), dict(text_signal=2.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SyntheticDatasetConfig(**kw)


class TestAdam:
    def test_first_step(self):
        p = Parameter(np.array([1.0]), "p")
        adam_step([p], [np.array([3.0])], AdamState(), lr=1e-4)
        expect = 1.0 - 1e-4 * 3.0 / (3.0 + 1e-8)
        assert p.data[0] == pytest.approx(expect, abs=1e-15)
        assert p.data[0] == pytest.approx(1.0 - 1e-4, abs=1e-12)

    def test_zero_gradient(self):
        p = Parameter(np.array([1.0, -2.0]), "p")
        adam_step([p], [np.zeros(2)], AdamState(), lr=1e-3)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_decoupled_decay(self):
        p = Parameter(np.array([2.0]), "p")
        adam_step([p], [np.zeros(1)], AdamState(), lr=0.1, weight_decay=0.5)
        assert p.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)

    def test_trajectories_reproducible(self):
        def run():
            p = Parameter(np.array([0.5, -1.0]), "p")
            opt = Adam([p], lr=1e-2, weight_decay=1e-3)
            for i in range(20):
                p.grad[...] = np.sin(p.data * (i + 1))
                opt.step()
            return p.data.copy()
        assert np.array_equal(run(), run())

    def test_shape_mismatch(self):
        p = Parameter(np.zeros(2), "p")
        with pytest.raises(ValueError):
            adam_step([p], [np.zeros(3)], AdamState(), lr=1e-3)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        ck = checkpoint.Checkpoint({"a.w": rng.normal(size=(2, 3)), "b": np.float64(1.5)},
                                   {"a.w": rng.normal(size=(2, 3))}, {"a.w": rng.random((2, 3))},
                                   adam_step=7, rng_state={"x": 1}, config={"k": [1, 2]})
        checkpoint.save(tmp_path / "c.flsh", ck)
        back = checkpoint.load(tmp_path / "c.flsh")
        assert back.adam_step == 7 and back.rng_state == {"x": 1} and back.config == {"k": [1, 2]}
        for name, arr in ck.tensors().items():
            assert back.tensors()[name].shape == np.shape(arr)
            assert back.tensors()[name].tobytes() == np.asarray(arr).tobytes()
        assert checkpoint.encode(back) == checkpoint.encode(ck)

    def test_bad_magic(self):
        with pytest.raises(checkpoint.CheckpointError):
            checkpoint.decode(b"NOPE" + bytes(12))

    def test_truncated(self):
        blob = checkpoint.encode(checkpoint.Checkpoint({"w": np.ones(4)}))
        with pytest.raises(checkpoint.CheckpointError):
            checkpoint.decode(blob[:-5])

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        checkpoint.atomic_write(tmp_path / "x.txt", "hello")
        checkpoint.atomic_write(tmp_path / "x.txt", "world")
        assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
        assert (tmp_path / "x.txt").read_text() == "world"


class TestTraining:
    def test_zero_learning_rate(self):
        data = generate_dataset(TINY_DATA)
        # one full batch per epoch: shuffling cannot change the batch-dependent contrastive term
        cfg = replace(TINY_TRAIN, learning_rate=0.0, weight_decay=0.0, epochs=3, batch_size=64)
        model = build_model(TINY_DATA, cfg)
        before = model.store.state()
        result = train(data, TINY_DATA, cfg, model=model)
        for k, v in model.store.state().items():
            assert np.array_equal(v, before[k])
        first = result.history[0]
        for row in result.history[1:]:
            for key in ("cls", "sent", "temp", "cont", "reg", "total"):
                assert row[key] == pytest.approx(first[key], rel=1e-12, abs=1e-15)
            assert row["acc"] == first["acc"] and row["mfq"] == first["mfq"]

    def test_one_epoch_ten_samples(self, tmp_path):
        dc = replace(TINY_DATA, num_samples=10)
        cfg = replace(TINY_TRAIN, epochs=1)
        result = train(generate_dataset(dc), dc, cfg)
        assert len(result.history) == 1 and result.best_epoch == 1
        checkpoint.save(tmp_path / "c.flsh", result.best)
        assert checkpoint.encode(checkpoint.load(tmp_path / "c.flsh")) == checkpoint.encode(result.best)

    def test_deterministic_history(self):
        data = generate_dataset(TINY_DATA)
        a = train(data, TINY_DATA, TINY_TRAIN)
        b = train(data, TINY_DATA, TINY_TRAIN)
        assert metrics_jsonl(a.history) == metrics_jsonl(b.history)

    def test_restore_reproduces_forward(self):
        data = generate_dataset(TINY_DATA)
        result = train(data, TINY_DATA, TINY_TRAIN)
        model, _, _ = restore_model(checkpoint.decode(checkpoint.encode(result.best)))
        ref = build_model(TINY_DATA, TINY_TRAIN)
        ref.store.load_state(result.best.params)
        a, b = model(data.tokens, data.frames), ref(data.tokens, data.frames)
        assert a.class_probs.data.tobytes() == b.class_probs.data.tobytes()

    def test_disabled_groups_untouched(self):
        data = generate_dataset(TINY_DATA)
        cfg = replace(TINY_TRAIN, flags=LADDER["flow"])
        model = build_model(TINY_DATA, cfg)
        before = model.store.state()
        train(data, TINY_DATA, cfg, model=model)
        after = model.store.state()
        assert np.array_equal(before["gate.l1.weight"], after["gate.l1.weight"])
        assert not np.array_equal(before["attention.l1.w_q"], after["attention.l1.w_q"])

    def test_divergence(self):
        data = generate_dataset(TINY_DATA)
        with pytest.raises(DivergenceError):
            train(data, TINY_DATA, replace(TINY_TRAIN, learning_rate=1e6, epochs=5))

    def test_freeze(self):
        data = generate_dataset(TINY_DATA)
        cfg = replace(TINY_TRAIN, freeze=("text_encoder",))
        model = build_model(TINY_DATA, cfg)
        before = model.store.state()["text_encoder.embedding"]
        train(data, TINY_DATA, cfg, model=model)
        assert np.array_equal(model.store.state()["text_encoder.embedding"], before)


class TestAblation:
    def test_rows_and_names(self):
        data = generate_dataset(TINY_DATA)
        rows = run_ablation_ladder(data, TINY_DATA, replace(TINY_TRAIN, epochs=1))
        assert [r["config"] for r in rows] == list(LADDER)
        assert all(0.0 <= r["acc"] <= 1.0 for r in rows)

    @pytest.mark.slow
    def test_separable_ceiling(self):
        dc = SyntheticDatasetConfig(num_samples=200, noise_sigma=0.1, motif_strength=4.0, text_len=8,
                                    video_len=8, raw_dim=4, vocab_size=16)
        rows = run_ablation_ladder(generate_dataset(dc), dc,
                                   replace(TINY_TRAIN, epochs=15, model_dim=8, d_out=8))
        assert all(r["acc"] >= 0.9 for r in rows), rows
