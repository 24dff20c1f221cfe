import numpy as np
import pytest
from sklearn.metrics import f1_score, normalized_mutual_info_score

from flowfusion.metrics import (MFQConfig, accuracy, canonical_correlations, cca_score, f1,
                                histogram_nmi, macro_f1, mfq, mi_score, tcs)


class TestAccuracy:
    def test_three_of_four(self):
        assert accuracy([0, 1, 2, 3], [0, 1, 2, 0]) == 0.75

    def test_all_correct(self):
        assert accuracy([1, 1, 0], [1, 1, 0]) == 1.0

    def test_all_wrong(self):
        assert accuracy([1, 1, 0], [0, 0, 1]) == 0.0

    def test_empty(self):
        with pytest.raises(ValueError):
            accuracy([], [])


class TestF1:
    def test_perfect(self):
        assert f1([1, 0, 1], [1, 0, 1], 1) == 1.0

    def test_half(self):
        assert f1([1, 1, 0], [1, 0, 1], 1) == 0.5

    def test_no_positives(self):
        assert f1([0, 0], [0, 0], 1) == 0.0

    @pytest.mark.parametrize("seed", range(10))
    def test_against_sklearn(self, seed):
        rng = np.random.default_rng(seed)
        y, p = rng.integers(0, 4, 50), rng.integers(0, 4, 50)
        assert f1(p, y, 2) == pytest.approx(f1_score(y, p, labels=[2], average="macro", zero_division=0))
        assert macro_f1(p, y, range(4)) == pytest.approx(
            f1_score(y, p, labels=range(4), average="macro", zero_division=0))


class TestTCS:
    def test_constant(self):
        assert tcs(np.tile([[0.2, 0.5, 0.3]], (6, 1))) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert tcs([[1, 0], [0, 1], [1, 0]]) == 0.0

    def test_opposite(self):
        assert tcs([[1, 0], [-1, 0]]) == -1.0

    def test_batched_mean(self):
        batch = np.array([[[1, 0], [1, 0]], [[1, 0], [0, 1]]], dtype=float)
        assert tcs(batch) == 0.5

    def test_single_frame(self):
        with pytest.raises(ValueError):
            tcs([[1.0, 0.0]])


class TestCCA:
    def test_self(self):
        v = np.random.default_rng(0).normal(size=(200, 3))
        assert cca_score(v, v) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_affine_invariance(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(300, 4))
        a = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        assert cca_score(v, v @ a + rng.normal(size=4)) == pytest.approx(1.0, abs=1e-6)

    def test_independent(self):
        rng = np.random.default_rng(1)
        assert cca_score(rng.normal(size=(2000, 4)), rng.normal(size=(2000, 4))) < 0.3

    def test_against_sklearn(self):
        from sklearn.cross_decomposition import CCA

        rng = np.random.default_rng(2)
        z = rng.normal(size=(500, 1))
        v = np.hstack([z, rng.normal(size=(500, 2))]) @ rng.normal(size=(3, 3))
        t = np.hstack([z + 0.5 * rng.normal(size=(500, 1)), rng.normal(size=(500, 1))])
        a, b = CCA(n_components=1, max_iter=2000, tol=1e-12).fit_transform(v, t)
        ref = abs(np.corrcoef(a[:, 0], b[:, 0])[0, 1])
        assert canonical_correlations(v, t)[0] == pytest.approx(ref, abs=1e-5)

    def test_small_sample_ridge(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=(4, 6))
        assert 0.0 <= cca_score(v, rng.normal(size=(4, 6))) <= 1.0


class TestMI:
    def test_against_sklearn_nmi(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=1000), rng.normal(size=1000)
        b = a + 0.5 * b
        edges = lambda x: np.linspace(x.min(), x.max(), 17)  # noqa: E731
        da = np.clip(np.digitize(a, edges(a)[1:-1]), 0, 15)
        db = np.clip(np.digitize(b, edges(b)[1:-1]), 0, 15)
        ref = normalized_mutual_info_score(da, db, average_method="geometric")
        assert histogram_nmi(a, b, 16) == pytest.approx(ref, abs=1e-10)

    def test_copy(self):
        v = np.random.default_rng(1).normal(size=(2000, 3))
        assert mi_score(v, v, v, 16) >= 0.9

    def test_independent(self):
        rng = np.random.default_rng(2)
        v = rng.normal(size=(2000, 3))
        assert mi_score(rng.normal(size=(2000, 3)), v, v, 16) <= 0.1

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            mi_score(np.ones((10, 2)), np.ones((10, 2)), np.ones((10, 2)), 16)

    def test_joint_mode(self):
        rng = np.random.default_rng(3)
        v, t = rng.normal(size=(500, 2)), rng.normal(size=(500, 2))
        assert 0.0 <= mi_score(np.hstack([v, t]), v, t, 8, "joint") <= 1.0


class TestMFQ:
    def test_alpha_one_is_cca(self):
        rng = np.random.default_rng(0)
        v, t, f = (rng.normal(size=(300, 3)) for _ in range(3))
        assert mfq(f, v, t, MFQConfig(alpha=1.0)) == cca_score(v, t)

    def test_alpha_zero_is_mi(self):
        rng = np.random.default_rng(1)
        v, t, f = (rng.normal(size=(300, 3)) for _ in range(3))
        assert mfq(f, v, t, MFQConfig(alpha=0.0)) == mi_score(f, v, t)

    def test_self(self):
        v = np.random.default_rng(2).normal(size=(2000, 3))
        assert mfq(v, v, v) >= 0.95

    def test_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(64, 200))
            v, t, f = rng.normal(size=(n, 3)), rng.normal(size=(n, 2)), rng.normal(size=(n, 4))
            assert 0.0 <= mfq(f, v, t) <= 1.0

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            MFQConfig(alpha=1.5)
