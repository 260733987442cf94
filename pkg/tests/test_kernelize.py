import numpy as np
import pytest

from xmhash.data import FeatureMatrix
from xmhash.kernelize import KernelModel, apply_kernel, fit_kernel


class TestFit:
    def test_q_equals_n_uses_every_column(self, rng):
        X = FeatureMatrix(rng.normal(size=(4, 12)))
        km = fit_kernel(X, q=12, seed=0)
        assert sorted(map(tuple, km.anchors.T)) == sorted(map(tuple, X.values.T))

    def test_deterministic(self, rng):
        X = FeatureMatrix(rng.normal(size=(4, 30)))
        a, b = fit_kernel(X, 10, seed=42), fit_kernel(X, 10, seed=42)
        np.testing.assert_array_equal(a.anchors, b.anchors)
        assert a.width == b.width

    def test_modalities_draw_different_anchors(self, rng):
        values = rng.normal(size=(4, 200))
        a = fit_kernel(FeatureMatrix(values, modality_id=0), 5, seed=1)
        b = fit_kernel(FeatureMatrix(values, modality_id=1), 5, seed=1)
        assert not np.array_equal(a.anchors, b.anchors)

    def test_degenerate_width_falls_back_to_one(self):
        X = FeatureMatrix(np.ones((3, 2)))  # two identical columns
        km = fit_kernel(X, q=1, seed=0)
        assert km.width == 1.0

    def test_q_too_large(self, rng):
        X = FeatureMatrix(rng.normal(size=(3, 5)))
        with pytest.raises(ValueError):
            fit_kernel(X, q=6, seed=0)


class TestApply:
    def test_anchor_maps_to_one(self, rng):
        X = FeatureMatrix(rng.normal(size=(5, 20)))
        km = fit_kernel(X, q=4, seed=3)
        phi = apply_kernel(km, FeatureMatrix(km.anchors)).values
        np.testing.assert_allclose(np.diag(phi), 1.0)

    def test_distance_sqrt2rho_gives_inverse_e(self):
        rho = 1.7
        km = KernelModel(anchors=np.zeros((1, 1)), width=rho)
        x = FeatureMatrix(np.array([[np.sqrt(2.0) * rho]]))
        phi = apply_kernel(km, x).values
        np.testing.assert_allclose(phi[0, 0], np.exp(-1.0), rtol=1e-12)

    def test_hand_evaluated_column(self):
        km = KernelModel(anchors=np.array([[0.0, 2.0]]), width=1.0)
        phi = apply_kernel(km, FeatureMatrix(np.array([[0.0]]))).values
        np.testing.assert_allclose(phi[:, 0], [1.0, np.exp(-2.0)], rtol=1e-12)

    def test_entries_in_unit_interval(self, rng):
        X = FeatureMatrix(rng.normal(size=(6, 50)))
        km = fit_kernel(X, 8, seed=0)
        phi = apply_kernel(km, X).values
        assert np.all(phi > 0) and np.all(phi <= 1)

    def test_permutation_equivariant(self, rng):
        X = rng.normal(size=(6, 30))
        km = fit_kernel(FeatureMatrix(X), 8, seed=0)
        perm = rng.permutation(30)
        phi = apply_kernel(km, FeatureMatrix(X)).values
        phi_p = apply_kernel(km, FeatureMatrix(X[:, perm])).values
        np.testing.assert_allclose(phi_p, phi[:, perm], rtol=1e-12)

    def test_monotone_in_distance(self):
        km = KernelModel(anchors=np.zeros((1, 1)), width=2.0)
        xs = np.linspace(0, 5, 20)[None, :]
        phi = apply_kernel(km, FeatureMatrix(xs)).values[0]
        assert np.all(np.diff(phi) < 0)

    def test_dimension_mismatch(self, rng):
        km = fit_kernel(FeatureMatrix(rng.normal(size=(4, 10))), 3, seed=0)
        with pytest.raises(ValueError):
            apply_kernel(km, FeatureMatrix(rng.normal(size=(5, 10))))
