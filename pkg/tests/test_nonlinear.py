"""Trilinear form against the analytic convolution oracle and its identities."""

import numpy as np
import pytest

from snse.basis import SpectralField, get_basis, random_field
from snse.nonlinear import (
    bilinear_b, bilinear_b_batch, coupling_tensor, nonlinear_term,
    nonlinear_term_batch, verify_b_estimates,
)

from oracles import conv_b_modes, conv_coupling_dense, conv_nonlinear, embed


@pytest.fixture(scope="module")
def oracle_dense2():
    return conv_coupling_dense(get_basis(2))


class TestIdentities:
    def test_zero_field(self, basis4):
        z = SpectralField.zero(basis4)
        assert nonlinear_term(z).norm_h == 0.0

    def test_single_mode_self_advection_vanishes(self, basis4):
        for idx in (0, 3, 11, 40):
            u = SpectralField.from_modes(basis4, {idx: 1.7})
            assert nonlinear_term(u).norm_h < 1e-13

    def test_energy_conservation(self, basis4, rng):
        for _ in range(20):
            u = random_field(basis4, rng, decay=rng.uniform(0.3, 1.2))
            v = random_field(basis4, rng, decay=rng.uniform(0.3, 1.2))
            assert abs(bilinear_b(u, v, v)) <= 1e-10 * max(1.0, u.norm_h * v.norm_v**2)

    def test_antisymmetry(self, basis4, rng):
        for _ in range(20):
            u, v, w = (random_field(basis4, rng, decay=rng.uniform(0.3, 1.2))
                       for _ in range(3))
            scale = u.norm_h * (v.norm_v * w.norm_h + w.norm_v * v.norm_h)
            assert abs(bilinear_b(u, v, w) + bilinear_b(u, w, v)) <= 1e-10 * max(1.0, scale)

    def test_projection_orthogonal_to_state(self, basis4, rng):
        u = random_field(basis4, rng, decay=0.5)
        bu = nonlinear_term(u)
        assert abs(bu.dot(u)) <= 1e-10 * max(1.0, u.norm_h * u.norm_v**2)


class TestAgainstConvolutionOracle:
    def test_mode_triples(self, basis2, oracle_dense2):
        rng = np.random.default_rng(7)
        eye = np.eye(basis2.dim)
        for _ in range(200):
            i, j, l = rng.integers(0, basis2.dim, size=3)
            ours = bilinear_b_batch(basis2, eye[i], eye[j], eye[l])
            assert abs(float(ours) - oracle_dense2[i, j, l]) < 1e-12

    def test_coupling_tensor_matches_oracle(self, basis2, oracle_dense2):
        tens = coupling_tensor(basis2)
        dense = np.zeros_like(oracle_dense2)
        dense[tens.i, tens.j, tens.l] = tens.vals
        assert np.max(np.abs(dense - oracle_dense2)) < 1e-12

    def test_nonlinear_term_matches_oracle_fields(self, basis2, oracle_dense2, rng):
        for _ in range(25):
            u = random_field(basis2, rng, decay=rng.uniform(0.0, 1.0))
            ours = nonlinear_term(u).coeffs
            ref = conv_nonlinear(basis2, u.coeffs, dense=oracle_dense2)
            assert np.max(np.abs(ours - ref)) < 1e-9

    def test_tensor_apply_matches_direct(self, basis2, rng):
        tens = coupling_tensor(basis2)
        u = random_field(basis2, rng, decay=0.4)
        assert np.allclose(tens.apply(u.coeffs), nonlinear_term(u).coeffs, atol=1e-12)

    def test_oracle_self_consistency(self, basis2):
        # the analytic route reproduces the antisymmetry identity on its own
        m = get_basis(2).modes
        for (a, b, c) in ((0, 2, 5), (1, 4, 8), (3, 7, 2)):
            assert conv_b_modes(m[a], m[b], m[c]) == pytest.approx(
                -conv_b_modes(m[a], m[c], m[b]), abs=1e-14)


class TestResolutionIndependence:
    def test_embedding_invariance(self, basis2, basis4, rng):
        # same fields represented on a finer basis give the same b
        u, v, w = (random_field(basis2, rng, decay=0.5) for _ in range(3))
        b_small = bilinear_b(u, v, w)
        b_big = bilinear_b(embed(u, basis4), embed(v, basis4), embed(w, basis4))
        assert b_small == pytest.approx(b_big, abs=1e-12, rel=1e-12)


class TestEstimates:
    def test_interpolation_bound_holds(self, basis4):
        rep = verify_b_estimates(basis4, n_samples=500, seed=11)
        assert 0.0 < rep.interp_hv_max <= 1.0

    def test_domain_ratio_finite(self, basis4):
        rep = verify_b_estimates(basis4, n_samples=500, seed=11)
        assert np.isfinite(rep.dom_ratio_max)
        assert rep.dom_ratio_max > 0.0


class TestBatchShapes:
    def test_batch_matches_scalar(self, basis2, rng):
        cu = rng.standard_normal((6, basis2.dim))
        cv = rng.standard_normal((6, basis2.dim))
        cw = rng.standard_normal((6, basis2.dim))
        batch = bilinear_b_batch(basis2, cu, cv, cw)
        for p in range(6):
            one = bilinear_b_batch(basis2, cu[p], cv[p], cw[p])
            assert float(one) == pytest.approx(batch[p], rel=1e-13, abs=1e-13)

    def test_nonlinear_batch_matches_scalar(self, basis2, rng):
        c = rng.standard_normal((5, basis2.dim))
        batch = nonlinear_term_batch(basis2, c)
        for p in range(5):
            one = nonlinear_term_batch(basis2, c[p])
            assert np.allclose(batch[p], one, atol=1e-13)
