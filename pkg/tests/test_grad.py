import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpcodes import _fallback
from bpcodes.decoder import BpConfig, bp_decode, row_active
from bpcodes.errors import InvalidParams
from bpcodes.grad import (LossConfig, bin, decode_loss, grad_wrt_H, grad_wrt_omega, loss_and_grad,
                          soft_h, ste_mask)

EPS = 1e-7


def forward_loss(L, H, T, summed):
    """Loss from the numpy forward pass alone (no adjoint involved)."""
    lam = -np.asarray(L, dtype=float)
    outs, _ = _fallback._forward(lam, H, T, EPS, np.inf, row_active(H), keep=False)
    used = outs if summed else outs[-1:]
    return sum(np.logaddexp(0.0, -o).sum() for o in used) / L.shape[0]


def central_diff(L, H, T, summed, h, order=2):
    """Central differences in every entry of H; ``order`` 2 or 4 (five-point stencil)."""
    weights = {2: {1: 0.5, -1: -0.5}, 4: {2: -1 / 12, 1: 8 / 12, -1: -8 / 12, -2: 1 / 12}}[order]
    g = np.zeros_like(H)
    for idx in np.ndindex(H.shape):
        acc = 0.0
        for k, w in weights.items():
            Hk = H.copy()
            Hk[idx] += k * h
            acc += w * forward_loss(L, Hk, T, summed)
        g[idx] = acc / h
    return g


def well_conditioned(L, H, T, tau=0.03, margin=1e-2):
    """Tape check for the two-point stencil.

    Every live tanh(Q/2) is at least ``tau`` in size and no X sits within
    ``margin`` of the clamp kink. A position is live when H is nonzero there
    or its X is unclamped; a masked X beyond +-1 is flat in H.
    """
    _, tape = _fallback._forward(-L, H, T, EPS, np.inf, row_active(H), keep=True)
    nz = (np.abs(H) > 1e-3)[None]
    for rec in tape:
        live = np.broadcast_to(nz | (np.abs(rec["X"]) < 1.0), rec["tt"].shape)
        if np.abs(rec["tt"])[live].min(initial=1.0) < tau:
            return False
        if np.abs(1.0 - np.abs(rec["X"])).min() < margin:
            return False
    return True


# (tau, margin) for each stencil. The loss has 1/tanh(Q/2) terms and clamp kinks,
# and a stencil's truncation error grows like (h / distance)^order near them.
STENCIL_CONDITIONS = {4: (3e-3, 1e-3), 2: (0.03, 1e-2)}


def draw_instance(rng, m, n, B, T, order=None):
    while True:
        H = (rng.random((m, n)) < 0.4).astype(float)
        L = rng.normal(0.0, 2.0, (B, n))
        if order is None or well_conditioned(L, H, T, *STENCIL_CONDITIONS[order]):
            return L, H


def rel_err(g, fd, floor=1e-6):
    mask = np.abs(g) > floor
    return float((np.abs(g - fd)[mask] / np.abs(fd[mask])).max(initial=0.0))


def cfg(T, mode="final"):
    return LossConfig(BpConfig(T), loss_mode=mode)


class TestSTE:
    def test_bin(self, rng):
        H = (rng.random((4, 7)) < 0.5).astype(np.uint8)
        np.testing.assert_array_equal(bin(1.0 - 2.0 * H), H)
        assert bin(-0.5) == 1 and bin(0.0) == 0 and bin(3.0) == 0

    @pytest.mark.parametrize("w,v", [(1.0, -0.5), (-1.0, -0.5), (2.0, 0.0), (0.0, -0.5), (-1.0000001, 0.0)])
    def test_ste_mask(self, w, v):
        assert ste_mask(w) == v

    def test_soft_h(self):
        H = np.array([[1, 0, 0, 1], [0, 1, 0, 0]])
        a = soft_h(H, 1e-7, seed=3)
        np.testing.assert_array_equal(a, soft_h(H, 1e-7, seed=3))
        assert (a[H == 1] == 1).all()
        assert set(np.abs(a[H == 0])) == {1e-7}
        many = soft_h(np.zeros((200, 50)), 1e-7, seed=0)
        assert abs((many > 0).mean() - 0.5) < 0.02


class TestLoss:
    def test_zero_llr(self, ldpc):
        assert decode_loss(np.zeros((3, 32)), ldpc, cfg(5)) == pytest.approx(32 * math.log(2), rel=1e-12)

    def test_confident_zeros(self, hamming):
        assert decode_loss(np.full((2, 7), -60.0), hamming, cfg(3)) < 1e-20

    def test_modes_agree_at_one_iteration(self, rng, ldpc):
        L = rng.normal(-1, 2, (5, 32))
        assert decode_loss(L, ldpc, cfg(1)) == decode_loss(L, ldpc, cfg(1, "summed"))

    def test_bce_equivalence(self, rng, ldpc):
        # independent route: BCE between sigmoid(o) = P(bit 1) and a zero target
        L = rng.normal(-1, 2, (40, 32))
        o = bp_decode(L, ldpc, BpConfig(5)).soft
        p1 = 1.0 / (1.0 + np.exp(-o))
        bce = -np.log1p(-p1).sum() / 40
        assert decode_loss(L, ldpc, cfg(5)) == pytest.approx(bce, rel=1e-12, abs=1e-12)

    def test_summed_mode(self, rng, ldpc):
        L = rng.normal(-1, 2, (6, 32))
        per = bp_decode(L, ldpc, BpConfig(4, emit_per_iteration=True)).per_iteration
        want = sum(np.logaddexp(0.0, o).sum() for o in per) / 6
        assert decode_loss(L, ldpc, cfg(4, "summed")) == pytest.approx(want, rel=1e-12)

    def test_edge_and_tensor_routes_agree(self, rng, ldpc):
        L = rng.normal(-1, 2, (30, 32))
        soft = ldpc.H * (1 - 1e-12)  # non-binary: forces the tensor route
        assert decode_loss(L, ldpc, cfg(5)) == pytest.approx(decode_loss(L, soft, cfg(5)), rel=1e-9)
        assert loss_and_grad(L, ldpc, cfg(5))[0] == pytest.approx(decode_loss(L, ldpc, cfg(5)), rel=1e-9)

    def test_micro_batch_invariance(self, rng, ldpc):
        L = rng.normal(-1, 2, (37, 32))
        a = loss_and_grad(L, ldpc, LossConfig(BpConfig(3), micro_batch=5))
        b = loss_and_grad(L, ldpc, LossConfig(BpConfig(3), micro_batch=64))
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-14)

    @pytest.mark.parametrize("kw", [dict(loss_mode="mean"), dict(soft_h_eps=1e-2), dict(soft_h_eps=0.0),
                                    dict(micro_batch=0), dict(bp=BpConfig(5, variant="minsum"))])
    def test_config_validation(self, kw):
        with pytest.raises(InvalidParams):
            LossConfig(**kw)


class TestGradient:
    @pytest.mark.parametrize("mode", ["final", "summed"])
    @pytest.mark.parametrize("T", [1, 3, 5])
    @pytest.mark.parametrize("shape", [(3, 6), (8, 16)])
    def test_finite_differences(self, shape, T, mode):
        rng = np.random.default_rng([shape[0], T, mode == "summed"])
        for _ in range(2):
            L, H = draw_instance(rng, *shape, 8, T, order=4)
            g = grad_wrt_H(L, H, cfg(T, mode))
            fd = central_diff(L, H, T, mode == "summed", 1e-5, order=4)
            assert rel_err(g, fd) < 1e-4

    @pytest.mark.parametrize("mode", ["final", "summed"])
    @pytest.mark.parametrize("T", [1, 3, 5])
    def test_two_point_on_conditioned_instances(self, T, mode):
        rng = np.random.default_rng([T, mode == "summed", 7])
        for shape in ((3, 6), (8, 16)):
            L, H = draw_instance(rng, *shape, 2, T, order=2)
            g = grad_wrt_H(L, H, cfg(T, mode))
            assert rel_err(g, central_diff(L, H, T, mode == "summed", 1e-5)) < 1e-4

    @pytest.mark.parametrize("mode", ["final", "summed"])
    def test_finite_differences_real_h(self, mode):
        rng = np.random.default_rng(11)
        for _ in range(3):
            H = rng.uniform(0.05, 0.95, (3, 6))
            L = rng.normal(0, 2, (4, 6))
            if not well_conditioned(L, H, 3, *STENCIL_CONDITIONS[4]):
                continue
            g = grad_wrt_H(L, H, cfg(3, mode))
            assert rel_err(g, central_diff(L, H, 3, mode == "summed", 1e-5, order=4)) < 1e-4

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 3, 5]), st.booleans())
    def test_finite_differences_fine_step(self, seed, T, summed):
        rng = np.random.default_rng(seed)
        L, H = draw_instance(rng, 3, 6, 3, T)
        g = grad_wrt_H(L, H, cfg(T, "summed" if summed else "final"))
        fd = central_diff(L, H, T, summed, 1e-7)
        assert np.abs(g - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())

    def test_saturated_clamp_blocks_gradient(self):
        # huge LLRs saturate both products of row 0; only the direct o = L + R*H term survives
        H = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        L = np.array([[-80.0, -80.0, 0.3]])
        lam = -L
        outs, tape = _fallback._forward(lam, H, 1, EPS, np.inf, row_active(H), keep=True)
        X, R = tape[0]["X"], tape[0]["R"]
        assert (X[0, 0, :2] >= 1 - EPS).all()
        direct = -1.0 / (1.0 + np.exp(outs[-1][0, 0])) * R[0, 0, 0]
        g = grad_wrt_H(L, H, cfg(1))
        assert g[0, 0] == pytest.approx(direct, rel=1e-12, abs=0.0)

    def test_zero_llr_stationary(self, ldpc):
        np.testing.assert_array_equal(grad_wrt_H(np.zeros((4, 32)), ldpc, cfg(5)), 0.0)

    def test_duplication_invariance(self, rng, ldpc):
        L = rng.normal(-1, 2, (9, 32))
        a = grad_wrt_H(L, ldpc, cfg(5))
        b = grad_wrt_H(np.concatenate([L, L]), ldpc, cfg(5))
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_row_permutation_equivariance(self, rng, ldpc):
        L = rng.normal(-1, 2, (9, 32))
        perm = rng.permutation(16)
        np.testing.assert_allclose(grad_wrt_H(L, ldpc.H[perm], cfg(5)), grad_wrt_H(L, ldpc, cfg(5))[perm],
                                   rtol=1e-10, atol=1e-14)

    def test_deterministic(self, rng, ldpc):
        L = rng.normal(-1, 2, (9, 32))
        np.testing.assert_array_equal(grad_wrt_H(L, ldpc, cfg(5)), grad_wrt_H(L, ldpc, cfg(5)))


class TestOmega:
    def test_mask_zeroes_far_entries(self, rng, hamming):
        omega = 1.0 - 2.0 * hamming.H
        omega[0, 0] = 3.0 * np.sign(omega[0, 0])
        L = rng.normal(-1, 2, (5, 7))
        g = grad_wrt_omega(L, omega, cfg(3))
        assert g[0, 0] == 0.0

    def test_init_scaling(self, rng, ldpc):
        L = rng.normal(-1, 2, (5, 32))
        omega = 1.0 - 2.0 * ldpc.H
        np.testing.assert_array_equal(grad_wrt_omega(L, omega, cfg(5)), -0.5 * grad_wrt_H(L, ldpc, cfg(5)))

    def test_soft_h_deterministic(self, rng, ldpc):
        L = rng.normal(-1, 2, (5, 32))
        c = LossConfig(BpConfig(5), soft_h_eps=1e-7, seed=4)
        omega = 1.0 - 2.0 * ldpc.H
        a = grad_wrt_omega(L, omega, c)
        np.testing.assert_array_equal(a, grad_wrt_omega(L, omega, c))
        # the perturbation reaches the zero entries only
        hard = grad_wrt_omega(L, omega, cfg(5))
        assert not np.array_equal(a, hard)
        assert np.isfinite(a).all()
