"""Decoding loss and its gradient with respect to H, chained through the STE to omega.

The loss of one frame is the BCE against the all-zero codeword,
``sum_v softplus(o_v)`` with ``o`` the decoder output in the
``log P(1)/P(0)`` convention, averaged over frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .decoder import BpConfig, EdgeGraph, _as_real_h, _prep_llr, row_active
from .errors import InvalidParams, NumericalFailure

LOSS_MODES = ("final", "summed")


@dataclass(frozen=True)
class LossConfig:
    bp: BpConfig = field(default_factory=BpConfig)
    loss_mode: str = "final"
    soft_h_eps: float | None = None
    seed: int = 0
    micro_batch: int = 1024  # frames per gradient chunk

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise InvalidParams(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.soft_h_eps is not None and not 0.0 < self.soft_h_eps < 1e-3:
            raise InvalidParams(f"soft_h_eps must lie in (0, 1e-3), got {self.soft_h_eps}")
        if self.micro_batch < 1:
            raise InvalidParams("micro_batch must be >= 1")
        if self.bp.variant != "sumproduct":
            raise InvalidParams("gradients are defined for the sum-product decoder only")


def bin(omega) -> np.ndarray:  # noqa: A001 - name matches the operator
    """1 where omega < 0, else 0 (so bin(0) = 0)."""
    return (np.asarray(omega) < 0).astype(np.uint8)


def ste_mask(omega) -> np.ndarray:
    """Straight-through surrogate derivative of ``bin``: -0.5 on |omega| <= 1, else 0."""
    return np.where(np.abs(np.asarray(omega, dtype=np.float64)) <= 1.0, -0.5, 0.0)


def soft_h(H, eps: float, seed: int) -> np.ndarray:
    """Ones stay 1; each zero becomes +-eps with a fair sign drawn from ``seed``."""
    H = np.asarray(H)
    z = np.random.default_rng(seed).integers(0, 2, size=H.shape)
    return np.where(H == 1, 1.0, np.where(z == 1, -eps, eps))


def _pairwise_sum(parts: list):
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _chunks(B: int, size: int):
    return [(s, min(s + size, B)) for s in range(0, B, size)]


def _loss_chunk(lam, Hf, graph, cfg: LossConfig) -> float:
    T = cfg.bp.iterations
    out = np.empty_like(lam)
    summed = cfg.loss_mode == "summed"
    per = np.empty((T,) + lam.shape) if summed else None
    if graph is not None:
        kernels.edge_bp(lam, graph.row_ptr, graph.edge_var, graph.var_ptr, graph.var_edge, T, False,
                        cfg.bp.clamp_eps, cfg.bp.clip, out, per)
    else:
        kernels.tensor_bp(lam, Hf, T, cfg.bp.clamp_eps, cfg.bp.clip, row_active(Hf), out, per)
    outs = per if summed else out[None]
    # softplus(o) with o = -out
    return float(np.logaddexp(0.0, -outs).sum())


def loss_parts(L, H, cfg: LossConfig = LossConfig(), bound: float | None = None):
    """Per-chunk summed losses, or None once their running total exceeds ``bound``.

    Frame losses are nonnegative, so a partial total above ``bound`` proves
    the full total is above it too. ``bound`` is a total, not a mean.
    """
    Hf = _as_real_h(H)
    lam, _ = _prep_llr(L, Hf.shape[1])
    graph = EdgeGraph.from_matrix(Hf) if np.isin(Hf, (0.0, 1.0)).all() else None
    parts, running = [], 0.0
    for a, b in _chunks(lam.shape[0], cfg.micro_batch):
        parts.append(_loss_chunk(np.ascontiguousarray(lam[a:b]), Hf, graph, cfg))
        running += parts[-1]
        if not np.isfinite(running):
            raise NumericalFailure("non-finite loss")
        if bound is not None and running > bound:
            return None
    return parts


def decode_loss(L, H, cfg: LossConfig = LossConfig()) -> float:
    """Mean per-frame BCE of the decoder output against the zero codeword.

    Binary H goes through the sparse edge kernel, which computes the same
    recurrence as the tensor form (to rounding) at a fraction of the cost.
    """
    parts = loss_parts(L, H, cfg)
    return _pairwise_sum(parts) / len(np.atleast_2d(L))


def loss_and_grad(L, H, cfg: LossConfig = LossConfig()) -> tuple[float, np.ndarray]:
    """Mean loss and its exact reverse-mode gradient in (real-valued) H."""
    Hf = _as_real_h(H)
    lam, _ = _prep_llr(L, Hf.shape[1])
    B = lam.shape[0]
    act = row_active(Hf)
    summed = cfg.loss_mode == "summed"
    losses, grads = [], []
    for a, b in _chunks(B, cfg.micro_batch):
        g = np.empty_like(Hf)
        losses.append(kernels.tensor_bp_grad(np.ascontiguousarray(lam[a:b]), Hf, cfg.bp.iterations,
                                             cfg.bp.clamp_eps, cfg.bp.clip, act, summed, g))
        grads.append(g)
    loss = _pairwise_sum(losses) / B
    grad = _pairwise_sum(grads) / B
    if not (np.isfinite(loss) and np.isfinite(grad).all()):
        raise NumericalFailure("non-finite loss or gradient")
    return float(loss), grad


def grad_wrt_H(L, H, cfg: LossConfig = LossConfig()) -> np.ndarray:
    return loss_and_grad(L, H, cfg)[1]


def grad_wrt_omega(L, omega, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """STE gradient: grad_H at bin(omega) (or its soft perturbation) times ste_mask(omega)."""
    omega = np.asarray(omega, dtype=np.float64)
    H = bin(omega)
    Hx = soft_h(H, cfg.soft_h_eps, cfg.seed) if cfg.soft_h_eps is not None else H
    return grad_wrt_H(L, Hx, cfg) * ste_mask(omega)
