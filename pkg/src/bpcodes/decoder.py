"""Belief-propagation decoding: dense tensor recurrence, sparse edge decoder, min-sum.

Public inputs and outputs use ``L = log P(1)/P(0)``. Internally the
recurrence runs on ``-L`` (the ``log P(0)/P(1)`` orientation in which the
tanh rule is sign-correct for every check degree) and the result is negated
back, so ``soft > 0`` still means "bit 1 more likely".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .codes import ParityCheck
from .errors import DimensionMismatch, InvalidParams, NumericalFailure

VARIANTS = ("sumproduct", "minsum")

# entries of a real-valued H at or below this magnitude do not count towards
# a check's degree (keeps perturbed zeros from activating degree-1 rows)
DEGREE_TOL = 1e-3


@dataclass(frozen=True)
class BpConfig:
    iterations: int = 5
    variant: str = "sumproduct"
    clamp_eps: float = 1e-7
    llr_clip: float | None = None
    emit_per_iteration: bool = False

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise InvalidParams(f"iterations must be a positive integer, got {self.iterations}")
        if self.variant not in VARIANTS:
            raise InvalidParams(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.0 < self.clamp_eps < 0.1:
            raise InvalidParams(f"clamp_eps must lie in (0, 0.1), got {self.clamp_eps}")
        if self.llr_clip is not None and not self.llr_clip > 0:
            raise InvalidParams("llr_clip must be positive")

    @property
    def clip(self) -> float:
        return math.inf if self.llr_clip is None else float(self.llr_clip)


@dataclass
class DecodeResult:
    soft: np.ndarray
    hard: np.ndarray
    per_iteration: list[np.ndarray] | None = None


@dataclass(frozen=True)
class EdgeGraph:
    """CSR-style edge lists; edges are numbered row by row."""

    row_ptr: np.ndarray
    edge_var: np.ndarray
    var_ptr: np.ndarray
    var_edge: np.ndarray

    @classmethod
    def from_matrix(cls, H) -> "EdgeGraph":
        H = np.asarray(H)
        rows, cols = np.nonzero(H)  # row-major order
        m, n = H.shape
        row_ptr = np.zeros(m + 1, dtype=np.int32)
        np.cumsum(np.bincount(rows, minlength=m), out=row_ptr[1:])
        order = np.argsort(cols, kind="stable")
        var_ptr = np.zeros(n + 1, dtype=np.int32)
        np.cumsum(np.bincount(cols, minlength=n), out=var_ptr[1:])
        return cls(row_ptr, cols.astype(np.int32), var_ptr, order.astype(np.int32))


def hard_decision(soft) -> np.ndarray:
    """1 where ``soft > 0``, else 0 (ties go to 0)."""
    return (np.asarray(soft) > 0).astype(np.uint8)


def _prep_llr(L, n: int) -> tuple[np.ndarray, bool]:
    L = np.asarray(L, dtype=np.float64)
    single = L.ndim == 1
    if single:
        L = L[None]
    if L.ndim != 2 or L.shape[1] != n:
        raise DimensionMismatch(f"LLR shape {L.shape} incompatible with {n} code bits")
    if not np.isfinite(L).all():
        raise NumericalFailure("non-finite channel LLR")
    return np.ascontiguousarray(-L), single


def _finish(out, per, single, emit) -> DecodeResult:
    soft = -out
    if not np.isfinite(soft).all():
        raise NumericalFailure("non-finite decoder output")
    per_list = [-p for p in per] if emit else None
    if single:
        soft = soft[0]
        per_list = [p[0] for p in per_list] if emit else None
    return DecodeResult(soft=soft, hard=hard_decision(soft), per_iteration=per_list)


def row_active(H) -> np.ndarray:
    """Checks with at least two incident edges; the rest send no messages."""
    return ((np.abs(np.asarray(H)) > DEGREE_TOL).sum(axis=1) >= 2).astype(np.uint8)


def _as_real_h(H) -> np.ndarray:
    if isinstance(H, ParityCheck):
        H = H.H
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2:
        raise DimensionMismatch(f"H must be 2-d, got shape {H.shape}")
    if not np.isfinite(H).all() or H.min(initial=0.0) < -1.0 or H.max(initial=0.0) > 1.0:
        raise InvalidParams("H entries must be finite and lie in [-1, 1]")
    return np.ascontiguousarray(H)


def bp_decode(L, H, cfg: BpConfig = BpConfig()) -> DecodeResult:
    """Dense tensor BP; ``H`` may be real-valued so gradients probe the same path.

    Only the sum-product variant has a tensor form; min-sum requests on a
    binary ``H`` are routed to the edge decoder.
    """
    Hf = _as_real_h(H)
    if cfg.variant == "minsum":
        if not np.isin(Hf, (0.0, 1.0)).all():
            raise InvalidParams("min-sum decoding needs a binary H")
        return min_sum_decode(L, ParityCheck(Hf.astype(np.uint8)), cfg)
    lam, single = _prep_llr(L, Hf.shape[1])
    T = int(cfg.iterations)
    out = np.empty_like(lam)
    per = np.empty((T,) + lam.shape) if cfg.emit_per_iteration else None
    kernels.tensor_bp(lam, Hf, T, cfg.clamp_eps, cfg.clip, row_active(Hf), out, per)
    return _finish(out, per, single, cfg.emit_per_iteration)


def _edge(L, code, cfg: BpConfig, minsum: bool) -> DecodeResult:
    H = code.H if isinstance(code, ParityCheck) else np.asarray(code)
    if H.ndim != 2 or not np.isin(H, (0, 1)).all():
        raise InvalidParams("edge decoding needs a binary 2-d H")
    g = EdgeGraph.from_matrix(H)
    lam, single = _prep_llr(L, H.shape[1])
    T = int(cfg.iterations)
    out = np.empty_like(lam)
    per = np.empty((T,) + lam.shape) if cfg.emit_per_iteration else None
    kernels.edge_bp(lam, g.row_ptr, g.edge_var, g.var_ptr, g.var_edge, T, minsum,
                    cfg.clamp_eps, cfg.clip, out, per)
    return _finish(out, per, single, cfg.emit_per_iteration)


def edge_bp_decode(L, code, cfg: BpConfig = BpConfig()) -> DecodeResult:
    """Classical sparse message passing; honours ``cfg.variant``."""
    return _edge(L, code, cfg, cfg.variant == "minsum")


def min_sum_decode(L, code, cfg: BpConfig = BpConfig()) -> DecodeResult:
    return _edge(L, code, cfg, True)


def decode(L, code, cfg: BpConfig = BpConfig()) -> DecodeResult:
    """Production entry point: the sparse decoder for binary codes."""
    return edge_bp_decode(L, code, cfg)
