"""Linear algebra over GF(2).

Matrices are plain ``numpy`` arrays of 0/1 entries (``uint8``); every function
copies its input, so callers may share arrays freely.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, RankDeficient


def as_bits(M, ndim: int = 2) -> np.ndarray:
    """Validate and convert ``M`` to a 0/1 ``uint8`` array."""
    A = np.asarray(M)
    if A.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {A.shape}")
    if A.size and not np.isin(A, (0, 1)).all():
        raise ValueError("entries must be 0 or 1")
    return A.astype(np.uint8)


def _rref(M: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    A = as_bits(M).copy()
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        hits = np.flatnonzero(A[:, c])
        hits = hits[hits != r]
        A[hits] ^= A[r]
        pivots.append(c)
        r += 1
    return A, pivots


def rank(M) -> int:
    return len(_rref(M)[1])


def to_systematic(H) -> tuple[np.ndarray, np.ndarray]:
    """Bring ``H`` to the form ``[I | P]`` by row operations and a column permutation.

    Returns ``(H_sys, col_perm)`` with ``H_sys == R @ H[:, col_perm]`` (mod 2)
    for some invertible row transform ``R``. Pivot columns are taken left to
    right, so a matrix already in ``[I | P]`` form comes back unchanged with the
    identity permutation.
    """
    A, pivots = _rref(H)
    m, n = A.shape
    if len(pivots) < m:
        raise RankDeficient(f"rank {len(pivots)} < {m} rows")
    pivot_set = set(pivots)
    perm = np.array(pivots + [c for c in range(n) if c not in pivot_set], dtype=np.intp)
    return A[:, perm], perm


def generator_from(H) -> np.ndarray:
    """Generator matrix ``G`` (k x n) with ``G @ H.T == 0`` over GF(2)."""
    H_sys, perm = to_systematic(H)
    m, n = H_sys.shape
    k = n - m
    G_sys = np.concatenate([H_sys[:, m:].T, np.eye(k, dtype=np.uint8)], axis=1)
    G = np.empty_like(G_sys)
    G[:, perm] = G_sys
    return G


def syndrome(H, word) -> np.ndarray:
    """``H @ word`` over GF(2). ``word`` may also be a batch of shape (B, n)."""
    H = as_bits(H)
    w = np.asarray(word)
    if w.shape[-1] != H.shape[1]:
        raise DimensionMismatch(f"word length {w.shape[-1]} != {H.shape[1]} columns")
    return ((w.astype(np.int64) @ H.T.astype(np.int64)) & 1).astype(np.uint8)


def encode(G, m) -> np.ndarray:
    """``m @ G`` over GF(2); ``m`` may be a single message or a (B, k) batch."""
    G = as_bits(G)
    msg = np.asarray(m)
    if msg.shape[-1] != G.shape[0]:
        raise DimensionMismatch(f"message length {msg.shape[-1]} != {G.shape[0]} rows")
    return ((msg.astype(np.int64) @ G.astype(np.int64)) & 1).astype(np.uint8)
