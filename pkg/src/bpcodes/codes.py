"""Parity-check matrices: file formats, random initialization and structural metrics."""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import gf2
from .errors import DimensionMismatch, InvalidParams, ParseError

BUILTIN_CODES = {
    "hamming_7_4": "hamming_7_4.alist",
    "bch_63_45": "bch_63_45.alist",
    "ldpc_32_16": "ldpc_32_16.alist",
}


@dataclass(frozen=True, eq=False)
class ParityCheck:
    """A binary (n - k) x n parity-check matrix."""

    H: np.ndarray

    def __post_init__(self):
        H = gf2.as_bits(self.H)
        m, n = H.shape
        if not 0 < m < n:
            raise InvalidParams(f"need 0 < n-k < n, got shape {H.shape}")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return self.H.shape[1] - self.H.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    def zero_columns(self) -> np.ndarray:
        return np.flatnonzero(self.H.sum(axis=0) == 0)

    def __eq__(self, other):
        if not isinstance(other, ParityCheck):
            return NotImplemented
        return self.H.shape == other.H.shape and bool((self.H == other.H).all())

    def __hash__(self):
        return hash((self.H.shape, self.H.tobytes()))


@dataclass(frozen=True)
class CodeStats:
    density: float
    girth: int | None  # None when the Tanner graph is acyclic
    row_degrees: list[int] = field(default_factory=list)
    col_degrees: list[int] = field(default_factory=list)
    girth_capped: bool = False


def _warn_disconnected(code: ParityCheck) -> None:
    zc = code.zero_columns()
    if zc.size:
        warnings.warn(
            f"{zc.size} all-zero column(s) {zc.tolist()[:8]}: those bits are decoded from the channel only",
            stacklevel=3,
        )


def _ints(tokens: list[str]) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"non-integer token: {exc}") from None


def load_alist(text: str) -> ParityCheck:
    """Parse a MacKay alist description.

    Both the zero-padded layout and the unpadded variant are accepted; the
    row-wise adjacency block is optional but checked against the column block
    when present.
    """
    tok = _ints(text.split())
    if len(tok) < 4:
        raise ParseError("truncated alist header")
    n, m = tok[0], tok[1]
    if n < 1 or m < 1:
        raise ParseError(f"bad dimensions n={n}, m={m}")
    max_col, max_row = tok[2], tok[3]
    pos = 4
    if len(tok) < pos + n + m:
        raise ParseError("truncated degree lists")
    col_deg = tok[pos:pos + n]
    row_deg = tok[pos + n:pos + n + m]
    pos += n + m
    if any(d < 0 or d > max_col for d in col_deg) or any(d < 0 or d > max_row for d in row_deg):
        raise ParseError("degree exceeds declared maximum")
    if sum(col_deg) != sum(row_deg):
        raise ParseError("column and row degree totals differ")
    rest = tok[pos:]

    padded_cols, padded_rows = n * max_col, m * max_row
    loose_cols, loose_rows = sum(col_deg), sum(row_deg)
    if len(rest) in (padded_cols + padded_rows, padded_cols):
        cols_block = [rest[i * max_col:(i + 1) * max_col] for i in range(n)]
        row_tail = rest[padded_cols:]
        rows_block = [row_tail[j * max_row:(j + 1) * max_row] for j in range(m)] if row_tail else None
    elif len(rest) in (loose_cols + loose_rows, loose_cols):
        cols_block, off = [], 0
        for d in col_deg:
            cols_block.append(rest[off:off + d])
            off += d
        rows_block = None
        if len(rest) > loose_cols:
            rows_block = []
            for d in row_deg:
                rows_block.append(rest[off:off + d])
                off += d
    else:
        raise ParseError(f"adjacency block has {len(rest)} entries; inconsistent with header")

    H = np.zeros((m, n), dtype=np.uint8)
    for v, entries in enumerate(cols_block):
        idx = [e for e in entries if e != 0]
        if len(idx) != col_deg[v]:
            raise ParseError(f"column {v + 1}: degree {col_deg[v]} but {len(idx)} entries")
        for c in idx:
            if not 1 <= c <= m:
                raise ParseError(f"column {v + 1}: row index {c} out of range 1..{m}")
            if H[c - 1, v]:
                raise ParseError(f"column {v + 1}: duplicate row index {c}")
            H[c - 1, v] = 1
    if rows_block is not None:
        R = np.zeros_like(H)
        for c, entries in enumerate(rows_block):
            idx = [e for e in entries if e != 0]
            if len(idx) != row_deg[c]:
                raise ParseError(f"row {c + 1}: degree {row_deg[c]} but {len(idx)} entries")
            for v in idx:
                if not 1 <= v <= n:
                    raise ParseError(f"row {c + 1}: column index {v} out of range 1..{n}")
                R[c, v - 1] = 1
        if not (R == H).all():
            raise ParseError("row and column adjacency lists disagree")
    if (H.sum(axis=1) != np.array(row_deg)).any():
        raise ParseError("row degrees do not match adjacency")
    try:
        return ParityCheck(H)
    except InvalidParams as exc:
        raise ParseError(str(exc)) from None


def save_alist(code: ParityCheck) -> str:
    """Canonical zero-padded alist text for ``code``."""
    H = code.H
    m, n = H.shape
    col_deg = H.sum(axis=0).astype(int)
    row_deg = H.sum(axis=1).astype(int)
    max_col, max_row = max(int(col_deg.max()), 1), max(int(row_deg.max()), 1)

    def pad(idx, width):
        vals = [str(i + 1) for i in idx] + ["0"] * (width - len(idx))
        return " ".join(vals)

    lines = [f"{n} {m}", f"{max_col} {max_row}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    lines += [pad(np.flatnonzero(H[:, v]), max_col) for v in range(n)]
    lines += [pad(np.flatnonzero(H[c]), max_row) for c in range(m)]
    return "\n".join(lines) + "\n"


def load_dense(text: str) -> ParityCheck:
    """Parse the dense format: ``n m`` then m rows of n 0/1 entries."""
    lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise ParseError("dense header must be 'n m'")
    n, m = _ints(lines[0])
    body = lines[1:]
    if len(body) != m or any(len(r) != n for r in body):
        raise ParseError(f"expected {m} rows of {n} entries")
    H = np.array([_ints(r) for r in body])
    if not np.isin(H, (0, 1)).all():
        raise ParseError("dense entries must be 0 or 1")
    try:
        return ParityCheck(H)
    except InvalidParams as exc:
        raise ParseError(str(exc)) from None


def save_dense(code: ParityCheck) -> str:
    m, n = code.H.shape
    return "\n".join([f"{n} {m}"] + [" ".join(map(str, row)) for row in code.H]) + "\n"


def _looks_dense(text: str) -> bool:
    tok = text.split()
    if len(tok) < 3:
        return False
    try:
        n, m = int(tok[0]), int(tok[1])
    except ValueError:
        return False
    return len(tok) == 2 + n * m and all(t in ("0", "1") for t in tok[2:])


def parse_code(text: str) -> ParityCheck:
    """Parse alist or dense text, detected from the token layout."""
    code = load_dense(text) if _looks_dense(text) else load_alist(text)
    _warn_disconnected(code)
    return code


def load_code(path: str | Path) -> ParityCheck:
    """Read a code file, or a builtin code by name (see ``BUILTIN_CODES``)."""
    if str(path) in BUILTIN_CODES:
        return builtin(str(path))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_code(text)


def builtin(name: str) -> ParityCheck:
    try:
        fname = BUILTIN_CODES[name]
    except KeyError:
        raise InvalidParams(f"unknown builtin code {name!r}; choose from {sorted(BUILTIN_CODES)}") from None
    return load_alist(resources.files("bpcodes.data").joinpath(fname).read_text())


def random_systematic(n: int, k: int, p: float, seed: int = 0) -> ParityCheck:
    """``H = [I | P]`` with ``P`` iid Bernoulli(p), drawn from ``default_rng(seed)``."""
    if not 0 < k < n:
        raise InvalidParams(f"need 0 < k < n, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParams(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    P = (rng.random((n - k, k)) < p).astype(np.uint8)
    return ParityCheck(np.concatenate([np.eye(n - k, dtype=np.uint8), P], axis=1))


def girth(H: np.ndarray, cap: int | None = None) -> tuple[int | None, bool]:
    """Shortest cycle length of the Tanner graph of ``H``.

    Runs a BFS from every variable node; every cycle of a bipartite graph
    passes through a variable node, so the minimum over those roots is exact.
    ``cap`` defaults to ``2 * min(m, n)``, the longest cycle the graph can
    hold. Returns ``(girth, capped)``: ``girth`` is None when no cycle of
    length <= cap exists, and ``capped`` is True when a smaller-than-default
    cap may have hidden a longer cycle.
    """
    H = np.asarray(H)
    m, n = H.shape
    full = 2 * min(m, n)
    cap = full if cap is None else min(cap, full)
    # nodes 0..n-1 are variables, n..n+m-1 are checks
    adj = [(n + np.flatnonzero(H[:, v])).tolist() for v in range(n)]
    adj += [np.flatnonzero(H[c]).tolist() for c in range(m)]
    best = cap + 1
    for root in range(n):
        if len(adj[root]) < 2:
            continue
        depth = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if 2 * depth[u] >= best:
                break
            for w in adj[u]:
                if w == parent[u]:
                    continue
                if w in depth:
                    best = min(best, depth[u] + depth[w] + 1)
                else:
                    depth[w] = depth[u] + 1
                    parent[w] = u
                    queue.append(w)
    if best > cap:
        return None, cap < full
    return best, False


def stats(code: ParityCheck) -> CodeStats:
    H = code.H
    m, n = H.shape
    g, capped = girth(H)
    return CodeStats(
        density=float(H.sum()) / (m * n),
        girth=g,
        row_degrees=H.sum(axis=1).astype(int).tolist(),
        col_degrees=H.sum(axis=0).astype(int).tolist(),
        girth_capped=capped,
    )


def sparsity_delta(base: ParityCheck, learned: ParityCheck) -> float:
    """Percent reduction in the number of ones from ``base`` to ``learned``.

    Plain 0/1 arrays are accepted as well as ``ParityCheck`` values.
    """
    Hb = base.H if isinstance(base, ParityCheck) else gf2.as_bits(base)
    Hl = learned.H if isinstance(learned, ParityCheck) else gf2.as_bits(learned)
    if Hb.shape != Hl.shape:
        raise DimensionMismatch(f"shape mismatch {Hb.shape} vs {Hl.shape}")
    s_b = int(Hb.sum())
    if s_b == 0:
        raise ZeroDivisionError("base code has no ones")
    return 100.0 * (s_b - int(Hl.sum())) / s_b


def fingerprint(code: ParityCheck) -> str:
    import hashlib

    m, n = code.H.shape
    return hashlib.sha256(f"{m}x{n}:".encode() + np.packbits(code.H).tobytes()).hexdigest()[:16]
