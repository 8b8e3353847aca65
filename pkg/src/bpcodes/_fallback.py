"""Pure numpy kernels, used when the compiled extension is unavailable.

All kernels work on messages in the classical ``log P(0)/P(1)`` orientation
(``lam``); the public wrappers in :mod:`bpcodes.decoder` flip signs at the
boundary. Signatures mirror ``bpcodes._kernels`` exactly.
"""

from __future__ import annotations

import numpy as np


def _excl_prod(F: np.ndarray, axis: int = -1) -> np.ndarray:
    """Product of all entries along ``axis`` except the one at each position."""
    F = np.moveaxis(F, axis, -1)
    ones = np.ones(F.shape[:-1] + (1,), dtype=F.dtype)
    pre = np.cumprod(np.concatenate([ones, F[..., :-1]], axis=-1), axis=-1)
    suf = np.cumprod(np.concatenate([ones, F[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return np.moveaxis(pre * suf, -1, axis)


# ---------------------------------------------------------------------------
# sparse edge decoder


def edge_bp(lam, row_ptr, edge_var, var_ptr, var_edge, iters, minsum, eps, clip, out, per):
    lam = np.asarray(lam)
    B, n = lam.shape
    m = len(row_ptr) - 1
    E = len(edge_var)
    if E == 0:  # no edges: outputs are the channel LLRs
        if per is not None:
            per[...] = lam
        out[...] = lam
        return
    deg = np.diff(row_ptr)
    dmax = int(deg.max()) if m else 0
    # padded (m, dmax) edge index table, -1 marks padding
    pad = np.full((m, max(dmax, 1)), -1, dtype=np.int64)
    for j in range(m):
        pad[j, : deg[j]] = np.arange(row_ptr[j], row_ptr[j + 1])
    valid = pad >= 0
    flat = np.where(valid, pad, 0)
    active = (deg >= 2)[:, None]
    edge_var = np.asarray(edge_var, dtype=np.int64)

    inc = np.zeros((E, n))
    inc[np.arange(E), edge_var] = 1.0

    R = np.zeros((B, E))
    for t in range(iters):
        tot = lam + R @ inc
        Q = np.clip(tot[:, edge_var] - R, -clip, clip)
        Qp = Q[:, flat]  # (B, m, dmax)
        if minsum:
            mag = np.where(valid, np.abs(Qp), np.inf)
            sgn = np.where(valid & (Qp < 0), -1.0, 1.0)
            s_all = np.prod(sgn, axis=-1, keepdims=True)
            order = np.argsort(mag, axis=-1, kind="stable")
            m1 = np.take_along_axis(mag, order[..., :1], -1)
            m2 = np.take_along_axis(mag, order[..., 1:2], -1) if mag.shape[-1] > 1 else np.full_like(m1, np.inf)
            pos = np.arange(mag.shape[-1])
            mn = np.where(pos == order[..., :1], m2, m1)
            Rp = s_all * sgn * mn
        else:
            tp = np.where(valid, np.tanh(0.5 * Qp), 1.0)
            X = np.clip(_excl_prod(tp), -1.0 + eps, 1.0 - eps)
            Rp = 2.0 * np.arctanh(X)
        Rp = np.where(valid & active, Rp, 0.0)
        R = np.zeros((B, E))
        R[:, pad[valid]] = Rp[:, valid]
        if per is not None:
            per[t] = lam + R @ inc
    out[...] = lam + R @ inc


# ---------------------------------------------------------------------------
# dense tensor recurrence


def _forward(lam, H, iters, eps, clip, row_active, keep):
    """Run the tensor recurrence; optionally keep per-iteration intermediates."""
    B, n = lam.shape
    Hb = H[None]
    act = row_active.astype(bool)[None, :, None]
    C = lam[:, None, :]
    R = None
    outs, tape = [], []
    for t in range(iters):
        if t == 0:
            Qraw = np.broadcast_to(C, (B,) + H.shape)
        else:
            S = (R * Hb).sum(axis=1, keepdims=True)
            Qraw = C + S - R
        Q = np.clip(Qraw, -clip, clip)
        tt = np.tanh(0.5 * Q)
        F = tt * Hb + (1.0 - Hb)
        P = F.prod(axis=2, keepdims=True)
        small = np.abs(tt) < eps
        X = np.where(small, _excl_prod(F, axis=2) if small.any() else 0.0, P / np.where(small, 1.0, tt))
        Xc = np.clip(X, -1.0 + eps, 1.0 - eps)
        R = np.where(act, 2.0 * np.arctanh(Xc), 0.0)
        outs.append(lam + (R * Hb).sum(axis=1))
        if keep:
            tape.append(dict(Qraw=Qraw, tt=tt, F=F, P=P, small=small, X=X, R=R))
    return outs, tape


def tensor_bp(lam, H, iters, eps, clip, row_active, out, per):
    lam = np.asarray(lam, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    outs, _ = _forward(lam, H, iters, eps, clip, np.asarray(row_active), keep=False)
    if per is not None:
        for t, o in enumerate(outs):
            per[t] = o
    out[...] = outs[-1] if outs else lam


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    # exp(-softplus(-x)) keeps the far negative tail instead of cancelling to 0
    return np.exp(-np.logaddexp(0.0, -x))


def tensor_bp_grad(lam, H, iters, eps, clip, row_active, summed, gH):
    """Sum over frames of the BCE loss against the zero codeword, and its gradient in H.

    The loss of one frame is ``sum_i softplus(-out_i)`` for the final output
    (or for every iteration's output when ``summed``). ``gH`` is overwritten
    with the gradient of the summed loss. Returns the summed loss.
    """
    lam = np.asarray(lam, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    Hb = H[None]
    act = np.asarray(row_active).astype(bool)[None, :, None]
    outs, tape = _forward(lam, H, iters, eps, clip, np.asarray(row_active), keep=True)
    G = np.zeros_like(H)
    if iters == 0:
        gH[...] = G
        return float(_softplus(-lam).sum())
    used = range(iters) if summed else [iters - 1]
    loss = float(sum(_softplus(-outs[t]).sum() for t in used))

    gR = np.zeros_like(tape[-1]["R"])
    for t in range(iters - 1, -1, -1):
        rec = tape[t]
        R = rec["R"]
        if t in used:
            g_out = -_sigmoid(-outs[t])
            gR = gR + g_out[:, None, :] * Hb
            G += (g_out[:, None, :] * R).sum(axis=0)
        X, tt, F, P, small = rec["X"], rec["tt"], rec["F"], rec["P"], rec["small"]
        inside = (X > -1.0 + eps) & (X < 1.0 - eps)
        Xc = np.clip(X, -1.0 + eps, 1.0 - eps)
        gX = np.where(act & inside, gR * 2.0 / (1.0 - Xc * Xc), 0.0)
        safe_tt = np.where(small, 1.0, tt)
        gXn = np.where(small, 0.0, gX)
        gP = (gXn / safe_tt).sum(axis=2, keepdims=True)
        gtt = -gXn * P / (safe_tt * safe_tt)
        gF = gP * _excl_prod(F, axis=2)
        if small.any():
            for b, j, i in zip(*np.nonzero(small & (gX != 0))):
                others = np.delete(np.arange(F.shape[2]), i)
                Fo = F[b, j, others]
                gF[b, j, others] += gX[b, j, i] * _excl_prod(Fo[None])[0]
        gtt = gtt + gF * Hb
        G += (gF * (tt - 1.0)).sum(axis=0)
        Qraw = rec["Qraw"]
        gQ = gtt * 0.5 * (1.0 - tt * tt) * (np.abs(Qraw) <= clip)
        if t > 0:
            gS = gQ.sum(axis=1, keepdims=True)
            Rprev = tape[t - 1]["R"]
            G += (gS * Rprev).sum(axis=0)
            gR = gS * Hb - gQ
    gH[...] = G
    return loss
