"""Code design by binary line search over sign flips of the STE parameters.

Each iteration samples a zero-codeword training batch, takes the STE gradient
with respect to omega and scans the step sizes at which entries of omega
cross zero, keeping the one with the lowest loss on the same batch. A zero
step is always among the candidates; the loop stops when it wins.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import gf2
from .channel import FAMILIES, ChannelSpec, llr, transmit
from .codes import ParityCheck
from .decoder import BpConfig, hard_decision
from .errors import FilterStarvation, InvalidParams, ParseError, RankDeficient
from .grad import LossConfig, _pairwise_sum, bin, loss_and_grad, loss_parts, soft_h, ste_mask

STRICT_CROSSING = 1.0 + 1e-6
MIN_ACCEPTANCE = 1e-4


@dataclass
class TrainConfig:
    max_iters: int = 20
    batch_size: int = 200_000
    snr_set: list = field(default_factory=lambda: [3.0, 4.0, 5.0, 6.0, 7.0])
    grid_limit: int = 50
    bp_train_iters: int = 5
    loss_mode: str = "final"
    channel: str = "awgn"
    syndrome_filter: bool = True
    systematic_mask: bool = False
    l1_lambda: float = 0.0
    soft_h_eps: float | None = None
    rank_guard: bool = True
    seed: int = 0
    micro_batch: int = 1024
    fresh_batch_line_search: bool = False

    def __post_init__(self):
        self.snr_set = [float(s) for s in self.snr_set]
        if self.grid_limit < 1 or self.batch_size < 1 or self.micro_batch < 1:
            raise InvalidParams("grid_limit, batch_size and micro_batch must be >= 1")
        if self.max_iters < 0 or self.bp_train_iters < 1:
            raise InvalidParams("max_iters must be >= 0 and bp_train_iters >= 1")
        if not self.snr_set or not np.isfinite(self.snr_set).all():
            raise InvalidParams("snr_set must be a nonempty list of finite values")
        if self.l1_lambda < 0:
            raise InvalidParams("l1_lambda must be nonnegative")
        if self.channel not in FAMILIES:
            raise InvalidParams(f"channel must be one of {FAMILIES}")
        self.loss_config()  # validates loss_mode / soft_h_eps

    def loss_config(self) -> LossConfig:
        return LossConfig(bp=BpConfig(self.bp_train_iters), loss_mode=self.loss_mode,
                          soft_h_eps=self.soft_h_eps, seed=self.seed, micro_batch=self.micro_batch)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        try:
            doc = json.loads(text)
        except ValueError as exc:
            raise ParseError(f"bad config JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError("config JSON must be an object")
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ParseError(f"unknown config fields {sorted(unknown)}")
        return cls(**doc)


@dataclass
class IterRecord:
    iteration: int
    loss: float  # accepted loss on this iteration's batch
    baseline_loss: float  # loss of the unchanged code on the same batch
    step: float
    step_index: int  # position in the candidate list, -1 for the zero step
    flipped: int
    density: float
    rank: int
    candidates: int
    rank_skipped: int
    wall_time: float


@dataclass
class TrainTrace:
    records: list[IterRecord] = field(default_factory=list)
    converged: bool = False

    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f.name for f in fields(IterRecord)]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, n) for n in names)])
        return buf.getvalue()


@dataclass
class LineSearchResult:
    step: float
    loss: float
    omega_next: np.ndarray
    baseline_loss: float
    step_index: int
    candidates: list
    rank_skipped: int


def _spec(cfg: TrainConfig, rate: float, snr: float) -> ChannelSpec:
    return ChannelSpec(family=cfg.channel, ebn0_db=snr, rate=rate)


def sample_training_batch(H, cfg: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    """Zero-codeword LLRs; with the filter on, only frames whose channel hard
    decision has a nonzero syndrome under ``H`` are kept."""
    H = gf2.as_bits(H)
    m, n = H.shape
    rate = (n - m) / n
    kept, have, drawn = [], 0, 0
    while have < cfg.batch_size:
        snr = cfg.snr_set[int(rng.integers(len(cfg.snr_set)))]
        need = cfg.micro_batch if cfg.syndrome_filter else min(cfg.micro_batch, cfg.batch_size - have)
        L = llr(transmit(np.ones(n), _spec(cfg, rate, snr), rng, batch=need))
        drawn += need
        if cfg.syndrome_filter:
            L = L[gf2.syndrome(H, hard_decision(L)).any(axis=1)]
            # judged once ~10 survivors are expected at the threshold rate
            if drawn >= 10 / MIN_ACCEPTANCE and (have + len(L)) / drawn < MIN_ACCEPTANCE:
                raise FilterStarvation(
                    f"syndrome filter kept {have + len(L)} of {drawn} frames (< {MIN_ACCEPTANCE:g})")
        kept.append(L)
        have += len(L)
    return np.concatenate(kept)[: cfg.batch_size]


def candidate_steps(omega, g, grid_limit: int = 50) -> list[float]:
    """Ascending, deduplicated positive zero-crossing steps ``omega / g``."""
    omega = np.asarray(omega, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if omega.shape != g.shape:
        raise InvalidParams(f"shape mismatch {omega.shape} vs {g.shape}")
    nz = g != 0
    s = omega[nz] / g[nz]
    s = np.unique(s[s > 0])  # sorted
    return s[:grid_limit].tolist()


def _objective(parts, H, B, l1):
    return _pairwise_sum(parts) / B + l1 * float(np.sum(H))


def line_search(omega, g, L, cfg: TrainConfig, lcfg: LossConfig | None = None) -> LineSearchResult:
    """Arg-min of the batch loss over the zero step and every candidate step.

    A candidate is abandoned as soon as its partial loss exceeds the best full
    loss seen so far (frame losses are nonnegative), which keeps the arg-min
    exact while skipping most of the work on poor candidates.
    """
    omega = np.asarray(omega, dtype=np.float64)
    lcfg = lcfg or cfg.loss_config()
    B = len(L)
    m = omega.shape[0]
    H0 = bin(omega)
    best_loss = _objective(loss_parts(L, H0, lcfg), H0, B, cfg.l1_lambda)
    baseline = best_loss
    best_step, best_idx, best_omega = 0.0, -1, omega
    steps = candidate_steps(omega, g, cfg.grid_limit)
    skipped = 0
    for idx, lam in enumerate(steps):
        om = omega - lam * STRICT_CROSSING * g
        H = bin(om)
        if cfg.rank_guard and gf2.rank(H) < m:
            skipped += 1
            continue
        reg = cfg.l1_lambda * float(H.sum())
        # slack so the bound never rejects a candidate that would tie after rounding
        bound = (best_loss - reg) * B * (1 + 1e-9) + 1e-9
        parts = loss_parts(L, H, lcfg, bound=bound)
        if parts is None:
            continue
        val = _objective(parts, H, B, cfg.l1_lambda)
        if val < best_loss:
            best_loss, best_step, best_idx, best_omega = val, lam, idx, om
    return LineSearchResult(best_step, best_loss, best_omega, baseline, best_idx, steps, skipped)


def _masked_grad(L, omega, cfg: TrainConfig, lcfg: LossConfig) -> np.ndarray:
    H = bin(omega)
    Hx = soft_h(H, cfg.soft_h_eps, lcfg.seed) if cfg.soft_h_eps is not None else H
    _, gH = loss_and_grad(L, Hx, lcfg)
    if cfg.l1_lambda > 0:
        gH = gH + cfg.l1_lambda
    g = gH * ste_mask(omega)
    if cfg.systematic_mask:
        g[:, : omega.shape[0]] = 0.0
    return g


def optimize(H0, cfg: TrainConfig = TrainConfig(), callback=None) -> tuple[ParityCheck, TrainTrace]:
    """Run the design loop from ``H0``; returns the learned code and its trace."""
    code0 = H0 if isinstance(H0, ParityCheck) else ParityCheck(H0)
    m, n = code0.H.shape
    if cfg.rank_guard and gf2.rank(code0.H) < m:
        raise RankDeficient("initial H is rank deficient and the rank guard is on")
    if cfg.systematic_mask and not (code0.H[:, :m] == np.eye(m, dtype=np.uint8)).all():
        raise InvalidParams("systematic_mask needs H0 of the form [I | P]")
    omega = 1.0 - 2.0 * code0.H.astype(np.float64)
    trace = TrainTrace()
    for it in range(cfg.max_iters):
        t0 = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(it,)))
        lcfg = replace(cfg.loss_config(), seed=int(rng.integers(2**31)))
        H = bin(omega)
        L = sample_training_batch(H, cfg, rng)
        g = _masked_grad(L, omega, cfg, lcfg)
        L_ls = sample_training_batch(H, cfg, rng) if cfg.fresh_batch_line_search else L
        res = line_search(omega, g, L_ls, cfg, lcfg)
        H_next = bin(res.omega_next)
        rec = IterRecord(
            iteration=it, loss=res.loss, baseline_loss=res.baseline_loss, step=res.step,
            step_index=res.step_index, flipped=int((H_next != H).sum()),
            density=float(H_next.mean()), rank=gf2.rank(H_next), candidates=len(res.candidates),
            rank_skipped=res.rank_skipped, wall_time=time.perf_counter() - t0,
        )
        trace.records.append(rec)
        omega = res.omega_next
        if callback is not None:
            callback(rec)
        if res.step == 0.0:
            trace.converged = True
            break
    return ParityCheck(bin(omega)), trace


# ---------------------------------------------------------------------------
# hyperparameter sweep

DEFAULT_GRID = {
    "snr_low": [3, 4, 5],
    "syndrome_filter": [True, False],
    "soft_h_eps": [None, 1e-7],
}


@dataclass
class SweepEntry:
    params: dict
    config: TrainConfig
    code: ParityCheck
    mean_ber: float
    trace: TrainTrace


def expand_grid(grid: dict, max_configs: int = 15, seed: int = 0) -> list[dict]:
    """All combinations of ``grid``, or a seeded random subset of ``max_configs`` of them."""
    if not grid:
        raise InvalidParams("sweep grid is empty")
    keys = sorted(grid)
    for k in keys:
        if not isinstance(grid[k], (list, tuple)) or not grid[k]:
            raise InvalidParams(f"grid entry {k!r} must be a nonempty list")
    combos = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    if len(combos) > max_configs:
        pick = np.random.default_rng(seed).choice(len(combos), size=max_configs, replace=False)
        combos = [combos[i] for i in sorted(pick)]
    return combos


def _apply(base: TrainConfig, params: dict) -> TrainConfig:
    upd = dict(params)
    if "snr_low" in upd:
        lo = float(upd.pop("snr_low"))
        hi = max(base.snr_set)
        upd["snr_set"] = [float(s) for s in np.arange(lo, hi + 0.5)]
    names = {f.name for f in fields(TrainConfig)}
    bad = set(upd) - names
    if bad:
        raise InvalidParams(f"unknown sweep parameters {sorted(bad)}")
    return replace(base, **upd)


def sweep(H0, base_cfg: TrainConfig, grid: dict | None = None, val_snrs=(4.0, 5.0, 6.0),
          stop=None, max_configs: int = 15, eval_iters: int | None = None, callback=None) -> list[SweepEntry]:
    """Optimize once per grid point and rank the learned codes by mean validation BER."""
    from .evaluate import StopRule, monte_carlo

    stop = stop or StopRule()
    code0 = H0 if isinstance(H0, ParityCheck) else ParityCheck(H0)
    entries = []
    for params in expand_grid(grid if grid is not None else DEFAULT_GRID, max_configs, base_cfg.seed):
        cfg = _apply(base_cfg, params)
        code, trace = optimize(code0, cfg)
        specs = [ChannelSpec(family=cfg.channel, ebn0_db=s, rate=code.rate) for s in val_snrs]
        rep = monte_carlo(code, specs, BpConfig(eval_iters or cfg.bp_train_iters), stop, seed=cfg.seed)
        entry = SweepEntry(params, cfg, code, rep.mean_ber(), trace)
        entries.append(entry)
        if callback is not None:
            callback(entry)
    return sorted(entries, key=lambda e: e.mean_ber)
