"""Monte Carlo BER/FER measurement, dB-gain statistics and report files."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import gf2
from .channel import ChannelSpec, llr, modulate, transmit
from .codes import ParityCheck
from .decoder import BpConfig, EdgeGraph
from ._backend import kernels
from .errors import InvalidParams, NoOverlap, ParseError, RankDeficient

MODES = ("zero", "random")
CSV_COLUMNS = ["channel", "snr_db", "variant", "iters", "frames", "bit_errors", "frame_errors",
               "ber", "fer", "neg_ln_ber"]
# written after the fixed columns so the round trip is lossless
EXTRA_COLUMNS = ["budget_exhausted", "bit_errors_sq", "n"]


@dataclass(frozen=True)
class StopRule:
    min_frames: int = 100_000
    min_frame_errors: int = 50
    max_frames: int = 5_000_000
    batch: int = 10_000  # frames per committed batch

    def __post_init__(self):
        if self.batch < 1 or self.min_frames < 0 or self.min_frame_errors < 0:
            raise InvalidParams("stop rule counts must be nonnegative and batch >= 1")
        if self.max_frames < 1:
            raise InvalidParams("max_frames must be >= 1")


@dataclass
class EvalRow:
    channel: str
    snr_db: float
    variant: str
    iters: int
    frames: int
    bit_errors: int
    frame_errors: int
    budget_exhausted: bool = False
    bit_errors_sq: int = 0  # sum over frames of (bit errors in the frame)^2
    n: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.n) if self.frames else float("nan")

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float("nan")

    @property
    def neg_ln_ber(self) -> float:
        return -math.log(self.ber) if self.ber > 0 else float("nan")

    def ber_stderr(self) -> float:
        """Standard error of the BER from the frame-level error counts.

        Errors within a frame are strongly correlated after decoding, so this
        uses the spread of per-frame counts rather than a per-bit binomial.
        """
        N = self.frames
        if N < 2:
            return float("nan")
        mean = self.bit_errors / N
        var = max(self.bit_errors_sq / N - mean * mean, 0.0) * N / (N - 1)
        return math.sqrt(var / N) / self.n

    def neg_ln_ber_stderr(self) -> float:
        return self.ber_stderr() / self.ber if self.ber > 0 else float("nan")

    def wilson(self, z: float = 1.96) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.frames * self.n, z)


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def select(self, channel=None, variant=None, iters=None) -> "EvalReport":
        keep = [r for r in self.rows
                if (channel is None or r.channel == channel)
                and (variant is None or r.variant == variant)
                and (iters is None or r.iters == iters)]
        return EvalReport(keep)

    def at(self, snr_db: float) -> EvalRow:
        for r in self.rows:
            if abs(r.snr_db - snr_db) < 1e-9:
                return r
        raise KeyError(snr_db)

    def mean_ber(self) -> float:
        return float(np.mean([r.ber for r in self.rows]))


def wilson_interval(k: int, N: int, z: float = 1.96) -> tuple[float, float]:
    if N <= 0:
        return 0.0, 1.0
    p = k / N
    den = 1.0 + z * z / N
    mid = (p + z * z / (2 * N)) / den
    half = z * math.sqrt(p * (1 - p) / N + z * z / (4 * N * N)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def _point(code: ParityCheck, graph: EdgeGraph, G, spec: ChannelSpec, cfg: BpConfig, stop: StopRule,
           mode: str, seed: int, index: int) -> EvalRow:
    n, k = code.n, code.k
    frames = bit_err = frame_err = sq = 0
    b = 0
    minsum = cfg.variant == "minsum"
    while True:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, b)))
        B = min(stop.batch, stop.max_frames - frames)
        if mode == "random":
            c = gf2.encode(G, rng.integers(0, 2, size=(B, k), dtype=np.uint8))
            rx = transmit(modulate(c), spec, rng)
        else:
            c = None
            rx = transmit(np.ones(n), spec, rng, batch=B)
        lam = np.ascontiguousarray(-llr(rx))
        out = np.empty_like(lam)
        kernels.edge_bp(lam, graph.row_ptr, graph.edge_var, graph.var_ptr, graph.var_edge,
                        cfg.iterations, minsum, cfg.clamp_eps, cfg.clip, out, None)
        hard = (out < 0).astype(np.uint8)  # soft = -out > 0
        errs = (hard != c).sum(axis=1) if c is not None else hard.sum(axis=1)
        errs = errs.astype(np.int64)
        frames += B
        bit_err += int(errs.sum())
        sq += int((errs * errs).sum())
        frame_err += int((errs > 0).sum())
        b += 1
        if frames >= stop.min_frames and frame_err >= stop.min_frame_errors:
            exhausted = False
            break
        if frames >= stop.max_frames:
            exhausted = True
            break
    return EvalRow(spec.family, spec.ebn0_db, cfg.variant, cfg.iterations, frames, bit_err,
                   frame_err, exhausted, sq, n)


def monte_carlo(code: ParityCheck, specs, cfg: BpConfig = BpConfig(), stop: StopRule = StopRule(),
                mode: str = "zero", seed: int = 0, workers: int = 1) -> EvalReport:
    """Simulate each operating point in ``specs`` until the stopping rule holds.

    Batch ``b`` of point ``i`` draws from ``SeedSequence(seed, spawn_key=(i, b))``,
    so counts do not depend on ``workers``.
    """
    if mode not in MODES:
        raise InvalidParams(f"mode must be one of {MODES}, got {mode!r}")
    if isinstance(specs, ChannelSpec):
        specs = [specs]
    G = None
    if mode == "random":
        if gf2.rank(code.H) < code.H.shape[0]:
            raise RankDeficient("random-codeword evaluation needs a full-rank H")
        G = gf2.generator_from(code.H)
    graph = EdgeGraph.from_matrix(code.H)
    jobs = [(code, graph, G, s, cfg, stop, mode, seed, i) for i, s in enumerate(specs)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(lambda a: _point(*a), jobs))
    else:
        rows = [_point(*a) for a in jobs]
    return EvalReport(rows)


# ---------------------------------------------------------------------------
# dB gain


@dataclass(frozen=True)
class GainStats:
    mean_db: float
    std_db: float
    min_db: float
    max_db: float


def _curve(report: EvalReport) -> tuple[np.ndarray, np.ndarray]:
    pts = sorted((r.snr_db, r.ber) for r in report.rows if r.ber > 0)
    if len(pts) < 2:
        raise NoOverlap("need at least two SNR points with nonzero BER")
    x = np.array([p[0] for p in pts])
    y = np.log10([p[1] for p in pts])
    return x, y


def _snr_at(x, y, level):
    # y falls with x; np.interp needs increasing abscissae
    order = np.argsort(y, kind="stable")
    return np.interp(level, y[order], x[order])


def db_gain(base: EvalReport, ours: EvalReport, levels: int = 50) -> GainStats:
    """SNR saved by ``ours`` at equal BER, over a grid of log10(BER) levels in the overlap."""
    xb, yb = _curve(base)
    xo, yo = _curve(ours)
    lo = max(yb.min(), yo.min())
    hi = min(yb.max(), yo.max())
    if not lo <= hi:
        raise NoOverlap(f"BER ranges do not overlap ({lo:.3g} > {hi:.3g} in log10)")
    grid = np.linspace(lo, hi, levels)
    gain = _snr_at(xb, yb, grid) - _snr_at(xo, yo, grid)
    return GainStats(float(gain.mean()), float(gain.std()), float(gain.min()), float(gain.max()))


# ---------------------------------------------------------------------------
# report files


def _row_dict(r: EvalRow) -> dict:
    d = asdict(r)
    d.update(ber=r.ber, fer=r.fer, neg_ln_ber=r.neg_ln_ber)
    return d


def to_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + EXTRA_COLUMNS)
    for r in report.rows:
        d = _row_dict(r)
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in CSV_COLUMNS]
                   + [int(r.budget_exhausted), r.bit_errors_sq, r.n])
    return buf.getvalue()


def _parse_row(d: dict) -> EvalRow:
    try:
        return EvalRow(
            channel=d["channel"], snr_db=float(d["snr_db"]), variant=d["variant"],
            iters=int(d["iters"]), frames=int(d["frames"]), bit_errors=int(d["bit_errors"]),
            frame_errors=int(d["frame_errors"]),
            budget_exhausted=bool(int(d.get("budget_exhausted", 0))),
            bit_errors_sq=int(d.get("bit_errors_sq", 0)),
            n=int(d["n"]) if "n" in d else _infer_n(d),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad report row: {exc}") from None


def _infer_n(d: dict) -> int:
    # files without the n column: recover it from the stored BER
    ber = float(d["ber"])
    if ber <= 0:
        raise ParseError("cannot infer block length from a zero-BER row without an 'n' column")
    return int(round(int(d["bit_errors"]) / (ber * int(d["frames"]))))


def from_csv(text: str) -> EvalReport:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty report")
    reader = csv.reader(lines)
    header = next(reader)
    if header[:len(CSV_COLUMNS)] != CSV_COLUMNS:
        raise ParseError(f"unexpected header {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(header):
            raise ParseError(f"line {lineno}: {len(rec)} fields, expected {len(header)}")
        rows.append(_parse_row(dict(zip(header, rec))))
    return EvalReport(rows)


def to_json(report: EvalReport) -> str:
    return json.dumps({"rows": [asdict(r) for r in report.rows]}, indent=1, sort_keys=True)


def from_json(text: str) -> EvalReport:
    try:
        doc = json.loads(text)
        names = {f.name for f in fields(EvalRow)}
        return EvalReport([EvalRow(**{k: v for k, v in r.items() if k in names}) for r in doc["rows"]])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad JSON report: {exc}") from None
