"""Command-line interface: decode, eval, optimize, stats, gain, sweep.

Exit codes: 0 success, 2 input/parse errors, 3 dimension or rank problems,
4 numerical failure, 5 syndrome-filter starvation.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, codes, evaluate
from ._backend import BACKEND
from .channel import FAMILIES, ChannelSpec, llr, transmit
from .decoder import VARIANTS, BpConfig, bp_decode, edge_bp_decode
from .errors import (DimensionMismatch, FilterStarvation, NumericalFailure, ParseError,
                     RankDeficient)
from .optimizer import TrainConfig, optimize, sweep

EXIT_OK, EXIT_INPUT, EXIT_DIM, EXIT_NUM, EXIT_STARVE = 0, 2, 3, 4, 5
DEFAULT_SEED = 20240101


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None


def _write(path, text: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)
    return str(path)


class Manifest:
    """One JSON record per run, written next to the primary output."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.doc = {
            "command": command,
            "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
            "seed": getattr(args, "seed", None),
            "fingerprints": {},
            "outputs": [],
            "versions": {"bpcodes": __version__, "numpy": np.__version__,
                         "python": platform.python_version(), "backend": BACKEND},
        }

    def code(self, label: str, code: codes.ParityCheck):
        self.doc["fingerprints"][label] = codes.fingerprint(code)

    def output(self, path: str):
        self.doc["outputs"].append(path)

    def config(self, cfg: dict):
        self.doc["config"] = cfg

    def save(self, path):
        if path:
            _write(path, json.dumps(self.doc, indent=2, sort_keys=True, default=str) + "\n")


def _manifest_path(args, primary) -> str | None:
    if getattr(args, "manifest", None):
        return args.manifest
    return f"{primary}.manifest.json" if primary else None


# ---------------------------------------------------------------------------


def cmd_decode(args) -> int:
    code = codes.load_code(args.code)
    man = Manifest("decode", args)
    man.code("code", code)
    cfg = BpConfig(iterations=args.iters, variant=args.variant)
    if args.llr:
        try:
            L = np.loadtxt(args.llr, ndmin=2)
        except (OSError, ValueError) as exc:
            raise ParseError(f"cannot read LLR file {args.llr}: {exc}") from None
        if L.shape[1] != code.n:
            raise DimensionMismatch(f"LLR file has {L.shape[1]} columns, code has n={code.n}")
    else:
        spec = ChannelSpec(family=args.channel, ebn0_db=args.snr, rate=code.rate)
        rng = np.random.default_rng(args.seed)
        L = llr(transmit(np.ones(code.n), spec, rng, batch=args.frames))
    if args.tensor and args.variant == "sumproduct":
        res = bp_decode(L, code.H.astype(float), cfg)
    else:
        res = edge_bp_decode(L, code, cfg)
    doc = {"soft": res.soft.tolist(), "hard": res.hard.tolist()}
    text = json.dumps(doc) + "\n"
    if args.out:
        man.output(_write(args.out, text))
    else:
        sys.stdout.write(text)
    man.save(_manifest_path(args, args.out))
    return EXIT_OK


def cmd_eval(args) -> int:
    code = codes.load_code(args.code)
    man = Manifest("eval", args)
    man.code("code", code)
    stop = evaluate.StopRule(args.min_frames, args.min_errors, args.max_frames, args.batch)
    specs = [ChannelSpec(family=args.channel, ebn0_db=s, rate=code.rate) for s in args.snrs]
    report = evaluate.EvalReport()
    for T in args.iters:
        cfg = BpConfig(iterations=T, variant=args.variant)
        report.rows += evaluate.monte_carlo(code, specs, cfg, stop, args.mode, args.seed, args.workers).rows
    text = evaluate.to_json(report) if str(args.out).endswith(".json") else evaluate.to_csv(report)
    if args.out:
        man.output(_write(args.out, text))
    else:
        sys.stdout.write(text)
    if not args.quiet:
        for r in report:
            flag = " (budget exhausted)" if r.budget_exhausted else ""
            print(f"{r.channel} T={r.iters} {r.variant} Eb/N0={r.snr_db:g}: -ln(BER)={r.neg_ln_ber:.3f} "
                  f"BER={r.ber:.3e} FER={r.fer:.3e} frames={r.frames}{flag}", file=sys.stderr)
    man.save(_manifest_path(args, args.out))
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig.from_json(_read(args.config)) if args.config else TrainConfig(seed=args.seed)
    over = {}
    for name in ("max_iters", "batch_size", "seed"):
        val = getattr(args, name, None)
        if val is not None and (name != "seed" or args.seed_given):
            over[name] = val
    return TrainConfig(**{**asdict(cfg), **over})


def _init_code(args) -> codes.ParityCheck:
    if args.random:
        n, k, p = args.random.split(",")
        try:
            return codes.random_systematic(int(n), int(k), float(p), seed=args.seed)
        except ValueError as exc:
            raise ParseError(f"--random expects n,k,p: {exc}") from None
    return codes.load_code(args.init)


def cmd_optimize(args) -> int:
    code0 = _init_code(args)
    cfg = _train_config(args)
    man = Manifest("optimize", args)
    man.config(asdict(cfg))
    man.code("initial", code0)

    def progress(rec):
        if not args.quiet:
            print(f"iter {rec.iteration}: loss {rec.baseline_loss:.5f} -> {rec.loss:.5f} "
                  f"step#{rec.step_index} flips={rec.flipped} density={rec.density:.4f}", file=sys.stderr)

    learned, trace = optimize(code0, cfg, callback=progress)
    man.code("learned", learned)
    man.output(_write(args.out, codes.save_alist(learned)))
    if args.trace:
        man.output(_write(args.trace, trace.to_csv()))
    man.save(_manifest_path(args, args.out))
    return EXIT_OK


def _format_stats(label: str, s: codes.CodeStats) -> str:
    g = "acyclic" if s.girth is None else str(s.girth)
    if s.girth is None and s.girth_capped:
        g = "> cap"
    return f"{label}: density={s.density:.6f} girth={g} ones={sum(s.row_degrees)}"


def cmd_stats(args) -> int:
    a = codes.load_code(args.code)
    man = Manifest("stats", args)
    man.code("code", a)
    lines = [_format_stats("code", codes.stats(a))]
    if args.compare:
        b = codes.load_code(args.compare)
        man.code("compare", b)
        lines.append(_format_stats("compare", codes.stats(b)))
        lines.append(f"sparsity_delta={codes.sparsity_delta(a, b):.4f}%")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        man.output(_write(args.out, text))
    man.save(_manifest_path(args, args.out))
    return EXIT_OK


def cmd_gain(args) -> int:
    base = evaluate.from_csv(_read(args.base))
    ours = evaluate.from_csv(_read(args.ours))
    man = Manifest("gain", args)
    keys = {(r.channel, r.variant, r.iters) for r in base} & {(r.channel, r.variant, r.iters) for r in ours}
    if args.iters is not None:
        keys = {k for k in keys if k[2] == args.iters}
    lines = []
    for ch, var, T in sorted(keys):
        g = evaluate.db_gain(base.select(ch, var, T), ours.select(ch, var, T))
        lines.append(f"{ch} {var} T={T}: mean={g.mean_db:.4f} std={g.std_db:.4f} "
                     f"min={g.min_db:.4f} max={g.max_db:.4f} dB")
    if not lines:
        raise ParseError("the two reports share no (channel, variant, iters) curve")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        man.output(_write(args.out, text))
    man.save(_manifest_path(args, args.out))
    return EXIT_OK


def cmd_sweep(args) -> int:
    code0 = codes.load_code(args.init)
    try:
        doc = json.loads(_read(args.grid))
    except ValueError as exc:
        raise ParseError(f"bad sweep JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("sweep JSON must be an object")
    grid = doc.get("grid", doc if "base" not in doc else None)
    base = TrainConfig(**doc.get("base", {})) if "base" in doc else _train_config(args)
    stop = evaluate.StopRule(**doc.get("stop", {}))
    man = Manifest("sweep", args)
    man.code("initial", code0)
    man.config({"grid": grid, "base": asdict(base), "stop": asdict(stop)})
    ranked = sweep(code0, base, grid, val_snrs=doc.get("val_snrs", (4.0, 5.0, 6.0)), stop=stop,
                   max_configs=int(doc.get("max_configs", 15)))
    lines = ["rank,mean_ber,params,fingerprint"]
    for i, e in enumerate(ranked):
        params = json.dumps(e.params, sort_keys=True).replace('"', "'")
        lines.append(f'{i},{e.mean_ber!r},"{params}",{codes.fingerprint(e.code)}')
    man.output(_write(args.out, "\n".join(lines) + "\n"))
    if args.best:
        man.output(_write(args.best, codes.save_alist(ranked[0].code)))
    man.save(_manifest_path(args, args.out))
    return EXIT_OK


# ---------------------------------------------------------------------------


class _SeedAction(argparse.Action):
    def __call__(self, parser, ns, values, option_string=None):
        setattr(ns, self.dest, values)
        ns.seed_given = True


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bpcodes", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED, action=_SeedAction)
        sp.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("-q", "--quiet", action="store_true")
        sp.set_defaults(seed_given=False)

    d = sub.add_parser("decode", help="decode LLRs or simulated frames")
    d.add_argument("--code", required=True, help="alist/dense file or builtin name")
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--llr", help="whitespace text file, one frame per line (log P(1)/P(0))")
    src.add_argument("--simulate", action="store_true", help="simulate zero-codeword frames")
    d.add_argument("--channel", choices=FAMILIES, default="awgn")
    d.add_argument("--snr", type=float, default=4.0)
    d.add_argument("--frames", type=int, default=1)
    d.add_argument("--iters", type=int, default=5)
    d.add_argument("--variant", choices=VARIANTS, default="sumproduct")
    d.add_argument("--tensor", action="store_true", help="use the dense tensor decoder")
    d.add_argument("--out")
    common(d)
    d.set_defaults(func=cmd_decode)

    e = sub.add_parser("eval", help="Monte Carlo BER/FER")
    e.add_argument("--code", required=True)
    e.add_argument("--channel", choices=FAMILIES, default="awgn")
    e.add_argument("--snrs", type=_floats, default=[3.0, 4.0, 5.0, 6.0, 7.0])
    e.add_argument("--iters", type=_ints, default=[5, 15])
    e.add_argument("--variant", choices=VARIANTS, default="sumproduct")
    e.add_argument("--min-frames", type=int, default=100_000)
    e.add_argument("--min-errors", type=int, default=50)
    e.add_argument("--max-frames", type=int, default=5_000_000)
    e.add_argument("--batch", type=int, default=10_000)
    e.add_argument("--mode", choices=evaluate.MODES, default="zero")
    e.add_argument("--out", help="report path (.csv or .json)")
    common(e)
    e.set_defaults(func=cmd_eval)

    o = sub.add_parser("optimize", help="learn a code")
    init = o.add_mutually_exclusive_group(required=True)
    init.add_argument("--init", help="initial code file or builtin name")
    init.add_argument("--random", help="n,k,p for a random systematic start")
    o.add_argument("--config", help="TrainConfig JSON")
    o.add_argument("--max-iters", type=int)
    o.add_argument("--batch-size", type=int)
    o.add_argument("--out", required=True)
    o.add_argument("--trace")
    common(o)
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("stats", help="density, girth and sparsity delta")
    s.add_argument("--code", required=True)
    s.add_argument("--compare")
    s.add_argument("--out")
    common(s)
    s.set_defaults(func=cmd_stats)

    g = sub.add_parser("gain", help="dB-gain statistics between two reports")
    g.add_argument("--base", required=True)
    g.add_argument("--ours", required=True)
    g.add_argument("--iters", type=int)
    g.add_argument("--out")
    common(g)
    g.set_defaults(func=cmd_gain)

    w = sub.add_parser("sweep", help="hyperparameter sweep")
    w.add_argument("--init", required=True)
    w.add_argument("--grid", required=True, help="sweep JSON: grid, base config, stop rule")
    w.add_argument("--config", help="base TrainConfig JSON when the sweep file has none")
    w.add_argument("--max-iters", type=int)
    w.add_argument("--batch-size", type=int)
    w.add_argument("--out", required=True)
    w.add_argument("--best", help="write the top-ranked code here")
    common(w)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DimensionMismatch, RankDeficient) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIM
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUM
    except FilterStarvation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STARVE
    except (ValueError, OSError) as exc:  # ParseError, InvalidParams, NoOverlap, ...
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
