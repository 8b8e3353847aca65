"""Belief-propagation code design and evaluation."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .channel import ChannelSpec, llr, modulate, sigma_from_ebn0, transmit
from .codes import ParityCheck, builtin, load_alist, load_code, random_systematic, save_alist, stats
from .decoder import BpConfig, DecodeResult, bp_decode, edge_bp_decode, hard_decision, min_sum_decode
from .errors import (BpCodesError, DimensionMismatch, FilterStarvation, InvalidParams, NoOverlap,
                     NumericalFailure, ParseError, RankDeficient)
from .evaluate import EvalReport, GainStats, StopRule, db_gain, monte_carlo
from .grad import LossConfig, decode_loss, grad_wrt_H, grad_wrt_omega
from .optimizer import TrainConfig, TrainTrace, optimize, sweep

__all__ = [
    "BACKEND", "BpCodesError", "BpConfig", "ChannelSpec", "DecodeResult", "DimensionMismatch",
    "EvalReport", "FilterStarvation", "GainStats", "InvalidParams", "LossConfig", "NoOverlap",
    "NumericalFailure", "ParityCheck", "ParseError", "RankDeficient", "StopRule", "TrainConfig",
    "TrainTrace", "bp_decode", "builtin", "db_gain", "decode_loss", "edge_bp_decode", "grad_wrt_H",
    "grad_wrt_omega", "hard_decision", "llr", "load_alist", "load_code", "min_sum_decode", "modulate",
    "monte_carlo", "optimize", "random_systematic", "save_alist", "sigma_from_ebn0", "stats", "sweep",
    "transmit",
]
