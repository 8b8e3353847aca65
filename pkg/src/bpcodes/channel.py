"""BPSK modulation, channel noise models and channel LLRs.

LLRs follow ``L = log P(c=1 | y) / P(c=0 | y)``; with bit 0 sent as +1 a
positive observation gives a negative LLR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams

FAMILIES = ("awgn", "fading", "bursty")


def sigma_from_ebn0(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation for unit-energy BPSK at the given Eb/N0 (dB)."""
    if not 0.0 < rate <= 1.0:
        raise InvalidParams(f"rate must lie in (0, 1], got {rate}")
    return (2.0 * rate * 10.0 ** (ebn0_db / 10.0)) ** -0.5


@dataclass(frozen=True)
class ChannelSpec:
    """Channel family and operating point.

    ``fading_scale`` is the Rayleigh scale parameter of the fading gains
    (``E[h^2] = 2 * fading_scale**2``). ``burst_scale`` multiplies sigma to
    give the standard deviation of the impulsive component, which is present
    with probability ``rho``.
    """

    family: str = "awgn"
    ebn0_db: float = 4.0
    rate: float = 0.5
    rho: float = 0.1
    burst_scale: float = 1.0
    fading_scale: float = 1.0
    mixture_llr: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParams(f"unknown channel family {self.family!r}; expected one of {FAMILIES}")
        if not 0.0 < self.rate < 1.0:
            raise InvalidParams(f"rate must lie in (0, 1), got {self.rate}")
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidParams(f"rho must lie in [0, 1], got {self.rho}")
        if self.burst_scale <= 0 or self.fading_scale <= 0:
            raise InvalidParams("burst_scale and fading_scale must be positive")
        if not math.isfinite(self.ebn0_db):
            raise InvalidParams("ebn0_db must be finite")

    @property
    def sigma(self) -> float:
        return sigma_from_ebn0(self.ebn0_db, self.rate)

    def at(self, ebn0_db: float) -> "ChannelSpec":
        from dataclasses import replace

        return replace(self, ebn0_db=float(ebn0_db))


@dataclass
class ReceivedBatch:
    y: np.ndarray
    spec: ChannelSpec
    h: np.ndarray | None = None  # fading gains, fading channel only


def modulate(c) -> np.ndarray:
    """BPSK: bit 0 -> +1, bit 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(c, dtype=np.float64)


def transmit(c_s, spec: ChannelSpec, rng: np.random.Generator, batch: int | None = None) -> ReceivedBatch:
    """Pass modulated symbols through the channel.

    ``c_s`` is either a (B, n) array or a single length-n vector broadcast to
    ``batch`` frames. The Gaussian noise is always drawn first, so families
    that add nothing beyond it reproduce the AWGN samples of the same stream.
    """
    c_s = np.asarray(c_s, dtype=np.float64)
    if c_s.ndim == 1:
        c_s = np.broadcast_to(c_s, (batch or 1, c_s.shape[0]))
    shape = c_s.shape
    sigma = spec.sigma
    eps = sigma * rng.standard_normal(shape)
    if spec.family == "awgn":
        return ReceivedBatch(y=c_s + eps, spec=spec)
    if spec.family == "fading":
        h = rng.rayleigh(spec.fading_scale, shape)
        return ReceivedBatch(y=h * c_s + eps, spec=spec, h=h)
    hit = rng.random(shape) < spec.rho
    zeta = np.where(hit, spec.burst_scale * sigma * rng.standard_normal(shape), 0.0)
    return ReceivedBatch(y=c_s + eps + zeta, spec=spec)


def llr(batch: ReceivedBatch) -> np.ndarray:
    """Per-bit LLRs ``log P(1|y) / P(0|y)`` under ideal channel state information."""
    spec = batch.spec
    s2 = spec.sigma ** 2
    y = batch.y
    if spec.family == "fading":
        return -2.0 * batch.h * y / s2
    if spec.family == "bursty" and spec.mixture_llr:
        wide = s2 * (1.0 + spec.burst_scale ** 2)

        def loglik(mu):
            a = np.log1p(-spec.rho) - 0.5 * np.log(s2) - (y - mu) ** 2 / (2 * s2) if spec.rho < 1 else -np.inf
            b = np.log(spec.rho) - 0.5 * np.log(wide) - (y - mu) ** 2 / (2 * wide) if spec.rho > 0 else -np.inf
            return np.logaddexp(a, b)

        return loglik(-1.0) - loglik(1.0)
    return -2.0 * y / s2
