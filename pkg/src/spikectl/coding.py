"""Gaussian receptive-field population codes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NoSignal(ValueError):
    """Every neuron of the decoded assembly was silent."""


@dataclass(frozen=True)
class Codec:
    """Population code for one scalar over ``[lo, hi]``.

    Centers are evenly spaced with both endpoints included. The receptive
    field width defaults to ``(hi - lo) / n``.
    """

    lo: float
    hi: float
    n: int
    sigma: float | None = None
    gain: float = 20.0
    centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty range [{self.lo}, {self.hi}]")
        if self.n < 2:
            raise ValueError("a codec needs at least two neurons")
        if self.sigma is None:
            object.__setattr__(self, "sigma", (self.hi - self.lo) / self.n)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "centers", np.linspace(self.lo, self.hi, self.n))

    @property
    def span(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def activation(self, value: float) -> np.ndarray:
        return encode(self, value)

    def currents(self, value: float) -> np.ndarray:
        return self.gain * encode(self, value)


def encode(codec: Codec, value: float) -> np.ndarray:
    """Per-neuron activation in [0, 1]; out-of-range values are not clipped."""
    dist = value - codec.centers
    return np.exp(-(dist * dist) / (2.0 * codec.sigma ** 2))


def decode_population(codec: Codec, rates) -> float:
    """Rate-weighted mean of the receptive-field centers."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != codec.centers.shape:
        raise ValueError(f"expected {codec.n} rates, got {rates.shape}")
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    total = rates.sum()
    if total <= 0:
        raise NoSignal("silent assembly")
    return float(rates @ codec.centers / total)


@dataclass(frozen=True)
class SignedPairDecode:
    """Read a signed value out of a positive and a negative assembly."""

    n_per_assembly: int
    rate_max: float
    x_max: float

    def __post_init__(self):
        if min(self.n_per_assembly, self.rate_max, self.x_max) <= 0:
            raise ValueError("signed-pair decoder parameters must be positive")


def decode_signed_pair(cfg: SignedPairDecode, rates_pos, rates_neg) -> float:
    rates_pos = np.asarray(rates_pos, dtype=float)
    rates_neg = np.asarray(rates_neg, dtype=float)
    if rates_pos.shape != (cfg.n_per_assembly,) or rates_neg.shape != (cfg.n_per_assembly,):
        raise ValueError(f"expected {cfg.n_per_assembly} rates per assembly")
    x = (rates_pos.sum() - rates_neg.sum()) / (cfg.rate_max * cfg.n_per_assembly) * cfg.x_max
    return float(np.clip(x, -cfg.x_max, cfg.x_max))
