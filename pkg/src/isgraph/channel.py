"""Path-loss models and the secrecy quantities derived from them.

All functions accept scalars or numpy arrays. Infinity is a valid distance
(no eavesdropper), radius and rate; nothing here raises on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT5 = math.sqrt(5.0)


class InvalidEdgeLength(ValueError):
    """Lattice edge length too large for the eavesdropper-free radius to exist."""


@dataclass(frozen=True)
class UnboundedPowerLaw:
    """``g(r) = r**-gamma``; infinite gain at the origin."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"path-loss exponent must be > 0, got {self.gamma}")

    @property
    def g0(self) -> float:
        return math.inf

    def gain(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(r == 0, np.inf, np.power(np.where(r == 0, 1.0, r), -self.gamma))
        return out[()] if out.ndim == 0 else out

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        pos = y > 0
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(pos, np.power(np.where(pos, y, 1.0), -1.0 / self.gamma), np.inf)
        out = np.where(np.isinf(y) & pos, 0.0, out)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundedPowerLaw:
    """``g(r) = 1 / (1 + r**gamma)``; unit gain at the origin."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"path-loss exponent must be > 0, got {self.gamma}")

    @property
    def g0(self) -> float:
        return 1.0

    def gain(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore"):
            out = 1.0 / (1.0 + np.power(r, self.gamma))
        return out[()] if out.ndim == 0 else out

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        pos = y > 0
        inside = pos & (y < 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            base = np.where(inside, 1.0 / np.where(inside, y, 0.5) - 1.0, 1.0)
            out = np.where(inside, np.power(base, 1.0 / self.gamma), 0.0)
        out = np.where(pos, out, np.inf)
        return out[()] if out.ndim == 0 else out


GainModel = UnboundedPowerLaw | BoundedPowerLaw

MODEL_NAMES = {"power_law": UnboundedPowerLaw, "bounded_power_law": BoundedPowerLaw}


def model_from_name(name: str, gamma: float) -> GainModel:
    try:
        cls = MODEL_NAMES[name]
    except KeyError:
        raise ValueError(f"unknown gain model {name!r}; expected one of {sorted(MODEL_NAMES)}") from None
    return cls(float(gamma))


def model_name(model: GainModel) -> str:
    return "power_law" if isinstance(model, UnboundedPowerLaw) else "bounded_power_law"


@dataclass(frozen=True)
class ChannelParams:
    """Transmit SNR ``P / sigma^2`` (linear) and the secrecy-rate threshold in bits.

    Legitimate receivers and eavesdroppers see the same noise power.
    """

    snr0: float
    rho: float = 0.0

    def __post_init__(self):
        if not self.snr0 > 0:
            raise ValueError(f"snr0 must be > 0, got {self.snr0}")
        if not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")

    @classmethod
    def from_db(cls, snr0_db: float, rho: float = 0.0) -> ChannelParams:
        return cls(10.0 ** (snr0_db / 10.0), rho)

    def with_rho(self, rho: float) -> ChannelParams:
        return ChannelParams(self.snr0, rho)


def gain(model: GainModel, r):
    return model.gain(r)


def gain_inverse(model: GainModel, y):
    """Radius whose gain is ``y``; 0 above ``g(0)`` and ``inf`` for ``y <= 0``."""
    return model.inverse(y)


def msr(params: ChannelParams, model: GainModel, d_link, d_eve):
    """Maximum secrecy rate in bits per complex dimension, clamped at zero."""
    s = params.snr0
    with np.errstate(invalid="ignore"):
        rate = np.log2(1.0 + s * model.gain(d_link)) - np.log2(1.0 + s * model.gain(d_eve))
    # inf - inf only arises for coincident link and eavesdropper at r=0
    rate = np.where(np.isnan(rate), 0.0, rate)
    out = np.maximum(rate, 0.0)
    return out[()] if np.ndim(out) == 0 else out


def rho_max(params: ChannelParams, model: GainModel) -> float:
    """Supremum of thresholds that still admit edges."""
    g0 = model.g0
    if math.isinf(g0):
        return math.inf
    return math.log2(1.0 + params.snr0 * g0)


def out_radius(params: ChannelParams, model: GainModel, rho_e):
    """Secure out-radius of a transmitter whose nearest eavesdropper is ``rho_e`` away.

    Receivers strictly inside this radius get a link whose secrecy rate
    exceeds ``params.rho``.
    """
    rho_e = np.asarray(rho_e, dtype=float)
    if params.rho == 0:
        out = rho_e.copy()
    elif params.rho >= rho_max(params, model):
        out = np.zeros_like(rho_e)
    else:
        f = 2.0 ** params.rho
        threshold = f * model.gain(rho_e) + (f - 1.0) / params.snr0
        out = np.where(threshold >= model.g0, 0.0, model.inverse(threshold))
    return out[()] if out.ndim == 0 else out


def valid_edge_length(params: ChannelParams, model: GainModel) -> float:
    """Supremum of lattice edge lengths for which ``r_free`` is defined."""
    if params.rho == 0:
        return math.inf
    return float(model.inverse((2.0 ** params.rho - 1.0) / params.snr0)) / SQRT5


def r_free(params: ChannelParams, model: GainModel, d: float) -> float:
    """Eavesdropper-free radius that guarantees a strong link across a 2x1 block of side ``d``."""
    if not d > 0:
        raise InvalidEdgeLength(f"edge length must be > 0, got {d}")
    diag = SQRT5 * d
    if params.rho == 0:
        return diag
    h = 2.0 ** -params.rho
    arg = h * float(model.gain(diag)) - (1.0 - h) / params.snr0
    if not arg > 0:
        raise InvalidEdgeLength(
            f"edge length d={d} leaves no eavesdropper-free radius at rho={params.rho}; "
            f"need d < {valid_edge_length(params, model)}"
        )
    return float(model.inverse(arg))
