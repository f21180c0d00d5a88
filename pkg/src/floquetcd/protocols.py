"""Ramp profiles and frequency schedules for control protocols.

A :class:`ControlProtocol` maps protocol time ``t`` to the control parameter
``lambda(t)`` with analytic first and second derivatives.  When a frequency
schedule ``omega(lambda)`` is attached, the drive phase is ``phi(t) =
omega(lambda(t)) * t`` and the adiabatically relevant instantaneous frequency
is ``nu = d(omega t)/dt = omega + t * domega/dt``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

__all__ = ["FrequencyMap", "ControlProtocol", "protocol_eval"]

RAMP_KINDS = ("linear", "cubic", "quartic", "quadratic_to_cubic", "smooth_sin2")


def _ramp_shape(kind: str, x):
    """Normalized ramp value/derivatives: s(0)=0, s(1)=1; returns (s, s', s'')."""
    x = np.asarray(x, dtype=float)
    if kind == "linear":
        return x, np.ones_like(x), np.zeros_like(x)
    if kind == "cubic":
        # ends with zero slope: s = 1 - (1-x)^3
        return 1.0 - (1.0 - x) ** 3, 3.0 * (1.0 - x) ** 2, -6.0 * (1.0 - x)
    if kind == "quartic":
        return x**4, 4.0 * x**3, 12.0 * x**2
    if kind == "quadratic_to_cubic":
        # s' proportional to x(1-x)^2: quadratic start, cubic finish
        s = 3.0 * x**4 - 8.0 * x**3 + 6.0 * x**2
        ds = 12.0 * x * (1.0 - x) ** 2
        dds = 12.0 * (1.0 - x) * (1.0 - 3.0 * x)
        return s, ds, dds
    if kind == "smooth_sin2":
        half_pi_x = 0.5 * np.pi * x
        s = np.sin(half_pi_x) ** 2
        ds = 0.5 * np.pi * np.sin(np.pi * x)
        dds = 0.5 * np.pi**2 * np.cos(np.pi * x)
        return s, ds, dds
    raise ValueError(f"unknown ramp kind {kind!r}; expected one of {RAMP_KINDS}")


@dataclass(frozen=True)
class FrequencyMap:
    """Drive-frequency schedule ``omega(lambda)`` with analytic derivatives."""

    omega: Callable[[float], float]
    d_omega: Callable[[float], float]
    d2_omega: Callable[[float], float]
    label: str = "custom"

    @classmethod
    def identity(cls) -> "FrequencyMap":
        """The control parameter is the drive frequency itself."""
        return cls(lambda lam: lam, lambda lam: 1.0, lambda lam: 0.0, label="identity")

    @classmethod
    def sine(cls, omega_max: float) -> "FrequencyMap":
        """``omega(lambda) = omega_max * sin(pi lambda)``."""
        return cls(
            lambda lam: omega_max * np.sin(np.pi * lam),
            lambda lam: omega_max * np.pi * np.cos(np.pi * lam),
            lambda lam: -omega_max * np.pi**2 * np.sin(np.pi * lam),
            label="sine",
        )


@dataclass(frozen=True)
class ControlProtocol:
    """Parameter ramp ``lambda(t)`` over ``t in [0, t_ramp]``."""

    kind: str
    lambda_i: float
    lambda_f: float
    t_ramp: float
    freq_map: FrequencyMap | None = None

    def __post_init__(self) -> None:
        if self.kind not in RAMP_KINDS:
            raise ValueError(f"unknown ramp kind {self.kind!r}")
        if self.t_ramp <= 0.0:
            raise ValueError("t_ramp must be positive")

    def _check_t(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.t_ramp * (1.0 + 1e-12)):
            raise ValueError("t outside [0, t_ramp]")
        return np.clip(t, 0.0, self.t_ramp)

    def lam(self, t):
        s, _, _ = _ramp_shape(self.kind, self._check_t(t) / self.t_ramp)
        return self.lambda_i + (self.lambda_f - self.lambda_i) * s

    def lam_dot(self, t):
        _, ds, _ = _ramp_shape(self.kind, self._check_t(t) / self.t_ramp)
        return (self.lambda_f - self.lambda_i) * ds / self.t_ramp

    def lam_ddot(self, t):
        _, _, dds = _ramp_shape(self.kind, self._check_t(t) / self.t_ramp)
        return (self.lambda_f - self.lambda_i) * dds / self.t_ramp**2

    @property
    def has_chirp(self) -> bool:
        return self.freq_map is not None

    def omega(self, t):
        if self.freq_map is None:
            raise ValueError("protocol carries no frequency schedule")
        return self.freq_map.omega(self.lam(t))

    def phase(self, t):
        """Drive phase ``phi(t) = omega(lambda(t)) * t``."""
        return self.omega(t) * self._check_t(t)

    def nu(self, t):
        """Instantaneous frequency ``nu = omega + t * d(omega)/dt``."""
        fm = self.freq_map
        if fm is None:
            raise ValueError("protocol carries no frequency schedule")
        t = self._check_t(t)
        lam, lam_dot = self.lam(t), self.lam_dot(t)
        return fm.omega(lam) + t * fm.d_omega(lam) * lam_dot

    def nu_dot(self, t):
        fm = self.freq_map
        if fm is None:
            raise ValueError("protocol carries no frequency schedule")
        t = self._check_t(t)
        lam = self.lam(t)
        lam_dot, lam_ddot = self.lam_dot(t), self.lam_ddot(t)
        omega_dot = fm.d_omega(lam) * lam_dot
        omega_ddot = fm.d2_omega(lam) * lam_dot**2 + fm.d_omega(lam) * lam_ddot
        return 2.0 * omega_dot + t * omega_ddot

    def time_of_lambda(self, lam: float) -> float:
        """Invert the (monotone) ramp; endpoint-safe."""
        lo, hi = sorted((self.lambda_i, self.lambda_f))
        if not (lo - 1e-12 <= lam <= hi + 1e-12):
            raise ValueError("lambda outside the ramp range")
        if abs(lam - self.lambda_i) < 1e-14 * max(1.0, abs(hi - lo)):
            return 0.0
        if abs(lam - self.lambda_f) < 1e-14 * max(1.0, abs(hi - lo)):
            return self.t_ramp
        return float(brentq(lambda t: self.lam(t) - lam, 0.0, self.t_ramp, xtol=1e-14 * self.t_ramp))


def protocol_eval(protocol: ControlProtocol, t: float):
    """``(lambda, lambda_dot, nu, nu_dot)`` at protocol time ``t``.

    ``nu`` and ``nu_dot`` are ``None`` for protocols without a frequency
    schedule (fixed-frequency drives).
    """
    lam = protocol.lam(t)
    lam_dot = protocol.lam_dot(t)
    if protocol.freq_map is None:
        return lam, lam_dot, None, None
    return lam, lam_dot, protocol.nu(t), protocol.nu_dot(t)
