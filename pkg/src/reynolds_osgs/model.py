"""Coefficient functions of the cavitation-regularized Reynolds equation.

The unknown ``u`` is pressure where ``u >= 0`` and relates to the film
fraction where ``u < 0``.  Written as a convection-diffusion-reaction problem
the weak operator reads

    (grad v, k grad u) - (v, a_x du/dx) - (v, s u) = (v, f - dH/dx)

with ``k = H^3 phi'(u) / 12``, ``a_x = (g(u) - 1) H`` and
``s = d/dx((g(u) - 1) H)``, where ``phi(u) = g(u) u``.

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

STABILIZATION_MODES = ("none", "osgs", "artificial_diffusion")

TAU_DENOMINATOR_FLOOR = 1e-14
TAU_CAP = 1e14


@dataclass(frozen=True)
class ModelConfig:
    """Physical and algorithmic scalars of one problem."""

    zeta: float = 0.5
    x_a: float = np.pi
    u_bar: float = 0.98
    c1: float = 4.0
    c2: float = 2.0
    beta: float = 0.7
    stabilization_mode: str = "osgs"
    shock_capturing: bool = False
    x_range: tuple[float, float] = (0.0, 2.0 * np.pi)
    y_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if not 0.0 < self.u_bar < 1.0:
            raise ValueError(f"u_bar must lie in (0, 1), got {self.u_bar}")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta}")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.stabilization_mode not in STABILIZATION_MODES:
            raise ValueError(
                f"stabilization_mode must be one of {STABILIZATION_MODES}, got {self.stabilization_mode!r}"
            )

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)


def gap(x, config: ModelConfig):
    """Film thickness ``H = 1 - zeta cos(x - x_a)`` and its x-derivative."""
    phase = np.asarray(x, dtype=float) - config.x_a
    return 1.0 - config.zeta * np.cos(phase), config.zeta * np.sin(phase)


def switch(u, config: ModelConfig):
    """Regularized arctan switch ``g`` with its first and second u-derivatives."""
    r = 1.0 / (1.0 - config.u_bar)
    u = np.asarray(u, dtype=float)
    ru = r * u
    denom = 1.0 + ru * ru
    g = np.arctan2(1.0, -ru) / np.pi
    dg = r / (np.pi * denom)
    d2g = -2.0 * r**3 * u / (np.pi * denom * denom)
    return g, dg, d2g


def _switch_parts(u, config: ModelConfig):
    """``g - 1``, ``phi'``, ``psi'`` and ``phi'' = psi''`` without cancellation.

    With ``t = u / (1 - u_bar)``, ``pi phi'(t) = arctan2(1, -t) + t / (1 + t^2)``,
    which cancels to ``O(|t|^-3)`` as ``t -> -inf``; a series is used there.
    ``psi(u) = phi(-u)`` gives ``psi'(u) = -phi'(-u)``.
    """
    r = 1.0 / (1.0 - config.u_bar)
    t = r * np.asarray(u, dtype=float)
    g_minus_1 = -np.arctan2(1.0, t) / np.pi
    phi1 = _scaled_phi_prime(t)
    psi1 = -_scaled_phi_prime(-t)
    phi2 = 2.0 * r / (np.pi * (1.0 + t * t) ** 2)
    return g_minus_1, phi1, psi1, phi2


_SERIES_THRESHOLD = 10.0
_SERIES_TERMS = 9


def _scaled_phi_prime(t):
    t = np.asarray(t, dtype=float)
    out = (np.arctan2(1.0, -t) + t / (1.0 + t * t)) / np.pi
    far = t < -_SERIES_THRESHOLD
    if np.any(far):
        w = -1.0 / t[far]
        w2 = w * w
        total = np.zeros_like(w)
        power = w * w2
        for n in range(1, _SERIES_TERMS + 1):
            total += (-1) ** (n + 1) * (2.0 * n / (2.0 * n + 1.0)) * power
            power = power * w2
        out = np.array(out, copy=True)
        out[far] = total / np.pi
    return out


def stabilization_parameter(k, a_norm, s, h, config: ModelConfig):
    """``tau = (c1 |k| / h^2 + c2 |a| / h + |s|)^-1``, capped where the denominator vanishes."""
    h = np.asarray(h, dtype=float)
    denom = config.c1 * np.abs(k) / h**2 + config.c2 * np.abs(a_norm) / h + np.abs(s)
    denom = np.asarray(denom, dtype=float)
    safe = denom > TAU_DENOMINATOR_FLOOR
    return np.where(safe, 1.0 / np.where(safe, denom, 1.0), TAU_CAP)


@dataclass(frozen=True)
class PointCoefficients:
    H: np.ndarray
    dH_dx: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    phi_prime: np.ndarray
    k: np.ndarray
    a_x: np.ndarray
    s: np.ndarray
    tau: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    d2psi: np.ndarray
    chi: np.ndarray

    @property
    def a_y(self):
        return np.zeros_like(self.a_x)


def coefficients(u, du_dx, x, y, h, config: ModelConfig) -> PointCoefficients:
    """Evaluate every pointwise coefficient for the iterate ``u``.

    ``s`` depends on the x-derivative of the iterate through ``g(u(x, y))``;
    ``du_dx`` is the derivative of the same (frozen) iterate.  ``y`` is
    accepted for symmetry with the data functions; nothing depends on it.
    """
    u = np.asarray(u, dtype=float)
    du_dx = np.asarray(du_dx, dtype=float)
    H, dH = gap(x, config)
    g, dg, d2g = switch(u, config)
    gm1, phi_prime, dpsi, d2psi = _switch_parts(u, config)
    k = H**3 * phi_prime / 12.0
    a_x = gm1 * H
    s = dg * du_dx * H + gm1 * dH
    tau = stabilization_parameter(k, np.abs(a_x), s, h, config)
    psi = gm1 * u
    chi = dpsi * dH + H * d2psi * du_dx
    return PointCoefficients(H, dH, g, dg, d2g, phi_prime, k, a_x, s, tau, psi, dpsi, d2psi, chi)


def newton_coefficients(u, du_dx, x, y, config: ModelConfig):
    """Coefficients of the Newton linearization at ``u``.

    Returns ``(k, dk, psi, dpsi, d2psi, chi)`` where ``dk = H^3 phi''(u) / 12``
    and ``chi = psi'(u) dH/dx + H psi''(u) du/dx``.
    """
    u = np.asarray(u, dtype=float)
    H, dH = gap(x, config)
    gm1, phi1, dpsi, d2psi = _switch_parts(u, config)
    k = H**3 * phi1 / 12.0
    dk = H**3 * d2psi / 12.0
    psi = gm1 * u
    chi = dpsi * dH + H * d2psi * np.asarray(du_dx, dtype=float)
    return k, dk, psi, dpsi, d2psi, chi


def forcing_rhs(x, y, f, config: ModelConfig):
    """Right-hand side ``f - dH/dx``."""
    _, dH = gap(x, config)
    return np.asarray(f, dtype=float) - dH


def strong_operator(u, ux, uy, uxx, uyy, x, config: ModelConfig):
    """Apply the differential operator to a field given pointwise derivatives.

    Expands ``-(1/12) div(H^3 grad(g u)) - d/dx((g - 1) H u)`` with the
    product and chain rules through ``H(x)`` and ``g(u)``.
    """
    H, dH = gap(x, config)
    gm1, phi1, dpsi, phi2 = _switch_parts(u, config)
    diffusion = 3.0 * H**2 * dH * phi1 * ux + H**3 * phi2 * (ux**2 + uy**2) + H**3 * phi1 * (uxx + uyy)
    convection = dpsi * ux * H + gm1 * u * dH
    return -diffusion / 12.0 - convection
