"""Modulation-instability gain of the reduced single mean-field equation.

The subharmonic field alone obeys (phase matching assumed)

    da/dt = (-Gamma - i*Delta) a - i (k''_1 L nu_f / 2) d^2a/dtau^2
            + i sqrt(2 gamma) g0 B_in a^* / nu_f
            - (g0^2/nu_f) a^* ⋆ [(a ⋆ a) ⊗ I(tau)]

with round-trip response I(tau) = IDFT[I_hat(Omega)],

    I_hat(Omega) = (1 - i x - e^{-i x}) / x^2,
    x(Omega)     = -dk' L Omega - (k''_2 L / 2) Omega^2,

and I_hat(0) = 1/2. Constant solutions satisfy

    |a0|^2 = (-Gamma nu_f ± sqrt(2 gamma g0^2 B_in^2 - Delta^2 nu_f^2))
             / (g0^2 I_hat(0)).

Sideband perturbations a = a0 + A1 e^{i Omega tau} + A2 e^{-i Omega tau}
grow at Re(lambda_+), with

    nontrivial branch:
      lambda_± = -[Gamma + (g0^2/nu_f)|a0|^2 iota_+]
                 ± sqrt((Gamma^2+Delta^2)
                        - [Delta - (k''_1 L nu_f/2) Omega^2
                           - i (g0^2/nu_f)|a0|^2 iota_-]^2),
      iota_±(Omega) = I_hat(Omega) ± I_hat^*(-Omega),

    trivial (a0 = 0) branch:
      lambda_± = -Gamma ± sqrt(2 gamma g0^2 B_in^2 / nu_f^2
                               - [Delta - (k''_1 L nu_f/2) Omega^2]^2).

Principal complex square roots; lambda_+ is the root with the larger real
part (the spectral abscissa).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import BelowOscillationError
from .resonator import ResonatorParams

__all__ = [
    "ResponseSample",
    "MiGain",
    "response",
    "response_argument",
    "steady_intensity",
    "gain_trivial",
    "gain_nontrivial",
    "sideband_matrix",
    "omega_from_mode",
]

_SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class ResponseSample:
    """Round-trip response I_hat at one offset frequency."""

    omega_offset: float
    x: float
    i_hat: complex


@dataclass(frozen=True)
class MiGain:
    """Growth rate of the fastest sideband eigenvalue at one offset."""

    omega_offset: float
    lambda_plus_re: float
    branch: str  # "trivial" | "nontrivial"
    lambda_plus: complex = 0.0j
    lambda_minus: complex = 0.0j


def omega_from_mode(l, params: ResonatorParams):
    """Offset angular frequency of relative mode number l: Omega = 2 pi nu_f l."""
    return 2 * math.pi * params.nu_f * np.asarray(l, dtype=float)


def response_argument(omega_offset, params: ResonatorParams):
    """x(Omega) = -dk' L Omega - (k''_2 L / 2) Omega^2."""
    w = np.asarray(omega_offset, dtype=float)
    return -params.dkp * params.length * w - 0.5 * params.kpp2 * params.length * w**2


def _i_hat_of_x(x):
    """(1 - i x - e^{-i x})/x^2 with a series for |x| below the cutoff.

    Series: 1/2 - i x/6 - x^2/24 + i x^3/120, exact limit 1/2 at x = 0.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    small = np.abs(x) < _SERIES_CUTOFF
    xs = x[small]
    out[small] = 0.5 - 1j * xs / 6 - xs**2 / 24 + 1j * xs**3 / 120
    xl = x[~small]
    out[~small] = (1 - 1j * xl - np.exp(-1j * xl)) / xl**2
    return out


def response(omega_offset: float, params: ResonatorParams) -> ResponseSample:
    """Evaluate the round-trip response at one offset frequency."""
    x = float(response_argument(omega_offset, params))
    i_hat = complex(_i_hat_of_x(np.array(x)))
    return ResponseSample(omega_offset=float(omega_offset), x=x, i_hat=i_hat)


def steady_intensity(
    b_in: float, delta: float, params: ResonatorParams
) -> tuple[float, float]:
    """Both ± roots of the steady comb intensity |a0|^2 (may be negative).

    Raises BelowOscillationError when 2 gamma g0^2 B_in^2 < Delta^2 nu_f^2
    (no real constant solution). Negative values are returned as-is and are
    nonphysical; callers should use the plus root.
    """
    p = params
    disc = 2 * p.gamma * p.g0**2 * b_in**2 - delta**2 * p.nu_f**2
    if disc < 0:
        raise BelowOscillationError(
            f"2*gamma*g0^2*B_in^2 = {2*p.gamma*p.g0**2*b_in**2:.6e} < "
            f"Delta^2*nu_f^2 = {delta**2*p.nu_f**2:.6e}: no real steady intensity"
        )
    i_hat0 = 0.5  # I_hat(0) exactly
    root = math.sqrt(disc)
    denom = p.g0**2 * i_hat0
    return (
        (-p.big_gamma * p.nu_f + root) / denom,
        (-p.big_gamma * p.nu_f - root) / denom,
    )


def gain_trivial(
    omega_offset: float, b_in: float, delta: float, params: ResonatorParams
) -> MiGain:
    """MI growth rate of the trivial a0 = 0 solution."""
    p = params
    bracket = delta - 0.5 * p.kpp1 * p.length * p.nu_f * omega_offset**2
    rad = 2 * p.gamma * p.g0**2 * b_in**2 / p.nu_f**2 - bracket**2
    sq = cmath.sqrt(complex(rad))
    lam_a = -p.big_gamma + sq
    lam_b = -p.big_gamma - sq
    lam_p, lam_m = (lam_a, lam_b) if lam_a.real >= lam_b.real else (lam_b, lam_a)
    return MiGain(
        omega_offset=float(omega_offset), lambda_plus_re=lam_p.real,
        branch="trivial", lambda_plus=lam_p, lambda_minus=lam_m,
    )


def gain_nontrivial(
    omega_offset: float, b_in: float, delta: float, params: ResonatorParams
) -> MiGain:
    """MI growth rate on the nontrivial constant background (plus root of |a0|^2)."""
    p = params
    a0_sq = steady_intensity(b_in, delta, params)[0]
    i_plus = complex(_i_hat_of_x(response_argument(omega_offset, p)))
    i_minus_conj = np.conj(complex(_i_hat_of_x(response_argument(-omega_offset, p))))
    iota_p = i_plus + i_minus_conj
    iota_m = i_plus - i_minus_conj
    k2 = p.g0**2 * a0_sq / p.nu_f
    bracket = (
        delta - 0.5 * p.kpp1 * p.length * p.nu_f * omega_offset**2 - 1j * k2 * iota_m
    )
    sq = cmath.sqrt(p.big_gamma**2 + delta**2 - bracket**2)
    base = -(p.big_gamma + k2 * iota_p)
    lam_a = base + sq
    lam_b = base - sq
    lam_p, lam_m = (lam_a, lam_b) if lam_a.real >= lam_b.real else (lam_b, lam_a)
    return MiGain(
        omega_offset=float(omega_offset), lambda_plus_re=lam_p.real,
        branch="nontrivial", lambda_plus=lam_p, lambda_minus=lam_m,
    )


def sideband_matrix(
    omega_offset: float,
    b_in: float,
    delta: float,
    params: ResonatorParams,
    a0: complex | None = None,
) -> np.ndarray:
    """Linearized 2x2 system matrix M for (A1^*, A2).

    Built directly from the sideband equations (independently of the closed
    eigenvalue formulas, for cross-checking). ``a0`` defaults to the real
    positive plus-root amplitude; pass 0 for the trivial branch.
    """
    p = params
    if a0 is None:
        a0_sq = max(steady_intensity(b_in, delta, params)[0], 0.0)
        # Steady phase from the constant-solution condition; the analytic
        # eigenvalues are phase-independent but the matrix entries are not.
        num = 1j * math.sqrt(2 * p.gamma) * p.g0 * b_in / p.nu_f
        den = p.big_gamma + 1j * delta + 0.5 * p.g0**2 * a0_sq / p.nu_f
        phi = 0.5 * cmath.phase(num / den) if a0_sq > 0 else 0.0
        a0 = math.sqrt(a0_sq) * cmath.exp(1j * phi)
    a0 = complex(a0)
    i_pos = complex(_i_hat_of_x(response_argument(omega_offset, p)))
    i_neg = complex(_i_hat_of_x(response_argument(-omega_offset, p)))
    dphase = delta - 0.5 * p.kpp1 * p.length * p.nu_f * omega_offset**2
    k2 = p.g0**2 / p.nu_f
    drive = k2 * a0**2 * 0.5 - 1j * math.sqrt(2 * p.gamma) * p.g0 * b_in / p.nu_f
    # Row 1: conjugate of the A1 equation; row 2: the A2 equation.
    d11 = -(p.big_gamma - 1j * dphase + 2 * k2 * abs(a0) ** 2 * np.conj(i_neg))
    d22 = -(p.big_gamma + 1j * dphase + 2 * k2 * abs(a0) ** 2 * i_pos)
    return np.array([[d11, -np.conj(drive)], [-drive, d22]], dtype=complex)
