"""Microring resonator parameters and closed-form device relations.

All angular frequencies are in rad/s, plain frequencies in Hz, lengths in m.
The core relations implemented here:

    omega_l = omega_0 + D_1*l + (D_2/2)*l^2          (resonance Taylor expansion)
    D_int   = omega_l - omega_0 - D_1*l              (integrated dispersion)
    Delta_p = omega_p - Omega_p                      (pump detuning)
    Delta   = (2*omega_0 - omega_p + Delta_p)/2      (subharmonic detuning)
    mu      = omega_0/Q_0,  gamma = r*mu,  Gamma = mu + gamma
    1/Q     = 1/Q_0 + 1/Q_ex,  Q_ex = omega_0/gamma
    nu_f    = 1/(k'_1 * L),  L = 2*pi*R
    D_2     = -k''_1 * L * nu_f * (2*pi*nu_f)^2      (mean-field operator image)
    g_0     = 2*eps0*chi2*sqrt(hbar*w_s*w_i*w_p/(16*pi*eps0^3*eps1^3*A_eff*R))
    B_in    = sqrt(P_in/(hbar*Omega_p))

Field amplitudes are treated throughout as dimensionless normalized
amplitudes (photon-flux convention for B_in).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.constants import epsilon_0 as EPS0
from scipy.constants import hbar as HBAR

__all__ = [
    "ResonatorParams",
    "ModeIndex",
    "PUMP_CENTER_MODE",
    "effective_mode_area",
    "resonance_frequency",
    "integrated_dispersion",
    "detunings",
    "coupling_rates",
    "fsr_from_group_index",
    "phase_mismatch",
    "nonlinear_coupling",
    "pump_amplitude",
]

# Absolute comb index of the pump band center (the subharmonic band is
# centered at index 0).
PUMP_CENTER_MODE = 959

_REL_TOL = 1e-12


def _require_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class ResonatorParams:
    """Device parameters for one chi^(2) microring resonator.

    Prefer :meth:`derive` which fills every derived field consistently from
    the primitive inputs; direct construction re-validates the internal
    consistency relations.

    Parameters
    ----------
    omega0, omegap : float
        Subharmonic (l=0) and pump resonance frequencies [rad/s].
    d1 : float
        FSR in angular units, D_1 = 2*pi*nu_f [rad/s].
    nu_f : float
        Free spectral range [Hz].
    d2 : float
        Group-velocity-dispersion coefficient D_2 [rad/s].
    kp1, kpp1, kp2, kpp2 : float
        First/second-order dispersion at the subharmonic (1) and pump (2)
        bands: k' [s/m], k'' [s^2/m].
    dkp : float
        Group-velocity walk-off k'_2 - k'_1 [s/m].
    radius, length : float
        Ring radius R and perimeter L = 2*pi*R [m].
    q0, coupling_ratio, q_ex, q_loaded : float
        Intrinsic Q, r = gamma/mu, external Q, loaded Q. ``q0 = inf`` is
        allowed and models a lossless (mu = 0) cavity.
    mu, gamma, big_gamma : float
        Intrinsic loss, coupling rate, total linewidth Gamma [rad/s].
    a_eff : float
        Effective mode area [m^2].
    chi2 : float or None
        Second-order susceptibility [m/V]; informational.
    g0 : float
        Single-photon nonlinear coupling rate [rad/s].
    eps1 : float
        Relative permittivity.
    """

    omega0: float
    omegap: float
    d1: float
    nu_f: float
    d2: float
    kp1: float
    kpp1: float
    kp2: float
    kpp2: float
    dkp: float
    radius: float
    length: float
    q0: float
    coupling_ratio: float
    mu: float
    gamma: float
    big_gamma: float
    q_ex: float
    q_loaded: float
    a_eff: float
    g0: float
    eps1: float
    chi2: float | None = field(default=None)

    def __post_init__(self) -> None:
        _require_positive(
            omega0=self.omega0,
            omegap=self.omegap,
            d1=self.d1,
            nu_f=self.nu_f,
            radius=self.radius,
            length=self.length,
            q0=self.q0,
            gamma=self.gamma,
            big_gamma=self.big_gamma,
            q_ex=self.q_ex,
            q_loaded=self.q_loaded,
            a_eff=self.a_eff,
            g0=self.g0,
            eps1=self.eps1,
        )
        if self.mu < 0:
            raise ValueError(f"mu must be non-negative, got {self.mu}")
        if self.chi2 is not None and self.chi2 <= 0:
            raise ValueError(f"chi2 must be positive, got {self.chi2}")
        if not math.isclose(self.big_gamma, self.mu + self.gamma, rel_tol=_REL_TOL):
            raise ValueError("big_gamma must equal mu + gamma")
        if self.mu > 0 and not math.isclose(
            self.gamma, self.coupling_ratio * self.mu, rel_tol=1e-9
        ):
            raise ValueError("gamma must equal coupling_ratio * mu")
        if math.isfinite(self.q0):
            lhs = 1.0 / self.q_loaded
            rhs = 1.0 / self.q0 + 1.0 / self.q_ex
            if abs(lhs - rhs) > _REL_TOL * abs(lhs):
                raise ValueError("1/Q must equal 1/Q0 + 1/Q_ex")
        if not math.isclose(self.nu_f, self.d1 / (2 * math.pi), rel_tol=_REL_TOL):
            raise ValueError("nu_f must equal d1/(2*pi)")

    @classmethod
    def derive(
        cls,
        *,
        omega0: float,
        omegap: float,
        q0: float,
        coupling_ratio: float,
        radius: float,
        kp1: float,
        kpp1: float,
        kp2: float,
        kpp2: float,
        a_eff: float,
        g0: float,
        eps1: float,
        chi2: float | None = None,
        fsr_hz: float | None = None,
    ) -> "ResonatorParams":
        """Build a fully consistent parameter set from primitive inputs.

        ``fsr_hz`` overrides the FSR derived from ``1/(kp1*L)`` when given
        (in that case kp1 is recomputed to stay consistent).
        """
        _require_positive(q0=q0, coupling_ratio=coupling_ratio, radius=radius, kp1=kp1)
        length = 2 * math.pi * radius
        if fsr_hz is None:
            nu_f = fsr_from_group_index(kp1, length)
        else:
            nu_f = fsr_hz
            kp1 = 1.0 / (nu_f * length)
        mu, gamma, big_gamma, q_ex, q_loaded = coupling_rates(q0, coupling_ratio, omega0)
        d1 = 2 * math.pi * nu_f
        # Image of the -i*(k''_1 L nu_f / 2) d^2/dtau^2 operator on mode l.
        d2 = -kpp1 * length * nu_f * (2 * math.pi * nu_f) ** 2
        return cls(
            omega0=omega0,
            omegap=omegap,
            d1=d1,
            nu_f=nu_f,
            d2=d2,
            kp1=kp1,
            kpp1=kpp1,
            kp2=kp2,
            kpp2=kpp2,
            dkp=kp2 - kp1,
            radius=radius,
            length=length,
            q0=q0,
            coupling_ratio=coupling_ratio,
            mu=mu,
            gamma=gamma,
            big_gamma=big_gamma,
            q_ex=q_ex,
            q_loaded=q_loaded,
            a_eff=a_eff,
            g0=g0,
            eps1=eps1,
            chi2=chi2,
        )

    @classmethod
    def synthetic(
        cls,
        *,
        gamma: float,
        mu: float,
        g0: float,
        nu_f: float = 1.0,
        omega0: float = 1.0,
        omegap: float = 2.0,
        kpp1: float = 0.0,
        kpp2: float = 0.0,
        dkp: float = 0.0,
        radius: float = 1.0 / (2 * math.pi),
    ) -> "ResonatorParams":
        """Minimal consistent parameter set in caller-chosen units.

        Intended for analysis and tests that specify rates directly
        (including lossless mu = 0) instead of deriving them from Q factors.
        """
        length = 2 * math.pi * radius
        kp1 = 1.0 / (nu_f * length)
        q0 = omega0 / mu if mu > 0 else math.inf
        q_ex = omega0 / gamma
        q_loaded = omega0 / (mu + gamma)
        return cls(
            omega0=omega0,
            omegap=omegap,
            d1=2 * math.pi * nu_f,
            nu_f=nu_f,
            d2=-kpp1 * length * nu_f * (2 * math.pi * nu_f) ** 2,
            kp1=kp1,
            kpp1=kpp1,
            kp2=kp1 + dkp,
            kpp2=kpp2,
            dkp=dkp,
            radius=radius,
            length=length,
            q0=q0,
            coupling_ratio=gamma / mu if mu > 0 else math.inf,
            mu=mu,
            gamma=gamma,
            big_gamma=mu + gamma,
            q_ex=q_ex,
            q_loaded=q_loaded,
            a_eff=1.0,
            g0=g0,
            eps1=1.0,
        )

    @property
    def alpha_c(self) -> float:
        """Absorption coefficient diagnostic alpha_c = mu/(L*nu_f) [1/m]."""
        return self.mu / (self.length * self.nu_f)

    @property
    def tau_s(self) -> float:
        """Round-trip time 1/nu_f [s]."""
        return 1.0 / self.nu_f


@dataclass(frozen=True)
class ModeIndex:
    """Relative mode number within one of the two comb bands."""

    l: int
    band: str  # "subharmonic" | "pump"

    def __post_init__(self) -> None:
        if self.band not in ("subharmonic", "pump"):
            raise ValueError(f"unknown band {self.band!r}")

    def in_range(self, n: int) -> bool:
        """Whether the index lies in the length-``n`` band window."""
        if self.band == "subharmonic":
            return -n // 2 + 1 <= self.l <= n // 2
        return -n // 2 + 1 + PUMP_CENTER_MODE <= self.l <= n // 2 + PUMP_CENTER_MODE

    @property
    def offset(self) -> int:
        """Offset from the band center."""
        return self.l if self.band == "subharmonic" else self.l - PUMP_CENTER_MODE


def effective_mode_area(field_magnitude_grid: np.ndarray, cell_area: float) -> float:
    """Effective mode area (sum|F|^2 dA)^2 / sum|F|^4 dA from sampled |F|.

    Parameters
    ----------
    field_magnitude_grid : ndarray
        Samples of |F(y, z)| on a uniform grid (any shape).
    cell_area : float
        Area of one grid cell [m^2].
    """
    f2 = np.abs(np.asarray(field_magnitude_grid, dtype=float)) ** 2
    if f2.size == 0:
        raise ValueError("field grid is empty")
    denom = np.sum(f2**2) * cell_area
    if denom == 0.0:
        raise ValueError("field grid is identically zero")
    return float((np.sum(f2) * cell_area) ** 2 / denom)


def resonance_frequency(l: int, omega0: float, d1: float, d2: float) -> float:
    """Resonance of relative mode l: omega0 + D1*l + (D2/2)*l^2."""
    return omega0 + d1 * l + 0.5 * d2 * l * l


def integrated_dispersion(l: int, params: ResonatorParams) -> float:
    """D_int(l) = omega_l - omega0 - D1*l = (D2/2)*l^2 under the truncation."""
    return 0.5 * params.d2 * l * l


def detunings(omega0: float, omegap: float, pump_laser_freq: float) -> tuple[float, float]:
    """Pump and subharmonic detunings (Delta_p, Delta) for a given laser.

    Delta_p = omega_p - Omega_p and Delta = (2*omega_0 - omega_p + Delta_p)/2.
    """
    _require_positive(omega0=omega0, omegap=omegap, pump_laser_freq=pump_laser_freq)
    delta_p = omegap - pump_laser_freq
    delta = 0.5 * (2 * omega0 - omegap + delta_p)
    return delta_p, delta


def coupling_rates(
    q0: float, coupling_ratio: float, omega0: float
) -> tuple[float, float, float, float, float]:
    """(mu, gamma, Gamma, Q_ex, Q) from the intrinsic Q and ratio r = gamma/mu.

    ``q0 = inf`` gives mu = 0; gamma is then ill-defined from r alone and a
    finite q0 is required, so this raises for non-finite q0.
    """
    _require_positive(q0=q0, coupling_ratio=coupling_ratio, omega0=omega0)
    if not math.isfinite(q0):
        raise ValueError("q0 must be finite; build lossless params directly")
    mu = omega0 / q0
    gamma = coupling_ratio * mu
    big_gamma = mu + gamma
    q_ex = omega0 / gamma
    q_loaded = 1.0 / (1.0 / q0 + 1.0 / q_ex)
    return mu, gamma, big_gamma, q_ex, q_loaded


def fsr_from_group_index(kp1: float, length: float) -> float:
    """Free spectral range nu_f = 1/(k'_1 * L) [Hz]."""
    _require_positive(kp1=kp1, length=length)
    return 1.0 / (kp1 * length)


def phase_mismatch(omega_p: float, omega_s: float, omega_i: float, n) -> float:
    """Collinear phase mismatch [1/m] for a frequency->index function ``n``.

    Delta_k = [w_p n(w_p) - w_s n(w_s) - w_i n(w_i)]/c. The triple need not
    satisfy w_p = w_s + w_i; the mismatch of unmatched triples is meaningful.
    """
    return (omega_p * n(omega_p) - omega_s * n(omega_s) - omega_i * n(omega_i)) / C_LIGHT


def nonlinear_coupling(
    chi2: float,
    omega_s: float,
    omega_i: float,
    omega_p: float,
    eps1: float,
    a_eff: float,
    radius: float,
    *,
    hbar: float = HBAR,
    eps0: float = EPS0,
) -> float:
    """Single-photon coupling g0 from the chi^(2) overlap integral.

    g0 = 2*eps0*chi2*sqrt(hbar*w_s*w_i*w_p / (16*pi*eps0^3*eps1^3*A_eff*R)).
    ``hbar``/``eps0`` are overridable for natural-unit checks.
    """
    _require_positive(
        chi2=chi2, omega_s=omega_s, omega_i=omega_i, omega_p=omega_p,
        eps1=eps1, a_eff=a_eff, radius=radius,
    )
    inside = hbar * omega_s * omega_i * omega_p / (
        16 * math.pi * eps0**3 * eps1**3 * a_eff * radius
    )
    return 2 * eps0 * chi2 * math.sqrt(inside)


def pump_amplitude(p_in: float, pump_laser_freq: float) -> float:
    """Input pump amplitude B_in = sqrt(P_in/(hbar*Omega_p)) [sqrt(photons/s)]."""
    if p_in < 0:
        raise ValueError(f"input power must be non-negative, got {p_in}")
    _require_positive(pump_laser_freq=pump_laser_freq)
    return math.sqrt(p_in / (HBAR * pump_laser_freq))


def threshold_power(b_in_th: float, pump_laser_freq: float) -> float:
    """Pump power corresponding to an input amplitude: P = hbar*Omega_p*B^2."""
    return HBAR * pump_laser_freq * b_in_th**2
