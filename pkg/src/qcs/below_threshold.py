"""Three-mode OPO model: steady states, thresholds, noise spectra, Duan witness.

The pump/signal/idler Langevin system (classical steady state, rotating frame)

    db/dt   = (-i*Delta_p - Gamma) b + i g0 a_s a_i + sqrt(2 gamma) b_in
    da_s/dt = (-i*Delta_s - Gamma) a_s + i g0 a_i^* b
    da_i/dt = (-i*Delta_i - Gamma) a_i + i g0 a_s^* b

has the steady-state conditions (A_s = A_i = A, Delta_s = Delta_i = Delta)

    [Delta^2 + Gamma^2 - (g0 B)^2] A^2 = 0
    2 gamma B^2 B_in^2 = (Delta_p B^2 - Delta A^2)^2 + Gamma^2 (B^2 + A^2)^2

Below threshold the signal/idler fluctuation vector
(da_s, da_s^+, da_i, da_i^+) obeys d(dA)/dt = M_a dA + inputs with the 4x4
drift matrix M_a whose parametric couplings are i*g0*sqrt(2 gamma)B_in /
(+-i*Delta_p + Gamma). The output spectral noise density matrix is

    S_a(w) = [U_in R(w) U_in - E] M_c [U_in R(-w) U_in - E]^T
             + U_in R(w) U_loss M_c [U_in R(-w) U_loss]^T,
    R(w) = (i w E - M_a)^{-1},  M_c = ones at (1,2) and (3,4).

Readout quadratures at angles (theta_s, theta_i) use vacuum variance 1/2;
the Duan witness is C_s = (dy_+)^2 + (dx_-)^2 - |cos(theta_s - theta_i)|,
negative iff the pair is entangled.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoThresholdError, StabilityError
from .resonator import HBAR, ResonatorParams

__all__ = [
    "ThreeModeConfig",
    "SteadyState",
    "NoiseMatrix4",
    "DuanResult",
    "EntanglementMap",
    "steady_state",
    "threshold_pump",
    "fluctuation_matrix_below",
    "output_noise_spectrum",
    "duan_criterion",
    "duan_variances",
    "optimal_duan",
    "entanglement_map",
    "with_coupling_ratio",
]

# Vacuum variance per quadrature for x = (a^+ e^{i th} + a e^{-i th})/sqrt(2).
VACUUM_VARIANCE = 0.5


@dataclass(frozen=True)
class ThreeModeConfig:
    """Operating point of the three-mode OPO."""

    params: ResonatorParams
    delta_s: float = 0.0
    delta_i: float = 0.0
    delta_p: float = 0.0
    b_in: float = 0.0
    theta_in: float = 0.0

    @classmethod
    def symmetric(
        cls, params: ResonatorParams, delta: float, delta_p: float, b_in: float,
        theta_in: float = 0.0,
    ) -> "ThreeModeConfig":
        """Config with Delta_s = Delta_i = Delta (the default analysis)."""
        return cls(params=params, delta_s=delta, delta_i=delta, delta_p=delta_p,
                   b_in=b_in, theta_in=theta_in)


@dataclass(frozen=True)
class SteadyState:
    """Classical steady state; only theta_s + theta_i is determined above threshold."""

    a_mag: float
    b_mag: float
    theta_p: float
    theta_sum: float
    branch: str  # "below" | "above"
    a_mag_secondary: float | None = None

    def residuals(self, cfg: ThreeModeConfig) -> tuple[float, float]:
        """Relative residuals of the two steady-state conditions."""
        p = cfg.params
        g0, gam, big = p.g0, p.gamma, p.big_gamma
        delta = cfg.delta_s
        a2, b2 = self.a_mag**2, self.b_mag**2
        scale1 = delta**2 + big**2
        r1 = abs((scale1 - (g0 * self.b_mag) ** 2) * a2) / (scale1 * max(a2, 1.0))
        lhs = 2 * gam * b2 * cfg.b_in**2
        rhs = (cfg.delta_p * b2 - delta * a2) ** 2 + (big * b2 + big * a2) ** 2
        r2 = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        return r1, r2


@dataclass(frozen=True)
class NoiseMatrix4:
    """Output spectral noise density matrix S_a at Fourier frequency omega."""

    omega: float
    s: np.ndarray


@dataclass(frozen=True)
class DuanResult:
    """Duan witness value and the variances that built it."""

    c_s: float
    theta_s: float
    theta_i: float
    omega: float
    var_x_minus: float
    var_y_plus: float


def _pump_below(cfg: ThreeModeConfig) -> complex:
    """Intracavity pump amplitude on the A = 0 branch."""
    p = cfg.params
    return (
        math.sqrt(2 * p.gamma) * cfg.b_in * np.exp(1j * cfg.theta_in)
        / (1j * cfg.delta_p + p.big_gamma)
    )


def steady_state(cfg: ThreeModeConfig) -> SteadyState:
    """Solve the steady-state conditions, choosing the stable branch.

    Below threshold: A = 0, B^2 = 2 gamma B_in^2/(Delta_p^2 + Gamma^2).
    Above threshold the pump clamps at (g0 B)^2 = Delta^2 + Gamma^2 and A^2
    solves a quadratic; the larger non-negative root is primary, a second
    non-negative root (bent-curve regime) is reported as secondary.
    """
    if cfg.b_in < 0:
        raise ValueError(f"b_in must be non-negative, got {cfg.b_in}")
    p = cfg.params
    delta = cfg.delta_s
    g0, gam, big = p.g0, p.gamma, p.big_gamma

    if cfg.b_in == 0.0:
        return SteadyState(0.0, 0.0, cfg.theta_in, math.nan, "below")

    b2_clamp = (delta**2 + big**2) / g0**2
    # Quadratic in X = A^2 on the clamped branch:
    #   (Delta^2+Gamma^2) X^2 + 2 B^2 (Gamma^2 - Delta*Delta_p) X
    #     + B^4 (Delta_p^2+Gamma^2) - 2 gamma B^2 B_in^2 = 0
    qa = delta**2 + big**2
    qb = 2 * b2_clamp * (big**2 - delta * cfg.delta_p)
    qc = b2_clamp**2 * (cfg.delta_p**2 + big**2) - 2 * gam * b2_clamp * cfg.b_in**2
    disc = qb * qb - 4 * qa * qc
    roots = []
    if disc >= 0:
        sq = math.sqrt(disc)
        roots = [(-qb + sq) / (2 * qa), (-qb - sq) / (2 * qa)]
        roots = [r for r in roots if r > 0]

    if not roots:
        b_mag = math.sqrt(2 * gam) * cfg.b_in / math.sqrt(cfg.delta_p**2 + big**2)
        theta_p = cfg.theta_in - math.atan2(cfg.delta_p, big)
        return SteadyState(0.0, b_mag, theta_p, math.nan, "below")

    a2 = max(roots)
    secondary = math.sqrt(min(roots)) if len(roots) == 2 and min(roots) < a2 else None
    a_mag = math.sqrt(a2)
    b_mag = math.sqrt(b2_clamp)
    # Phases: e^{i(th_p - th_sum)} = (Gamma + i Delta)/(i g0 B) and the pump
    # equation fixes th_p against the drive phase.
    z = b_mag * ((1j * cfg.delta_p + big) + g0**2 * a2 / (big + 1j * delta))
    theta_p = cfg.theta_in - float(np.angle(z))
    theta_sum = theta_p - float(np.angle((big + 1j * delta) / (1j * g0 * b_mag)))
    return SteadyState(a_mag, b_mag, theta_p, theta_sum, "above", secondary)


def threshold_pump(
    delta: float, delta_p: float, params: ResonatorParams
) -> tuple[float, float]:
    """Oscillation threshold (B_in_th, P_th).

    B_in_th = sqrt((Delta^2+Gamma^2)(Delta_p^2+Gamma^2)) / (g0 sqrt(2 gamma)),
    P_th = hbar * Omega_p * B_in_th^2 with Omega_p = omega_p - Delta_p.
    """
    if params.g0 <= 0:
        raise NoThresholdError("g0 must be positive for a finite threshold")
    if params.gamma <= 0:
        raise NoThresholdError("gamma must be positive for a finite threshold")
    big = params.big_gamma
    b_in_th = math.sqrt((delta**2 + big**2) * (delta_p**2 + big**2)) / (
        params.g0 * math.sqrt(2 * params.gamma)
    )
    omega_laser = params.omegap - delta_p
    p_th = HBAR * omega_laser * b_in_th**2
    return b_in_th, p_th


def fluctuation_matrix_below(
    cfg: ThreeModeConfig, check_stability: bool = True
) -> np.ndarray:
    """4x4 drift matrix for (da_s, da_s^+, da_i, da_i^+) on the A = 0 branch.

    Raises StabilityError if any eigenvalue has non-negative real part
    (operating point at/above threshold) unless ``check_stability`` is False.
    """
    p = cfg.params
    big = p.big_gamma
    c = 1j * p.g0 * math.sqrt(2 * p.gamma) * cfg.b_in * np.exp(1j * cfg.theta_in)
    c_plus = c / (1j * cfg.delta_p + big)
    c_minus = np.conj(c_plus)
    m = np.array(
        [
            [-1j * cfg.delta_s - big, 0, 0, c_plus],
            [0, 1j * cfg.delta_s - big, c_minus, 0],
            [0, c_plus, -1j * cfg.delta_i - big, 0],
            [c_minus, 0, 0, 1j * cfg.delta_i - big],
        ],
        dtype=complex,
    )
    if check_stability:
        reals = np.linalg.eigvals(m).real
        if np.any(reals >= 0):
            raise StabilityError(
                f"background unstable: max Re(eig) = {reals.max():.3e} >= 0 "
                f"(at or above threshold)"
            )
    return m


# Input noise correlator <d_in d_in^T>: <a a^+> = 1 entries at (0,1), (2,3).
_M_C = np.zeros((4, 4))
_M_C[0, 1] = 1.0
_M_C[2, 3] = 1.0


def output_noise_spectrum(omega: float, cfg: ThreeModeConfig) -> NoiseMatrix4:
    """Output spectral noise density matrix S_a(omega) on a stable background."""
    m_a = fluctuation_matrix_below(cfg)
    p = cfg.params
    u_in = math.sqrt(2 * p.gamma)
    u_loss = math.sqrt(2 * p.mu)
    eye = np.eye(4, dtype=complex)

    def resolvent(w: float) -> np.ndarray:
        return np.linalg.solve(1j * w * eye - m_a, eye)

    r_plus = resolvent(omega)
    r_minus = resolvent(-omega)
    h_plus = u_in**2 * r_plus - eye
    h_minus = u_in**2 * r_minus - eye
    s = h_plus @ _M_C @ h_minus.T
    if u_loss > 0:
        l_plus = u_in * u_loss * r_plus
        l_minus = u_in * u_loss * r_minus
        s = s + l_plus @ _M_C @ l_minus.T
    return NoiseMatrix4(omega=omega, s=s)


def _t_rows(theta_s, theta_i) -> tuple[np.ndarray, np.ndarray]:
    """Rows 1 (y_+) and 4 (x_-) of T_r, broadcast over angle arrays."""
    theta_s = np.asarray(theta_s, dtype=float)
    theta_i = np.asarray(theta_i, dtype=float)
    es, esc = np.exp(-1j * theta_s), np.exp(1j * theta_s)
    ei, eic = np.exp(-1j * theta_i), np.exp(1j * theta_i)
    t1 = 0.5 * np.stack(
        np.broadcast_arrays(-1j * es, 1j * esc, -1j * ei, 1j * eic), axis=-1
    )
    t4 = 0.5 * np.stack(np.broadcast_arrays(es, esc, -ei, -eic), axis=-1)
    return t1, t4


def duan_variances(s_a: np.ndarray, theta_s, theta_i) -> tuple[np.ndarray, np.ndarray]:
    """Variances ((dy_+)^2, (dx_-)^2) at readout angles; broadcasts over angles."""
    t1, t4 = _t_rows(theta_s, theta_i)
    vy = np.einsum("...i,ij,...j->...", t1, s_a, t1)
    vx = np.einsum("...i,ij,...j->...", t4, s_a, t4)
    return vy.real, vx.real


def t_r_matrix(theta_s: float, theta_i: float) -> np.ndarray:
    """Full 4x4 readout transform T_r = G P."""
    es, esc = np.exp(-1j * theta_s), np.exp(1j * theta_s)
    ei, eic = np.exp(-1j * theta_i), np.exp(1j * theta_i)
    return 0.5 * np.array(
        [
            [-1j * es, 1j * esc, -1j * ei, 1j * eic],
            [es, esc, ei, eic],
            [-1j * es, 1j * esc, 1j * ei, -1j * eic],
            [es, esc, -ei, -eic],
        ]
    )


def quadrature_noise_matrix(noise: NoiseMatrix4, theta_s: float, theta_i: float) -> np.ndarray:
    """Symmetrized 4x4 spectral matrix of (dy_+, dx_+, dy_-, dx_-)."""
    t = t_r_matrix(theta_s, theta_i)
    raw = t @ noise.s @ t.T
    return np.real((raw + raw.T) / 2)


def duan_criterion(noise: NoiseMatrix4, theta_s: float, theta_i: float) -> DuanResult:
    """Evaluate C_s = (dy_+)^2 + (dx_-)^2 - |cos(theta_s - theta_i)|."""
    vy, vx = duan_variances(noise.s, theta_s, theta_i)
    c_s = float(vy) + float(vx) - abs(math.cos(theta_s - theta_i))
    return DuanResult(
        c_s=c_s, theta_s=theta_s, theta_i=theta_i, omega=noise.omega,
        var_x_minus=float(vx), var_y_plus=float(vy),
    )


def optimal_duan(
    cfg: ThreeModeConfig, omega: float, n_angles: int = 96
) -> DuanResult:
    """Minimum-C_s readout at one Fourier frequency (grid + local refinement)."""
    from scipy.optimize import minimize

    noise = output_noise_spectrum(omega, cfg)
    thetas = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    vy, vx = duan_variances(noise.s, thetas[:, None], thetas[None, :])
    c = vy + vx - np.abs(np.cos(thetas[:, None] - thetas[None, :]))
    i, j = np.unravel_index(np.argmin(c), c.shape)

    def objective(x):
        vy1, vx1 = duan_variances(noise.s, x[0], x[1])
        return float(vy1) + float(vx1) - abs(math.cos(x[0] - x[1]))

    res = minimize(objective, x0=[thetas[i], thetas[j]], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14})
    return duan_criterion(noise, float(res.x[0]), float(res.x[1]))


def with_coupling_ratio(params: ResonatorParams, r: float) -> ResonatorParams:
    """Rebuild parameters at coupling ratio r with the intrinsic loss fixed."""
    if r <= 0:
        raise ValueError(f"coupling ratio must be positive, got {r}")
    gamma = r * params.mu
    if params.mu == 0:
        raise ValueError("coupling ratio is undefined for a lossless cavity")
    big = params.mu + gamma
    return dataclasses.replace(
        params,
        coupling_ratio=r,
        gamma=gamma,
        big_gamma=big,
        q_ex=params.omega0 / gamma,
        q_loaded=params.omega0 / big,
    )


@dataclass(frozen=True)
class EntanglementMap:
    """Dense C_s map over (axis value, omega) with per-point optimal angles."""

    axis: str
    axis_values: np.ndarray
    omega_grid: np.ndarray
    c_s: np.ndarray          # shape (len(axis_values), len(omega_grid))
    theta_s: np.ndarray      # same shape: angle at the tabulated C_s
    theta_i: np.ndarray
    optimal_omega: np.ndarray  # per axis value: omega of min C_s
    argmax_theta_s: np.ndarray | None = None  # angle axis only, per omega


def entanglement_map(
    axis1: str,
    grid1: np.ndarray,
    omega_grid: np.ndarray,
    cfg: ThreeModeConfig,
    n_angles: int = 48,
    theta_i_fixed: float = 0.0,
) -> EntanglementMap:
    """Scan C_s over one parameter axis and Fourier frequency.

    axis1 is one of "pump_amplitude", "coupling_ratio", "readout_angle".
    For the two parameter axes, C_s is minimized over an internal
    (theta_s, theta_i) grid per point; for "readout_angle" grid1 holds
    theta_s values, theta_i is fixed, and no inner optimization happens.
    Stability errors are re-raised with the offending grid point attached.
    """
    grid1 = np.asarray(grid1, dtype=float)
    omega_grid = np.asarray(omega_grid, dtype=float)
    thetas = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)

    c_s = np.empty((grid1.size, omega_grid.size))
    th_s = np.empty_like(c_s)
    th_i = np.empty_like(c_s)
    argmax_ts = None

    if axis1 == "readout_angle":
        try:
            spectra = [output_noise_spectrum(w, cfg) for w in omega_grid]
        except StabilityError as exc:
            raise StabilityError(f"{exc} [readout_angle scan]") from exc
        for j, noise in enumerate(spectra):
            vy, vx = duan_variances(noise.s, grid1, theta_i_fixed)
            c_s[:, j] = vy + vx - np.abs(np.cos(grid1 - theta_i_fixed))
        th_s[:] = grid1[:, None]
        th_i[:] = theta_i_fixed
        argmax_ts = grid1[np.argmax(c_s, axis=0)]
    elif axis1 in ("pump_amplitude", "coupling_ratio"):
        for i, val in enumerate(grid1):
            if axis1 == "pump_amplitude":
                cfg_i = dataclasses.replace(cfg, b_in=float(val))
            else:
                cfg_i = dataclasses.replace(
                    cfg, params=with_coupling_ratio(cfg.params, float(val))
                )
            for j, w in enumerate(omega_grid):
                try:
                    noise = output_noise_spectrum(w, cfg_i)
                except StabilityError as exc:
                    raise StabilityError(
                        f"{exc} [{axis1}={val!r}, omega={w!r}]"
                    ) from exc
                vy, vx = duan_variances(noise.s, thetas[:, None], thetas[None, :])
                grid_c = vy + vx - np.abs(np.cos(thetas[:, None] - thetas[None, :]))
                a, b = np.unravel_index(np.argmin(grid_c), grid_c.shape)
                c_s[i, j] = grid_c[a, b]
                th_s[i, j] = thetas[a]
                th_i[i, j] = thetas[b]
    else:
        raise ValueError(f"unknown axis {axis1!r}")

    optimal_omega = omega_grid[np.argmin(c_s, axis=1)]
    return EntanglementMap(
        axis=axis1, axis_values=grid1, omega_grid=omega_grid, c_s=c_s,
        theta_s=th_s, theta_i=th_i, optimal_omega=optimal_omega,
        argmax_theta_s=argmax_ts,
    )
