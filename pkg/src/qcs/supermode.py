"""Multimode quantum fluctuations on a comb background.

Linearizing the modal equations around a classical background (alpha, beta)
gives d(delta)/dt = M_a delta + sqrt(2 gamma) delta_in + sqrt(2 mu) delta_loss
for delta = (dA, dB, dA^+, dB^+), with the 4N x 4N drift matrix

          [ chi_A    i g0 C(a*)   i g0 S(b)      0      ]
    M_a = [ i g0 C(a)   chi_B        0           0      ]
          [ -i g0 S(b*)    0       chi_A*   -i g0 C(a)* ]
          [     0          0     -i g0 C(a*)*  chi_B*   ]

where, on FFT-ordered band offsets, S(b)[u, k] = beta_{(u+k) mod N} is the
down-conversion (Hankel) block and C(a)[v, k] = alpha_{(v-k) mod N} the
sum-frequency (Toeplitz) block; both equal the transform-diagonal-transform
products N F^{-1} diag(F .) F(*) of the DFT framework, and carry its
periodic index convention. chi_A/chi_B are the diagonal detuning/loss rates
shared with the split-step linear operator.

The input-output map at Fourier frequency w is

    M_in(w)   = 2 gamma (i w E - M_a)^{-1} - E
    M_loss(w) = 2 sqrt(gamma mu) (i w E - M_a)^{-1}

and the quadrature-basis transfer S_x(w) = T M_in(w) T^{-1} with the
annihilator-to-quadrature unitary T (vacuum variance 1/2 per quadrature).
S_x(w) is complex off w = 0; it is embedded as the real doubled matrix on
cos/sine sideband quadratures, which is exactly real-symplectic for mu = 0,
and the Bloch-Messiah machinery runs on that family. Squeezing spectra
V±(w) are the supermode-projected variances of sigma(w) = S S^T / 2 (the
cavity loss noise is excluded, matching the published convention; variants
including it are reported for uncertainty audits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import StabilityError
from .mean_field import SimResult, band_offsets, extract_active, mode_rates
from .resonator import ResonatorParams
from .symplectic import continue_decomposition, symplecticity_defect

__all__ = [
    "MultimodeBackground",
    "FluctuationMatrix",
    "SqueezingSpectrum",
    "background_from_result",
    "build_fluctuation_matrix",
    "build_fluctuation_matrix_direct",
    "input_output",
    "quadrature_noise",
    "sideband_embed",
    "squeezing_spectrum",
    "band_restricted_analysis",
]

VACUUM_VARIANCE = 0.5


@dataclass(frozen=True)
class MultimodeBackground:
    """Classical modal amplitudes (FFT-ordered band vectors) with detunings."""

    alpha: np.ndarray
    beta: np.ndarray
    delta: float
    delta_p: float
    gamma_pump_scale: float = 1.0
    source_t: float | None = None

    def __post_init__(self) -> None:
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 1:
            raise ValueError("alpha and beta must be 1-D vectors of equal length")

    @property
    def n(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class FluctuationMatrix:
    """Drift matrix plus band bookkeeping.

    ``bands`` is "all" (delta = (dA, dB, dA^+, dB^+)), "sub" or "pump"
    (single-band restriction, delta = (dX, dX^+)).
    """

    m_a: np.ndarray
    n: int
    bands: str = "all"

    @property
    def n_modes(self) -> int:
        return self.m_a.shape[0] // 2

    def max_real_eigenvalue(self) -> float:
        return float(np.max(np.linalg.eigvals(self.m_a).real))

    def check_stable(self) -> None:
        worst = self.max_real_eigenvalue()
        if worst >= 0:
            raise StabilityError(
                f"background unstable: max Re(eig M_a) = {worst:.3e} >= 0"
            )


def background_from_result(
    result: SimResult, n_active: int, delta: float, delta_p: float,
    window: int = 1, gamma_pump_scale: float = 1.0,
) -> MultimodeBackground:
    """Background from the last ``window`` snapshots of a run (mode-space mean)."""
    snaps = result.snapshots[-max(1, window):]
    from .mean_field import modes_from_state

    alphas = []
    betas = []
    for s in snaps:
        am, bm = modes_from_state(s)
        alphas.append(extract_active(am, n_active))
        betas.append(extract_active(bm, n_active))
    return MultimodeBackground(
        alpha=np.mean(alphas, axis=0), beta=np.mean(betas, axis=0),
        delta=delta, delta_p=delta_p, gamma_pump_scale=gamma_pump_scale,
        source_t=snaps[-1].t,
    )


def _coupling_blocks(bg: MultimodeBackground, g0: float):
    """(S(b), C(a)) Hankel/Toeplitz blocks of the Eq.-framework construction."""
    n = bg.n
    idx = np.arange(n)
    sum_idx = (idx[:, None] + idx[None, :]) % n
    diff_idx = (idx[None, :] - idx[:, None]) % n
    down = 1j * g0 * bg.beta[sum_idx]          # dA^+ -> dA
    up = 1j * g0 * bg.alpha[diff_idx]          # dA -> dB
    cross = 1j * g0 * np.conj(bg.alpha)[diff_idx]  # dB -> dA
    return down, up, cross


def _chi_blocks(bg: MultimodeBackground, params: ResonatorParams):
    lam_a, lam_b = mode_rates(params, bg.delta, bg.delta_p, bg.n,
                              bg.gamma_pump_scale)
    return lam_a, lam_b


def build_fluctuation_matrix(
    bg: MultimodeBackground, params: ResonatorParams
) -> FluctuationMatrix:
    """Assemble the 4N x 4N drift matrix via the transform-product blocks."""
    n = bg.n
    lam_a, lam_b = _chi_blocks(bg, params)
    down, up, cross = _coupling_blocks(bg, params.g0)
    z = np.zeros((n, n), dtype=complex)
    m = np.block([
        [np.diag(lam_a), cross, down, z],
        [up, np.diag(lam_b), z, z],
        [-np.conj(down), z, np.diag(np.conj(lam_a)), -np.conj(cross)],
        [z, z, -np.conj(up), np.diag(np.conj(lam_b))],
    ])
    return FluctuationMatrix(m_a=m, n=n, bands="all")


def build_fluctuation_matrix_direct(
    bg: MultimodeBackground, params: ResonatorParams
) -> FluctuationMatrix:
    """Reference construction by explicit delta-constrained summation.

    Loops over band offsets and applies the energy-conservation delta with
    the same periodic convention the DFT framework induces; used as the
    brute-force oracle for :func:`build_fluctuation_matrix`.
    """
    n = bg.n
    o = band_offsets(n)
    pos = {int(v): i for i, v in enumerate(o)}

    def wrap(offset: int) -> int:
        return pos[int((offset + n // 2 - 1) % n - (n // 2 - 1))]

    lam_a, lam_b = _chi_blocks(bg, params)
    g0 = params.g0
    m = np.zeros((4 * n, 4 * n), dtype=complex)
    a_lo, b_lo, a_cr, b_cr = 0, n, 2 * n, 3 * n
    for i in range(n):
        m[a_lo + i, a_lo + i] = lam_a[i]
        m[b_lo + i, b_lo + i] = lam_b[i]
        m[a_cr + i, a_cr + i] = np.conj(lam_a[i])
        m[b_cr + i, b_cr + i] = np.conj(lam_b[i])
    for iu, u in enumerate(o):
        for ik, k in enumerate(o):
            # d(dA_u)/dt += i g0 (beta_j dA_k^+ + alpha_k^* dB_j), j = u + k.
            ij = wrap(u + k)
            m[a_lo + iu, a_cr + ik] += 1j * g0 * bg.beta[ij]
            m[a_cr + iu, a_lo + ik] += -1j * g0 * np.conj(bg.beta[ij])
            m[a_lo + iu, b_lo + ij] += 1j * g0 * np.conj(bg.alpha[ik])
            m[a_cr + iu, b_cr + ij] += -1j * g0 * bg.alpha[ik]
    for iv, v in enumerate(o):
        for ik, k in enumerate(o):
            # d(dB_v)/dt += i g0 sum_k alpha_k dA_n, n = v - k.
            im = wrap(v - k)
            m[b_lo + iv, a_lo + im] += 1j * g0 * bg.alpha[ik]
            m[b_cr + iv, a_cr + im] += -1j * g0 * np.conj(bg.alpha[ik])
    return FluctuationMatrix(m_a=m, n=n, bands="all")


def restrict_fluctuation_matrix(
    bg: MultimodeBackground, params: ResonatorParams, band: str
) -> FluctuationMatrix:
    """Drift matrix with the complementary band's fluctuations frozen."""
    n = bg.n
    lam_a, lam_b = _chi_blocks(bg, params)
    down, up, cross = _coupling_blocks(bg, params.g0)
    z = np.zeros((n, n), dtype=complex)
    if band == "sub":
        m = np.block([
            [np.diag(lam_a), down],
            [-np.conj(down), np.diag(np.conj(lam_a))],
        ])
    elif band == "pump":
        m = np.block([
            [np.diag(lam_b), z],
            [z, np.diag(np.conj(lam_b))],
        ])
    else:
        raise ValueError(f"band must be 'sub' or 'pump', got {band!r}")
    return FluctuationMatrix(m_a=m, n=n, bands=band)


def input_output(
    omega: float, fm: FluctuationMatrix, params: ResonatorParams,
    check_stability: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """(M_in, M_loss) at Fourier frequency omega via LU-factored solves."""
    if check_stability:
        fm.check_stable()
    dim = fm.m_a.shape[0]
    eye = np.eye(dim, dtype=complex)
    lu = lu_factor(1j * omega * eye - fm.m_a)
    resolvent = lu_solve(lu, eye)
    m_in = 2 * params.gamma * resolvent - eye
    m_loss = 2 * math.sqrt(params.gamma * params.mu) * resolvent
    return m_in, m_loss


def _quadrature_transform(n_modes: int) -> np.ndarray:
    eye = np.eye(n_modes)
    return np.block([[eye, eye], [-1j * eye, 1j * eye]]) / math.sqrt(2)


def quadrature_noise(m_in: np.ndarray, omega: float = 0.0) -> np.ndarray:
    """Quadrature-basis transfer S_x = T M_in T^{-1} (loss term excluded)."""
    n_modes = m_in.shape[0] // 2
    t = _quadrature_transform(n_modes)
    return t @ m_in @ t.conj().T


def sideband_embed(s_x: np.ndarray) -> np.ndarray:
    """Real doubled image of a complex quadrature transfer.

    Maps the action on complex Fourier quadratures onto the real cos/sin
    sideband quadratures, ordered (x_c, x_s, y_c, y_s); real-symplectic
    whenever the underlying map is lossless.
    """
    k = s_x.shape[0] // 2
    sxx, sxy = s_x[:k, :k], s_x[:k, k:]
    syx, syy = s_x[k:, :k], s_x[k:, k:]

    def emb(m):
        return np.block([[m.real, -m.imag], [m.imag, m.real]])

    return np.block([[emb(sxx), emb(sxy)], [emb(syx), emb(syy)]])


@dataclass
class SqueezingSpectrum:
    """Squeezing/anti-squeezing spectra and leading-supermode composition.

    v_minus_db/v_plus_db hold 10*log10(V/V_vac) per (omega, supermode pair);
    v_*_total_db additionally include the cavity-loss noise port. eta_abs
    and phi describe the most-squeezed supermode per omega over the 2N
    original modes (subharmonic band first).
    """

    omega_grid: np.ndarray
    v_minus_db: np.ndarray
    v_plus_db: np.ndarray
    v_minus_total_db: np.ndarray
    v_plus_total_db: np.ndarray
    leading: np.ndarray
    eta_abs: np.ndarray
    phi: np.ndarray
    n_band: int
    bands: str
    residuals: np.ndarray
    imag_fraction: np.ndarray
    symplectic_defect: np.ndarray

    @property
    def eta_sub(self) -> np.ndarray:
        return self.eta_abs[:, : self.n_band] if self.bands in ("all", "sub") else None

    @property
    def eta_pump(self) -> np.ndarray:
        if self.bands == "all":
            return self.eta_abs[:, self.n_band:]
        return self.eta_abs if self.bands == "pump" else None

    def normalization_defect(self) -> float:
        return float(np.max(np.abs(np.sum(self.eta_abs**2, axis=1) - 1.0)))


def _supermode_components(u_col: np.ndarray, n_modes: int):
    """(|eta|, phi) per original mode from one doubled-U column."""
    xc = u_col[0 * n_modes: 1 * n_modes]
    xs = u_col[1 * n_modes: 2 * n_modes]
    yc = u_col[2 * n_modes: 3 * n_modes]
    ys = u_col[3 * n_modes: 4 * n_modes]
    eta = np.sqrt(xc**2 + xs**2 + yc**2 + ys**2)
    # Phase convention: cos-sideband components (exact Eq.-28 reading at w=0,
    # where the sin components vanish).
    phi = np.arctan2(yc, xc)
    return eta, phi


def _analyze(
    fm: FluctuationMatrix,
    omega_grid: np.ndarray,
    params: ResonatorParams,
    check_stability: bool = True,
    reanchor_tol: float = 1e-6,
) -> SqueezingSpectrum:
    if check_stability:
        fm.check_stable()
    omega_grid = np.asarray(omega_grid, dtype=float)
    n_modes = fm.n_modes

    embedded = []
    sigmas = []
    sigmas_tot = []
    imag_frac = np.empty(omega_grid.size)
    for i, w in enumerate(omega_grid):
        m_in, m_loss = input_output(float(w), fm, params)
        s_x = quadrature_noise(m_in, float(w))
        s_l = quadrature_noise(m_loss, float(w))
        imag_frac[i] = float(
            np.linalg.norm(s_x.imag) / max(np.linalg.norm(s_x), 1e-300)
        )
        se = sideband_embed(s_x)
        sle = sideband_embed(s_l)
        embedded.append(se)
        sigmas.append(VACUUM_VARIANCE * se @ se.T)
        sigmas_tot.append(VACUUM_VARIANCE * (se @ se.T + sle @ sle.T))

    cont = continue_decomposition(
        embedded, omega_grid, strict=False, reanchor_tol=reanchor_tol
    )

    n_pairs = 2 * n_modes  # doubled mode count
    v_minus = np.empty((omega_grid.size, n_pairs))
    v_plus = np.empty_like(v_minus)
    v_minus_tot = np.empty_like(v_minus)
    v_plus_tot = np.empty_like(v_minus)
    eta_abs = np.empty((omega_grid.size, n_modes))
    phi = np.empty_like(eta_abs)
    leading = np.empty(omega_grid.size, dtype=int)
    sdef = np.empty(omega_grid.size)

    for i, f in enumerate(cont.factors):
        u = f.u
        proj = np.einsum("ij,ik,kj->j", u, sigmas[i], u)
        proj_tot = np.einsum("ij,ik,kj->j", u, sigmas_tot[i], u)
        v_plus[i] = proj[:n_pairs]
        v_minus[i] = proj[n_pairs:]
        v_plus_tot[i] = proj_tot[:n_pairs]
        v_minus_tot[i] = proj_tot[n_pairs:]
        k = int(np.argmin(v_minus[i]))
        leading[i] = k
        eta_abs[i], phi[i] = _supermode_components(u[:, n_pairs + k], n_modes)
        sdef[i] = symplecticity_defect(embedded[i])

    def to_db(v):
        return 10.0 * np.log10(np.maximum(v, 1e-300) / VACUUM_VARIANCE)

    return SqueezingSpectrum(
        omega_grid=omega_grid,
        v_minus_db=to_db(v_minus),
        v_plus_db=to_db(v_plus),
        v_minus_total_db=to_db(v_minus_tot),
        v_plus_total_db=to_db(v_plus_tot),
        leading=leading,
        eta_abs=eta_abs,
        phi=phi,
        n_band=fm.n,
        bands=fm.bands,
        residuals=cont.residuals,
        imag_fraction=imag_frac,
        symplectic_defect=sdef,
    )


def squeezing_spectrum(
    bg: MultimodeBackground,
    omega_grid,
    params: ResonatorParams,
    check_stability: bool = True,
) -> SqueezingSpectrum:
    """Full two-band squeezing spectra over a Fourier-frequency grid."""
    fm = build_fluctuation_matrix(bg, params)
    return _analyze(fm, np.asarray(omega_grid, dtype=float), params,
                    check_stability=check_stability)


def band_restricted_analysis(
    bg: MultimodeBackground,
    band: str,
    omega_grid,
    params: ResonatorParams,
    check_stability: bool = True,
) -> SqueezingSpectrum:
    """Squeezing spectra with the complementary band's fluctuations frozen."""
    fm = restrict_fluctuation_matrix(bg, params, band)
    return _analyze(fm, np.asarray(omega_grid, dtype=float), params,
                    check_stability=check_stability)
