"""Analytical Bloch-Messiah decomposition of real quadrature transfer matrices.

Factors a real 2n x 2n matrix S (quadrature ordering x_1..x_n, y_1..y_n) as

    S = U D V^T,   U, V orthogonal symplectic,   D = diag(Xi, Xi^{-1}),

via the anchor chain

    S = P Y                          (polar, P sym. pos.-def., Y orthogonal)
    P = [[A, B], [B^T, C]]
    M = (A - C + i(B + B^T)) / 2     (complex symmetric)
    M = W Lam W^T                    (Takagi, through the SVD M = O Lam Q^+
                                      and W = O sqrt((O^T Q)^*))
    U = [[Re W, -Im W], [Im W, Re W]]
    Xi = Lam + sqrt(Lam^2 + 1),  D = diag(Xi, Xi^{-1}),  V^+ = U^T Y,

and continues the factors across a sampled family S(w) with first-order
generators: Q = U^T S' V partitioned into [[Q1, Q3], [Q2, Q4]],

    (H1)_ij = [(Q1)_ij D_jj + (Q1)_ji^* D_ii] / (D_jj^2 - D_ii^2)   (i != j)
    (K1)_ij = [(Q1)_ij D_ii + (Q1)_ji^* D_jj] / (D_jj^2 - D_ii^2)   (i != j)
    (H1)_ii = [(Q1)_ii - (Q1)_ii^*] / (2 D_ii),  (K1)_ii = 0
    Q2 = H2 Xi^{-1} - Xi K2,  Q3 = -H2 Xi + Xi^{-1} K2
    D'_ii = Re (Q1)_ii

    U(w+dw) = U(w) exp(H dw),  V(w+dw) = V(w) exp(K dw),
    H = [[H1, H2], [-H2, H1]],  K likewise.

For symplectic S the reconstruction is exact and D pairs reciprocally; for
non-symplectic (lossy) S the canonical pairing cannot reproduce S exactly,
so ``abmd_at_zero(strict=False)`` records the residual instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.linalg import polar as _scipy_polar

from .errors import DecompositionError, DegeneracyError

__all__ = [
    "BlochMessiahFactors",
    "GeneratorPair",
    "ContinuationResult",
    "symplectic_form",
    "symplecticity_defect",
    "random_symplectic",
    "polar_decompose",
    "takagi",
    "abmd_at_zero",
    "generators",
    "continue_decomposition",
]

#: Relative degeneracy tolerance on D entries (generator denominators).
DEGENERACY_RTOL = 1e-8
#: Relative reconstruction residual that triggers re-anchoring.
REANCHOR_RESIDUAL = 1e-6
#: Magnus step validity bound on ||H|| * dw.
MAGNUS_STEP_LIMIT = 0.05


def symplectic_form(n: int) -> np.ndarray:
    """Standard antisymmetric form Omega = [[0, I], [-I, 0]] for n modes."""
    omega = np.zeros((2 * n, 2 * n))
    omega[:n, n:] = np.eye(n)
    omega[n:, :n] = -np.eye(n)
    return omega


def symplecticity_defect(m: np.ndarray) -> float:
    """Frobenius-relative defect ||M Omega M^T - Omega|| / ||Omega||."""
    n = m.shape[0] // 2
    omega = symplectic_form(n)
    return float(np.linalg.norm(m @ omega @ m.T - omega) / np.linalg.norm(omega))


def random_symplectic(
    n: int, rng: np.random.Generator, scale: float = 1.0
) -> np.ndarray:
    """Random real symplectic 2n x 2n matrix, exp(Omega * Sym) with Sym ~ N(0, scale)."""
    sym = rng.normal(size=(2 * n, 2 * n)) * scale / math.sqrt(2 * n)
    sym = (sym + sym.T) / 2
    return expm(symplectic_form(n) @ sym)


@dataclass(frozen=True)
class BlochMessiahFactors:
    """One U D V^+ factorization; ``d`` holds the 2n diagonal entries."""

    u: np.ndarray
    d: np.ndarray
    v_dagger: np.ndarray
    omega: float = 0.0
    residual: float = 0.0

    @property
    def n(self) -> int:
        return self.d.size // 2

    @property
    def xi(self) -> np.ndarray:
        """First-half diagonal entries (the >= 1 squeezer factors)."""
        return self.d[: self.n]

    def reconstruct(self) -> np.ndarray:
        return self.u * self.d @ self.v_dagger

    def pairing_defect(self) -> float:
        """max |Xi_i * (Xi^{-1})_i - 1|; zero by construction at anchors."""
        return float(np.max(np.abs(self.d[: self.n] * self.d[self.n:] - 1.0)))


@dataclass(frozen=True)
class GeneratorPair:
    """First-order continuation generators at one frequency."""

    h: np.ndarray
    k: np.ndarray
    d_prime: np.ndarray  # derivative of all 2n diagonal entries


@dataclass
class ContinuationResult:
    """Factors along a frequency grid plus continuation diagnostics."""

    factors: list[BlochMessiahFactors]
    residuals: np.ndarray
    anchored: np.ndarray        # bool: True where a fresh anchor was taken
    min_overlap: np.ndarray     # min_k |<u_k(w), u_k(w+dw)>| per step

    def __post_init__(self) -> None:
        self.residuals = np.asarray(self.residuals, dtype=float)
        self.anchored = np.asarray(self.anchored, dtype=bool)
        self.min_overlap = np.asarray(self.min_overlap, dtype=float)


def polar_decompose(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left polar decomposition S = P Y, P symmetric positive-definite, Y orthogonal."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise DecompositionError("polar decomposition of non-finite matrix")
    y, p = _scipy_polar(s, side="left")
    # scipy returns s = p @ y with p only positive semi-definite; reject singular.
    smin = np.linalg.svd(s, compute_uv=False)[-1]
    if smin <= s.shape[0] * np.finfo(float).eps * np.linalg.norm(s, 2):
        raise DecompositionError("singular input: polar factor P not positive-definite")
    return p, y


def takagi(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Takagi (Autonne) decomposition M = W diag(Lam) W^T of a complex symmetric M.

    Returns (W, Lam) with W unitary and Lam the non-negative singular values
    of M in descending order. Column signs are fixed by making the
    largest-magnitude entry of each W column have positive real part
    (positive imaginary part when the real part is negligible).
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = np.linalg.norm(m)
    if scale > 0 and np.linalg.norm(m - m.T) > 1e-10 * scale:
        raise ValueError(
            f"matrix is not symmetric: ||M - M^T|| = {np.linalg.norm(m - m.T):.3e} "
            f"> 1e-10 * ||M||"
        )
    n = m.shape[0]
    if scale == 0.0:
        return np.eye(n, dtype=complex), np.zeros(n)
    o, lam, qh = np.linalg.svd(m)
    q = qh.conj().T
    w = o @ _principal_sqrt_unitary((o.T @ q).conj())
    # Sign convention: dominant entry of each column real-positive.
    idx = np.argmax(np.abs(w), axis=0)
    lead = w[idx, np.arange(n)]
    signs = np.where(
        np.abs(lead.real) > 1e-12 * np.abs(lead),
        np.sign(lead.real),
        np.sign(lead.imag + (lead.imag == 0)),
    )
    return w * signs, lam


def _principal_sqrt_unitary(c: np.ndarray) -> np.ndarray:
    """Principal square root of a (near-)unitary matrix via eigendecomposition.

    Eigenvalues lying within 1e-12 of the negative real axis get a fixed
    +1e-10 phase rotation before the root so the branch choice is
    deterministic.
    """
    w, v = np.linalg.eig(c)
    near_cut = (w.real < 0) & (np.abs(w.imag) < 1e-12 * np.abs(w))
    if np.any(near_cut):
        w = np.where(near_cut, w * np.exp(1j * 1e-10), w)
    sqrt_w = np.sqrt(w.astype(complex))
    return v * sqrt_w @ np.linalg.inv(v)


def abmd_at_zero(
    s0: np.ndarray, omega: float = 0.0, strict: bool = True,
    residual_tol: float = 1e-8,
) -> BlochMessiahFactors:
    """Anchor factorization S = U D V^+ of a real invertible matrix.

    For symplectic inputs the reconstruction is exact (residual at rounding
    level). Non-symplectic inputs cannot satisfy D = diag(Xi, Xi^{-1})
    exactly; with ``strict`` the residual tolerance raises
    DecompositionError, otherwise the residual is recorded on the factors.
    """
    s0 = np.asarray(s0, dtype=float)
    if s0.ndim != 2 or s0.shape[0] % 2:
        raise ValueError(f"expected a real 2n x 2n matrix, got shape {s0.shape}")
    n = s0.shape[0] // 2
    p, y = polar_decompose(s0)
    a = p[:n, :n]
    b = p[:n, n:]
    c = p[n:, n:]
    m = 0.5 * (a - c + 1j * (b + b.T))
    m = 0.5 * (m + m.T)  # kill rounding asymmetry
    w, lam = takagi(m)
    u = np.block([[w.real, -w.imag], [w.imag, w.real]])
    xi = lam + np.sqrt(lam**2 + 1.0)
    d = np.concatenate([xi, 1.0 / xi])
    v_dagger = u.T @ y
    recon = (u * d) @ v_dagger
    residual = float(np.linalg.norm(recon - s0) / np.linalg.norm(s0))
    if strict and residual > residual_tol:
        raise DecompositionError(
            f"reconstruction residual {residual:.3e} > {residual_tol:.1e}; "
            f"input symplecticity defect {symplecticity_defect(s0):.3e}"
        )
    return BlochMessiahFactors(u=u, d=d, v_dagger=v_dagger, omega=omega,
                               residual=residual)


def generators(
    factors: BlochMessiahFactors, s_prime: np.ndarray
) -> GeneratorPair:
    """Continuation generators (H, K, D') from the local derivative S'(w).

    Solves Q = U^T S' V = H D + D' - D K blockwise for the structured
    generators. Raises DegeneracyError when two D entries coincide within
    DEGENERACY_RTOL * max(D)^2 or a squeezer pair sits at Xi_i * Xi_j = 1
    (both make the linear systems singular); callers should re-anchor.
    """
    n = factors.n
    u = factors.u
    v = factors.v_dagger.conj().T
    d = factors.d
    q = u.conj().T @ np.asarray(s_prime) @ v
    q1 = q[:n, :n]
    q_tr = q[:n, n:]
    q_bl = q[n:, :n]
    xi = d[:n]

    gap = np.abs(xi[:, None] ** 2 - xi[None, :] ** 2)
    eps = DEGENERACY_RTOL * float(np.max(d)) ** 2
    off = ~np.eye(n, dtype=bool)
    if np.any(gap[off] < eps):
        i, j = np.argwhere((gap < eps) & off)[0]
        raise DegeneracyError(
            f"degenerate singular values D[{i}]={xi[i]:.6g}, D[{j}]={xi[j]:.6g}: "
            f"re-anchor instead of continuing"
        )

    denom = xi[None, :] ** 2 - xi[:, None] ** 2
    np.fill_diagonal(denom, 1.0)
    h1 = (q1 * xi[None, :] + q1.conj().T * xi[:, None]) / denom
    k1 = (q1 * xi[:, None] + q1.conj().T * xi[None, :]) / denom
    diag_h = (np.diag(q1) - np.diag(q1).conj()) / (2 * xi)
    np.fill_diagonal(h1, diag_h)
    np.fill_diagonal(k1, 0.0)

    # Entrywise 2x2 systems for the off-diagonal blocks of Q = HD + D' - DK:
    #   Q[:n, n:] = H2 Xi^{-1} - Xi K2,   Q[n:, :n] = -H2 Xi + Xi^{-1} K2.
    xi_col = xi[:, None]
    xi_row = xi[None, :]
    det = 1.0 / (xi_row * xi_col) - xi_row * xi_col
    if np.any(np.abs(det) < eps):
        i, j = np.argwhere(np.abs(det) < eps)[0]
        raise DegeneracyError(
            f"squeezer pair Xi[{i}]*Xi[{j}] = {xi[i]*xi[j]:.6g} ~ 1: "
            f"H2/K2 system singular, re-anchor instead of continuing"
        )
    h2 = (q_tr / xi_col + q_bl * xi_col) / det
    k2 = (q_tr * xi_row + q_bl / xi_row) / det

    # Project onto the structure (skew-Hermitian H1/K1, symmetric H2/K2):
    # a no-op for consistent data, stabilizing against rounding otherwise.
    h1 = (h1 - h1.conj().T) / 2
    k1 = (k1 - k1.conj().T) / 2
    h2 = (h2 + h2.T) / 2
    k2 = (k2 + k2.T) / 2

    h = np.block([[h1, h2], [-h2, h1]])
    k = np.block([[k1, k2], [-k2, k1]])
    if np.isrealobj(q):
        h = h.real
        k = k.real
    d_prime_xi = np.real(np.diag(q1))
    d_prime = np.concatenate([d_prime_xi, -d_prime_xi / xi**2])
    return GeneratorPair(h=h, k=k, d_prime=d_prime)


def _align_to(prev: BlochMessiahFactors, new: BlochMessiahFactors) -> BlochMessiahFactors:
    """Permute/flip the factor pairs of ``new`` to maximize overlap with ``prev``.

    Pairs (column k, column k+n) move together so the diag(Xi, Xi^{-1})
    structure and U's orthogonal-symplectic block form are preserved.
    """
    from scipy.optimize import linear_sum_assignment

    n = new.n
    up, un = prev.u, new.u
    pair_overlap = np.abs(up[:, :n].T @ un[:, :n]) + np.abs(up[:, n:].T @ un[:, n:])
    rows, cols = linear_sum_assignment(-pair_overlap)
    perm = cols[np.argsort(rows)]

    u2 = np.concatenate([un[:, perm], un[:, perm + n]], axis=1)
    vd = new.v_dagger
    vd2 = np.concatenate([vd[perm, :], vd[perm + n, :]], axis=0)
    d2 = np.concatenate([new.d[:n][perm], new.d[n:][perm]])

    signs = np.sign(
        np.einsum("ij,ij->j", up[:, :n], u2[:, :n])
        + np.einsum("ij,ij->j", up[:, n:], u2[:, n:])
    )
    signs[signs == 0] = 1.0
    full = np.concatenate([signs, signs])
    u2 = u2 * full[None, :]
    vd2 = vd2 * full[:, None]
    return BlochMessiahFactors(u=u2, d=d2, v_dagger=vd2, omega=new.omega,
                               residual=new.residual)


def continue_decomposition(
    s_of_omega,
    omega_grid,
    *,
    reanchor_tol: float = REANCHOR_RESIDUAL,
    strict: bool = True,
    anchor_tol: float = 1e-8,
) -> ContinuationResult:
    """Factor a sampled matrix family S(w) smoothly along a sorted grid.

    Each step first tries the Magnus update Uexp(H dw), V exp(K dw) with a
    finite-difference S'; whenever the generator system is degenerate, the
    step exceeds MAGNUS_STEP_LIMIT, or the reconstruction residual exceeds
    ``reanchor_tol``, the point is re-anchored with a fresh factorization
    aligned (pair order and signs) to the previous point.

    ``strict=False`` lets non-symplectic (lossy) families through with the
    residual recorded per point instead of raising.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    samples = [np.asarray(s, dtype=float) for s in s_of_omega]
    if len(samples) != omega_grid.size:
        raise ValueError(
            f"{len(samples)} samples for {omega_grid.size} grid points"
        )
    if omega_grid.size == 0:
        return ContinuationResult([], np.empty(0), np.empty(0, bool), np.empty(0))
    if np.any(np.diff(omega_grid) <= 0):
        raise ValueError("omega grid must be strictly increasing")

    factors: list[BlochMessiahFactors] = []
    residuals: list[float] = []
    anchored: list[bool] = []
    overlaps: list[float] = []

    f = abmd_at_zero(samples[0], omega=float(omega_grid[0]), strict=strict,
                     residual_tol=anchor_tol)
    factors.append(f)
    residuals.append(f.residual)
    anchored.append(True)
    overlaps.append(1.0)

    for k in range(1, omega_grid.size):
        dw = float(omega_grid[k] - omega_grid[k - 1])
        s_now = samples[k]
        prev = factors[-1]
        trial: BlochMessiahFactors | None = None
        try:
            s_prime = (s_now - samples[k - 1]) / dw
            gen = generators(prev, s_prime)
            if np.linalg.norm(gen.h, 2) * abs(dw) <= MAGNUS_STEP_LIMIT:
                u_new = prev.u @ expm(gen.h * dw)
                vd_new = expm(gen.k * dw).T @ prev.v_dagger
                n = prev.n
                xi_new = prev.xi + gen.d_prime[:n] * dw
                if np.all(xi_new > 0):
                    d_new = np.concatenate([xi_new, 1.0 / xi_new])
                    recon = (u_new * d_new) @ vd_new
                    res = float(np.linalg.norm(recon - s_now) / np.linalg.norm(s_now))
                    trial = BlochMessiahFactors(
                        u=u_new, d=d_new, v_dagger=vd_new,
                        omega=float(omega_grid[k]), residual=res,
                    )
        except DegeneracyError:
            trial = None

        if trial is not None and trial.residual <= reanchor_tol:
            factors.append(trial)
            anchored.append(False)
        else:
            fresh = abmd_at_zero(s_now, omega=float(omega_grid[k]), strict=strict,
                                 residual_tol=anchor_tol)
            factors.append(_align_to(prev, fresh))
            anchored.append(True)
        residuals.append(factors[-1].residual)
        overlaps.append(float(np.min(np.abs(
            np.einsum("ij,ij->j", prev.u, factors[-1].u)
        ))))

    return ContinuationResult(
        factors=factors,
        residuals=np.asarray(residuals),
        anchored=np.asarray(anchored, dtype=bool),
        min_overlap=np.asarray(overlaps),
    )
