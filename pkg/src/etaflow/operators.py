"""Builders for the model Dirac-type operators.

The boundary geometry is replaced by a finite-dimensional graded pair:
a Hermitian matrix A anticommuting with a grading gamma, with Clifford
element c = i*gamma in the grading eigenbasis, acting on C^m (tensored
with a coefficient factor C^n).  Every operator here is produced as an
explicitly Hermitian dense matrix together with a provenance record.

Circle operators live in a truncated Fourier-mode basis where the free
Dirac operator is block diagonal and functions act by block convolution.
Interval operators with projection boundary conditions are realised by a
Legendre-Galerkin restriction: the full operator form is assembled on a
polynomial basis and conjugated onto an orthonormal basis of the
boundary-condition subspace, which preserves Hermitian structure exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .fields import GridFunction
from .ktheory import BumpProfile, loop_unitary_samples

__all__ = [
    "AliasingError",
    "BoundaryConditionError",
    "ModelBoundary",
    "BoundaryProjection",
    "DiscreteOperator",
    "make_model",
    "random_model",
    "random_block_scalar_unitary",
    "standard_lagrangian",
    "boundary_projection_Ppartial",
    "build_Pt",
    "build_circle_dirac",
    "shifted_circle_dirac",
    "mode_multiplication_matrix",
    "spectral_projection_basis",
    "compress",
    "cup_compressed_circle",
    "build_interval_dirac",
    "interval_potential",
    "twisted_interval_spectral",
    "conjugation_check",
    "mu_symmetry_check",
    "transfer_matrix_eigenvalues",
    "hermitian_abs",
]


class AliasingError(RuntimeError):
    """Discrete projection spectrum is not clustered near {0, 1}."""


class BoundaryConditionError(ValueError):
    """Boundary projection incompatible with a self-adjoint realisation."""


# --------------------------------------------------------------------------
# boundary model


@dataclass(frozen=True)
class ModelBoundary:
    """Finite-dimensional stand-in for a boundary Dirac operator.

    In the grading eigenbasis gamma = diag(I, -I) on C^m, the boundary
    operator is A = [[0, B], [B*, 0]] and the normal Clifford element is
    c = i*gamma.  An optional Lagrangian subspace L of ker A (orthonormal
    columns) augments the positive spectral projection when A is singular.
    Coefficient unitaries act on C^m (x) C^n and are block scalar with
    respect to the grading, so they commute with c.
    """

    m: int
    n: int
    block: np.ndarray
    lagrangian: np.ndarray | None = None

    def __post_init__(self):
        if self.m % 2 or self.m < 2:
            raise ValueError("boundary spinor dimension m must be even")
        if self.block.shape != (self.m // 2, self.m // 2):
            raise ValueError("block must be (m/2) x (m/2)")

    @property
    def dim(self) -> int:
        """Dimension m*n of the coefficient-extended boundary space."""
        return self.m * self.n

    @property
    def a_matrix(self) -> np.ndarray:
        h = self.m // 2
        a = np.zeros((self.m, self.m), dtype=complex)
        a[:h, h:] = self.block
        a[h:, :h] = self.block.conj().T
        return a

    @property
    def gamma(self) -> np.ndarray:
        h = self.m // 2
        return np.diag(np.concatenate([np.ones(h), -np.ones(h)])).astype(complex)

    @property
    def clifford(self) -> np.ndarray:
        return 1j * self.gamma

    # coefficient-extended versions on C^m (x) C^n
    @property
    def a_coeff(self) -> np.ndarray:
        return np.kron(self.a_matrix, np.eye(self.n))

    @property
    def gamma_coeff(self) -> np.ndarray:
        return np.kron(self.gamma, np.eye(self.n))

    @property
    def clifford_coeff(self) -> np.ndarray:
        return 1j * self.gamma_coeff


def make_model(block: np.ndarray, n: int = 1,
               lagrangian: np.ndarray | None = None) -> ModelBoundary:
    block = np.asarray(block, dtype=complex)
    model = ModelBoundary(2 * block.shape[0], n, block, lagrangian)
    _validate_model(model)
    return model


def _validate_model(model: ModelBoundary) -> None:
    a, g = model.a_matrix, model.gamma
    if np.max(np.abs(g @ a + a @ g)) > 1e-12:
        raise ValueError("grading does not anticommute with A")
    if model.lagrangian is not None:
        L = np.atleast_2d(model.lagrangian)
        if L.shape[0] != model.m:
            raise ValueError("Lagrangian columns must live in C^m")
        if np.max(np.abs(L.conj().T @ L - np.eye(L.shape[1]))) > 1e-10:
            raise ValueError("Lagrangian basis is not orthonormal")
        if np.max(np.abs(a @ L)) > 1e-10:
            raise ValueError("Lagrangian is not contained in ker A")
        cL = model.clifford @ L
        if np.max(np.abs(L.conj().T @ cL)) > 1e-10:
            raise ValueError("c(L) is not orthogonal to L")


def random_model(rng: np.random.Generator, m: int = 2, n: int = 1,
                 scale: float = 2.0) -> ModelBoundary:
    """Seeded random boundary model with invertible A."""
    h = m // 2
    while True:
        b = scale * (rng.standard_normal((h, h)) + 1j * rng.standard_normal((h, h)))
        if np.min(np.linalg.svd(b, compute_uv=False)) > 0.2 * scale:
            return make_model(b, n)


def random_block_scalar_unitary(rng: np.random.Generator, model: ModelBoundary,
                                amplitude: float = 1.0) -> np.ndarray:
    """exp(i H) with H Hermitian on the half-spinor (x) coefficient factor,
    lifted block-scalar to C^m (x) C^n (so it commutes with the Clifford
    element and the grading)."""
    q = (model.m // 2) * model.n
    h = rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))
    h = amplitude * (h + h.conj().T) / 2
    w, v = np.linalg.eigh(h)
    utilde = v @ np.diag(np.exp(1j * w)) @ v.conj().T
    return np.kron(np.eye(2), utilde)


def standard_lagrangian(model: ModelBoundary) -> np.ndarray:
    """A Lagrangian subspace of ker A built from grading-balanced pairs."""
    a = model.a_matrix
    w, v = np.linalg.eigh(a)
    ker = v[:, np.abs(w) < 1e-10]
    if ker.shape[1] == 0:
        raise ValueError("A is invertible; no Lagrangian needed")
    g = model.gamma
    gk = ker.conj().T @ g @ ker
    wk, vk = np.linalg.eigh(gk)
    plus = ker @ vk[:, wk > 0.5]
    minus = ker @ vk[:, wk < -0.5]
    if plus.shape[1] != minus.shape[1]:
        raise ValueError("kernel is not grading balanced")
    L = (plus + minus) / np.sqrt(2.0)
    q, _ = np.linalg.qr(L)
    return q[:, :L.shape[1]]


# --------------------------------------------------------------------------
# boundary projections


@dataclass(frozen=True)
class BoundaryProjection:
    """Orthogonal projection on the two-copy boundary space C^(mn) + C^(mn)."""

    matrix: np.ndarray
    t: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.matrix
        if np.max(np.abs(p @ p - p)) > 1e-12 or np.max(np.abs(p - p.conj().T)) > 1e-12:
            raise BoundaryConditionError("matrix is not an orthogonal projection")


def boundary_projection_Ppartial(model: ModelBoundary) -> np.ndarray:
    """Positive spectral projection of A (x) I_n, plus the Lagrangian piece
    of the kernel when A is singular."""
    a = model.a_coeff
    w, v = np.linalg.eigh(a)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(w))))
    pos = v[:, w > tol]
    p = pos @ pos.conj().T
    kernel_dim = int(np.sum(np.abs(w) <= tol))
    if kernel_dim:
        if model.lagrangian is None:
            raise ValueError("A has a kernel; a Lagrangian subspace is required")
        L = np.kron(model.lagrangian, np.eye(model.n))
        p = p + L @ L.conj().T
    return p


def _check_unitary_compatible(model: ModelBoundary, u: np.ndarray) -> None:
    d = model.dim
    if u.shape != (d, d):
        raise ValueError(f"unitary must be {d} x {d}")
    if np.max(np.abs(u @ u.conj().T - np.eye(d))) > 1e-10:
        raise ValueError("u is not unitary")
    c = model.clifford_coeff
    if np.max(np.abs(c @ u - u @ c)) > 1e-10:
        raise ValueError("u must commute with the Clifford element "
                         "(block scalar on the grading factor)")


def build_Pt(model: ModelBoundary, u: np.ndarray, t: float,
             p_partial: np.ndarray | None = None) -> BoundaryProjection:
    """Boundary-condition path: diag APS data at t = 0 rotating into the
    transmission condition at t = pi/4."""
    _check_unitary_compatible(model, u)
    if not -1e-12 <= t <= np.pi / 4 + 1e-12:
        raise ValueError("t must lie in [0, pi/4]")
    p = boundary_projection_Ppartial(model) if p_partial is None else p_partial
    d = model.dim
    ui = u.conj().T
    ct, st = np.cos(t), np.sin(t)
    top_left = ct**2 * p + st**2 * (np.eye(d) - p)
    bot_right = ct**2 * (np.eye(d) - ui @ p @ u) + st**2 * (ui @ p @ u)
    off = -ct * st * u
    mat = np.block([[top_left, off], [off.conj().T, bot_right]])
    bp = BoundaryProjection(mat, float(t), {"builder": "build_Pt", "t": float(t)})
    _check_bc_selfadjoint(model, bp)
    return bp


def _check_bc_selfadjoint(model: ModelBoundary, bc: BoundaryProjection) -> None:
    """The kernel of the projection must be isotropic for the boundary form
    diag(-c, c); otherwise the realisation cannot be self-adjoint."""
    d = model.dim
    c = model.clifford_coeff
    g = np.block([[-c, np.zeros_like(c)], [np.zeros_like(c), c]])
    q = np.eye(2 * d) - bc.matrix
    resid = float(np.max(np.abs(q @ g @ q)))
    rank = int(round(float(np.real(np.trace(bc.matrix)))))
    if rank != d or resid > 1e-10:
        raise BoundaryConditionError(
            f"boundary projection rank {rank} (want {d}), isotropy defect {resid:.2e}")


# --------------------------------------------------------------------------
# discrete operators


@dataclass(frozen=True)
class DiscreteOperator:
    """Dense Hermitian matrix with basis metadata and provenance."""

    matrix: np.ndarray
    basis: dict
    provenance: dict = field(default_factory=dict)
    restriction: np.ndarray | None = None

    def __post_init__(self):
        h = self.matrix
        defect = float(np.max(np.abs(h - h.conj().T)))
        if defect > 1e-12 * max(1.0, float(np.max(np.abs(h)))):
            raise ValueError(f"operator is not Hermitian (defect {defect:.2e})")
        object.__setattr__(self, "matrix", (h + h.conj().T) / 2)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def shifted_circle_dirac(b: float, cutoff: int, coeff_dim: int = 1) -> DiscreteOperator:
    """Scalar circle operator with spectrum 2*pi*(k + b), |k| <= cutoff.

    Phase convention: the shift enters with a plus sign so that the spectral
    asymmetry equals 1 - 2b for 0 < b < 1 (Hurwitz zeta oracle).
    """
    ks = np.arange(-cutoff, cutoff + 1)
    diag = np.repeat(2 * np.pi * (ks + b), coeff_dim)
    return DiscreteOperator(
        np.diag(diag.astype(complex)),
        {"type": "fourier_modes", "cutoff": cutoff, "torus_dim": 1,
         "internal_dim": coeff_dim},
        {"builder": "shifted_circle_dirac", "b": b, "cutoff": cutoff},
    )


def build_circle_dirac(model: ModelBoundary, cutoff: int,
                       outer_dim: int = 1) -> DiscreteOperator:
    """Product operator c(d/dtheta)(d/dtheta + A) in Fourier modes.

    Block diagonal over modes k with blocks c(2*pi*i*k + A) on C^(mn),
    optionally tensored by an inert outer factor (for cup compressions,
    where the projection doubles the coefficient space)."""
    c, a = model.clifford_coeff, model.a_coeff
    d = model.dim
    ks = np.arange(-cutoff, cutoff + 1)
    blocks = []
    for k in ks:
        blk = c @ (2j * np.pi * k * np.eye(d) + a)
        blocks.append(np.kron(np.eye(outer_dim), blk))
    mat = scipy.linalg.block_diag(*blocks)
    return DiscreteOperator(
        mat,
        {"type": "fourier_modes", "cutoff": cutoff, "torus_dim": 1,
         "internal_dim": outer_dim * d},
        {"builder": "build_circle_dirac", "m": model.m, "n": model.n,
         "cutoff": cutoff, "outer_dim": outer_dim},
    )


def _normalize_cutoffs(cutoff: int | Sequence[int], torus_dim: int) -> tuple[int, ...]:
    if np.isscalar(cutoff):
        return (int(cutoff),) * torus_dim
    cut = tuple(int(c) for c in cutoff)
    if len(cut) != torus_dim:
        raise ValueError(f"expected {torus_dim} cutoffs, got {cut}")
    return cut


def _mode_lattice(cutoff: int | Sequence[int], torus_dim: int) -> np.ndarray:
    cut = _normalize_cutoffs(cutoff, torus_dim)
    ranges = [np.arange(-c, c + 1) for c in cut]
    return np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, torus_dim)


def mode_multiplication_matrix(fn: GridFunction,
                               cutoff: int | Sequence[int]) -> np.ndarray:
    """Matrix of pointwise multiplication by fn on Fourier modes |k_i| <= cutoff_i.

    Entries are Fourier coefficients fn_hat(k - k'); the sampling grid must
    be fine enough that no needed coefficient is aliased."""
    dims = fn.dims
    cut = _normalize_cutoffs(cutoff, len(dims))
    for n, c in zip(dims, cut):
        if n < 4 * c + 2:
            raise AliasingError(f"grid {dims} too coarse for mode cutoff {cut}")
    mu = fn.matrix_dim
    axes = tuple(range(len(dims)))
    coeffs = np.fft.fftn(fn.values, axes=axes) / np.prod(dims)
    lattice = _mode_lattice(cut, len(dims))
    nmodes = lattice.shape[0]
    out = np.empty((nmodes, mu, nmodes, mu), dtype=complex)
    for a in range(nmodes):
        diff = lattice[a][None, :] - lattice          # (nmodes, d)
        idx = tuple(np.mod(diff[:, ax], dims[ax]) for ax in range(len(dims)))
        out[a] = np.moveaxis(coeffs[idx], 0, 1)       # (mu, nmodes, mu)
    return out.reshape(nmodes * mu, nmodes * mu)


def spectral_projection_basis(p_h: np.ndarray,
                              window: tuple[float, float] = (0.1, 0.9),
                              max_mid_fraction: float = 0.05) -> np.ndarray:
    """Orthonormal basis of the rounded range of an approximate projection.

    A truncated multiplication operator by a smooth projection has all but
    a cutoff-edge handful of eigenvalues exponentially close to {0, 1}; the
    edge modes are rounded at 1/2.  If more than max_mid_fraction of the
    spectrum falls inside the window the symbol is under-resolved and the
    compression aborts."""
    w, v = np.linalg.eigh((p_h + p_h.conj().T) / 2)
    lo, hi = window
    bad = int(np.sum((w > lo) & (w < hi)))
    if bad > max_mid_fraction * len(w):
        raise AliasingError(
            f"{bad}/{len(w)} projector eigenvalues inside ({lo}, {hi}); "
            "refine the grid")
    return v[:, w >= 0.5]


def compress(op: DiscreteOperator, p: GridFunction,
             window: tuple[float, float] = (0.1, 0.9)) -> DiscreteOperator:
    """Restrict an operator to the numerical range of a projection symbol.

    The projection is assembled as a Fourier-convolution multiplication
    matrix in the operator's mode basis, its spectrum is rounded to {0, 1}
    (eigenvalues inside the window abort), and the operator is conjugated
    onto the rounded range."""
    if op.basis.get("type") != "fourier_modes":
        raise ValueError("compress expects an operator in a Fourier-mode basis")
    if p.matrix_dim != op.basis["internal_dim"]:
        raise ValueError(f"projection matrix dim {p.matrix_dim} does not match "
                         f"operator internal dim {op.basis['internal_dim']}")
    p_h = mode_multiplication_matrix(p, op.basis["cutoff"])
    w = spectral_projection_basis(p_h, window)
    mat = w.conj().T @ op.matrix @ w
    return DiscreteOperator(
        mat,
        {"type": "compressed", "parent": op.basis, "rank": w.shape[1]},
        {"builder": "compress", "parent": op.provenance},
        restriction=w,
    )


def cup_compressed_circle(model: ModelBoundary, u: np.ndarray,
                          profile: BumpProfile, cutoff: int) -> DiscreteOperator:
    """Compression of the product circle operator by the cup projection of u."""
    from .ktheory import cup_with_bott

    _check_unitary_compatible(model, u)
    ambient = build_circle_dirac(model, cutoff, outer_dim=2)
    e_u = cup_with_bott(u, profile)
    out = compress(ambient, e_u)
    out.provenance.update({"builder": "cup_compressed_circle",
                           "cutoff": cutoff, "n_theta": profile.n_theta})
    return out


# --------------------------------------------------------------------------
# interval operator (Legendre-Galerkin with boundary restriction)


def interval_potential(model: ModelBoundary, u: np.ndarray, profile: BumpProfile,
                       t: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """x -> A + (1 - t*psi(x)) (u^-1 A u - A), the deformed boundary term."""
    a = model.a_coeff
    au = u.conj().T @ a @ u
    diff = au - a

    def a_psi(x: np.ndarray) -> np.ndarray:
        w = 1.0 - t * profile.psi_at(x)
        return a[None, :, :] + w[:, None, None] * diff[None, :, :]

    return a_psi


def _legendre_basis(p: int, x: np.ndarray) -> np.ndarray:
    """Values of orthonormal shifted Legendre polynomials at points in [0,1]."""
    v = np.polynomial.legendre.legvander(2.0 * x - 1.0, p)
    norms = np.sqrt(2.0 * np.arange(p + 1) + 1.0)
    return v * norms[None, :]


def _legendre_derivative_gram(p: int) -> np.ndarray:
    """Exact matrix of integral P~_i (P~_j)' over [0,1] (orthonormal shifted)."""
    g = np.zeros((p + 1, p + 1))
    for i in range(p + 1):
        for j in range(p + 1):
            if j > i and (i + j) % 2 == 1:
                g[i, j] = 2.0 * np.sqrt((2 * i + 1) * (2 * j + 1))
    return g


def build_interval_dirac(model: ModelBoundary, u: np.ndarray, profile: BumpProfile,
                         t: float, bc: BoundaryProjection, n_basis: int = 96,
                         n_quad: int | None = None) -> DiscreteOperator:
    """Interval Dirac operator with a projection boundary condition.

    The sesquilinear form of c(d/dx + A_psi(x)) is assembled on orthonormal
    Legendre polynomials (the derivative part exactly, the potential by
    Gauss quadrature, which preserves Hermitian symmetry), then conjugated
    onto an orthonormal basis of the boundary-condition subspace.  On that
    subspace integration by parts has no boundary term, so the restricted
    matrix is Hermitian to rounding.
    """
    _check_unitary_compatible(model, u)
    d = model.dim
    p = n_basis
    nq = n_quad or (p + 12)
    nodes, weights = np.polynomial.legendre.leggauss(nq)
    x = (nodes + 1.0) / 2.0
    w = weights / 2.0
    c = model.clifford_coeff

    vals = _legendre_basis(p, x)                       # (nq, p+1)
    a_psi = interval_potential(model, u, profile, t)(x)    # (nq, d, d)
    kin = np.kron(_legendre_derivative_gram(p), c)
    pot = np.einsum("q,qi,qj,qab->iajb", w, vals, vals,
                    np.einsum("ab,qbc->qac", c, a_psi), optimize=True)
    k_full = kin + pot.reshape((p + 1) * d, (p + 1) * d)

    e0 = np.kron(_legendre_basis(p, np.array([0.0]))[0], np.eye(d))
    e1 = np.kron(_legendre_basis(p, np.array([1.0]))[0], np.eye(d))
    constraints = bc.matrix @ np.vstack([e0, e1])
    z = scipy.linalg.null_space(constraints, rcond=1e-12)
    h = z.conj().T @ k_full @ z
    defect = float(np.max(np.abs(h - h.conj().T)))
    if defect > 1e-10:
        raise BoundaryConditionError(
            f"restricted operator not Hermitian (defect {defect:.2e}); "
            "boundary projection incompatible")
    return DiscreteOperator(
        (h + h.conj().T) / 2,
        {"type": "legendre_interval", "n_basis": p, "dim_internal": d},
        {"builder": "build_interval_dirac", "m": model.m, "n": model.n,
         "t": float(t), "bc_t": bc.t, "n_basis": p, "n_quad": nq},
        restriction=z,
    )


# --------------------------------------------------------------------------
# twisted spectral realisation and the conjugation check


def _principal_log_unitary(u: np.ndarray) -> np.ndarray:
    """Hermitian Theta with u = exp(i Theta), eigenphases in (-pi, pi]."""
    w, v = np.linalg.eig(u)
    phases = np.angle(w)
    theta = v @ np.diag(phases) @ np.linalg.inv(v)
    return (theta + theta.conj().T) / 2


def _grid_derivative_matrix(n: int) -> np.ndarray:
    """Dense spectral d/dx on the periodic n-grid (Nyquist zeroed)."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    f = np.fft.fft(np.eye(n), axis=0)
    return np.fft.ifft(f * (2j * np.pi * k)[:, None], axis=0)


def twisted_interval_spectral(model: ModelBoundary, u: np.ndarray,
                              profile: BumpProfile, n_grid: int,
                              t: float = 1.0,
                              band_limit: int | None = None) -> np.ndarray:
    """Matrix of the deformed interval operator under the transmission
    condition beta(0) = u beta(1), in sample coordinates on the n-grid.

    Realised by untwisting with exp(-i x Theta), u = exp(i Theta), applying
    the periodic spectral derivative, and twisting back.  With band_limit
    set, the operator is restricted to twisted modes |k| <= band_limit,
    which removes the spurious Nyquist states of the sampled derivative
    (their derivative is zeroed, so they sit at potential scale)."""
    _check_unitary_compatible(model, u)
    d = model.dim
    c = model.clifford_coeff
    theta_m = _principal_log_unitary(u)
    x = np.arange(n_grid) / n_grid
    dmat = _grid_derivative_matrix(n_grid)
    a_psi = interval_potential(model, u, profile, t)(x)

    phases = [scipy.linalg.expm(1j * xi * theta_m) for xi in x]
    conj_pot = np.stack([ph @ a @ ph.conj().T for ph, a in zip(phases, a_psi)])

    m_per = np.kron(dmat, c) + np.kron(np.eye(n_grid), c @ (-1j * theta_m))
    for j in range(n_grid):
        m_per[j * d:(j + 1) * d, j * d:(j + 1) * d] += c @ conj_pot[j]
    g = scipy.linalg.block_diag(*[ph.conj().T for ph in phases])   # e^{-i x Theta}
    full = g @ m_per @ g.conj().T
    if band_limit is None:
        return full
    k = np.fft.fftfreq(n_grid, d=1.0 / n_grid)
    keep = np.abs(k) <= band_limit
    f = (np.fft.fft(np.eye(n_grid), axis=0) / np.sqrt(n_grid))[keep].conj().T
    basis = g @ np.kron(f, np.eye(d))
    return basis.conj().T @ full @ basis


def conjugation_check(model: ModelBoundary, u: np.ndarray, profile: BumpProfile,
                      n_theta: int | None = None,
                      band_fraction: float = 1.0 / 3.0) -> float:
    """Operator-norm residual of the loop-unitary conjugation identity.

    The circle operator is compressed by the cup projection through the
    sampled loop unitary (exact on the grid), which lands in the sample
    coordinates of the twisted interval realisation; both sides then live
    on the same space.  The difference is measured after band-limiting to
    |k| <= band_fraction * n (in the untwisted gauge): at unresolved
    frequencies both discretisations alias by design, so the raw norm
    would only measure grid noise."""
    _check_unitary_compatible(model, u)
    n = n_theta or profile.n_theta
    if n != profile.n_theta:
        raise ValueError("n_theta must match the profile grid")
    d = model.dim
    c = model.clifford_coeff
    dmat = _grid_derivative_matrix(n)
    d_circ = np.kron(dmat, np.kron(np.eye(2), c)) \
        + np.kron(np.eye(n), np.kron(np.eye(2), c @ model.a_coeff))
    loop = loop_unitary_samples(u, profile)            # (n, 2d, 2d)
    big_u = scipy.linalg.block_diag(*loop)
    conj = big_u.conj().T @ d_circ @ big_u
    # first cup block of each grid site
    sel = np.concatenate([np.arange(j * 2 * d, j * 2 * d + d) for j in range(n)])
    lhs = conj[np.ix_(sel, sel)]
    rhs = twisted_interval_spectral(model, u, profile, n, t=1.0)

    k = np.fft.fftfreq(n, d=1.0 / n)
    keep = np.abs(k) <= band_fraction * n
    f = np.fft.fft(np.eye(n), axis=0) / np.sqrt(n)
    band = f.conj().T @ np.diag(keep.astype(float)) @ f
    theta_m = _principal_log_unitary(u)
    g = scipy.linalg.block_diag(*[scipy.linalg.expm(-1j * xi * theta_m)
                                  for xi in np.arange(n) / n])
    proj = g @ np.kron(band, np.eye(d)) @ g.conj().T
    return float(np.linalg.norm(proj @ (lhs - rhs) @ proj, 2))


# --------------------------------------------------------------------------
# symmetry checks for the boundary-condition path


def hermitian_abs(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    return v @ np.diag(np.abs(w)) @ v.conj().T


def mu_symmetry_check(model: ModelBoundary, u: np.ndarray,
                      t_values: Sequence[float] = (0.0, 0.2, np.pi / 8, np.pi / 4),
                      ) -> dict[str, float]:
    """Residuals of the algebraic identities behind the constancy of the
    spectral asymmetry along the boundary-condition path."""
    _check_unitary_compatible(model, u)
    d = model.dim
    a = model.a_coeff
    c = model.clifford_coeff
    ui = u.conj().T
    zero = np.zeros((d, d), dtype=complex)
    tau = np.block([[zero, u], [ui, zero]])
    mu = np.block([[zero, u], [-ui, zero]])
    gamma_t = np.block([[c, zero], [zero, -c]])
    a_t = np.block([[a, zero], [zero, -ui @ a @ u]])
    eye2 = np.eye(2 * d)

    def mx(x):
        return float(np.max(np.abs(x)))

    out = {
        "mu_squared_plus_id": mx(mu @ mu + eye2),
        "mu_tau_anticommute": mx(mu @ tau + tau @ mu),
        "mu_gamma_anticommute": mx(mu @ gamma_t + gamma_t @ mu),
        "mu_boundary_anticommute": mx(mu @ a_t + a_t @ mu),
        "tau_boundary_anticommute": mx(tau @ a_t + a_t @ tau),
        "tau_gamma_anticommute": mx(tau @ gamma_t + gamma_t @ tau),
        "tau_squared_minus_id": mx(tau @ tau - eye2),
        "tau_selfadjoint": mx(tau - tau.conj().T),
    }
    p_partial = boundary_projection_Ppartial(model)
    abs_a = hermitian_abs(a_t)
    for t in t_values:
        pt = build_Pt(model, u, t, p_partial=p_partial).matrix
        out[f"gamma_swap_t={t:.4f}"] = mx(gamma_t @ pt - (eye2 - pt) @ gamma_t)
        out[f"square_commute_t={t:.4f}"] = mx(pt @ (a_t @ a_t) - (a_t @ a_t) @ pt)
        out[f"compression_t={t:.4f}"] = mx(pt @ a_t @ pt - np.cos(2 * t) * abs_a @ pt)
    return out


# --------------------------------------------------------------------------
# transfer-matrix oracle


def transfer_matrix_eigenvalues(model: ModelBoundary, u: np.ndarray,
                                profile: BumpProfile, t: float,
                                bc: BoundaryProjection,
                                lam_max: float, n_scan: int = 2000,
                                n_steps: int = 256) -> np.ndarray:
    """Eigenvalues in [-lam_max, lam_max] found by shooting.

    Integrates beta' = -(A_psi(x) + lam*c) beta by midpoint-exponential
    products and locates zeros of the smallest singular value of the
    boundary-condition map.  Independent of any Galerkin machinery; used
    as an oracle in tests and refinement studies."""
    d = model.dim
    c = model.clifford_coeff
    a_psi = interval_potential(model, u, profile, t)
    xs = (np.arange(n_steps) + 0.5) / n_steps
    a_mid = a_psi(xs)
    dx = 1.0 / n_steps

    def transfer(lam: float) -> np.ndarray:
        tmat = np.eye(d, dtype=complex)
        for j in range(n_steps):
            tmat = scipy.linalg.expm(-(a_mid[j] + lam * c) * dx) @ tmat
        return tmat

    def secular(lam: float) -> float:
        tm = transfer(lam)
        k = bc.matrix @ np.vstack([np.eye(d), tm])
        return float(np.linalg.svd(k, compute_uv=False)[-1])

    lams = np.linspace(-lam_max, lam_max, n_scan)
    vals = np.array([secular(lam) for lam in lams])
    roots = []
    for j in range(1, n_scan - 1):
        if vals[j] < vals[j - 1] and vals[j] < vals[j + 1] and vals[j] < 0.2:
            from scipy.optimize import minimize_scalar
            res = minimize_scalar(secular, bracket=None,
                                  bounds=(lams[j - 1], lams[j + 1]),
                                  method="bounded",
                                  options={"xatol": 1e-12})
            if secular(res.x) < 1e-5:
                roots.append(float(res.x))
    return np.array(sorted(roots))
