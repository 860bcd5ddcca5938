import numpy as np
import pytest
import scipy.linalg

from etaflow.fields import constant, grid_function, theta_grid
from etaflow.ktheory import make_bump_profile
from etaflow.operators import (
    AliasingError,
    BoundaryConditionError,
    boundary_projection_Ppartial,
    build_circle_dirac,
    build_interval_dirac,
    build_Pt,
    compress,
    conjugation_check,
    cup_compressed_circle,
    hermitian_abs,
    interval_potential,
    make_model,
    mode_multiplication_matrix,
    mu_symmetry_check,
    random_block_scalar_unitary,
    random_model,
    shifted_circle_dirac,
    spectral_projection_basis,
    standard_lagrangian,
    transfer_matrix_eigenvalues,
    twisted_interval_spectral,
)

PROFILE = make_bump_profile(256)


def model_and_unitary(seed, m=4, n=1, amplitude=1.2, scale=2.0):
    rng = np.random.default_rng(seed)
    model = random_model(rng, m=m, n=n, scale=scale)
    u = random_block_scalar_unitary(rng, model, amplitude=amplitude)
    return model, u


# ------------------------------------------------------------ model basics

def test_model_validation():
    m = make_model(np.array([[1.0 + 1j]]))
    a, g = m.a_matrix, m.gamma
    assert np.max(np.abs(g @ a + a @ g)) < 1e-14
    assert np.max(np.abs(m.clifford @ m.clifford + np.eye(2))) < 1e-14
    w = np.linalg.eigvalsh(a)
    assert np.max(np.abs(np.sort(w) + np.sort(-w)[::-1])) < 1e-12  # symmetric


def test_random_model_reproducible():
    m1, u1 = model_and_unitary(5)
    m2, u2 = model_and_unitary(5)
    assert np.array_equal(m1.block, m2.block)
    assert np.array_equal(u1, u2)


def test_block_scalar_unitary_commutes_with_clifford():
    model, u = model_and_unitary(7, m=4, n=2)
    c = model.clifford_coeff
    assert np.max(np.abs(c @ u - u @ c)) < 1e-12
    assert np.max(np.abs(u @ u.conj().T - np.eye(model.dim))) < 1e-12


# ------------------------------------------------------------ projections

def test_p_partial_explicit_two_level():
    # A = offdiag(1): eigenvalues +-1; the positive eigenvector is (1,1)/sqrt2
    model = make_model(np.array([[1.0]]))
    p = boundary_projection_Ppartial(model)
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    assert np.max(np.abs(p - np.outer(v, v))) < 1e-12


def test_p_partial_half_rank():
    model, _ = model_and_unitary(3, m=4, n=2)
    p = boundary_projection_Ppartial(model)
    assert abs(np.trace(p).real - model.dim / 2) < 1e-10


def test_p_partial_kernel_needs_lagrangian():
    # B with a zero singular value gives A a two-dimensional kernel
    block = np.diag([1.0, 0.0])
    model = make_model(block, n=1)
    with pytest.raises(ValueError):
        boundary_projection_Ppartial(model)
    lag = standard_lagrangian(model)
    model_l = make_model(block, n=1, lagrangian=lag)
    p = boundary_projection_Ppartial(model_l)
    # eigensolver oracle: rank = (dim - dim ker)/2 + dim L
    w = np.linalg.eigvalsh(model_l.a_coeff)
    kernel = int(np.sum(np.abs(w) < 1e-10))
    expect = (model_l.dim - kernel) // 2 + lag.shape[1] * model_l.n
    assert abs(np.trace(p).real - expect) < 1e-10
    assert np.max(np.abs(p @ p - p)) < 1e-12


def test_build_pt_endpoints():
    model, u = model_and_unitary(11)
    d = model.dim
    p = boundary_projection_Ppartial(model)
    p0 = build_Pt(model, u, 0.0).matrix
    expect0 = np.block([[p, np.zeros((d, d))],
                        [np.zeros((d, d)), np.eye(d) - u.conj().T @ p @ u]])
    assert np.max(np.abs(p0 - expect0)) < 1e-14
    p4 = build_Pt(model, u, np.pi / 4).matrix
    expect4 = 0.5 * np.block([[np.eye(d), -u], [-u.conj().T, np.eye(d)]])
    assert np.max(np.abs(p4 - expect4)) < 1e-14


@pytest.mark.parametrize("t", [0.0, 0.3, np.pi / 8, np.pi / 4])
def test_build_pt_is_projection(t):
    model, u = model_and_unitary(13, m=2, n=2)
    p = build_Pt(model, u, t).matrix
    assert np.max(np.abs(p @ p - p)) < 1e-12
    assert np.max(np.abs(p - p.conj().T)) < 1e-12


def test_build_pt_rejects_bad_unitary():
    model, _ = model_and_unitary(17)
    with pytest.raises(ValueError):
        build_Pt(model, 2.0 * np.eye(model.dim), 0.0)


# ------------------------------------------------------------ circle operators

def test_circle_dirac_massless_spectrum():
    model = make_model(np.array([[0.0]]))
    op = build_circle_dirac(model, cutoff=8)
    w = np.linalg.eigvalsh(op.matrix)
    expect = np.sort(np.concatenate([[2 * np.pi * k, -2 * np.pi * k]
                                     for k in range(-8, 9)]).ravel())
    assert np.max(np.abs(np.sort(w) - expect)) < 1e-10


def test_shifted_circle_spectrum():
    op = shifted_circle_dirac(0.25, 16)
    w = np.sort(np.linalg.eigvalsh(op.matrix))
    expect = 2 * np.pi * (np.arange(-16, 17) + 0.25)
    assert np.max(np.abs(w - expect)) < 1e-10


def test_circle_dirac_massive_symmetric():
    a = 1.7
    model = make_model(np.array([[a]]))
    op = build_circle_dirac(model, cutoff=6)
    w = np.sort(np.linalg.eigvalsh(op.matrix))
    ks = np.arange(-6, 7)
    expect = np.sort(np.concatenate([np.sqrt((2 * np.pi * ks) ** 2 + a**2),
                                     -np.sqrt((2 * np.pi * ks) ** 2 + a**2)]))
    assert np.max(np.abs(w - expect)) < 1e-10
    assert abs(np.sum(np.sign(w))) < 1e-12


# ------------------------------------------------------------ compression

def test_compress_identity_projection():
    model, _ = model_and_unitary(19, m=2, n=1)
    op = build_circle_dirac(model, cutoff=6)
    p = constant((64,), np.eye(model.dim))
    out = compress(op, p)
    assert np.max(np.abs(np.sort(np.linalg.eigvalsh(out.matrix))
                         - np.sort(np.linalg.eigvalsh(op.matrix)))) < 1e-10


def test_compress_block_extraction():
    model, _ = model_and_unitary(23, m=2, n=1)
    op = build_circle_dirac(model, cutoff=6, outer_dim=2)
    p = constant((64,), np.diag([1.0, 1.0, 0.0, 0.0]))
    out = compress(op, p)
    inner = build_circle_dirac(model, cutoff=6)
    assert np.max(np.abs(np.sort(np.linalg.eigvalsh(out.matrix))
                         - np.sort(np.linalg.eigvalsh(inner.matrix)))) < 1e-10


def test_compress_cup_rank_is_half():
    model, u = model_and_unitary(29, m=2, n=1)
    cut = 24
    op = cup_compressed_circle(model, u, PROFILE, cut)
    total = (2 * cut + 1) * 2 * model.dim
    assert abs(op.dim - total // 2) <= 4    # half up to edge effects


def test_compress_aliasing_guard():
    n = 32
    th = theta_grid(n)
    # nearly discontinuous projector: badly resolved at a tiny cutoff
    ang = np.pi * np.clip(np.sin(2 * np.pi * th) * 12, -1, 1) / 2
    p = np.zeros((n, 2, 2), dtype=complex)
    p[:, 0, 0] = np.cos(ang) ** 2
    p[:, 1, 1] = np.sin(ang) ** 2
    p[:, 0, 1] = np.cos(ang) * np.sin(ang)
    p[:, 1, 0] = p[:, 0, 1]
    pg = grid_function(p, check=False)
    with pytest.raises(AliasingError):
        spectral_projection_basis(mode_multiplication_matrix(pg, 4),
                                  max_mid_fraction=0.02)


def test_mode_matrix_needs_fine_grid():
    p = constant((16,), np.eye(2))
    with pytest.raises(AliasingError):
        mode_multiplication_matrix(p, 8)


# ------------------------------------------------------------ interval operator

def test_interval_hermitian_and_reproducible():
    model, u = model_and_unitary(31, m=4, n=1)
    bc = build_Pt(model, u, 0.0)
    h1 = build_interval_dirac(model, u, PROFILE, 1.0, bc, n_basis=48)
    h2 = build_interval_dirac(model, u, PROFILE, 1.0, bc, n_basis=48)
    assert np.max(np.abs(h1.matrix - h1.matrix.conj().T)) < 1e-12
    assert np.array_equal(h1.matrix, h2.matrix)
    assert h1.provenance["builder"] == "build_interval_dirac"


def test_interval_against_transfer_matrix_oracle():
    # u = I: closed-form-free oracle by shooting on the same potential
    model = make_model(np.array([[1.3]]))
    u = np.eye(2, dtype=complex)
    bc = build_Pt(model, u, 0.0)
    h = build_interval_dirac(model, u, PROFILE, 1.0, bc, n_basis=80)
    w = np.linalg.eigvalsh(h.matrix)
    inner = w[np.abs(w) < 20]
    oracle = transfer_matrix_eigenvalues(model, u, PROFILE, 1.0, bc,
                                         lam_max=20, n_scan=500, n_steps=512)
    assert len(inner) == len(oracle)
    assert np.max(np.abs(inner - oracle)) < 1e-5


def test_interval_aps_closed_form():
    # for A = offdiag(b), the APS spectrum solves tan(w) = -w/b,
    # lambda = +-sqrt(w^2 + b^2)
    from scipy.optimize import brentq
    b = 1.3
    model = make_model(np.array([[b]]))
    u = np.eye(2, dtype=complex)
    bc = build_Pt(model, u, 0.0)
    h = build_interval_dirac(model, u, PROFILE, 1.0, bc, n_basis=96)
    w = np.linalg.eigvalsh(h.matrix)
    pos = w[(w > 0) & (w < 30)]
    roots = []
    for k in range(len(pos)):
        lo, hi = (k + 0.5) * np.pi + 1e-9, (k + 1.5) * np.pi - 1e-9
        om = brentq(lambda x: np.tan(x) + x / b, lo, hi)
        roots.append(np.sqrt(om**2 + b**2))
    assert np.max(np.abs(pos - np.array(roots)[:len(pos)])) < 1e-8


def test_interval_t_zero_is_conjugated_free_operator():
    model, u = model_and_unitary(37, m=4, n=1)
    pot = interval_potential(model, u, PROFILE, t=0.0)(np.array([0.0, 0.3, 1.0]))
    expect = u.conj().T @ model.a_coeff @ u
    assert np.max(np.abs(pot - expect)) < 1e-12


def test_interval_unitarily_trivial_twist():
    # u commuting with A: the deformed operator is equivalent to the free one
    model, _ = model_and_unitary(41, m=2, n=1)
    phase = np.exp(0.7j) * np.eye(model.dim)
    bc0 = build_Pt(model, np.eye(model.dim, dtype=complex), 0.0)
    bc_tw = build_Pt(model, phase, 0.0)
    h_free = build_interval_dirac(model, np.eye(model.dim, dtype=complex),
                                  PROFILE, 1.0, bc0, n_basis=64)
    h_tw = build_interval_dirac(model, phase, PROFILE, 1.0, bc_tw, n_basis=64)
    assert np.max(np.abs(np.linalg.eigvalsh(h_free.matrix)
                         - np.linalg.eigvalsh(h_tw.matrix))) < 1e-10


def test_interval_rejects_incompatible_projection():
    from etaflow.operators import BoundaryProjection
    model, u = model_and_unitary(43, m=2, n=1)
    d = model.dim
    # wrong-rank projection: the realisation cannot be self-adjoint
    lopsided = np.diag([1.0, 1.0, 1.0, 0.0]).astype(complex)
    with pytest.raises(BoundaryConditionError):
        bp = BoundaryProjection(lopsided, 0.0)
        build_interval_dirac(model, u, PROFILE, 1.0, bp, n_basis=16)


# ------------------------------------------------------------ conjugation

def test_conjugation_identity_trivial_unitary():
    model = make_model(np.array([[1.1]]))
    u = np.eye(2, dtype=complex)
    prof = make_bump_profile(256)
    assert conjugation_check(model, u, prof) < 1e-10


def test_conjugation_identity_refines():
    rng = np.random.default_rng(47)
    model = random_model(rng, m=2, n=1, scale=1.5)
    u = random_block_scalar_unitary(rng, model, amplitude=1.0)
    res = {}
    for n in (64, 256):
        prof = make_bump_profile(n, eps_flat=0.0625)
        res[n] = conjugation_check(model, u, prof)
    assert res[256] < 1e-6
    assert res[256] < res[64] / 10


def test_twisted_spectral_matches_cup_compression():
    rng = np.random.default_rng(53)
    model = random_model(rng, m=2, n=1, scale=1.5)
    u = random_block_scalar_unitary(rng, model, amplitude=1.0)
    prof = make_bump_profile(512)
    tw = twisted_interval_spectral(model, u, prof, 512, t=1.0, band_limit=100)
    w_tw = np.linalg.eigvalsh((tw + tw.conj().T) / 2)
    circ = cup_compressed_circle(model, u, prof, cutoff=100)
    w_c = np.linalg.eigvalsh(circ.matrix)
    window = 30.0
    a = w_tw[np.abs(w_tw) < window]
    b = w_c[np.abs(w_c) < window]
    assert len(a) == len(b)
    assert np.max(np.abs(a - b)) < 1e-6


# ------------------------------------------------------------ symmetry checks

def test_mu_symmetry_residuals():
    model, u = model_and_unitary(59, m=4, n=2)
    out = mu_symmetry_check(model, u)
    for name, val in out.items():
        tol = 1e-10 if name.startswith(("gamma", "square", "compression")) else 1e-12
        assert val < tol, (name, val)


def test_hermitian_abs():
    rng = np.random.default_rng(61)
    a = rng.standard_normal((6, 6))
    a = a + a.T
    assert np.max(np.abs(hermitian_abs(a) - scipy.linalg.sqrtm(a @ a).real)) < 1e-8
