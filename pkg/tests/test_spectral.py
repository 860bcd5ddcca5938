import numpy as np
import pytest

from etaflow.operators import DiscreteOperator, shifted_circle_dirac
from etaflow.spectral import (
    FlowAmbiguityError,
    dump_branches_csv,
    eigenvalues,
    eta,
    eta_hurwitz_oracle,
    mod1_distance,
    sf_square,
    spectral_flow,
    xi_difference_identity,
)


def shift_op(b, cutoff=64):
    return shifted_circle_dirac(b, cutoff)


# ------------------------------------------------------------ spectra

def test_eigenvalues_simple():
    spec = eigenvalues(np.diag([1.0, -1.0]).astype(complex))
    assert np.allclose(spec.eigenvalues, [-1.0, 1.0])
    assert spec.kernel_dim == 0
    assert spec.kernel_stable


def test_eigenvalues_closed_form_shift():
    spec = eigenvalues(shift_op(0.25))
    expect = np.sort(2 * np.pi * (np.arange(-64, 65) + 0.25))
    assert np.max(np.abs(spec.eigenvalues - expect)) < 1e-10


def test_eigenvalues_unitary_invariance():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    h = (a + a.conj().T) / 2
    q, _ = np.linalg.qr(rng.standard_normal((40, 40))
                        + 1j * rng.standard_normal((40, 40)))
    w1 = eigenvalues(h).eigenvalues
    w2 = eigenvalues(q @ h @ q.conj().T).eigenvalues
    assert np.max(np.abs(w1 - w2)) < 1e-10


def test_eigenvalues_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_kernel_detection():
    spec = eigenvalues(np.diag([0.0, 1e-12, 1.0, -2.0]))
    assert spec.kernel_dim == 2


# ------------------------------------------------------------ eta

def test_eta_symmetric_spectrum_zero():
    w = np.diag(np.concatenate([np.arange(1, 20.0), -np.arange(1, 20.0)]))
    est = eta(eigenvalues(w))
    assert abs(est.value) < 1e-12


@pytest.mark.parametrize("b", [0.1, 0.25, 0.4, 0.6, 0.9])
def test_eta_shift_oracle(b):
    est = eta(eigenvalues(shift_op(b, cutoff=2000)))
    oracle = eta_hurwitz_oracle(b)
    assert abs(oracle - (1 - 2 * b)) < 1e-8
    assert abs(est.value - oracle) < 1e-3
    assert est.error < 1e-3


def test_eta_scale_invariance():
    spec = eigenvalues(shift_op(0.3, cutoff=400))
    base = eta(spec)
    for c in (0.5, 2.0):
        scaled = eigenvalues(c * shift_op(0.3, cutoff=400).matrix)
        est = eta(scaled)
        assert abs(est.value - base.value) < max(est.error + base.error, 1e-6)


def test_xi_combines_kernel():
    est = eta(eigenvalues(np.diag([0.0, 1.0, -2.0, 3.0])))
    assert est.kernel_dim == 1
    assert abs(est.xi - (est.value + 1) / 2) < 1e-14


# ------------------------------------------------------------ spectral flow

def test_flow_constant_family():
    flow = spectral_flow(lambda s: shift_op(0.3, 32), np.linspace(0, 1, 5))
    assert flow.sf == 0
    assert flow.crossings == ()


def test_flow_shift_family():
    # spectrum 2 pi (k + b): raising b by one flows one branch upward
    flow = spectral_flow(lambda s: shift_op(0.25 + s, 48), np.linspace(0, 1, 9))
    assert flow.sf == 1
    assert len(flow.crossings) == 1
    c = flow.crossings[0]
    assert c.direction == 1
    assert abs(c.parameter - 0.75) < 1e-6


def test_flow_loop_cancellation():
    flow = spectral_flow(lambda s: shift_op(0.25 + 1 - abs(2 * s - 1), 48),
                         np.linspace(0, 1, 17))
    assert flow.sf == 0


def test_flow_additive_and_antisymmetric():
    def b_of(s):
        return 0.25 + 0.9 * s
    full = spectral_flow(lambda s: shift_op(b_of(s), 48), np.linspace(0, 1, 9))
    first = spectral_flow(lambda s: shift_op(b_of(s / 2), 48), np.linspace(0, 1, 9))
    second = spectral_flow(lambda s: shift_op(b_of(0.5 + s / 2), 48),
                           np.linspace(0, 1, 9))
    rev = spectral_flow(lambda s: shift_op(b_of(1 - s), 48), np.linspace(0, 1, 9))
    assert full.sf == first.sf + second.sf
    assert rev.sf == -full.sf


def test_flow_crossing_at_node():
    # crossing parameter exactly on a grid node still resolves
    flow = spectral_flow(lambda s: shift_op(0.5 + s, 32), np.linspace(0, 1, 5))
    assert flow.sf == 1
    assert abs(flow.crossings[0].parameter - 0.5) < 1e-6


def test_xi_jump_matches_crossing():
    # recompute xi on both sides of the detected crossing: integer jump
    eps = 1e-6
    est_lo = eta(eigenvalues(shift_op(1.0 - eps, 400)))
    est_hi = eta(eigenvalues(shift_op(1.0 + eps, 400)))
    jump = est_hi.xi - est_lo.xi
    assert abs(jump - 1.0) < 1e-4


def test_square_constant_in_t():
    def builder2(t, s):
        return shift_op(0.25 + 0.4 * s, 32)
    rep = sf_square(builder2, np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    assert rep.bottom.sf == rep.top.sf == 0
    assert rep.left.sf == rep.right.sf
    assert rep.loop == 0


def test_square_winding_loop():
    def builder2(t, s):
        return shift_op(0.25 + 0.6 * s + 0.55 * t, 32)
    rep = sf_square(builder2, np.linspace(0, 1, 7), np.linspace(0, 1, 7))
    assert rep.loop == 0


def test_xi_difference_identity_constant():
    out = xi_difference_identity(lambda s: shift_op(0.3, 64),
                                 np.linspace(0, 1, 5), 0.0)
    assert out["sf"] == 0
    assert out["residual"] < 1e-8


def test_mod1_distance():
    assert mod1_distance(2.98) == pytest.approx(0.02)
    assert mod1_distance(-0.4) == pytest.approx(0.4)


def test_branch_csv(tmp_path):
    spectra = {0.0: np.array([1.0, -1.0]), 0.5: np.array([0.5, -1.5])}
    path = tmp_path / "branches.csv"
    dump_branches_csv(path, spectra)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "parameter,branch,eigenvalue"
    assert len(lines) == 5
    assert lines[1].startswith("0,0,-1")
