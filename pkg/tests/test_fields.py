import numpy as np
import pytest

from etaflow.fields import (
    DifferentialForm,
    GridFunction,
    SmoothnessWarning,
    constant,
    d_exterior,
    form,
    grid_function,
    identity,
    integrate,
    pullback_from_base,
    pushforward_circle,
    sample,
    spectral_derivative,
    theta_grid,
    trace_form,
    wedge,
)
from etaflow.ktheory import make_bump_profile


def scalar_gf(values):
    return grid_function(np.asarray(values, dtype=complex)[..., None, None])


def test_derivative_band_limited_exact():
    n = 64
    th = theta_grid(n)
    f = scalar_gf(np.exp(2j * np.pi * th))
    df = spectral_derivative(f, 0)
    exact = 2j * np.pi * np.exp(2j * np.pi * th)
    assert np.max(np.abs(df.values[..., 0, 0] - exact)) < 1e-12


def test_derivative_constant_zero():
    g = identity((16, 16), 3)
    for ax in (0, 1):
        assert spectral_derivative(g, ax).sup_norm() < 1e-14


def test_derivative_vs_finite_difference_on_bump():
    # centered 2nd-order differences as the independent oracle
    prof = make_bump_profile(256)
    f = scalar_gf(prof.f)
    df = spectral_derivative(f, 0)[..., 0, 0] if False else spectral_derivative(f, 0).values[..., 0, 0]
    h = 1.0 / 256
    fd = (np.roll(prof.f, -1) - np.roll(prof.f, 1)) / (2 * h)
    err = np.max(np.abs(df.real - fd))
    # second-order oracle error ~ h^2 |f'''| / 6; bound measured with margin
    assert err < 0.2
    prof2 = make_bump_profile(512)
    f2 = scalar_gf(prof2.f)
    df2 = spectral_derivative(f2, 0).values[..., 0, 0]
    fd2 = (np.roll(prof2.f, -1) - np.roll(prof2.f, 1)) / (1.0 / 256)
    err2 = np.max(np.abs(df2.real - fd2))
    assert err2 < err  # refinement shrinks the oracle disagreement


def test_derivative_matches_fourth_order_differences():
    prof = make_bump_profile(256)
    f = scalar_gf(prof.f)
    df = spectral_derivative(f, 0).values[..., 0, 0].real
    h = 1.0 / 256
    fd4 = (8 * (np.roll(prof.f, -1) - np.roll(prof.f, 1))
           - (np.roll(prof.f, -2) - np.roll(prof.f, 2))) / (12 * h)
    assert np.max(np.abs(df - fd4)) < 5e-3


def test_direction_out_of_range():
    g = identity((16,), 1)
    with pytest.raises(ValueError):
        spectral_derivative(g, 1)


def test_grid_validation():
    with pytest.raises(ValueError):
        grid_function(np.zeros((6, 1, 1)))       # too small
    with pytest.raises(ValueError):
        grid_function(np.zeros((9, 1, 1)))       # odd
    with pytest.raises(ValueError):
        grid_function(np.zeros((16, 2, 3)))      # not square


def test_smoothness_certificate_warns():
    n = 64
    rough = np.sign(np.sin(2 * np.pi * theta_grid(n))) + 2.0
    with pytest.warns(SmoothnessWarning):
        g = scalar_gf(rough)
    assert not g.smooth


def test_d_squared_vanishes():
    n = 64
    th = theta_grid(n)
    x, y = np.meshgrid(th, th, indexing="ij")
    g = scalar_gf(np.exp(np.sin(2 * np.pi * x)) * np.cos(2 * np.pi * y))
    omega = form((n, n), {(): g})
    dd = d_exterior(d_exterior(omega))
    assert dd.sup_norm() < 1e-10


def test_d_on_circle_scalar():
    prof = make_bump_profile(128)
    f = scalar_gf(prof.f)
    omega = form((128,), {(): f})
    d_omega = d_exterior(omega)
    expect = scalar_gf(prof.df)
    assert (d_omega.coeffs[(0,)] - expect).sup_norm() < 1e-6


def test_d_of_constant_one_form_zero():
    omega = form((32,), {(0,): identity((32,), 1)})
    assert d_exterior(omega).sup_norm() < 1e-14


def test_d_symbolic_two_torus():
    # omega = sin(2 pi x) cos(2 pi y) dy; d omega = 2 pi cos cos dx ^ dy
    n = 32
    th = theta_grid(n)
    x, y = np.meshgrid(th, th, indexing="ij")
    a = scalar_gf(np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))
    omega = form((n, n), {(1,): a})
    d_omega = d_exterior(omega)
    expect = 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
    got = d_omega.coeffs[(0, 1)].values[..., 0, 0]
    assert np.max(np.abs(got - expect)) < 1e-10


def test_wedge_repeated_index_vanishes():
    n = 32
    a = form((n,), {(0,): identity((n,), 1)})
    assert wedge(a, a).sup_norm() == 0.0


def test_wedge_graded_antisymmetry_after_trace():
    rng = np.random.default_rng(0)
    n = 16
    def rand_gf():
        return grid_function(rng.standard_normal((n, n, 2, 2))
                             + 1j * rng.standard_normal((n, n, 2, 2)),
                             check=False)
    a = form((n, n), {(0,): rand_gf()})
    b = form((n, n), {(1,): rand_gf()})
    lhs = trace_form(wedge(a, b))
    rhs = trace_form(wedge(b, a))
    assert (lhs - (-1.0) * rhs).sup_norm() < 1e-12


def test_trace_of_commutator_vanishes():
    rng = np.random.default_rng(1)
    n = 16
    a = grid_function(rng.standard_normal((n, 3, 3)) + 1j * rng.standard_normal((n, 3, 3)), check=False)
    b = grid_function(rng.standard_normal((n, 3, 3)) + 1j * rng.standard_normal((n, 3, 3)), check=False)
    comm = a @ b - b @ a
    assert comm.trace().sup_norm() < 1e-12


def test_one_form_square_traceless_for_unitary():
    from etaflow.ktheory import random_unitary_field
    rng = np.random.default_rng(2)
    u = random_unitary_field((32, 32), 2, rng)
    omega = form((32, 32), {(a,): u.adjoint() @ spectral_derivative(u, a)
                            for a in range(2)})
    sq = trace_form(wedge(omega, omega))
    assert sq.sup_norm() < 1e-9


def test_integrate_constant_volume_form():
    n = 16
    omega = form((n, n), {(0, 1): identity((n, n), 1)})
    assert abs(integrate(omega) - 1.0) < 1e-14


def test_integrate_winding_number():
    # (1/2 pi i) tr(U^-1 dU) integrates to the winding, checked against
    # the phase-unwrapping oracle
    from etaflow.ktheory import winding_number
    n = 64
    th = theta_grid(n)
    for wind in (-2, 1, 3):
        u = scalar_gf(np.exp(2j * np.pi * wind * th))
        omega = form((n,), {(0,): u.adjoint() @ spectral_derivative(u, 0)})
        val = integrate((1 / (2j * np.pi)) * trace_form(omega))
        assert abs(val - wind) < 1e-10
        assert winding_number(u) == wind


def test_integrate_odd_function_vanishes():
    n = 64
    th = theta_grid(n)
    omega = form((n,), {(0,): scalar_gf(np.sin(2 * np.pi * th))})
    assert abs(integrate(omega)) < 1e-12


def test_integrate_requires_top_component():
    omega = form((16, 16), {(0,): identity((16, 16), 1)})
    with pytest.raises(ValueError):
        integrate(omega)


def test_stokes_on_torus():
    n = 64
    th = theta_grid(n)
    x, y = np.meshgrid(th, th, indexing="ij")
    a = scalar_gf(np.exp(np.cos(2 * np.pi * x)) * np.sin(2 * np.pi * y))
    omega = form((n, n), {(0,): a})
    assert abs(integrate(d_exterior(omega))) < 1e-10


def test_pushforward_fiber_integral():
    n = 32
    th = theta_grid(n)
    x, y = np.meshgrid(th, th, indexing="ij")
    fiber = 1.5 + np.sin(2 * np.pi * x)          # integrates to 1.5
    coeff = scalar_gf(fiber * np.cos(2 * np.pi * y))
    omega = form((n, n), {(0, 1): coeff})
    pushed = pushforward_circle(omega)
    expect = 1.5 * np.cos(2 * np.pi * th)
    got = pushed.coeffs[(0,)].values[..., 0, 0]
    assert np.max(np.abs(got - expect)) < 1e-12


def test_pushforward_drops_base_components():
    n = 16
    omega = form((n, n), {(1,): identity((n, n), 1), (): identity((n, n), 1)})
    assert pushforward_circle(omega).sup_norm() == 0.0


def test_pushforward_projection_formula():
    # pi_*(alpha ^ pi* beta) = pi_* alpha ^ beta
    rng = np.random.default_rng(3)
    n = 16
    th = theta_grid(n)
    x, y = np.meshgrid(th, th, indexing="ij")
    alpha = form((n, n), {(0,): scalar_gf(np.exp(2j * np.pi * x) * np.cos(2 * np.pi * y)),
                          (): scalar_gf(np.sin(2 * np.pi * (x + y)))})
    beta = form((n,), {(0,): scalar_gf(np.exp(-2j * np.pi * th))})
    lhs = pushforward_circle(wedge(alpha, pullback_from_base(beta, n)))
    rhs = wedge(pushforward_circle(alpha), beta)
    assert (lhs - rhs).sup_norm() < 1e-10


def test_form_rejects_repeated_indices():
    with pytest.raises(ValueError):
        form((16,), {(0, 0): identity((16,), 1)})


def test_form_sorting_absorbs_sign():
    n = 16
    g = identity((n, n), 1)
    a = form((n, n), {(1, 0): g})
    b = form((n, n), {(0, 1): g})
    assert (a + b).sup_norm() < 1e-14
