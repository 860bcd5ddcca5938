"""Cup products, Chern characters and transgression forms.

The central construction is the projection obtained by cupping a unitary
over a torus with the winding-one generator of the circle: a bump triple
(f, g, h) on R/Z glues the unitary into a 2n x 2n projection over
S^1 x base.  The triple is built from an exponentially flat smoothstep so
that g, h and the loop unitary stay smooth while the defining relations
(g h = 0, g^2 + h^2 = f - f^2) hold exactly on the grid.

Even/odd Chern character forms and their path-transgression are computed
with the spectral calculus of :mod:`etaflow.fields`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fields import (
    DifferentialForm,
    GridFunction,
    constant,
    form,
    grid_function,
    pushforward_circle,
    spectral_derivative,
    trace_form,
    wedge,
    zero_form,
)

__all__ = [
    "BumpProfile",
    "make_bump_profile",
    "lemma_id_integral",
    "bump_identity_value",
    "cup_with_bott",
    "cup_projection_samples",
    "loop_unitary",
    "loop_unitary_samples",
    "loop_unitary_endpoints",
    "chern_even",
    "chern_odd",
    "UnitaryPath",
    "ProjectionPath",
    "PathResolutionError",
    "unitary_path_from_nodes",
    "projection_path_from_nodes",
    "cup_path",
    "secondary_chern_odd",
    "secondary_chern_even",
    "tch",
    "a_hat_form",
    "path_derivative",
    "simpson_weights",
    "winding_number",
    "exp_i_hermitian",
    "random_hermitian_field",
    "random_unitary_field",
    "random_unitary_path",
]

_TWO_PI_I = 2j * np.pi


# --------------------------------------------------------------------------
# exponentially flat smoothstep and the bump triple


def _phi(x: np.ndarray, a: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-a / x[pos])
    return out


def _dphi(x: np.ndarray, a: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = (a / x[pos] ** 2) * np.exp(-a / x[pos])
    return out


def _smoothstep(x: np.ndarray, a: float) -> np.ndarray:
    """C^inf step: 0 for x <= 0, 1 for x >= 1, all derivatives flat at both ends."""
    x = np.asarray(x, dtype=float)
    lo, hi = _phi(x, a), _phi(1.0 - x, a)
    out = np.empty_like(x)
    inner = (x > 0) & (x < 1)
    out[x <= 0] = 0.0
    out[x >= 1] = 1.0
    out[inner] = lo[inner] / (lo[inner] + hi[inner])
    return out


def _dsmoothstep(x: np.ndarray, a: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inner = (x > 0) & (x < 1)
    xi = x[inner]
    lo, hi = _phi(xi, a), _phi(1.0 - xi, a)
    dlo, dhi = _dphi(xi, a), _dphi(1.0 - xi, a)
    out[inner] = (dlo * hi + lo * dhi) / (lo + hi) ** 2
    return out


@dataclass(frozen=True)
class BumpProfile:
    """Bump triple (f, g, h) on R/Z plus the derived interval cut-offs.

    f equals 1 exactly within eps_flat of 0 and 1, and 0 exactly within
    eps_flat of 1/2; g (resp. h) carries sqrt(f - f^2) on the left (right)
    half.  f1, f2 and psi = 1 - f2 are interval functions on [0, 1] (they do
    not close up on the circle).  All fields also exist as closed-form
    callables so the profile can be evaluated off-grid (quadrature nodes).
    """

    n_theta: int
    eps_flat: float
    steepness: float
    theta: np.ndarray
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    df: np.ndarray
    dg: np.ndarray
    dh: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    psi: np.ndarray

    # ---- closed-form evaluation -------------------------------------

    def f_at(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        y = np.minimum(x, 1.0 - x)
        w = 0.5 - 2.0 * self.eps_flat
        return 1.0 - _smoothstep((y - self.eps_flat) / w, self.steepness)

    def df_at(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        y = np.minimum(x, 1.0 - x)
        w = 0.5 - 2.0 * self.eps_flat
        slope = np.where(x <= 0.5, 1.0, -1.0)
        return -_dsmoothstep((y - self.eps_flat) / w, self.steepness) / w * slope

    def _sqrt_ff(self, x) -> np.ndarray:
        fx = self.f_at(x)
        return np.sqrt(np.maximum(fx * (1.0 - fx), 0.0))

    def g_at(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        return np.where(x <= 0.5, self._sqrt_ff(x), 0.0)

    def h_at(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        return np.where(x >= 0.5, self._sqrt_ff(x), 0.0)

    def dh_at(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        hx = self.h_at(x)
        fx, dfx = self.f_at(x), self.df_at(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (1.0 - 2.0 * fx) * dfx / (2.0 * hx)
        return np.where(hx > 1e-30, val, 0.0)

    def dg_at(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        gx = self.g_at(x)
        fx, dfx = self.f_at(x), self.df_at(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (1.0 - 2.0 * fx) * dfx / (2.0 * gx)
        return np.where(gx > 1e-30, val, 0.0)

    # interval functions on [0, 1]; no wrap-around
    def f1_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0.5, self.f_at(x), 0.0)

    def f2_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.5, self.f_at(x), 0.0)

    def psi_at(self, x) -> np.ndarray:
        return 1.0 - self.f2_at(x)

    # ---- grid views ---------------------------------------------------

    def grid_scalar(self, name: str) -> GridFunction:
        """One of 'f', 'g', 'h' as a periodic scalar GridFunction."""
        arr = getattr(self, name)
        return grid_function(arr[:, None, None])


def make_bump_profile(n_theta: int, eps_flat: float = 0.05,
                      steepness: float = 3.0) -> BumpProfile:
    """Construct the bump triple on an n_theta grid.

    eps_flat is the half-width of the exact plateaus at 0, 1/2 and 1;
    steepness is the decay constant of the underlying exp(-a/x) step.
    """
    if n_theta % 2 or n_theta < 8:
        raise ValueError("n_theta must be even and >= 8")
    if not 0.0 < eps_flat < 0.125:
        raise ValueError("eps_flat must lie in (0, 1/8)")
    if eps_flat * n_theta < 4:
        raise ValueError(f"grid too coarse to resolve eps_flat={eps_flat} "
                         f"at n_theta={n_theta}")
    theta = np.arange(n_theta) / n_theta
    proto = BumpProfile(n_theta, eps_flat, steepness, theta,
                        *[np.zeros(1)] * 9)
    f = proto.f_at(theta)
    prof = BumpProfile(
        n_theta=n_theta, eps_flat=eps_flat, steepness=steepness, theta=theta,
        f=f,
        g=proto.g_at(theta),
        h=proto.h_at(theta),
        df=proto.df_at(theta),
        dg=proto.dg_at(theta),
        dh=proto.dh_at(theta),
        f1=proto.f1_at(theta),
        f2=proto.f2_at(theta),
        psi=proto.psi_at(theta),
    )
    _validate_profile(prof)
    return prof


def _validate_profile(p: BumpProfile) -> None:
    n = p.n_theta
    if p.f[0] != 1.0 or p.f[n // 2] != 0.0:
        raise AssertionError("bump endpoints are not grid-exact")
    if np.max(np.abs(p.g * p.h)) > 0.0:
        raise AssertionError("g and h overlap")
    if np.max(np.abs(p.g**2 + p.h**2 - (p.f - p.f**2))) > 1e-12:
        raise AssertionError("g^2 + h^2 != f - f^2")
    ff = p.f - p.f**2
    near0 = np.minimum(p.theta, 1.0 - p.theta) <= p.eps_flat
    near_half = np.abs(p.theta - 0.5) <= p.eps_flat
    if np.max(ff[near0 | near_half]) >= 1e-14:
        raise AssertionError("f - f^2 not flat near gluing points")


def bump_identity_value(k: int) -> float:
    """Closed-form value (k-1)!^2 / (2k-1)! of the bump integral identity."""
    return math.factorial(k - 1) ** 2 / math.factorial(2 * k - 1)


def lemma_id_integral(profile: BumpProfile, k: int) -> float:
    """Quadrature of (2-4f) h' h^(2k-1) + 4 f' h^(2k) over the circle."""
    if k < 1:
        raise ValueError("k must be >= 1")
    f, h, df, dh = profile.f, profile.h, profile.df, profile.dh
    integrand = (2.0 - 4.0 * f) * dh * h ** (2 * k - 1) + 4.0 * df * h ** (2 * k)
    return float(np.mean(integrand))


# --------------------------------------------------------------------------
# cup product with the circle generator


def _as_matrix_samples(u: GridFunction | np.ndarray) -> tuple[np.ndarray, tuple[int, ...], int]:
    """Return (samples over base grid, base dims, n); constants get base ()."""
    if isinstance(u, GridFunction):
        return u.values, u.dims, u.matrix_dim
    arr = np.asarray(u, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("constant unitary must be a square matrix")
    return arr, (), arr.shape[0]


def _bcast_profile(arr: np.ndarray, base_rank: int) -> np.ndarray:
    return arr.reshape((arr.shape[0],) + (1,) * (base_rank + 2))


def cup_projection_samples(u: GridFunction | np.ndarray,
                           profile: BumpProfile) -> np.ndarray:
    """Raw samples of the cup projection over (theta,) + base grid."""
    uv, base, n = _as_matrix_samples(u)
    defect = np.max(np.abs(
        np.einsum("...ij,...kj->...ik", uv, np.conj(uv)) - np.eye(n)))
    if defect > 1e-10:
        raise ValueError(f"input is not unitary (defect {defect:.2e})")
    rank = len(base)
    f = _bcast_profile(profile.f, rank)[..., 0, 0]
    g = _bcast_profile(profile.g, rank)[..., 0, 0]
    h = _bcast_profile(profile.h, rank)[..., 0, 0]
    eye = np.eye(n)
    shape = (profile.n_theta,) + base + (2 * n, 2 * n)
    e = np.zeros(shape, dtype=complex)
    top_right = g[..., None, None] * eye + h[..., None, None] * uv[None, ...]
    e[..., :n, :n] = f[..., None, None] * eye
    e[..., :n, n:] = top_right
    e[..., n:, :n] = np.conj(np.swapaxes(top_right, -1, -2))
    e[..., n:, n:] = (1.0 - f)[..., None, None] * eye
    return e


def cup_with_bott(u: GridFunction | np.ndarray, profile: BumpProfile) -> GridFunction:
    """Projection-valued cup of a unitary with the circle generator.

    The result lives on S^1 x base with matrix dimension 2n; it is an exact
    projection on the grid and equals diag(1, 0) at theta = 0.
    """
    e = cup_projection_samples(u, profile)
    return grid_function(e)


def loop_unitary_samples(u: GridFunction | np.ndarray,
                         profile: BumpProfile,
                         theta: np.ndarray | None = None) -> np.ndarray:
    """Samples of the loop unitary conjugating diag(1,0) into the cup projection.

    The raw two-block formula has a sign mismatch at the endpoints; a theta
    dependent phase on the second column fixes the endpoints to I at 0 and
    diag(u, -u*) at 1 without touching the conjugation identity.
    """
    uv, base, n = _as_matrix_samples(u)
    if theta is None:
        theta = profile.theta
    rank = len(base)

    def col(arr):
        return arr.reshape((len(theta),) + (1,) * rank + (1, 1))

    sf1 = col(np.sqrt(profile.f1_at(theta)))
    sf2 = col(np.sqrt(profile.f2_at(theta)))
    sb = col(np.sqrt(np.maximum(1.0 - profile.f_at(theta), 0.0)))
    d2 = col(-np.exp(1j * np.pi * theta))
    eye = np.eye(n)
    a = sf1 * eye + sf2 * uv[None, ...] if rank else sf1 * eye + sf2 * uv
    shape = (len(theta),) + base + (2 * n, 2 * n)
    out = np.zeros(shape, dtype=complex)
    out[..., :n, :n] = a
    out[..., :n, n:] = d2 * sb * eye
    out[..., n:, :n] = sb * eye
    out[..., n:, n:] = -d2 * np.conj(np.swapaxes(a, -1, -2))
    return out


def loop_unitary(u: GridFunction | np.ndarray, profile: BumpProfile) -> GridFunction:
    """Loop unitary on the S^1 grid (a path, not a loop: it fails the
    periodic smoothness certificate by design)."""
    vals = loop_unitary_samples(u, profile)
    return grid_function(vals, declared_smooth=False, check=True)


def loop_unitary_endpoints(u: GridFunction | np.ndarray,
                           profile: BumpProfile) -> tuple[np.ndarray, np.ndarray]:
    """Exact endpoint values (U(0), U(1)) of the loop unitary."""
    ends = loop_unitary_samples(u, profile, theta=np.array([0.0, 1.0]))
    return ends[0], ends[1]


# --------------------------------------------------------------------------
# Chern characters


def _one_form(p: GridFunction) -> DifferentialForm:
    return form(p.dims, {(a,): spectral_derivative(p, a) for a in range(p.d)})


def _zero_form_of(p: GridFunction) -> DifferentialForm:
    return form(p.dims, {(): p})


def chern_even(p: GridFunction, k_max: int = 3) -> DifferentialForm:
    """Even Chern character form of a projection, traced, degrees 0..2*k_max."""
    acc = form(p.dims, {(): p.trace()})
    dp = _one_form(p)
    dp2 = wedge(dp, dp)
    p0 = _zero_form_of(p)
    power = dp2
    for k in range(1, k_max + 1):
        if 2 * k > p.d:
            break
        coeff = (-1) ** k / ((2j * np.pi) ** k * math.factorial(k))
        acc = acc + coeff * trace_form(wedge(p0, power))
        if 2 * (k + 1) <= p.d:
            power = wedge(power, dp2)
    return acc


def chern_odd(u: GridFunction, k_max: int = 3) -> DifferentialForm:
    """Odd Chern character form of a unitary, traced, degrees 1, 3, ..."""
    uinv = u.adjoint()
    omega = form(u.dims, {(a,): uinv @ spectral_derivative(u, a)
                          for a in range(u.d)})
    acc = zero_form(u.dims)
    power = omega
    for k in range(0, k_max + 1):
        if 2 * k + 1 > u.d:
            break
        coeff = math.factorial(k) / ((2j * np.pi) ** (k + 1)
                                     * math.factorial(2 * k + 1))
        acc = acc + coeff * trace_form(power)
        if 2 * (k + 1) + 1 <= u.d:
            power = wedge(power, wedge(omega, omega))
    return acc


# --------------------------------------------------------------------------
# paths and transgression


class PathResolutionError(ValueError):
    """The s-grid is too coarse for the path it is meant to sample."""


def path_derivative(stack: np.ndarray, ds: float) -> np.ndarray:
    """4th-order finite differences along axis 0 of a uniformly sampled path."""
    n = stack.shape[0]
    if n < 5:
        raise PathResolutionError("need at least 5 path nodes for derivatives")
    out = np.empty_like(stack)
    out[2:-2] = (-stack[4:] + 8 * stack[3:-1] - 8 * stack[1:-3] + stack[:-4]) / (12 * ds)
    out[0] = (-25 * stack[0] + 48 * stack[1] - 36 * stack[2]
              + 16 * stack[3] - 3 * stack[4]) / (12 * ds)
    out[1] = (-3 * stack[0] - 10 * stack[1] + 18 * stack[2]
              - 6 * stack[3] + stack[4]) / (12 * ds)
    out[-2] = -(-3 * stack[-1] - 10 * stack[-2] + 18 * stack[-3]
                - 6 * stack[-4] + stack[-5]) / (12 * ds)
    out[-1] = -(-25 * stack[-1] + 48 * stack[-2] - 36 * stack[-3]
                + 16 * stack[-4] - 3 * stack[-5]) / (12 * ds)
    return out


def _check_s_smoothness(stack: np.ndarray, tol: float) -> float:
    """Require the 4th- and 2nd-order derivative estimates to agree.

    Their relative disagreement measures how well the s-grid resolves the
    path; it is O(h^2) for smooth paths and O(1) for noise."""
    if stack.shape[0] < 5:
        raise PathResolutionError("need at least 5 path nodes")
    ds = 1.0 / (stack.shape[0] - 1)
    d4 = path_derivative(stack, ds)[1:-1]
    d2 = (stack[2:] - stack[:-2]) / (2 * ds)
    scale = max(float(np.max(np.abs(d4))), 1e-300)
    rough = float(np.max(np.abs(d4 - d2)) / scale)
    if rough > tol:
        raise PathResolutionError(
            f"path too coarse: derivative disagreement {rough:.2e} > {tol:.0e}")
    return rough


@dataclass(frozen=True)
class UnitaryPath:
    """Uniformly sampled path s -> unitary GridFunction, s in [0, 1]."""

    s_grid: np.ndarray
    nodes: tuple[GridFunction, ...]
    dot_nodes: tuple[GridFunction, ...]

    @property
    def n_s(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class ProjectionPath:
    """Uniformly sampled path s -> projection GridFunction, s in [0, 1]."""

    s_grid: np.ndarray
    nodes: tuple[GridFunction, ...]
    dot_nodes: tuple[GridFunction, ...]

    @property
    def n_s(self) -> int:
        return len(self.nodes)


def _path_common(nodes: Sequence[GridFunction], defect_fn, what: str,
                 smooth_tol: float) -> np.ndarray:
    if len(nodes) < 5:
        raise PathResolutionError("need at least 5 path nodes")
    for node in nodes:
        d = defect_fn(node)
        if d > 1e-10:
            raise ValueError(f"path node is not a {what} (defect {d:.2e})")
    stack = np.stack([node.values for node in nodes])
    _check_s_smoothness(stack, smooth_tol)
    return stack


def unitary_path_from_nodes(nodes: Sequence[GridFunction],
                            dot_nodes: Sequence[GridFunction] | None = None,
                            smooth_tol: float = 0.25) -> UnitaryPath:
    stack = _path_common(nodes, GridFunction.unitarity_defect, "unitary", smooth_tol)
    s = np.linspace(0.0, 1.0, len(nodes))
    if dot_nodes is None:
        dots = path_derivative(stack, s[1] - s[0])
        dot_nodes = [GridFunction(n.dims, n.matrix_dim, d, n.smooth, n.tail_fraction)
                     for n, d in zip(nodes, dots)]
    return UnitaryPath(s, tuple(nodes), tuple(dot_nodes))


def projection_path_from_nodes(nodes: Sequence[GridFunction],
                               dot_nodes: Sequence[GridFunction] | None = None,
                               smooth_tol: float = 0.25) -> ProjectionPath:
    stack = _path_common(nodes, GridFunction.projection_defect, "projection", smooth_tol)
    s = np.linspace(0.0, 1.0, len(nodes))
    if dot_nodes is None:
        dots = path_derivative(stack, s[1] - s[0])
        dot_nodes = [GridFunction(n.dims, n.matrix_dim, d, n.smooth, n.tail_fraction)
                     for n, d in zip(nodes, dots)]
    return ProjectionPath(s, tuple(nodes), tuple(dot_nodes))


def cup_path(upath: UnitaryPath, profile: BumpProfile) -> ProjectionPath:
    """Cup an entire unitary path; velocities are transported exactly
    (the only s-dependence of the projection sits in the h*U block)."""
    nodes, dots = [], []
    h = profile.h
    for u, du in zip(upath.nodes, upath.dot_nodes):
        e = cup_with_bott(u, profile)
        n = u.matrix_dim
        rank = len(u.dims)
        hcol = _bcast_profile(h, rank)[..., 0, 0][..., None, None]
        edot = np.zeros(e.values.shape, dtype=complex)
        edot[..., :n, n:] = hcol * du.values[None, ...]
        edot[..., n:, :n] = np.conj(np.swapaxes(edot[..., :n, n:], -1, -2))
        nodes.append(e)
        dots.append(GridFunction(e.dims, e.matrix_dim, edot, e.smooth, e.tail_fraction))
    return ProjectionPath(upath.s_grid, tuple(nodes), tuple(dots))


def secondary_chern_odd(path: UnitaryPath, k_max: int = 3) -> list[DifferentialForm]:
    """Secondary odd Chern form at every s-node (no ds factor attached).

    Normalised so that d/ds of the odd character equals the exterior
    derivative of this form; the degree-0 term is tr(U^-1 dU/ds)/(2 pi i).
    """
    out = []
    for u, du in zip(path.nodes, path.dot_nodes):
        uinv = u.adjoint()
        gamma = _zero_form_of(uinv @ du)
        omega = form(u.dims, {(a,): uinv @ spectral_derivative(u, a)
                              for a in range(u.d)})
        omega2 = wedge(omega, omega)
        acc = zero_form(u.dims)
        power = None
        for k in range(0, k_max + 1):
            if 2 * k > u.d:
                break
            coeff = math.factorial(k) / ((2j * np.pi) ** (k + 1)
                                         * math.factorial(2 * k))
            term = gamma if k == 0 else wedge(gamma, power)
            acc = acc + coeff * trace_form(term)
            power = omega2 if power is None else wedge(power, omega2)
        out.append(acc)
    return out


def secondary_chern_even(path: ProjectionPath, k_max: int = 3) -> list[DifferentialForm]:
    """Secondary even Chern form tr((2e-1) de/ds (de)^(2k+1)) at every node."""
    out = []
    for e, de_ds in zip(path.nodes, path.dot_nodes):
        two_e_minus = form(e.dims, {(): 2.0 * e - constant(e.dims, np.eye(e.matrix_dim))})
        dot = _zero_form_of(de_ds)
        de = _one_form(e)
        de2 = wedge(de, de)
        acc = zero_form(e.dims)
        power = de
        for k in range(0, k_max + 1):
            if 2 * k + 1 > e.d:
                break
            coeff = (-1) ** (k + 1) / ((2j * np.pi) ** (k + 1) * math.factorial(k))
            acc = acc + coeff * trace_form(wedge(two_e_minus, wedge(dot, power)))
            if 2 * (k + 1) + 1 <= e.d:
                power = wedge(power, de2)
        out.append(acc)
    return out


def simpson_weights(n: int) -> np.ndarray:
    """Composite Simpson weights on n uniformly spaced nodes (n odd)."""
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of nodes >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * (n - 1))


def tch(path: UnitaryPath | ProjectionPath, k_max: int = 3) -> DifferentialForm:
    """Transgression form: Simpson quadrature over s of the secondary character."""
    if isinstance(path, UnitaryPath):
        secondary = secondary_chern_odd(path, k_max)
    else:
        secondary = secondary_chern_even(path, k_max)
    w = simpson_weights(path.n_s)
    dims = secondary[0].dims
    acc = zero_form(dims)
    for wi, omega in zip(w, secondary):
        acc = acc + wi * omega
    return acc


def a_hat_form(dims: Sequence[int]) -> DifferentialForm:
    """A-hat form of a flat model geometry: the constant function 1."""
    dims = tuple(dims)
    return form(dims, {(): constant(dims, np.array([[1.0]]))})


# --------------------------------------------------------------------------
# generators and small oracles


def winding_number(u: GridFunction, axis: int = 0) -> int:
    """Winding of det(U) along one circle factor via phase unwrapping."""
    det = np.linalg.det(u.values)
    det = np.moveaxis(det, axis, 0)
    closed = np.concatenate([det, det[:1]], axis=0)
    phases = np.unwrap(np.angle(closed), axis=0)
    total = (phases[-1] - phases[0]) / (2 * np.pi)
    wind = np.round(total, 6)
    if np.max(np.abs(wind - np.round(wind))) > 1e-6:
        raise ValueError("winding is not integral; input may not be smooth")
    first = np.round(wind).astype(int).ravel()[0]
    if not np.all(np.round(wind).astype(int) == first):
        raise ValueError("winding varies over the remaining coordinates")
    return int(first)


def exp_i_hermitian(h: np.ndarray) -> np.ndarray:
    """Batched exp(iH) for stacked Hermitian matrices."""
    w, v = np.linalg.eigh(h)
    phase = np.exp(1j * w)
    return np.einsum("...ij,...j,...kj->...ik", v, phase, np.conj(v))


def random_hermitian_field(dims: Sequence[int], n: int, rng: np.random.Generator,
                           modes: int = 2, amplitude: float = 1.0) -> GridFunction:
    """Random Hermitian-matrix-valued trig polynomial on a torus (band-limited)."""
    dims = tuple(dims)
    grids = np.meshgrid(*[np.arange(m) / m for m in dims], indexing="ij")
    vals = np.zeros(dims + (n, n), dtype=complex)
    ks = np.stack(np.meshgrid(*[np.arange(-modes, modes + 1)] * len(dims),
                              indexing="ij"), axis=-1).reshape(-1, len(dims))
    for k in ks:
        if np.all(k == 0):
            c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            vals += (c + c.conj().T)[None, ...] / 2
            continue
        phase = np.zeros(dims)
        for ax, kk in enumerate(k):
            phase = phase + kk * grids[ax]
        c = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        c /= (1.0 + np.sum(np.abs(k))) ** 2
        wave = np.exp(2j * np.pi * phase)[..., None, None]
        vals += wave * c + np.conj(wave) * c.conj().T[None, ...]
    vals *= amplitude / (2 * modes + 1)
    return grid_function(vals)


def random_unitary_field(dims: Sequence[int], n: int, rng: np.random.Generator,
                         modes: int = 2, amplitude: float = 1.0,
                         windings: Sequence[int] | None = None) -> GridFunction:
    """exp(i H) for a random band-limited Hermitian field, optionally twisted
    by integer windings e^(2 pi i w x_axis) on the diagonal."""
    h = random_hermitian_field(dims, n, rng, modes, amplitude)
    u = exp_i_hermitian(h.values)
    if windings is not None:
        dims = tuple(dims)
        grids = np.meshgrid(*[np.arange(m) / m for m in dims], indexing="ij")
        for j, w in enumerate(windings):
            if w == 0:
                continue
            ax = j % len(dims)
            u[..., j, :] = u[..., j, :] * np.exp(2j * np.pi * w * grids[ax])[..., None]
    return grid_function(u)


def random_unitary_path(dims: Sequence[int], n: int, rng: np.random.Generator,
                        n_s: int = 33, modes: int = 2,
                        amplitude: float = 0.4) -> UnitaryPath:
    """Gentle random path s -> exp(i s M(x)) U0 with band-limited M, U0."""
    u0 = random_unitary_field(dims, n, rng, modes=modes, amplitude=1.0)
    m = random_hermitian_field(dims, n, rng, modes=modes, amplitude=amplitude)
    s_grid = np.linspace(0.0, 1.0, n_s)
    nodes = []
    for s in s_grid:
        us = exp_i_hermitian(s * m.values) @ u0.values
        nodes.append(grid_function(us))
    return unitary_path_from_nodes(nodes)
