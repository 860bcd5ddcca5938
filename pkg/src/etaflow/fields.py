"""Matrix-valued functions and differential forms on flat tori.

Values are stored as samples on a uniform product grid over T^d = (R/Z)^d,
d <= 3.  Derivatives round-trip through the discrete Fourier transform, so
all calculus here is spectrally accurate for smooth periodic data.  Pointwise
nonlinear operations (matrix products, traces) act directly on the samples.

Differential forms are graded families of coefficient functions keyed by
sorted coordinate multi-indices; the index ``S_INDEX`` (= -1) denotes an
external path parameter direction and sorts before every torus coordinate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "S_INDEX",
    "SMOOTH_TAIL_TOL",
    "GridFunction",
    "SmoothnessWarning",
    "grid_function",
    "sample",
    "constant",
    "identity",
    "theta_grid",
    "spectral_derivative",
    "DifferentialForm",
    "form",
    "zero_form",
    "wedge",
    "trace_form",
    "d_exterior",
    "integrate",
    "pushforward_circle",
    "pullback_from_base",
]

#: multi-index label for the external path direction ("ds" slot)
S_INDEX = -1

#: default threshold on the relative spectral tail for the smoothness certificate
SMOOTH_TAIL_TOL = 1e-12


class SmoothnessWarning(UserWarning):
    """Raised (as a warning) when sampled data fails the spectral-tail check."""


def theta_grid(n: int) -> np.ndarray:
    """Uniform grid 0, 1/n, ..., (n-1)/n on R/Z."""
    return np.arange(n) / n


def _spectral_tail_fraction(values: np.ndarray, ndim: int) -> float:
    """Energy fraction carried by the top third of the discrete spectrum.

    The FFT is taken over the torus axes only; matrix axes are treated as
    extra channels.  Returns tail_energy / total_energy (0.0 for zero data).
    """
    axes = tuple(range(ndim))
    coeffs = np.fft.fftn(values, axes=axes)
    total = float(np.sum(np.abs(coeffs) ** 2))
    if total == 0.0:
        return 0.0
    mask = np.zeros(values.shape[:ndim], dtype=bool)
    for ax in range(ndim):
        n = values.shape[ax]
        k = np.fft.fftfreq(n, d=1.0 / n)
        ax_mask = np.abs(k) > n / 3.0
        shape = [1] * ndim
        shape[ax] = n
        mask |= ax_mask.reshape(shape)
    tail = float(np.sum(np.abs(coeffs[mask, ...]) ** 2))
    return tail / total


@dataclass(frozen=True)
class GridFunction:
    """Samples of a smooth map T^d -> M_m(C) on a uniform product grid.

    ``values`` has shape dims + (m, m); scalars are stored with m = 1.
    ``smooth`` records whether the spectral-tail certificate passed at
    construction; derived quantities inherit the flag conservatively.
    """

    dims: tuple[int, ...]
    matrix_dim: int
    values: np.ndarray
    smooth: bool = True
    tail_fraction: float = 0.0

    @property
    def d(self) -> int:
        return len(self.dims)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return replace(self, values=self.values + other.values,
                       smooth=self.smooth and other.smooth)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return replace(self, values=self.values - other.values,
                       smooth=self.smooth and other.smooth)

    def __neg__(self) -> "GridFunction":
        return replace(self, values=-self.values)

    def __mul__(self, c: complex) -> "GridFunction":
        return replace(self, values=self.values * c)

    __rmul__ = __mul__

    def __matmul__(self, other: "GridFunction") -> "GridFunction":
        """Pointwise matrix product; scalar (m=1) factors broadcast."""
        if self.dims != other.dims:
            raise ValueError(f"grid mismatch: {self.dims} vs {other.dims}")
        if self.matrix_dim == 1 and other.matrix_dim > 1:
            vals = self.values[..., 0:1, 0:1] * other.values
        elif other.matrix_dim == 1 and self.matrix_dim > 1:
            vals = self.values * other.values[..., 0:1, 0:1]
        elif self.matrix_dim != other.matrix_dim:
            raise ValueError(f"matrix dim mismatch: {self.matrix_dim} vs {other.matrix_dim}")
        elif self.matrix_dim == 1:
            vals = self.values * other.values
        else:
            vals = np.einsum("...ij,...jk->...ik", self.values, other.values)
        return GridFunction(self.dims, max(self.matrix_dim, other.matrix_dim), vals,
                            self.smooth and other.smooth,
                            max(self.tail_fraction, other.tail_fraction))

    def adjoint(self) -> "GridFunction":
        return replace(self, values=np.conj(np.swapaxes(self.values, -1, -2)))

    def trace(self) -> "GridFunction":
        """Pointwise matrix trace as a scalar GridFunction."""
        tr = np.trace(self.values, axis1=-2, axis2=-1)
        return GridFunction(self.dims, 1, tr[..., None, None],
                            self.smooth, self.tail_fraction)

    def sup_norm(self) -> float:
        """Max over grid points of the spectral (2-)norm of the matrix value."""
        if self.matrix_dim == 1:
            return float(np.max(np.abs(self.values))) if self.values.size else 0.0
        svals = np.linalg.svd(self.values, compute_uv=False)
        return float(np.max(svals)) if svals.size else 0.0

    def unitarity_defect(self) -> float:
        return (self.adjoint() @ self - identity(self.dims, self.matrix_dim)).sup_norm()

    def projection_defect(self) -> float:
        idem = (self @ self - self).sup_norm()
        herm = (self - self.adjoint()).sup_norm()
        return max(idem, herm)

    def _check_compatible(self, other: "GridFunction") -> None:
        if self.dims != other.dims or self.matrix_dim != other.matrix_dim:
            raise ValueError("incompatible GridFunctions: "
                             f"{self.dims}x{self.matrix_dim} vs {other.dims}x{other.matrix_dim}")


def grid_function(values: np.ndarray, *, smooth_tol: float = SMOOTH_TAIL_TOL,
                  check: bool = True, declared_smooth: bool = True) -> GridFunction:
    """Wrap raw samples (shape dims + (m, m)) as a GridFunction.

    Grid sizes must be even and >= 8.  The smoothness certificate is the
    relative spectral weight above |k| > N/3 per axis; a failing certificate
    on data declared smooth emits a SmoothnessWarning and flags the result.
    """
    values = np.asarray(values, dtype=complex)
    if values.ndim < 2 or values.shape[-1] != values.shape[-2]:
        raise ValueError("values must end in square matrix axes")
    dims = tuple(int(n) for n in values.shape[:-2])
    if not 1 <= len(dims) <= 3:
        raise ValueError(f"torus dimension must be 1..3, got {len(dims)}")
    for n in dims:
        if n < 8 or n % 2:
            raise ValueError(f"grid sizes must be even and >= 8, got {n}")
    m = int(values.shape[-1])
    tail = _spectral_tail_fraction(values, len(dims)) if check else 0.0
    smooth = tail <= smooth_tol
    if check and declared_smooth and not smooth:
        warnings.warn(f"spectral tail fraction {tail:.3e} exceeds {smooth_tol:.1e}",
                      SmoothnessWarning, stacklevel=2)
    return GridFunction(dims, m, values, smooth, tail)


def sample(fn: Callable[..., np.ndarray], dims: Iterable[int], matrix_dim: int,
           **kwargs) -> GridFunction:
    """Sample fn(x1, ..., xd) -> (m, m) array (vectorised over broadcast grids)."""
    dims = tuple(dims)
    grids = np.meshgrid(*[theta_grid(n) for n in dims], indexing="ij")
    vals = np.asarray(fn(*grids), dtype=complex)
    want = dims + (matrix_dim, matrix_dim)
    if vals.shape != want:
        vals = np.broadcast_to(vals, want).copy()
    return grid_function(vals, **kwargs)


def constant(dims: Iterable[int], matrix: np.ndarray) -> GridFunction:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    dims = tuple(dims)
    vals = np.broadcast_to(matrix, dims + matrix.shape).copy()
    return GridFunction(dims, matrix.shape[0], vals, True, 0.0)


def identity(dims: Iterable[int], matrix_dim: int) -> GridFunction:
    return constant(dims, np.eye(matrix_dim))


def spectral_derivative(fn: GridFunction, direction: int) -> GridFunction:
    """d(fn)/dx_i via Fourier multiplier 2*pi*i*k; exact on band-limited data.

    The Nyquist mode is zeroed (the symmetric convention for sampled data).
    Results inherit a failed smoothness certificate as an accuracy flag.
    """
    if not 0 <= direction < fn.d:
        raise ValueError(f"direction {direction} out of range for d={fn.d}")
    n = fn.dims[direction]
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    mult = 2j * np.pi * k
    shape = [1] * fn.values.ndim
    shape[direction] = n
    coeffs = np.fft.fft(fn.values, axis=direction)
    dvals = np.fft.ifft(coeffs * mult.reshape(shape), axis=direction)
    return GridFunction(fn.dims, fn.matrix_dim, dvals, fn.smooth, fn.tail_fraction)


# --------------------------------------------------------------------------
# differential forms


def _sort_index(idx: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Sort a multi-index, returning (sorted index, permutation sign)."""
    idx = tuple(idx)
    if len(set(idx)) != len(idx):
        raise ValueError(f"repeated coordinate in multi-index {idx}")
    order = sorted(range(len(idx)), key=lambda i: idx[i])
    inversions = sum(1 for a in range(len(order)) for b in range(a + 1, len(order))
                     if order[a] > order[b])
    return tuple(idx[i] for i in order), (-1) ** inversions


def _merge_sign(left: tuple[int, ...], right: tuple[int, ...]) -> int:
    """Sign of sorting the concatenation of two sorted disjoint index tuples."""
    inversions = 0
    for a in left:
        inversions += sum(1 for b in right if b < a)
    return (-1) ** inversions


@dataclass(frozen=True)
class DifferentialForm:
    """Graded family of GridFunction coefficients on a torus.

    coeffs maps sorted multi-indices (entries in {S_INDEX} | {0..d-1}) to
    matrix-valued coefficient functions on the same base grid.
    """

    dims: tuple[int, ...]
    matrix_dim: int
    coeffs: Mapping[tuple[int, ...], GridFunction] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return len(self.dims)

    def degrees(self) -> set[int]:
        return {len(i) for i in self.coeffs}

    def component(self, idx: tuple[int, ...]) -> GridFunction | None:
        sorted_idx, sign = _sort_index(idx)
        g = self.coeffs.get(sorted_idx)
        return None if g is None else sign * g

    def sup_norm(self) -> float:
        return max((g.sup_norm() for g in self.coeffs.values()), default=0.0)

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        if self.dims != other.dims:
            raise ValueError("base mismatch")
        out = dict(self.coeffs)
        for idx, g in other.coeffs.items():
            out[idx] = out[idx] + g if idx in out else g
        return DifferentialForm(self.dims, max(self.matrix_dim, other.matrix_dim), out)

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + (-1.0) * other

    def __mul__(self, c: complex) -> "DifferentialForm":
        return DifferentialForm(self.dims, self.matrix_dim,
                                {i: c * g for i, g in self.coeffs.items()})

    __rmul__ = __mul__


def form(dims: Iterable[int], components: Mapping[tuple[int, ...], GridFunction]
         ) -> DifferentialForm:
    """Build a form from (multi-index -> coefficient); indices get sorted,
    reordering signs are absorbed, repeated indices are rejected."""
    dims = tuple(dims)
    out: dict[tuple[int, ...], GridFunction] = {}
    m = 1
    for idx, g in components.items():
        if g.dims != dims:
            raise ValueError(f"coefficient grid {g.dims} != base {dims}")
        for i in idx:
            if i != S_INDEX and not 0 <= i < len(dims):
                raise ValueError(f"index {i} out of range for base dim {len(dims)}")
        sidx, sign = _sort_index(tuple(idx))
        g = sign * g
        out[sidx] = out[sidx] + g if sidx in out else g
        m = max(m, g.matrix_dim)
    return DifferentialForm(dims, m, out)


def zero_form(dims: Iterable[int], matrix_dim: int = 1) -> DifferentialForm:
    return DifferentialForm(tuple(dims), matrix_dim, {})


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    """Wedge product; matrix coefficients compose by pointwise matmul."""
    if a.dims != b.dims:
        raise ValueError("base mismatch")
    out: dict[tuple[int, ...], GridFunction] = {}
    for ia, ga in a.coeffs.items():
        for ib, gb in b.coeffs.items():
            if set(ia) & set(ib):
                continue
            sidx, ssign = _sort_index(ia + ib)
            g = (ssign) * (ga @ gb)
            out[sidx] = out[sidx] + g if sidx in out else g
    m = max(a.matrix_dim, b.matrix_dim)
    return DifferentialForm(a.dims, m, out)


def trace_form(omega: DifferentialForm) -> DifferentialForm:
    return DifferentialForm(omega.dims, 1,
                            {i: g.trace() for i, g in omega.coeffs.items()})


def d_exterior(omega: DifferentialForm) -> DifferentialForm:
    """Exterior derivative in the torus directions (the path slot is inert)."""
    out: dict[tuple[int, ...], GridFunction] = {}
    for idx, g in omega.coeffs.items():
        for ax in range(omega.d):
            if ax in idx:
                continue
            dg = spectral_derivative(g, ax)
            pos = sum(1 for i in idx if i < ax)
            sidx = tuple(sorted(idx + (ax,)))
            term = ((-1) ** pos) * dg
            out[sidx] = out[sidx] + term if sidx in out else term
    return DifferentialForm(omega.dims, omega.matrix_dim, out)


def integrate(omega: DifferentialForm) -> complex:
    """Integral of the top-degree torus component (uniform-grid quadrature).

    Matrix-valued top coefficients are traced first; components of lower
    degree or carrying the path index are ignored.
    """
    top = tuple(range(omega.d))
    g = omega.coeffs.get(top)
    if g is None:
        raise ValueError("form has no top-degree component on its torus")
    if g.matrix_dim > 1:
        g = g.trace()
    return complex(np.mean(g.values[..., 0, 0]))


def pushforward_circle(omega: DifferentialForm) -> DifferentialForm:
    """Integration along the first circle factor of S^1 x T^(d-1).

    Components containing the fiber index 0 are integrated over it (with the
    sign from commuting d(theta) to the front); the rest are dropped.
    """
    if omega.d < 2:
        raise ValueError("pushforward needs a base torus of dimension >= 1")
    new_dims = omega.dims[1:]
    out: dict[tuple[int, ...], GridFunction] = {}
    for idx, g in omega.coeffs.items():
        if 0 not in idx:
            continue
        pos = idx.index(0)
        sign = (-1) ** pos
        vals = np.mean(g.values, axis=0)
        new_idx = tuple(i - 1 if i > 0 else i for i in idx if i != 0)
        gf = GridFunction(new_dims, g.matrix_dim, vals, g.smooth, g.tail_fraction)
        term = sign * gf
        out[new_idx] = out[new_idx] + term if new_idx in out else term
    return DifferentialForm(new_dims, omega.matrix_dim, out)


def pullback_from_base(omega: DifferentialForm, n_fiber: int) -> DifferentialForm:
    """Pull a form on T^(d-1) back along S^1 x T^(d-1) -> T^(d-1)."""
    new_dims = (n_fiber,) + omega.dims
    out: dict[tuple[int, ...], GridFunction] = {}
    for idx, g in omega.coeffs.items():
        vals = np.broadcast_to(g.values, (n_fiber,) + g.values.shape).copy()
        gf = GridFunction(new_dims, g.matrix_dim, vals, g.smooth, g.tail_fraction)
        out[tuple(i + 1 if i != S_INDEX else i for i in idx)] = gf
    return DifferentialForm(new_dims, omega.matrix_dim, out)
