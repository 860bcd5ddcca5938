"""Concrete desk-scale geometries for the theorem suites.

Two families of twisted Dirac operators are provided:

* scalar circle: projections over S^1 twisting the (possibly shifted)
  scalar circle operator, compressed onto the fixed start projection and
  gauge transported, so the whole family acts on one space;

* product three-torus: a path of unitaries over T^2 is cupped with the
  circle generator and the resulting projections compress the flat Dirac
  operator of S^1 x T^2 in an anisotropic Fourier-mode box (the cup circle
  needs far more modes than the base because the bump functions are not
  band limited).

Both families expose a builder suitable for spectral flow and the
geometric (transgression) side of the pairing they are meant to verify.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .fields import (GridFunction, constant, grid_function, integrate,
                     spectral_derivative)
from .ktheory import (
    BumpProfile,
    ProjectionPath,
    cup_path,
    cup_projection_samples,
    cup_with_bott,
    exp_i_hermitian,
    loop_unitary_samples,
    projection_path_from_nodes,
    random_hermitian_field,
    tch,
    unitary_path_from_nodes,
)
from .operators import (
    DiscreteOperator,
    mode_multiplication_matrix,
    shifted_circle_dirac,
    spectral_projection_basis,
)

__all__ = [
    "PAULI",
    "chern_band_projector",
    "rank_one_trig_projector",
    "CircleProjectionFamily",
    "random_circle_family",
    "TorusCupFamily",
    "torus3_dirac_modes",
]

PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


def chern_band_projector(n_grid: int, mass: float = 1.0) -> GridFunction:
    """Lower-band spectral projector of the two-band Chern Hamiltonian
    sin(2 pi x) s1 + sin(2 pi y) s2 + (mass - cos - cos) s3 on T^2.

    For 0 < mass < 2 the band is gapped with first Chern number -1; the
    entries are trigonometric polynomials of the Hamiltonian resolved
    through a pointwise eigensolve, so the projector itself is smooth with
    exponentially decaying Fourier tail.
    """
    xs = np.arange(n_grid) / n_grid
    x, y = np.meshgrid(xs, xs, indexing="ij")
    h = (np.sin(2 * np.pi * x)[..., None, None] * PAULI[0]
         + np.sin(2 * np.pi * y)[..., None, None] * PAULI[1]
         + (mass - np.cos(2 * np.pi * x) - np.cos(2 * np.pi * y))[..., None, None]
         * PAULI[2])
    _, v = np.linalg.eigh(h)
    p = np.einsum("...i,...j->...ij", v[..., 0], np.conj(v[..., 0]))
    return grid_function(p, declared_smooth=False)


def rank_one_trig_projector(n_grid: int, rng: np.random.Generator,
                            modes: int = 1) -> GridFunction:
    """Random smooth rank-one projector field on S^1."""
    h = random_hermitian_field((n_grid,), 2, rng, modes=modes, amplitude=1.0)
    w = exp_i_hermitian(h.values)
    e11 = np.diag([1.0, 0.0]).astype(complex)
    return grid_function(np.einsum("tij,jk,tlk->til", w, e11, np.conj(w)))


# --------------------------------------------------------------------------
# scalar circle instance


@dataclass
class CircleProjectionFamily:
    """Twisted-projection family p0 u_s* D u_s p0 on the scalar circle.

    u_fn maps s in [0, 1] to a unitary GridFunction over S^1; the start
    projection is compressed once (spectral rounding of its mode symbol)
    and the twist is transported inside, so all members act on one space.
    """

    p0: GridFunction
    u_fn: Callable[[float], GridFunction]
    cutoff: int
    shift: float = 0.5

    def __post_init__(self):
        nu = self.p0.matrix_dim
        self._dirac = shifted_circle_dirac(self.shift, self.cutoff, coeff_dim=nu)
        p_symbol = mode_multiplication_matrix(self.p0, self.cutoff)
        self._basis = spectral_projection_basis(p_symbol)

    @property
    def dim(self) -> int:
        return self._basis.shape[1]

    def operator(self, s: float) -> np.ndarray:
        """Compression of u_s* D u_s = D - i u_s* u_s'.

        The twist enters through its bounded connection potential rather
        than by sandwiching D between truncated multiplications, which
        would shift the spectral asymmetry at the mode-cutoff edge for
        winding twists."""
        u = self.u_fn(float(s))
        du = spectral_derivative(u, 0)
        v = -1j * (u.adjoint() @ du)
        twisted = self._dirac.matrix + mode_multiplication_matrix(v, self.cutoff)
        h = self._basis.conj().T @ twisted @ self._basis
        return (h + h.conj().T) / 2

    def projection_path(self, n_s: int = 33) -> ProjectionPath:
        nodes = []
        for s in np.linspace(0.0, 1.0, n_s):
            u = self.u_fn(float(s))
            p = np.einsum("...ij,...jk,...lk->...il", u.values, self.p0.values,
                          np.conj(u.values))
            nodes.append(grid_function(p, check=False))
        return projection_path_from_nodes(nodes)

    def geometric_side(self, n_s: int = 33) -> float:
        """Transgression pairing of the projection path over the circle."""
        return float(integrate(tch(self.projection_path(n_s))).real)


def random_circle_family(seed: int, n_grid: int = 256, cutoff: int = 48,
                         amplitude: float = 1.6, shift: float = 0.5,
                         ) -> CircleProjectionFamily:
    """Seeded generic instance: smooth rank-one p0, twist exp(i s M)."""
    rng = np.random.default_rng(seed)
    p0 = rank_one_trig_projector(n_grid, rng, modes=2)
    m = random_hermitian_field((n_grid,), 2, rng, modes=2, amplitude=amplitude)

    def u_fn(s: float) -> GridFunction:
        return grid_function(exp_i_hermitian(s * m.values), check=False)

    return CircleProjectionFamily(p0, u_fn, cutoff, shift)


# --------------------------------------------------------------------------
# product three-torus instance


def torus3_dirac_modes(cutoffs: tuple[int, int, int], coeff_dim: int,
                       antiperiodic_theta: bool = False,
                       ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Flat Dirac operator of S^1 x T^2 on an anisotropic mode box.

    Returns (lattice, blocks); the operator is block diagonal over modes
    with blocks 2 pi (k . sigma) tensor the coefficient identity, ordered
    (spinor, coefficients).  Blocks are kept as a list: at desk scale the
    dense block-diagonal matrix would double the memory footprint of every
    family evaluation.  With the bounding (antiperiodic) structure on the
    first circle the momenta there are half-integers, so the free operator
    is gapped; multiplication operators are unchanged since only momentum
    differences enter them."""
    ranges = [np.arange(-c, c + 1).astype(float) for c in cutoffs]
    if antiperiodic_theta:
        ranges[0] = ranges[0] + 0.5
    lattice = np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, 3)
    blocks = [np.kron(2 * np.pi * (k[0] * PAULI[0] + k[1] * PAULI[1]
                                   + k[2] * PAULI[2]), np.eye(coeff_dim))
              for k in lattice]
    return lattice, blocks


def _spinor_lift(values: np.ndarray) -> GridFunction:
    """Tensor an inert 2-dim spinor factor in front of the matrix axes."""
    lifted = np.einsum("ab,...ij->...aibj", np.eye(2), values)
    m2 = 2 * values.shape[-1]
    return grid_function(lifted.reshape(values.shape[:-2] + (m2, m2)),
                         check=False)


class TorusCupFamily:
    """Cup projections of a T^2 unitary path compressing the S^1 x T^2 Dirac.

    The parameter interval is split into segments.  Within each segment the
    projection path is transported back to the segment-start projection by
    the parallel-transport ODE du/ds = [de/ds, e] u (solved pointwise over
    the grid), and the family member is the segment-start compression of
    D + sum_j sigma_j (x) (-i u* d_j u).  Two choices keep the coarse mode
    truncation honest: the twist enters only through its bounded connection
    potential (no unbounded operator is sandwiched between truncations),
    and restarting the transport each segment keeps the gauge mild -- the
    accumulated holonomy of a winding loop is not representable in a small
    mode box, per-segment transports are.  The bounding (antiperiodic)
    structure on the cup circle makes the free operator gapped, so the
    small representation jumps at segment junctions cannot alias zero
    crossings.
    """

    def __init__(self, u_fn: Callable[[float], tuple[np.ndarray, np.ndarray]],
                 profile: BumpProfile, cutoff_base: int, cutoff_theta: int,
                 n_segments: int = 4, max_mid_fraction: float = 0.6,
                 ode_step: float = 1.0 / 64, max_cached_segments: int = 3):
        self.u_fn = u_fn
        self.profile = profile
        self._cuts = (cutoff_theta, cutoff_base, cutoff_base)
        self._ode_step = ode_step
        self._nseg = n_segments
        self._max_mid = max_mid_fraction
        self._max_cached = max_cached_segments
        u0, _ = u_fn(0.0)
        self._nu = u0.shape[-1]
        _, self._dirac_blocks = torus3_dirac_modes(self._cuts, 2 * self._nu,
                                                   antiperiodic_theta=True)
        self._segments: dict[int, dict] = {}
        self._segment_order: list[int] = []

    @property
    def dim(self) -> int:
        return self._segment(0)["basis"].shape[1]

    def _cup_and_rate(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """Cup projection samples and their s-derivative at parameter s."""
        u, udot = self.u_fn(s)
        e = cup_projection_samples(grid_function(u, check=False), self.profile)
        nu = self._nu
        edot = np.zeros_like(e)
        h = self.profile.h.reshape((-1,) + (1,) * (u.ndim - 2) + (1, 1))
        edot[..., :nu, nu:] = h * udot[None, ...]
        edot[..., nu:, :nu] = np.conj(np.swapaxes(edot[..., :nu, nu:], -1, -2))
        return e, edot

    def _segment(self, j: int) -> dict:
        j = int(np.clip(j, 0, self._nseg - 1))
        if j in self._segments:
            return self._segments[j]
        import scipy.linalg as sla

        s_j = j / self._nseg
        e_j, _ = self._cup_and_rate(s_j)
        symbol = mode_multiplication_matrix(_spinor_lift(e_j), self._cuts)
        symbol = (symbol + symbol.conj().T) / 2
        w, v = sla.eigh(symbol)
        lo, hi = 0.1, 0.9
        bad = int(np.sum((w > lo) & (w < hi)))
        if bad > self._max_mid * len(w):
            from .operators import AliasingError
            raise AliasingError(f"{bad}/{len(w)} projector eigenvalues inside "
                                f"({lo}, {hi}); refine the grid")
        seg = {"s0": s_j, "e0": e_j, "basis": np.ascontiguousarray(v[:, w >= 0.5]),
               "transport": {s_j: np.broadcast_to(
                   np.eye(2 * self._nu, dtype=complex), e_j.shape).copy()}}
        self._segments[j] = seg
        self._segment_order.append(j)
        while len(self._segment_order) > self._max_cached:
            old = self._segment_order.pop(0)
            if old != j:
                self._segments.pop(old, None)
        return seg

    def _transport(self, seg: dict, s: float) -> np.ndarray:
        """Kato transport u(s) with u e(s0) u* = e(s) within a segment."""
        cache = seg["transport"]
        if s in cache:
            return cache[s]
        start = max((c for c in cache if c <= s), default=seg["s0"])
        u = cache[start].copy()
        n_steps = max(1, int(np.ceil((s - start) / self._ode_step)))
        hh = (s - start) / n_steps

        def rate(sigma: float, mat: np.ndarray) -> np.ndarray:
            e, edot = self._cup_and_rate(sigma)
            comm = edot @ e - e @ edot
            return comm @ mat

        x = start
        for _ in range(n_steps):
            k1 = rate(x, u)
            k2 = rate(x + hh / 2, u + hh / 2 * k1)
            k3 = rate(x + hh / 2, u + hh / 2 * k2)
            k4 = rate(x + hh, u + hh * k3)
            u = u + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            x += hh
        # clean up: enforce the intertwining and re-unitarise (polar factor)
        e, _ = self._cup_and_rate(s)
        eye = np.eye(2 * self._nu)
        u = e @ u @ seg["e0"] + (eye - e) @ u @ (eye - seg["e0"])
        w, v = np.linalg.eigh(np.einsum("...ij,...ik->...jk", np.conj(u), u))
        inv_sqrt = np.einsum("...ij,...j,...kj->...ik", v, 1.0 / np.sqrt(w),
                             np.conj(v))
        u = u @ inv_sqrt
        cache[s] = u
        return u

    def operator(self, s: float) -> np.ndarray:
        s = float(np.clip(s, 0.0, 1.0))
        j = min(int(np.floor(s * self._nseg)), self._nseg - 1)
        return self.segment_operator(j, s)

    def segment_operator(self, j: int, s: float) -> np.ndarray:
        """Family member at parameter s in the basis/gauge of segment j.

        Valid for s anywhere in [s_j, s_(j+1)] including the right end, so
        per-segment spectral flow sees one continuous fixed-basis family."""
        seg = self._segment(j)
        u = self._transport(seg, float(s))
        pot = np.zeros(u.shape[:3] + (4 * self._nu, 4 * self._nu), dtype=complex)
        uadj = np.conj(np.swapaxes(u, -1, -2))
        for ax in range(3):
            du = np.fft.ifft(np.fft.fft(u, axis=ax)
                             * _deriv_multiplier(u.shape[ax], ax, u.ndim), axis=ax)
            conn = -1j * np.einsum("...ij,...jk->...ik", uadj, du)
            pot += np.einsum("ab,...ij->...aibj", PAULI[ax], conn).reshape(pot.shape)
        vhat = mode_multiplication_matrix(grid_function(pot, check=False),
                                          self._cuts)
        del pot
        blk = 4 * self._nu
        for b, block in enumerate(self._dirac_blocks):
            vhat[b * blk:(b + 1) * blk, b * blk:(b + 1) * blk] += block
        basis = seg["basis"]
        h = basis.conj().T @ (vhat @ basis)
        return (h + h.conj().T) / 2

    def unitary_path(self, n_s: int = 33):
        nodes = [grid_function(self.u_fn(float(s))[0], check=False)
                 for s in np.linspace(0.0, 1.0, n_s)]
        dots = [grid_function(self.u_fn(float(s))[1], check=False)
                for s in np.linspace(0.0, 1.0, n_s)]
        return unitary_path_from_nodes(nodes, dot_nodes=dots)

    def geometric_side(self, n_s: int = 33) -> float:
        """Integral over T^2 of the transgression form of the unitary path."""
        return float(integrate(tch(self.unitary_path(n_s))).real)

    def pairing_report(self, nodes_per_segment: int = 3, n_s: int = 33,
                       eps_kernel: float = 0.05,
                       crossing_resolution: float = 0.02,
                       eta_kwargs: dict | None = None) -> dict:
        """Dual-route check of the xi-difference pairing for this family.

        The spectral flow is accumulated segment by segment (each segment is
        a continuous fixed-basis family, so negative-eigenvalue counting is
        exact there); at every junction the two representations of the same
        operator are compared, and the measured representation discrepancy
        must stay below the distance of the spectrum from zero for the
        junction to carry no flow.  Endpoint xi values come from the first
        and last segment representations."""
        from .spectral import eigenvalues, eta, mod1_distance, spectral_flow

        flows = []
        junctions = []
        sf_total = 0
        spectra: dict[tuple[int, float], np.ndarray] = {}

        def seg_spectrum(j: int, s: float) -> np.ndarray:
            key = (j, round(s, 12))
            if key not in spectra:
                spectra[key] = np.linalg.eigvalsh(self.segment_operator(j, s))
            return spectra[key]

        for j in range(self._nseg):
            a, b = j / self._nseg, (j + 1) / self._nseg
            grid = np.linspace(a, b, nodes_per_segment)
            flow = spectral_flow(lambda s, j=j: self.segment_operator(j, s),
                                 grid, eps_kernel=eps_kernel,
                                 crossing_resolution=crossing_resolution,
                                 scout_depth=1)
            flows.append(flow)
            sf_total += flow.sf
        for j in range(self._nseg - 1):
            s_j = (j + 1) / self._nseg
            left = seg_spectrum(j, s_j)
            right = seg_spectrum(j + 1, s_j)
            mid = slice(len(left) // 4, -len(left) // 4)
            delta = float(np.max(np.abs(np.sort(left)[mid] - np.sort(right)[mid])))
            gap = min(float(np.min(np.abs(left))), float(np.min(np.abs(right))))
            junctions.append({"s": s_j, "discrepancy": delta, "gap": gap,
                              "safe": bool(gap > 2 * delta)})
        eta_kwargs = eta_kwargs or {}
        est0 = eta(eigenvalues(self.segment_operator(0, 0.0)), **eta_kwargs)
        est1 = eta(eigenvalues(self.segment_operator(self._nseg - 1, 1.0)),
                   **eta_kwargs)
        geo = self.geometric_side(n_s)
        lhs = est1.xi - est0.xi - sf_total
        return {
            "sf": sf_total,
            "segment_flows": [f.sf for f in flows],
            "crossings": [c.__dict__ for f in flows for c in f.crossings],
            "junctions": junctions,
            "junctions_safe": all(jn["safe"] for jn in junctions),
            "xi_start": est0.xi,
            "xi_end": est1.xi,
            "eta_error": max(est0.error, est1.error),
            "spectral_side": lhs,
            "geometric_side": geo,
            "residual": abs(lhs - geo),
            "mod1_residual": mod1_distance(lhs - geo),
        }


def _deriv_multiplier(n: int, axis: int, ndim: int) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    shape = [1] * ndim
    shape[axis] = n
    return (2j * np.pi * k).reshape(shape)
