"""Phase-space analysis: STFT, its inverse, and mixed-norm functionals.

The short-time Fourier transform of f with window g is

    V_g f(z) = <f, pi(z) g>,        z = (x, xi),

with pi(x, xi) g(y) = e^{i y.xi} g(y - x).  With the window normalized to
||g||_2 = (2 pi)^{-d/2} the map V_g is an isometry of L^2(R^d) into
L^2(R^{2d}) and the inversion formula f = V_g^* V_g f holds.  Numerically
both the transform and its adjoint are evaluated on a finite product
lattice in phase space with Riemann cell weights, so the identities hold
up to lattice truncation and density errors that the tests quantify.

Mixed norms on a phase array F(x, xi):

    outer = 'x'  :  ( int ( int |F|^p dxi )^{q/p} dx )^{1/q}   (W-type),
    outer = 'xi' :  ( int ( int |F|^p dx  )^{q/p} dxi )^{1/q}  (M-type),

with sup replacing the integral when an exponent is infinite.  The
amalgam/modulation norms of a function compose the STFT with these
functionals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import Grid, SampledFunction, Window, fourier_transform, _axis_wavenumbers

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class PhaseLattice:
    """Product lattice {x_i} x {xi_j} per axis, enumerated x-major.

    The same one-dimensional offset arrays are used for every spatial
    (resp. frequency) axis.  Cell weight for z-integration is
    dx^d * dxi^d.
    """

    d: int
    x: np.ndarray
    xi: np.ndarray

    @staticmethod
    def regular(d: int, dx: float = 0.5, dxi: float = 0.5,
                xmax: float = 6.0, ximax: float = 6.0) -> "PhaseLattice":
        if dx <= 0 or dxi <= 0:
            raise ValueError("lattice steps must be positive")
        nx = int(round(xmax / dx))
        nxi = int(round(ximax / dxi))
        return PhaseLattice(d,
                            dx * np.arange(-nx, nx + 1),
                            dxi * np.arange(-nxi, nxi + 1))

    @staticmethod
    def default_for(grid: Grid, dx: float = 0.5, dxi: float = 0.5) -> "PhaseLattice":
        """Lattice covering the central half of the grid in both variables."""
        xmax = 0.5 * grid.half_extent
        ximax = min(0.5 * grid.half_extent, 0.5 * grid.xi_max)
        return PhaseLattice.regular(grid.d, dx, dxi, xmax, ximax)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0]) if len(self.x) > 1 else 1.0

    @property
    def dxi(self) -> float:
        return float(self.xi[1] - self.xi[0]) if len(self.xi) > 1 else 1.0

    @property
    def nx(self) -> int:
        return len(self.x)

    @property
    def nxi(self) -> int:
        return len(self.xi)

    @property
    def phase_shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d + (self.nxi,) * self.d

    @property
    def cell(self) -> float:
        """Phase-space volume of one lattice cell, (dx dxi)^d."""
        return (self.dx * self.dxi) ** self.d

    def points(self) -> np.ndarray:
        """All lattice points as an (m, 2d) array, x-major enumeration."""
        if self.d == 1:
            X, K = np.meshgrid(self.x, self.xi, indexing="ij")
            return np.column_stack([X.ravel(), K.ravel()])
        X0, X1, K0, K1 = np.meshgrid(self.x, self.x, self.xi, self.xi, indexing="ij")
        return np.column_stack([X0.ravel(), X1.ravel(), K0.ravel(), K1.ravel()])

    def check_within(self, grid: Grid) -> None:
        if grid.d != self.d:
            raise ValueError("lattice dimension does not match grid")
        if np.max(np.abs(self.x)) > grid.half_extent + 1e-12:
            raise ValueError("lattice spatial extent exceeds the grid extent")
        if np.max(np.abs(self.xi)) > grid.xi_max + 1e-12:
            raise ValueError("lattice frequency extent exceeds the grid's dual extent")


def _shifted_window_bank_1d(g: np.ndarray, grid: Grid, shifts: np.ndarray) -> np.ndarray:
    """Rows are the periodically translated windows g(. - x_i), exact shifts."""
    k = _axis_wavenumbers(grid)
    ghat = np.fft.fft(g)
    return np.fft.ifft(ghat[None, :] * np.exp(-1j * shifts[:, None] * k[None, :]), axis=1)


def _shifted_window_bank_2d(g: np.ndarray, grid: Grid, shifts: np.ndarray) -> np.ndarray:
    """bank[i0, i1, :, :] = g(. - (x_{i0}, x_{i1})), via per-axis Fourier phases."""
    k = _axis_wavenumbers(grid)
    ghat = np.fft.fft2(g)
    p = np.exp(-1j * shifts[:, None] * k[None, :])  # (ns, n)
    stack = ghat[None, None, :, :] * p[:, None, :, None] * p[None, :, None, :]
    return np.fft.ifft2(stack, axes=(-2, -1))


def stft(f: SampledFunction, window: Window, lat: PhaseLattice) -> np.ndarray:
    """Sampled V_g f on the lattice; shape lat.phase_shape.

    Each value equals the grid inner product <f, pi(z) g> exactly (the
    fractional shifts are realized in Fourier space).  Evaluation sweeps
    the x-slices and projects each windowed slice onto the lattice
    frequencies with one dense exponential matrix per axis.
    """
    if not window.normalized:
        raise ValueError("window must be normalized (use Window.normalize)")
    grid = f.grid
    lat.check_within(grid)
    y = grid.axis()
    E = np.exp(-1j * y[:, None] * lat.xi[None, :])  # (n, nxi)
    if grid.d == 1:
        T = _shifted_window_bank_1d(window.values, grid, lat.x)      # (nx, n)
        S = f.values[None, :] * np.conj(T)                           # (nx, n)
        return grid.cell * (S @ E)                                   # (nx, nxi)
    B = _shifted_window_bank_2d(window.values, grid, lat.x)          # (nx, nx, n, n)
    S = f.values[None, None, :, :] * np.conj(B)
    V = np.tensordot(S, E, axes=([2], [0]))                          # (nx, nx, n, nxi)
    V = np.tensordot(V, E, axes=([2], [0]))                          # (nx, nx, nxi, nxi)
    return grid.cell * V


def stft_inverse(F: np.ndarray, window: Window, lat: PhaseLattice) -> SampledFunction:
    """Adjoint synthesis dx^d dxi^d sum_z F(z) pi(z) g.

    Composed with stft it reproduces band-limited, well-localized f up to
    lattice truncation; see the reconstruction tests for the measured
    accuracy at the default lattice.
    """
    if not window.normalized:
        raise ValueError("window must be normalized (use Window.normalize)")
    grid = window.grid
    if F.shape != lat.phase_shape:
        raise ValueError(f"phase array shape {F.shape} does not match lattice {lat.phase_shape}")
    y = grid.axis()
    E = np.exp(-1j * y[:, None] * lat.xi[None, :])
    w = lat.cell
    if grid.d == 1:
        T = _shifted_window_bank_1d(window.values, grid, lat.x)
        G = F.T @ T                                                  # (nxi, n)
        vals = w * np.einsum("kj,jk->k", np.conj(E), G)
        return SampledFunction(grid, vals)
    B = _shifted_window_bank_2d(window.values, grid, lat.x)
    G = np.tensordot(F, B, axes=([0, 1], [0, 1]))                    # (nxi, nxi, n, n)
    vals = w * np.einsum("kj,lm,jmkl->kl", np.conj(E), np.conj(E), G)
    return SampledFunction(grid, vals)


def _stage_norm(A: np.ndarray, weight: float, p: float, axis: int) -> np.ndarray:
    if np.isinf(p):
        return A.max(axis=axis)
    return (weight * np.sum(A ** p, axis=axis)) ** (1.0 / p)


def mixed_norm(F: np.ndarray, lat: PhaseLattice, p: float, q: float,
               outer: str = "x") -> float:
    """Two-stage lattice norm of a phase array.

    outer='x' applies the inner l^p over the frequency axes and the outer
    l^q over the spatial axes (the W^{p,q} functional of the array);
    outer='xi' swaps the roles (the M^{p,q} functional).  Infinite
    exponents use the max over samples, a documented under-estimate of
    the sup.
    """
    for e in (p, q):
        if not (np.isinf(e) or e >= 1):
            raise ValueError(f"exponents must lie in [1, inf], got {e}")
    if outer not in ("x", "xi"):
        raise ValueError("outer must be 'x' or 'xi'")
    if F.shape != lat.phase_shape:
        raise ValueError(f"phase array shape {F.shape} does not match lattice {lat.phase_shape}")
    d = lat.d
    A = np.abs(np.asarray(F)).reshape(lat.nx ** d, lat.nxi ** d)
    if not np.all(np.isfinite(A)):
        raise ValueError("phase array contains non-finite values")
    x_w, xi_w = lat.dx ** d, lat.dxi ** d
    if outer == "x":
        inner_vals = _stage_norm(A, xi_w, p, axis=1)
        return float(_stage_norm(inner_vals, x_w, q, axis=0))
    inner_vals = _stage_norm(A, x_w, p, axis=0)
    return float(_stage_norm(inner_vals, xi_w, q, axis=0))


def wiener_amalgam_norm(f: SampledFunction, window: Window, p: float, q: float,
                        lat: PhaseLattice | None = None) -> float:
    """W^{p,q} norm: local FL^p regularity (inner, in xi), L^q decay (outer, in x)."""
    lat = PhaseLattice.default_for(f.grid) if lat is None else lat
    return mixed_norm(stft(f, window, lat), lat, p, q, outer="x")


def modulation_norm(f: SampledFunction, window: Window, p: float, q: float,
                    lat: PhaseLattice | None = None) -> float:
    """M^{p,q} norm: inner l^p over x, outer l^q over xi."""
    lat = PhaseLattice.default_for(f.grid) if lat is None else lat
    return mixed_norm(stft(f, window, lat), lat, p, q, outer="xi")


def wave_packet_bank(window: Window, points: np.ndarray) -> np.ndarray:
    """Columns pi(z_j) g for a list of phase points, d = 1 only.

    Returns an (n, m) complex matrix; memory grows like n * m, so this
    path is reserved for one-dimensional grids.
    """
    grid = window.grid
    if grid.d != 1:
        raise ValueError("wave packet banks are materialized for d = 1 only")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    y = grid.axis()
    T = _shifted_window_bank_1d(window.values, grid, points[:, 0])   # (m, n)
    P = T * np.exp(1j * points[:, 1][:, None] * y[None, :])
    return P.T.copy()                                                # (n, m)


def coupling_matrix(apply_batch, window: Window,
                    w_points: np.ndarray, z_points: np.ndarray) -> np.ndarray:
    """Matrix of couplings <A pi(z) g, pi(w) g>, rows indexed by w.

    apply_batch maps an (n, m) stack of sampled columns to the (n, m)
    stack of images under the operator A.
    """
    grid = window.grid
    Pz = wave_packet_bank(window, z_points)
    Pw = wave_packet_bank(window, w_points)
    AZ = apply_batch(Pz)
    return grid.cell * (np.conj(Pw.T) @ AZ)


def displacement_sup_l1(values: np.ndarray, displacements: np.ndarray,
                        step) -> float:
    """Discretized L^1 norm of the displacement envelope.

    Snaps each displacement to a cell with sides `step` (scalar or one
    entry per displacement component), keeps the supremum of |values| per
    cell, and returns sum(sup) * cell volume.  This is the lattice
    version of int sup_w |<A pi(z+w) g, pi(w) g>| dz.
    """
    v = np.abs(np.asarray(values)).ravel()
    disp = np.atleast_2d(np.asarray(displacements, dtype=float))
    disp = disp.reshape(-1, disp.shape[-1])
    if disp.shape[0] != v.size:
        raise ValueError("one displacement per value is required")
    steps = np.broadcast_to(np.asarray(step, dtype=float), (disp.shape[1],))
    idx = np.round(disp / steps[None, :]).astype(np.int64)
    # Dense accumulation over the bounding box of occupied cells.
    lo = idx.min(axis=0)
    span = idx.max(axis=0) - lo + 1
    flat = np.ravel_multi_index((idx - lo).T, span)
    sup = np.zeros(int(np.prod(span)))
    np.maximum.at(sup, flat, v)
    return float(np.sum(sup) * np.prod(steps))
