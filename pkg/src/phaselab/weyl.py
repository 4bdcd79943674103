"""Weyl quantization on grids and operator norms built from wave packets.

The Weyl operator of a symbol a(x, xi) acts by

    a^w f(x) = (2 pi)^{-d} int int e^{i (x - y).xi} a((x + y)/2, xi) f(y) dy dxi.

On a one-dimensional grid the double integral is discretized with the
grid quadrature in y and a frequency quadrature at *doubled* resolution
(spacing pi / 2L over the full dual range), so that the midpoints
(x_j + x_k)/2 are sampled exactly on the refined half-step grid.  The
resulting dense matrix K satisfies K[j, k] = conj(K[k, j]) exactly for
real symbols, and the constant symbol quantizes to the identity matrix
to rounding because the frequency quadrature sums a full set of roots of
unity.

Two operator norms are provided: a sampled Sjostrand-class norm (the
M^{infty,1} functional of the symbol over the symbol plane) and the
equivalent Gabor-side norm

    |||A||| = int sup_w |<A pi(z + w) g, pi(w) g>| dz,

discretized as a displacement-cell supremum sum.  Both are finite for
bounded symbols with integrable local spectra and are submultiplicative
under composition up to quadrature slack.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grids import Grid, SampledFunction, Window, gaussian_window
from .phase_space import (PhaseLattice, coupling_matrix, displacement_sup_l1,
                          mixed_norm, stft)
from .symplectic import QuadraticHamiltonian

TWO_PI = 2.0 * np.pi

SYMBOL_CLASSES = ("quadratic", "smooth-tame", "sjostrand", "product")


@dataclass
class PhaseSymbol:
    """A phase-space symbol a(x, xi) given by a vectorized evaluator.

    fn(X, XI) must broadcast over arrays.  Optional grad/hess return the
    tuple (a_x, a_xi) and the 2x2 block ((a_xx, a_xxi), (a_xix, a_xixi))
    and are required only when the symbol participates in a flow.
    """

    fn: Callable
    klass: str
    real_valued: bool = True
    d: int = 1
    grad: Callable | None = None
    hess: Callable | None = None
    label: str = ""

    def __post_init__(self):
        if self.klass not in SYMBOL_CLASSES:
            raise ValueError(f"unknown symbol class {self.klass!r}")

    def __call__(self, x, xi):
        return self.fn(x, xi)


def symbol_constant(c: complex) -> PhaseSymbol:
    return PhaseSymbol(fn=lambda x, xi: np.broadcast_to(c, np.broadcast(x, xi).shape).copy(),
                       klass="sjostrand", real_valued=(np.imag(c) == 0),
                       label=f"const({c})")


def symbol_coordinate(which: str) -> PhaseSymbol:
    """The symbol x (multiplication) or xi (momentum) for d = 1."""
    if which == "x":
        return PhaseSymbol(fn=lambda x, xi: np.broadcast_to(x, np.broadcast(x, xi).shape).copy(),
                           klass="smooth-tame", label="x")
    if which == "xi":
        return PhaseSymbol(fn=lambda x, xi: np.broadcast_to(xi, np.broadcast(x, xi).shape).copy(),
                           klass="smooth-tame", label="xi")
    raise ValueError("which must be 'x' or 'xi'")


def symbol_trig(kind: str = "cos", amplitude: float = 1.0, frequency: float = 1.0) -> PhaseSymbol:
    """amplitude * cos/sin(frequency * x), with derivatives for flow use."""
    f, df, d2f = {
        "cos": (np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u)),
        "sin": (np.sin, np.cos, lambda u: -np.sin(u)),
    }[kind]
    a, w = amplitude, frequency

    def grad(x, xi):
        zero = np.zeros(np.broadcast(x, xi).shape)
        return (a * w * df(w * np.asarray(x)) + zero, zero)

    def hess(x, xi):
        zero = np.zeros(np.broadcast(x, xi).shape)
        return ((a * w * w * d2f(w * np.asarray(x)) + zero, zero), (zero, zero))

    return PhaseSymbol(fn=lambda x, xi: a * f(w * np.asarray(x)) + 0.0 * np.asarray(xi),
                       klass="smooth-tame", grad=grad, hess=hess,
                       label=f"{amplitude}*{kind}({frequency}x)")


def quadratic_symbol(ham: QuadraticHamiltonian) -> PhaseSymbol:
    """z.Qz/2 as a phase symbol (d = 1)."""
    if ham.d != 1:
        raise ValueError("quadratic symbols are provided for d = 1")
    Q = ham.Q

    def fn(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return 0.5 * (Q[0, 0] * x * x + 2.0 * Q[0, 1] * x * xi + Q[1, 1] * xi * xi)

    return PhaseSymbol(fn=fn, klass="quadratic", label="quadratic")


def symbol_sum(*symbols: PhaseSymbol) -> PhaseSymbol:
    """Pointwise sum; class is the weakest (last in the class ordering)."""
    order = {k: i for i, k in enumerate(SYMBOL_CLASSES)}
    klass = max((s.klass for s in symbols), key=lambda k: order[k])
    return PhaseSymbol(fn=lambda x, xi: sum(s.fn(x, xi) for s in symbols),
                       klass=klass,
                       real_valued=all(s.real_valued for s in symbols),
                       label="+".join(s.label for s in symbols))


@dataclass
class AtomicMeasure:
    """A finite complex measure sum_j c_j delta_{theta_j} on R^d (d = 1 here)."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=np.complex128))
        if self.atoms.shape[0] != self.weights.shape[0]:
            raise ValueError("one weight per atom is required")
        if not (np.all(np.isfinite(self.atoms)) and np.all(np.isfinite(self.weights))):
            raise ValueError("atoms and weights must be finite")

    @property
    def mass(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """True when the measure pairs theta <-> -theta with conjugate weights."""
        for theta, c in zip(self.atoms, self.weights):
            partner = np.isclose(self.atoms, -theta, atol=tol)
            if not partner.any():
                return False
            if abs(np.sum(self.weights[partner]) - np.conj(c)) > tol * (1 + abs(c)):
                return False
        return True


def ft_measure_potential(mu: AtomicMeasure) -> PhaseSymbol:
    """V(x) = sum_j c_j e^{i x theta_j}, lifted to the symbol a_0(x, xi) = V(x).

    Fourier transforms of finite measures are the model rough potentials;
    their lift belongs to the Sjostrand class.
    """
    atoms, weights = mu.atoms.copy(), mu.weights.copy()

    def fn(x, xi):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(x, np.asarray(xi)).shape, dtype=np.complex128)
        for theta, c in zip(atoms, weights):
            out += c * np.exp(1j * theta * x)
        return out

    return PhaseSymbol(fn=fn, klass="sjostrand", real_valued=mu.is_hermitian(),
                       label=f"FT-measure({len(atoms)} atoms)")


@dataclass
class WeylOperator:
    """Dense realization of a^w on a d = 1 grid.

    The matrix includes the grid quadrature weight, so apply() is a plain
    matrix-vector product and the matrix 2-norm equals the grid L^2
    operator norm.
    """

    grid: Grid
    matrix: np.ndarray
    symbol: PhaseSymbol | None = None
    hermitian: bool = False

    def apply(self, f: SampledFunction) -> SampledFunction:
        return SampledFunction(self.grid, self.matrix @ f.values)

    def apply_batch(self, columns: np.ndarray) -> np.ndarray:
        return self.matrix @ columns

    def compose(self, other: "WeylOperator") -> "WeylOperator":
        if other.grid != self.grid:
            raise ValueError("operators live on different grids")
        m = self.matrix @ other.matrix
        return WeylOperator(self.grid, m, symbol=None,
                            hermitian=bool(np.max(np.abs(m - m.conj().T)) <= 1e-8))

    def scaled(self, c: complex) -> "WeylOperator":
        return WeylOperator(self.grid, c * self.matrix, symbol=None,
                            hermitian=self.hermitian and np.imag(c) == 0)

    def l2_operator_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def weyl_quantize(symbol: PhaseSymbol, grid: Grid) -> WeylOperator:
    """Dense Weyl quantization on a one-dimensional grid (n <= 512).

    K[j, k] = (h / 2 pi) sum_m e^{i (x_j - x_k) xi_m} a((x_j + x_k)/2, xi_m) dq
    over the doubled-resolution frequency quadrature xi_m.  Because the
    symbol is evaluated on the (midpoint, frequency) plane, the kernel is
    assembled on the (j + k, j - k) index pair, which needs only
    (2n - 1) x 2n symbol samples.
    """
    if grid.d != 1:
        raise ValueError("dense Weyl quantization is implemented for d = 1 "
                         "(use the split-step or kernel paths for d = 2)")
    if grid.n > 512:
        raise ValueError("dense quantization is limited to n <= 512")
    n, h, L = grid.n, grid.h, grid.half_extent
    dq = np.pi / (2.0 * L)                       # doubled resolution vs the dual grid
    m = np.arange(2 * n)
    xi_q = -grid.xi_max + dq * m                 # covers [-pi/h, pi/h)
    mids = -L + 0.5 * h * np.arange(2 * n - 1)   # all midpoints (x_j + x_k)/2
    A = np.asarray(symbol.fn(mids[:, None], xi_q[None, :]), dtype=np.complex128)
    if not np.all(np.isfinite(A)):
        raise ValueError("symbol evaluator produced non-finite samples")
    # G[s, l] = (h dq / 2 pi) sum_m A[s, m] e^{i l h xi_m},  l = j - k.
    ell = np.arange(-(n - 1), n)
    E = np.exp(1j * h * np.outer(xi_q, ell))     # (2n, 2n-1)
    G = (h * dq / TWO_PI) * (A @ E)              # (2n-1, 2n-1)
    jj = np.arange(n)
    K = G[jj[:, None] + jj[None, :], jj[:, None] - jj[None, :] + (n - 1)]
    herm_defect = float(np.max(np.abs(K - K.conj().T)))
    return WeylOperator(grid, K, symbol=symbol, hermitian=herm_defect <= 1e-8)


def default_symbol_grid(n: int = 64, half_extent: float = 8.0) -> Grid:
    """Square sampling grid for the (x, xi) symbol plane of d = 1 symbols."""
    return Grid(2, n, half_extent)


def sjostrand_norm_estimate(symbol: PhaseSymbol,
                            symbol_grid: Grid | None = None,
                            lat: PhaseLattice | None = None) -> float:
    """Sampled M^{infty,1} norm of the symbol over the symbol plane.

    The symbol is treated as a function on R^2 (for d = 1), analyzed with
    a Gaussian window there, and the mixed norm takes the sup over the
    plane inside and the L^1 over the plane's frequency variable outside.
    A Riemann estimate: stable under lattice refinement for bounded
    symbols with summable local spectrum, infinite-looking (growing
    without refinement stability) otherwise.
    """
    sg = default_symbol_grid() if symbol_grid is None else symbol_grid
    if sg.d != 2:
        raise ValueError("the symbol plane of a d = 1 symbol is two-dimensional")
    lat = PhaseLattice.default_for(sg) if lat is None else lat
    X, XI = sg.mesh()
    samples = SampledFunction(sg, np.asarray(symbol.fn(X, XI), dtype=np.complex128))
    w = gaussian_window(sg)
    F = stft(samples, w, lat)
    return mixed_norm(F, lat, p=np.inf, q=1, outer="xi")


def _as_batch_apply(op) -> Callable:
    """Duck-typed adapter: anything operator-like -> (n, m) column map."""
    if isinstance(op, np.ndarray):
        return lambda cols: op @ cols
    if hasattr(op, "apply_batch"):
        return op.apply_batch
    if hasattr(op, "matrix"):
        return lambda cols: op.matrix @ cols
    if callable(op):
        return op
    raise TypeError(f"cannot interpret {type(op)!r} as an operator")


def gabor_operator_norm(op, window: Window | None = None,
                        lat: PhaseLattice | None = None) -> float:
    """Discretized |||A||| = int sup_w |<A pi(z+w) g, pi(w) g>| dz.

    Couplings are evaluated on one product lattice for both indices; the
    displacement z = (column point) - (row point) is snapped to lattice
    cells and the supremum per cell is summed with the cell weight.
    Deterministic for fixed inputs; submultiplicative under operator
    composition up to quadrature slack.
    """
    apply_batch = _as_batch_apply(op)
    grid = op.grid if hasattr(op, "grid") else (window.grid if window else None)
    if window is None:
        if grid is None:
            raise ValueError("a window (or an operator with a grid) is required")
        window = gaussian_window(grid)
    lat = PhaseLattice.default_for(window.grid) if lat is None else lat
    pts = lat.points()
    M = coupling_matrix(apply_batch, window, w_points=pts, z_points=pts)
    disp = pts[None, :, :] - pts[:, None, :]          # column minus row
    return displacement_sup_l1(M, disp, (lat.dx, lat.dxi))
