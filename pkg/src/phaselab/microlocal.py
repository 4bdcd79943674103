"""Conic phase-space decay diagnostics and the microlocal restriction check.

A direction of the phase plane is "regular" for f when |V_g f| decays
rapidly along the corresponding cone; the set of non-regular directions
is the global wave-front set of f, empty exactly for Schwartz-class
functions.  On a finite grid every statement is a slope-threshold proxy:
radii are truncated at the lattice range, so the diagnostics report
measured log-log slopes over a declared radius window rather than
asymptotic rapid decay, and experiments flag them as such.

The homogeneous cutoffs psi are built as mollified angular indicators,
frozen radially beyond |z| = 1 + eps:

    psi(z) = 1 + rho(|z|) (m(theta(z)) - 1),

with rho a half-cosine ramp reaching 1 at 1 + eps and m a smooth angular
profile that equals 1 on the covered sectors.  Antipodal sector pairs
built with the shared mollifier satisfy psi_+ + psi_- = 1 outside the
unit ball, a sampled partition of unity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .grids import Grid, SampledFunction, Window, fourier_transform, lp_norm, \
    weighted_sobolev_norm
from .phase_space import PhaseLattice, stft_at_points, stft_inverse
from .symplectic import SymplecticMatrix, det_b
from .weyl import PhaseSymbol, weyl_quantize
from .estimates import EstimateReport, TestCorpus

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ConicSector:
    """Open cone around a unit direction of the phase plane (d = 1)."""

    direction: tuple
    half_angle: float
    inner_radius: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(w)
        if n == 0 or not np.all(np.isfinite(w)):
            raise ValueError("direction must be a nonzero finite vector")
        object.__setattr__(self, "direction", tuple(w / n))
        if not (0 < self.half_angle < np.pi / 2):
            raise ValueError("half_angle must lie in (0, pi/2)")
        if self.inner_radius < 1:
            raise ValueError("inner_radius must be >= 1")

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.direction[1], self.direction[0]))


def cone_decay(f: SampledFunction, window: Window, sector: ConicSector,
               radii, n_dirs: int = 17) -> tuple[float, np.ndarray]:
    """Radial sup profile of |V_g f| in the sector and its log-log slope.

    The sector is swept with n_dirs rays; at each radius the supremum
    over rays is recorded and the least-squares slope of log sup against
    log r is returned.  Radii beyond the grid's safe range raise.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < 2:
        raise ValueError("at least two radii are required")
    grid = f.grid
    if np.max(radii) > grid.half_extent:
        raise ValueError("radii exceed the lattice coverage of the grid")
    th0 = sector.angle
    angles = th0 + np.linspace(-sector.half_angle, sector.half_angle, n_dirs)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    vals = np.abs(stft_at_points(f, window, pts)).reshape(len(radii), n_dirs)
    profile = vals.max(axis=1)
    slope = float(np.polyfit(np.log(radii),
                             np.log(np.maximum(profile, LOG_FLOOR)), 1)[0])
    return slope, profile


def direction_slopes(f: SampledFunction, window: Window, radii,
                     n_dirs: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray decay slopes over the full circle of phase-plane directions."""
    radii = np.asarray(radii, dtype=float)
    angles = 2 * np.pi * np.arange(n_dirs) / n_dirs - np.pi
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    vals = np.abs(stft_at_points(f, window, pts)).reshape(len(radii), n_dirs)
    logs = np.log(np.maximum(vals, LOG_FLOOR))
    x = np.log(radii)
    slopes = np.polyfit(x, logs, 1)[0]
    return angles, slopes


@dataclass
class HomogeneousCutoff:
    """Smooth cutoff, positively homogeneous of degree 0 beyond 1 + eps."""

    sectors: tuple
    eps: float
    full_cover: bool = False

    def angular_profile(self, theta: np.ndarray) -> np.ndarray:
        if self.full_cover:
            return np.ones_like(theta)
        out = np.zeros_like(theta)
        for sec in self.sectors:
            dist = np.abs((theta - sec.angle + np.pi) % (2 * np.pi) - np.pi)
            a, e = sec.half_angle, self.eps
            ramp = 0.5 * (1 + np.cos(np.pi * np.clip((dist - a + e) / (2 * e), 0, 1)))
            out = np.maximum(out, ramp)
        return out

    def __call__(self, z: np.ndarray) -> np.ndarray:
        """Evaluate at phase points; z has shape (..., 2)."""
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        theta = np.arctan2(z[..., 1], z[..., 0])
        m = self.angular_profile(theta)
        ramp_lo, ramp_hi = 0.5 * (1 + self.eps), 1 + self.eps
        rho = 0.5 * (1 - np.cos(np.pi * np.clip((r - ramp_lo) / (ramp_hi - ramp_lo), 0, 1)))
        return 1.0 + rho * (m - 1.0)

    def symbol(self) -> PhaseSymbol:
        def fn(x, xi):
            x = np.asarray(x, dtype=float)
            xi = np.asarray(xi, dtype=float)
            pts = np.stack(np.broadcast_arrays(x, xi), axis=-1)
            return self(pts).astype(np.complex128)
        return PhaseSymbol(fn=fn, klass="smooth-tame", real_valued=True,
                           label=f"cutoff({len(self.sectors)} sectors, eps={self.eps})")

    def equals_one_at(self, direction, radius: float = 2.0, tol: float = 1e-8) -> bool:
        w = np.asarray(direction, dtype=float)
        w = w / np.linalg.norm(w)
        return bool(abs(self(radius * w) - 1.0) <= tol)


def build_cutoff(sectors, eps: float = 0.15) -> HomogeneousCutoff:
    """Mollified angular indicator of the covered sectors.

    With an empty sector list the cutoff is supported in |z| <= 1 + eps;
    when the sectors cover every direction the shortcut psi = 1 is taken.
    """
    sectors = tuple(sectors)
    if eps <= 0:
        raise ValueError("the smoothing scale must be positive")
    cut = HomogeneousCutoff(sectors=sectors, eps=eps)
    if sectors:
        theta = np.linspace(-np.pi, np.pi, 720, endpoint=False)
        if np.min(cut.angular_profile(theta)) >= 1.0 - 1e-12:
            return HomogeneousCutoff(sectors=sectors, eps=eps, full_cover=True)
    return cut


def required_directions(flow: SymplecticMatrix) -> np.ndarray:
    """Unit directions of S^{-1}({0} x (R \\ {0})) for a d = 1 flow matrix."""
    inv = flow.inv().m
    dirs = []
    for sign in (+1.0, -1.0):
        v = inv @ np.array([0.0, sign])
        dirs.append(v / np.linalg.norm(v))
    return np.array(dirs)


def cone_supported_witness(grid: Grid, window: Window, direction,
                           radius: float = 8.0, blob_width: float = 0.7,
                           lat: PhaseLattice | None = None) -> SampledFunction:
    """Synthesize f whose phase-space mass sits at radius * direction.

    Built through the synthesis operator from a Gaussian blob of
    coefficients, so the construction is independent of the analysis path
    it is later tested against.
    """
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    z0 = radius * w
    if lat is None:
        span = min(grid.half_extent - 2.0, radius + 3.0)
        lat = PhaseLattice.regular(1, 0.5, 0.5, span, span)
    X, K = np.meshgrid(lat.x, lat.xi, indexing="ij")
    coeffs = np.exp(-((X - z0[0]) ** 2 + (K - z0[1]) ** 2) / (2 * blob_width ** 2))
    f = stft_inverse(coeffs.astype(np.complex128), window, lat)
    return SampledFunction(grid, f.values / f.l2_norm())


def fit_two_constants(lhs: np.ndarray, term1: np.ndarray, term2: np.ndarray) -> tuple[float, float]:
    """Smallest scale-balanced (C, C_N) with C*term1 + C_N*term2 >= lhs.

    The two constants trade off along a Pareto front; the reported pair
    minimizes u + v after normalizing each term by its corpus mean, which
    picks a balanced interior vertex deterministically.
    """
    m1 = float(np.mean(term1))
    m2 = float(np.mean(term2))
    if m1 <= 0 or m2 <= 0:
        raise ValueError("both right-hand terms must be positive somewhere")
    A_ub = -np.column_stack([term1 / m1, term2 / m2])
    b_ub = -np.asarray(lhs, dtype=float)
    res = linprog(c=[1.0, 1.0], A_ub=A_ub, b_ub=b_ub, bounds=[(0, None), (0, None)],
                  method="highs")
    if not res.success:
        raise RuntimeError(f"constant fit failed: {res.message}")
    return float(res.x[0] / m1), float(res.x[1] / m2)


def micro_restriction_check(U1, cutoff: HomogeneousCutoff, phi: SampledFunction,
                            corpus: TestCorpus, p: float, order: int,
                            flow: SymplecticMatrix,
                            detb_guard: float = 1e-3) -> EstimateReport:
    """Fit (C, C_N) in the cone-localized restriction inequality.

    For every corpus member the three quantities

        lhs   = ||F(phi U_1 f)||_p,
        term1 = ||psi^w f||_p,
        term2 = || <x>^-order f ||_{H^-order},

    are computed and the minimal balanced pair (C, C_N) making
    lhs <= C term1 + C_N term2 corpus-wide is reported with per-function
    slack.  Preconditions: |det B| above the caustic guard and psi = 1
    along both directions that the flow pulls back from the frequency
    axis (rejected with the offending direction otherwise).
    """
    if not (1 <= p <= 2):
        raise ValueError("p must lie in [1, 2]")
    if order not in (2, 4):
        raise ValueError("the weighted-Sobolev order is supported for N in {2, 4}")
    dB = det_b(flow)
    if abs(dB) < detb_guard:
        raise ValueError(f"exceptional time: |det B| = {abs(dB):.3e} < {detb_guard}")
    for w in required_directions(flow):
        if not cutoff.equals_one_at(w, radius=2.0, tol=1e-6):
            raise ValueError(f"cutoff does not cover required direction {w}")
    grid = corpus.grid
    psi_op = weyl_quantize(cutoff.symbol(), grid)
    names, lhs, t1, t2 = [], [], [], []
    for name, f in corpus:
        uf = U1.apply(f)
        loc = SampledFunction(grid, uf.values * phi.values)
        names.append(name)
        lhs.append(lp_norm(fourier_transform(loc), p))
        t1.append(lp_norm(psi_op.apply(f), p))
        t2.append(weighted_sobolev_norm(f, order))
    lhs, t1, t2 = map(np.asarray, (lhs, t1, t2))
    C, CN = fit_two_constants(lhs, t1, t2)
    rows = []
    for i, name in enumerate(names):
        rhs = C * t1[i] + CN * t2[i]
        rows.append({"name": name, "lhs": lhs[i], "cone_term": t1[i],
                     "remainder_term": t2[i], "slack": rhs / lhs[i] - 1.0 if lhs[i] > 0 else np.inf})
    return EstimateReport(kind="micro-restriction", exponents=(p, order),
                          rows=rows, fitted_exponent=None, bound_exponent=None,
                          constant=C, seed=corpus.seed, sample_count=len(corpus),
                          extras={"C": C, "C_N": CN, "detB": dB})
