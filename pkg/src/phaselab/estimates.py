"""Estimate experiments: restriction, dispersive, and blow-up-rate scans.

Three ratio functionals drive the experiments, all homogeneous of degree
zero in the input function:

* restriction_ratio:  ||F(phi U f)||_p / ||f||_p  -- the localized
  Fourier-side bound whose constant blows up like a power of the inverse
  caustic determinant;
* dispersive_ratio:   ||U f||_{W^{p,q}} / ||f||_{W^{q,p}}  -- the
  amalgam-space smoothing bound, exponent (1/p - 1/q);
* measure_restriction_ratio:  the solution restricted to a compactly
  supported measure (circle or atom set) against ||f||_p.

Operator norms for p != 2 are reported only as corpus maxima refined by
seeded random search: exact L^p -> L^q norms are not computable, and the
theorems assert upper bounds, so experiments check boundedness of
empirical ratios rather than equality.  Every report is reproducible
bit-for-bit from (seed, configuration).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grids import (Grid, SampledFunction, Window, evaluate_at, fourier_transform,
                    gaussian, lp_norm, modulate)
from .phase_space import PhaseLattice, wiener_amalgam_norm
from .propagators import HermitianEvolution, Propagator
from .symplectic import QuadraticHamiltonian, det_b, quadratic_flow
from .weyl import weyl_quantize, quadratic_symbol

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# measures supported on compact sets

@dataclass
class RestrictionMeasure:
    """Positive measure with finite support inside the grid extent."""

    points: np.ndarray    # (m, d)
    weights: np.ndarray   # (m,), positive
    descriptor: str = "atomSet"

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("one weight per support point is required")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @staticmethod
    def circle(radius: float = 2.0, m: int = 256) -> "RestrictionMeasure":
        """Equispaced points on a circle with arc-length weights 2 pi R / m."""
        angles = TWO_PI * np.arange(m) / m
        pts = radius * np.column_stack([np.cos(angles), np.sin(angles)])
        w = np.full(m, TWO_PI * radius / m)
        return RestrictionMeasure(pts, w, descriptor=f"circle({m} points)")

    @staticmethod
    def atoms(points, weights) -> "RestrictionMeasure":
        return RestrictionMeasure(points, weights, descriptor="atomSet")


# ---------------------------------------------------------------------------
# deterministic test corpus

@dataclass
class TestCorpus:
    """Deterministic family: structured shapes plus seeded band-limited noise.

    Enumeration order is stable across runs, so corpus maxima are
    reproducible from the seed alone.
    """

    grid: Grid
    seed: int
    members: list = field(default_factory=list)   # (name, SampledFunction)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def functions(self):
        return [f for _, f in self.members]


def _normalized(f: SampledFunction) -> SampledFunction:
    return SampledFunction(f.grid, f.values / f.l2_norm())


def _random_band_limited(grid: Grid, seed_pair, bandwidth: float,
                         envelope_width: float) -> SampledFunction:
    rng = np.random.default_rng(seed_pair)
    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    q = np.zeros(grid.shape)
    for mesh in grid.xi_mesh():
        q = q + mesh ** 2
    spec = spec * np.exp(-q / (2.0 * (bandwidth / 2.0) ** 2))
    from .grids import inverse_fourier_transform
    f = inverse_fourier_transform(SampledFunction(grid.dual(), spec))
    env = gaussian(grid, width=envelope_width)
    return _normalized(SampledFunction(grid, f.values * env.values))


def standard_corpus(grid: Grid, seed: int = 7, n_random: int = 12,
                    bandwidth: float = 4.0, envelope_width: float = 3.0) -> TestCorpus:
    """8 deterministic shapes x n_random seeded band-limited fields.

    The shapes mix restriction near-extremizers (Gaussians of several
    widths and centres) with structured probes (Hermite, chirp, modulated
    and two-bump functions); the random fields are unstructured probes.
    """
    members: list = []
    if grid.d == 1:
        x = grid.axis()
        g1 = gaussian(grid, 1.0)
        members += [
            ("gaussian", g1),
            ("gaussian-wide", gaussian(grid, 2.0)),
            ("gaussian-narrow-shifted", gaussian(grid, 0.6, center=1.0)),
            ("hermite-1", SampledFunction(grid, x * np.exp(-x ** 2 / 2))),
            ("hermite-2", SampledFunction(grid, (4 * x ** 2 - 2) * np.exp(-x ** 2 / 2))),
            ("modulated", gaussian(grid, 1.0, momentum=2.0)),
            ("chirp", SampledFunction(grid, np.exp(1j * x ** 2 / 2 - x ** 2 / 8))),
            ("two-bump", SampledFunction(grid, np.exp(-(x - 2) ** 2 / 2)
                                         + np.exp(-(x + 2) ** 2 / 2))),
        ]
    else:
        X, Y = grid.mesh()
        r = np.sqrt(X ** 2 + Y ** 2)
        members += [
            ("gaussian", gaussian(grid, 1.0)),
            ("gaussian-wide", gaussian(grid, 1.8)),
            ("anisotropic", SampledFunction(grid, np.exp(-X ** 2 / (2 * 0.7 ** 2)
                                                         - Y ** 2 / (2 * 1.8 ** 2)))),
            ("shifted", gaussian(grid, 1.0, center=(1.0, -0.5))),
            ("modulated", gaussian(grid, 1.0, momentum=(2.0, 1.0))),
            ("ring", SampledFunction(grid, np.exp(-(r - 2.0) ** 2 / 0.5))),
            ("two-bump", SampledFunction(grid, np.exp(-((X - 1.5) ** 2 + Y ** 2) / 2)
                                         + np.exp(-((X + 1.5) ** 2 + Y ** 2) / 2))),
            ("chirp", SampledFunction(grid, np.exp(1j * r ** 2 / 2 - r ** 2 / 8))),
        ]
    members = [(name, _normalized(f)) for name, f in members]
    for i in range(n_random):
        members.append((f"random-{i}",
                        _random_band_limited(grid, [seed, i], bandwidth, envelope_width)))
    return TestCorpus(grid=grid, seed=seed, members=members)


def flattened_annulus_corpus(grid: Grid, radius: float = 2.0,
                             widths=(2.4, 1.2, 0.6), chirp_time: float | None = None,
                             ) -> TestCorpus:
    """Radially flattened family: spectra concentrating on |xi| = radius.

    As the radial width shrinks the members approach the extension of the
    circle; with a quadratic chirp correction (chirp_time = t) they play
    the same role for the time-t free propagator.  Used as the
    bound-failure witness family above the critical restriction exponent.
    """
    if grid.d != 2:
        raise ValueError("the annulus family lives on d = 2 grids")
    from .grids import inverse_fourier_transform
    XI0, XI1 = grid.xi_mesh()
    rho = np.sqrt(XI0 ** 2 + XI1 ** 2)
    members = []
    for w in widths:
        spec = np.exp(-(rho - radius) ** 2 / (2 * (w / 2.0) ** 2))
        f = inverse_fourier_transform(SampledFunction(grid.dual(), spec.astype(complex)))
        if chirp_time:
            X0, X1 = grid.mesh()
            f = SampledFunction(grid, f.values
                                * np.exp(-1j * (X0 ** 2 + X1 ** 2) / (2 * chirp_time)))
        members.append((f"annulus-w{w}", _normalized(f)))
    return TestCorpus(grid=grid, seed=0, members=members)


# ---------------------------------------------------------------------------
# ratio functionals

def schwartz_cutoff(grid: Grid, width: float = 3.0) -> SampledFunction:
    """The shipped compactly-concentrated multiplier: a centred Gaussian.

    Rougher multipliers in W^{1,q} would also serve; only Schwartz-type
    cutoffs are provided and experiments record the width used.
    """
    return gaussian(grid, width=width)


def restriction_ratio(U: Propagator | None, f: SampledFunction,
                      cutoff: SampledFunction | None, p: float) -> float:
    """||F(phi U f)||_p / ||f||_p; cutoff None means phi = 1 (no multiplier)."""
    if not (1 <= p <= 2):
        raise ValueError(f"p must lie in [1, 2], got {p}")
    nf = lp_norm(f, p)
    if nf == 0:
        raise ValueError("the input function vanishes; the ratio is undefined")
    uf = U.apply(f) if U is not None else f
    if cutoff is not None:
        uf = SampledFunction(uf.grid, uf.values * cutoff.values)
    return lp_norm(fourier_transform(uf), p) / nf


def dispersive_ratio(U: Propagator, f: SampledFunction, p: float, q: float,
                     window: Window, lat: PhaseLattice | None = None) -> float:
    """||U f||_{W^{p,q}} / ||f||_{W^{q,p}} for 1 <= p <= q <= inf."""
    if not (1 <= p <= q):
        raise ValueError(f"need 1 <= p <= q, got p={p}, q={q}")
    denom = wiener_amalgam_norm(f, window, q, p, lat)
    if denom == 0:
        raise ValueError("the input function vanishes; the ratio is undefined")
    return wiener_amalgam_norm(U.apply(f), window, p, q, lat) / denom


def measure_restriction_ratio(U: Propagator | None, f: SampledFunction,
                              nu: RestrictionMeasure, p: float, q: float) -> float:
    """(sum_m w_m |U f(y_m)|^q)^{1/q} / ||f||_p, sup over m when q = inf.

    The solution is evaluated at the support points by band-limited
    interpolation, so the support must stay well inside the grid extent.
    """
    grid = f.grid
    if np.max(np.abs(nu.points)) > 0.9 * grid.half_extent:
        raise ValueError("measure support leaves the reliable region of the grid")
    nf = lp_norm(f, p)
    if nf == 0:
        raise ValueError("the input function vanishes; the ratio is undefined")
    uf = U.apply(f) if U is not None else f
    vals = np.abs(evaluate_at(uf, nu.points))
    if np.isinf(q):
        return float(vals.max()) / nf
    return float(np.sum(nu.weights * vals ** q) ** (1.0 / q)) / nf


# ---------------------------------------------------------------------------
# empirical operator norms (lower bounds)

def empirical_operator_norm(apply_fn: Callable, grid: Grid, p: float, q: float,
                            samples: int = 8, ascent_steps: int = 0, seed: int = 0,
                            adjoint_fn: Callable | None = None,
                            corpus: TestCorpus | None = None,
                            bandwidth: float = 4.0) -> float:
    """Seeded lower bound for the L^p -> L^q norm of a sampled-function map.

    Starts from random band-limited probes (plus an optional corpus),
    then refines the best candidate by normalized ascent: Rayleigh/power
    steps when p = q = 2 and an adjoint is available, otherwise accepted
    random perturbations with a shrinking step.  Deterministic for fixed
    seed; the true norm is never smaller than the value returned.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def ratio(f: SampledFunction) -> float:
        nf = lp_norm(f, p)
        if nf == 0:
            return 0.0
        return lp_norm(apply_fn(f), q) / nf

    candidates = []
    if corpus is not None:
        candidates.extend(corpus.functions())
    for i in range(samples):
        candidates.append(_random_band_limited(grid, [seed, 7919 + i], bandwidth,
                                               envelope_width=0.35 * grid.half_extent))
    best = max(candidates, key=ratio)
    best_ratio = ratio(best)

    if ascent_steps > 0 and p == 2 and q == 2 and adjoint_fn is not None:
        f = best
        for _ in range(ascent_steps):
            g = adjoint_fn(apply_fn(f))
            nrm = g.l2_norm()
            if nrm == 0:
                break
            f = SampledFunction(grid, g.values / nrm)
            best_ratio = max(best_ratio, ratio(f))
        return best_ratio

    if ascent_steps > 0:
        rng = np.random.default_rng([seed, 104729])
        f, eta, stall = best, 0.3, 0
        for _ in range(ascent_steps):
            bump = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
            cand = SampledFunction(grid, f.values + eta * bump * lp_norm(f, p)
                                   / max(np.max(np.abs(bump)), 1e-300))
            if ratio(cand) > best_ratio:
                f, best_ratio, stall = cand, ratio(cand), 0
            else:
                stall += 1
                if stall >= 5:
                    eta, stall = eta * 0.7, 0
    return best_ratio


# ---------------------------------------------------------------------------
# scans and reports

@dataclass
class EstimateReport:
    """Structured record of one scan: rows, fits, and provenance."""

    kind: str
    exponents: tuple
    rows: list                       # dicts with stable key order
    fitted_exponent: float | None
    bound_exponent: float | None
    constant: float | None
    seed: int
    sample_count: int
    extras: dict = field(default_factory=dict)

    def csv_columns(self) -> list:
        return list(self.rows[0].keys()) if self.rows else []

    def summary_lines(self) -> list:
        lines = [f"kind: {self.kind}",
                 f"exponents: {self.exponents}",
                 f"samples: {self.sample_count}",
                 f"seed: {self.seed}"]
        if self.fitted_exponent is not None:
            lines.append(f"fitted_exponent: {self.fitted_exponent:.6f}")
        if self.bound_exponent is not None:
            lines.append(f"bound_exponent: {self.bound_exponent:.6f}")
        if self.constant is not None:
            lines.append(f"constant: {self.constant:.6e}")
        for k in sorted(self.extras):
            lines.append(f"{k}: {self.extras[k]}")
        return lines


def blowup_scan(ham: QuadraticHamiltonian, grid: Grid, p: float, t_list,
                corpus: TestCorpus | None = None,
                cutoff: SampledFunction | None = None,
                estimator: str = "corpus", seed: int = 7,
                detb_guard: float = 1e-3, ascent_steps: int = 60) -> EstimateReport:
    """Scan the localized Fourier-side ratio against the caustic determinant.

    For each time with |det B_t| >= detb_guard the corpus-max (or
    ascent-refined) restriction ratio is recorded together with det B_t;
    the fitted exponent is the slope of log ratio against log |det B_t|,
    to be compared with the bound exponent -(2/p - 1).
    """
    if grid.d != 1:
        raise ValueError("blow-up scans are one-dimensional experiments")
    if corpus is None:
        corpus = standard_corpus(grid, seed=seed)
    if cutoff is None:
        cutoff = schwartz_cutoff(grid)
    evolution = HermitianEvolution(weyl_quantize(quadratic_symbol(ham), grid).matrix, grid)
    rows = []
    kept_t, kept_det, kept_ratio = [], [], []
    for t in t_list:
        dB = det_b(quadratic_flow(ham, t))
        if abs(dB) < detb_guard:
            continue
        U = evolution.propagator(t)
        if estimator == "corpus":
            r = max(restriction_ratio(U, f, cutoff, p) for f in corpus.functions())
        elif estimator == "empirical":
            adjoint = None
            if p == 2:
                Umat = U.matrix

                def adjoint(g, Umat=Umat):
                    from .grids import inverse_fourier_transform
                    h = inverse_fourier_transform(g) * (TWO_PI ** grid.d)
                    h = SampledFunction(grid, np.conj(cutoff.values) * h.values)
                    return SampledFunction(grid, Umat.conj().T @ h.values)

            def forward(f, U=U):
                uf = U.apply(f)
                return fourier_transform(SampledFunction(grid, uf.values * cutoff.values))

            r = empirical_operator_norm(forward, grid, p, p, samples=6,
                                        ascent_steps=ascent_steps, seed=seed,
                                        adjoint_fn=adjoint, corpus=corpus)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        kept_t.append(t)
        kept_det.append(dB)
        kept_ratio.append(r)
    if not kept_t:
        raise ValueError("every requested time is exceptional under the guard band")
    kept_det = np.asarray(kept_det)
    kept_ratio = np.asarray(kept_ratio)
    bound_exp = -(2.0 / p - 1.0)
    c0 = float(np.max(kept_ratio * np.abs(kept_det) ** (2.0 / p - 1.0)))
    if len(kept_t) >= 2 and np.ptp(np.log(np.abs(kept_det))) > 1e-12:
        slope = np.polyfit(np.log(np.abs(kept_det)), np.log(kept_ratio), 1)[0]
    else:
        slope = 0.0
    for t, dB, r in zip(kept_t, kept_det, kept_ratio):
        rows.append({"t": t, "detB": dB, "ratio": r,
                     "bound": c0 * abs(dB) ** bound_exp})
    return EstimateReport(kind="blowup", exponents=(p,), rows=rows,
                          fitted_exponent=float(slope), bound_exponent=bound_exp,
                          constant=c0, seed=seed, sample_count=len(corpus),
                          extras={"estimator": estimator,
                                  "detb_guard": detb_guard})


def dispersive_scan(make_propagator: Callable, grid: Grid, p: float, q: float,
                    t_list, window: Window, lat: PhaseLattice | None = None,
                    corpus: TestCorpus | None = None, seed: int = 7,
                    detb_values=None) -> EstimateReport:
    """Corpus-max amalgam ratio against time (and optionally det B_t)."""
    if corpus is None:
        corpus = standard_corpus(grid, seed=seed)
    rows = []
    ratios = []
    for i, t in enumerate(t_list):
        U = make_propagator(t)
        r = max(dispersive_ratio(U, f, p, q, window, lat) for f in corpus.functions())
        ratios.append(r)
        row = {"t": t, "ratio": r}
        if detb_values is not None:
            row["detB"] = detb_values[i]
        rows.append(row)
    ts = np.asarray(t_list, dtype=float)
    ratios = np.asarray(ratios)
    slope = None
    if len(ts) >= 2 and np.all(ts > 0):
        slope = float(np.polyfit(np.log(ts), np.log(ratios), 1)[0])
    return EstimateReport(kind="dispersive", exponents=(p, q), rows=rows,
                          fitted_exponent=slope,
                          bound_exponent=-(1.0 / p - 1.0 / q),
                          constant=float(np.max(ratios)), seed=seed,
                          sample_count=len(corpus))


def transference_chain(U: Propagator, corpus: TestCorpus,
                       cutoff: SampledFunction, p: float, window: Window,
                       lat: PhaseLattice | None = None) -> dict:
    """Per-function link ratios of the localization chain.

    ||F(phi U f)||_p <= C ||phi U f||_{W^{p,p}}
                     <= C' ||phi||_{W^{1,q}} ||U f||_{W^{p,p'}}
                     <= C'' ||f||_p,
    with 1/q = 1/p - 1/p'.  Each link is returned as a measured ratio;
    the chain telescopes, so the product of links times the multiplier
    norm reproduces the restriction ratio exactly.
    """
    if not (1 <= p <= 2):
        raise ValueError("p must lie in [1, 2]")
    pprime = np.inf if p == 1 else p / (p - 1)
    qmult = 1.0 / (1.0 / p - (0.0 if np.isinf(pprime) else 1.0 / pprime))
    phi_norm = wiener_amalgam_norm(cutoff, window, 1, qmult, lat)
    out = {"phi_W1q": phi_norm, "links": []}
    for name, f in corpus:
        uf = U.apply(f)
        phiuf = SampledFunction(f.grid, uf.values * cutoff.values)
        n_restr = lp_norm(fourier_transform(phiuf), p)
        n_wpp = wiener_amalgam_norm(phiuf, window, p, p, lat)
        n_disp_out = wiener_amalgam_norm(uf, window, p, pprime, lat)
        n_disp_in = wiener_amalgam_norm(f, window, pprime, p, lat)
        n_lp = lp_norm(f, p)
        out["links"].append({
            "name": name,
            "fourier_vs_wpp": n_restr / n_wpp,
            "multiplication": n_wpp / (phi_norm * n_disp_out),
            "dispersive": n_disp_out / n_disp_in,
            "embedding": n_disp_in / n_lp,
            "restriction": n_restr / n_lp,
        })
    for key in ("fourier_vs_wpp", "multiplication", "dispersive", "embedding"):
        out[f"max_{key}"] = max(link[key] for link in out["links"])
    return out
