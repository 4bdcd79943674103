"""Hamiltonian flows on phase space and their linearizations.

Phase points are z = (x, xi) in R^{2d} and the flow of a Hamiltonian
a(t, z) solves

    dz/dt = J grad_z a(t, z),        J = [[0, I], [-I, 0]].

For a quadratic Hamiltonian a_2(z) = z.Qz / 2 the flow is the linear
symplectic map S_t = exp(t J Q) with block form (A, B; C, D).  General
"tame" Hamiltonians (bounded derivatives of order >= 2) are integrated
with a classical fourth-order one-step method, together with the
variational equation

    dM/dt = J Hess_z a(t, z(t)) M,        M(s) = I,

whose upper-right block is the sensitivity dx/deta that controls the
dispersive constants.  Volume conservation det M = 1 is monitored, not
enforced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm


class FlowDivergenceError(RuntimeError):
    """Raised when a Hamiltonian evaluator produces non-finite output."""


def standard_symplectic_matrix(d: int) -> np.ndarray:
    """J = [[0, I], [-I, 0]] acting on (x, xi) blocks."""
    J = np.zeros((2 * d, 2 * d))
    J[:d, d:] = np.eye(d)
    J[d:, :d] = -np.eye(d)
    return J


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """a_2(z) = z.Qz / 2 for a symmetric 2d x 2d matrix Q."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "Q", Q)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] % 2 != 0:
            raise ValueError("Q must be a 2d x 2d matrix")
        if np.max(np.abs(Q - Q.T)) > 1e-12:
            raise ValueError("Q must be symmetric to 1e-12")

    @property
    def d(self) -> int:
        return self.Q.shape[0] // 2

    def value(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", z, self.Q, z)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.Q.T

    def hess(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.broadcast_to(self.Q, z.shape[:-1] + self.Q.shape).copy()


def free_particle(d: int = 1) -> QuadraticHamiltonian:
    """a_2 = |xi|^2 / 2."""
    Q = np.zeros((2 * d, 2 * d))
    Q[d:, d:] = np.eye(d)
    return QuadraticHamiltonian(Q)


def harmonic_oscillator(d: int = 1) -> QuadraticHamiltonian:
    """a_2 = (|x|^2 + |xi|^2) / 2; flow is rotation, caustics at t = k pi."""
    return QuadraticHamiltonian(np.eye(2 * d))


@dataclass(frozen=True)
class SymplecticMatrix:
    """A real 2d x 2d symplectic matrix with block accessors."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        object.__setattr__(self, "m", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0:
            raise ValueError("matrix must be 2d x 2d")

    @property
    def d(self) -> int:
        return self.m.shape[0] // 2

    @property
    def A(self) -> np.ndarray:
        return self.m[: self.d, : self.d]

    @property
    def B(self) -> np.ndarray:
        return self.m[: self.d, self.d:]

    @property
    def C(self) -> np.ndarray:
        return self.m[self.d:, : self.d]

    @property
    def D(self) -> np.ndarray:
        return self.m[self.d:, self.d:]

    def symplectic_defect(self) -> float:
        """max entry of S^T J S - J; zero for exact symplectic matrices."""
        J = standard_symplectic_matrix(self.d)
        return float(np.max(np.abs(self.m.T @ J @ self.m - J)))

    def apply(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.m.T

    def inv(self) -> "SymplecticMatrix":
        # S^{-1} = J^{-1} S^T J for symplectic S; cheaper and exact-er than a solve.
        J = standard_symplectic_matrix(self.d)
        return SymplecticMatrix(-J @ self.m.T @ J)

    def __matmul__(self, other: "SymplecticMatrix") -> "SymplecticMatrix":
        return SymplecticMatrix(self.m @ other.m)


def quadratic_flow(ham: QuadraticHamiltonian | np.ndarray, t: float) -> SymplecticMatrix:
    """S_t = exp(t J Q) via the scaled-and-squared matrix exponential."""
    Q = ham.Q if isinstance(ham, QuadraticHamiltonian) else np.asarray(ham, dtype=float)
    QuadraticHamiltonian(Q)  # validates symmetry
    d = Q.shape[0] // 2
    J = standard_symplectic_matrix(d)
    S = SymplecticMatrix(expm(t * (J @ Q)))
    defect = S.symplectic_defect()
    if defect > 1e-9:
        raise ArithmeticError(f"matrix exponential lost symplecticity: defect {defect:.2e}")
    return S


def det_b(S: SymplecticMatrix) -> float:
    """det of the upper-right block; zero marks an exceptional (caustic) time."""
    B = S.B
    if B.shape == (1, 1):
        return float(B[0, 0])
    return float(np.linalg.det(B))


@dataclass
class TameHamiltonian:
    """Hamiltonian given by evaluators, vectorized over a batch of points.

    value(t, z) -> (...,), grad(t, z) -> (..., 2d), hess(t, z) -> (..., 2d, 2d)
    for z of shape (..., 2d).  derivative_bounds optionally records the
    constants bounding mixed derivatives of order >= 2.
    """

    d: int
    value: Callable
    grad: Callable
    hess: Callable
    derivative_bounds: dict | None = None

    @staticmethod
    def from_quadratic(ham: QuadraticHamiltonian) -> "TameHamiltonian":
        return TameHamiltonian(
            d=ham.d,
            value=lambda t, z: ham.value(z),
            grad=lambda t, z: ham.grad(z),
            hess=lambda t, z: ham.hess(z),
            derivative_bounds={"order2": float(np.max(np.abs(ham.Q)))},
        )


def quadratic_plus_trig(ham: QuadraticHamiltonian, amplitude: float = 1.0,
                        kind: str = "sin") -> TameHamiltonian:
    """a_2(z) + amplitude * sin(x) (or cos(x)); d = 1 perturbed flows."""
    if ham.d != 1:
        raise ValueError("trig perturbations are provided for d = 1")
    fn, dfn, d2fn = {
        "sin": (np.sin, np.cos, lambda x: -np.sin(x)),
        "cos": (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
    }[kind]

    def value(t, z):
        z = np.asarray(z, dtype=float)
        return ham.value(z) + amplitude * fn(z[..., 0])

    def grad(t, z):
        z = np.asarray(z, dtype=float)
        g = ham.grad(z)
        g = np.array(g, dtype=float)
        g[..., 0] += amplitude * dfn(z[..., 0])
        return g

    def hess(t, z):
        z = np.asarray(z, dtype=float)
        H = ham.hess(z)
        H[..., 0, 0] += amplitude * d2fn(z[..., 0])
        return H

    return TameHamiltonian(d=1, value=value, grad=grad, hess=hess,
                           derivative_bounds={"order2": float(np.max(np.abs(ham.Q))) + abs(amplitude)})


@dataclass
class FlowResult:
    """Endpoint and variational Jacobian of an integrated flow."""

    s: float
    t: float
    z: np.ndarray          # (..., 2d)
    jacobian: np.ndarray   # (..., 2d, 2d)
    steps: int

    @property
    def det_drift(self) -> float:
        """max |det M - 1|; symplectic flows preserve phase-space volume."""
        return float(np.max(np.abs(np.linalg.det(self.jacobian) - 1.0)))

    def symplectic_defect(self) -> float:
        d = self.jacobian.shape[-1] // 2
        J = standard_symplectic_matrix(d)
        M = self.jacobian
        R = np.einsum("...ji,jk,...kl->...il", M, J, M) - J
        return float(np.max(np.abs(R)))

    def dx_deta(self) -> np.ndarray:
        """Upper-right block dx/deta of the variational Jacobian."""
        d = self.jacobian.shape[-1] // 2
        return self.jacobian[..., :d, d:]


def integrate_flow(ham: TameHamiltonian, s: float, t: float, z0: np.ndarray,
                   steps: int | None = None) -> FlowResult:
    """Integrate dz/dt = J grad a and dM/dt = J Hess a M from time s to t.

    z0 may be a single point (2d,) or a batch (..., 2d); all trajectories
    advance in lockstep with a classical RK4 step.
    """
    z0 = np.asarray(z0, dtype=float)
    single = z0.ndim == 1
    z = z0[None, :] if single else z0.reshape(-1, z0.shape[-1])
    n2d = z.shape[-1]
    if n2d != 2 * ham.d:
        raise ValueError(f"points must have {2 * ham.d} components")
    if steps is None:
        steps = max(50, int(np.ceil(200 * abs(t - s))))
    if steps < 1:
        raise ValueError("steps must be >= 1")
    J = standard_symplectic_matrix(ham.d)
    M = np.broadcast_to(np.eye(n2d), z.shape[:-1] + (n2d, n2d)).copy()
    dt = (t - s) / steps

    def rhs(tau, zc, Mc):
        g = np.asarray(ham.grad(tau, zc), dtype=float)
        H = np.asarray(ham.hess(tau, zc), dtype=float)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            raise FlowDivergenceError(
                f"non-finite Hamiltonian derivatives at time {tau:.6g}; "
                f"|z| up to {np.max(np.abs(zc)):.3g}")
        dz = np.einsum("ij,...j->...i", J, g)
        dM = np.einsum("ij,...jk,...kl->...il", J, H, Mc)
        return dz, dM

    tau = s
    for _ in range(steps):
        k1z, k1m = rhs(tau, z, M)
        k2z, k2m = rhs(tau + dt / 2, z + dt / 2 * k1z, M + dt / 2 * k1m)
        k3z, k3m = rhs(tau + dt / 2, z + dt / 2 * k2z, M + dt / 2 * k2m)
        k4z, k4m = rhs(tau + dt, z + dt * k3z, M + dt * k3m)
        z = z + dt / 6 * (k1z + 2 * k2z + 2 * k3z + k4z)
        M = M + dt / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
        tau += dt

    if single:
        z, M = z[0], M[0]
    else:
        z = z.reshape(z0.shape)
        M = M.reshape(z0.shape[:-1] + (n2d, n2d))
    return FlowResult(s=s, t=t, z=z, jacobian=M, steps=steps)


@dataclass
class SampledInfimum:
    """min over sampled base points of |det dx/deta|, with provenance.

    A sampled estimate of the lower-bound constant, not a certified
    infimum over all of phase space; the sampling window is recorded by
    the caller alongside the value.
    """

    value: float
    argmin: np.ndarray
    values: np.ndarray

    def __float__(self) -> float:
        return self.value

    @property
    def spread(self) -> float:
        return float(self.values.max() - self.values.min())


def lower_bound_c(ham: TameHamiltonian, t: float, s: float,
                  sample_points: np.ndarray, steps: int | None = None) -> SampledInfimum:
    """Sampled version of inf over (y, eta) of |det dx/deta| for the flow s -> t."""
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    flow = integrate_flow(ham, s, t, pts, steps=steps)
    blocks = flow.dx_deta()
    if blocks.shape[-1] == 1:
        dets = np.abs(blocks[..., 0, 0])
    else:
        dets = np.abs(np.linalg.det(blocks))
    i = int(np.argmin(dets))
    return SampledInfimum(value=float(dets[i]), argmin=pts[i], values=dets)
