"""The bifurcation (kernel) equation and its Newton continuation.

Projecting the wave problem onto the cos(tau) harmonic and dividing out the
amplitude scaling leaves, for the kernel profile phi,

    G(phi) = G0(phi) + R(phi) = 0,
    G0(phi) = -(a/mu^2) lap phi + m phi - |phi|^(2p) phi,

where R collects the feedback of the range component,

    R(phi) = -( P1[ N(phi cos + w(phi)) ] - |phi|^(2p) phi ),

with w(phi) the solved range equation and P1 the first cosine coefficient.
The normalization of the model coupling beta makes P1[N(phi cos)] equal to
|phi|^(2p) phi exactly, so R is quadratically small in mu and G0 is the
discrete NLS that converges to the continuum ground state equation.

Newton runs in reduced coordinates (reflection-symmetric orbit basis): the
full Jacobian is exactly singular in the odd sector only up to exponentially
small Peierls-Nabarro splittings, which the reduction removes wholesale.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from .errors import ConvergenceError, GuardError
from .groundstate import check_exponent
from .lattice import (
    dirichlet_energy,
    fold_symmetric,
    laplacian,
    symmetry_basis,
    unfold_symmetric,
)
from .rangesolver import RangeOperator, solve_range_equation
from .timespectral import apply_nonlinearity, nonlinearity_coefficient


@dataclass(frozen=True)
class DnlsProblem:
    """Parameters of the kernel equation on a fixed box."""

    grid: object
    p: float
    mu: float
    coupling: float
    multiplier: float

    def __post_init__(self):
        check_exponent(self.grid.n, self.p)
        if not (0.0 < self.coupling < 0.5):
            raise GuardError(f"coupling must sit in (0, 1/2), got {self.coupling}")
        if not (0.0 < self.mu):
            raise GuardError(f"mu must be positive, got {self.mu}")
        if not (self.multiplier * self.mu**2 < 0.5):
            raise GuardError(
                f"need m mu^2 < 1/2 (got {self.multiplier * self.mu ** 2:.3f}); "
                "the frequency would leave the invertibility window"
            )

    @property
    def omega_sq(self):
        return 1.0 - self.multiplier * self.mu**2

    def apply_g0(self, phi):
        return (
            -(self.coupling / self.mu**2) * laplacian(phi)
            + self.multiplier * phi
            - np.abs(phi) ** (2.0 * self.p) * phi
        )


def lattice_energy(phi, grid, p, coupling):
    """H0 = mu^n [ (a/mu^2) <phi, -lap phi> - (1/(p+1)) sum |phi|^(2p+2) ].

    Together with m * lattice_mass this is the variational functional of the
    kernel equation: grad_phi (H0 + m * mass) = 2 mu^n G0(phi).
    """
    phi = np.asarray(phi, dtype=np.float64)
    mu = grid.mu
    quad = (coupling / mu**2) * dirichlet_energy(phi)
    quart = np.sum(np.abs(phi) ** (2.0 * p + 2.0)) / (p + 1.0)
    return mu**grid.n * (quad - quart)


def lattice_mass(phi, grid):
    """Scaled l2 mass mu^n sum phi^2 (continuum limit: int psi^2 dx)."""
    phi = np.asarray(phi, dtype=np.float64)
    return grid.mu**grid.n * float(np.sum(phi * phi))


def minus_laplacian_matrix(grid):
    mats = []
    for ax in range(grid.n):
        N = grid.axis_length(ax)
        mats.append(
            sparse.diags(
                [-np.ones(N - 1), 2.0 * np.ones(N), -np.ones(N - 1)],
                offsets=[-1, 0, 1],
            )
        )
    if grid.n == 1:
        return mats[0].tocsr()
    eye0 = sparse.identity(grid.axis_length(0))
    eye1 = sparse.identity(grid.axis_length(1))
    return (sparse.kron(mats[0], eye1) + sparse.kron(eye0, mats[1])).tocsr()


def g0_jacobian(phi, prob):
    """Sparse G0'(phi) = (a/mu^2)(-lap) + m - (2p+1)|phi|^(2p), full coords."""
    phi = np.asarray(phi, dtype=np.float64)
    diag = prob.multiplier - (2.0 * prob.p + 1.0) * np.abs(phi.ravel()) ** (
        2.0 * prob.p
    )
    return (prob.coupling / prob.mu**2) * minus_laplacian_matrix(
        prob.grid
    ) + sparse.diags(diag)


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residuals: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    jacobian_mode: str = "full"
    range_iterations: int = 0


def _newton_reduced(
    phi0, prob, residual, jacobian, tol, max_iter, max_backtracks=8
):
    """Damped Newton in the reflection-symmetric orbit basis."""
    grid = prob.grid
    B = symmetry_basis(grid)
    x = fold_symmetric(np.asarray(phi0, dtype=np.float64), grid)
    phi = unfold_symmetric(x, grid)
    G = residual(phi)
    res = float(np.linalg.norm(fold_symmetric(G, grid)))
    report = NewtonReport(converged=False, iterations=0, residuals=[res])
    scale = max(1.0, float(np.linalg.norm(x)))
    for iteration in range(1, max_iter + 1):
        if res <= tol * scale:
            report.converged = True
            break
        J_red = (B.T @ jacobian(phi) @ B).tocsc()
        step = splu(J_red).solve(fold_symmetric(G, grid))
        lam = 1.0
        for _ in range(max_backtracks):
            x_try = x - lam * step
            phi_try = unfold_symmetric(x_try, grid)
            G_try = residual(phi_try)
            res_try = float(np.linalg.norm(fold_symmetric(G_try, grid)))
            if res_try < res or res_try <= tol * scale:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(
                f"Newton line search exhausted at iteration {iteration} "
                f"(residual {res:.3e})"
            )
        x, phi, G, res = x_try, phi_try, G_try, res_try
        report.iterations = iteration
        report.residuals.append(res)
        report.step_norms.append(float(np.linalg.norm(lam * step)))
    else:
        if res > tol * scale:
            raise ConvergenceError(
                f"Newton not converged in {max_iter} iterations "
                f"(residual {res:.3e})"
            )
        report.converged = True
    return phi, report


def solve_dnls_ground_state(prob, phi0, tol=1e-12, max_iter=40):
    """Newton solve of the pure discrete NLS equation G0(phi) = 0."""
    phi, report = _newton_reduced(
        phi0,
        prob,
        residual=prob.apply_g0,
        jacobian=lambda phi: g0_jacobian(phi, prob),
        tol=tol,
        max_iter=max_iter,
    )
    return phi, report


def kernel_remainder(phi, prob, op, w_init=None, beta=None, **range_kwargs):
    """R(phi) and the range component behind it.

    Returns (R, w, range_report); R = -(P1[N(phi cos + w)] - |phi|^(2p) phi).
    """
    phi = np.asarray(phi, dtype=np.float64)
    if beta is None:
        beta = nonlinearity_coefficient(prob.p)
    w, range_report = solve_range_equation(
        phi, op, prob.p, prob.mu, beta=beta, w_init=w_init, **range_kwargs
    )
    u = np.array(w)
    u[1] = phi
    first = apply_nonlinearity(u, prob.p, beta=beta)[1]
    R = -(first - np.abs(phi) ** (2.0 * prob.p) * phi)
    return R, w, range_report


def solve_kernel_equation(
    phi0,
    prob,
    L_max=8,
    jacobian="auto",
    tol=1e-11,
    max_iter=30,
    fd_step=1e-6,
    beta=None,
    range_kwargs=None,
):
    """Newton continuation of G(phi) = G0(phi) + R(phi) = 0 from phi0.

    jacobian='full' adds finite-difference columns of R to the exact G0
    part (quadratic convergence; affordable when the reduced dimension is
    moderate).  jacobian='g0' drops R' (it is O(mu^2) small), trading a few
    extra linearly-convergent iterations for not re-solving the range
    equation per basis direction -- the only viable mode in 2d.  'auto'
    picks by reduced dimension.

    Returns (phi, w, report, range_op).
    """
    grid = prob.grid
    if beta is None:
        beta = nonlinearity_coefficient(prob.p)
    range_kwargs = dict(range_kwargs or {})
    op = RangeOperator(grid, L_max, prob.omega_sq, prob.coupling)
    reduced_dim = (grid.K + 1) ** grid.n
    if jacobian == "auto":
        jacobian = "full" if reduced_dim <= 1500 else "g0"
    if jacobian not in ("full", "g0"):
        raise GuardError(f"unknown jacobian mode {jacobian!r}")

    state = {"w": None, "range_iters": 0}

    def residual(phi):
        R, w, rep = kernel_remainder(
            phi, prob, op, w_init=state["w"], beta=beta, **range_kwargs
        )
        state["w"] = w
        state["range_iters"] += rep.iterations
        return prob.apply_g0(phi) + R

    def jac(phi):
        J = g0_jacobian(phi, prob)
        if jacobian == "g0":
            return J
        # finite-difference columns of the remainder in the orbit basis
        B = symmetry_basis(grid)
        h = fd_step * (1.0 + float(np.linalg.norm(phi)))
        R0, w0, _ = kernel_remainder(
            phi, prob, op, w_init=state["w"], beta=beta, **range_kwargs
        )
        cols = np.empty((reduced_dim, reduced_dim))
        for r in range(reduced_dim):
            e = np.zeros(reduced_dim)
            e[r] = h
            phi_r = phi + unfold_symmetric(e, grid)
            R_r, _, _ = kernel_remainder(
                phi_r, prob, op, w_init=w0, beta=beta, **range_kwargs
            )
            cols[:, r] = fold_symmetric((R_r - R0) / h, grid)
        # lift the reduced remainder block back to full coordinates so the
        # caller-side reduction B^T (.) B reproduces it exactly
        return J + B @ sparse.csr_matrix(cols) @ B.T

    phi, report = _newton_reduced(
        phi0, prob, residual=residual, jacobian=jac, tol=tol, max_iter=max_iter
    )
    report.jacobian_mode = jacobian
    report.range_iterations = state["range_iters"]
    # final range component consistent with the returned phi
    _, w, _ = kernel_remainder(
        phi, prob, op, w_init=state["w"], beta=beta, **range_kwargs
    )
    return phi, w, report, op


@dataclass
class HessianDiagnostics:
    curvature_along_solution: float
    predicted_curvature: float
    tangent_min_eigenvalue: float
    min_abs_eigenvalue: float


def hessian_diagnostics(phi, prob, dense_limit=2500):
    """Spectral structure of G0' at a solution, in reduced coordinates.

    The solution direction is a strict descent direction:
    <G0'(phi) phi, phi> = -2p sum |phi|^(2p+2) (exact at solutions); on the
    orthogonal complement the operator should be positive definite, which
    is the nondegeneracy condition behind the continuation.
    """
    phi = np.asarray(phi, dtype=np.float64)
    grid = prob.grid
    B = symmetry_basis(grid)
    J_red = (B.T @ g0_jacobian(phi, prob) @ B).tocsc()
    x = fold_symmetric(phi, grid)
    curvature = float(x @ (J_red @ x))
    predicted = -2.0 * prob.p * float(np.sum(np.abs(phi) ** (2.0 * prob.p + 2.0)))
    q = x / np.linalg.norm(x)
    dim = x.size
    # restricting to the orthogonal complement of q is exact when done as
    # P J P (P the projector): on q-perp this is the compression of J, and
    # shifting the q direction upward keeps it out of the bottom spectrum
    if dim <= dense_limit:
        dense = J_red.toarray()
        evals = np.linalg.eigvalsh(dense)
        min_abs = float(np.min(np.abs(evals)))
        shift = 10.0 * float(np.max(np.abs(evals)))
        P = np.eye(dim) - np.outer(q, q)
        deflated = P @ dense @ P + shift * np.outer(q, q)
        tangent_min = float(np.linalg.eigvalsh(deflated)[0])
    else:
        evals = eigsh(J_red, k=4, sigma=0.0, return_eigenvectors=False)
        min_abs = float(np.min(np.abs(evals)))
        shift = 10.0 * float(abs(eigsh(J_red, k=1, return_eigenvectors=False)[0]))
        from scipy.sparse.linalg import LinearOperator

        def deflated_matvec(v):
            pv = v - q * np.dot(q, v)
            w = J_red @ pv
            return w - q * np.dot(q, w) + shift * q * np.dot(q, v)

        defl = LinearOperator((dim, dim), matvec=deflated_matvec, dtype=np.float64)
        tangent_min = float(eigsh(defl, k=1, which="SA", return_eigenvectors=False)[0])
    return HessianDiagnostics(
        curvature_along_solution=curvature,
        predicted_curvature=predicted,
        tangent_min_eigenvalue=tangent_min,
        min_abs_eigenvalue=min_abs,
    )
