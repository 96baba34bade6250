"""Inversion of the wave operator away from the bifurcating harmonic, and
the contraction solve of the range equation.

In scaled time tau = omega t the linearization of the lattice wave problem
acts per cosine harmonic as the symbol

    sigma(l, s) = 1 - omega^2 l^2 + a s,

where s runs over the spectrum of minus the Dirichlet Laplacian of the box
(DST-I modes, s in (0, 4n)).  Harmonic l = 1 carries the bifurcation and is
excluded; every other harmonic is boundedly invertible as long as no
sigma(l, .) comes close to zero, which the constructor checks and reports
(ResonanceError names the offending l).

The range component w of a wave u = mu^(1/p) (phi cos tau + w) then solves
the fixed-point problem

    w = mu^2 Linv P_range beta |phi cos + w|^(2p) (phi cos + w),

a contraction for small amplitudes; solve_range_equation iterates it with a
rate guard and an a-priori smallness estimate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dstn, idstn

from .errors import ConvergenceError, GuardError, ResonanceError
from .lattice import laplacian
from .timespectral import (
    apply_nonlinearity,
    nonlinearity_coefficient,
    sobolev_time_norm,
)


class RangeOperator:
    """Per-harmonic spectral inverse of L = omega^2 d_tautau + I - a lap."""

    def __init__(self, grid, L_max, omega_sq, coupling, resonance_margin=1e-8):
        if not (0.0 < coupling < 0.5):
            raise GuardError(f"need coupling in (0, 1/2), got {coupling}")
        if not (abs(omega_sq - 1.0) < 0.5):
            raise GuardError(
                f"need |omega^2 - 1| < 1/2 for invertibility, got {omega_sq}"
            )
        self.grid = grid
        self.L_max = int(L_max)
        self.omega_sq = float(omega_sq)
        self.coupling = float(coupling)
        axes_eigs = []
        for ax in range(grid.n):
            N = grid.axis_length(ax)
            k = np.arange(1, N + 1)
            axes_eigs.append(2.0 - 2.0 * np.cos(np.pi * k / (N + 1)))
        if grid.n == 1:
            self._s = axes_eigs[0]
        else:
            self._s = axes_eigs[0][:, None] + axes_eigs[1][None, :]
        # invertibility margin over the range harmonics
        self.spectral_margin = np.inf
        self.worst_harmonic = None
        for l in range(self.L_max + 1):
            if l == 1:
                continue
            m = float(np.min(np.abs(self.symbol(l))))
            if m < resonance_margin:
                raise ResonanceError(l, m)
            if m < self.spectral_margin:
                self.spectral_margin = m
                self.worst_harmonic = l
        # margin of the naive Neumann-series bound (diagnostic only: the
        # direct per-mode inversion above does not rely on it)
        self.neumann_margin = 1.0 - self.coupling * float(np.max(self._s))

    def symbol(self, l):
        return (1.0 - self.omega_sq * l * l) + self.coupling * self._s

    def apply(self, coeffs):
        """Forward operator, all harmonics (including l = 1)."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        spatial_axes = tuple(range(1, coeffs.ndim))
        out = -self.coupling * laplacian(coeffs, axes=spatial_axes)
        l = np.arange(coeffs.shape[0], dtype=np.float64)
        factors = 1.0 - self.omega_sq * l * l
        out += factors.reshape((-1,) + (1,) * self.grid.n) * coeffs
        return out

    def solve(self, coeffs):
        """L^-1 restricted to the range: harmonic 1 of the input is
        discarded and comes back as zero."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        out = np.zeros_like(coeffs)
        axes = tuple(range(self.grid.n))
        for l in range(coeffs.shape[0]):
            if l == 1 or not np.any(coeffs[l]):
                continue
            hat = dstn(coeffs[l], type=1, norm="ortho", axes=axes)
            hat /= self.symbol(l)
            out[l] = idstn(hat, type=1, norm="ortho", axes=axes)
        return out


@dataclass
class RangeReport:
    converged: bool
    iterations: int
    final_update: float
    contraction_rate: float
    smallness: float
    spectral_margin: float
    neumann_margin: float
    w_norm: float
    forcing_norm: float = np.nan  # X0 norm of the nonlinearity at w = 0
    response_ratio: float = np.nan  # w_norm / forcing_norm (bounded-inverse check)
    tail_fraction: float = np.nan
    updates: list = field(default_factory=list, repr=False)

    def to_dict(self):
        out = dict(self.__dict__)
        out["updates"] = [float(u) for u in self.updates]
        return out


def solve_range_equation(
    phi,
    op,
    p,
    mu,
    beta=None,
    w_init=None,
    tol=1e-12,
    max_iter=200,
    rate_guard=0.9,
    smallness_threshold=0.1,
    collocation=None,
    tail_check=False,
):
    """Picard iteration for the range component given the kernel profile.

    Returns (w, RangeReport); w is the coefficient stack with w[1] = 0.
    Raises GuardError when the a-priori contraction estimate exceeds
    ``smallness_threshold`` and ConvergenceError on observed divergence.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if beta is None:
        beta = nonlinearity_coefficient(p)
    L = op.L_max
    v = np.zeros((L + 1,) + op.grid.shape)
    v[1] = phi

    # crude contraction estimate: Lipschitz constant of the projected
    # nonlinearity over the inversion margin, at the kernel amplitude
    amp = float(np.max(np.abs(phi)))
    smallness = (
        mu**2 * beta * (2.0 * p + 1.0) * amp ** (2.0 * p) / op.spectral_margin
    )
    if smallness > smallness_threshold:
        raise GuardError(
            f"amplitude outside the contraction regime: estimate "
            f"{smallness:.3f} > {smallness_threshold} (mu = {mu})"
        )

    # forcing strength: X0 size of the nonlinearity before any range
    # feedback (the bounded-inverse diagnostic divides w's size by this)
    forcing_norm = mu**2 * sobolev_time_norm(
        apply_nonlinearity(v, p, beta=beta, M=collocation), order=0
    )

    w = np.zeros_like(v) if w_init is None else np.array(w_init, dtype=np.float64)
    tail = {} if tail_check else None
    updates = []
    rate = np.nan
    bad_steps = 0
    converged = False
    for iteration in range(1, max_iter + 1):
        g = apply_nonlinearity(v + w, p, beta=beta, M=collocation, tail=tail)
        g[1] = 0.0
        w_next = mu**2 * op.solve(g)
        delta = sobolev_time_norm(w_next - w)
        updates.append(delta)
        w = w_next
        scale = max(1.0, sobolev_time_norm(w))
        if delta <= tol * scale:
            converged = True
            break
        # judge contraction only while updates sit well above the target
        # floor; ratios of roundoff-sized updates mean nothing
        if delta > 10.0 * tol * scale and len(updates) >= 2 and updates[-2] > 0.0:
            rate = updates[-1] / updates[-2]
            if rate >= 1.0:
                bad_steps += 1
                if bad_steps >= 3:
                    raise ConvergenceError(
                        f"range iteration diverging: update ratio {rate:.3f} "
                        f"at step {iteration}"
                    )
            elif rate > rate_guard:
                raise GuardError(
                    f"range iteration contracting too slowly: observed rate "
                    f"{rate:.3f} > {rate_guard}"
                )
            else:
                bad_steps = 0
    if not converged:
        raise ConvergenceError(f"range iteration not converged in {max_iter} steps")

    report = RangeReport(
        converged=True,
        iterations=len(updates),
        final_update=updates[-1],
        contraction_rate=rate,
        smallness=smallness,
        spectral_margin=op.spectral_margin,
        neumann_margin=op.neumann_margin,
        w_norm=sobolev_time_norm(w),
        forcing_norm=forcing_norm,
        response_ratio=sobolev_time_norm(w) / forcing_norm if forcing_norm else 0.0,
        tail_fraction=tail["discarded"] if tail_check else np.nan,
        updates=updates,
    )
    return w, report


def leading_range_response(phi, op, p, mu, beta=None, collocation=None):
    """First Picard iterate w0 = mu^2 Linv P_range N(phi cos tau): the
    explicit leading-order part of the range component."""
    phi = np.asarray(phi, dtype=np.float64)
    if beta is None:
        beta = nonlinearity_coefficient(p)
    v = np.zeros((op.L_max + 1,) + op.grid.shape)
    v[1] = phi
    g = apply_nonlinearity(v, p, beta=beta, M=collocation)
    g[1] = 0.0
    return mu**2 * op.solve(g)
