"""Time-cosine spectral representation of periodic lattice waves.

A wave is stored through its cosine coefficients in scaled time,
u(tau) = sum_l coeffs[l] * cos(l tau), coeffs[l] being a spatial field.
Even cosine series are closed under the odd nonlinearity, and reversible
breathers have odd harmonics only (u(tau + pi) = -u(tau)); nothing here
assumes that, but solvers exploit it by keeping even rows at zero.

Collocation uses midpoint nodes tau_k = pi (2k+1) / (2M), where synthesis
and analysis are a DCT-III / DCT-II pair.  For integer 2p the nonlinearity
is a polynomial of degree 2p+1 and M >= (p+1)(L+1) makes the projection
onto the kept harmonics alias-free; for fractional powers the integrand is
merely C^(2p+1) in time and M controls a spectrally small aliasing error.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct
from scipy.special import gamma

from .errors import GuardError


def cos_moment(p):
    """c1(p) = int_0^{2pi} |cos t|^(2p) cos^2 t dt = 2 sqrt(pi) G(p+3/2)/G(p+2)."""
    return 2.0 * np.sqrt(np.pi) * gamma(p + 1.5) / gamma(p + 2.0)


def nonlinearity_coefficient(p):
    """Model coupling beta(p) = pi / c1(p).

    Chosen so that the first cosine harmonic of beta |v cos|^(2p) (v cos)
    is exactly |v|^(2p) v; the bifurcation equation then reproduces the NLS
    nonlinearity with unit coefficient.
    """
    return np.pi / cos_moment(p)


def collocation_nodes(M):
    return np.pi * (2.0 * np.arange(M) + 1.0) / (2.0 * M)


def synthesize(coeffs, M):
    """Values sum_l coeffs[l] cos(l tau_k) at the M midpoint nodes (axis 0)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if M < coeffs.shape[0]:
        raise GuardError(f"need M >= {coeffs.shape[0]} nodes, got {M}")
    x = coeffs.copy()
    x[1:] *= 0.5
    return dct(x, type=3, n=M, axis=0)


def analyze(values, L):
    """Cosine coefficients 0..L from midpoint-node values (axis 0)."""
    values = np.asarray(values, dtype=np.float64)
    M = values.shape[0]
    if L >= M:
        raise GuardError(f"cannot resolve harmonic {L} from {M} nodes")
    y = dct(values, type=2, axis=0)[: L + 1]
    y /= M
    y[0] *= 0.5
    return y


def default_node_count(L, p, factor=4):
    """Node count for projecting |u|^(2p) u: alias-free for integer 2p,
    comfortably oversampled otherwise."""
    exact = int(np.ceil((p + 1.0) * (L + 1))) + 1
    return max(factor * (L + 1), exact)


def apply_nonlinearity(coeffs, p, beta=None, M=None, chunk=1 << 17, tail=None):
    """Cosine coefficients 0..L of beta |u|^(2p) u for u given by ``coeffs``.

    Works chunk-wise over the flattened spatial axes so the collocation
    buffer stays bounded for large 2d fields.  If ``tail`` is a dict, the
    relative l2 mass of the discarded harmonics L+1..M-1 is stored under
    'discarded' (diagnostic for choosing L on non-polynomial powers).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    L = coeffs.shape[0] - 1
    if beta is None:
        beta = nonlinearity_coefficient(p)
    if M is None:
        M = default_node_count(L, p)
    # keep the collocation buffer near 128 MB regardless of node count
    chunk = max(1, min(chunk, (1 << 24) // M))
    flat = coeffs.reshape(L + 1, -1)
    out = np.empty_like(flat)
    kept = 0.0
    discarded = 0.0
    want_tail = tail is not None
    for lo in range(0, flat.shape[1], chunk):
        sl = slice(lo, min(lo + chunk, flat.shape[1]))
        v = synthesize(flat[:, sl], M)
        g = beta * np.abs(v) ** (2.0 * p) * v
        full = analyze(g, M - 1) if want_tail else analyze(g, L)
        out[:, sl] = full[: L + 1]
        if want_tail:
            kept += float(np.sum(full[: L + 1] ** 2))
            discarded += float(np.sum(full[L + 1 :] ** 2))
    if want_tail:
        tail["discarded"] = np.sqrt(discarded / kept) if kept > 0.0 else 0.0
    return out.reshape(coeffs.shape)


def project_kernel(coeffs):
    """Spatial field multiplying cos(tau) (the bifurcation direction)."""
    return np.array(coeffs[1], dtype=np.float64)


def project_range(coeffs):
    """Complement of the kernel: all harmonics with the first zeroed."""
    out = np.array(coeffs, dtype=np.float64)
    out[1] = 0.0
    return out


def sobolev_time_norm(coeffs, order=2, omega=1.0):
    """H^order-in-time l2-in-space norm of u(t) = sum coeffs[l] cos(l w t).

    Parseval over one period 2pi/w: the l-th harmonic carries weight
    (2pi/w for l = 0, pi/w otherwise) * sum_{k<=order} (w l)^(2k).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    L = coeffs.shape[0] - 1
    l = np.arange(L + 1, dtype=np.float64)
    weight = np.full(L + 1, np.pi / omega)
    weight[0] = 2.0 * np.pi / omega
    poly = sum((omega * l) ** (2 * k) for k in range(order + 1))
    spatial = np.sum(coeffs.reshape(L + 1, -1) ** 2, axis=1)
    return float(np.sqrt(np.sum(weight * poly * spatial)))


@dataclass
class TimeFourierField:
    """Cosine-series wave on a lattice box: coeffs[l] is the cos(l tau) field."""

    grid: object
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape[1:] != self.grid.shape:
            raise GuardError(
                f"coefficient stack {self.coeffs.shape} does not sit on "
                f"grid {self.grid.shape}"
            )

    @property
    def L_max(self):
        return self.coeffs.shape[0] - 1

    def at_scaled_times(self, tau):
        """Field values at arbitrary scaled times (tau = omega t)."""
        tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
        basis = np.cos(np.outer(tau, np.arange(self.L_max + 1)))
        flat = self.coeffs.reshape(self.L_max + 1, -1)
        return (basis @ flat).reshape((tau.size,) + self.grid.shape)

    def time_derivative_at_scaled_times(self, tau, omega):
        """du/dt at scaled times: -w sum_l l coeffs[l] sin(l tau)."""
        tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
        l = np.arange(self.L_max + 1)
        basis = -omega * l * np.sin(np.outer(tau, l))
        flat = self.coeffs.reshape(self.L_max + 1, -1)
        return (basis @ flat).reshape((tau.size,) + self.grid.shape)
