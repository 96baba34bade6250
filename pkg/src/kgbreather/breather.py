"""End-to-end assembly of small-amplitude lattice breathers.

The pipeline chains the pieces in their natural order: continuum ground
state -> lattice sampling -> Newton solve of the discrete NLS equation ->
Newton continuation of the full kernel equation (with the range component
resolved by contraction inside every residual evaluation) -> one final
range pass, optionally with a longer harmonic tail, so the reported
breather and its convergence report always belong together.

Physical units: the breather is q_j(t) = sum_l coeffs[l, j] cos(l omega t)
with omega^2 = 1 - m mu^2.  The first harmonic is exactly mu^(1/p) phi by
construction (the range projector zeroes l = 1), so the kernel profile can
be read back off the assembled coefficients at any time.

Accuracy is always reported against the continuum reference field
Psi = mu^(1/p) psi(mu (j + offset) / sqrt(a)) cos(omega t): the sup and
H2-in-time distances to it are the quantities whose mu -> 0 slopes the
scaling study fits.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConvergenceError, FormatError, GuardError
from .groundstate import check_exponent, sample_reference, solve_ground_state
from .kernelsolver import (
    DnlsProblem,
    kernel_remainder,
    solve_dnls_ground_state,
    solve_kernel_equation,
)
from .lattice import (
    GridSpec,
    SymmetricSequence,
    laplacian,
    mode_offsets,
    norm_l2_mu,
    norm_q,
    norm_q_mu,
)
from .rangesolver import RangeOperator, solve_range_equation
from .timespectral import (
    analyze,
    collocation_nodes,
    default_node_count,
    nonlinearity_coefficient,
    sobolev_time_norm,
    synthesize,
)

# short mode codes (CLI spelling) -> descriptive lattice mode names
MODE_LABELS = {
    1: {"st": "site", "p": "bond"},
    2: {"st": "site", "h1": "bond-y", "h2": "bond-x", "p": "plaquette"},
}

_MAGIC = b"KGBR"
_VERSION = 1


@dataclass
class PipelineConfig:
    """Everything the assembly needs, with research-grade defaults."""

    n: int
    p: float
    coupling: float
    mu: float
    mode: str = "st"
    l_max: int = 15  # harmonic window for the kernel continuation
    r_min: float = 80.0  # physical truncation radius (sets K = ceil(r_min/mu))
    tol: float = 1e-12  # range-equation contraction tolerance
    kernel_tol: float = 1e-11  # Newton tolerance on the kernel equation
    residual_l_max: int = 0  # wider window for the final range pass (0 = l_max)
    residual_target: float = 0.0  # when > 0, widen that window automatically
    collocation_factor: int = 4
    jacobian: str = "auto"

    def __post_init__(self):
        check_exponent(self.n, self.p)
        if not (0.0 < self.coupling < 0.5):
            raise GuardError(f"coupling must sit in (0, 1/2), got {self.coupling}")
        if not (0.0 < self.mu):
            raise GuardError(f"mu must be positive, got {self.mu}")
        if self.mode not in MODE_LABELS[self.n]:
            raise GuardError(
                f"unknown mode {self.mode!r} for n={self.n}; choose from "
                f"{sorted(MODE_LABELS[self.n])}"
            )
        if self.l_max < 3:
            raise GuardError("need at least harmonics 0..3 to see the range part")
        if self.residual_l_max and self.residual_l_max < self.l_max:
            raise GuardError("residual_l_max must be >= l_max (or 0 to disable)")
        if self.residual_target < 0.0:
            raise GuardError("residual_target must be >= 0")

    @property
    def offsets(self):
        return mode_offsets(self.n, MODE_LABELS[self.n][self.mode])

    def make_grid(self):
        return GridSpec.for_radius(
            self.n, mu=self.mu, r_min=self.r_min, offsets=self.offsets
        )


@dataclass
class Breather:
    """Assembled breather: physical cosine coefficients plus provenance."""

    grid: GridSpec
    p: float
    coupling: float
    mu: float
    mode: str
    multiplier: float
    omega: float
    coeffs: np.ndarray = field(repr=False)  # (L_max+1, *grid.shape), physical
    phi: np.ndarray = field(repr=False)  # kernel profile, scaled units
    phi_dnls: np.ndarray = field(repr=False)  # pure discrete-NLS solution
    w_hat: np.ndarray = field(repr=False)  # range stack, scaled units
    reports: dict = field(default_factory=dict, repr=False)

    @property
    def L_max(self):
        return self.coeffs.shape[0] - 1

    @property
    def beta(self):
        return nonlinearity_coefficient(self.p)

    @property
    def harmonic_one(self):
        return self.coeffs[1]

    @property
    def period(self):
        return 2.0 * np.pi / self.omega

    def symmetry_error(self):
        """Largest reflection asymmetry across all harmonics, relative to
        the overall amplitude."""
        scale = float(np.max(np.abs(self.coeffs)))
        if scale == 0.0:
            return 0.0
        worst = max(
            SymmetricSequence(self.grid, c).asymmetry() for c in self.coeffs
        )
        return worst / scale


def _window_for_residual(phi, w_hat, grid, config, beta, target):
    """Harmonic window needed for a truncation residual below ``target``.

    The cosine spectrum of N(u) = beta |u|^(2p) u beyond the kept window
    becomes equation residual one-for-one.  For non-polynomial powers the
    |.|^(2p) kink makes that tail decay like C / l^3; C is calibrated from
    the measured spectrum just above the working window, and the window is
    widened until sum_{l > L} C / l^3 ~ C / (4 L^2) <= target / 2.  For
    polynomial powers (integer 2p) the measured tail is already roundoff
    and the working window stands.
    """
    l_max = config.l_max
    amplitude = config.mu ** (1.0 / config.p)
    u = amplitude * w_hat
    u[1] += amplitude * phi
    M = 8 * (l_max + 1)
    flat = u.reshape(l_max + 1, -1)
    sup_per_l = np.zeros(M - 1 + 1)
    chunk = max(1, min(1 << 17, (1 << 24) // M))
    for lo in range(0, flat.shape[1], chunk):
        sl = slice(lo, min(lo + chunk, flat.shape[1]))
        vals = synthesize(flat[:, sl], M)
        g = beta * np.abs(vals) ** (2.0 * config.p) * vals
        spectrum = analyze(g, M - 1)
        np.maximum(
            sup_per_l, np.max(np.abs(spectrum), axis=1), out=sup_per_l
        )
    cal = np.arange(l_max + 2, min(3 * l_max + 1, M - 1), 2)
    C = float(np.max(sup_per_l[cal] * cal.astype(float) ** 3))
    if C <= 2.0 * target * l_max**2:
        return l_max
    L = int(np.ceil(np.sqrt(C / (2.0 * target))))
    if (L + 1) * grid.size > (1 << 27):
        raise GuardError(
            f"residual target {target:.1e} wants a harmonic window of "
            f"{L}; stack would not fit in memory on this grid"
        )
    return L


def assemble_breather(config: PipelineConfig):
    """Run the full pipeline deterministically; same config, same bits."""
    grid = config.make_grid()
    profile = solve_ground_state(config.n, config.p)
    reference = sample_reference(profile, grid, coupling=config.coupling)
    prob = DnlsProblem(
        grid=grid,
        p=config.p,
        mu=config.mu,
        coupling=config.coupling,
        multiplier=profile.multiplier,
    )
    beta = nonlinearity_coefficient(config.p)

    phi_dnls, dnls_report = solve_dnls_ground_state(
        prob, reference.values, tol=config.kernel_tol
    )

    range_kwargs = {
        "tol": config.tol,
        "collocation": default_node_count(
            config.l_max, config.p, factor=config.collocation_factor
        ),
    }
    phi, w_hat, kernel_report, op = solve_kernel_equation(
        phi_dnls,
        prob,
        L_max=config.l_max,
        jacobian=config.jacobian,
        tol=config.kernel_tol,
        beta=beta,
        range_kwargs=range_kwargs,
    )

    # final range pass: fresh report for the returned profile and, when
    # asked, a longer harmonic tail (cheap: warm start, feedback of the
    # extra harmonics onto the low ones is far below tolerance)
    L_res = config.residual_l_max or config.l_max
    if config.residual_target > 0.0 and not config.residual_l_max:
        L_res = max(
            L_res,
            _window_for_residual(
                phi, w_hat, grid, config, beta, config.residual_target
            ),
        )
    if L_res > config.l_max:
        op = RangeOperator(grid, L_res, prob.omega_sq, config.coupling)
        w_wide = np.zeros((L_res + 1,) + grid.shape)
        w_wide[: config.l_max + 1] = w_hat
        w_hat = w_wide
    residual_kwargs = {
        "tol": config.tol,
        "collocation": default_node_count(
            L_res, config.p, factor=config.collocation_factor
        ),
    }
    w_hat, range_report = solve_range_equation(
        phi,
        op,
        config.p,
        config.mu,
        beta=beta,
        w_init=w_hat,
        tail_check=True,
        **residual_kwargs,
    )

    # kernel-equation residual consistent with the final range component
    R, _, _ = kernel_remainder(
        phi, prob, op, w_init=w_hat, beta=beta, **residual_kwargs
    )
    g_residual = prob.apply_g0(phi) + R

    amplitude = config.mu ** (1.0 / config.p)
    coeffs = amplitude * w_hat
    coeffs[1] = amplitude * phi  # w_hat[1] is identically zero

    reports = {
        "config": asdict(config),
        "grid": {"K": grid.K, "size": grid.size, "offsets": list(grid.offsets)},
        "profile": {
            "multiplier": profile.multiplier,
            "amplitude": profile.amplitude,
            "el_residual": profile.el_residual,
        },
        "dnls_newton": asdict(dnls_report),
        "kernel_newton": asdict(kernel_report),
        "range": range_report.to_dict(),
        "kernel_residual_sup": float(np.max(np.abs(g_residual))),
        "remainder_norm_mu": norm_l2_mu(R, grid),
        "dist_phi_dnls": norm_q_mu(phi - phi_dnls, grid),
        "dist_dnls_ref": norm_q_mu(phi_dnls - reference.values, grid),
    }

    b = Breather(
        grid=grid,
        p=config.p,
        coupling=config.coupling,
        mu=config.mu,
        mode=config.mode,
        multiplier=profile.multiplier,
        omega=float(np.sqrt(prob.omega_sq)),
        coeffs=coeffs,
        phi=phi,
        phi_dnls=phi_dnls,
        w_hat=w_hat,
        reports=reports,
    )
    reports["symmetry_error"] = b.symmetry_error()
    return b


def reference_profile(b: Breather):
    """Sampled continuum profile psi on b's grid (scaled units)."""
    profile = solve_ground_state(b.grid.n, b.p)
    return sample_reference(profile, b.grid, coupling=b.coupling)


def reference_coefficients(b: Breather):
    """Continuum reference Psi as a coefficient stack on b's grid: the
    sampled NLS profile rides the first harmonic alone."""
    coeffs = np.zeros_like(b.coeffs)
    coeffs[1] = b.mu ** (1.0 / b.p) * reference_profile(b).values
    return coeffs


def kg_residual(b: Breather, time_nodes=None):
    """Sup over sites and collocation times of the lattice field equation
    applied to the breather:

        max | q_tt - a (lap q) + q - beta |q|^(2p) q |

    evaluated on >= 4 (L_max + 1) equispaced times (enough that the cubic
    image of the harmonic window is sampled alias-free).
    """
    L = b.L_max
    M = time_nodes if time_nodes is not None else 4 * (L + 1)
    if M < 4 * (L + 1):
        raise GuardError(
            f"residual wants >= {4 * (L + 1)} time nodes for L_max={L}, got {M}"
        )
    tau = collocation_nodes(M)
    l = np.arange(L + 1)
    cos_basis = np.cos(np.outer(tau, l))
    acc_basis = -((b.omega * l) ** 2) * cos_basis
    flat = b.coeffs.reshape(L + 1, -1)
    worst = 0.0
    for m in range(M):
        q = (cos_basis[m] @ flat).reshape(b.grid.shape)
        q_tt = (acc_basis[m] @ flat).reshape(b.grid.shape)
        res = (
            q_tt
            - b.coupling * laplacian(q)
            + q
            - b.beta * np.abs(q) ** (2.0 * b.p) * q
        )
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


@dataclass
class ErrorReport:
    """Distances between the breather and the continuum reference field."""

    e_h2: float  # H2-in-time, plain l2 in space
    e_sup: float  # sup over sites and times
    sup_bound: float  # 2 sqrt(mu) sum_l ||diff_l||_Q (must dominate e_sup)
    w_x2: float  # X2 size of the physical range part
    harmonic_fraction: float  # l2 share of the first harmonic
    tail_fraction: float  # l2 share of harmonics l >= 2
    dist_phi_dnls: float  # ||phi - Phi||_{Q_mu}
    dist_dnls_ref: float  # ||Phi - psi||_{Q_mu}

    def to_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def error_vs_reference(b: Breather):
    """Measure the breather against Psi = mu^(1/p) psi cos(omega t).

    Works on assembled and on loaded breathers alike: everything is
    recomputed from the stored arrays.
    """
    ref = reference_profile(b)
    coeffs_ref = np.zeros_like(b.coeffs)
    coeffs_ref[1] = b.mu ** (1.0 / b.p) * ref.values
    diff = b.coeffs - coeffs_ref
    e_h2 = sobolev_time_norm(diff, order=2, omega=b.omega)
    M = 4 * (b.L_max + 1)
    e_sup = float(np.max(np.abs(synthesize(diff, M))))
    sup_bound = 2.0 * np.sqrt(b.mu) * sum(
        norm_q(dl, b.mu) for dl in diff
    )
    if e_sup > sup_bound * (1.0 + 1e-10):
        raise GuardError(
            f"sup-embedding invariant violated: e_sup={e_sup:.3e} exceeds "
            f"2 sqrt(mu) sum ||.||_Q = {sup_bound:.3e}"
        )
    w_phys = b.mu ** (1.0 / b.p) * b.w_hat
    per_l = np.sqrt(np.sum(b.coeffs.reshape(b.L_max + 1, -1) ** 2, axis=1))
    total = float(np.sqrt(np.sum(per_l**2)))
    return ErrorReport(
        e_h2=e_h2,
        e_sup=e_sup,
        sup_bound=float(sup_bound),
        w_x2=sobolev_time_norm(w_phys, order=2, omega=1.0),
        harmonic_fraction=float(per_l[1] / total) if total else 0.0,
        tail_fraction=float(np.sqrt(np.sum(per_l[2:] ** 2)) / total)
        if total
        else 0.0,
        dist_phi_dnls=norm_q_mu(b.phi - b.phi_dnls, b.grid),
        dist_dnls_ref=norm_q_mu(b.phi_dnls - ref.values, b.grid),
    )


# --------------------------------------------------------------- scaling study

SCALING_COLUMNS = (
    "e_h2",
    "e_sup",
    "w_x2",
    "tail_fraction",
    "dist_phi_dnls",
    "dist_dnls_ref",
    "remainder_norm_mu",
    "kg_residual",
)


@dataclass
class ScalingRow:
    mu: float
    e_h2: float
    e_sup: float
    w_x2: float
    harmonic_fraction: float
    tail_fraction: float
    dist_phi_dnls: float
    dist_dnls_ref: float
    remainder_norm_mu: float
    kg_residual: float
    omega: float


@dataclass
class SlopeFit:
    column: str
    slope: float
    stderr: float
    points: int

    @property
    def ci(self):
        """Rough 95% band: slope +/- 2 stderr."""
        return (self.slope - 2.0 * self.stderr, self.slope + 2.0 * self.stderr)


@dataclass
class ScalingTable:
    n: int
    p: float
    coupling: float
    mode: str
    rows: list
    failures: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def slope(self, name):
        """log-log slope of a column against mu, with its standard error."""
        if name not in SCALING_COLUMNS:
            raise GuardError(f"no slope defined for column {name!r}")
        if len(self.rows) < 4:
            raise GuardError(
                f"slope fit wants >= 4 surviving rows, have {len(self.rows)}"
            )
        x = np.log(self.column("mu"))
        y = self.column(name)
        if np.any(y <= 0.0):
            raise GuardError(f"column {name!r} is not positive; no log slope")
        coeffs, cov = np.polyfit(x, np.log(y), 1, cov=True)
        return SlopeFit(
            column=name,
            slope=float(coeffs[0]),
            stderr=float(np.sqrt(cov[0, 0])),
            points=len(self.rows),
        )

    def to_json(self, path):
        payload = {
            "n": self.n,
            "p": self.p,
            "coupling": self.coupling,
            "mode": self.mode,
            "rows": [asdict(r) for r in self.rows],
            "failures": self.failures,
            "slopes": {},
        }
        for name in SCALING_COLUMNS:
            try:
                fit = self.slope(name)
            except GuardError:
                continue
            payload["slopes"][name] = {
                "slope": fit.slope,
                "stderr": fit.stderr,
                "ci": list(fit.ci),
                "points": fit.points,
            }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    def to_csv(self, path):
        names = ["mu"] + [c for c in SCALING_COLUMNS] + [
            "harmonic_fraction",
            "omega",
        ]
        with open(path, "w") as fh:
            fh.write(f"# scaling study n={self.n} p={self.p!r} "
                     f"a={self.coupling!r} mode={self.mode}\n")
            fh.write(",".join(names) + "\n")
            for r in self.rows:
                fh.write(
                    ",".join(f"{float(getattr(r, c))!r}" for c in names) + "\n"
                )


def scaling_study(mu_list, n, p, coupling, mode="st", progress=None, **config_kwargs):
    """Assemble one breather per mu and tabulate the reference distances.

    mu values must be strictly decreasing.  Per-mu failures (guard trips,
    stalled iterations) are recorded, not raised; any later slope fit
    insists on >= 4 surviving rows.
    """
    mus = [float(m) for m in mu_list]
    if len(mus) < 2 or any(b >= a for a, b in zip(mus, mus[1:])):
        raise GuardError("mu list must be strictly decreasing")
    rows, failures = [], {}
    for mu in mus:
        try:
            cfg = PipelineConfig(
                n=n, p=p, coupling=coupling, mu=mu, mode=mode, **config_kwargs
            )
            b = assemble_breather(cfg)
            err = error_vs_reference(b)
            rows.append(
                ScalingRow(
                    mu=mu,
                    e_h2=err.e_h2,
                    e_sup=err.e_sup,
                    w_x2=err.w_x2,
                    harmonic_fraction=err.harmonic_fraction,
                    tail_fraction=err.tail_fraction,
                    dist_phi_dnls=err.dist_phi_dnls,
                    dist_dnls_ref=err.dist_dnls_ref,
                    remainder_norm_mu=b.reports["remainder_norm_mu"],
                    kg_residual=kg_residual(b),
                    omega=b.omega,
                )
            )
        except (GuardError, ConvergenceError) as exc:
            failures[repr(mu)] = str(exc)
        if progress is not None:
            progress(mu, rows[-1] if rows else None)
    return ScalingTable(
        n=n, p=p, coupling=coupling, mode=mode, rows=rows, failures=failures
    )


# ----------------------------------------------------------------- file I/O

_MODE_CODES = {"st": 0, "p": 1, "h1": 2, "h2": 3}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


def save_breather(path, b: Breather):
    """Binary dump: header (geometry + parameters), then the coefficient
    stack, kernel profile, discrete-NLS profile and range stack."""
    g = b.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIqII d d d d d",
                _VERSION,
                g.n,
                g.K,
                b.L_max,
                _MODE_CODES[b.mode],
                g.mu,
                b.coupling,
                b.p,
                b.multiplier,
                b.omega,
            )
        )
        fh.write(struct.pack(f"<{g.n}d", *g.offsets))
        for arr in (b.coeffs, b.phi, b.phi_dnls, b.w_hat):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_breather(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if raw[:4] != _MAGIC:
        raise FormatError(f"{path}: not a breather file")
    head = "<IIqII d d d d d"
    try:
        version, n, K, L_max, mode_code, mu, coupling, p, m, omega = (
            struct.unpack_from(head, raw, 4)
        )
        off = 4 + struct.calcsize(head)
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        offsets = struct.unpack_from(f"<{n}d", raw, off)
        off += 8 * n
        grid = GridSpec(n=n, K=K, mu=mu, offsets=offsets)
        mode = _MODE_NAMES[mode_code]
    except (struct.error, KeyError, GuardError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from exc
    stack = (L_max + 1) * grid.size
    sizes = (stack, grid.size, grid.size, stack)
    if len(raw) - off != 8 * sum(sizes):
        raise FormatError(
            f"{path}: payload holds {(len(raw) - off) // 8} values, "
            f"expected {sum(sizes)}"
        )
    arrays = []
    for count in sizes:
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=off))
        off += 8 * count
    coeffs = arrays[0].reshape((L_max + 1,) + grid.shape).copy()
    phi = arrays[1].reshape(grid.shape).copy()
    phi_dnls = arrays[2].reshape(grid.shape).copy()
    w_hat = arrays[3].reshape((L_max + 1,) + grid.shape).copy()
    return Breather(
        grid=grid,
        p=p,
        coupling=coupling,
        mu=mu,
        mode=mode,
        multiplier=m,
        omega=omega,
        coeffs=coeffs,
        phi=phi,
        phi_dnls=phi_dnls,
        w_hat=w_hat,
        reports={},
    )


def save_breather_report(path, b: Breather, extra=None):
    """Human-readable JSON: parameters, convergence reports, diagnostics."""
    payload = {
        "n": b.grid.n,
        "K": b.grid.K,
        "mu": b.mu,
        "coupling": b.coupling,
        "p": b.p,
        "mode": b.mode,
        "multiplier": b.multiplier,
        "omega": b.omega,
        "L_max": b.L_max,
        "amplitude": float(np.max(np.abs(b.coeffs))),
        "reports": b.reports,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=float)
        fh.write("\n")
