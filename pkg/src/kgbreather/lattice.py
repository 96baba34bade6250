"""Lattice geometry, reflection-symmetric sequences, and the discrete Laplacian.

Sites live on an n-dimensional box (n = 1 or 2).  Along each axis the index
j runs over -K..K when the symmetry offset is 0 and over -K-1..K when it is
1/2; a site sits at the physical position x = mu*(j + offset) and zero
Dirichlet data is imposed outside the box.  With these conventions a
sequence that is even under reflection through the box center is exactly an
array invariant under ``np.flip`` along each axis, which the reduction
helpers below exploit to strip the mirror-image redundancy before handing
systems to a Newton solver.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import FormatError, GuardError

_VALID_OFFSETS = (0.0, 0.5)


@dataclass(frozen=True)
class GridSpec:
    """Box geometry: dimension, half-width K, lattice spacing mu, offsets."""

    n: int
    K: int
    mu: float
    offsets: tuple = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GuardError(f"dimension must be 1 or 2, got {self.n}")
        if self.K < 2:
            raise GuardError(f"need K >= 2, got {self.K}")
        if not (0.0 < self.mu):
            raise GuardError(f"lattice spacing must be positive, got {self.mu}")
        offsets = self.offsets
        if offsets is None:
            offsets = (0.0,) * self.n
        offsets = tuple(float(o) for o in offsets)
        if len(offsets) != self.n or any(o not in _VALID_OFFSETS for o in offsets):
            raise GuardError(f"offsets must be {self.n} values from {{0, 1/2}}")
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def for_radius(cls, n, mu, r_min, offsets=None):
        """Smallest box with K*mu >= r_min (physical decay radius)."""
        if not (mu > 0.0) or not (r_min > 0.0):
            raise GuardError("need mu > 0 and r_min > 0")
        K = int(np.ceil(r_min / mu - 1e-12))
        return cls(n=n, K=max(K, 2), mu=mu, offsets=offsets)

    def axis_length(self, axis):
        return 2 * self.K + 1 if self.offsets[axis] == 0.0 else 2 * self.K + 2

    @property
    def shape(self):
        return tuple(self.axis_length(ax) for ax in range(self.n))

    @property
    def size(self):
        return int(np.prod(self.shape))

    def axis_indices(self, axis):
        lo = -self.K if self.offsets[axis] == 0.0 else -self.K - 1
        return np.arange(lo, self.K + 1)

    def position_axes(self):
        """Physical coordinates mu*(j + offset), one 1d array per axis."""
        return tuple(
            self.mu * (self.axis_indices(ax) + self.offsets[ax])
            for ax in range(self.n)
        )

    def radius_mesh(self, scale=1.0):
        """Euclidean distance of every site from the symmetry center.

        ``scale`` divides the coordinates first, so radius_mesh(np.sqrt(a))
        yields the argument at which a continuum profile for unit coupling
        must be sampled to represent coupling ``a``.
        """
        axes = self.position_axes()
        if self.n == 1:
            return np.abs(axes[0]) / scale
        x = axes[0][:, None] / scale
        y = axes[1][None, :] / scale
        return np.hypot(x, y)


@dataclass
class SymmetricSequence:
    """A real-valued field on a GridSpec box, meant to be reflection-even."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise FormatError(
                f"values shape {self.values.shape} does not match "
                f"grid shape {self.grid.shape}"
            )

    def reflect(self, axis=None):
        axes = range(self.grid.n) if axis is None else (axis,)
        out = self.values
        for ax in axes:
            out = np.flip(out, axis=ax)
        return SymmetricSequence(self.grid, out)

    def symmetrize(self):
        out = self.values
        for ax in range(self.grid.n):
            out = 0.5 * (out + np.flip(out, axis=ax))
        return SymmetricSequence(self.grid, out)

    def asymmetry(self):
        """Max deviation from reflection evenness, over all axes."""
        worst = 0.0
        for ax in range(self.grid.n):
            worst = max(
                worst,
                float(np.max(np.abs(self.values - np.flip(self.values, axis=ax)))),
            )
        return worst


# Symmetry centers the breather families can sit on: a lattice site, the
# midpoint of a bond, or (2d) the center of a plaquette.  The offset per
# axis is what the reflection symmetry of the box encodes.
BREATHER_MODES = {
    1: {"site": (0.0,), "bond": (0.5,)},
    2: {
        "site": (0.0, 0.0),
        "bond-x": (0.5, 0.0),
        "bond-y": (0.0, 0.5),
        "plaquette": (0.5, 0.5),
    },
}


def mode_offsets(n, mode):
    try:
        return BREATHER_MODES[n][mode]
    except KeyError:
        raise GuardError(
            f"unknown mode {mode!r} for n={n}; choose from "
            f"{sorted(BREATHER_MODES.get(n, {}))}"
        ) from None


def mode_name(n, offsets):
    for name, off in BREATHER_MODES[n].items():
        if tuple(offsets) == off:
            return name
    raise GuardError(f"offsets {offsets} match no named mode")


def _shifted(a, axis, step):
    # a with indices displaced by `step` along `axis`, zero-filled boundary
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step > 0:
        src[axis] = slice(step, None)
        dst[axis] = slice(None, -step)
    else:
        src[axis] = slice(None, step)
        dst[axis] = slice(-step, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def laplacian(a, axes=None):
    """Nearest-neighbor discrete Laplacian with zero Dirichlet exterior.

    (lap a)_j = sum_{|e|=1} a_{j+e} - 2n a_j, acting over ``axes`` (all axes
    by default, so stacks of fields can restrict to their spatial axes).
    """
    a = np.asarray(a, dtype=np.float64)
    if axes is None:
        axes = tuple(range(a.ndim))
    out = (-2.0 * len(axes)) * a
    for ax in axes:
        out += _shifted(a, ax, +1)
        out += _shifted(a, ax, -1)
    return out


def dirichlet_energy(a, axes=None):
    """Sum of squared nearest-neighbor differences, boundary bonds included.

    Equals <a, -lap a> exactly (the boundary bonds connect to the zero
    exterior), which is the form the energy functional wants.
    """
    a = np.asarray(a, dtype=np.float64)
    if axes is None:
        axes = tuple(range(a.ndim))
    total = 0.0
    for ax in axes:
        d = np.diff(a, axis=ax, prepend=0.0, append=0.0)
        total += float(np.sum(d * d))
    return total


def inner_q(a, b):
    """H^1-type inner product: sum a*b + sum of difference products."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    val = float(np.sum(a * b))
    for ax in range(a.ndim):
        da = np.diff(a, axis=ax, prepend=0.0, append=0.0)
        db = np.diff(b, axis=ax, prepend=0.0, append=0.0)
        val += float(np.sum(da * db))
    return val


def norm_l2(a):
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))


def norm_q(a, mu=1.0):
    """H^1-type norm: (sum a^2 + mu^-2 sum of squared differences)^(1/2)."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a) + dirichlet_energy(a) / (mu * mu)))


def norm_l2_mu(a, grid):
    """l2 norm under the continuum volume element mu^n."""
    return grid.mu ** (grid.n / 2.0) * norm_l2(a)


def norm_q_mu(a, grid):
    """Scaled H^1 norm: mu^n sum a^2 + mu^(n-2) sum of squared differences.

    For a sampled profile a_j = psi(mu j) this converges to the continuum
    H^1 norm of psi.  In 1d it dominates the sup norm with constant 1.
    """
    a = np.asarray(a, dtype=np.float64)
    mu, n = grid.mu, grid.n
    return float(np.sqrt(mu**n * np.sum(a * a) + mu ** (n - 2) * dirichlet_energy(a)))


def sup_norm(a):
    return float(np.max(np.abs(a)))


def lp_norm(a, q):
    """Plain sequence-space l^q norm, (sum |a_j|^q)^(1/q)."""
    if q < 2.0:
        raise GuardError(f"embedding checks cover q >= 2 only, got {q}")
    a = np.abs(np.asarray(a, dtype=np.float64))
    return float(np.sum(a**q) ** (1.0 / q))


def embedding_checks(a, q):
    """True when the unit-constant embeddings l2 -> l^q and l2 -> l^inf hold.

    On sequence spaces both inequalities are exact with constant 1; this is
    the runtime check (up to roundoff slack) rather than an assumption.
    """
    l2 = norm_l2(a)
    slack = 1.0 + 1e-12
    return lp_norm(a, q) <= l2 * slack and sup_norm(a) <= l2 * slack


# ---------------------------------------------------------------------------
# reduction to the reflection-symmetric fundamental block
#
# Per axis the fundamental indices are j = 0..K; an interior orbit {j, -j}
# (or {j, -1-j} for offset 1/2) has two members, the center j = 0 of an
# offset-0 axis has one.  Columns of the orthonormal orbit basis carry
# 1/sqrt(orbit size), so folding a symmetric field multiplies its
# fundamental values by sqrt(orbit size) and l2 norms are preserved.


def _axis_fold(K, offset, length):
    # map full axis index -> fundamental index 0..K, and per-index orbit size
    i = np.arange(length)
    if offset == 0.0:
        f = np.abs(i - K)
        sigma = np.where(f == 0, 1.0, 2.0)
    else:
        j = i - (K + 1)
        f = np.where(j >= 0, j, -1 - j)
        sigma = np.full(length, 2.0)
    return f, sigma


def fundamental_shape(grid):
    return (grid.K + 1,) * grid.n


def orbit_weights(grid):
    """sqrt(orbit size) on the fundamental block (outer product over axes)."""
    w = None
    for ax in range(grid.n):
        wa = np.full(grid.K + 1, np.sqrt(2.0))
        if grid.offsets[ax] == 0.0:
            wa[0] = 1.0
        w = wa if w is None else np.multiply.outer(w, wa)
    return w


def fold_symmetric(a, grid):
    """Reduced coordinates of a reflection-even field (flattened)."""
    a = np.asarray(a, dtype=np.float64)
    sl = tuple(
        slice(grid.K, None) if grid.offsets[ax] == 0.0 else slice(grid.K + 1, None)
        for ax in range(grid.n)
    )
    return (a[sl] * orbit_weights(grid)).ravel()


def unfold_symmetric(coeffs, grid):
    """Inverse of fold_symmetric: rebuild the full reflection-even field."""
    block = np.asarray(coeffs, dtype=np.float64).reshape(fundamental_shape(grid))
    block = block / orbit_weights(grid)
    out = np.zeros(grid.shape)
    sl = tuple(
        slice(grid.K, None) if grid.offsets[ax] == 0.0 else slice(grid.K + 1, None)
        for ax in range(grid.n)
    )
    out[sl] = block
    for ax in range(grid.n):
        K = grid.K
        idx_dst = [slice(None)] * grid.n
        idx_src = [slice(None)] * grid.n
        if grid.offsets[ax] == 0.0:
            idx_dst[ax] = slice(0, K)
            idx_src[ax] = slice(K + 1, None)
        else:
            idx_dst[ax] = slice(0, K + 1)
            idx_src[ax] = slice(K + 1, None)
        out[tuple(idx_dst)] = np.flip(out[tuple(idx_src)], axis=ax)
    return out


def symmetry_basis(grid):
    """Sparse orthonormal basis B (full size x reduced size) of the
    reflection-even subspace; fold = B.T @ vec, unfold = B @ coeffs."""
    folds = []
    sigmas = []
    for ax in range(grid.n):
        f, s = _axis_fold(grid.K, grid.offsets[ax], grid.axis_length(ax))
        folds.append(f)
        sigmas.append(s)
    if grid.n == 1:
        col = folds[0]
        sigma = sigmas[0]
    else:
        col = folds[0][:, None] * (grid.K + 1) + folds[1][None, :]
        sigma = sigmas[0][:, None] * sigmas[1][None, :]
        col = col.ravel()
        sigma = sigma.ravel()
    rows = np.arange(grid.size)
    data = 1.0 / np.sqrt(sigma)
    nred = (grid.K + 1) ** grid.n
    return sparse.csr_matrix((data, (rows, col)), shape=(grid.size, nred))


# ---------------------------------------------------------------------------
# serialization


_MAGIC = b"KGSQ"
_VERSION = 1


def save_sequence(path, seq):
    """Binary dump: magic, version, geometry header, raw float64 C-order."""
    g = seq.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIq d", _VERSION, g.n, g.K, g.mu))
        fh.write(struct.pack(f"<{g.n}d", *g.offsets))
        fh.write(np.ascontiguousarray(seq.values, dtype="<f8").tobytes())


def load_sequence(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise FormatError(f"{path}: not a lattice sequence file")
    try:
        version, n, K, mu = struct.unpack_from("<IIq d", raw, 4)
        off = 4 + struct.calcsize("<IIq d")
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        offsets = struct.unpack_from(f"<{n}d", raw, off)
        off += 8 * n
        grid = GridSpec(n=n, K=K, mu=mu, offsets=offsets)
    except (struct.error, GuardError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from exc
    payload = raw[off:]
    if len(payload) != 8 * grid.size:
        raise FormatError(
            f"{path}: payload holds {len(payload) // 8} values, "
            f"grid needs {grid.size}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape).copy()
    return SymmetricSequence(grid, values)


def save_sequence_csv(path, seq):
    """Text dump with repr-exact floats; metadata in '#' comment lines."""
    g = seq.grid
    idx = [g.axis_indices(ax) for ax in range(g.n)]
    with open(path, "w") as fh:
        fh.write("# kgbreather sequence v1\n")
        fh.write(f"# n={g.n} K={g.K} mu={g.mu!r} offsets={','.join(map(repr, g.offsets))}\n")
        fh.write(",".join(f"j{ax + 1}" for ax in range(g.n)) + ",value\n")
        if g.n == 1:
            for j, v in zip(idx[0], seq.values):
                fh.write(f"{j},{float(v)!r}\n")
        else:
            for i0, j0 in enumerate(idx[0]):
                for i1, j1 in enumerate(idx[1]):
                    fh.write(f"{j0},{j1},{float(seq.values[i0, i1])!r}\n")


def load_sequence_csv(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, _, val = token.partition("=")
                        meta[key] = val
                continue
            if line.startswith("j1,"):
                continue
            rows.append(line.split(","))
    try:
        n = int(meta["n"])
        grid = GridSpec(
            n=n,
            K=int(meta["K"]),
            mu=float(meta["mu"]),
            offsets=tuple(float(t) for t in meta["offsets"].split(",")),
        )
    except (KeyError, ValueError, GuardError) as exc:
        raise FormatError(f"{path}: bad or missing metadata ({exc})") from exc
    if len(rows) != grid.size:
        raise FormatError(f"{path}: {len(rows)} rows, grid needs {grid.size}")
    values = np.zeros(grid.shape)
    lows = [grid.axis_indices(ax)[0] for ax in range(grid.n)]
    try:
        for row in rows:
            pos = tuple(int(row[ax]) - lows[ax] for ax in range(grid.n))
            values[pos] = float(row[grid.n])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from exc
    return SymmetricSequence(grid, values)
