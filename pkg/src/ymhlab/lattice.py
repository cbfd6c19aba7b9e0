"""Periodic cubical lattices on flat tori with twisted U(1) sectors.

The grid carries three layers of structure:

  * sites / links / plaquettes of an N_1 x ... x N_n periodic lattice,
    with real k-form fields stored one value per oriented cell,
  * an exact discrete exterior calculus (d, d*) with cell-measure
    weighted inner products, so that lattice sums approximate integrals,
  * a fixed background connection realizing an integer flux matrix
    m_{jk} through compact link phases.  The 2*pi defect of the phase
    pattern is confined to one seam plaquette per coordinate 2-torus;
    energy and curvature computations always read the stored constant
    curvature, never the wrapped phase.

Scalar sections are plain complex arrays per site; the dynamic part of
the connection is a noncompact real one-form alpha, mirroring the
split  (total connection) = (background) - i*alpha.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi

# Canonical plaquette planes (j < k), fixing orientation (e_j, e_k).
PLANES_2D = ((0, 1),)
PLANES_3D = ((0, 1), (0, 2), (1, 2))


def planes(n: int) -> tuple[tuple[int, int], ...]:
    return PLANES_2D if n == 2 else PLANES_3D


@dataclass(frozen=True)
class Grid:
    """Periodic cubical grid on a flat torus with an integer flux twist.

    dims[i] >= 4 sites per axis, lengths[i] > 0 period lengths,
    flux[j][k] = m_{jk} antisymmetric integer matrix (total flux
    2*pi*m_{jk} through each coordinate (j,k) 2-torus).
    """

    n: int
    dims: tuple[int, ...]
    lengths: tuple[float, ...]
    flux: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.n}")
        if len(self.dims) != self.n or len(self.lengths) != self.n:
            raise ValueError("dims/lengths must have one entry per axis")
        if any(N < 4 for N in self.dims):
            raise ValueError(f"need at least 4 sites per axis, got {self.dims}")
        if any(L <= 0 for L in self.lengths):
            raise ValueError(f"period lengths must be positive, got {self.lengths}")
        F = np.asarray(self.flux)
        if F.shape != (self.n, self.n):
            raise ValueError("flux must be an n x n matrix")
        if not np.array_equal(F, np.round(F)) or not np.array_equal(F, -F.T):
            raise ValueError("flux must be an antisymmetric integer matrix")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.lengths, self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def site_count(self) -> int:
        return int(np.prod(self.dims))

    @property
    def planes(self) -> tuple[tuple[int, int], ...]:
        return planes(self.n)

    def flux_int(self, j: int, k: int) -> int:
        return int(self.flux[j][k])

    def axis_coords(self, axis: int) -> np.ndarray:
        """Site coordinates along one axis, broadcast to the site shape."""
        idx = np.arange(self.dims[axis], dtype=float) * self.spacing[axis]
        shape = [1] * self.n
        shape[axis] = self.dims[axis]
        return np.broadcast_to(idx.reshape(shape), self.dims)


def form_shape(grid: Grid, degree: int) -> tuple[int, ...]:
    if degree == 0:
        return grid.dims
    if degree == 1:
        return (grid.n,) + grid.dims
    if degree == 2:
        return (len(grid.planes),) + grid.dims
    if degree == 3 and grid.n == 3:
        return grid.dims
    raise ValueError(f"no degree-{degree} forms on a {grid.n}-torus grid")


@dataclass
class FormField:
    """Real discrete k-form: one value per oriented cell, canonical orientation."""

    grid: Grid
    degree: int
    values: np.ndarray

    def __post_init__(self):
        expected = form_shape(self.grid, self.degree)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expected:
            raise ValueError(
                f"degree-{self.degree} form needs shape {expected}, got {self.values.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid, degree: int) -> "FormField":
        return cls(grid, degree, np.zeros(form_shape(grid, degree)))

    def copy(self) -> "FormField":
        return FormField(self.grid, self.degree, self.values.copy())


def scalar_field(grid: Grid, values) -> np.ndarray:
    """Complex section in the background trivialization (one value per site)."""
    arr = np.asarray(values, dtype=complex)
    if arr.shape != grid.dims:
        raise ValueError(f"scalar field needs shape {grid.dims}, got {arr.shape}")
    return arr


# -- discrete exterior calculus ------------------------------------------------

def _fwd_diff(values: np.ndarray, axis_in_array: int, h: float) -> np.ndarray:
    return (np.roll(values, -1, axis=axis_in_array) - values) / h


def _bwd_diff(values: np.ndarray, axis_in_array: int, h: float) -> np.ndarray:
    return (values - np.roll(values, 1, axis=axis_in_array)) / h


def d(f: FormField) -> FormField:
    """Cubical coboundary with spacing weights; d(d(f)) = 0 exactly."""
    grid = f.grid
    h = grid.spacing
    if f.degree == 0:
        out = np.empty(form_shape(grid, 1))
        for j in range(grid.n):
            out[j] = _fwd_diff(f.values, j, h[j])
        return FormField(grid, 1, out)
    if f.degree == 1:
        out = np.empty(form_shape(grid, 2))
        for p, (j, k) in enumerate(grid.planes):
            out[p] = _fwd_diff(f.values[k], j, h[j]) - _fwd_diff(f.values[j], k, h[k])
        return FormField(grid, 2, out)
    if f.degree == 2 and grid.n == 3:
        # (d omega)_{012} = D0 w_{12} - D1 w_{02} + D2 w_{01}
        w01, w02, w12 = f.values[0], f.values[1], f.values[2]
        out = (
            _fwd_diff(w12, 0, h[0])
            - _fwd_diff(w02, 1, h[1])
            + _fwd_diff(w01, 2, h[2])
        )
        return FormField(grid, 3, out)
    raise ValueError(f"d undefined for degree {f.degree} on a {grid.n}-torus grid")


def d_star(f: FormField) -> FormField:
    """Formal adjoint of d for the cell-measure weighted inner products."""
    grid = f.grid
    h = grid.spacing
    if f.degree == 1:
        out = np.zeros(form_shape(grid, 0))
        for j in range(grid.n):
            out -= _bwd_diff(f.values[j], j, h[j])
        return FormField(grid, 0, out)
    if f.degree == 2:
        out = np.zeros(form_shape(grid, 1))
        for p, (j, k) in enumerate(grid.planes):
            # omega_{jk} contributes -D_j^- to component k, +D_k^- to component j
            out[k] -= _bwd_diff(f.values[p], j, h[j])
            out[j] += _bwd_diff(f.values[p], k, h[k])
        return FormField(grid, 1, out)
    raise ValueError(f"d* implemented for degrees 1 and 2, got {f.degree}")


def inner(a: FormField, b: FormField) -> float:
    """L2 inner product with cell-measure weights."""
    if a.degree != b.degree or a.grid is not b.grid and a.grid != b.grid:
        raise ValueError("inner product needs matching forms")
    return float(np.sum(a.values * b.values) * a.grid.cell_volume)


def norm(a: FormField) -> float:
    return float(np.sqrt(max(inner(a, a), 0.0)))


def integral(f: FormField) -> float:
    """Integral of a 0-form (sum weighted by cell volume)."""
    if f.degree != 0:
        raise ValueError("integral takes a 0-form")
    return float(np.sum(f.values) * f.grid.cell_volume)


# -- background connection -----------------------------------------------------

@dataclass
class BackgroundConnection:
    """Fixed reference connection of the flux sector.

    link_angle[j] holds the per-link transport angle; the transport
    phase from site x+h_j e_j back to x is exp(i * link_angle_j(x)).
    plaquette_curvature stores the intended constant curvature
    2*pi*m_{jk}/(l_j*l_k); all observables read it, never the wrapped
    plaquette phase.
    """

    grid: Grid
    link_angle: np.ndarray
    plaquette_curvature: FormField

    def link_phase(self) -> np.ndarray:
        return np.exp(1j * self.link_angle)

    def plaquette_angle_defect(self) -> float:
        """Max deviation of the 4-link phase product from exp(-i h_j h_k w0)."""
        grid = self.grid
        h = grid.spacing
        worst = 0.0
        for p, (j, k) in enumerate(grid.planes):
            s = (
                self.link_angle[j]
                + np.roll(self.link_angle[k], -1, axis=j)
                - np.roll(self.link_angle[j], -1, axis=k)
                - self.link_angle[k]
            )
            target = -h[j] * h[k] * self.plaquette_curvature.values[p]
            worst = max(worst, float(np.max(np.abs(np.exp(1j * s) - np.exp(1j * target)))))
        return worst


def make_grid(n, dims, lengths, flux) -> tuple[Grid, BackgroundConnection]:
    """Build a grid plus the axial background connection of its flux sector.

    For n = 2 the flux may be given as a single integer k (meaning
    m_{01} = k).  The axial link-angle pattern reproduces a constant
    plaquette transport phase exp(-i h_j h_k w0) exactly on every
    plaquette; the 2*pi*m defect of the angles is absorbed by one seam
    plaquette per (j,k)-torus and never enters observables.
    """
    if np.isscalar(flux):
        if n != 2:
            raise ValueError("scalar flux shorthand is only valid for n = 2")
        k = flux
        if k != int(np.round(k)):
            raise ValueError(f"flux must be an integer, got {flux!r}")
        k = int(np.round(k))
        flux = ((0, k), (-k, 0))
    F = np.asarray(flux, dtype=float)
    if not np.allclose(F, np.round(F)):
        raise ValueError(f"flux entries must be integers, got {flux!r}")
    flux_t = tuple(tuple(int(v) for v in row) for row in np.round(F).astype(int))
    grid = Grid(n=n, dims=tuple(int(v) for v in dims),
                lengths=tuple(float(v) for v in lengths), flux=flux_t)

    angles = np.zeros(form_shape(grid, 1))
    curv = FormField.zeros(grid, 2)
    for p, (j, k) in enumerate(grid.planes):
        m = grid.flux_int(j, k)
        curv.values[p] = TWO_PI * m / (grid.lengths[j] * grid.lengths[k])
        if m == 0:
            continue
        # Axial pattern: angle sum on every (j,k)-plaquette is -phi mod 2*pi,
        # phi = 2*pi*m/(N_j*N_k).  Direction-k links ramp along x_j; the
        # direction-j links on the last x_j column unwind along x_k.
        phi = TWO_PI * m / (grid.dims[j] * grid.dims[k])
        xj = np.arange(grid.dims[j])
        xk = np.arange(grid.dims[k])
        shape_j = [1] * grid.n
        shape_j[j] = grid.dims[j]
        shape_k = [1] * grid.n
        shape_k[k] = grid.dims[k]
        angles[k] -= np.broadcast_to((phi * xj).reshape(shape_j), grid.dims)
        seam = np.zeros(grid.dims)
        sel = [slice(None)] * grid.n
        sel[j] = grid.dims[j] - 1
        seam[tuple(sel)] = 1.0
        angles[j] += seam * np.broadcast_to((phi * grid.dims[j] * xk).reshape(shape_k),
                                            grid.dims)
    bg = BackgroundConnection(grid, angles, curv)
    defect = bg.plaquette_angle_defect()
    if defect > 1e-12:
        raise AssertionError(f"background construction defect {defect:.3e}")
    return grid, bg


# -- pair state and gauge action -----------------------------------------------

@dataclass
class PairState:
    """Scalar section + dynamic one-form + coupling scale, in a fixed sector."""

    grid: Grid
    background: BackgroundConnection
    u: np.ndarray
    alpha: FormField
    eps: float

    def __post_init__(self):
        self.u = scalar_field(self.grid, self.u)
        if self.alpha.degree != 1:
            raise ValueError("alpha must be a one-form")
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")

    def copy(self) -> "PairState":
        return PairState(self.grid, self.background, self.u.copy(),
                         self.alpha.copy(), self.eps)


def vacuum_pair(grid: Grid, bg: BackgroundConnection, eps: float) -> PairState:
    return PairState(grid, bg, np.ones(grid.dims, dtype=complex),
                     FormField.zeros(grid, 1), eps)


def transport_angle(pair: PairState) -> np.ndarray:
    """Total per-link transport angle: background angle minus h_j*alpha_j."""
    grid = pair.grid
    h = grid.spacing
    out = pair.background.link_angle.copy()
    for j in range(grid.n):
        out[j] -= h[j] * pair.alpha.values[j]
    return out


def transport_phase(pair: PairState) -> np.ndarray:
    return np.exp(1j * transport_angle(pair))


def transported_neighbor(pair: PairState, j: int, phase: np.ndarray | None = None) -> np.ndarray:
    """u(x + h_j e_j) parallel-transported to x."""
    if phase is None:
        phase = transport_phase(pair)
    return phase[j] * np.roll(pair.u, -1, axis=j)


def covariant_diff(pair: PairState) -> np.ndarray:
    """Per-link covariant difference D_j u, shaped like a one-form but complex.

    D_j u(x) = (phase_j(x) * u(x + h_j e_j) - u(x)) / h_j; transforms as
    D'_j u' = e^{i theta} D_j u under gauge_transform, exactly.
    """
    grid = pair.grid
    h = grid.spacing
    phase = transport_phase(pair)
    out = np.empty((grid.n,) + grid.dims, dtype=complex)
    for j in range(grid.n):
        out[j] = (transported_neighbor(pair, j, phase) - pair.u) / h[j]
    return out


def wrap_angle(a: np.ndarray) -> np.ndarray:
    """Wrap to the principal branch (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, TWO_PI)


def gauge_transform(pair: PairState, theta: np.ndarray, wrap: bool = False) -> PairState:
    """Apply u -> e^{i theta} u, alpha -> alpha + d(theta).

    With wrap=True the link increments of theta are wrapped to the
    principal branch, so a winding representative (values jumping by
    2*pi across a seam) acts as the corresponding large gauge
    transformation, shifting the harmonic part of alpha by 2*pi*k/l.
    Gauge-invariant observables are unchanged to machine precision
    either way.
    """
    grid = pair.grid
    theta = np.asarray(theta, dtype=float)
    if theta.shape != grid.dims:
        raise ValueError("theta must be a real site field")
    u_new = np.exp(1j * theta) * pair.u
    alpha_new = pair.alpha.values.copy()
    h = grid.spacing
    for j in range(grid.n):
        inc = np.roll(theta, -1, axis=j) - theta
        if wrap:
            inc = wrap_angle(inc)
        alpha_new[j] += inc / h[j]
    return PairState(grid, pair.background, u_new, FormField(grid, 1, alpha_new), pair.eps)


def winding_theta(grid: Grid, winding: tuple[int, ...]) -> np.ndarray:
    """Representative of the large gauge e^{2 pi i sum_j k_j x_j / l_j}."""
    theta = np.zeros(grid.dims)
    for j, k in enumerate(winding):
        if k:
            theta += TWO_PI * k * grid.axis_coords(j) / grid.lengths[j]
    return theta


def slice_flux_sums(omega: FormField) -> dict[tuple[int, int], np.ndarray]:
    """Per-slice integral of a two-form over each coordinate 2-torus.

    Returns, for each plane (j,k), the array of sums over the
    transverse coordinate(s) of omega_{jk} * h_j * h_k.
    """
    grid = omega.grid
    h = grid.spacing
    out = {}
    for p, (j, k) in enumerate(grid.planes):
        axes = tuple(a for a in (j, k))
        vals = omega.values[p] * (h[j] * h[k])
        out[(j, k)] = np.sum(vals, axis=axes)
    return out


# -- spectral helpers (shared by hodge/flow) ------------------------------------

@lru_cache(maxsize=32)
def _symbols_cached(key) -> tuple[np.ndarray, np.ndarray]:
    n, dims, lengths = key
    h = tuple(L / N for L, N in zip(lengths, dims))
    mus = []
    for j in range(n):
        kj = np.fft.fftfreq(dims[j], d=1.0) * dims[j]  # integer wavenumbers
        phi = TWO_PI * kj / dims[j]
        mu_j = (np.exp(1j * phi) - 1.0) / h[j]
        shape = [1] * n
        shape[j] = dims[j]
        mus.append(mu_j.reshape(shape))
    mu = np.empty((n,) + dims, dtype=complex)
    for j in range(n):
        mu[j] = np.broadcast_to(mus[j], dims)
    lam = np.sum(np.abs(mu) ** 2, axis=0)
    return mu, lam


def fourier_symbols(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(mu, lambda): forward-difference symbols and the Laplacian symbol.

    mu[j, k-vector] is the symbol of the forward difference D_j^+ under
    numpy's fftn convention; lambda = sum_j |mu_j|^2 is the symbol of
    d* d on 0-forms (positive semidefinite).
    """
    return _symbols_cached((grid.n, grid.dims, grid.lengths))


# -- binary snapshot format ------------------------------------------------------

SNAPSHOT_MAGIC = b"YMH1"
SNAPSHOT_VERSION = 1


def write_snapshot(path, pair: PairState) -> None:
    """Binary snapshot: magic, version, grid header, eps, u, then alpha."""
    grid = pair.grid
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", SNAPSHOT_VERSION))
        fh.write(struct.pack("<B", grid.n))
        fh.write(struct.pack(f"<{grid.n}I", *grid.dims))
        fh.write(struct.pack(f"<{grid.n}d", *grid.lengths))
        upper = [grid.flux_int(j, k) for (j, k) in grid.planes]
        fh.write(struct.pack(f"<{len(upper)}i", *upper))
        fh.write(struct.pack("<d", pair.eps))
        u = np.ascontiguousarray(pair.u)
        inter = np.empty(grid.dims + (2,), dtype="<f8")
        inter[..., 0] = u.real
        inter[..., 1] = u.imag
        fh.write(inter.tobytes(order="C"))
        al = np.moveaxis(pair.alpha.values, 0, -1)  # n values per site, link order
        fh.write(np.ascontiguousarray(al, dtype="<f8").tobytes(order="C"))


def read_snapshot(path) -> PairState:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    magic = buf.read(4)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"unknown snapshot magic {magic!r}")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    (n,) = struct.unpack("<B", buf.read(1))
    dims = struct.unpack(f"<{n}I", buf.read(4 * n))
    lengths = struct.unpack(f"<{n}d", buf.read(8 * n))
    nplanes = len(planes(n))
    upper = struct.unpack(f"<{nplanes}i", buf.read(4 * nplanes))
    flux = np.zeros((n, n), dtype=int)
    for (j, k), m in zip(planes(n), upper):
        flux[j, k] = m
        flux[k, j] = -m
    (eps,) = struct.unpack("<d", buf.read(8))
    grid, bg = make_grid(n, dims, lengths, flux)
    nsite = grid.site_count
    raw_u = np.frombuffer(buf.read(16 * nsite), dtype="<f8").reshape(dims + (2,))
    u = raw_u[..., 0] + 1j * raw_u[..., 1]
    raw_a = np.frombuffer(buf.read(8 * n * nsite), dtype="<f8").reshape(dims + (n,))
    alpha = FormField(grid, 1, np.moveaxis(raw_a, -1, 0).copy())
    return PairState(grid, bg, u.copy(), alpha, eps)


def pair_replace(pair: PairState, **kw) -> PairState:
    return replace(pair, **kw)
