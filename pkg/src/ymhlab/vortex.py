"""Self-dual vortex profiles and their lattice embeddings.

The radial profile (f, a) of a degree-k vortex solves the first-order
system

    f' = (k - a) f / r,      a' = r (1 - f^2) / 2,

with f ~ c r^k at the origin and (f, a) -> (1, k) at infinity.  The
shooting parameter c is bisected on the overshoot criterion (f exceeds
1).  Forward shooting loses the decaying solution to the e^{+r} mode at
large radius, so beyond the radius where 1 - f drops below 1e-4 the
profile is continued by its linearized decay

    1 - f = A K0(r),      k - a = A r K1(r),

matched where 1 - f falls below 3e-5, which keeps the linearization
error O((1-f)^2) under the 1e-8 residual budget.  Energy is quadrature of the radial density and equals
2 pi |k| up to mesh error.

Lattice synthesis reproduces the gauge-invariant content of the
continuum fields exactly at cell centers: the curvature two-form is
sampled per plaquette and realized by a co-closed one-form through a
spectral solve, and the section's phase is integrated from target
covariant increments whose plaquette sums are matched, including the
2 pi windings at the core plaquettes, so winding extraction returns the
prescribed cores cell-for-cell.  Beyond radius ~ eps^(3/4) a smooth
cutoff settles all fields to the vacuum of the sector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.special import k0 as bessel_k0, k1 as bessel_k1

from .lattice import (
    BackgroundConnection,
    FormField,
    Grid,
    PairState,
    TWO_PI,
    d_star,
    fourier_symbols,
    form_shape,
    make_grid,
    wrap_angle,
)


@dataclass
class VortexProfile:
    """Radial vortex profile table with monotone-cubic evaluators."""

    k: int
    r_max: float
    r: np.ndarray
    f: np.ndarray
    a: np.ndarray
    df: np.ndarray
    da: np.ndarray
    shoot_coefficient: float

    def __post_init__(self):
        self._f = PchipInterpolator(self.r, self.f, extrapolate=False)
        self._a = PchipInterpolator(self.r, self.a, extrapolate=False)
        # C^2 evaluators for field synthesis: second differences of sampled
        # fields must not see interpolation knots, or the discrete
        # Laplacian amplifies them as h^{-2}
        from scipy.interpolate import CubicSpline

        if abs(self.k):
            bc_f = ((1, self.df[0]), (1, self.df[-1]))
            bc_a = ((1, self.da[0]), (1, self.da[-1]))
            self._f2 = CubicSpline(self.r, self.f, bc_type=bc_f, extrapolate=False)
            self._a2 = CubicSpline(self.r, self.a, bc_type=bc_a, extrapolate=False)
        else:
            self._f2 = self._f
            self._a2 = self._a

    def _eval(self, interp, r, head_scale, head_power, tail_value):
        r = np.asarray(r, dtype=float)
        out = np.where(r >= self.r_max, tail_value,
                       interp(np.clip(r, self.r[0], self.r_max)))
        if head_power:
            head = head_scale * (np.minimum(r, self.r[0]) / self.r[0]) ** head_power
        else:
            head = tail_value
        return np.where(r <= self.r[0], head, out)

    def f_at(self, r, smooth=False):
        kk = abs(self.k)
        return self._eval(self._f2 if smooth else self._f, r,
                          self.f[0], kk, 1.0)

    def a_at(self, r, smooth=False):
        return self._eval(self._a2 if smooth else self._a, r,
                          self.a[0], 2, float(abs(self.k)))

    def residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """Bogomolny residuals of the stored table (zero for the exact solution)."""
        kk = abs(self.k)
        with np.errstate(divide="ignore", invalid="ignore"):
            res_f = self.df - (kk - self.a) * self.f / self.r
            res_a = self.da / self.r - (1.0 - self.f**2) / 2.0
        return np.nan_to_num(res_f), np.nan_to_num(res_a)


def _rhs(k: int):
    def rhs(r, y):
        f, a = y
        return [(k - a) * f / r, r * (1.0 - f * f) / 2.0]

    return rhs


def _series_start(k: int, c: float, r0: float) -> tuple[float, float]:
    f0 = c * r0**k * np.exp(-(r0**2) / 8.0)
    a0 = r0**2 / 4.0 - c**2 * r0 ** (2 * k + 2) / (4.0 * k + 4.0)
    return f0, a0


def _shoot(k: int, c: float, r0: float, r_end: float,
           rtol: float = 1e-12, atol: float = 1e-16):
    """Integrate with overshoot (f >= 1) / undershoot (a >= k) events."""
    over = lambda r, y: y[0] - 1.0
    over.terminal = True
    over.direction = 1.0
    under = lambda r, y: y[1] - k
    under.terminal = True
    under.direction = 1.0
    sol = solve_ivp(_rhs(k), (r0, r_end), _series_start(k, c, r0),
                    events=[over, under], rtol=rtol, atol=atol,
                    dense_output=False, method="DOP853")
    if sol.t_events[0].size:
        return "over", sol
    if sol.t_events[1].size:
        return "under", sol
    return "through", sol


def solve_profile(k: int, r_max: float = 30.0, tol: float = 1e-6) -> VortexProfile:
    """Shooting + bisection for the degree-k radial vortex profile.

    Bisects the small-r coefficient c (f ~ c r^{|k|}) until the profile
    reaches f(r_max) within [1 - tol, 1]; the bracket is driven to
    1e-10 relative width.  k = 0 returns the vacuum profile without
    solving.
    """
    if k != int(k):
        raise ValueError("degree must be an integer")
    k = int(k)
    if k == 0:
        r = np.linspace(0.0, r_max, 257)[1:]
        one = np.ones_like(r)
        return VortexProfile(0, r_max, r, one, np.zeros_like(r),
                             np.zeros_like(r), np.zeros_like(r), 0.0)
    if r_max < 20:
        raise ValueError("r_max must be at least 20")
    kk = abs(k)
    r0 = 1e-2
    r_shoot = min(r_max, 22.0)

    c_lo, c_hi = 1e-6, 5.0
    lo_kind, _ = _shoot(kk, c_lo, r0, r_shoot, 1e-9, 1e-12)
    hi_kind, _ = _shoot(kk, c_hi, r0, r_shoot, 1e-9, 1e-12)
    tries = 0
    while lo_kind == "over" and tries < 60:
        c_lo *= 0.25
        lo_kind, _ = _shoot(kk, c_lo, r0, r_shoot, 1e-9, 1e-12)
        tries += 1
    while hi_kind != "over" and tries < 120:
        c_hi *= 4.0
        hi_kind, _ = _shoot(kk, c_hi, r0, r_shoot, 1e-9, 1e-12)
        tries += 1
    if lo_kind == "over" or hi_kind != "over":
        raise RuntimeError(
            f"shooting interval does not bracket: c_lo={c_lo:g} ({lo_kind}), "
            f"c_hi={c_hi:g} ({hi_kind})"
        )
    # coarse bisection first, then drive the bracket to machine precision at
    # the tolerances of the final pass: the e^{+r} mode amplifies coefficient
    # and integrator error alike, so the last stage must balance the same flow
    while (c_hi - c_lo) > 1e-4 * c_hi:
        c_mid = 0.5 * (c_lo + c_hi)
        kind, _ = _shoot(kk, c_mid, r0, r_shoot, 1e-9, 1e-12)
        if kind == "over":
            c_hi = c_mid
        else:
            c_lo = c_mid
    c_lo, c_hi = c_lo * (1.0 - 2e-4), c_hi * (1.0 + 2e-4)
    for _ in range(8):
        if _shoot(kk, c_lo, r0, r_shoot)[0] != "over":
            break
        c_lo *= 1.0 - 1e-3
    for _ in range(8):
        if _shoot(kk, c_hi, r0, r_shoot)[0] == "over":
            break
        c_hi *= 1.0 + 1e-3
    while (c_hi - c_lo) > 1e-12 * c_hi:
        c_mid = 0.5 * (c_lo + c_hi)
        kind, _ = _shoot(kk, c_mid, r0, r_shoot)
        if kind == "over":
            c_hi = c_mid
        else:
            c_lo = c_mid
    c = 0.5 * (c_lo + c_hi)

    # final forward pass with dense output, trusted while 1 - f >= ~1e-2
    over = lambda r, y: y[0] - 1.0
    over.terminal = True
    under = lambda r, y: y[1] - kk
    under.terminal = True
    sol = solve_ivp(_rhs(kk), (r0, r_shoot), _series_start(kk, c, r0),
                    rtol=1e-12, atol=1e-16, dense_output=True,
                    events=[over, under], method="DOP853")
    r_reach = float(sol.t[-1])
    r_probe = np.linspace(2.0, min(r_reach, r_shoot), 600)
    f_probe = sol.sol(r_probe)[0]
    good = np.nonzero(1.0 - f_probe <= 1e-2)[0]
    if good.size == 0:
        raise RuntimeError("profile failed to approach 1 before the tail region")
    r_switch = float(r_probe[good[0]])
    f_m, a_m = sol.sol(r_switch)
    A0 = 0.5 * float((1.0 - f_m) / bessel_k0(r_switch)
                     + (kk - a_m) / (r_switch * bessel_k1(r_switch)))

    # the decaying branch is stable backward in r; integrate it in the decay
    # variables (g, b) = (1 - f, k - a) so the tolerance acts on the signal
    def tail_rhs(r, y):
        g, b = y
        return [-b * (1.0 - g) / r, -r * g * (1.0 - g / 2.0)]

    def back_sol(A):
        y_end = (A * bessel_k0(r_max), A * r_max * bessel_k1(r_max))
        return solve_ivp(tail_rhs, (r_max, r_switch), y_end,
                         rtol=1e-11, atol=1e-300, dense_output=True, method="DOP853")

    def mismatch(A):
        return float(f_m - (1.0 - back_sol(A).sol(r_switch)[0]))

    from scipy.optimize import brentq

    A_lo, A_hi = 0.3 * A0, 3.0 * A0
    if mismatch(A_lo) > 0 or mismatch(A_hi) < 0:
        raise RuntimeError("tail amplitude failed to bracket")
    A = brentq(mismatch, A_lo, A_hi, xtol=1e-15 * A0, rtol=8.9e-16)
    tail_sol = back_sol(A)

    mesh_core = np.geomspace(r0, 0.2, 60)
    mesh_mid = np.arange(0.2, r_switch, 0.01)[1:]
    mesh_fwd = np.concatenate([mesh_core, mesh_mid])
    mesh_fwd = mesh_fwd[mesh_fwd < r_switch]
    f_vals, a_vals = sol.sol(mesh_fwd)
    mesh_tail = np.arange(r_switch, r_max + 1e-9, 0.02)
    g_t, b_t = tail_sol.sol(mesh_tail)
    f_t, a_t = 1.0 - g_t, kk - b_t
    mesh = np.concatenate([mesh_fwd, mesh_tail])
    f_vals = np.concatenate([f_vals, f_t])
    a_vals = np.concatenate([a_vals, a_t])
    df_vals = (kk - a_vals) * f_vals / mesh
    da_vals = mesh * (1.0 - f_vals**2) / 2.0

    prof = VortexProfile(k, float(mesh[-1]), mesh, f_vals, a_vals,
                         df_vals, da_vals, c)
    _validate_profile(prof, tol)
    return prof


def _validate_profile(p: VortexProfile, tol: float) -> None:
    kk = abs(p.k)
    if kk == 0:
        return
    if np.any(np.diff(p.f) < -1e-8) or np.any(np.diff(p.a) < -1e-8):
        raise RuntimeError("profile lost monotonicity")
    if not (1.0 - tol <= p.f[-1] <= 1.0 + 1e-12):
        raise RuntimeError(f"f(r_max) = {p.f[-1]} outside [1-tol, 1]")
    if p.a[-1] < kk - 1e-5:
        raise RuntimeError(f"a(r_max) = {p.a[-1]} below k - 1e-5")
    res_f, res_a = p.residuals()
    worst = max(float(np.max(np.abs(res_f))), float(np.max(np.abs(res_a))))
    if worst > 1e-8:
        raise RuntimeError(f"Bogomolny residual {worst:.2e} exceeds 1e-8")


def profile_energy(profile: VortexProfile) -> tuple[float, float]:
    """Radial energy integral and its defect from 2 pi |k|."""
    kk = abs(profile.k)
    if kk == 0:
        return 0.0, 0.0
    r, f, a = profile.r, profile.f, profile.a
    df, da = profile.df, profile.da
    dens = df**2 + (kk - a) ** 2 * f**2 / r**2 + (da / r) ** 2 + (1 - f**2) ** 2 / 4.0
    # r * density -> 0 at the origin, so close the mesh with a zero stub
    rr = np.concatenate([[0.0], r])
    integrand = np.concatenate([[0.0], dens * r])
    val = TWO_PI * float(np.trapezoid(integrand, rr))
    return val, val - TWO_PI * kk


def profile_csv(profile: VortexProfile) -> str:
    res_f, res_a = profile.residuals()
    lines = ["r,f,a,res_f,res_a"]
    for i in range(len(profile.r)):
        lines.append(
            f"{profile.r[i]:.10g},{profile.f[i]:.12g},{profile.a[i]:.12g},"
            f"{res_f[i]:.3e},{res_a[i]:.3e}"
        )
    return "\n".join(lines) + "\n"


# -- planar synthesis -------------------------------------------------------------

def _cutoff(rho: np.ndarray, lam1: float, lam2: float
            ) -> tuple[np.ndarray, np.ndarray]:
    """C^1 cutoff: 1 below lam1, 0 above lam2, |chi'| <= pi/(2(lam2-lam1))."""
    w = lam2 - lam1
    s = np.clip((rho - lam1) / w, 0.0, 1.0)
    chi = 0.5 * (1.0 + np.cos(np.pi * s))
    dchi = np.where((rho > lam1) & (rho < lam2),
                    -0.5 * np.pi * np.sin(np.pi * s) / w, 0.0)
    return chi, dchi


def cutoff_radii(grid: Grid, eps: float, cutoff_scale: float,
                 min_sep: float = np.inf) -> tuple[float, float]:
    """Transition window [lam1, lam2] for settling a core to the vacuum.

    lam1 scales like eps^(3/4) until the torus geometry caps it at a
    third of the period; lam2 stays inside the injectivity radius of
    the periodic distance (and away from neighboring cores), so the cut
    fields are smooth on the torus and exactly vacuum beyond lam2.
    """
    lmin = min(grid.lengths)
    lam2 = min(0.48 * lmin, 0.45 * min_sep)
    lam1 = min(cutoff_scale * eps**0.75, lmin / 3.0, 0.75 * lam2)
    return lam1, lam2


def _periodic_delta(coord: np.ndarray, center: float, L: float) -> np.ndarray:
    d_ = (coord - center) % L
    return np.where(d_ > L / 2, d_ - L, d_)


def _plaquette_poisson(grid: Grid, source: np.ndarray) -> np.ndarray:
    """Solve (-Delta) xi = source on the plaquette array (source mean-zero)."""
    _, lam = fourier_symbols(grid)
    shat = np.fft.fftn(source)
    lam_safe = np.where(lam == 0.0, 1.0, lam)
    xi = shat / lam_safe
    xi[lam == 0.0] = 0.0
    return np.real(np.fft.ifftn(xi))


def synthesize_multi(grid: Grid, bg: BackgroundConnection,
                     vortices: list[tuple[tuple[float, float], int]],
                     eps: float, profiles: dict[int, VortexProfile] | None = None,
                     cutoff_scale: float = 2.5) -> PairState:
    """Plant signed vortices at plaquette centers of a 2-torus sector.

    vortices is a list of ((x, y), charge); the total charge must equal
    the sector flux.  Charges are placed at the nearest plaquette
    centers so that winding extraction identifies the cores exactly.
    The cutoff transition ends by min period / 3, inside the injectivity
    radius of the periodic distance, so all fields are smooth on the
    torus and identically vacuum beyond the transition.
    """
    if grid.n != 2:
        raise ValueError("planar synthesis needs a 2-torus grid")
    m_sector = grid.flux_int(0, 1)
    total = sum(q for _, q in vortices)
    if total != m_sector:
        raise ValueError(f"total charge {total} does not match sector flux {m_sector}")
    if eps > min(grid.lengths) / 5.0:
        raise ValueError("eps must be at most min period / 5")
    h = grid.spacing
    if profiles is None:
        profiles = {}
    for _, q in vortices:
        if abs(q) not in profiles:
            profiles[abs(q)] = solve_profile(abs(q))

    # snap centers to plaquette centers
    snapped = []
    for (cx, cy), q in vortices:
        ix = int(np.floor(cx / h[0])) % grid.dims[0]
        iy = int(np.floor(cy / h[1])) % grid.dims[1]
        snapped.append((((ix + 0.5) * h[0], (iy + 0.5) * h[1]), (ix, iy), q))

    min_sep = np.inf
    if len(snapped) > 1:
        for i in range(len(snapped)):
            for j in range(i + 1, len(snapped)):
                dx = _periodic_delta(np.array([snapped[i][0][0]]), snapped[j][0][0],
                                     grid.lengths[0])[0]
                dy = _periodic_delta(np.array([snapped[i][0][1]]), snapped[j][0][1],
                                     grid.lengths[1])[0]
                min_sep = min(min_sep, float(np.hypot(dx, dy)))
        if min_sep < 4.0 * eps:
            raise ValueError(f"cores separated by {min_sep:.3g} < 4 eps")
    lam1, lam2 = cutoff_radii(grid, eps, cutoff_scale, min_sep)

    # site coordinates; curvature is induced from the increment integrals
    x_site = grid.axis_coords(0)
    y_site = grid.axis_coords(1)

    modulus = np.ones(grid.dims)
    gamma = np.zeros((2,) + grid.dims)  # per-link target covariant increments
    core_target = np.zeros(grid.dims)

    for (cx, cy), (ix, iy), q in snapped:
        kk = abs(q)
        sgn = 1 if q > 0 else -1
        prof = profiles[kk]

        # modulus at sites
        dxs = _periodic_delta(x_site, cx, grid.lengths[0])
        dys = _periodic_delta(y_site, cy, grid.lengths[1])
        rho_s = np.hypot(dxs, dys)
        chi_s, _ = _cutoff(rho_s, lam1, lam2)
        modulus *= 1.0 - chi_s * (1.0 - prof.f_at(rho_s / eps, smooth=True))

        # covariant increment targets per link: the line integral of
        # (q - a_q) dtheta = q dtheta - [q - chi (q - a_q)] dtheta.  The
        # decaying part chi (q - a) dtheta is integrated by three-point
        # Gauss quadrature along the chord (it vanishes long before the
        # antipodal branch cut of the periodic angle); the pure winding
        # part uses the exact wrapped increment wherever the cutoff is
        # active, so every plaquette's winding content stays exactly
        # quantized and no O(1) curl defect leaks into the phase field.
        theta_site = np.arctan2(dys, dxs)
        nodes = (0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0)
        weights = (5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0)
        for j in range(2):
            dtheta = wrap_angle(np.roll(theta_site, -1, axis=j) - theta_site)
            num = np.zeros(grid.dims)
            den = np.zeros(grid.dims)
            rho_max = np.zeros(grid.dims)
            for t, wgt in zip(nodes, weights):
                px = dxs + (t * h[0] if j == 0 else 0.0)
                py = dys + (t * h[1] if j == 1 else 0.0)
                rho_t = np.hypot(px, py)
                rho_max = np.maximum(rho_max, rho_t)
                chi_t, _ = _cutoff(rho_t, lam1, lam2)
                coeff = chi_t * (kk - prof.a_at(rho_t / eps, smooth=True))
                with np.errstate(divide="ignore", invalid="ignore"):
                    dth_dt = np.where(rho_t > 0,
                                      (px * h[1] if j == 1 else -py * h[0]) / rho_t**2,
                                      0.0)
                num += wgt * coeff * dth_dt
                den += wgt * dth_dt
            inside = rho_max < lam2
            gamma[j] += sgn * (num + kk * np.where(inside, dtheta - den, 0.0))

        core_target[ix, iy] += TWO_PI * q

    # induce the curvature from the increment integrals: per plaquette,
    # omega_v = (2 pi q at cores - curl of gamma) / area.  This is a
    # second-order sampling of the continuum curvature (exact plaquette
    # averages of a dtheta line integrals) and is exactly compatible with
    # gamma by construction, so no spin-wave correction is needed and the
    # total lattice flux is exactly 2 pi m.
    curl = (
        gamma[0]
        + np.roll(gamma[1], -1, axis=0)
        - np.roll(gamma[0], -1, axis=1)
        - gamma[1]
    )
    omega_v = (core_target - curl) / (h[0] * h[1])
    g_src = omega_v - bg.plaquette_curvature.values[0]
    total_defect = abs(float(np.sum(g_src) * grid.cell_volume))
    if total_defect > 1e-8:
        raise RuntimeError(f"flux bookkeeping defect {total_defect:.2e}")
    xi = _plaquette_poisson(grid, g_src - np.mean(g_src))
    alpha = d_star(FormField(grid, 2, xi[None]))

    # kill the fractional holonomy of the two torus cycles with a harmonic
    # shift of alpha, so the phase increments integrate to a single-valued u
    ang = bg.link_angle.copy()
    for j in range(2):
        ang[j] -= h[j] * alpha.values[j]
    inc = gamma - ang
    for j in range(2):
        cyc = np.sum(inc[j], axis=j)  # cycle sums, equal mod 2 pi
        D = float(np.angle(np.mean(np.exp(1j * cyc))))
        alpha.values[j] -= D / (grid.dims[j] * h[j])
        ang[j] += D / grid.dims[j]
        inc[j] -= D / grid.dims[j]

    # integrate the section phase along a spanning tree of links
    phi = np.zeros(grid.dims)
    phi[0, 1:] = np.cumsum(inc[1][0, :-1])
    phi[1:, :] = phi[0:1, :] + np.cumsum(inc[0][:-1, :], axis=0)

    u = modulus * np.exp(1j * phi)
    pair = PairState(grid, bg, u, alpha, eps)

    # off-tree links must close up to 2 pi multiples
    worst = 0.0
    for j in range(2):
        delta = wrap_angle((np.roll(phi, -1, axis=j) - phi + ang[j]) - gamma[j])
        worst = max(worst, float(np.max(np.abs(delta))))
    if worst > 1e-6:
        raise RuntimeError(f"phase integration inconsistent by {worst:.2e}")
    return pair


def synthesize_planar(profile: VortexProfile, eps: float, grid: Grid,
                      bg: BackgroundConnection,
                      center: tuple[float, float] | None = None) -> PairState:
    """Single vortex of the profile's degree, centered in the sector's torus."""
    if center is None:
        center = (grid.lengths[0] / 2.0, grid.lengths[1] / 2.0)
    if eps > min(grid.lengths) / 10.0:
        raise ValueError("eps must be at most min period / 10")
    if grid.flux_int(0, 1) != profile.k:
        raise ValueError(
            f"sector flux {grid.flux_int(0, 1)} does not match degree {profile.k}"
        )
    return synthesize_multi(grid, bg, [(center, profile.k)], eps,
                            profiles={abs(profile.k): profile})


# -- recovery pairs in T^3 ----------------------------------------------------------

def loops_from_cycle(cycle) -> list[tuple[int, tuple[int, ...], int]]:
    """Decompose a dual 1-cycle into straight axis loops (axis, transverse, charge)."""
    from .currents import boundary

    grid = cycle.grid
    if cycle.dim != 1 or not cycle.dual:
        raise ValueError("recovery cycles are dual 1-currents")
    if boundary(cycle).cells:
        raise ValueError("recovery input must be a cycle")
    groups: dict[tuple[int, tuple[int, ...]], dict[int, int]] = {}
    for (x, axes), m in cycle.cells.items():
        l = axes[0]
        trans = tuple(c for i, c in enumerate(x) if i != l)
        groups.setdefault((l, trans), {})[x[l]] = m
    loops = []
    for (l, trans), fibers in groups.items():
        mults = set(fibers.values())
        if len(mults) != 1 or len(fibers) != grid.dims[l]:
            raise ValueError("cycle is not a union of straight axis loops")
        loops.append((l, trans, mults.pop()))
    return loops


def build_recovery_pair(grid: Grid, bg: BackgroundConnection, cycle,
                        eps: float, k_per_component: int = 1,
                        cutoff_scale: float = 2.5) -> PairState:
    """Vortex tube pair over a union of straight dual loops in T^3.

    Each loop of the cycle carries the scaled vortex profile in its
    normal 2-plane, cut off at radius ~ eps^(3/4) to the sector vacuum;
    the energy is 2 pi |k| length(cycle) (1 + o(1)).  The grid's flux
    sector must match the cycle's homology class.
    """
    if grid.n != 3:
        raise ValueError("recovery pairs are built on 3-torus grids")
    if not cycle.cells:
        if any(grid.flux_int(j, k) for j, k in grid.planes):
            raise ValueError("empty cycle in a twisted sector")
        from .lattice import vacuum_pair

        return vacuum_pair(grid, bg, eps)
    from .currents import DUAL_EDGE_SIGN

    loops = loops_from_cycle(cycle)
    by_axis: dict[int, list[tuple[tuple[int, ...], int]]] = {}
    for l, trans, mult in loops:
        by_axis.setdefault(l, []).append((trans, mult * k_per_component))

    # same-axis loops must keep their cores apart
    for l, items in by_axis.items():
        j, k = [a for a in range(3) if a != l]
        for i1 in range(len(items)):
            for i2 in range(i1 + 1, len(items)):
                t1, t2 = items[i1][0], items[i2][0]
                d1 = abs(t1[0] - t2[0]) % grid.dims[j]
                d1 = min(d1, grid.dims[j] - d1) * grid.spacing[j]
                d2 = abs(t1[1] - t2[1]) % grid.dims[k]
                d2 = min(d2, grid.dims[k] - d2) * grid.spacing[k]
                sep = float(np.hypot(d1, d2))
                if sep < 6.0 * eps:
                    raise ValueError(f"loops separated by {sep:.3g} < 6 eps")

    # sector consistency: the plaquette windings of each plane must total m_{jk}
    for j, k in grid.planes:
        l = ({0, 1, 2} - {j, k}).pop()
        sgn = DUAL_EDGE_SIGN[(j, k)]
        charge = sgn * sum(q for _, q in by_axis.get(l, []))
        if grid.flux_int(j, k) != charge:
            raise ValueError(
                f"flux m_{j}{k} = {grid.flux_int(j, k)} does not match the "
                f"axis-{l} loop charge {charge}"
            )

    u3 = np.ones(grid.dims, dtype=complex)
    alpha3 = np.zeros(form_shape(grid, 1))
    for l, items in by_axis.items():
        j, k = [a for a in range(3) if a != l]
        sgn = DUAL_EDGE_SIGN[(j, k)]
        g2, bg2 = make_grid(
            2, (grid.dims[j], grid.dims[k]), (grid.lengths[j], grid.lengths[k]),
            grid.flux_int(j, k),
        )
        h2 = g2.spacing
        vortices = [(((trans[0] + 0.5) * h2[0], (trans[1] + 0.5) * h2[1]), sgn * q)
                    for trans, q in items]
        pair2 = synthesize_multi(g2, bg2, vortices, eps, cutoff_scale=cutoff_scale)
        u3 = u3 * np.expand_dims(pair2.u, axis=l)
        alpha3[j] += np.expand_dims(pair2.alpha.values[0], axis=l)
        alpha3[k] += np.expand_dims(pair2.alpha.values[1], axis=l)

    return PairState(grid, bg, u3, FormField(grid, 1, alpha3), eps)
