"""Spectral Hodge theory on the periodic grid.

Poisson solves and projections are done through the exact discrete
Fourier symbol of the cubical Laplacian, so defining identities
(adjointness, P^2 = P, reconstruction) hold to solver tolerance with no
iteration.  Harmonic one-forms on the flat torus are the per-direction
constants; the large-gauge lattice {2 pi k_j / l_j dx_j} acts on their
coefficients by translation, and gauge normalization reduces a pair to
the fundamental cell of that lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    FormField,
    Grid,
    PairState,
    TWO_PI,
    d,
    fourier_symbols,
    gauge_transform,
    integral,
    winding_theta,
)


def poisson_solve(f: FormField, tol: float = 1e-10) -> FormField:
    """Solve d* d theta = f for a mean-zero 0-form, spectrally.

    Rejects inputs whose mean is not zero (relative to the L2 norm of
    f), reporting the defect.
    """
    if f.degree != 0:
        raise ValueError("poisson_solve takes a 0-form")
    grid = f.grid
    mean_defect = abs(integral(f))
    scale = float(np.sqrt(np.sum(f.values**2)) * grid.cell_volume) + 1e-300
    if mean_defect > tol * max(1.0, scale):
        raise ValueError(
            f"poisson_solve needs a mean-zero source; defect {mean_defect:.3e}"
        )
    _, lam = fourier_symbols(grid)
    fhat = np.fft.fftn(f.values)
    lam_safe = lam.copy()
    zero = lam_safe == 0.0
    lam_safe[zero] = 1.0
    theta_hat = fhat / lam_safe
    theta_hat[zero] = 0.0
    theta = np.real(np.fft.ifftn(theta_hat))
    return FormField(grid, 0, theta)


def _poisson_scalar(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Laplacian solve for a raw scalar array (plaquette grids share the symbol)."""
    _, lam = fourier_symbols(grid)
    fhat = np.fft.fftn(values)
    lam_safe = lam.copy()
    zero = lam_safe == 0.0
    lam_safe[zero] = 1.0
    out = fhat / lam_safe
    out[zero] = 0.0
    return np.real(np.fft.ifftn(out))


@dataclass
class HodgeSplit:
    """Orthogonal decomposition of a one-form on the flat torus."""

    exact: FormField       # d(psi), psi mean-zero
    coexact: FormField     # d*(xi) component
    harmonic: FormField    # per-direction constants
    potential: FormField   # the mean-zero 0-form psi with exact = d(psi)

    def reconstruct(self) -> FormField:
        grid = self.exact.grid
        return FormField(grid, 1, self.exact.values + self.coexact.values + self.harmonic.values)


def hodge_decompose(alpha: FormField) -> HodgeSplit:
    if alpha.degree != 1:
        raise ValueError("hodge_decompose takes a one-form")
    grid = alpha.grid
    harm = np.zeros_like(alpha.values)
    for j in range(grid.n):
        harm[j] = np.mean(alpha.values[j])
    from .lattice import d_star

    psi = poisson_solve(d_star(alpha), tol=1e-6)  # d* alpha is mean-zero by telescoping
    exact = d(psi)
    coex = alpha.values - harm - exact.values
    return HodgeSplit(
        exact=exact,
        coexact=FormField(grid, 1, coex),
        harmonic=FormField(grid, 1, harm),
        potential=psi,
    )


def harmonic_coefficients(alpha: FormField) -> np.ndarray:
    return np.array([float(np.mean(alpha.values[j])) for j in range(alpha.grid.n)])


def coulomb_project(pair: PairState) -> PairState:
    """Gauge-transform to d* alpha = 0; gauge-invariant observables unchanged."""
    from .lattice import d_star

    theta = poisson_solve(FormField(pair.grid, 0, -d_star(pair.alpha).values), tol=1e-6)
    return gauge_transform(pair, theta.values, wrap=False)


def normalize_gauge(pair: PairState) -> PairState:
    """Coulomb gauge plus reduction of the harmonic part to its fundamental cell.

    After projection, the nearest point of the large-gauge lattice
    {2 pi k_j / l_j} is subtracted through a winding gauge
    transformation; ties at half-integers break toward the smaller
    integer.  The resulting harmonic coefficients lie in
    [-pi/l_j, pi/l_j] per direction.
    """
    out = coulomb_project(pair)
    coeffs = harmonic_coefficients(out.alpha)
    winding = []
    for j, c in enumerate(coeffs):
        x = c * out.grid.lengths[j] / TWO_PI
        winding.append(int(np.ceil(x - 0.5)))
    if any(winding):
        theta = winding_theta(out.grid, tuple(-k for k in winding))
        out = gauge_transform(out, theta, wrap=True)
    return out


def p_project(lam: FormField) -> FormField:
    """Hodge projection onto the co-closed part: P(a) = a + d Q a."""
    if lam.degree != 1:
        raise ValueError("p_project takes a one-form")
    split = hodge_decompose(lam)
    return FormField(lam.grid, 1, split.coexact.values + split.harmonic.values)


def q_operator(lam: FormField) -> FormField:
    """Mean-zero 0-form Q(a) with d Q a = -(exact part of a)."""
    if lam.degree != 1:
        raise ValueError("Q takes a one-form")
    from .lattice import d_star

    return FormField(lam.grid, 0, -poisson_solve(d_star(lam), tol=1e-6).values)


def q_scalar(grid: Grid, link_values: np.ndarray) -> np.ndarray:
    """Q applied to a raw one-form array (helper for the Coulomb flow)."""
    return q_operator(FormField(grid, 1, link_values)).values
