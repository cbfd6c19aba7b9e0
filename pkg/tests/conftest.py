import numpy as np
import pytest

from ymhlab.lattice import FormField, PairState, form_shape, make_grid
from ymhlab.vortex import solve_profile


def smooth_complex(grid, rng, modes=4, kmax=2):
    """Band-limited random field, peak-normalized to 1."""
    out = np.zeros(grid.dims, dtype=complex)
    for _ in range(modes):
        kvec = [rng.randint(-kmax, kmax + 1) for _ in range(grid.n)]
        phase = sum(2 * np.pi * kvec[j] * grid.axis_coords(j) / grid.lengths[j]
                    for j in range(grid.n))
        out += (rng.randn() + 1j * rng.randn()) * np.exp(1j * phase)
    peak = float(np.max(np.abs(out)))
    return out / peak if peak else out


def smooth_real(grid, rng, modes=4, kmax=2):
    return np.real(smooth_complex(grid, rng, modes, kmax))


def random_pair(grid, bg, rng, eps=0.3, amp_u=1.0, amp_a=1.0, smooth=True):
    if smooth:
        u = amp_u * smooth_complex(grid, rng)
        alpha = np.stack([amp_a * smooth_real(grid, rng) for _ in range(grid.n)])
    else:
        u = amp_u * (rng.randn(*grid.dims) + 1j * rng.randn(*grid.dims))
        alpha = amp_a * rng.randn(*form_shape(grid, 1))
    return PairState(grid, bg, u, FormField(grid, 1, alpha), eps)


@pytest.fixture(scope="session")
def profile_k1():
    return solve_profile(1)


@pytest.fixture(scope="session")
def profile_k2():
    return solve_profile(2)


@pytest.fixture(scope="session")
def profile_k3():
    return solve_profile(3)


@pytest.fixture(scope="session")
def grid2_trivial():
    return make_grid(2, (12, 10), (1.0, 1.4), 0)


@pytest.fixture(scope="session")
def grid2_flux1():
    return make_grid(2, (16, 16), (1.0, 1.0), 1)


@pytest.fixture(scope="session")
def grid3_twisted():
    return make_grid(3, (6, 8, 10), (1.0, 1.3, 0.7),
                     [[0, 2, 0], [-2, 0, 1], [0, -1, 0]])
