import numpy as np
import pytest

from ymhlab.functional import energy, jacobian_slice_integers
from ymhlab.flow import discrepancy
from ymhlab.currents import CubicalCurrent, extract_jacobian_current, homology_class
from ymhlab.lattice import make_grid
from ymhlab.vortex import (
    VortexProfile,
    build_recovery_pair,
    profile_energy,
    solve_profile,
    synthesize_multi,
    synthesize_planar,
)


def test_profile_invariants(profile_k1, profile_k2):
    for prof, k in ((profile_k1, 1), (profile_k2, 2)):
        assert prof.f_at(0.0) == 0.0
        assert prof.f[0] <= 0.05  # r0 head of the mesh
        assert np.all(np.diff(prof.f) >= -1e-8)
        assert np.all(np.diff(prof.a) >= -1e-8)
        assert prof.f[-1] >= 1 - 1e-6
        assert prof.a[-1] >= k - 1e-5
        res_f, res_a = prof.residuals()
        assert max(np.max(np.abs(res_f)), np.max(np.abs(res_a))) <= 1e-8


def test_profile_table_is_a_solution(profile_k1):
    # independent oracle: table derivatives against high-order finite
    # differences of the sampled values on the uniform part of the mesh
    p = profile_k1
    sel = (p.r > 1.0) & (p.r < 28.0)
    fd = np.gradient(p.f, p.r)
    assert np.max(np.abs(fd[sel] - p.df[sel])) <= 2e-4
    # and against an independent re-integration at a different tolerance
    from scipy.integrate import solve_ivp

    sol = solve_ivp(lambda r, y: [(1 - y[1]) * y[0] / r, r * (1 - y[0] ** 2) / 2],
                    (p.r[0], 8.0), (p.f[0], p.a[0]), rtol=1e-9, atol=1e-12,
                    dense_output=True)
    probe = np.linspace(0.5, 7.5, 40)
    f_ref = sol.sol(probe)[0]
    assert np.max(np.abs(p.f_at(probe) - f_ref)) <= 1e-6


def test_profile_exponential_decay(profile_k1):
    # gauge-invariant decay: 1 - f and k - a fall like e^{-r} up to
    # polynomial factors
    p = profile_k1
    for r1, r2 in ((10.0, 14.0), (14.0, 18.0)):
        g1, g2 = 1 - p.f_at(r1), 1 - p.f_at(r2)
        rate = np.log(g1 / g2) / (r2 - r1)
        assert 0.85 <= rate <= 1.15
        b1, b2 = 1 - p.a_at(r1), 1 - p.a_at(r2)
        rate = np.log(b1 / b2) / (r2 - r1)
        assert 0.8 <= rate <= 1.2


def test_profile_k0_is_vacuum():
    p = solve_profile(0)
    assert np.all(p.f == 1.0) and np.all(p.a == 0.0)
    assert profile_energy(p) == (0.0, 0.0)


def test_profile_energy_quantization(profile_k1, profile_k3):
    E1, d1 = profile_energy(profile_k1)
    assert abs(d1) <= 0.005 * 2 * np.pi
    E3, d3 = profile_energy(profile_k3)
    assert abs(d3) <= 0.005 * 6 * np.pi


def test_profile_energy_quadrature_order(profile_k1):
    # coarsening the mesh by 2 and 4 should show second-order quadrature
    p = profile_k1
    defects = []
    for step in (4, 2, 1):
        sub = VortexProfile(p.k, p.r_max, p.r[::step], p.f[::step], p.a[::step],
                            p.df[::step], p.da[::step], p.shoot_coefficient)
        defects.append(abs(profile_energy(sub)[1] - profile_energy(p)[1]))
    order = np.log2(defects[0] / defects[1])
    assert order >= 1.8


def test_profile_rejects_small_rmax():
    with pytest.raises(ValueError):
        solve_profile(1, r_max=10.0)


def test_synthesize_energy_band(profile_k1):
    g, bg = make_grid(2, (256, 256), (4.0, 4.0), 1)
    pair = synthesize_planar(profile_k1, 0.05, g, bg)
    E = energy(pair).total
    assert 0.98 * 2 * np.pi <= E <= 1.03 * 2 * np.pi
    for plane, vals in jacobian_slice_integers(pair).items():
        assert np.allclose(vals, 1.0, atol=1e-9)


def test_synthesize_discrepancy_refinement(profile_k1):
    # self-duality: xi -> 0 under h-refinement; band frozen from the
    # observed second-order sampling error of this construction
    vals = []
    for N in (128, 256):
        g, bg = make_grid(2, (N, N), (1.0, 1.0), 1)
        pair = synthesize_planar(profile_k1, 0.05, g, bg)
        vals.append(float(np.max(np.abs(discrepancy(pair)))))
    assert vals[0] / vals[1] >= 1.8
    assert vals[1] <= 0.020


def test_synthesize_sector_mismatch(profile_k2):
    g, bg = make_grid(2, (64, 64), (1.0, 1.0), 1)
    with pytest.raises(ValueError, match="flux"):
        synthesize_planar(profile_k2, 0.05, g, bg)


def test_synthesize_core_separation_guard(profile_k1):
    g, bg = make_grid(2, (64, 64), (1.0, 1.0), 0)
    with pytest.raises(ValueError, match="4 eps"):
        synthesize_multi(g, bg, [((0.5, 0.5), 1), ((0.55, 0.5), -1)], 0.05)


def test_recovery_empty_cycle_is_vacuum():
    g, bg = make_grid(3, (8, 8, 8), (1.0, 1.0, 1.0), [[0, 0, 0]] * 3)
    pair = build_recovery_pair(g, bg, CubicalCurrent.zero(g, 1, dual=True), 0.1)
    assert energy(pair).total == 0.0


def test_recovery_single_loop(profile_k1):
    g, bg = make_grid(3, (48, 48, 8), (1.0, 1.0, 1.0),
                      [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    cyc = CubicalCurrent(g, 1, {((24, 24, t), (2,)): 1 for t in range(8)}, dual=True)
    pair = build_recovery_pair(g, bg, cyc, 0.1)
    E = energy(pair).total
    assert 0.9 * 2 * np.pi <= E <= 1.15 * 2 * np.pi
    cur, resid = extract_jacobian_current(pair)
    assert cur == cyc
    assert homology_class(cur) == (0, 0, 1)


def test_recovery_two_loops_additive(profile_k1):
    eps = 0.05
    g1, bg1 = make_grid(3, (64, 64, 8), (1.0, 1.0, 1.0),
                        [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    c1 = CubicalCurrent(g1, 1, {((32, 32, t), (2,)): 1 for t in range(8)}, dual=True)
    E1 = energy(build_recovery_pair(g1, bg1, c1, eps)).total
    g2, bg2 = make_grid(3, (64, 64, 8), (1.0, 1.0, 1.0),
                        [[0, 2, 0], [-2, 0, 0], [0, 0, 0]])
    cells = {}
    for t in range(8):
        cells[((16, 32, t), (2,))] = 1
        cells[((48, 32, t), (2,))] = 1
    c2 = CubicalCurrent(g2, 1, cells, dual=True)
    pair2 = build_recovery_pair(g2, bg2, c2, eps)
    E2 = energy(pair2).total
    assert abs(E2 - 2 * E1) <= 0.02 * 2 * E1
    cur, _ = extract_jacobian_current(pair2)
    assert cur == c2


def test_recovery_rejects_homology_mismatch():
    g, bg = make_grid(3, (16, 16, 8), (1.0, 1.0, 1.0),
                      [[0, 2, 0], [-2, 0, 0], [0, 0, 0]])
    cyc = CubicalCurrent(g, 1, {((8, 8, t), (2,)): 1 for t in range(8)}, dual=True)
    with pytest.raises(ValueError, match="flux"):
        build_recovery_pair(g, bg, cyc, 0.1)


def test_recovery_rejects_crooked_cycle():
    g, bg = make_grid(3, (8, 8, 8), (1.0, 1.0, 1.0),
                      [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    cells = {((4, 4, t), (2,)): 1 for t in range(7)}
    cells[((4, 5, 7), (2,))] = 1
    with pytest.raises(ValueError):
        build_recovery_pair(g, bg, CubicalCurrent(g, 1, cells, dual=True), 0.1)
