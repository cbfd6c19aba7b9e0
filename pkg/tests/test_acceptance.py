"""Acceptance suite: one test per criterion, printed as a pass/fail line.

All tolerances are pinned here; heavy runs are shared through session
fixtures.  The module is ordered so the cheap exact-identity criteria
run first and the long flows last.
"""

import itertools
import time

import numpy as np
import pytest

from conftest import random_pair, smooth_complex, smooth_real
from ymhlab.currents import (
    CubicalCurrent,
    DiscreteFamily,
    almgren_class,
    boundary,
    extract_jacobian_current,
    flat_norm,
    homology_class,
    mass,
    width_bruteforce,
)
from ymhlab.experiments import ExperimentConfig, cmd_minimize, cmd_width
from ymhlab.flow import (
    FlowParams,
    density_ratio,
    discrepancy,
    guard_dt,
    monotonicity_profile,
    run,
)
from ymhlab.functional import (
    energy,
    jacobian_form,
    jacobian_site_abs,
    jacobian_slice_integers,
    lipschitz_proxy,
)
from ymhlab.lattice import (
    FormField,
    PairState,
    d,
    form_shape,
    gauge_transform,
    make_grid,
    winding_theta,
)
from ymhlab.vortex import (
    build_recovery_pair,
    profile_energy,
    solve_profile,
    synthesize_planar,
)


def report(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


# -- shared heavy runs ----------------------------------------------------------


@pytest.fixture(scope="session")
def minimize_t2_sweep(tmp_path_factory):
    cfg = ExperimentConfig.parse(
        "grid.n = 2\n"
        "grid.flux = 1\n"
        "grid.lengths = 1.0,1.0\n"
        "eps.list = 0.2,0.1,0.05\n"
        "minimize.dims_list = 32,32;64,64;128,128\n"
        "minimize.noise = 0.3\n"
        "flow.t_end = 6.0\n"
        "flow.monitor_stride = 50\n"
        "seed = 2026\n"
    )
    out = tmp_path_factory.mktemp("minimize_t2")
    return cmd_minimize(cfg, str(out))


@pytest.fixture(scope="session")
def minimize_t3(tmp_path_factory):
    cfg = ExperimentConfig.parse(
        "grid.n = 3\n"
        "grid.flux = 1,0,0\n"
        "grid.lengths = 1.0,1.0,1.0\n"
        "eps.list = 0.1\n"
        "minimize.dims_list = 64,64,64\n"
        "minimize.noise = 0.25\n"
        "flow.t_end = 4.0\n"
        "flow.monitor_stride = 50\n"
        "seed = 2027\n"
    )
    out = tmp_path_factory.mktemp("minimize_t3")
    return cmd_minimize(cfg, str(out))


@pytest.fixture(scope="session")
def vortex_flow_benchmark(profile_k1):
    """Vortex-seeded flows to t = 3 across the eps sweep at fixed setup.

    The torus has period 2 so the planar synthesis precondition
    eps <= l/10 holds for the whole sweep.
    """
    runs = {}
    for eps, N in ((0.2, 64), (0.1, 128), (0.05, 256)):
        g, bg = make_grid(2, (N, N), (2.0, 2.0), 1)
        pair = synthesize_planar(profile_k1, eps, g, bg)
        dt = guard_dt(g, eps, "imex")
        stride = max(1, int(round(0.0625 / dt)))
        params = FlowParams(dt=dt, t_end=3.0, scheme="imex",
                            monitor_stride=stride, snapshot_stride=stride,
                            stationarity_tol=0.0)
        traj, final = run(pair, params)
        runs[eps] = (g, traj, final)
    return runs


@pytest.fixture(scope="session")
def line_flow_benchmark():
    """Straight-line recovery flows to t = 2 in T^3 across the eps sweep.

    The initial data is invariant along the loop axis, so a thin grid in
    that direction samples the same three-dimensional flow cheaply.
    """
    runs = {}
    for eps, N in ((0.2, 64), (0.1, 128), (0.05, 256)):
        g, bg = make_grid(3, (N, N, 8), (2.0, 2.0, 1.0),
                          [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
        cyc = CubicalCurrent(g, 1, {((N // 2, N // 2, t), (2,)): 1
                                    for t in range(8)}, dual=True)
        pair = build_recovery_pair(g, bg, cyc, eps)
        dt = guard_dt(g, eps, "imex")
        params = FlowParams(dt=dt, t_end=2.0, scheme="imex",
                            monitor_stride=10**9, stationarity_tol=0.0)
        _, final = run(pair, params)
        x0 = ((N // 2 + 0.5) * 2.0 / N, (N // 2 + 0.5) * 2.0 / N, 0.5)
        runs[eps] = (g, final, x0)
    return runs


# -- criteria -------------------------------------------------------------------


def test_c01_vortex_quantization():
    worst_defect, worst_time = 0.0, 0.0
    for k in (1, 2, 3):
        t0 = time.time()
        prof = solve_profile(k)
        E, defect = profile_energy(prof)
        dt_s = time.time() - t0
        worst_defect = max(worst_defect, abs(defect) / (2 * np.pi * k))
        worst_time = max(worst_time, dt_s)
    report("C1 vortex quantization",
           worst_defect <= 0.005 and worst_time < 1.0,
           f"max rel defect {worst_defect:.2e}, max time {worst_time:.2f}s")


def test_c02_self_duality_discrepancy(profile_k1):
    res_f, res_a = profile_k1.residuals()
    bogo = max(np.max(np.abs(res_f)), np.max(np.abs(res_a)))
    xi = {}
    for N in (128, 256):
        g, bg = make_grid(2, (N, N), (1.0, 1.0), 1)
        pair = synthesize_planar(profile_k1, 0.05, g, bg)
        xi[N] = float(np.max(np.abs(discrepancy(pair))))
    ratio = xi[128] / xi[256]
    report("C2 self-duality",
           ratio >= 1.8 and bogo <= 1e-8,
           f"xi 128/256 = {xi[128]:.4f}/{xi[256]:.4f} ratio {ratio:.2f}, "
           f"Bogomolny residual {bogo:.1e}")


def test_c03_jacobian_bound():
    rng = np.random.RandomState(11)
    violations = 0
    for trial in range(100):
        if trial % 2 == 0:
            g, bg = make_grid(2, (20, 20), (1.0, 1.0), rng.randint(-2, 3))
        else:
            m01 = rng.randint(-1, 2)
            g, bg = make_grid(3, (8, 8, 8), (1.0, 1.0, 1.0),
                              [[0, m01, 0], [-m01, 0, 0], [0, 0, 0]])
        eps = rng.uniform(0.1, 1.0)
        pair = random_pair(g, bg, rng, eps=eps, smooth=(trial % 3 != 0))
        band = energy(pair).density + 10 * min(g.spacing) * lipschitz_proxy(pair)
        violations += int(np.any(jacobian_site_abs(pair) > band + 1e-12))
    report("C3 Jacobian bound", violations == 0,
           f"{violations} violations on 100 random pairs")


def test_c04_exact_invariants(grid3_twisted, grid2_flux1):
    rng = np.random.RandomState(12)
    worst_gauge = 0.0
    worst_flux = 0.0
    for (g, bg) in (grid3_twisted, grid2_flux1):
        pair = random_pair(g, bg, rng, smooth=False)
        obs0 = _gauge_invariants(pair)
        theta = 1.7 * smooth_real(g, rng)
        winding = tuple(rng.randint(-1, 2) for _ in range(g.n))
        for p2 in (gauge_transform(pair, theta),
                   gauge_transform(pair, winding_theta(g, winding), wrap=True)):
            obs1 = _gauge_invariants(p2)
            for a, b in zip(obs0, obs1):
                worst_gauge = max(worst_gauge, abs(a - b) / max(abs(a), 1e-30))
        for plane, vals in jacobian_slice_integers(pair).items():
            worst_flux = max(worst_flux, float(np.max(np.abs(vals - g.flux_int(*plane)))))
        theta0 = FormField(g, 0, rng.randn(*g.dims))
        dd = d(d(theta0))
        assert np.max(np.abs(dd.values)) <= 1e-12 / min(g.spacing) ** 2
    chain = CubicalCurrent(grid2_flux1[0], 2, {((3, 4), (0, 1)): 2, ((0, 0), (0, 1)): -1})
    bb = boundary(boundary(chain))
    report("C4 exact invariants",
           worst_gauge <= 1e-12 and worst_flux <= 1e-9 and bb.cells == {},
           f"gauge rel {worst_gauge:.1e}, slice defect {worst_flux:.1e}, dd=0, bdry^2=0")


def _gauge_invariants(pair):
    rep = energy(pair)
    xi = discrepancy(pair)
    J = jacobian_form(pair)
    return (rep.total, rep.gradient_part, rep.curvature_part, rep.potential_part,
            float(np.max(rep.density)), float(np.max(np.abs(xi))),
            float(np.max(np.abs(J.values))))


def test_c05_flow_correctness(profile_k1):
    g, bg = make_grid(2, (32, 32), (1.0, 1.0), 1)
    pv = synthesize_planar(profile_k1, 0.1, g, bg)
    rng = np.random.RandomState(13)
    u = pv.u * (1 + 0.2 * smooth_complex(g, rng))
    u /= np.maximum(np.abs(u), 1.0)
    pair = PairState(g, bg, u, pv.alpha, 0.1)
    dt = guard_dt(g, 0.1, "explicit")
    traj, _ = run(pair, FlowParams(dt=dt, t_end=2000 * dt, scheme="explicit",
                                   monitor_stride=200))
    E = traj.energies()
    mono_ok = bool(np.all(np.diff(E) <= 1e-8 * E[0]))
    maxu_ok = max(traj.max_abs_u) <= 1 + 1e-9
    res_full = max(traj.dissipation_residual[1:])
    traj2, _ = run(pair, FlowParams(dt=dt / 2, t_end=2000 * dt, scheme="explicit",
                                    monitor_stride=400))
    res_half = max(traj2.dissipation_residual[1:])
    dissip_ok = res_full <= 0.01 and res_half <= 0.62 * res_full

    # direct vs Coulomb comparison on a state with order-one energy whose
    # dynamics is still live at t = 1: a perturbed vortex/antivortex pair
    from ymhlab.vortex import synthesize_multi

    gt, bgt = make_grid(2, (64, 64), (1.0, 1.0), 0)
    rngc = np.random.RandomState(14)
    pp = synthesize_multi(gt, bgt, [((0.25, 0.5), 1), ((0.75, 0.5), -1)], 0.05)
    uc = pp.u * (1 + 0.15 * smooth_complex(gt, rngc))
    uc /= np.maximum(np.abs(uc), 1.0)
    slow = PairState(gt, bgt, uc, pp.alpha, 0.05)
    dt_i = 0.25 * guard_dt(gt, 0.05, "imex")
    finals = {}
    for mode in ("direct", "coulomb"):
        _, finals[mode] = run(slow, FlowParams(
            dt=dt_i, t_end=1.0, scheme="imex", gauge_mode=mode,
            monitor_stride=10**9, stationarity_tol=0.0))
    obs_d = _gauge_invariants(finals["direct"])
    obs_c = _gauge_invariants(finals["coulomb"])
    rel = max(abs(a - b) / max(abs(a), 1e-12) for a, b in zip(obs_d, obs_c))
    Ed = obs_d[0]
    gauge_ok = rel <= 0.005 and Ed > 1.0
    report("C5 flow correctness",
           mono_ok and maxu_ok and dissip_ok and gauge_ok,
           f"monotone {mono_ok}, max|u| {max(traj.max_abs_u):.9f}, "
           f"dissipation {res_full:.4f}->{res_half:.4f}, "
           f"direct/coulomb rel {rel:.2e} at E {Ed:.3f}")


def test_c06_gamma_convergence_of_minimizers(minimize_t2_sweep, minimize_t3):
    rows = minimize_t2_sweep["runs"]
    devs = [abs(r["energy_over_2pi"] - 1.0) for r in rows]
    finest_ok = devs[-1] <= 0.10
    trend_ok = all(devs[i + 1] <= devs[i] + 0.02 for i in range(len(devs) - 1))
    mass_ok = all(r["mass"] == 1.0 for r in rows)
    r3 = minimize_t3["runs"][0]
    t3_ok = abs(r3["energy_over_2pi"] - 1.0) <= 0.20 and r3["class"] == (0, 0, 1)
    report("C6 minimizer convergence",
           finest_ok and trend_ok and mass_ok and t3_ok,
           f"T2 E/2pi {[round(r['energy_over_2pi'], 4) for r in rows]}, "
           f"T3 E/2pi {r3['energy_over_2pi']:.4f} class {r3['class']}")


def test_c07_recovery_sequence():
    results = {}
    for eps, N, tol in ((0.1, 64, 0.15), (0.05, 128, 0.10)):
        g, bg = make_grid(3, (N, N, 8), (1.0, 1.0, 1.0),
                          [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
        cyc = CubicalCurrent(g, 1, {((N // 2, N // 2, t), (2,)): 1
                                    for t in range(8)}, dual=True)
        pair = build_recovery_pair(g, bg, cyc, eps)
        E = energy(pair).total
        cur, _ = extract_jacobian_current(pair)
        results[eps] = (abs(E / (2 * np.pi) - 1.0), cur == cyc, tol)
    ok = all(dev <= tol and equal for dev, equal, tol in results.values())
    report("C7 recovery sequence", ok,
           ", ".join(f"eps={e}: dev {d:.3f} (tol {t}), cell-match {q}"
                     for e, (d, q, t) in results.items()))


def test_c08_liminf_ledger(minimize_t2_sweep, minimize_t3):
    total = sum(r["liminf_violations"] for r in minimize_t2_sweep["runs"])
    total += sum(r["liminf_violations"] for r in minimize_t3["runs"])
    report("C8 liminf ledger", total == 0,
           f"{total} violations across all recorded samples")


def test_c09_flat_norm_oracle():
    g, _ = make_grid(2, (6, 6), (1.0, 1.0), 0)
    classes = _flat_norm_classes(g, max_mass=4)
    worst = 0.0
    for cells in classes:
        S = CubicalCurrent(g, 0, dict(cells))
        lp = flat_norm(S, CubicalCurrent.zero(g, 0)).value
        bf = _flat_points_bruteforce(dict(cells), g)
        worst = max(worst, abs(lp - bf))
    rng = np.random.RandomState(14)
    metric_worst = 0.0
    for _ in range(1000):
        A, B, C = (_rand_points(g, rng) for _ in range(3))
        dAB = flat_norm(A, B).value
        dBA = flat_norm(B, A).value
        dAC = flat_norm(A, C).value
        dCB = flat_norm(C, B).value
        metric_worst = max(metric_worst, abs(dAB - dBA), dAB - (dAC + dCB))
    report("C9 flat norm oracle",
           worst <= 1e-8 and metric_worst <= 1e-9,
           f"{len(classes)} isometry classes, max |LP-BF| {worst:.1e}, "
           f"metric defect {metric_worst:.1e}")


def _flat_norm_classes(g, max_mass):
    """All nonzero 0-chains of mass <= max_mass up to torus isometries and sign."""
    N1, N2 = g.dims
    sites = [(i, j) for i in range(N1) for j in range(N2)]
    others = [s for s in sites if s != (0, 0)]
    atoms = [(s, 1) for s in others] + [(s, -1) for s in others]

    def canonical(cells):
        best = None
        pts = [(x, m) for (x, _), m in cells.items()]
        for flip in (1, -1):
            for sx, sy, swap in itertools.product((1, -1), (1, -1), (0, 1)):
                mapped = {}
                for (x, y), m in pts:
                    xx = (sx * x) % N1
                    yy = (sy * y) % N2
                    if swap:
                        xx, yy = yy, xx
                    mapped[(xx, yy)] = mapped.get((xx, yy), 0) + flip * m
                mapped = {k: v for k, v in mapped.items() if v}
                if not mapped:
                    return None
                ox, oy = min(mapped)
                shifted = tuple(sorted((((x - ox) % N1, (y - oy) % N2), m)
                                       for (x, y), m in mapped.items()))
                if best is None or shifted < best:
                    best = shifted
        return best

    seen = set()
    out = []
    for total in range(1, max_mass + 1):
        for m0_abs in range(1, total + 1):
            for m0 in (m0_abs, -m0_abs):
                rest = total - m0_abs
                for combo in itertools.combinations_with_replacement(atoms, rest):
                    cells = {((0, 0), ()): m0}
                    for s, sgn in combo:
                        key = (s, ())
                        cells[key] = cells.get(key, 0) + sgn
                    cells = {k: v for k, v in cells.items() if v}
                    if not cells or sum(abs(v) for v in cells.values()) > max_mass:
                        continue
                    if ((0, 0), ()) not in cells:
                        continue
                    key = canonical(cells)
                    if key is None or key in seen:
                        continue
                    seen.add(key)
                    out.append(tuple(cells.items()))
    return out


def _flat_points_bruteforce(cells, g):
    """Exhaustive matching-with-abandonment value of the flat norm."""
    plus = [x for (x, _), m in cells.items() for _ in range(max(m, 0))]
    minus = [x for (x, _), m in cells.items() for _ in range(max(-m, 0))]
    h = g.spacing

    def dist(a, b):
        out = 0.0
        for i in range(2):
            dd = abs(a[i] - b[i]) % g.dims[i]
            out += min(dd, g.dims[i] - dd) * h[i]
        return out

    best = np.inf
    nP, nM = len(plus), len(minus)
    for r in range(min(nP, nM) + 1):
        for psub in itertools.combinations(range(nP), r):
            for msub in itertools.permutations(range(nM), r):
                cost = (nP - r) + (nM - r)
                for i, j in zip(psub, msub):
                    cost += min(dist(plus[i], minus[j]), 2.0)
                best = min(best, cost)
    return best


def _rand_points(g, rng):
    cells = {}
    for _ in range(rng.randint(1, 4)):
        x = (rng.randint(g.dims[0]), rng.randint(g.dims[1]))
        cells[(x, ())] = cells.get((x, ()), 0) + rng.choice([-1, 1])
    return CubicalCurrent(g, 0, cells)


@pytest.fixture(scope="session")
def width_experiment(tmp_path_factory):
    cfg = ExperimentConfig.parse(
        "grid.dims = 48,48\n"
        "grid.lengths = 1.0,1.0\n"
        "eps.list = 0.1\n"
        "width.tighten_time = 2.0\n"
        "width.transport_samples = 10\n"
        "width.ledger_tol_rel = 0.1\n"
        "seed = 5\n"
    )
    out = tmp_path_factory.mktemp("width")
    return cmd_width(cfg, str(out))


def test_c10_almgren_bookkeeping(width_experiment):
    g, _ = make_grid(2, (6, 6), (1.0, 1.0), 0)
    # hand-built create-transport-annihilate family
    members = [CubicalCurrent.zero(g, 0)]
    for i in range(1, 6):
        members.append(CubicalCurrent(g, 0, {(((1 + i) % 6, 1), ()): 1,
                                             ((1, 1), ()): -1}))
    members.append(CubicalCurrent.zero(g, 0))
    while len(members) < 10:
        members.append(members[-1])
    fam = DiscreteFamily(1, 2, {(i,): members[i] for i in range(10)})
    hand_ok = almgren_class(fam) == (1, 0)

    rng = np.random.RandomState(15)
    additive_ok = True
    for _ in range(50):
        f1 = _random_cycle_family(g, rng)
        f2 = _random_cycle_family(g, rng)
        c1, c2 = almgren_class(f1), almgren_class(f2)
        cat = _concatenate_families(f1, f2)
        if almgren_class(cat) != (c1[0] + c2[0], c1[1] + c2[1]):
            additive_ok = False
            break

    w = width_experiment
    report("C10 Almgren bookkeeping",
           hand_ok and additive_ok and w["class"] == (1, 0) and w["ledger_ok"],
           f"hand class (1,0): {hand_ok}, concat additivity x50: {additive_ok}, "
           f"sweep class {w['class']}, maxE {w['max_energy']:.3f} vs "
           f"2piW {2 * np.pi * w['width']:.3f} (ledger {w['ledger_ok']})")


def _random_cycle_family(g, rng):
    zero = CubicalCurrent.zero(g, 0)
    members = [zero]
    p = [rng.randint(6), rng.randint(6)]
    q = (p[0], (p[1] + 1) % 6)
    members.append(CubicalCurrent(g, 0, {(tuple(p), ()): 1, (q, ()): -1}))
    for _ in range(6):
        axis = rng.randint(2)
        stepd = rng.choice([-1, 1])
        cand = list(p)
        cand[axis] = (cand[axis] + stepd) % 6
        if tuple(cand) == q:
            continue
        p = cand
        members.append(CubicalCurrent(g, 0, {(tuple(p), ()): 1, (q, ()): -1}))
    target = (q[0], (q[1] + 1) % 6)
    if tuple(p) != target:
        if p[0] == q[0] and p[1] != target[1]:
            p[0] = (p[0] + 1) % 6
            members.append(CubicalCurrent(g, 0, {(tuple(p), ()): 1, (q, ()): -1}))
        for axis in (1, 0):
            while p[axis] != target[axis]:
                dd = (target[axis] - p[axis]) % 6
                p[axis] = (p[axis] + (1 if dd <= 3 else -1)) % 6
                members.append(CubicalCurrent(g, 0, {(tuple(p), ()): 1,
                                                     (q, ()): -1}))
    members.append(zero)
    j = 0
    while 3**j + 1 < len(members):
        j += 1
    while len(members) < 3**j + 1:
        members.append(zero)
    return DiscreteFamily(1, j, {(i,): members[i] for i in range(3**j + 1)})


def _concatenate_families(f1, f2):
    seq = [f1.values[(i,)] for i in range(f1.N + 1)]
    seq += [f2.values[(i,)] for i in range(1, f2.N + 1)]
    j = 0
    while 3**j + 1 < len(seq):
        j += 1
    while len(seq) < 3**j + 1:
        seq.append(seq[-1])
    return DiscreteFamily(1, j, {(i,): seq[i] for i in range(3**j + 1)})


def test_c11_monotonicity(vortex_flow_benchmark, line_flow_benchmark):
    ratio_cap = 10.0
    density_cap = 50.0
    ratios = {}
    for eps, (g, traj, _) in vortex_flow_benchmark.items():
        rep = monotonicity_profile(traj, T=2.5, x0=(1.0, 1.0), C2=1.0)
        ratios[eps] = rep.ratio
    profile_ok = all(r <= ratio_cap for r in ratios.values())

    densities = {}
    for eps, (g, final, x0) in line_flow_benchmark.items():
        best, _ = density_ratio(final, x0)
        densities[eps] = best
    density_ok = all(v <= density_cap for v in densities.values())
    report("C11 monotonicity",
           profile_ok and density_ok,
           f"Psi ratios {dict((k, round(v, 3)) for k, v in ratios.items())} "
           f"(cap {ratio_cap}); density maxima "
           f"{dict((k, round(v, 2)) for k, v in densities.items())} (cap {density_cap})")
