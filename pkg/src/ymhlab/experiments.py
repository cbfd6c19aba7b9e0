"""Experiment drivers: reproducible runs with machine-readable outputs.

Each driver takes an ExperimentConfig, runs deterministically from the
config seed, writes CSV tables plus the resolved config and a checksum
manifest into the output directory, and returns a summary dict that the
command line prints and the acceptance suite asserts against.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .lattice import (
    FormField,
    Grid,
    PairState,
    make_grid,
    write_snapshot,
)
from .functional import ENERGY_CSV_HEADER, energy, residual_norm
from .flow import (
    FlowParams,
    Trajectory,
    density_ratio,
    guard_dt,
    monotonicity_profile,
    run,
)
from .vortex import (
    build_recovery_pair,
    profile_csv,
    profile_energy,
    solve_profile,
    synthesize_multi,
)
from .currents import (
    CubicalCurrent,
    DiscreteFamily,
    almgren_class,
    extract_jacobian_current,
    fineness,
    flat_norm,
    homology_class,
    width_bruteforce,
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Flat key = value configuration with dotted namespaces.

    Unknown keys are rejected against the registry of the experiment
    being run; every run writes the resolved key set next to its
    outputs.
    """

    values: dict[str, str] = field(default_factory=dict)
    used: dict[str, str] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"line {lineno}: empty key")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key}")
            values[key] = val.strip()
        return cls(values=values)

    def get(self, key: str, default=None, conv=str):
        if key in self.values:
            raw = self.values[key]
        elif default is not None:
            raw = str(default)
        else:
            raise ConfigError(f"missing required config key {key}")
        self.used[key] = raw
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})")

    def get_float(self, key, default=None):
        return self.get(key, default, float)

    def get_int(self, key, default=None):
        return self.get(key, default, int)

    def get_list(self, key, default=None, conv=float):
        raw = self.get(key, default, str)
        return [conv(tok) for tok in raw.split(",") if tok.strip() != ""]

    def get_bool(self, key, default=None):
        raw = self.get(key, default, str).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")

    def reject_unknown(self, known_prefixes: set[str]):
        for key in self.values:
            root = key.split(".", 1)[0]
            if root not in known_prefixes:
                raise ConfigError(f"unknown config key {key}")

    def resolved_text(self) -> str:
        lines = [f"{k} = {v}" for k, v in sorted(self.used.items())]
        return "\n".join(lines) + "\n"


COMMON_KEYS = {"grid", "eps", "flow", "seed", "out", "threads"}


def _grid_from_config(cfg: ExperimentConfig, prefix="grid"):
    n = cfg.get_int(f"{prefix}.n", 2)
    dims = tuple(cfg.get_list(f"{prefix}.dims", "64,64", int))
    lengths = tuple(cfg.get_list(f"{prefix}.lengths", ",".join(["1.0"] * n)))
    if n == 2:
        flux = cfg.get_int(f"{prefix}.flux", 0)
    else:
        up = cfg.get_list(f"{prefix}.flux", "0,0,0", int)  # m01, m02, m12
        flux = [[0, up[0], up[1]], [-up[0], 0, up[2]], [-up[1], -up[2], 0]]
    return make_grid(n, dims, lengths, flux)


def _smooth_complex(grid: Grid, rng: np.random.RandomState, modes: int = 4) -> np.ndarray:
    out = np.zeros(grid.dims, dtype=complex)
    for _ in range(modes):
        kvec = [rng.randint(-2, 3) for _ in range(grid.n)]
        phase = sum(2 * np.pi * kvec[j] * grid.axis_coords(j) / grid.lengths[j]
                    for j in range(grid.n))
        out += (rng.randn() + 1j * rng.randn()) * np.exp(1j * phase)
    peak = float(np.max(np.abs(out)))
    return out / peak if peak > 0 else out


def seeded_start(grid: Grid, bg, eps: float, seed: int, noise: float,
                 cycle: CubicalCurrent | None = None) -> PairState:
    """Deterministic sector-consistent start: seeded cores plus smooth noise.

    Multiplicative noise on the section keeps its zeros (and the forced
    windings) co-located with the cores, so the pointwise Jacobian bound
    applies from the first recorded sample.
    """
    rng = np.random.RandomState(seed)
    if grid.n == 2:
        m = grid.flux_int(0, 1)
        if m == 0:
            pair = PairState(grid, bg, np.ones(grid.dims, dtype=complex),
                             FormField.zeros(grid, 1), eps)
        else:
            sgn = 1 if m > 0 else -1
            count = abs(m)
            centers = [((i + 0.5) / count * grid.lengths[0] + 0.23 * grid.lengths[0] / count,
                        0.5 * grid.lengths[1]) for i in range(count)]
            pair = synthesize_multi(grid, bg, [(c, sgn) for c in centers], eps)
    else:
        if cycle is None:
            cells = {}
            for p, (j, k) in enumerate(grid.planes):
                mjk = grid.flux_int(j, k)
                if mjk == 0:
                    continue
                l = ({0, 1, 2} - {j, k}).pop()
                from .currents import DUAL_EDGE_SIGN

                q = DUAL_EDGE_SIGN[(j, k)] * mjk
                trans = (grid.dims[j] // 2, grid.dims[k] // 2)
                for t in range(grid.dims[l]):
                    x = [0, 0, 0]
                    x[l] = t
                    x[j], x[k] = trans
                    cells[(tuple(x), (l,))] = q
            cycle = CubicalCurrent(grid, 1, cells, dual=True)
        pair = build_recovery_pair(grid, bg, cycle, eps)
    if noise > 0:
        mod = 1.0 + noise * _smooth_complex(grid, rng)
        u = pair.u * mod
        mag = np.abs(u)
        u = np.where(mag > 1.0, u / np.maximum(mag, 1e-300), u)
        alpha = pair.alpha.values.copy()
        for j in range(grid.n):
            alpha[j] += noise * np.real(_smooth_complex(grid, rng))
        pair = PairState(grid, bg, u, FormField(grid, 1, alpha), eps)
    return pair


# -- output plumbing ---------------------------------------------------------------

def _write(outdir: str, name: str, text: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def finalize_outputs(outdir: str, cfg: ExperimentConfig) -> None:
    """Write the resolved config, version stamp, and checksum manifest."""
    _write(outdir, "resolved_config.txt", cfg.resolved_text())
    _write(outdir, "version_stamp.txt", f"ymhlab {__version__}\n")
    rows = []
    for name in sorted(os.listdir(outdir)):
        if name == "manifest.txt":
            continue
        path = os.path.join(outdir, name)
        if os.path.isfile(path):
            digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
            rows.append(f"{digest}  {name}")
    _write(outdir, "manifest.txt", "\n".join(rows) + "\n")


def current_csv(cur: CubicalCurrent) -> str:
    rows = [f"# dim={cur.dim} dual={int(cur.dual)} n={cur.grid.n} "
            f"dims={','.join(map(str, cur.grid.dims))}"]
    rows.append("cell,axes,multiplicity")
    for (x, axes), m in sorted(cur.cells.items()):
        rows.append(f"{';'.join(map(str, x))},{';'.join(map(str, axes))},{m}")
    return "\n".join(rows) + "\n"


def read_current_csv(text: str, grid: Grid) -> CubicalCurrent:
    cells = {}
    dim = None
    dual = False
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("dim="):
                    dim = int(tok[4:])
                if tok.startswith("dual="):
                    dual = bool(int(tok[5:]))
            continue
        if not line or line.startswith("cell,"):
            continue
        cell_s, axes_s, mult_s = line.split(",")
        x = tuple(int(v) for v in cell_s.split(";") if v != "")
        axes = tuple(int(v) for v in axes_s.split(";") if v != "")
        cells[(x, axes)] = int(mult_s)
    if dim is None:
        dim = len(next(iter(cells))[1]) if cells else 0
    return CubicalCurrent(grid, dim, cells, dual)


# -- drivers ------------------------------------------------------------------------

def cmd_vortex(cfg: ExperimentConfig, outdir: str) -> dict:
    cfg.reject_unknown(COMMON_KEYS | {"vortex"})
    k_list = cfg.get_list("vortex.k_list", "1,2,3", int)
    r_max = cfg.get_float("vortex.r_max", 30.0)
    tol = cfg.get_float("vortex.tol", 1e-6)
    rows = ["k,energy,target,defect,rel_defect,seconds"]
    summary = []
    for k in k_list:
        t0 = time.time()
        prof = solve_profile(k, r_max, tol)
        E, defect = profile_energy(prof)
        dt_s = time.time() - t0
        target = 2 * np.pi * abs(k)
        rel = defect / target if target else 0.0
        rows.append(f"{k},{E:.12g},{target:.12g},{defect:.6g},{rel:.6g},{dt_s:.3f}")
        _write(outdir, f"profile_k{k}.csv", profile_csv(prof))
        summary.append({"k": k, "energy": E, "rel_defect": rel, "seconds": dt_s})
    _write(outdir, "quantization_report.csv", "\n".join(rows) + "\n")
    finalize_outputs(outdir, cfg)
    return {"profiles": summary}


def _liminf_rows(traj: Trajectory, grid: Grid) -> tuple[list[str], int]:
    """Ledger of 2 pi mass(extracted) <= E + 10h over trajectory snapshots."""
    rows = ["t,E,two_pi_mass,slack"]
    violations = 0
    h = min(grid.spacing)
    for t, p in traj.snapshots:
        cur, _ = extract_jacobian_current(p)
        lhs = 2 * np.pi * cur.mass()
        E = energy(p).total
        slack = E + 10 * h - lhs
        if slack < 0:
            violations += 1
        rows.append(f"{t:.10g},{E:.12g},{lhs:.12g},{slack:.6g}")
    return rows, violations


def cmd_minimize(cfg: ExperimentConfig, outdir: str) -> dict:
    cfg.reject_unknown(COMMON_KEYS | {"minimize", "cycle"})
    n = cfg.get_int("grid.n", 2)
    eps_list = cfg.get_list("eps.list", "0.1")
    dims_rows = cfg.get("minimize.dims_list", cfg.get("grid.dims", "64,64"), str)
    dims_list = [tuple(int(v) for v in row.split(",")) for row in dims_rows.split(";")]
    if len(dims_list) == 1:
        dims_list = dims_list * len(eps_list)
    if len(dims_list) != len(eps_list):
        raise ConfigError("minimize.dims_list must match eps.list")
    noise = cfg.get_float("minimize.noise", 0.3)
    t_end = cfg.get_float("flow.t_end", 4.0)
    seed = cfg.get_int("seed", 1)
    scheme = cfg.get("flow.scheme", "imex")
    gauge_mode = cfg.get("flow.gauge_mode", "direct")
    results = []
    for idx, (eps, dims) in enumerate(zip(eps_list, dims_list)):
        lengths = tuple(cfg.get_list("grid.lengths", ",".join(["1.0"] * n)))
        if n == 2:
            grid, bg = make_grid(2, dims, lengths, cfg.get_int("grid.flux", 1))
        else:
            up = cfg.get_list("grid.flux", "1,0,0", int)
            grid, bg = make_grid(3, dims, lengths,
                                 [[0, up[0], up[1]], [-up[0], 0, up[2]],
                                  [-up[1], -up[2], 0]])
        pair = seeded_start(grid, bg, eps, seed + idx, noise)
        dt = cfg.get_float("flow.dt", guard_dt(grid, eps, scheme))
        stride = cfg.get_int("flow.monitor_stride", 25)
        params = FlowParams(dt=dt, t_end=t_end, scheme=scheme,
                            gauge_mode=gauge_mode, monitor_stride=stride,
                            snapshot_stride=stride)
        traj, final = run(pair, params)
        tag = f"eps{eps:g}_N{'x'.join(map(str, dims))}"
        _write(outdir, f"trajectory_{tag}.csv", traj.csv())
        write_snapshot(os.path.join(outdir, f"terminal_{tag}.ymh"), final)
        cur, resid = extract_jacobian_current(final)
        _write(outdir, f"current_{tag}.csv", current_csv(cur))
        ledger_rows, violations = _liminf_rows(traj, grid)
        _write(outdir, f"liminf_{tag}.csv", "\n".join(ledger_rows) + "\n")
        E = traj.reports[-1].total
        results.append({
            "eps": eps, "dims": dims, "energy": E,
            "energy_over_2pi": E / (2 * np.pi),
            "mass": cur.mass(), "class": homology_class(cur),
            "extraction_residual": resid,
            "liminf_violations": violations,
            "stationary": traj.stop_reason == "stationary",
            "residual_norm": residual_norm(final),
        })
    rows = ["eps,dims,E,E_over_2pi,mass,class,liminf_violations,stationary"]
    for r in results:
        rows.append(f"{r['eps']},{'x'.join(map(str, r['dims']))},{r['energy']:.12g},"
                    f"{r['energy']/(2*np.pi):.8g},{r['mass']},"
                    f"\"{r['class']}\",{r['liminf_violations']},{int(r['stationary'])}")
    _write(outdir, "minimize_summary.csv", "\n".join(rows) + "\n")
    finalize_outputs(outdir, cfg)
    return {"runs": results}


def _parse_cycle(cfg: ExperimentConfig, grid: Grid) -> CubicalCurrent:
    """cycle.loops = 'axis:t1;t2:charge , ...' straight dual loops."""
    spec = cfg.get("cycle.loops", "2:center:1", str)
    cells = {}
    for part in spec.split(","):
        axis_s, trans_s, charge_s = part.strip().split(":")
        axis = int(axis_s)
        if trans_s == "center":
            others = [a for a in range(grid.n) if a != axis]
            trans = tuple(grid.dims[a] // 2 for a in others)
        else:
            trans = tuple(int(v) for v in trans_s.split(";"))
        charge = int(charge_s)
        others = [a for a in range(grid.n) if a != axis]
        for t in range(grid.dims[axis]):
            x = [0] * grid.n
            x[axis] = t
            for a, c in zip(others, trans):
                x[a] = c
            key = (tuple(x), (axis,))
            cells[key] = cells.get(key, 0) + charge
    return CubicalCurrent(grid, 1, cells, dual=True)


def cmd_gamma(cfg: ExperimentConfig, outdir: str) -> dict:
    cfg.reject_unknown(COMMON_KEYS | {"gamma", "cycle", "minimize"})
    eps_list = cfg.get_list("eps.list", "0.2,0.1")
    dims_rows = cfg.get("gamma.dims_list", cfg.get("grid.dims", "32,32,32"), str)
    dims_list = [tuple(int(v) for v in row.split(",")) for row in dims_rows.split(";")]
    if len(dims_list) == 1:
        dims_list = dims_list * len(eps_list)
    lengths = tuple(cfg.get_list("grid.lengths", "1.0,1.0,1.0"))
    up = cfg.get_list("grid.flux", "1,0,0", int)
    rows = ["eps,dims,E,two_pi_mass,ratio,extract_equal,extraction_residual"]
    recovery = []
    for eps, dims in zip(eps_list, dims_list):
        grid, bg = make_grid(3, dims, lengths,
                             [[0, up[0], up[1]], [-up[0], 0, up[2]],
                              [-up[1], -up[2], 0]])
        cyc = _parse_cycle(cfg, grid)
        pair = build_recovery_pair(grid, bg, cyc, eps)
        E = energy(pair).total
        cur, resid = extract_jacobian_current(pair)
        target = 2 * np.pi * cyc.mass()
        equal = cur == cyc
        rows.append(f"{eps},{'x'.join(map(str, dims))},{E:.12g},{target:.12g},"
                    f"{E/target:.8g},{int(equal)},{resid:.6g}")
        recovery.append({"eps": eps, "dims": dims, "energy": E,
                         "target": target, "ratio": E / target,
                         "extract_equal": equal, "residual": resid})
    _write(outdir, "recovery_table.csv", "\n".join(rows) + "\n")
    out = {"recovery": recovery}
    if cfg.get_bool("gamma.liminf", "false"):
        sub = cmd_minimize(cfg, os.path.join(outdir, "liminf"))
        out["liminf"] = sub
    finalize_outputs(outdir, cfg)
    return out


def cmd_monotonicity(cfg: ExperimentConfig, outdir: str) -> dict:
    cfg.reject_unknown(COMMON_KEYS | {"monotonicity", "cycle"})
    n = cfg.get_int("grid.n", 2)
    eps_list = cfg.get_list("eps.list", "0.2,0.1")
    dims_rows = cfg.get("monotonicity.dims_list", cfg.get("grid.dims", "32,32"), str)
    dims_list = [tuple(int(v) for v in row.split(",")) for row in dims_rows.split(";")]
    if len(dims_list) == 1:
        dims_list = dims_list * len(eps_list)
    lengths = tuple(cfg.get_list("grid.lengths", ",".join(["1.0"] * n)))
    T = cfg.get_float("monotonicity.T", 2.5)
    C2 = cfg.get_float("monotonicity.C2", 1.0)
    cap = cfg.get_float("monotonicity.ratio_cap", 10.0)
    density_cap = cfg.get_float("monotonicity.density_cap", 50.0)
    t_flow = cfg.get_float("flow.t_end", T if n == 2 else 2.0)
    seed = cfg.get_int("seed", 1)
    noise = cfg.get_float("monotonicity.noise", 0.0)
    out_rows = []
    results = []
    for idx, (eps, dims) in enumerate(zip(eps_list, dims_list)):
        if n == 2:
            grid, bg = make_grid(2, dims, lengths, cfg.get_int("grid.flux", 1))
        else:
            up = cfg.get_list("grid.flux", "1,0,0", int)
            grid, bg = make_grid(3, dims, lengths,
                                 [[0, up[0], up[1]], [-up[0], 0, up[2]],
                                  [-up[1], -up[2], 0]])
        pair = seeded_start(grid, bg, eps, seed + idx, noise)
        dt = cfg.get_float("flow.dt", guard_dt(grid, eps, "imex"))
        stride = cfg.get_int("flow.monitor_stride", 20)
        params = FlowParams(dt=dt, t_end=t_flow, scheme="imex",
                            monitor_stride=stride, snapshot_stride=stride,
                            stationarity_tol=0.0)
        traj, final = run(pair, params)
        tag = f"eps{eps:g}"
        if n == 2:
            x0 = tuple(L / 2 for L in lengths)
            rep = monotonicity_profile(traj, T, x0, C2)
            _write(outdir, f"profile_{tag}.csv", rep.csv())
            out_rows.append(f"{eps},{rep.ratio:.8g}")
            results.append({"eps": eps, "ratio": rep.ratio, "bounded": rep.ratio <= cap})
        else:
            x0 = tuple((grid.dims[a] // 2 + 0.5) * grid.spacing[a] if a < 2
                       else lengths[a] / 2 for a in range(3))
            best, table = density_ratio(final, x0)
            lines = ["r,ratio"] + [f"{r:.8g},{v:.10g}" for r, v in table]
            _write(outdir, f"density_{tag}.csv", "\n".join(lines) + "\n")
            out_rows.append(f"{eps},{best:.8g}")
            results.append({"eps": eps, "max_ratio": best, "bounded": best <= density_cap})
    name = "ratio_table.csv" if n == 2 else "density_table.csv"
    _write(outdir, name, "eps,value\n" + "\n".join(out_rows) + "\n")
    finalize_outputs(outdir, cfg)
    return {"rows": results, "cap": cap if n == 2 else density_cap}


def sweep_family(grid: Grid, bg, eps: float, n_transport: int, seed: int):
    """Hand-built sweep-out in the trivial sector: (1, d) to the winding vacuum.

    Nucleates a +/- vortex pair, transports the + charge once around
    axis 0, annihilates, and ends at the large-gauge vacuum whose
    section winds once in x2.  Returns (members, interpolators): the
    interpolators map backbone edge index -> callable(s in (0,1)) so the
    nucleation/annihilation segments can be refined adaptively wherever
    the extracted zeros move a large flat distance per step.
    """
    if grid.flux_int(0, 1) != 0:
        raise ValueError("the sweep-out family lives in the trivial sector")
    L0, L1 = grid.lengths
    h = grid.spacing
    base = (0.25 * L0, 0.5 * L1)

    def pair_config(offset_cells: int) -> PairState:
        minus = base
        plus = ((base[0] + (offset_cells + 0.0) * h[0]) % L0, base[1])
        return synthesize_multi(grid, bg, [(plus, 1), (minus, -1)], eps)

    def lerp(a: PairState, b: PairState):
        def member(s: float) -> PairState:
            u = (1 - s) * a.u + s * b.u
            al = (1 - s) * a.alpha.values + s * b.alpha.values
            return PairState(grid, bg, u, FormField(grid, 1, al), eps)

        return member

    vacuum = PairState(grid, bg, np.ones(grid.dims, dtype=complex),
                       FormField.zeros(grid, 1), eps)
    sep_cells = max(int(np.ceil(4.3 * eps / h[0])), 2)
    if 2 * sep_cells + 2 > grid.dims[0]:
        raise ValueError(
            "torus too small for the sweep-out family at this eps: "
            f"need dims[0] > {2 * sep_cells + 2}"
        )
    first = pair_config(sep_cells)
    members = [vacuum, first]
    interpolators = {0: lerp(vacuum, first)}
    n_positions = grid.dims[0] - 2 * sep_cells
    stride = max(1, n_positions // max(n_transport, 1))
    for off in range(sep_cells + stride, grid.dims[0] - sep_cells, stride):
        members.append(pair_config(off))
    last = pair_config(grid.dims[0] - sep_cells)
    members.append(last)
    # annihilation mirrors nucleation: the zeros collide inside the short
    # gap on the seam side, completing the full sweep of the charge
    interpolators[len(members) - 1] = lerp(last, vacuum)
    members.append(vacuum)
    # endpoint convention: the family ends at the winding vacuum, the
    # gauge image of (1, d) under the map dual to the swept class; it is
    # a zero-energy member with an empty cycle, so appending it changes
    # neither the maximum energy nor the bookkeeping
    end_u = np.exp(2j * np.pi * grid.axis_coords(1) / L1)
    end_alpha = FormField.zeros(grid, 1)
    end_alpha.values[1] = 2 * np.pi / L1
    members.append(PairState(grid, bg, end_u, end_alpha, eps))
    return members, interpolators


def cmd_width(cfg: ExperimentConfig, outdir: str) -> dict:
    cfg.reject_unknown(COMMON_KEYS | {"width"})
    dims = tuple(cfg.get_list("grid.dims", "48,48", int))
    lengths = tuple(cfg.get_list("grid.lengths", "1.0,1.0"))
    eps = cfg.get_float("eps.list", 0.15)
    grid, bg = make_grid(2, dims, lengths, 0)
    seed = cfg.get_int("seed", 1)
    tighten_time = cfg.get_float("width.tighten_time", 2.0)
    n_transport = cfg.get_int("width.transport_samples", 10)
    ledger_tol_rel = cfg.get_float("width.ledger_tol_rel", 0.1)
    mass_cap = cfg.get_int("width.mass_cap", 4)
    tiny_n = cfg.get_int("width.bruteforce_n", 4)

    members, interpolators = sweep_family(grid, bg, eps, n_transport, seed)
    dt = cfg.get_float("flow.dt", guard_dt(grid, eps, "imex"))
    refine_tol = cfg.get_float("width.refine_tol", min(lengths) / 8.0)

    def tighten(p: PairState) -> PairState:
        if tighten_time <= 0:
            return p
        params = FlowParams(dt=dt, t_end=tighten_time, scheme="imex",
                            monitor_stride=10**9, stationarity_tol=0.0)
        _, q = run(p, params)
        return q

    # nodes: (raw member, tightened member, extracted cycle, interpolator
    # covering the gap to the next node, parameter window of that gap)
    nodes = []
    for i, p in enumerate(members):
        q = tighten(p)
        cyc = extract_jacobian_current(q)[0]
        interp = interpolators.get(i)
        nodes.append([p, q, cyc, interp, (0.0, 1.0)])

    # adaptively bisect interpolated gaps whose cycles jump too far: the
    # zeros of a nucleating/annihilating pair move fast near the collision
    # parameter, so uniform sampling cannot bound the fineness
    budget = 64
    i = 0
    while i < len(nodes) - 1 and budget > 0:
        interp = nodes[i][3]
        if interp is None:
            i += 1
            continue
        gap = flat_norm(nodes[i + 1][2], nodes[i][2]).value
        if gap <= refine_tol:
            i += 1
            continue
        s_lo, s_hi = nodes[i][4]
        s_mid = 0.5 * (s_lo + s_hi)
        if s_hi - s_lo < 1e-4:
            i += 1
            continue
        p_mid = interp(s_mid)
        q_mid = tighten(p_mid)
        cyc_mid = extract_jacobian_current(q_mid)[0]
        nodes[i][4] = (s_lo, s_mid)
        nodes.insert(i + 1, [p_mid, q_mid, cyc_mid, interp, (s_mid, s_hi)])
        budget -= 1

    energies_before = [energy(n[0]).total for n in nodes]
    energies_after = [energy(n[1]).total for n in nodes]
    cycles = [n[2] for n in nodes]
    Nfam = len(cycles) - 1
    j_level = int(np.ceil(np.log(max(Nfam, 1)) / np.log(3.0)))
    target = 3**j_level
    padded = cycles + [cycles[-1]] * (target + 1 - len(cycles))
    family = DiscreteFamily(1, j_level, {(i,): padded[i] for i in range(target + 1)})
    fam_fineness = fineness(family)
    cls = almgren_class(family)

    tiny_grid, _ = make_grid(2, (tiny_n, tiny_n), lengths, 0)
    w_hat, exact = width_bruteforce((cls[0], cls[1]), tiny_grid, mass_cap)
    max_E = max(energies_after)
    rhs = 2 * np.pi * w_hat
    ledger_ok = max_E >= rhs * (1 - ledger_tol_rel)

    rows = ["index,E_before,E_after"]
    for i, (a, b) in enumerate(zip(energies_before, energies_after)):
        rows.append(f"{i},{a:.12g},{b:.12g}")
    _write(outdir, "family_energies.csv", "\n".join(rows) + "\n")
    report = (f"class = {cls}\nfineness = {fam_fineness:.8g}\n"
              f"width_bruteforce = {w_hat:.8g} (exact={exact})\n"
              f"max_energy = {max_E:.10g}\ntwo_pi_width = {rhs:.10g}\n"
              f"ledger_ok = {ledger_ok}\nslack = {max_E - rhs:.10g}\n")
    _write(outdir, "width_report.txt", report)
    finalize_outputs(outdir, cfg)
    return {"class": cls, "fineness": fam_fineness, "width": w_hat,
            "width_exact": exact, "max_energy": max_E,
            "ledger_ok": ledger_ok, "slack": max_E - rhs}


def cmd_flatnorm(cfg: ExperimentConfig, outdir: str) -> dict:
    cfg.reject_unknown(COMMON_KEYS | {"flatnorm"})
    grid, _ = _grid_from_config(cfg)
    s_path = cfg.get("flatnorm.s_csv", None, str)
    t_path = cfg.get("flatnorm.t_csv", "", str)
    S = read_current_csv(open(s_path).read(), grid)
    if t_path:
        T = read_current_csv(open(t_path).read(), grid)
    else:
        T = CubicalCurrent.zero(grid, S.dim, S.dual)
    res = flat_norm(S, T)
    lines = [f"value = {res.value:.12g}", f"integral = {res.integral}"]
    _write(outdir, "flatnorm_report.txt", "\n".join(lines) + "\n")
    if res.integral:
        _write(outdir, "optimal_P.csv", current_csv(res.P))
        _write(outdir, "optimal_Q.csv", current_csv(res.Q))
    finalize_outputs(outdir, cfg)
    return {"value": res.value, "integral": res.integral}


def cmd_info(cfg: ExperimentConfig, outdir: str | None = None) -> dict:
    cfg.reject_unknown(COMMON_KEYS | {"info"})
    out = {"version": __version__}
    snap = cfg.get("info.snapshot", "", str)
    if snap:
        from .lattice import read_snapshot

        pair = read_snapshot(snap)
        rep = energy(pair)
        out.update({
            "n": pair.grid.n,
            "dims": pair.grid.dims,
            "lengths": pair.grid.lengths,
            "flux": pair.grid.flux,
            "eps": pair.eps,
            "energy": rep.total,
            "max_abs_u": float(np.max(np.abs(pair.u))),
        })
    return out
