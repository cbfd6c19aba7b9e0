"""Integral cubical currents, flat norms, winding extraction, and family bookkeeping.

A current of dimension d is an integer combination of oriented d-cells
of the periodic grid (or of its dual grid: Jacobian currents of pairs
live on dual cells, anchored at plaquette centers).  Cells are keyed by
(site tuple, axes tuple) in the canonical increasing-coordinate
orientation; multiplicities are nonzero integers.

The flat norm is computed as the linear program

    min  mass(P) + mass(Q)   s.t.   S - T = P + boundary(Q)

over real coefficients with cell-measure weights.  Degree-0 instances
on the grid graph are min-cost-flow problems with a totally unimodular
matrix, hence integral; solutions within rounding distance of integers
are returned as currents, anything else is flagged fractional and never
silently rounded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, eye as speye, hstack as sphstack

from .lattice import Grid, PairState, TWO_PI, wrap_angle
from .functional import curvature, jacobian_form

Cell = tuple[tuple[int, ...], tuple[int, ...]]


def axis_subsets(n: int, d: int) -> list[tuple[int, ...]]:
    return [tuple(c) for c in itertools.combinations(range(n), d)]


class PerturbationNeeded(RuntimeError):
    """Raised when u vanishes exactly on a site needed by the winding formula."""


@dataclass
class CubicalCurrent:
    """Integer-multiplicity chain of oriented d-cells on a periodic grid."""

    grid: Grid
    dim: int
    cells: dict[Cell, int]
    dual: bool = False

    def __post_init__(self):
        if not (0 <= self.dim <= self.grid.n):
            raise ValueError(f"current dimension {self.dim} out of range")
        clean: dict[Cell, int] = {}
        for (x, axes), m in self.cells.items():
            if len(axes) != self.dim or any(a >= self.grid.n for a in axes):
                raise ValueError(f"cell {(x, axes)} is not a {self.dim}-cell")
            if tuple(sorted(axes)) != tuple(axes):
                raise ValueError("cell axes must be sorted (canonical orientation)")
            m = int(m)
            if m:
                key = (tuple(int(c) % N for c, N in zip(x, self.grid.dims)), tuple(axes))
                clean[key] = clean.get(key, 0) + m
        self.cells = {k: v for k, v in clean.items() if v}

    @classmethod
    def zero(cls, grid: Grid, dim: int, dual: bool = False) -> "CubicalCurrent":
        return cls(grid, dim, {}, dual)

    def cell_measure(self, axes: tuple[int, ...]) -> float:
        return _measure(self.grid, axes)

    def mass(self) -> float:
        return float(sum(abs(m) * self.cell_measure(axes) for (_, axes), m in self.cells.items()))

    def anchor(self, cell: Cell) -> np.ndarray:
        """Geometric base point of the cell (dual cells sit at transverse centers)."""
        x, axes = cell
        h = self.grid.spacing
        pt = np.array([c * hh for c, hh in zip(x, h)], dtype=float)
        if self.dual:
            for a in range(self.grid.n):
                if a not in axes:
                    pt[a] += 0.5 * h[a]
        return pt

    def scaled(self, factor: int) -> "CubicalCurrent":
        return CubicalCurrent(self.grid, self.dim,
                              {c: factor * m for c, m in self.cells.items()}, self.dual)

    def __add__(self, other: "CubicalCurrent") -> "CubicalCurrent":
        if self.dim != other.dim or self.dual != other.dual or self.grid != other.grid:
            raise ValueError("can only add currents of the same kind")
        cells = dict(self.cells)
        for c, m in other.cells.items():
            cells[c] = cells.get(c, 0) + m
        return CubicalCurrent(self.grid, self.dim, cells, self.dual)

    def __sub__(self, other: "CubicalCurrent") -> "CubicalCurrent":
        return self + other.scaled(-1)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CubicalCurrent)
            and self.dim == other.dim
            and self.dual == other.dual
            and self.cells == other.cells
        )


def _measure(grid: Grid, axes: tuple[int, ...]) -> float:
    h = grid.spacing
    out = 1.0
    for a in axes:
        out *= h[a]
    return out


def boundary_cells(grid: Grid, cell: Cell) -> list[tuple[Cell, int]]:
    """Oriented faces of one d-cell.

    boundary(x, A) = sum_i (-1)^i [ (x + e_{A_i}, A\\A_i) - (x, A\\A_i) ].
    """
    x, axes = cell
    out = []
    for i, a in enumerate(axes):
        sub = tuple(b for b in axes if b != a)
        sign = -1 if i % 2 else 1
        x_up = list(x)
        x_up[a] = (x_up[a] + 1) % grid.dims[a]
        out.append(((tuple(x_up), sub), sign))
        out.append(((tuple(x), sub), -sign))
    return out


def boundary(T: CubicalCurrent) -> CubicalCurrent:
    if T.dim == 0:
        return CubicalCurrent.zero(T.grid, 0, T.dual)
    cells: dict[Cell, int] = {}
    for cell, m in T.cells.items():
        for face, sign in boundary_cells(T.grid, cell):
            cells[face] = cells.get(face, 0) + sign * m
    return CubicalCurrent(T.grid, T.dim - 1, cells, T.dual)


def mass(T: CubicalCurrent) -> float:
    return T.mass()


# -- flat norm --------------------------------------------------------------------

def _enumerate_cells(grid: Grid, dim: int) -> tuple[list[Cell], dict[Cell, int]]:
    cells = []
    for axes in axis_subsets(grid.n, dim):
        for x in itertools.product(*(range(N) for N in grid.dims)):
            cells.append((x, axes))
    return cells, {c: i for i, c in enumerate(cells)}


def _boundary_matrix(grid: Grid, rows: dict[Cell, int], cols: list[Cell]) -> coo_matrix:
    ri, ci, vals = [], [], []
    for jcol, cell in enumerate(cols):
        for face, sign in boundary_cells(grid, cell):
            ri.append(rows[face])
            ci.append(jcol)
            vals.append(sign)
    return coo_matrix((vals, (ri, ci)), shape=(len(rows), len(cols)))


def _current_vector(T: CubicalCurrent, index: dict[Cell, int]) -> np.ndarray:
    v = np.zeros(len(index))
    for c, m in T.cells.items():
        v[index[c]] = m
    return v


@dataclass
class FlatNormResult:
    value: float
    P: CubicalCurrent | None
    Q: CubicalCurrent | None
    integral: bool


def flat_norm(S: CubicalCurrent, T: CubicalCurrent,
              integrality_tol: float = 1e-7) -> FlatNormResult:
    """Flat distance between same-dimension currents, with its optimal decomposition.

    Always feasible (P = S - T).  The optimizer is rounded to integer
    currents when within integrality_tol of integers, else P and Q are
    None and the result is flagged fractional.
    """
    if S.dim != T.dim or S.grid != T.grid or S.dual != T.dual:
        raise ValueError("flat_norm needs same-dimension currents on one grid")
    grid = S.grid
    d = S.dim
    if d + 1 > grid.n:
        raise ValueError("flat_norm needs (d+1)-cells to exist")
    p_cells, p_index = _enumerate_cells(grid, d)
    q_cells, _ = _enumerate_cells(grid, d + 1)
    B = _boundary_matrix(grid, p_index, q_cells)
    x_target = _current_vector(S - T, p_index)
    npv, nqv = len(p_cells), len(q_cells)
    meas_p = np.array([_measure(grid, axes) for (_, axes) in p_cells])
    meas_q = np.array([_measure(grid, axes) for (_, axes) in q_cells])
    c = np.concatenate([meas_p, meas_p, meas_q, meas_q])
    A_eq = sphstack([speye(npv), -speye(npv), B, -B], format="csc")
    res = linprog(c, A_eq=A_eq, b_eq=x_target, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"flat norm LP failed: {res.message}")
    sol = res.x
    p_val = sol[:npv] - sol[npv:2 * npv]
    q_val = sol[2 * npv:2 * npv + nqv] - sol[2 * npv + nqv:]
    is_int = bool(
        np.max(np.abs(p_val - np.round(p_val)), initial=0.0) < integrality_tol
        and np.max(np.abs(q_val - np.round(q_val)), initial=0.0) < integrality_tol
    )
    P = Q = None
    if is_int:
        P = CubicalCurrent(grid, d,
                           {cell: int(round(v)) for cell, v in zip(p_cells, p_val)
                            if int(round(v))}, S.dual)
        Q = CubicalCurrent(grid, d + 1,
                           {cell: int(round(v)) for cell, v in zip(q_cells, q_val)
                            if int(round(v))}, S.dual)
    return FlatNormResult(value=float(res.fun), P=P, Q=Q, integral=is_int)


def fill_in(S: CubicalCurrent, T: CubicalCurrent) -> CubicalCurrent:
    """Minimal-mass (d+1)-chain Q with boundary(Q) = S - T; raises if none exists.

    Infeasibility is exactly the class obstruction (S - T not a
    boundary), which the Almgren construction treats as failure.
    """
    if S.dim != T.dim or S.grid != T.grid or S.dual != T.dual:
        raise ValueError("fill_in needs same-dimension currents on one grid")
    grid = S.grid
    p_cells, p_index = _enumerate_cells(grid, S.dim)
    q_cells, _ = _enumerate_cells(grid, S.dim + 1)
    B = _boundary_matrix(grid, p_index, q_cells)
    x_target = _current_vector(S - T, p_index)
    meas_q = np.array([_measure(grid, axes) for (_, axes) in q_cells])
    c = np.concatenate([meas_q, meas_q])
    A_eq = sphstack([B, -B], format="csc")
    res = linprog(c, A_eq=A_eq, b_eq=x_target, bounds=(0, None), method="highs")
    if not res.success:
        raise ValueError(f"no fill-in exists (class obstruction): {res.message}")
    q_val = res.x[:len(q_cells)] - res.x[len(q_cells):]
    if np.max(np.abs(q_val - np.round(q_val)), initial=0.0) > 1e-7:
        raise ValueError("fill-in LP returned a fractional chain")
    return CubicalCurrent(grid, S.dim + 1,
                          {cell: int(round(v)) for cell, v in zip(q_cells, q_val)
                           if int(round(v))}, S.dual)


# -- winding extraction -------------------------------------------------------------

def plaquette_winding(pair: PairState) -> np.ndarray:
    """Integer winding per plaquette from wrapped covariant phase increments.

    w_p = (1/2pi) [ sum of wrapped covariant link-phase increments of
    u/|u| around p + h_j h_k (w0 + d alpha)_p ].  Increments are
    computed once per undirected link and reused with orientation
    signs, so slice sums telescope and the total class equals the
    sector flux as an exact integer identity.
    """
    grid = pair.grid
    if np.any(np.abs(pair.u) == 0.0):
        raise PerturbationNeeded("u vanishes exactly on a site; jitter the pair")
    from .lattice import transport_angle

    ang = transport_angle(pair)
    phase = np.angle(pair.u)
    h = grid.spacing
    delta = np.empty((grid.n,) + grid.dims)
    for j in range(grid.n):
        delta[j] = wrap_angle(np.roll(phase, -1, axis=j) - phase + ang[j])
    w = curvature(pair)
    out = np.empty_like(w.values)
    for p, (j, k) in enumerate(grid.planes):
        circ = (
            delta[j]
            + np.roll(delta[k], -1, axis=j)
            - np.roll(delta[j], -1, axis=k)
            - delta[k]
        )
        raw = (circ + h[j] * h[k] * w.values[p]) / TWO_PI
        out[p] = np.round(raw)
        if np.max(np.abs(raw - out[p])) > 1e-6:
            raise RuntimeError("winding count failed to quantize")
    return out.astype(int)


DUAL_EDGE_SIGN = {(0, 1): 1, (0, 2): -1, (1, 2): 1}


def extract_jacobian_current(pair: PairState, threshold: float = 0.5
                             ) -> tuple[CubicalCurrent, float]:
    """Integer (n-2)-current of plaquette windings on the dual grid, plus residual.

    The residual is the l1 distance between the smooth Jacobian density
    (1/2pi) J * area and the integer windings, summed over plaquettes;
    it measures how sharply the pair's vorticity is localized.  The
    threshold is retained for interface compatibility: the wrapped
    winding formula is used on every plaquette and is well defined
    whenever no site carries u = 0 exactly (PerturbationNeeded
    otherwise).
    """
    grid = pair.grid
    w = plaquette_winding(pair)
    J = jacobian_form(pair)
    h = grid.spacing
    residual = 0.0
    cells: dict[Cell, int] = {}
    for p, (j, k) in enumerate(grid.planes):
        residual += float(np.sum(np.abs(J.values[p] * h[j] * h[k] / TWO_PI - w[p])))
        if grid.n == 2:
            for x in zip(*np.nonzero(w[p])):
                cells[(tuple(int(c) for c in x), ())] = int(w[p][x])
        else:
            l = ({0, 1, 2} - {j, k}).pop()
            sign = DUAL_EDGE_SIGN[(j, k)]
            # dual edge along l crossing the plaquette; dual vertices are
            # cube centers, so the edge is anchored at the cube behind the
            # plaquette in direction l
            for x in zip(*np.nonzero(w[p])):
                y = [int(c) for c in x]
                y[l] = (y[l] - 1) % grid.dims[l]
                key = (tuple(y), (l,))
                cells[key] = cells.get(key, 0) + sign * int(w[p][x])
    return CubicalCurrent(grid, grid.n - 2, cells, dual=True), residual


def homology_class(T: CubicalCurrent) -> tuple[int, ...]:
    """Class of a d-cycle in H_d(T^n): pairing with each coordinate d-form.

    Component for the axis set A is sum of multiplicities of A-cells
    times vol(A-cell)/vol(A-torus); for cycles this is an integer (the
    signed crossing count of the complementary coordinate torus).  For
    d = 0 it is the total multiplicity.
    """
    if boundary(T).cells:
        raise ValueError("homology_class needs a cycle (boundary = 0)")
    if T.dim == 0:
        return (sum(T.cells.values()),)
    out = []
    for axes in axis_subsets(T.grid.n, T.dim):
        big = 1.0
        for a in axes:
            big *= T.grid.lengths[a]
        total = sum(m * _measure(T.grid, a) for (_, a), m in T.cells.items() if a == axes)
        val = total / big
        if abs(val - round(val)) > 1e-9:
            raise RuntimeError(f"non-integer pairing {val} for axes {axes}")
        out.append(int(round(val)))
    return tuple(out)


# -- discrete families ----------------------------------------------------------------

@dataclass
class DiscreteFamily:
    """Map from vertices of a subdivided parameter cube to (n-2)-cycles.

    m = 1: keys (i,) for i = 0..3^j; m = 2: keys (i1, i2).  All members
    share one grid.
    """

    m: int
    j: int
    values: dict[tuple[int, ...], CubicalCurrent]

    def __post_init__(self):
        if self.m not in (1, 2):
            raise ValueError("parameter dimension must be 1 or 2")
        self.N = 3**self.j
        expected = set(itertools.product(range(self.N + 1), repeat=self.m))
        if set(self.values.keys()) != expected:
            raise ValueError("family must assign a cycle to every vertex of I(m, j)")
        if len({(v.grid.dims, v.grid.lengths, v.dual) for v in self.values.values()}) != 1:
            raise ValueError("family members must share one grid and cell complex")

    def edges(self):
        """Oriented edges of the parameter complex as (tail, head) vertex keys."""
        if self.m == 1:
            for i in range(self.N):
                yield ((i,), (i + 1,))
        else:
            for i1 in range(self.N + 1):
                for i2 in range(self.N):
                    yield ((i1, i2), (i1, i2 + 1))
            for i2 in range(self.N + 1):
                for i1 in range(self.N):
                    yield ((i1, i2), (i1 + 1, i2))


def fineness(phi: DiscreteFamily) -> float:
    """Max flat distance between adjacent members."""
    worst = 0.0
    for a, b in phi.edges():
        worst = max(worst, flat_norm(phi.values[b], phi.values[a]).value)
    return worst


def _per_dist(a: float, b: float, L: float) -> float:
    d_ = (a - b) % L
    return d_ if d_ <= L / 2 else d_ - L


def concentration(phi: DiscreteFamily, r: float) -> float:
    """Max mass any member places in a ball of radius r (periodic metric).

    Ball centers range over the primal and dual grid vertices; segment
    cells contribute their exact intersection length with the ball,
    points their mass.
    """
    grid = next(iter(phi.values.values())).grid
    h = grid.spacing
    L = grid.lengths
    centers = []
    for off in (0.0, 0.5):
        for cen in itertools.product(*(range(N) for N in grid.dims)):
            centers.append(np.array([(c + off) * hh for c, hh in zip(cen, h)]))
    worst = 0.0
    for T in phi.values.values():
        if not T.cells:
            continue
        items = [(T.anchor(cell), cell[1], m) for cell, m in T.cells.items()]
        for c_pt in centers:
            total = 0.0
            for pt, axes, m in items:
                diff = np.array([_per_dist(a, b, l) for a, b, l in zip(pt, c_pt, L)])
                if len(axes) == 0:
                    if float(np.linalg.norm(diff)) < r:
                        total += abs(m)
                else:
                    a = axes[0]
                    trans_sq = float(sum(d_**2 for i, d_ in enumerate(diff) if i != a))
                    if trans_sq >= r**2:
                        continue
                    half = np.sqrt(r**2 - trans_sq)
                    lo = max(diff[a], -half)
                    hi = min(diff[a] + h[a], half)
                    if hi > lo:
                        total += abs(m) * (hi - lo)
            worst = max(worst, total)
    return worst


def almgren_class(phi: DiscreteFamily, fineness_cap: float | None = None
                  ) -> tuple[int, ...]:
    """Homology class assigned to a fine family by summing minimal fill-ins.

    m = 1: class of sum_e S_e in H_{n-1}; m = 2: coefficient of the
    fundamental class carried by the summed top-chain fills.  Fails
    explicitly when the family is too coarse for unambiguous fill-ins.
    """
    first = next(iter(phi.values.values()))
    grid = first.grid
    cap = fineness_cap if fineness_cap is not None else min(grid.lengths) / 4.0
    f = fineness(phi)
    if f > cap:
        raise ValueError(f"fineness {f:.3g} exceeds the small-fill threshold {cap:.3g}")
    fills = {edge: fill_in(phi.values[edge[1]], phi.values[edge[0]])
             for edge in phi.edges()}
    if phi.m == 1:
        total = CubicalCurrent.zero(grid, grid.n - 1, first.dual)
        for S_e in fills.values():
            total = total + S_e
        return homology_class(total)

    # m = 2: integrate each parameter square's ring of fills to an n-chain
    total = CubicalCurrent.zero(grid, grid.n, first.dual)
    N = phi.N
    for i1 in range(N):
        for i2 in range(N):
            ring = (
                fills[((i1, i2), (i1 + 1, i2))]
                + fills[((i1 + 1, i2), (i1 + 1, i2 + 1))]
                - fills[((i1, i2 + 1), (i1 + 1, i2 + 1))]
                - fills[((i1, i2), (i1, i2 + 1))]
            )
            total = total + _small_fill(ring)
    vals = set(total.cells.get((x, tuple(range(grid.n))), 0)
               for x in itertools.product(*(range(N_) for N_ in grid.dims)))
    if len(vals) != 1:
        raise RuntimeError("summed square fills are not an n-cycle")
    return (vals.pop(),)


def _small_fill(ring: CubicalCurrent) -> CubicalCurrent:
    """The unique top-chain with boundary = ring and mass < vol/2.

    Integrates the null-homologous (n-1)-cycle across cube faces
    (region labeling) and shifts labels to the minimal-mass
    representative.
    """
    grid = ring.grid
    n = grid.n
    dims = grid.dims
    face_mult: dict[Cell, int] = dict(ring.cells)
    labels = {}
    start = (0,) * n
    labels[start] = 0
    stack = [start]
    while stack:
        x = stack.pop()
        base = labels[x]
        for a in range(n):
            sub = tuple(b for b in range(n) if b != a)
            s = -1 if a % 2 else 1  # sign of the +face in the cube boundary
            up = list(x)
            up[a] = (up[a] + 1) % dims[a]
            up = tuple(up)
            cand = base - s * face_mult.get((up, sub), 0)
            if up not in labels:
                labels[up] = cand
                stack.append(up)
            elif labels[up] != cand:
                raise ValueError("ring is not the boundary of any top chain")
            dn = list(x)
            dn[a] = (dn[a] - 1) % dims[a]
            dn = tuple(dn)
            cand2 = base + s * face_mult.get((x, sub), 0)
            if dn not in labels:
                labels[dn] = cand2
                stack.append(dn)
            elif labels[dn] != cand2:
                raise ValueError("ring is not the boundary of any top chain")
    values = np.array(list(labels.values()))
    best_c, best_mass = None, np.inf
    for cshift in range(int(values.min()), int(values.max()) + 1):
        msum = float(np.sum(np.abs(values - cshift)) * grid.cell_volume)
        if msum < best_mass:
            best_mass, best_c = msum, cshift
    if best_mass >= grid.volume / 2.0:
        raise ValueError("no fill of mass below vol/2 (family too coarse)")
    axes_all = tuple(range(n))
    cells = {(x, axes_all): lab - best_c for x, lab in labels.items() if lab != best_c}
    return CubicalCurrent(grid, n, cells, ring.dual)


# -- brute-force widths -----------------------------------------------------------------

def width_bruteforce(target_class: tuple[int, int], grid: Grid,
                     mass_cap: int) -> tuple[float, bool]:
    """Minimal max-mass over discrete 0-cycle families realizing a class on T^2.

    Exhaustive reachability search over configurations of signed unit
    charges with fineness <= h moves (single adjacent transports and
    adjacent pair creation/annihilation), tracking the accumulated
    fill-in class by seam crossings.  Returns (width, exact); exact
    False means the cap was exhausted and the value is a lower bound.
    """
    if grid.n != 2:
        raise ValueError("width_bruteforce is specified for n = 2 (0-cycles)")
    if max(grid.dims) > 6:
        raise ValueError("width_bruteforce only runs on tiny grids (N <= 6)")
    N1, N2 = grid.dims
    bound = tuple(abs(c) + 1 for c in target_class)
    empty: tuple = ()

    def canonical(cfg) -> tuple:
        return tuple(sorted(cfg))

    def moves(config):
        occ = list(config)
        # transport one unit of charge to an adjacent site
        for i, (x, s) in enumerate(occ):
            for axis, step in ((0, 1), (0, -1), (1, 1), (1, -1)):
                y = list(x)
                y[axis] = (y[axis] + step) % grid.dims[axis]
                y = tuple(y)
                newc = occ[:i] + occ[i + 1:] + [(y, s)]
                dcls = [0, 0]
                if (x[axis] == grid.dims[axis] - 1 and step == 1) or \
                   (x[axis] == 0 and step == -1):
                    dcls[axis] = s * step
                yield canonical(newc), tuple(dcls)
        # create a +/- pair on an edge
        if len(occ) + 2 <= mass_cap:
            for x in itertools.product(range(N1), range(N2)):
                for axis in (0, 1):
                    y = list(x)
                    y[axis] = (y[axis] + 1) % grid.dims[axis]
                    y = tuple(y)
                    for s in (1, -1):
                        newc = occ + [(tuple(x), s), (y, -s)]
                        dcls = [0, 0]
                        if x[axis] == grid.dims[axis] - 1:
                            dcls[axis] = -s
                        yield canonical(newc), tuple(dcls)
        # annihilate opposite charges on adjacent sites
        for i, (x, s) in enumerate(occ):
            for jdx in range(i + 1, len(occ)):
                y, s2 = occ[jdx]
                if s2 != -s:
                    continue
                diff = [(x[a] - y[a]) % grid.dims[a] for a in (0, 1)]
                for axis in (0, 1):
                    other = 1 - axis
                    if diff[other] != 0:
                        continue
                    if diff[axis] == 1:
                        lo, lo_charge = y, s2
                    elif diff[axis] == grid.dims[axis] - 1:
                        lo, lo_charge = x, s
                    else:
                        continue
                    newc = occ[:i] + occ[i + 1:jdx] + occ[jdx + 1:]
                    dcls = [0, 0]
                    if lo[axis] == grid.dims[axis] - 1:
                        dcls[axis] = lo_charge
                    yield canonical(newc), tuple(dcls)

    def feasible(width: int) -> bool:
        start = (empty, (0, 0))
        seen = {start}
        stack = [start]
        while stack:
            config, cls = stack.pop()
            for newc, dcls in moves(config):
                if len(newc) > width:
                    continue
                ncls = (cls[0] + dcls[0], cls[1] + dcls[1])
                if any(abs(c) > b for c, b in zip(ncls, bound)):
                    continue
                if newc == empty and ncls == tuple(target_class):
                    return True
                state = (newc, ncls)
                if state in seen:
                    continue
                seen.add(state)
                stack.append(state)
        return False

    if tuple(target_class) == (0, 0):
        return 0.0, True
    for width in range(1, mass_cap + 1):
        if feasible(width):
            return float(width), True
    return float(mass_cap), False
