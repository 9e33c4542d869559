"""Resonant lattice geometry.

Characteristics: points x = (n, j) where the linear symbol vanishes,
-(n.omega + Theta)^2 + j^2 + 1 = 0, split into branches n.omega + Theta =
s sqrt(j^2+1), s = +-1.  Every box point x lies on exactly two such level
sets, at Theta = kappa_s(x) = -n.omega + s sqrt(j^2+1).

Clusters: connected components of a characteristic set under steps in
Gamma, the (origin-removed) support of the p-th convolution power of the
seed solution.  Gamma lives on the sublattice eta = -sum nu_k j_k, so a
step is determined by its Z^b part nu alone.

The global bound machinery rests on an observation that removes the Theta
and n dependence entirely: two points x, x' = x + (nu, eta) share a level
set with branches s, s' iff

    nu . omega + s g sqrt(m) - s' g' sqrt(m')  =  0,

where j^2+1 = g^2 m, j'^2+1 = g'^2 m' are the square-free splits.  The
relation involves only (j, s, nu, j', s').  Points whose radicand m is
neither 1 nor one of the basis radicands can never satisfy it with nu != 0
(their radical cannot cancel), so they are isolated.  The finite "pattern
graph" on states (j, s) over special j therefore bounds every cluster on
every level set at once: distinct cluster points map to distinct states
(same j, same branch, and equal kappa force equal n), so a cluster embeds
injectively into a pattern component.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .basis import FrequencyBasis
from .exactfield import QuadFieldElement, square_free_split
from .fourier import CosineSeries, power

__all__ = [
    "AdjacencySet",
    "Cluster",
    "ChainProbeParams",
    "enumerate_characteristics",
    "is_on_characteristics",
    "cluster_decomposition",
    "cluster_pattern_bound",
    "verify_cluster_bounds",
    "spacing_dichotomy",
    "chain_probe",
    "theta_zoo",
]


def _as_field(theta) -> QuadFieldElement:
    if isinstance(theta, QuadFieldElement):
        return theta
    return QuadFieldElement.rational(theta)


# ---------------------------------------------------------------------------
# adjacency sets

class AdjacencySet:
    """Difference set for cluster connectivity, stored as full-space points.

    gamma(basis) is the support of the p-th power of the unit-amplitude
    seed, origin removed; gamma_tilde unions the powers p, 2p, ..., Rp with
    R = 2d+1.  Exact Fraction amplitudes keep the supports combinatorial
    (all coefficients positive, no cancellation).
    """

    def __init__(self, dims: tuple[int, int], points: frozenset, label: str = ""):
        self.dims = dims
        self.points = points
        self.label = label
        for nu_eta in points:
            if not any(nu_eta):
                raise ValueError("origin must not be an adjacency step")

    @classmethod
    def _seed(cls, basis: FrequencyBasis) -> CosineSeries:
        amps = [Fraction(1)] * basis.b
        return CosineSeries.initial_ansatz(basis.modes, amps)

    @classmethod
    def gamma(cls, basis: FrequencyBasis, p: int | None = None) -> "AdjacencySet":
        p = basis.p if p is None else p
        u = cls._seed(basis)
        up = power(u, p)
        pts = frozenset(x for x, _ in up.full_items() if any(x))
        return cls((basis.b, basis.d), pts, label=f"gamma(p={p})")

    @classmethod
    def gamma_tilde(
        cls, basis: FrequencyBasis, p: int | None = None, R: int | None = None
    ) -> "AdjacencySet":
        p = basis.p if p is None else p
        R = 2 * basis.d + 1 if R is None else R
        u = cls._seed(basis)
        pts: set = set()
        for r in range(1, R + 1):
            block = power(u, p * r)
            pts.update(x for x, _ in block.full_items() if any(x))
        return cls((basis.b, basis.d), frozenset(pts), label=f"gamma_tilde(p={p},R={R})")

    def __contains__(self, diff) -> bool:
        return tuple(diff) in self.points

    def __len__(self) -> int:
        return len(self.points)

    def steps(self) -> list[tuple]:
        return sorted(self.points)

    def nu_set(self) -> list[tuple]:
        b, _ = self.dims
        return sorted({pt[:b] for pt in self.points})


# ---------------------------------------------------------------------------
# characteristic enumeration

def _sphere_table(d: int, boxN: int) -> dict[int, list[tuple[int, ...]]]:
    table: dict[int, list[tuple[int, ...]]] = {}
    for j in itertools.product(range(-boxN, boxN + 1), repeat=d):
        table.setdefault(sum(c * c for c in j), []).append(j)
    return table


def _float_of(x: QuadFieldElement) -> float:
    return float(sum(float(c) * math.sqrt(m) for m, c in x.terms.items()))


def enumerate_characteristics(
    basis: FrequencyBasis, theta, boxN: int, screen: bool = True
) -> list[tuple[int, ...]]:
    """All x = (n, j), |x|_inf <= boxN, with (n.omega + Theta)^2 = j^2 + 1.

    Scans n and solves for j by exact radicand matching: the square of the
    field element n.omega + Theta must be a nonnegative integer on the
    sphere table.  Covers both branches at once.  With screen=True a float
    pass discards n whose squared value is farther than 1e-5 from every
    integer; roundoff in the box sizes handled here is below 1e-9, so the
    screen loses nothing, and every survivor is still confirmed exactly.
    """
    th = _as_field(theta)
    omega = basis.omega0_exact()
    spheres = _sphere_table(basis.d, boxN)
    b = basis.b
    out = []

    def exact_accept(n: tuple):
        val = th
        for nk, om in zip(n, omega):
            if nk:
                val = val + om * QuadFieldElement.rational(nk)
        e = val * val - QuadFieldElement.one()
        if not e.is_rational():
            return
        q = e.rational_value()
        if q.denominator != 1 or q < 0:
            return
        for j in spheres.get(int(q), ()):
            out.append(n + j)

    if screen:
        om_f = np.array([_float_of(om) for om in omega])
        ax = np.arange(-boxN, boxN + 1)
        grids = np.meshgrid(*([ax] * b), indexing="ij")
        val = np.full(grids[0].shape, _float_of(th))
        for k in range(b):
            val = val + om_f[k] * grids[k]
        v = val * val - 1.0
        near = np.abs(v - np.rint(v)) < 1e-5
        inrange = (v > -0.5) & (v < basis.d * boxN * boxN + 0.5)
        for idx in np.argwhere(near & inrange):
            exact_accept(tuple(int(i) - boxN for i in idx))
    else:
        for n in itertools.product(range(-boxN, boxN + 1), repeat=b):
            exact_accept(n)
    return sorted(out)


def is_on_characteristics(x: Sequence[int], basis: FrequencyBasis, theta) -> bool:
    """Exact re-substitution of the defining equation."""
    th = _as_field(theta)
    b, d = basis.b, basis.d
    n, j = tuple(x[:b]), tuple(x[b:])
    val = th
    for nk, om in zip(n, basis.omega0_exact()):
        val = val + om * QuadFieldElement.rational(nk)
    e = val * val - QuadFieldElement.rational(sum(c * c for c in j) + 1)
    return e.is_zero()


# ---------------------------------------------------------------------------
# clusters

@dataclass
class Cluster:
    members: tuple
    theta: object = None
    is_exceptional_S: bool = False

    @property
    def size(self) -> int:
        return len(self.members)


def cluster_decomposition(
    points: Iterable[tuple], gamma: AdjacencySet, basis: FrequencyBasis | None = None,
    theta=None,
) -> list[Cluster]:
    """Maximal components under x ~ y iff x - y in Gamma (Gamma is symmetric)."""
    pts = sorted(set(tuple(p) for p in points))
    index = {p: i for i, p in enumerate(pts)}
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, jdx):
        ri, rj = find(i), find(jdx)
        if ri != rj:
            parent[rj] = ri

    for i, p in enumerate(pts):
        for step in gamma.points:
            q = tuple(a + s for a, s in zip(p, step))
            jdx = index.get(q)
            if jdx is not None:
                union(i, jdx)

    groups: dict[int, list] = {}
    for i, p in enumerate(pts):
        groups.setdefault(find(i), []).append(p)
    S = frozenset(basis.tangential_sites()) if basis is not None else None
    clusters = [
        Cluster(
            members=tuple(sorted(g)),
            theta=theta,
            is_exceptional_S=(S is not None and frozenset(g) == S),
        )
        for g in groups.values()
    ]
    clusters.sort(key=lambda c: (-c.size, c.members))
    return clusters


# ---------------------------------------------------------------------------
# the pattern-graph certificate

@dataclass
class PatternComponent:
    states: tuple          # ((j, s), ...)
    size: int
    consistent: bool       # nu-integration single-valued over the component
    offsets_spread: int    # max per-coordinate spread of the n-offsets
    example_theta: object  # realizing Theta for the root at n = 0


@dataclass
class PatternReport:
    special_count: int
    n_states: int
    components: list
    max_size: int
    bound: int
    ok: bool
    witness: PatternComponent | None


def _special_states(basis: FrequencyBasis, boxN: int):
    rads = set(basis.radicands)
    states = []
    for j in itertools.product(range(-boxN, boxN + 1), repeat=basis.d):
        g, m = square_free_split(sum(c * c for c in j) + 1)
        if m == 1 or m in rads:
            states.append((j, g, m))
    return states


def cluster_pattern_bound(
    basis: FrequencyBasis, boxN: int, p: int | None = None
) -> PatternReport:
    """Bound every cluster on every level set by pattern-graph components.

    Vertices are (j, s) over special j (radicand 1 or a basis radicand);
    edges carry the step nu and exist iff nu.omega + s g sqrt(m) -
    s' g' sqrt(m') = 0 exactly.  A cluster injects into a component, so
    max component size bounds max cluster size over all Theta and all
    positions; the 4b bound is checked against it.
    """
    p = basis.p if p is None else p
    gamma = AdjacencySet.gamma(basis, p)
    b, d = basis.b, basis.d
    special = _special_states(basis, boxN)
    sp_index = {j: (g, m) for j, g, m in special}
    omega = basis.omega0_exact()

    verts = [(j, s) for j, _, _ in special for s in (1, -1)]
    vid = {v: i for i, v in enumerate(verts)}
    edges: dict[int, list[tuple[int, tuple]]] = {i: [] for i in range(len(verts))}

    for (j, s), i in vid.items():
        g, m = sp_index[j]
        base = QuadFieldElement.sqrt(m) * QuadFieldElement.rational(s * g)
        for step in gamma.points:
            nu, eta = step[:b], step[b:]
            j2 = tuple(a + e for a, e in zip(j, eta))
            if any(abs(c) > boxN for c in j2) or j2 not in sp_index:
                continue
            g2, m2 = sp_index[j2]
            nuom = base
            for nk, om in zip(nu, omega):
                if nk:
                    nuom = nuom + om * QuadFieldElement.rational(nk)
            for s2 in (1, -1):
                val = nuom - QuadFieldElement.sqrt(m2) * QuadFieldElement.rational(s2 * g2)
                if val.is_zero():
                    edges[i].append((vid[(j2, s2)], nu))

    seen = [False] * len(verts)
    components: list[PatternComponent] = []
    for root in range(len(verts)):
        if seen[root]:
            continue
        offsets = {root: (0,) * b}
        consistent = True
        queue = [root]
        seen[root] = True
        while queue:
            cur = queue.pop()
            for nxt, nu in edges[cur]:
                cand = tuple(a + v for a, v in zip(offsets[cur], nu))
                if nxt in offsets:
                    if offsets[nxt] != cand:
                        consistent = False
                    continue
                offsets[nxt] = cand
                seen[nxt] = True
                queue.append(nxt)
        members = tuple(sorted(verts[i] for i in offsets))
        spread = 0
        for k in range(b):
            vals = [offsets[i][k] for i in offsets]
            spread = max(spread, max(vals) - min(vals))
        rj, rs = verts[root]
        rg, rm = sp_index[rj]
        th = QuadFieldElement.sqrt(rm) * QuadFieldElement.rational(rs * rg)
        components.append(
            PatternComponent(
                states=members,
                size=len(members),
                consistent=consistent,
                offsets_spread=spread,
                example_theta=th,
            )
        )

    components.sort(key=lambda c: -c.size)
    max_size = components[0].size if components else 0
    bound = 4 * b
    return PatternReport(
        special_count=len(special),
        n_states=len(verts),
        components=components,
        max_size=max_size,
        bound=bound,
        ok=max_size <= bound,
        witness=components[0] if components and components[0].size > bound else None,
    )


# ---------------------------------------------------------------------------
# the combined verification

@dataclass
class ClusterBoundReport:
    boxN: int
    theta0_max: int
    theta0_bound: int
    theta0_ok: bool
    singleton_ok: bool               # every point of C(0) has one-component n
    s_cluster_sizes: list
    s_unique_ok: bool
    pattern: PatternReport
    spot_checks: list
    ok: bool


def theta_zoo(basis: FrequencyBasis, boxN: int, limit: int = 16) -> list[QuadFieldElement]:
    """Representative level values -n.omega + s sqrt(j^2+1), deduplicated exactly."""
    out: list[QuadFieldElement] = []
    seen = set()
    omega = basis.omega0_exact()
    candidates = []
    for k in range(basis.b):
        for nk in (0, 1, -1, 2):
            n = [0] * basis.b
            n[k] = nk
            candidates.append(tuple(n))
    js = [tuple([v] + [0] * (basis.d - 1)) for v in range(0, boxN + 1)]
    for n in candidates:
        for j in js[: limit // 2 + 1]:
            for s in (1, -1):
                th = QuadFieldElement.zero()
                for nk, om in zip(n, omega):
                    if nk:
                        th = th - om * QuadFieldElement.rational(nk)
                g, m = square_free_split(sum(c * c for c in j) + 1)
                th = th + QuadFieldElement.sqrt(m) * QuadFieldElement.rational(s * g)
                if th not in seen:
                    seen.add(th)
                    out.append(th)
                if len(out) >= limit:
                    return out
    return out


def verify_cluster_bounds(
    basis: FrequencyBasis, boxN: int, p: int | None = None, spot_thetas: int = 4
) -> ClusterBoundReport:
    """Check the level-zero and all-level cluster size bounds in the box.

    Level zero: direct enumeration and decomposition; max size must not
    exceed max(2d, 2b), the seed support S must appear as a cluster and,
    when b >= d+1, be the unique one of size 2b.  All levels: the pattern
    certificate, plus direct spot enumerations for a few representative
    level values cross-checking the certificate.
    """
    p = basis.p if p is None else p
    b, d = basis.b, basis.d
    gamma = AdjacencySet.gamma(basis, p)

    c0 = enumerate_characteristics(basis, 0, boxN)
    singleton_ok = all(sum(1 for v in x[:b] if v) <= 1 for x in c0)
    clusters0 = cluster_decomposition(c0, gamma, basis=basis, theta=0)
    theta0_bound = max(2 * d, 2 * b)
    theta0_max = clusters0[0].size if clusters0 else 0
    s_sizes = [c.size for c in clusters0 if c.size == 2 * b]
    s_flagged = [c for c in clusters0 if c.is_exceptional_S]
    s_unique_ok = True
    if b >= d + 1 and max(abs(c) for j in basis.modes for c in j) <= boxN:
        s_unique_ok = len(s_sizes) == 1 and len(s_flagged) == 1

    pattern = cluster_pattern_bound(basis, boxN, p)

    spots = []
    for th in theta_zoo(basis, boxN, limit=spot_thetas):
        pts = enumerate_characteristics(basis, th, boxN)
        cls = cluster_decomposition(pts, gamma, basis=basis, theta=th)
        mx = cls[0].size if cls else 0
        spots.append(
            {
                "theta": repr(th),
                "n_points": len(pts),
                "max_cluster": mx,
                "within_pattern_bound": mx <= max(pattern.max_size, 1),
                "within_4b": mx <= 4 * b,
            }
        )

    ok = (
        theta0_max <= theta0_bound
        and singleton_ok
        and s_unique_ok
        and pattern.ok
        and all(s["within_4b"] and s["within_pattern_bound"] for s in spots)
    )
    return ClusterBoundReport(
        boxN=boxN,
        theta0_max=theta0_max,
        theta0_bound=theta0_bound,
        theta0_ok=theta0_max <= theta0_bound,
        singleton_ok=singleton_ok,
        s_cluster_sizes=s_sizes,
        s_unique_ok=s_unique_ok,
        pattern=pattern,
        spot_checks=spots,
        ok=ok,
    )


# ---------------------------------------------------------------------------
# spacing dichotomy

@dataclass
class SpacingReport:
    rhos: dict                      # (s1, s2) -> dict(zero, interval, lower)
    nu_nonzero_components: int
    d1_ok: bool                     # every vanishing rho has <= 2 nonzero nu parts
    all_nonzero: bool
    I_value_is_zero: bool | None    # exact sign of the resolvent invariant
    I_nonzero_ok: bool


def spacing_dichotomy(
    nu: Sequence[int], j: Sequence[int], jprime: Sequence[int], basis: FrequencyBasis
) -> SpacingReport:
    """Exact classification of rho = nu.omega +- sqrt(j^2+1) +- sqrt(j'^2+1).

    All four sign choices are evaluated in the field; zeros are decided
    structurally, nonzeros get a certified enclosure.  When every choice is
    nonzero, the quartic invariant
    I = (nu.omega)^4 - 2 (nu.omega)^2 (j^2+j'^2+2) + (j^2-j'^2)^2
    is also evaluated exactly and must be nonzero.
    """
    omega = basis.omega0_exact()
    nuom = QuadFieldElement.zero()
    for nk, om in zip(nu, omega):
        if nk:
            nuom = nuom + om * QuadFieldElement.rational(nk)
    q = sum(c * c for c in j) + 1
    qp = sum(c * c for c in jprime) + 1
    g1, m1 = square_free_split(q)
    g2, m2 = square_free_split(qp)
    r1 = QuadFieldElement.sqrt(m1) * QuadFieldElement.rational(g1)
    r2 = QuadFieldElement.sqrt(m2) * QuadFieldElement.rational(g2)

    rhos = {}
    nz_count = sum(1 for v in nu if v)
    d1_ok = True
    all_nonzero = True
    for s1 in (1, -1):
        for s2 in (1, -1):
            rho = nuom + r1 * QuadFieldElement.rational(s1) + r2 * QuadFieldElement.rational(s2)
            if rho.is_zero():
                all_nonzero = False
                if nz_count > 2:
                    d1_ok = False
                rhos[(s1, s2)] = {"zero": True, "interval": (0, 0), "lower": Fraction(0)}
            else:
                sign, (lo, hi) = rho.sign_and_interval()
                lower = min(abs(lo), abs(hi))
                rhos[(s1, s2)] = {
                    "zero": False,
                    "interval": (lo, hi),
                    "lower": lower,
                    "sign": sign,
                }

    I_zero = None
    I_ok = True
    if all_nonzero:
        w2 = nuom * nuom
        I = (
            w2 * w2
            - QuadFieldElement.rational(2) * w2 * QuadFieldElement.rational(q + qp)
            + QuadFieldElement.rational((q - qp) ** 2)
        )
        I_zero = I.is_zero()
        I_ok = not I_zero
    return SpacingReport(
        rhos=rhos,
        nu_nonzero_components=nz_count,
        d1_ok=d1_ok,
        all_nonzero=all_nonzero,
        I_value_is_zero=I_zero,
        I_nonzero_ok=I_ok,
    )


# ---------------------------------------------------------------------------
# chain probe

@dataclass
class ChainProbeParams:
    B: int
    W: float
    delta: float
    theta: float = 0.0
    Bprime_cap: int = 64

    def __post_init__(self):
        if not (self.B > self.W > 1):
            raise ValueError("need B > W > 1")


@dataclass
class ChainProbeReport:
    n_resonant: int
    ell_max: int
    ell_upper: int
    exact: bool
    column_multiplicity: int
    implied_exponent: float
    component_sizes: list


def chain_probe(
    params: ChainProbeParams,
    basis: FrequencyBasis,
    omega: Sequence[float],
    box,
    budget: int = 200_000,
) -> ChainProbeReport:
    """Hunt long chains x_1..x_l with sup-steps < B inside the resonance
    window |-(n.omega+theta)^2 + j^2 + 1| < W delta^p.

    Upper bound: component sizes of the step graph.  Lower bound: exact
    longest path on small components, greedy deepening otherwise (within
    budget).  If the resonant set's diameter is below B the whole set is
    one chain and reported directly.
    """
    b, d = basis.b, basis.d
    om = np.asarray(omega, dtype=float)
    if isinstance(box, int):
        ranges = [(-box, box)] * (b + d)
    else:
        ranges = [tuple(r) for r in box]
        if len(ranges) != b + d:
            raise ValueError("box must give one (lo, hi) per coordinate")
    width = params.W * params.delta ** basis.p

    pts = []
    for x in itertools.product(*(range(lo, hi + 1) for lo, hi in ranges)):
        n = x[:b]
        j = x[b:]
        val = -(float(np.dot(n, om)) + params.theta) ** 2 + sum(c * c for c in j) + 1
        if abs(val) < width:
            pts.append(x)

    # column multiplicity: occurrences of each spatial part
    cols: dict = {}
    for x in pts:
        cols[x[b:]] = cols.get(x[b:], 0) + 1
    bprime = max(cols.values()) if cols else 0

    if not pts:
        return ChainProbeReport(0, 0, 0, True, 0, 0.0, [])

    # degenerate shortcut: all points mutually within reach
    diam = max(
        max(abs(a - c) for a, c in zip(p1, p2))
        for p1 in pts for p2 in pts
    ) if len(pts) > 1 else 0
    if diam < params.B:
        ell = len(pts)
        expo = math.log(ell) / math.log(params.B * max(bprime, 2)) if ell > 1 else 0.0
        return ChainProbeReport(len(pts), ell, ell, True, bprime, expo, [len(pts)])

    index = {p: i for i, p in enumerate(pts)}
    adj: list[list[int]] = [[] for _ in pts]
    for i, p1 in enumerate(pts):
        for jdx in range(i + 1, len(pts)):
            p2 = pts[jdx]
            if max(abs(a - c) for a, c in zip(p1, p2)) < params.B:
                adj[i].append(jdx)
                adj[jdx].append(i)

    comp = [-1] * len(pts)
    comp_sizes = []
    for i in range(len(pts)):
        if comp[i] >= 0:
            continue
        cid = len(comp_sizes)
        stack, size = [i], 0
        comp[i] = cid
        while stack:
            cur = stack.pop()
            size += 1
            for nxt in adj[cur]:
                if comp[nxt] < 0:
                    comp[nxt] = cid
                    stack.append(nxt)
        comp_sizes.append(size)

    ell_upper = max(comp_sizes)

    # longest simple path: exact by DFS when affordable, else greedy
    best = 1
    calls = 0
    exact = True

    def dfs(cur: int, visited: set) -> int:
        nonlocal calls
        calls += 1
        if calls > budget:
            return len(visited)
        best_here = len(visited)
        for nxt in adj[cur]:
            if nxt not in visited:
                visited.add(nxt)
                best_here = max(best_here, dfs(nxt, visited))
                visited.remove(nxt)
        return best_here

    for i in range(len(pts)):
        if comp_sizes[comp[i]] <= best:
            continue
        best = max(best, dfs(i, {i}))
        if calls > budget:
            exact = False
            break

    expo = (
        math.log(best) / math.log(params.B * max(bprime, 2)) if best > 1 else 0.0
    )
    return ChainProbeReport(
        n_resonant=len(pts),
        ell_max=best,
        ell_upper=ell_upper,
        exact=exact,
        column_multiplicity=bprime,
        implied_exponent=expo,
        component_sizes=sorted(comp_sizes, reverse=True),
    )
