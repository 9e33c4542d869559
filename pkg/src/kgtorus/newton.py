"""Multiscale Newton iteration for the reduced equations.

The solve splits into the 2b tangential components (Q-equations), solved
exactly for the frequency vector at every step, and the remaining lattice
components (P-equations), handled by a Newton iteration on growing boxes
with Diophantine and quadratic gates guarding each step.  Parameter
excision is realized by deterministic rejection sampling: when a step
signals a singular block or a gate fails, the amplitude vector is jittered
inside its cube and the step is retried.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import FrequencyBasis
from .exactfield import QuadFieldElement
from .fourier import (
    CosineSeries,
    Nonlinearity,
    Weight,
    canonical,
    diagonal_apply,
    residual,
    weighted_norm,
)
from .linop import (
    Box,
    ExcisionSignal,
    _kernel_full_map,
    build_operator,
    default_near_set,
    schur_invert,
)

__all__ = [
    "SolverParameters",
    "SolutionState",
    "NewtonTrace",
    "RunResult",
    "FrequencyJacobian",
    "DiophantineReport",
    "SmallDivisorReport",
    "QuadraticGateReport",
    "q_solve",
    "b_matrix",
    "b_jacobian",
    "frequency_jacobian",
    "diophantine_gate",
    "small_divisor_fit",
    "quadratic_gate",
    "newton_step",
    "pinned_amplitudes",
    "run",
]


# ---------------------------------------------------------------------------
# parameters and state

@dataclass
class SolverParameters:
    """All tunables of the iteration; the exponent ordering is enforced."""

    delta: float
    a: tuple[float, ...]
    epsilon: float = 0.25
    epsilon_prime: float = 0.5
    s: float = 1.5
    sigma: float = 0.8
    kappa: float = 0.7
    tau: float = 0.4
    c: float = 0.9
    beta: float = 0.2
    xi: float = 0.01
    gamma: float | None = None        # defaults to 2b + 1 at run time
    M: int = 2
    r_max: int = 3
    W: float = 10.0
    Cprime: float = 10.0
    delta0: float = 0.2
    target: float = 0.0
    trunc: float | None = None        # absolute update floor; None = impact rule
    kernel_cap: int | None = 128
    accept_ratio: float | None = None  # contraction bar per step; None = delta
    theta_rel: float = 0.01           # impact cut, fraction of the step target
    floor_rel: float = 1e-5           # nonlinearity stage floor, same scale
    quad_B: int = 3
    quad_samples: int = 200
    excision_budget: int = 5
    jitter_seed: int = 11

    def __post_init__(self):
        if not (0.0 < self.delta < self.delta0):
            raise ValueError(f"delta must lie in (0, {self.delta0})")
        a = tuple(float(v) for v in self.a)
        if not a:
            raise ValueError("need at least one amplitude")
        for v in a:
            if not (0.0 < abs(v) < self.delta):
                raise ValueError("amplitudes must be nonzero with |a_k| < delta")
        self.a = a
        # exponent ordering: 0 < tau < 1/s < kappa < sigma < c < 1
        chain = (0.0, self.tau, 1.0 / self.s, self.kappa, self.sigma, self.c, 1.0)
        if any(lo >= hi for lo, hi in zip(chain, chain[1:])):
            raise ValueError("exponents must satisfy 0 < tau < 1/s < kappa < sigma < c < 1")
        if self.epsilon <= 0 or self.epsilon_prime <= 0:
            raise ValueError("epsilon and epsilon' must be positive")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if self.M < 2:
            raise ValueError("scale base M must be >= 2")
        if self.r_max < 0:
            raise ValueError("r_max must be >= 0")
        if self.xi <= 0:
            raise ValueError("xi must be positive")
        if self.excision_budget < 0:
            raise ValueError("excision budget must be >= 0")
        if self.accept_ratio is not None and not (0.0 < self.accept_ratio < 1.0):
            raise ValueError("accept_ratio must lie in (0, 1)")
        if self.theta_rel <= 0 or self.floor_rel < 0:
            raise ValueError("theta_rel must be positive, floor_rel nonnegative")

    @property
    def n_first(self) -> int:
        """Initial box size ceil(|log delta|^s)."""
        return math.ceil(abs(math.log(self.delta)) ** self.s)

    def gamma_for(self, b: int) -> float:
        return self.gamma if self.gamma is not None else 2.0 * b + 1.0

    @property
    def weight(self) -> Weight:
        return Weight(self.beta, self.delta)

    @property
    def accept_bar(self) -> float:
        """A step is accepted when it contracts the residual by this factor."""
        return self.accept_ratio if self.accept_ratio is not None else self.delta


@dataclass
class SolutionState:
    """Iterate: coefficient family, frequency vector, step index.

    F caches the residual at (u, omega) so consecutive steps evaluate the
    nonlinearity once instead of twice.
    """

    u: CosineSeries
    omega: np.ndarray
    r: int = 0
    F: CosineSeries | None = None


def _site(b: int, k: int, jk: Sequence[int]) -> tuple[int, ...]:
    n = [0] * b
    n[k] = -1
    return tuple(n) + tuple(int(c) for c in jk)


def pinned_amplitudes(u: CosineSeries, basis: FrequencyBasis) -> np.ndarray:
    """Recover a from the pinned tangential coefficients a_k/2."""
    return np.array(
        [2.0 * float(u.get(_site(basis.b, k, jk))) for k, jk in enumerate(basis.modes)]
    )


def _repin(u: CosineSeries, basis: FrequencyBasis, a: Sequence[float]) -> CosineSeries:
    """Copy of u with the tangential coefficients reset to a_k/2."""
    store = dict(u.to_float().coeffs)
    for k, jk in enumerate(basis.modes):
        key, _ = canonical(_site(basis.b, k, jk))
        store[key] = float(a[k]) / 2.0
    return CosineSeries((basis.b, basis.d), store)


# ---------------------------------------------------------------------------
# Q-equations

def _omega_from_g(g: CosineSeries, amps: Sequence[float], basis: FrequencyBasis) -> np.ndarray:
    """Tangential frequency solve given the nonlinearity coefficients."""
    out = np.zeros(basis.b)
    for k, (jk, sk) in enumerate(zip(basis.modes, basis.radicands)):
        rad = float(sk) + 2.0 * float(g.get(_site(basis.b, k, jk))) / amps[k]
        if rad <= 0.0:
            raise ValueError(f"amplitude too large: mode {k} radicand {rad:.3e}")
        out[k] = math.sqrt(rad)
    return out


def q_solve(
    u: CosineSeries, a: Sequence[float], basis: FrequencyBasis, nl: Nonlinearity
) -> np.ndarray:
    """Frequency vector that kills the residual on the tangential sites.

    The site carries the stored coefficient a_k/2, so the diagonal term of
    the residual there is (-omega_k^2 + j_k^2 + 1) a_k/2 and the solve is
    omega_k = sqrt(j_k^2 + 1 + 2 G_k / a_k) with G_k the full nonlinearity
    coefficient at the site.
    """
    amps = [float(v) for v in a]
    if len(amps) != basis.b:
        raise ValueError("need one amplitude per mode")
    if any(v == 0.0 for v in amps):
        raise ValueError("amplitudes must be nonzero")
    return _omega_from_g(nl.nonlinear_coefficients(u), amps, basis)


def b_matrix(a: Sequence[float], basis: FrequencyBasis, nl: Nonlinearity) -> np.ndarray:
    """Shift numerators B_k = 2^{p+1} G_k(u0(a)) / a_k at the seed ansatz.

    For p = 2 these are the exact quadratics 3 a_k^2 + 6 sum_{i != k} a_i^2.
    """
    amps = [float(v) for v in a]
    if any(v == 0.0 for v in amps):
        raise ValueError("amplitudes must be nonzero")
    u0 = CosineSeries.initial_ansatz(basis.modes, amps)
    g = nl.nonlinear_coefficients(u0)
    scale = 2.0 ** (nl.p + 1)
    return np.array(
        [
            scale * float(g.get(_site(basis.b, k, jk))) / amps[k]
            for k, jk in enumerate(basis.modes)
        ]
    )


def b_jacobian(
    a: Sequence[float], basis: FrequencyBasis, nl: Nonlinearity, step: float = 1e-5
) -> np.ndarray:
    """Central-difference Jacobian of the shift numerators B."""
    a0 = np.array([float(v) for v in a])
    h = step * max(1.0, float(np.max(np.abs(a0))))
    cols = []
    for i in range(len(a0)):
        e = np.zeros_like(a0)
        e[i] = h
        cols.append((b_matrix(a0 + e, basis, nl) - b_matrix(a0 - e, basis, nl)) / (2 * h))
    return np.column_stack(cols)


@dataclass
class FrequencyJacobian:
    matrix: np.ndarray
    det: float
    norm: float
    inv_norm: float
    step: float
    richardson_error: float


def frequency_jacobian(
    a: Sequence[float],
    basis: FrequencyBasis,
    nl: Nonlinearity,
    u: CosineSeries | None = None,
) -> FrequencyJacobian:
    """d omega / d a by central differences with a Richardson consistency check.

    With u given, the perturbed amplitude is written into the pinned sites of
    u before each frequency solve (the refit map); otherwise the seed ansatz
    at the perturbed amplitude is used.
    """
    a0 = np.array([float(v) for v in a])
    if np.any(a0 == 0.0):
        raise ValueError("amplitudes must be nonzero")
    b = len(a0)

    def omega_of(vec: np.ndarray) -> np.ndarray:
        if u is None:
            base = CosineSeries.initial_ansatz(basis.modes, list(vec))
        else:
            base = _repin(u, basis, vec)
        return q_solve(base, vec, basis, nl)

    def jac(h: float) -> np.ndarray:
        cols = []
        for i in range(b):
            e = np.zeros(b)
            e[i] = h
            cols.append((omega_of(a0 + e) - omega_of(a0 - e)) / (2 * h))
        return np.column_stack(cols)

    h = 1e-4 * max(float(np.max(np.abs(a0))), 1e-8)
    j_h = jac(h)
    j_half = jac(h / 2)
    extrap = (4.0 * j_half - j_h) / 3.0
    rich = float(np.linalg.norm(extrap - j_half, 2))
    det = float(np.linalg.det(extrap))
    norm = float(np.linalg.norm(extrap, 2))
    svals = np.linalg.svd(extrap, compute_uv=False)
    if svals[-1] <= max(rich, 1e-14 * svals[0]):
        raise ExcisionSignal(
            f"frequency Jacobian numerically singular: det {det:.3e}, "
            f"smallest singular value {svals[-1]:.3e}"
        )
    inv_norm = 1.0 / float(svals[-1])
    return FrequencyJacobian(extrap, det, norm, inv_norm, h, rich)


# ---------------------------------------------------------------------------
# gates

@dataclass
class DiophantineReport:
    passed: bool
    worst_ratio: float
    worst_n: tuple[int, ...]
    n_checked: int
    xi: float
    gamma: float


def diophantine_gate(
    omega: Sequence[float], N: int, xi: float = 0.01, gamma: float | None = None
) -> DiophantineReport:
    """Check ||n . omega||_T >= xi / |n|^gamma for all 0 < |n|_inf <= N.

    Scans sup-norm shells in increasing order over the canonical half
    (first nonzero component positive) and stops at the first failing shell.
    """
    om = np.array([float(w) for w in omega])
    b = len(om)
    if gamma is None:
        gamma = 2.0 * b + 1.0
    def leading_positive(n: tuple[int, ...]) -> bool:
        for c in n:
            if c:
                return c > 0
        return False

    worst = math.inf
    worst_n: tuple[int, ...] = ()
    checked = 0
    for m in range(1, N + 1):
        shell_ok = True
        for n in itertools.product(range(-m, m + 1), repeat=b):
            if max(abs(c) for c in n) != m or not leading_positive(n):
                continue
            checked += 1
            x = float(np.dot(n, om))
            dist = abs(x - round(x))
            ratio = dist * m ** gamma / xi
            if ratio < worst:
                worst = ratio
                worst_n = n
            if ratio < 1.0:
                shell_ok = False
        if not shell_ok:
            return DiophantineReport(False, worst, worst_n, checked, xi, gamma)
    return DiophantineReport(True, worst, worst_n, checked, xi, gamma)


@dataclass
class SmallDivisorReport:
    exponent: float
    constant: float
    shell_minima: dict[int, float]


def small_divisor_fit(omega: Sequence[float], d: int, N: int) -> SmallDivisorReport:
    """Fit min_{j} |n.omega +- sqrt(|j|^2+1)| >= c' ||n||_1^{-q} over l1 shells.

    The minimum over j is taken over the full range reachable by |n . omega|.
    Exact dispersion hits (the tangential directions, where n.omega equals a
    linear frequency by construction) are excised, not bounded, and are
    skipped; the fit describes the complement.
    """
    om = np.array([float(w) for w in omega])
    b = len(om)
    j_max = int(math.ceil(N * float(np.sum(np.abs(om))))) + 2
    jj = np.arange(-j_max, j_max + 1)
    grids = np.meshgrid(*([jj] * d), indexing="ij")
    freq = np.sqrt(sum(g.astype(float) ** 2 for g in grids).ravel() + 1.0)
    freq = np.unique(freq)
    minima: dict[int, float] = {}
    for n in itertools.product(range(-N, N + 1), repeat=b):
        l1 = sum(abs(c) for c in n)
        if l1 == 0 or l1 > N:
            continue
        val = abs(float(np.dot(n, om)))
        i = np.searchsorted(freq, val)
        best = math.inf
        for k in (i - 1, i, i + 1):
            if 0 <= k < len(freq):
                cand = abs(val - freq[k])
                if cand < 1e-10:        # exact hit up to rounding: excised
                    continue
                best = min(best, cand)
        if best < minima.get(l1, math.inf):
            minima[l1] = best
    ks = sorted(minima)
    xs = np.log([float(k) for k in ks])
    ys = np.log([max(minima[k], 1e-300) for k in ks])
    slope, intercept = np.polyfit(xs, ys, 1)
    return SmallDivisorReport(float(-slope), float(math.exp(intercept)), minima)


@dataclass
class QuadraticGateReport:
    passed: bool
    min_value: float
    argmin: dict[str, int]
    bound: float
    n_random: int
    n_exact: int


def _monomials(b: int) -> list[tuple[int, ...]]:
    """Even quadratic monomials: the constant and chi_i chi_j for i <= j."""
    out: list[tuple[int, ...]] = [()]
    for i in range(b):
        for j in range(i, b):
            out.append((i, j))
    return out


def _poly_key(mono: tuple[int, ...]) -> str:
    return "1" if not mono else f"x{mono[0] + 1}*x{mono[1] + 1}"


def quadratic_gate(
    omega: Sequence[float],
    B: int,
    Cprime: float,
    delta: float,
    samples: int = 500,
    p: int = 2,
    d: int = 1,
    seed: int = 5,
    omega_exact: Sequence[QuadFieldElement] | None = None,
) -> QuadraticGateReport:
    """Check |P(omega)| > delta^p B^{-C'} over even quadratic integer polynomials.

    All nonzero polynomials supported on at most two monomials are checked
    exhaustively; `samples` further full-support coefficient vectors are
    drawn at random.  Values inside ten times the bound are re-evaluated in
    the exact field when omega_exact is supplied, so an exact resonance is
    reported as a hard failure rather than float noise.
    """
    if B <= 1:
        raise ValueError("B must exceed 1")
    om = np.array([float(w) for w in omega])
    b = len(om)
    monos = _monomials(b)
    vals = np.array([1.0 if not m else om[m[0]] * om[m[1]] for m in monos])
    K = int(B ** (2 * d + 1))
    bound = delta ** p * B ** (-Cprime)
    screen = 10.0 * bound

    exact_vals: list[QuadFieldElement] | None = None
    if omega_exact is not None:
        one = QuadFieldElement.rational(1)
        exact_vals = [
            one if not m else omega_exact[m[0]] * omega_exact[m[1]] for m in monos
        ]

    n_exact = 0
    min_value = math.inf
    argmin: dict[str, int] = {}

    def consider(value: float, coeffs: dict[int, int]) -> float:
        nonlocal min_value, argmin, n_exact
        v = abs(value)
        if v < screen and exact_vals is not None:
            e = QuadFieldElement.zero()
            for mi, c in coeffs.items():
                e = e + exact_vals[mi] * c
            n_exact += 1
            v = 0.0 if e.is_zero() else abs(e.to_float())
        if v < min_value:
            min_value = v
            argmin = {_poly_key(monos[mi]): c for mi, c in coeffs.items()}
        return v

    # exhaustive support <= 2
    for mi, v in enumerate(vals):
        consider(v, {mi: 1})                       # |c| v minimized at |c| = 1
    c1 = np.arange(1, K + 1)
    c2 = np.concatenate([np.arange(-K, 0), np.arange(1, K + 1)])
    for mi, mj in itertools.combinations(range(len(monos)), 2):
        grid = np.abs(c1[:, None] * vals[mi] + c2[None, :] * vals[mj])
        flat = int(np.argmin(grid))
        i, j = divmod(flat, len(c2))
        consider(
            float(c1[i] * vals[mi] + c2[j] * vals[mj]),
            {mi: int(c1[i]), mj: int(c2[j])},
        )

    # randomized full-support draws
    rng = np.random.default_rng(seed)
    n_random = 0
    for _ in range(samples):
        c = rng.integers(-K, K + 1, size=len(monos))
        if not np.any(c):
            continue
        n_random += 1
        consider(float(np.dot(c, vals)), {i: int(ci) for i, ci in enumerate(c) if ci})

    return QuadraticGateReport(
        passed=min_value > bound,
        min_value=min_value,
        argmin=argmin,
        bound=bound,
        n_random=n_random,
        n_exact=n_exact,
    )


# ---------------------------------------------------------------------------
# Newton step

def _parity_restricted(nl: Nonlinearity) -> bool:
    # every u-power odd <=> the time-frequency parity sum(n) mod 2 is conserved,
    # and the seed sites are odd, so the support never leaves the odd sublattice
    powers = [nl.p + 1] + [m for m, _ in nl.higher_terms]
    return all(m % 2 == 1 for m in powers)


_BOX_CACHE: dict[tuple, Box] = {}


def newton_box(basis: FrequencyBasis, nl: Nonlinearity, N: int) -> Box:
    """P-equation domain: the size-N box minus the tangential sites, restricted
    to the odd time-parity sublattice whenever the nonlinearity preserves it."""
    b, d = basis.b, basis.d
    parity = _parity_restricted(nl)
    key = (b, d, N, parity, tuple(sorted(basis.tangential_sites())))
    cached = _BOX_CACHE.get(key)
    if cached is not None:
        return cached
    excl = {x for x in basis.tangential_sites() if max(abs(c) for c in x) <= N}
    if parity:
        for x in Box(b, d, N).points():
            if sum(x[:b]) % 2 == 0:
                excl.add(x)
    box = Box(b, d, N, excluded=frozenset(excl))
    _BOX_CACHE[key] = box
    return box


def _core_weighted_norm(series: CosineSeries, w: Weight) -> float:
    """Weighted norm over the weight core |x|_inf <= 1/beta^2.

    Beyond the core the weight grows past 1/eps within a few dozen sites, so
    double precision cannot distinguish the true analytic tail from rounding
    noise there; the record tracks the region where the measurement is honest.
    """
    cap = 1.0 / (w.beta * w.beta)
    kept = {
        x: v for x, v in series.coeffs.items() if max(abs(c) for c in x) <= cap
    }
    return weighted_norm(CosineSeries(series.dims, kept), w)


def _active_set(
    core: Box,
    F: CosineSeries,
    kernel: CosineSeries,
    basis: FrequencyBasis,
    nl: Nonlinearity,
    params: SolverParameters,
    f_norm: float,
) -> list[tuple[int, ...]]:
    """Core box plus a one-kernel-hop fringe around the residual mass.

    The cubed seed pushes residual mass well outside any affordable box, but
    onto few sites; solving on core + fringe reaches it without paying for
    the enclosing box.  Seeds are the residual entries that matter: the
    largest prefix of small entries whose combined mass stays inside a 10%
    slice of the acceptance bar is left out.
    """
    b = basis.b
    parity = _parity_restricted(nl)
    s_sites = set(basis.tangential_sites())

    items = sorted(F.coeffs.items(), key=lambda kv: abs(float(kv[1])))
    budget = (0.1 * params.accept_bar * f_norm) ** 2
    acc = 0.0
    first_kept = len(items)
    for i, (_, v) in enumerate(items):
        acc += float(v) ** 2
        if acc > budget:
            first_kept = i
            break
    seeds = [x for x, _ in items[first_kept:]]

    hops = [(0,) * (b + basis.d)]
    hops.extend(_kernel_full_map(kernel, cap=params.kernel_cap)[0].keys())
    out = set(core.points())
    for x in seeds:
        for xs in (x, tuple(-c for c in x)):
            for z in hops:
                y = tuple(xc - zc for xc, zc in zip(xs, z))
                if y in s_sites:
                    continue
                if parity and sum(y[:b]) % 2 == 0:
                    continue
                out.add(y)
    return sorted(out)


def newton_step(
    state: SolutionState,
    boxN: int,
    params: SolverParameters,
    basis: FrequencyBasis,
    nl: Nonlinearity,
) -> tuple[SolutionState, dict]:
    """One Newton update on the active set: solve T du = -F off S, refit omega.

    Raises ExcisionSignal when the reduced near block is singular.
    """
    u, omega = state.u, state.omega
    p = nl.p
    w = params.weight
    amps = pinned_amplitudes(u, basis)

    t0 = time.perf_counter()
    F = state.F if state.F is not None else residual(u, omega, nl)
    f_prev = F.norm()

    core = newton_box(basis, nl, boxN)
    kernel = nl.kernel(u)
    active = _active_set(core, F, kernel, basis, nl, params, f_prev)
    n_active = max((max(abs(c) for c in x) for x in active), default=boxN)
    T = build_operator(
        u, omega, 0.0, core, nl,
        kernel_cap=params.kernel_cap, points=active, kernel=kernel,
    )
    near, W_used = default_near_set(T, params.delta, p, W=params.W)
    inv = schur_invert(T, near)
    rhs = np.array([-float(F.get(x)) for x in T.points])
    dv = inv.apply(rhs)

    # symmetrize, fold to canonical representatives, and keep components by
    # their residual impact |diag du|; near-resonant points are always kept
    # (tiny diagonal hides a real correction there)
    theta_cut = params.theta_rel * params.accept_bar * f_prev / math.sqrt(len(active))
    index = {x: i for i, x in enumerate(T.points)}
    upd: dict[tuple[int, ...], float] = {}
    for x, i in index.items():
        cx, _ = canonical(x)
        if cx != x:
            continue
        mirror = tuple(-c for c in x)
        im = index.get(mirror)
        val = float(dv[i]) if im is None else 0.5 * (float(dv[i]) + float(dv[im]))
        if not val:
            continue
        if params.trunc is not None:
            keep = abs(val) >= params.trunc
        else:
            keep = abs(float(T.diag[i]) * val) >= theta_cut
        if keep or x in near or mirror in near:
            upd[x] = val
    du = CosineSeries((basis.b, basis.d), upd)

    u_new = u.to_float() + du
    floor = params.floor_rel * params.accept_bar * f_prev
    g, nl_dropped = nl.nonlinear_coefficients_floored(u_new, floor)
    omega_new = _omega_from_g(g, amps, basis)
    F_new = diagonal_apply(u_new, omega_new) + g
    report = {
        "N": boxN,
        "N_active": n_active,
        "active_size": len(active),
        "du_norm": du.norm(),
        "du_norm_rho": _core_weighted_norm(du, w),
        "F_norm": F_new.norm(),
        "F_norm_rho": _core_weighted_norm(F_new, w),
        "near_size": len(near),
        "W_used": W_used,
        "kernel_dropped_l1": T.kernel_dropped_l1,
        "nl_dropped_l1": nl_dropped,
        "support": len(u_new),
        "wall_time": time.perf_counter() - t0,
    }
    return SolutionState(u_new, omega_new, state.r + 1, F_new), report


# ---------------------------------------------------------------------------
# trace and driver

@dataclass
class NewtonTrace:
    """Chronological step and event records (plain dicts, JSON-ready)."""

    records: list[dict] = field(default_factory=list)

    def steps(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "step"]

    def events(self) -> list[dict]:
        return [r for r in self.records if r["kind"] != "step"]

    def add(self, record: dict) -> None:
        self.records.append(record)

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")

    _CSV_COLS = (
        "r", "N", "N_active", "accepted", "du_norm", "du_norm_rho", "F_norm",
        "F_norm_rho", "jac_det", "near_size", "support", "wall_time",
    )

    def to_csv(self, path) -> None:
        steps = self.steps()
        b = len(steps[0]["omega"]) if steps else 0
        cols = list(self._CSV_COLS) + [f"omega_{k + 1}" for k in range(b)]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for rec in steps:
                row = [rec.get(c, "") for c in self._CSV_COLS]
                writer.writerow(list(row) + list(rec["omega"]))


@dataclass
class RunResult:
    trace: NewtonTrace
    state: SolutionState
    a: np.ndarray
    success: bool
    message: str = ""


def _snapshot(u: CosineSeries) -> list[list]:
    return [[list(x), float(v)] for x, v in sorted(u.coeffs.items())]


def _step_record(r: int, state: SolutionState, rep: dict, accepted: bool) -> dict:
    rec = {"kind": "step", "r": r, "accepted": accepted}
    rec.update(rep)
    rec["omega"] = [float(w) for w in state.omega]
    rec["u"] = _snapshot(state.u)
    return rec


def run(params: SolverParameters, basis: FrequencyBasis, nl: Nonlinearity) -> RunResult:
    """Gate, solve, refit loop over growing boxes with excision-by-rejection."""
    if not basis.verified:
        basis.verify()
    if not all(basis.verified.values()):
        raise ValueError("basis failed verification; refusing to iterate")
    w = params.weight
    trace = NewtonTrace()
    a_cur = np.array(params.a)

    def fresh_state(a_vec: np.ndarray, u_prev: CosineSeries | None) -> SolutionState:
        if u_prev is None:
            u0 = CosineSeries.initial_ansatz(basis.modes, [float(v) for v in a_vec])
        else:
            u0 = _repin(u_prev, basis, a_vec)
        omega0 = q_solve(u0, a_vec, basis, nl)
        return SolutionState(u0, omega0, 0, residual(u0, omega0, nl))

    state = fresh_state(a_cur, None)
    trace.add(_step_record(0, state, {
        "N": 0, "N_active": 0, "du_norm": 0.0, "du_norm_rho": 0.0,
        "F_norm": state.F.norm(), "F_norm_rho": _core_weighted_norm(state.F, w),
        "support": len(state.u), "wall_time": 0.0,
    }, accepted=True))
    best_norm = state.F.norm()

    attempts = 0
    r = 1
    while r <= params.r_max:
        if best_norm < params.target:
            break
        N_r = max(params.n_first, params.M ** r)

        def excise(reason: str) -> bool:
            """Jitter a and restart the step; False when the budget is gone."""
            nonlocal attempts, a_cur, state, best_norm
            attempts += 1
            trace.add({"kind": "excision", "r": r, "attempt": attempts, "reason": reason})
            if attempts > params.excision_budget:
                return False
            rng = np.random.default_rng(params.jitter_seed + attempts)
            lim = 0.95 * params.delta
            a_new = a_cur * (1.0 + 0.15 * rng.uniform(-1.0, 1.0, size=len(a_cur)))
            a_new = np.clip(a_new, -lim, lim)
            tiny = 1e-3 * params.delta
            a_new[np.abs(a_new) < tiny] = tiny
            a_cur = a_new
            trace.add({"kind": "jitter", "r": r, "a": [float(v) for v in a_cur]})
            state = fresh_state(a_cur, state.u)
            best_norm = state.F.norm()
            return True

        gate = diophantine_gate(state.omega, N_r, params.xi, params.gamma_for(basis.b))
        trace.add({
            "kind": "gate", "gate": "diophantine", "r": r, "passed": gate.passed,
            "worst_ratio": gate.worst_ratio, "worst_n": list(gate.worst_n),
        })
        quad = None
        if gate.passed:
            quad = quadratic_gate(
                state.omega, params.quad_B, params.Cprime, params.delta,
                samples=params.quad_samples, p=nl.p, d=basis.d,
            )
            trace.add({
                "kind": "gate", "gate": "quadratic", "r": r, "passed": quad.passed,
                "min_value": quad.min_value, "bound": quad.bound,
            })
        if not gate.passed or not quad.passed:
            which = "diophantine" if not gate.passed else "quadratic"
            if not excise(f"{which} gate failed at N={N_r}"):
                return RunResult(trace, state, a_cur, False,
                                 "excision budget exhausted at gate")
            continue

        try:
            # nondegeneracy certificate at the seed ansatz: the closed forms
            # live there and the differencing stays cheap at any support size
            fj = frequency_jacobian(a_cur, basis, nl)
            new_state, rep = newton_step(state, N_r, params, basis, nl)
        except ExcisionSignal as sig:
            if not excise(str(sig)):
                return RunResult(trace, state, a_cur, False,
                                 "excision budget exhausted at solve")
            continue

        # a step must contract by the configured factor or it is rejected:
        # marginal improvement means the contraction regime has been left
        accepted = rep["F_norm"] <= params.accept_bar * best_norm
        rep["jac_det"] = fj.det
        rep["jac_inv_norm"] = fj.inv_norm
        # the record carries the attempted iterate either way, so the stored
        # residual norm is always re-computable from the stored u
        trace.add(_step_record(r, new_state, rep, accepted))
        if accepted:
            state = new_state
            best_norm = rep["F_norm"]
        r += 1

    return RunResult(trace, state, a_cur, True)
