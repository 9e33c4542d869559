"""Truncated linearized operators on lattice boxes.

The operator at frequency omega, level theta is

    T(x, y) = [-(n.omega + theta)^2 + j^2 + 1] 1_{x=y}
              + (1/2)[a(x-y) + a(x+y)],

over box points x = (n, j), with a the linearization kernel of the
nonlinearity at the current approximate solution.  The kernel is even, so
T is real symmetric; the Hankel term a(x+y) dies on boxes far from the
origin where |x+y| exceeds the kernel diameter.  Note the convention: in
the cosine coordinate system the raw Jacobian column for y != 0 is
a(x-y) + a(x+y); this matrix carries the symmetrizing factor 1/2 there,
which rescales the perturbation uniformly and changes none of the
structure (tests bridge with the explicit weight).

Inversion goes through the Schur complement with the near-resonant set P:

    H = T_PP - lambda - T_Pc (T_cc - lambda)^{-1} T_cP,

with the far block T_cc inverted by diagonally preconditioned (Jacobi)
iteration whose residual is certified, and the small dense H factorized
directly.  A singular H raises ExcisionSignal: the caller must move the
parameters, not fight the matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .basis import FrequencyBasis
from .characteristics import AdjacencySet, cluster_decomposition, enumerate_characteristics
from .fourier import CosineSeries, Nonlinearity

__all__ = [
    "Box",
    "TruncatedOperator",
    "ExcisionSignal",
    "SchurInverse",
    "build_operator",
    "default_near_set",
    "schur_invert",
    "measure_green_decay",
    "frequency_modulation_poly",
    "block_decomposition",
    "LipschitzZeroFamily",
    "lipschitz_zero_family",
    "SweepThresholds",
    "theta_bad_sweep",
]

KERNEL_TRUNCATION_REL = 1e-12


# ---------------------------------------------------------------------------
# boxes

@dataclass(frozen=True)
class Box:
    """[-N, N]^b x ([-N, N]^d + J), minus an excluded point set."""

    b: int
    d: int
    N: int
    J: tuple = ()
    excluded: frozenset = frozenset()

    def __post_init__(self):
        J = tuple(self.J) if self.J else (0,) * self.d
        if len(J) != self.d:
            raise ValueError("J must have one offset per spatial dimension")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "excluded", frozenset(tuple(x) for x in self.excluded))

    def points(self) -> list[tuple]:
        rng = range(-self.N, self.N + 1)
        out = []
        for n in itertools.product(rng, repeat=self.b):
            for j in itertools.product(rng, repeat=self.d):
                x = n + tuple(jc + Jc for jc, Jc in zip(j, self.J))
                if x not in self.excluded:
                    out.append(x)
        return out

    def __len__(self) -> int:
        return (2 * self.N + 1) ** (self.b + self.d) - len(self.excluded)

    @property
    def J_inf(self) -> int:
        return max((abs(c) for c in self.J), default=0)


# ---------------------------------------------------------------------------
# operator assembly

class ExcisionSignal(RuntimeError):
    """Parameters hit a singular reduced block; excise and retry elsewhere."""


@dataclass
class TruncatedOperator:
    box: Box
    points: list
    diag: np.ndarray
    kernel: CosineSeries
    conv: sp.csr_matrix          # the symmetrized convolution part
    omega: np.ndarray
    theta: float
    kernel_dropped_l1: float = 0.0

    @property
    def n_points(self) -> int:
        return len(self.points)

    def matrix(self) -> sp.csr_matrix:
        return self.conv + sp.diags(self.diag)

    def dense(self) -> np.ndarray:
        return self.conv.toarray() + np.diag(self.diag)

    def conv_row_norm(self) -> float:
        if self.conv.nnz == 0:
            return 0.0
        return float(np.max(np.abs(self.conv).sum(axis=1)))

    def with_theta(self, theta: float) -> "TruncatedOperator":
        b = self.box.b
        pts = np.array(self.points)
        nw = pts[:, :b].astype(float) @ self.omega
        jj = np.sum(pts[:, b:].astype(float) ** 2, axis=1)
        diag = -((nw + theta) ** 2) + jj + 1.0
        return TruncatedOperator(self.box, self.points, diag, self.kernel,
                                 self.conv, self.omega, theta, self.kernel_dropped_l1)


def _kernel_full_map(kernel: CosineSeries, cap: int | None = None) -> tuple[dict, float]:
    """Full mirrored kernel map and the l1 mass dropped by truncation."""
    vals = [abs(float(v)) for _, v in kernel.full_items()]
    if not vals:
        return {}, 0.0
    cut = KERNEL_TRUNCATION_REL * max(vals)
    # quasi-Newton: entries below the relative cut are dropped from the matrix
    kept = {x: float(v) for x, v in kernel.full_items() if abs(float(v)) >= cut}
    dropped = sum(vals) - sum(abs(v) for v in kept.values())
    if cap is not None and len(kept) > cap:
        order = sorted(kept.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
        dropped += sum(abs(v) for _, v in order[cap:])
        kept = dict(order[:cap])
    return kept, dropped


def build_operator(
    u: CosineSeries,
    omega: Sequence[float],
    theta: float,
    box: Box,
    nl: Nonlinearity,
    kernel_cap: int | None = None,
    points: Sequence[tuple] | None = None,
    kernel: CosineSeries | None = None,
) -> TruncatedOperator:
    """Assemble T on the box; sparsity follows the kernel support.

    kernel_cap keeps only the largest kernel entries by modulus (quasi-Newton
    matrix); the dropped l1 mass is recorded on the operator.  An explicit
    `points` list overrides box.points() as the domain (b, d still come from
    the box); `kernel` supplies a precomputed linearization kernel.
    """
    om = np.asarray([float(w) for w in omega], dtype=float)
    b = box.b
    if kernel is None:
        kernel = nl.kernel(u)
    kmap, dropped = _kernel_full_map(kernel, cap=kernel_cap)

    points = box.points() if points is None else [tuple(x) for x in points]
    n = len(points)
    pts = np.array(points, dtype=np.int64).reshape(n, box.b + box.d)
    nw = pts[:, :b].astype(float) @ om
    jj = np.sum(pts[:, b:].astype(float) ** 2, axis=1)
    diag = -((nw + theta) ** 2) + jj + 1.0

    # dense index grid over the bounding region: row id or -1 (outside/excluded)
    lo = pts.min(axis=0)
    shape = tuple((pts.max(axis=0) - lo + 1).tolist())
    extent = np.array(shape, dtype=np.int64)
    grid = np.full(shape, -1, dtype=np.int64)
    grid[tuple((pts - lo).T)] = np.arange(n)

    col_ids = np.arange(n)
    rows, cols, vals = [], [], []
    for z, v in kmap.items():
        za = np.array(z, dtype=np.int64)
        for tgt in (pts + za, za - pts):        # Toplitz x - y = z, Hankel x + y = z
            rel = tgt - lo
            ok = np.all((rel >= 0) & (rel < extent), axis=1)
            if not ok.any():
                continue
            xi = grid[tuple(rel[ok].T)]
            hit = xi >= 0
            if not hit.any():
                continue
            rows.append(xi[hit])
            cols.append(col_ids[ok][hit])
            vals.append(np.full(int(hit.sum()), 0.5 * v))
    if rows:
        conv = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
    else:
        conv = sp.csr_matrix((n, n))
    return TruncatedOperator(box, points, diag, kernel, conv, om, float(theta), dropped)


# ---------------------------------------------------------------------------
# Schur inversion

def default_near_set(T: TruncatedOperator, delta: float, p: int, W: float = 10.0):
    """Near-resonant set {x : |diag| < W delta^p} with the dominance floor.

    W is raised until the far diagonal dominates the kernel row norm by a
    factor 4, so the Jacobi iteration on the far block contracts at rate
    <= 1/4 regardless of the configured value.
    """
    row = T.conv_row_norm()
    W_used = max(W, 4.0 * row / (delta ** p) if delta > 0 else W, 10.0)
    cut = W_used * delta ** p
    near = frozenset(x for x, dv in zip(T.points, T.diag) if abs(dv) < cut)
    return near, W_used


@dataclass
class SchurInverse:
    T: TruncatedOperator
    near_idx: np.ndarray
    far_idx: np.ndarray
    H: np.ndarray
    lam: float
    diagnostics: dict
    _Tm: sp.csr_matrix = None
    _H_lu: tuple = None
    _tol: float = 1e-12
    _max_iter: int = 400

    def _far_solve(self, rhs: np.ndarray) -> np.ndarray:
        """(T_cc - lam)^{-1} rhs by Jacobi iteration, residual certified."""
        Tm = self._Tm
        far = self.far_idx
        C = Tm[far][:, far]
        dvec = C.diagonal() - self.lam
        R = C - sp.diags(C.diagonal())
        x = rhs / dvec
        scale = float(np.max(np.abs(rhs))) or 1.0
        for _ in range(self._max_iter):
            x_new = (rhs - R @ x) / dvec
            res = float(np.max(np.abs(dvec * x_new + R @ x_new - rhs)))
            x = x_new
            if res < self._tol * scale:
                return x
        worst = np.argsort(np.abs(dvec))[:3]
        ents = [(tuple(self.T.points[far[i]]), float(dvec[i])) for i in worst]
        raise RuntimeError(
            "far-block iteration did not certify; smallest diagonal entries "
            f"(near_set too small?): {ents}"
        )

    def apply(self, v: np.ndarray) -> np.ndarray:
        """T^{-1} v through the block factorization."""
        import scipy.linalg as sla
        near, far = self.near_idx, self.far_idx
        Tm = self._Tm
        out = np.zeros_like(v, dtype=float)
        f_P, f_c = v[near], v[far]
        if len(far):
            y_c = self._far_solve(f_c)
            B = Tm[near][:, far]
            rhs_P = f_P - B @ y_c
        else:
            rhs_P = f_P
        if len(near):
            u_P = sla.lu_solve(self._H_lu, rhs_P)
            out[near] = u_P
        else:
            u_P = np.zeros(0)
        if len(far):
            Bt = Tm[far][:, near]
            out[far] = self._far_solve(f_c - Bt @ u_P)
        return out

    def green_entry(self, x, y) -> float:
        ix = self.T.points.index(tuple(x))
        iy = self.T.points.index(tuple(y))
        e = np.zeros(self.T.n_points)
        e[iy] = 1.0
        return float(self.apply(e)[ix])

    def greens_matrix(self) -> np.ndarray:
        n = self.T.n_points
        G = np.zeros((n, n))
        for iy in range(n):
            e = np.zeros(n)
            e[iy] = 1.0
            G[:, iy] = self.apply(e)
        return G

    def norm_estimate(self, n_iter: int = 20, seed: int = 7) -> float:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.T.n_points)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(n_iter):
            w = self.apply(v)
            w = self.apply(w)        # (T^{-1})^T T^{-1} = T^{-2}, T symmetric
            nw = np.linalg.norm(w)
            if nw == 0:
                return 0.0
            est = math.sqrt(nw)
            v = w / nw
        return est


def schur_invert(
    T: TruncatedOperator,
    near_set=None,
    lam: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 400,
) -> SchurInverse:
    """Factorize T - lam through the near/far block reduction."""
    import scipy.linalg as sla

    if near_set is None:
        near_set = frozenset()
    near_set = frozenset(tuple(x) for x in near_set)
    near_idx = np.array(
        [i for i, x in enumerate(T.points) if x in near_set], dtype=int
    )
    far_idx = np.array(
        [i for i, x in enumerate(T.points) if x not in near_set], dtype=int
    )
    Tm = T.matrix().tocsr()

    floor = 0.0
    if len(far_idx):
        far_diag = T.diag[far_idx] - lam
        floor = float(np.min(np.abs(far_diag)))
        if floor == 0.0:
            bad = [tuple(T.points[i]) for i in far_idx[np.abs(far_diag) == 0.0][:5]]
            raise RuntimeError(f"zero diagonal outside near set at {bad}")

    diagnostics = {
        "n_near": int(len(near_idx)),
        "n_far": int(len(far_idx)),
        "far_diag_floor": floor,
        "conv_row_norm": T.conv_row_norm(),
    }

    inv = SchurInverse(T, near_idx, far_idx, np.zeros((0, 0)), lam, diagnostics,
                       _Tm=Tm, _tol=tol, _max_iter=max_iter)

    if len(near_idx):
        B = Tm[near_idx][:, far_idx]
        A = Tm[near_idx][:, near_idx].toarray() - lam * np.eye(len(near_idx))
        if len(far_idx):
            BCiBt = np.zeros((len(near_idx), len(near_idx)))
            Bt = Tm[far_idx][:, near_idx].toarray()
            for k in range(len(near_idx)):
                BCiBt[:, k] = B @ inv._far_solve(Bt[:, k])
            H = A - BCiBt
        else:
            H = A
        inv.H = H
        cond = np.linalg.cond(H) if H.size else 1.0
        diagnostics["H_cond"] = float(cond)
        if not np.isfinite(cond) or cond > 1e14:
            raise ExcisionSignal(
                f"singular Schur complement (cond {cond:.3g}); "
                "excise these parameters"
            )
        inv._H_lu = sla.lu_factor(H)
    else:
        diagnostics["H_cond"] = 1.0
    return inv


# ---------------------------------------------------------------------------
# Green's function decay

@dataclass
class DecayReport:
    beta_hat: float
    argmin_pair: tuple
    n_pairs: int
    vacuous: bool
    passed: bool
    beta_candidate: float


def measure_green_decay(
    G: np.ndarray, box_points: Sequence[tuple], beta_candidate: float, delta: float
) -> DecayReport:
    """Fit the decay exponent on pairs with sup-distance beyond 1/beta^2.

    beta_hat = min -log|G(x,y)| / (|log delta| |x-y|) over qualifying pairs
    with G(x,y) != 0; exact zeros satisfy any bound and are skipped.
    """
    t0 = 1.0 / beta_candidate ** 2
    logd = abs(math.log(delta))
    pts = [tuple(x) for x in box_points]
    beta_hat = math.inf
    argmin = None
    n_pairs = 0
    for i, x in enumerate(pts):
        for k, y in enumerate(pts):
            if i == k:
                continue
            dist = max(abs(a - c) for a, c in zip(x, y))
            if dist <= t0:
                continue
            n_pairs += 1
            g = abs(G[i, k])
            if g == 0.0:
                continue
            val = -math.log(g) / (logd * dist)
            if val < beta_hat:
                beta_hat = val
                argmin = (x, y)
    if n_pairs == 0:
        return DecayReport(math.inf, None, 0, True, True, beta_candidate)
    passed = beta_hat >= beta_candidate
    return DecayReport(beta_hat, argmin, n_pairs, False, passed, beta_candidate)


# ---------------------------------------------------------------------------
# block decomposition over clusters

def frequency_modulation_poly(
    basis: FrequencyBasis, a: Sequence[float], nl: Nonlinearity
) -> np.ndarray:
    """Leading frequency shift Omega_k = G_k / (a_k sqrt(j_k^2+1)),
    G the (p+1)-power coefficient of the seed at the k-th site.

    Homogeneous of degree p in a; this is the polynomial the block
    determinants are taken in.
    """
    amps = [float(v) for v in a]
    if any(v == 0.0 for v in amps):
        raise ValueError("all amplitudes must be nonzero")
    u0 = CosineSeries.initial_ansatz(basis.modes, amps)
    g = nl.nonlinear_coefficients(u0)
    out = np.zeros(basis.b)
    for k, (jk, sk) in enumerate(zip(basis.modes, basis.radicands)):
        site = tuple(-v for v in _unit(basis.b, k)) + tuple(jk)
        out[k] = float(g.get(site)) / (amps[k] * math.sqrt(sk))
    return out


def _unit(b: int, k: int) -> tuple:
    e = [0] * b
    e[k] = 1
    return tuple(e)


@dataclass
class BlockReport:
    clusters: list
    blocks: list            # dicts: points, F_w, det_w, det_ones, R_diag
    max_block_size: int
    dets_nonzero: bool
    r_criterion_ok: bool


def _build_block(points, basis, amps, nl) -> np.ndarray:
    omega0 = np.array(basis.omega0_floats())
    Om = frequency_modulation_poly(basis, amps, nl)
    u0 = CosineSeries.initial_ansatz(basis.modes, [float(v) for v in amps])
    kern = nl.kernel(u0)
    m = len(points)
    F = np.zeros((m, m))
    b = basis.b
    for i, x in enumerate(points):
        n = np.array(x[:b], dtype=float)
        F[i, i] += -2.0 * float(n @ omega0) * float(n @ Om)
        for k, y in enumerate(points):
            z = tuple(a - c for a, c in zip(x, y))
            F[i, k] += float(kern.get(z))
    return F


def block_decomposition(
    u0: CosineSeries,
    basis: FrequencyBasis,
    a: Sequence[float],
    boxN: int,
    nl: Nonlinearity | None = None,
    delta: float | None = None,
) -> BlockReport:
    """Clusters of the level-zero characteristic set away from the seed
    support, each carrying the block

        F = diag[-2 (n.omega0)(n.Omega)] + kernel(x - y),

    a polynomial in the amplitudes.  Determinants are reported at the
    rescaled point w = a/delta and at w = (1,...,1); for p = 2 the leading
    diagonal coefficient vanishes exactly on |n_k| = 1, which is also
    checked.
    """
    nl = nl or Nonlinearity(basis.p)
    amps = np.asarray([float(v) for v in a], dtype=float)
    if delta is None:
        delta = float(np.max(np.abs(amps))) or 1.0

    pts = enumerate_characteristics(basis, 0, boxN)
    S = set(basis.tangential_sites())
    pts = [x for x in pts if x not in S]
    gamma = AdjacencySet.gamma(basis, basis.p)
    clusters = cluster_decomposition(pts, gamma, basis=basis, theta=0)

    w = amps / delta
    ones = np.ones(basis.b)
    blocks = []
    dets_ok = True
    r_ok = True
    bdim = basis.b
    for cl in clusters:
        F_w = _build_block(cl.members, basis, w, nl)
        F_1 = _build_block(cl.members, basis, ones, nl)
        det_w = float(np.linalg.det(F_w))
        det_1 = float(np.linalg.det(F_1))
        if det_1 == 0.0:
            dets_ok = False
        r_diag = []
        if basis.p == 2:
            for x in cl.members:
                nz = [(k, v) for k, v in enumerate(x[:bdim]) if v]
                if len(nz) != 1:
                    r_diag.append({"point": x, "singleton": False})
                    continue
                k, nk = nz[0]
                R = 1.5 * (1.0 - nk * nk)   # leading-b coefficient, p = 2
                want_zero = abs(nk) == 1
                if (R == 0.0) != want_zero:
                    r_ok = False
                r_diag.append(
                    {"point": x, "n_k": nk, "R": R, "zero_iff_unit": want_zero}
                )
        blocks.append(
            {
                "points": cl.members,
                "size": cl.size,
                "det_w": det_w,
                "det_ones": det_1,
                "R_diag": r_diag,
            }
        )
    max_size = max((c.size for c in clusters), default=0)
    return BlockReport(clusters, blocks, max_size, dets_ok, r_ok)


# ---------------------------------------------------------------------------
# Lipschitz zero families on perturbative cubes

@dataclass
class LipschitzZeroFamily:
    zeros: np.ndarray
    side: int                 # -1: W_- branch, +1: W_+ branch
    cube: Box
    lip_bounds: dict
    iterations: int
    approximate: bool


def _branch_zero_closed_form(nw: np.ndarray, sq: np.ndarray, side: int) -> np.ndarray:
    if side < 0:
        return np.sort(-(nw + sq))
    return np.sort(-nw + sq)


def _solve_branch(
    nw: np.ndarray, sq: np.ndarray, Abar: np.ndarray, J_inf: float, side: int,
    tol: float, max_iter: int, dense_cap: int,
) -> tuple[np.ndarray, int, bool]:
    """Zeros of the rescaled branch matrix by fixed point on eigenvalues."""
    npts = len(nw)
    diagT = (nw + sq) / J_inf if side < 0 else (-nw + sq) / J_inf
    if not np.any(Abar):
        theta_t = -diagT if side < 0 else diagT
        return np.sort(theta_t) * J_inf, 0, False

    def eig_all(theta_t: float) -> np.ndarray:
        if side < 0:
            wdiag = (-nw - theta_t * J_inf + sq) / J_inf
        else:
            wdiag = (nw + theta_t * J_inf + sq) / J_inf
        if np.min(wdiag) <= 0:
            raise ValueError(
                f"W{'-' if side < 0 else '+'} not sign-definite at rescaled "
                f"level {theta_t:.4g}"
            )
        s = 1.0 / np.sqrt(wdiag)
        Tp = np.diag(diagT) + (s[:, None] * Abar * s[None, :])
        return np.linalg.eigvalsh(Tp)

    theta0 = -diagT if side < 0 else diagT
    order = np.argsort(theta0)
    if npts > dense_cap:
        # single reference evaluation, first order in Abar
        ref = float(np.median(theta0))
        E = eig_all(ref)
        theta_t = -E if side < 0 else E
        return np.sort(theta_t) * J_inf, 1, True

    zeros = np.empty(npts)
    worst_iters = 0
    # eigvalsh backward error floors the attainable fixed-point accuracy
    eig_floor = npts * np.finfo(float).eps * max(float(np.max(np.abs(diagT))), 1.0)
    eig_tol = max(tol / max(J_inf, 1.0), eig_floor)
    for rank, idx in enumerate(order):
        t = theta0[idx]
        it = 0
        for it in range(1, max_iter + 1):
            E = eig_all(t)
            # zeros of -+theta_t + E_i: the rank-th zero in ascending order
            # pairs with the matching ascending eigenvalue
            t_new = -E[npts - 1 - rank] if side < 0 else E[rank]
            if abs(t_new - t) < eig_tol:
                t = t_new
                break
            t = t_new
        else:
            raise RuntimeError(f"fixed point did not converge in {max_iter} steps")
        worst_iters = max(worst_iters, it)
        zeros[rank] = t * J_inf
    return np.sort(zeros), worst_iters, False


def lipschitz_zero_family(
    cube: Box,
    u: CosineSeries,
    omega: Sequence[float],
    nl: Nonlinearity,
    basis: FrequencyBasis | None = None,
    a: Sequence[float] | None = None,
    C: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 100,
    dense_cap: int = 800,
    seed: int = 5,
) -> list[LipschitzZeroFamily]:
    """Zero families for both branches on a perturbative cube.

    Validates the separation |n.omega +- sqrt(j^2+1)| > |J|_inf / 2 on every
    cube point, then runs the eigenvalue fixed point per branch.  When basis
    and a are supplied, Lipschitz ratios in a and omega are measured by
    re-solving at perturbed parameters.
    """
    om = np.asarray([float(w) for w in omega])
    b = cube.b
    pts = np.array(cube.points())
    nw = pts[:, :b].astype(float) @ om
    sq = np.sqrt(np.sum(pts[:, b:].astype(float) ** 2, axis=1) + 1.0)
    J_inf = float(cube.J_inf)
    sep = min(float(np.min(np.abs(nw + sq))), float(np.min(np.abs(nw - sq))))
    if not (J_inf > 0 and sep > J_inf / 2):
        raise ValueError(
            f"cube not in perturbative region: separation {sep:.3g} <= "
            f"|J|inf/2 = {J_inf / 2:.3g}"
        )

    def abar_of(u_ser: CosineSeries, om_vec: np.ndarray) -> np.ndarray:
        T = build_operator(u_ser, om_vec, 0.0, cube, nl)
        return T.conv.toarray() / J_inf ** 2

    Abar = abar_of(u, om)

    def zeros_of(Ab, om_vec) -> dict[int, np.ndarray]:
        nw_v = pts[:, :b].astype(float) @ om_vec
        out = {}
        for side in (-1, 1):
            z, _, _ = _solve_branch(nw_v, sq, Ab, J_inf, side, tol, max_iter, dense_cap)
            out[side] = z
        return out

    rng = np.random.default_rng(seed)
    lip = {"a": None, "omega": None, "bound_a": 2.0 * C / J_inf, "bound_omega": C * cube.N}
    base = None
    if basis is not None and a is not None:
        amps = np.asarray([float(v) for v in a])
        base = zeros_of(Abar, om)
        da = 1e-3 * max(np.max(np.abs(amps)), 1e-3) * rng.choice([-1.0, 1.0], size=len(amps))
        u2 = CosineSeries.initial_ansatz(basis.modes, list(amps + da))
        z2 = zeros_of(abar_of(u2, om), om)
        lip["a"] = max(
            float(np.max(np.abs(z2[s] - base[s]))) for s in (-1, 1)
        ) / float(np.max(np.abs(da)))
        dw = 1e-6 * rng.choice([-1.0, 1.0], size=len(om))
        z3 = zeros_of(abar_of(u, om + dw), om + dw)
        lip["omega"] = max(
            float(np.max(np.abs(z3[s] - base[s]))) for s in (-1, 1)
        ) / float(np.max(np.abs(dw)))

    out = []
    for side in (-1, 1):
        z, iters, approx = _solve_branch(nw, sq, Abar, J_inf, side, tol, max_iter, dense_cap)
        out.append(
            LipschitzZeroFamily(
                zeros=z, side=side, cube=cube, lip_bounds=dict(lip),
                iterations=iters, approximate=approx,
            )
        )
    return out


# ---------------------------------------------------------------------------
# theta sweeps

@dataclass
class SweepThresholds:
    """Bad-set thresholds.

    With sigma unset the cut is the fixed delta^(-p-eps).  With sigma set
    the cut is the scale-coupled exp(N^sigma); that is the form under which
    the bad fraction decays in N at fixed delta.
    """

    delta: float
    p: int
    eps: float = 0.25
    tau: float = 0.4
    sigma: float | None = None

    @property
    def norm_cut(self) -> float:
        return self.delta ** (-self.p - self.eps)

    def cut_for(self, N: int) -> float:
        if self.sigma is not None:
            return math.exp(N ** self.sigma)
        return self.norm_cut


@dataclass
class SweepReport:
    grid: np.ndarray
    bad_mask: np.ndarray
    bad_fraction: float
    measure_estimate: float
    intervals: list
    z_values: np.ndarray
    max_dist_to_z: float
    n_dense: int
    n_certified: int
    meets_measure_bound: bool
    meets_exp_bound: bool


def theta_bad_sweep(
    u: CosineSeries,
    omega: Sequence[float],
    N: int,
    theta_grid: Sequence[float],
    thresholds: SweepThresholds,
    nl: Nonlinearity,
    excluded=frozenset(),
    chunk: int = 32,
) -> SweepReport:
    """Measure the bad level set {theta : ||T_N(theta)^{-1}|| > cut}.

    Far from the diagonal zero set the inverse is certified by diagonal
    dominance; the remaining levels get a dense symmetric eigensolve in
    batches.  The report localizes every bad interval against the root set
    Z = {-n.omega +- sqrt(j^2+1)}.
    """
    b, d = u.dims
    om = np.asarray([float(w) for w in omega])
    box = Box(b, d, N, excluded=excluded)
    T0 = build_operator(u, om, 0.0, box, nl)
    pts = np.array(T0.points)
    nw = pts[:, :b].astype(float) @ om
    jj = np.sum(pts[:, b:].astype(float) ** 2, axis=1)
    sq = np.sqrt(jj + 1.0)
    row = T0.conv_row_norm()
    cut = thresholds.cut_for(N)

    grid = np.asarray(theta_grid, dtype=float)
    z_vals = np.unique(np.concatenate([-nw + sq, -nw - sq]))

    # dominance certificate: min |diag| - row norm >= 1/cut
    diag_all = -((nw[None, :] + grid[:, None]) ** 2) + jj[None, :] + 1.0
    min_abs = np.min(np.abs(diag_all), axis=1)
    certified_good = (min_abs - row) >= 1.0 / cut
    need_dense = np.where(~certified_good)[0]

    bad = np.zeros(len(grid), dtype=bool)
    conv_dense = T0.conv.toarray()
    for start in range(0, len(need_dense), chunk):
        idxs = need_dense[start:start + chunk]
        mats = np.broadcast_to(conv_dense, (len(idxs),) + conv_dense.shape).copy()
        rows = np.arange(conv_dense.shape[0])
        for k, gi in enumerate(idxs):
            mats[k, rows, rows] += diag_all[gi]
        eigs = np.linalg.eigvalsh(mats)
        sig_min = np.min(np.abs(eigs), axis=1)
        bad[idxs] = sig_min < 1.0 / cut

    frac = float(np.mean(bad))
    span = float(grid[-1] - grid[0]) if len(grid) > 1 else 0.0
    measure = frac * span

    intervals = []
    i = 0
    while i < len(grid):
        if bad[i]:
            j = i
            while j + 1 < len(grid) and bad[j + 1]:
                j += 1
            intervals.append((float(grid[i]), float(grid[j])))
            i = j + 1
        else:
            i += 1
    max_dist = 0.0
    for lo, hi in intervals:
        mid = 0.5 * (lo + hi)
        max_dist = max(max_dist, float(np.min(np.abs(z_vals - mid))))

    meas_bound = thresholds.delta ** (thresholds.p + thresholds.eps / (8 * b))
    exp_bound = math.exp(-N ** thresholds.tau)
    return SweepReport(
        grid=grid,
        bad_mask=bad,
        bad_fraction=frac,
        measure_estimate=measure,
        intervals=intervals,
        z_values=z_vals,
        max_dist_to_z=max_dist,
        n_dense=int(len(need_dense)),
        n_certified=int(np.sum(certified_good)),
        meets_measure_bound=measure < meas_bound,
        meets_exp_bound=measure < exp_bound,
    )
