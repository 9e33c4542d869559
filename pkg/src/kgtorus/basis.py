"""Selection and verification of non-degenerate tangential frequency bases.

A basis is a list of b distinct spatial modes j_1, ..., j_b in Z^d \\ {0}
carrying the unperturbed frequencies omega_k = sqrt(|j_k|^2 + 1).  Three
arithmetic conditions make the later construction work:

  (i)  any min(d, b) of the mode vectors are linearly independent over Q;
       when b >= d+1, additionally for every k the difference/sum family
       J_k = {j_l +- j_k : l = 1..b} \\ {0} has every d of its members
       linearly independent;

  (ii) the radicands s_k = |j_k|^2 + 1 are square-free, pairwise distinct,
       and increasing along the basis;

  (iii) a finite family of affine hyperplanes built from integer mode
       combinations has empty 2d-fold intersections: for every k, every
       m in [-p, p] \\ {0}, and pairs (l, m_l) with |m_l| <= 2pd and
       eta = m j_k - m_l j_l != 0, each 2d-subset sigma of the pairs that
       contains some member with m_l != +-m must satisfy
       intersection_{(l, m_l) in sigma} { j : 2 eta . j + L = 0 } = empty,
       where L = 2m eta . j_k + (m^2 - m_l^2).

All three are decided exactly over the rationals (Gaussian elimination with
fractions); the hyperplane check counts its work against a budget and
reports exhaustion distinctly from failure.  Pairs with m_l = 0 all describe
the same hyperplane independent of l, so they are folded into l = k.  Two
cheap sufficient tests shortcut a sigma before solving: parallel planes with
incompatible offsets, and coincident-normal duplicates.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .exactfield import QuadFieldElement, is_square_free

__all__ = [
    "FrequencyBasis",
    "BasisSelectionError",
    "ConditionReport",
    "check_condition_i",
    "check_condition_ii",
    "check_condition_iii",
    "select_basis",
    "rational_rank",
]


# ---------------------------------------------------------------------------
# exact linear algebra helpers

def rational_rank(rows: Sequence[Sequence]) -> int:
    """Rank over Q of an integer/rational matrix, by fraction Gauss elimination."""
    m = [[Fraction(v) for v in row] for row in rows]
    if not m:
        return 0
    nrows, ncols = len(m), len(m[0])
    rank = 0
    col = 0
    for col in range(ncols):
        piv = next((r for r in range(rank, nrows) if m[r][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = 1 / m[rank][col]
        m[rank] = [v * inv for v in m[rank]]
        for r in range(nrows):
            if r != rank and m[r][col]:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
        if rank == nrows:
            break
    return rank


def linear_system_consistent(
    A: Sequence[Sequence], b: Sequence
) -> tuple[bool, list[Fraction] | None]:
    """Whether A x = b has a rational solution; returns one solution if so.

    The returned solution sets free variables to 0.
    """
    rows = [[Fraction(v) for v in row] + [Fraction(c)] for row, c in zip(A, b)]
    ncols = len(rows[0]) - 1
    pivots: list[int] = []
    rank = 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = 1 / rows[rank][col]
        rows[rank] = [v * inv for v in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                f = rows[r][col]
                rows[r] = [a - f * b2 for a, b2 in zip(rows[r], rows[rank])]
        pivots.append(col)
        rank += 1
    for r in range(rank, len(rows)):
        if rows[r][ncols]:
            return False, None
    x = [Fraction(0)] * ncols
    for r, col in enumerate(pivots):
        x[col] = rows[r][ncols]
    return True, x


# ---------------------------------------------------------------------------
# condition reports

@dataclass
class ConditionReport:
    name: str
    ok: bool
    status: str  # "ok" | "fail" | "budget_exceeded"
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# condition (i): linear independence

def check_condition_i(modes: Sequence[Sequence[int]], d: int) -> ConditionReport:
    b = len(modes)
    js = [tuple(int(c) for c in j) for j in modes]
    dbar = min(d, b)
    for T in itertools.combinations(range(b), dbar):
        sub = [js[k] for k in T]
        if rational_rank(sub) < dbar:
            return ConditionReport(
                "i", False, "fail", {"part": "modes", "subset": list(T), "vectors": sub}
            )
    if b >= d + 1:
        for k in range(b):
            jk = js[k]
            family = set()
            for l in range(b):
                for sgn in (1, -1):
                    v = tuple(a + sgn * c for a, c in zip(js[l], jk))
                    if any(v):
                        family.add(v)
            fam = sorted(family)
            for T in itertools.combinations(range(len(fam)), min(d, len(fam))):
                if len(T) < d:
                    return ConditionReport(
                        "i", False, "fail", {"part": "J_k", "k": k, "reason": "family too small"}
                    )
                sub = [fam[i] for i in T]
                if rational_rank(sub) < d:
                    return ConditionReport(
                        "i", False, "fail", {"part": "J_k", "k": k, "subset": sub}
                    )
    return ConditionReport("i", True, "ok", {})


# ---------------------------------------------------------------------------
# condition (ii): radicands

def check_condition_ii(modes: Sequence[Sequence[int]]) -> ConditionReport:
    rad = []
    for j in modes:
        if not any(j):
            return ConditionReport("ii", False, "fail", {"reason": "zero mode"})
        rad.append(sum(int(c) ** 2 for c in j) + 1)
    for a, bb in zip(rad, rad[1:]):
        if not a < bb:
            return ConditionReport(
                "ii", False, "fail", {"reason": "not strictly increasing", "radicands": rad}
            )
    for s in rad:
        if not is_square_free(s):
            return ConditionReport(
                "ii", False, "fail", {"reason": "not square-free", "radicand": s}
            )
    return ConditionReport("ii", True, "ok", {"radicands": rad})


# ---------------------------------------------------------------------------
# condition (iii): hyperplane intersections

def _hyperplane_pairs(
    js: list[tuple[int, ...]], k: int, m: int, p: int, d: int
) -> list[tuple[int, int, tuple[int, ...], int]]:
    """Enumerate (l, m_l, eta, L) with eta != 0; m_l = 0 folded into l = k.

    Pairs must correspond to points of the iterated-support set: with nu =
    -m e_k + m_l e_l the 1-norm |nu| has to be even (p is even, so every
    convolution power of the seed has even total degree) and at most
    p(2d+1).  Pairs failing that carry no lattice translation and are not
    part of the condition.
    """
    b = len(js)
    jk = js[k]
    cap = p * (2 * d + 1)
    out = []
    for l in range(b):
        for ml in range(-2 * p * d, 2 * p * d + 1):
            if ml == 0 and l != k:
                continue  # same plane for every l, keep the l = k copy
            nu_norm = abs(ml - m) if l == k else abs(m) + abs(ml)
            if nu_norm % 2 or nu_norm > cap:
                continue
            eta = tuple(m * a - ml * c for a, c in zip(jk, js[l]))
            if not any(eta):
                continue
            L = 2 * m * sum(e * a for e, a in zip(eta, jk)) + (m * m - ml * ml)
            out.append((l, ml, eta, L))
    return out


def _parallel_incompatible(
    e1: Sequence[int], l1: int, e2: Sequence[int], l2: int
) -> bool:
    """Planes 2 e . j + L = 0 with proportional normals and inconsistent offsets."""
    if rational_rank([e1, e2]) != 1:
        return False
    return rational_rank([list(e1) + [Fraction(l1, 2)], list(e2) + [Fraction(l2, 2)]]) == 2


def check_condition_iii(
    modes: Sequence[Sequence[int]], p: int, budget: int = 1_000_000
) -> ConditionReport:
    """Exact emptiness of all qualifying 2d-fold hyperplane intersections.

    Subsets enumerated count against the budget; exceeding it aborts with
    status budget_exceeded (never a silent pass).  Three cheap certificates
    dispose of a sigma before any elimination:

      same_k:   two planes of the (k, m_k) family have normal j_k and
                offsets differing by (m_k - m_k')/2, so they never meet;
      same_l:   three planes sharing an index l != k are jointly empty;
      parallel: a precomputed pairwise table of parallel-but-inconsistent
                normals.

    Everything else is decided by rational Gaussian elimination.  The
    details dict reports how often each path fired.
    """
    js = [tuple(int(c) for c in j) for j in modes]
    b = len(js)
    d = len(js[0])
    stats = {"checked": 0, "solved": 0, "same_k": 0, "same_l": 0, "parallel": 0}
    for k in range(b):
        for m in [v for v in range(-p, p + 1) if v]:
            pairs = _hyperplane_pairs(js, k, m, p, d)
            npairs = len(pairs)
            is_k_type = [l == k for l, _, _, _ in pairs]
            incompat = [[False] * npairs for _ in range(npairs)]
            for i in range(npairs):
                for jdx in range(i + 1, npairs):
                    if _parallel_incompatible(
                        pairs[i][2], pairs[i][3], pairs[jdx][2], pairs[jdx][3]
                    ):
                        incompat[i][jdx] = incompat[jdx][i] = True
            for sigma in itertools.combinations(range(npairs), 2 * d):
                if not any(pairs[i][1] not in (m, -m) for i in sigma):
                    continue
                stats["checked"] += 1
                if stats["checked"] > budget:
                    return ConditionReport(
                        "iii", False, "budget_exceeded",
                        {"budget": budget, "stats": stats},
                    )
                if sum(is_k_type[i] for i in sigma) >= 2:
                    stats["same_k"] += 1
                    continue
                by_l: dict[int, int] = {}
                for i in sigma:
                    if not is_k_type[i]:
                        by_l[pairs[i][0]] = by_l.get(pairs[i][0], 0) + 1
                if any(c >= 3 for c in by_l.values()):
                    stats["same_l"] += 1
                    continue
                if any(
                    incompat[i][jdx]
                    for i, jdx in itertools.combinations(sigma, 2)
                ):
                    stats["parallel"] += 1
                    continue
                stats["solved"] += 1
                A = [[2 * e for e in pairs[i][2]] for i in sigma]
                rhs = [-pairs[i][3] for i in sigma]
                consistent, point = linear_system_consistent(A, rhs)
                if consistent:
                    return ConditionReport(
                        "iii", False, "fail",
                        {
                            "k": k,
                            "m": m,
                            "sigma": [pairs[i][:2] for i in sigma],
                            "point": [str(v) for v in point],
                            "stats": stats,
                        },
                    )
    return ConditionReport("iii", True, "ok", {"stats": stats})


def sigma_empty_by_shortcut(planes: list[tuple[tuple[int, ...], int]]) -> bool:
    """Pairwise parallel-incompatibility certificate, exposed for tests."""
    return any(
        _parallel_incompatible(e1, l1, e2, l2)
        for (e1, l1), (e2, l2) in itertools.combinations(planes, 2)
    )


# ---------------------------------------------------------------------------
# the basis object

class BasisSelectionError(RuntimeError):
    """Raised when the sweep exhausts its candidate range."""


@dataclass
class FrequencyBasis:
    d: int
    b: int
    p: int
    modes: tuple[tuple[int, ...], ...]
    verified: dict = field(default_factory=dict)

    def __post_init__(self):
        self.modes = tuple(tuple(int(c) for c in j) for j in self.modes)
        if len(self.modes) != self.b:
            raise ValueError("need exactly b modes")
        for j in self.modes:
            if len(j) != self.d:
                raise ValueError("mode dimension mismatch")

    @property
    def radicands(self) -> tuple[int, ...]:
        return tuple(sum(c * c for c in j) + 1 for j in self.modes)

    def omega0_exact(self) -> list[QuadFieldElement]:
        return [QuadFieldElement.sqrt(s) for s in self.radicands]

    def omega0_floats(self) -> np.ndarray:
        return np.array([math.sqrt(s) for s in self.radicands])

    def tangential_sites(self) -> list[tuple[int, ...]]:
        """The 2b lattice points carrying the initial ansatz: (-e_k, j_k) and mirrors."""
        pts = []
        for k, j in enumerate(self.modes):
            n = [0] * self.b
            n[k] = -1
            pts.append(tuple(n) + tuple(j))
            pts.append(tuple(-v for v in n) + tuple(-c for c in j))
        return pts

    def verify(self, budget: int = 1_000_000) -> dict[str, ConditionReport]:
        reports = {
            "i": check_condition_i(self.modes, self.d),
            "ii": check_condition_ii(self.modes),
            "iii": check_condition_iii(self.modes, self.p, budget=budget),
        }
        self.verified = {name: r.ok for name, r in reports.items()}
        return reports

    # -- serialization -------------------------------------------------------
    def to_json_obj(self) -> dict:
        return {
            "d": self.d,
            "b": self.b,
            "p": self.p,
            "modes": [list(j) for j in self.modes],
            "radicands": list(self.radicands),
            "verified": dict(self.verified),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FrequencyBasis":
        basis = cls(
            d=int(obj["d"]),
            b=int(obj["b"]),
            p=int(obj["p"]),
            modes=tuple(tuple(j) for j in obj["modes"]),
            verified=dict(obj.get("verified", {})),
        )
        if "radicands" in obj and tuple(obj["radicands"]) != basis.radicands:
            raise ValueError("radicands in file disagree with modes")
        return basis

    @classmethod
    def from_json(cls, s: str) -> "FrequencyBasis":
        return cls.from_json_obj(json.loads(s))


# ---------------------------------------------------------------------------
# selection sweep

def _candidate_modes(d: int, bound: int, seed=None) -> list[tuple[int, ...]]:
    """Nonzero modes with |j|_inf <= bound, one representative per {j, -j},
    ordered by (|j|^2, lex); a seed shuffles within equal-norm shells only."""
    cands = []
    for j in itertools.product(range(-bound, bound + 1), repeat=d):
        if not any(j):
            continue
        first = next(c for c in j if c)
        if first < 0:
            continue
        cands.append(j)
    cands.sort(key=lambda j: (sum(c * c for c in j), j))
    if seed is not None:
        rng = np.random.default_rng(seed)
        out = []
        for _, shell in itertools.groupby(cands, key=lambda j: sum(c * c for c in j)):
            shell = list(shell)
            rng.shuffle(shell)
            out.extend(tuple(map(tuple, shell)))
        cands = out
    return cands


def select_basis(
    d: int, b: int, p: int, bound: int, seed=None, budget: int = 1_000_000
) -> FrequencyBasis:
    """Sweep modes ordered by |j| and return the first fully verified basis.

    Checks (ii) incrementally (cheap), then (i) and (iii) on full candidates.
    Raises BasisSelectionError when the range is exhausted.
    """
    cands = _candidate_modes(d, bound, seed=seed)
    # radicand screen once
    admissible = [j for j in cands if is_square_free(sum(c * c for c in j) + 1)]

    def extend(prefix: list[tuple[int, ...]], start: int):
        if len(prefix) == b:
            basis = FrequencyBasis(d=d, b=b, p=p, modes=tuple(prefix))
            reports = basis.verify(budget=budget)
            if all(r.ok for r in reports.values()):
                return basis
            if reports["iii"].status == "budget_exceeded":
                raise BasisSelectionError(
                    f"condition (iii) budget exceeded on candidate {prefix}"
                )
            return None
        last_s = sum(c * c for c in prefix[-1]) + 1 if prefix else 0
        for i in range(start, len(admissible)):
            j = admissible[i]
            s = sum(c * c for c in j) + 1
            if s <= last_s:
                continue
            # partial (i) prune: dependence among a prefix survives into any
            # completion, so a failing prefix cannot be extended
            trial = prefix + [j]
            if check_condition_i(trial, d).ok:
                found = extend(trial, i + 1)
                if found is not None:
                    return found
        return None

    found = extend([], 0)
    if found is None:
        raise BasisSelectionError(
            f"no verified basis with d={d}, b={b}, p={p} within |j| <= {bound}"
        )
    return found
