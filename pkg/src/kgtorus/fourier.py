"""Cosine series on the space-time frequency lattice Z^b x Z^d.

A time quasi-periodic real solution ansatz

    u(t, x) = sum_{(n,j)} uhat(n,j) cos(n.omega t + j.x),   uhat(n,j) = uhat(-n,-j),

is stored by keeping one coefficient per {x, -x} pair: the canonical
representative is the lattice point whose first nonzero coordinate (scanning
the time components then the space components) is positive.  The value stored
at the canonical point equals the symmetric coefficient uhat(x) = uhat(-x), so
the represented function is

    u(theta) = uhat(0) + sum_{x canonical, x != 0} 2 uhat(x) cos(x . theta).

Products of such functions correspond to the symmetrized cosine convolution

    [A * B](x) = 1/2 sum_y [A(x - y) + A(x + y)] B(y)

acting on the even coefficient families; for even families this equals the
ordinary convolution of the full (mirrored) coefficient maps, which is how it
is computed here -- sparsely with exact rational coefficients, or through FFT
on bounding boxes when the supports are large and the coefficients are floats.

Norms are plain l2 sums over the stored canonical representatives (within a
factor sqrt(2) of the full-lattice l2 norm; every contract in this package
that consumes a norm is a ratio or an order-of-magnitude bound, so the
convention only needs to be fixed, not doubled).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .exactfield import QuadFieldElement

__all__ = [
    "CosineSeries",
    "Nonlinearity",
    "Weight",
    "canonical",
    "convolve",
    "power",
    "residual",
    "weighted_norm",
    "sup_decay_exponent",
    "evaluate",
    "pde_residual_on_grid",
]

Point = tuple[int, ...]

PRUNE_DEFAULT = 1e-16

# sparse pairwise convolution is used below this work bound, FFT above
_SPARSE_WORK_LIMIT = 200_000
_DENSE_VOLUME_LIMIT = 80_000_000


def canonical(x: Point) -> tuple[Point, int]:
    """Canonical representative of {x, -x} and the sign flip applied (+1/-1)."""
    for c in x:
        if c > 0:
            return x, 1
        if c < 0:
            return tuple(-v for v in x), -1
    return x, 1


def _neg(x: Point) -> Point:
    return tuple(-v for v in x)


class CosineSeries:
    """Sparse even coefficient family on Z^b x Z^d."""

    __slots__ = ("dims", "coeffs")

    def __init__(self, dims: tuple[int, int], coeffs: Mapping[Point, object] | None = None):
        b, d = dims
        if b < 0 or d < 0 or b + d == 0:
            raise ValueError("dims must be non-negative with b + d >= 1")
        self.dims = (int(b), int(d))
        store: dict[Point, object] = {}
        if coeffs:
            k = b + d
            for x, v in coeffs.items():
                x = tuple(int(c) for c in x)
                if len(x) != k:
                    raise ValueError(f"point {x} has wrong dimension, expected {k}")
                if isinstance(v, float) and v == 0.0:
                    continue
                if isinstance(v, (int, Fraction)) and v == 0:
                    continue
                cx, _ = canonical(x)
                if cx in store:
                    store[cx] = store[cx] + v
                    if not store[cx]:
                        del store[cx]
                else:
                    store[cx] = v
        self.coeffs = store

    # -- constructors --------------------------------------------------------
    @classmethod
    def zero(cls, dims: tuple[int, int]) -> "CosineSeries":
        return cls(dims)

    @classmethod
    def delta(cls, dims: tuple[int, int], value=1) -> "CosineSeries":
        z = (0,) * (dims[0] + dims[1])
        return cls(dims, {z: value})

    @classmethod
    def initial_ansatz(cls, modes: Sequence[Sequence[int]], amplitudes: Sequence) -> "CosineSeries":
        """sum_k a_k cos(-omega_k t + j_k . x): coefficient a_k/2 at (-e_k, j_k)."""
        b = len(modes)
        if b == 0:
            raise ValueError("need at least one mode")
        d = len(modes[0])
        if len(amplitudes) != b:
            raise ValueError("one amplitude per mode")
        coeffs: dict[Point, object] = {}
        for k, (jk, ak) in enumerate(zip(modes, amplitudes)):
            n = [0] * b
            n[k] = -1
            half = Fraction(ak, 2) if isinstance(ak, (int, Fraction)) else ak / 2.0
            coeffs[tuple(n) + tuple(int(j) for j in jk)] = half
        return cls((b, d), coeffs)

    # -- basic views ----------------------------------------------------------
    def __len__(self) -> int:
        return len(self.coeffs)

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def is_exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.coeffs.values())

    def split_point(self, x: Point) -> tuple[Point, Point]:
        b, d = self.dims
        return x[:b], x[b:]

    def full_items(self) -> Iterator[tuple[Point, object]]:
        """Iterate the full even extension (both x and -x for x != 0)."""
        for x, v in self.coeffs.items():
            yield x, v
            if any(x):
                yield _neg(x), v

    def get(self, x: Point):
        """Full-map value at x (0 if absent)."""
        cx, _ = canonical(tuple(int(c) for c in x))
        return self.coeffs.get(cx, 0)

    def support_radius(self) -> int:
        if not self.coeffs:
            return 0
        return max(max(abs(c) for c in x) for x in self.coeffs)

    def max_abs(self) -> float:
        if not self.coeffs:
            return 0.0
        return max(abs(float(v)) for v in self.coeffs.values())

    def norm(self) -> float:
        """l2 over stored canonical representatives."""
        return math.sqrt(sum(float(v) * float(v) for v in self.coeffs.values()))

    # -- arithmetic ------------------------------------------------------------
    def _check_same(self, other: "CosineSeries") -> None:
        if self.dims != other.dims:
            raise ValueError(f"dimension mismatch {self.dims} vs {other.dims}")

    def __add__(self, other: "CosineSeries") -> "CosineSeries":
        self._check_same(other)
        out = dict(self.coeffs)
        for x, v in other.coeffs.items():
            s = out.get(x, 0) + v
            if s:
                out[x] = s
            else:
                out.pop(x, None)
        return CosineSeries._trusted(self.dims, out)

    def __sub__(self, other: "CosineSeries") -> "CosineSeries":
        return self + other.scale(-1)

    def scale(self, c) -> "CosineSeries":
        if not c:
            return CosineSeries(self.dims)
        return CosineSeries._trusted(self.dims, {x: v * c for x, v in self.coeffs.items()})

    def to_float(self) -> "CosineSeries":
        return CosineSeries._trusted(
            self.dims, {x: float(v) for x, v in self.coeffs.items() if float(v) != 0.0}
        )

    def prune(self, threshold: float = PRUNE_DEFAULT) -> "CosineSeries":
        """Drop float coefficients with |v| < threshold.  Exact values are kept."""
        out = {
            x: v
            for x, v in self.coeffs.items()
            if isinstance(v, (int, Fraction)) or abs(v) >= threshold
        }
        return CosineSeries._trusted(self.dims, out)

    @classmethod
    def _trusted(cls, dims, store: dict) -> "CosineSeries":
        s = cls.__new__(cls)
        s.dims = dims
        s.coeffs = store
        return s

    def __eq__(self, other) -> bool:
        if not isinstance(other, CosineSeries):
            return NotImplemented
        return self.dims == other.dims and self.coeffs == other.coeffs

    def __repr__(self) -> str:
        return f"CosineSeries(dims={self.dims}, terms={len(self.coeffs)})"

    # -- serialization -----------------------------------------------------------
    def to_json_obj(self) -> dict:
        rows = []
        b, d = self.dims
        for x in sorted(self.coeffs):
            v = self.coeffs[x]
            if isinstance(v, Fraction):
                val = str(v) if v.denominator != 1 else int(v)
            elif isinstance(v, int):
                val = v
            else:
                val = float(v)
            rows.append([list(x[:b]), list(x[b:]), val])
        return {"dims": [b, d], "coeffs": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CosineSeries":
        b, d = obj["dims"]
        coeffs = {}
        for n, j, val in obj["coeffs"]:
            if isinstance(val, str):
                val = Fraction(val)
            coeffs[tuple(n) + tuple(j)] = val
        return cls((b, d), coeffs)

    @classmethod
    def from_json(cls, s: str) -> "CosineSeries":
        return cls.from_json_obj(json.loads(s))


# ---------------------------------------------------------------------------
# convolution

def _full_map(u: CosineSeries) -> dict[Point, object]:
    return dict(u.full_items())


def _convolve_sparse(a: dict, b: dict, dims) -> dict:
    if len(a) > len(b):
        a, b = b, a
    out: dict[Point, object] = {}
    for xa, va in a.items():
        for xb, vb in b.items():
            x = tuple(p + q for p, q in zip(xa, xb))
            s = out.get(x, 0) + va * vb
            if s:
                out[x] = s
            else:
                out.pop(x, None)
    return out


def _bounds(points: Iterable[Point], k: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    los = [min(x[i] for x in points) for i in range(k)]
    his = [max(x[i] for x in points) for i in range(k)]
    return tuple(los), tuple(his)


def _convolve_fft(a: dict, b: dict, k: int) -> dict:
    lo_a, hi_a = _bounds(a.keys(), k)
    lo_b, hi_b = _bounds(b.keys(), k)
    shape_a = tuple(h - l + 1 for l, h in zip(lo_a, hi_a))
    shape_b = tuple(h - l + 1 for l, h in zip(lo_b, hi_b))
    arr_a = np.zeros(shape_a)
    for x, v in a.items():
        arr_a[tuple(c - l for c, l in zip(x, lo_a))] = float(v)
    arr_b = np.zeros(shape_b)
    for x, v in b.items():
        arr_b[tuple(c - l for c, l in zip(x, lo_b))] = float(v)
    conv = fftconvolve(arr_a, arr_b, mode="full")
    lo = tuple(la + lb for la, lb in zip(lo_a, lo_b))
    # FFT noise floor: anything at or below it is indistinguishable from zero
    noise = 64 * np.finfo(float).eps * np.sum(np.abs(arr_a)) * np.sum(np.abs(arr_b))
    out: dict[Point, object] = {}
    idx = np.argwhere(np.abs(conv) > noise)
    for index in idx:
        x = tuple(int(c) + l for c, l in zip(index, lo))
        out[x] = float(conv[tuple(index)])
    return out


def _full_to_series(full: dict, dims) -> CosineSeries:
    store: dict[Point, object] = {}
    for x, v in full.items():
        cx, _ = canonical(x)
        if cx not in store:
            store[cx] = v
    return CosineSeries._trusted(dims, store)


def convolve(u: CosineSeries, v: CosineSeries) -> CosineSeries:
    """Symmetrized cosine convolution of two even families.

    Computed as the ordinary convolution of the full mirrored maps, which
    agrees with 1/2 sum_y [A(x-y) + A(x+y)] B(y) on even inputs and keeps the
    result even.  Exact when both inputs carry exact coefficients.
    """
    u._check_same(v)
    dims = u.dims
    if not u.coeffs or not v.coeffs:
        return CosineSeries(dims)
    a = _full_map(u)
    b = _full_map(v)
    exact = u.is_exact() and v.is_exact()
    k = dims[0] + dims[1]
    if not exact and len(a) * len(b) > _SPARSE_WORK_LIMIT:
        lo_a, hi_a = _bounds(a.keys(), k)
        lo_b, hi_b = _bounds(b.keys(), k)
        volume = 1
        for la, ha, lb, hb in zip(lo_a, hi_a, lo_b, hi_b):
            volume *= (ha - la) + (hb - lb) + 1
        if volume <= _DENSE_VOLUME_LIMIT:
            return _full_to_series(_convolve_fft(a, b, k), dims)
    return _full_to_series(_convolve_sparse(a, b, dims), dims)


def power(u: CosineSeries, m: int) -> CosineSeries:
    """m-fold convolution power (Fourier coefficients of u^m)."""
    if m < 0:
        raise ValueError("power expects m >= 0")
    if m == 0:
        return CosineSeries.delta(u.dims)
    out = u
    for _ in range(m - 1):
        out = convolve(out, u)
    return out


def _power_floored(u: CosineSeries, m: int, floor: float) -> tuple[CosineSeries, float]:
    """power(u, m) with intermediate stages pruned at `floor`.

    Dropping tiny intermediate entries keeps the pairwise convolution work
    bounded when supp(u) is wide but most mass sits on a few sites.  Returns
    the (unpruned) final stage and the total l1 coefficient mass dropped from
    intermediates; each dropped unit perturbs any output entry by at most
    max|u| times that mass.
    """
    if m < 0:
        raise ValueError("power expects m >= 0")
    if m == 0:
        return CosineSeries.delta(u.dims), 0.0
    out = u
    dropped = 0.0
    for _ in range(m - 1):
        if floor > 0.0:
            kept: dict[Point, object] = {}
            for x, v in out.coeffs.items():
                if abs(float(v)) >= floor:
                    kept[x] = v
                else:
                    dropped += abs(float(v))
            out = CosineSeries._trusted(out.dims, kept)
        out = convolve(out, u)
    return out, dropped


# ---------------------------------------------------------------------------
# nonlinearity and residual

@dataclass(frozen=True)
class Nonlinearity:
    """u^{p+1} plus optional higher corrections sum_m alpha_m(x) u^m, m >= p+2.

    Each higher term's coefficient series alpha_hat must be supported on the
    space frequencies only (time component zero).
    """

    p: int
    higher_terms: tuple[tuple[int, CosineSeries], ...] = ()

    def __post_init__(self):
        if self.p < 2 or self.p % 2:
            raise ValueError("p must be an even integer >= 2")
        for m, alpha in self.higher_terms:
            if m < self.p + 2:
                raise ValueError(f"higher term power {m} must be >= p + 2 = {self.p + 2}")
            b, d = alpha.dims
            for x in alpha.coeffs:
                if any(x[:b]):
                    raise ValueError("alpha coefficients must have zero time frequency")

    def nonlinear_coefficients(self, u: CosineSeries) -> CosineSeries:
        """Fourier coefficients of u^{p+1} + sum_m alpha_m u^m."""
        out = power(u, self.p + 1)
        for m, alpha in self.higher_terms:
            out = out + convolve(alpha, power(u, m))
        return out

    def nonlinear_coefficients_floored(
        self, u: CosineSeries, floor: float
    ) -> tuple[CosineSeries, float]:
        """Like nonlinear_coefficients, but intermediate convolution stages drop
        entries below `floor`; returns the result and the dropped l1 mass."""
        out, dropped = _power_floored(u, self.p + 1, floor)
        for m, alpha in self.higher_terms:
            pw, dr = _power_floored(u, m, floor)
            out = out + convolve(alpha, pw)
            dropped += dr
        return out, dropped

    def kernel(self, u: CosineSeries) -> CosineSeries:
        """Linearization kernel: (p+1) u^{*p} + sum_m m alpha_m * u^{*(m-1)}."""
        out = power(u, self.p).scale(self.p + 1)
        for m, alpha in self.higher_terms:
            out = out + convolve(alpha, power(u, m - 1)).scale(m)
        return out


def _diag_value_float(x: Point, b: int, omega: np.ndarray, theta: float = 0.0) -> float:
    n = x[:b]
    j = x[b:]
    nw = float(np.dot(n, omega))
    return -((nw + theta) ** 2) + sum(c * c for c in j) + 1.0


def _diag_value_exact(x: Point, b: int, omega: Sequence[QuadFieldElement]) -> QuadFieldElement:
    e = QuadFieldElement.zero()
    for nk, wk in zip(x[:b], omega):
        if nk:
            e = e + wk * nk
    jj = sum(c * c for c in x[b:])
    return QuadFieldElement.rational(jj + 1) - e * e


def diagonal_apply(u: CosineSeries, omega, theta: float = 0.0) -> CosineSeries:
    """Coefficients of [-(n.omega + theta)^2 + |j|^2 + 1] uhat.

    omega may be a float vector or a vector of exact field elements; with the
    exact form the diagonal factor is evaluated in the field and rounded once,
    so divisors that vanish identically contribute exactly 0 (theta must then
    be 0, since a float shift would spoil the exact cancellation).
    """
    b, d = u.dims
    exact_omega = len(omega) > 0 and isinstance(omega[0], QuadFieldElement)
    out: dict[Point, object] = {}
    if exact_omega:
        if theta:
            raise ValueError("exact omega requires theta == 0")
        for x, v in u.coeffs.items():
            dv = _diag_value_exact(x, b, omega)
            if dv.is_zero():
                continue
            if dv.is_rational() and isinstance(v, (int, Fraction)):
                val = v * dv.rational_value()
            else:
                val = float(v) * dv.to_float()
            if val:
                out[x] = val
    else:
        om = np.asarray(omega, dtype=float)
        for x, v in u.coeffs.items():
            dv = _diag_value_float(x, b, om, theta)
            val = float(v) * dv
            if val:
                out[x] = val
    return CosineSeries._trusted(u.dims, out)


def residual(u: CosineSeries, omega, nl: Nonlinearity) -> CosineSeries:
    """F(u) = [-(n.omega)^2 + |j|^2 + 1] uhat + coefficients of the nonlinearity.

    omega may be a float vector or a vector of exact field elements; see
    diagonal_apply for the exact-omega contract.
    """
    return diagonal_apply(u, omega) + nl.nonlinear_coefficients(u)


# ---------------------------------------------------------------------------
# weights, norms, decay

@dataclass(frozen=True)
class Weight:
    """rho(x) = exp(beta |log delta| |x|_inf) outside the core |x|_inf <= 1/beta^2."""

    beta: float
    delta: float

    def __post_init__(self):
        if not (0 < self.beta < 1):
            raise ValueError("beta must lie in (0, 1)")
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")

    def rho(self, x: Point) -> float:
        r = max(abs(c) for c in x) if x else 0
        if r <= 1.0 / (self.beta * self.beta):
            return 1.0
        return math.exp(self.beta * abs(math.log(self.delta)) * r)


def weighted_norm(u: CosineSeries, w: Weight) -> float:
    s = 0.0
    for x, v in u.coeffs.items():
        t = w.rho(x) * float(v)
        s += t * t
    return math.sqrt(s)


def sup_decay_exponent(u: CosineSeries) -> float:
    """Largest c with |uhat(x)| <= exp(-|x|^c) over stored points with |x| > 1.

    Returns inf when no point qualifies, 0.0 when some qualifying coefficient
    is >= 1 (no stretched-exponential decay at all).
    """
    best = math.inf
    for x, v in u.coeffs.items():
        r = max(abs(c) for c in x)
        if r <= 1:
            continue
        av = abs(float(v))
        if av == 0.0:
            continue
        if av >= 1.0:
            return 0.0
        c = math.log(-math.log(av)) / math.log(r)
        best = min(best, c)
    return best


# ---------------------------------------------------------------------------
# reconstruction on the torus

def evaluate(u: CosineSeries, omega, t, xs) -> float:
    """Value of u at time t and spatial point xs (length-d sequence)."""
    b, d = u.dims
    om = np.asarray(
        [w.to_float() if isinstance(w, QuadFieldElement) else float(w) for w in omega]
    )
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    total = 0.0
    for x, v in u.coeffs.items():
        n = x[:b]
        j = x[b:]
        phase = float(np.dot(n, om)) * t + float(np.dot(j, xs))
        mult = 2.0 if any(x) else 1.0
        total += mult * float(v) * math.cos(phase)
    return total


def pde_residual_on_grid(
    u: CosineSeries,
    omega,
    nl: Nonlinearity,
    t_grid: Sequence[float],
    x_grid: Sequence[Sequence[float]] | Sequence[float],
) -> float:
    """Max over the grid of |d_tt u - Lap u + u + u^{p+1} + sum alpha_m u^m|.

    The derivatives are applied spectrally (coefficient multipliers), the
    nonlinearity pointwise, so the result measures how well the reconstructed
    function solves the equation rather than echoing the lattice residual.
    """
    b, d = u.dims
    om = np.asarray(
        [w.to_float() if isinstance(w, QuadFieldElement) else float(w) for w in omega]
    )
    pts = [np.atleast_1d(np.asarray(x, dtype=float)) for x in x_grid]
    worst = 0.0
    for t in t_grid:
        for xv in pts:
            lin = 0.0
            uval = 0.0
            for x, v in u.coeffs.items():
                n, j = x[:b], x[b:]
                phase = float(np.dot(n, om)) * t + float(np.dot(j, xv))
                mult = 2.0 if any(x) else 1.0
                c = mult * float(v) * math.cos(phase)
                uval += c
                lin += (-float(np.dot(n, om)) ** 2 + sum(q * q for q in j) + 1.0) * c
            val = lin + uval ** (nl.p + 1)
            for m, alpha in nl.higher_terms:
                aval = 0.0
                for x, v in alpha.coeffs.items():
                    j = x[b:]
                    multa = 2.0 if any(x) else 1.0
                    aval += multa * float(v) * math.cos(float(np.dot(j, xv)))
                val += aval * uval**m
            worst = max(worst, abs(val))
    return worst
