"""Truncated power series in z, vertical polynomials in w, and the three
fiber changes that conjugate skew maps over a rigid rotation base.

All coefficients are ScaledComplex so that conjugation chains and
divergence experiments survive arbitrary magnitude growth.  Operations are
exact ring arithmetic modulo z^{N+1} (and w^{D_w+1} for germs) up to
floating rounding; operands with mismatched truncations are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import TruncationMismatchError
from .rotation import RotationNumber, rotation_from_json, rotation_to_json, \
    unit_power
from .scaled import ScaledComplex, as_scaled

_ZERO = ScaledComplex.zero()


def lam_power(rot: RotationNumber, j: int) -> complex:
    """lam^j for any integer j, via the reduced fractional part."""
    if j >= 0:
        return unit_power(rot, j)
    return unit_power(rot, -j).conjugate()


class TruncatedSeries:
    """A power series in z cut at order N (exactly N+1 coefficients)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence):
        self.coeffs = tuple(as_scaled(c) for c in coeffs)
        if not self.coeffs:
            raise ValueError("a truncated series needs at least the constant term")

    # -- constructors ----------------------------------------------------

    @staticmethod
    def zero(n: int) -> "TruncatedSeries":
        return TruncatedSeries([_ZERO] * (n + 1))

    @staticmethod
    def constant(value, n: int) -> "TruncatedSeries":
        c = [as_scaled(value)] + [_ZERO] * n
        return TruncatedSeries(c)

    @staticmethod
    def one(n: int) -> "TruncatedSeries":
        return TruncatedSeries.constant(1.0, n)

    @staticmethod
    def identity(n: int) -> "TruncatedSeries":
        """The series z."""
        c = [_ZERO] * (n + 1)
        if n >= 1:
            c[1] = as_scaled(1.0)
        return TruncatedSeries(c)

    @staticmethod
    def from_list(values: Iterable, n: int) -> "TruncatedSeries":
        vals = [as_scaled(v) for v in values]
        if len(vals) > n + 1:
            raise ValueError("more coefficients than the truncation order allows")
        vals += [_ZERO] * (n + 1 - len(vals))
        return TruncatedSeries(vals)

    # -- basics -----------------------------------------------------------

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, n: int) -> ScaledComplex:
        return self.coeffs[n]

    def constant_term(self) -> ScaledComplex:
        return self.coeffs[0]

    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.coeffs)

    def _check(self, other: "TruncatedSeries") -> None:
        if self.order != other.order:
            raise TruncationMismatchError(
                f"series truncations differ: {self.order} vs {other.order}")

    def with_coeff(self, n: int, value) -> "TruncatedSeries":
        c = list(self.coeffs)
        c[n] = as_scaled(value)
        return TruncatedSeries(c)

    def max_abs_log2(self) -> float:
        return max(c.abs_log2() for c in self.coeffs)

    def to_complex_list(self) -> list[complex]:
        return [c.to_complex() for c in self.coeffs]

    def eval_complex(self, z: complex) -> complex:
        """Horner evaluation in plain double precision."""
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * z + c.to_complex()
        return acc

    def approx_eq(self, other: "TruncatedSeries", rtol: float = 1e-9) -> bool:
        """Coefficientwise equality relative to the larger series magnitude,
        with the absolute floor 2^-1000."""
        self._check(other)
        ref = max(self.max_abs_log2(), other.max_abs_log2())
        if ref == -math.inf:
            return True
        cut = max(ref + math.log2(rtol), -1000.0)
        return all((a - b).abs_log2() <= cut
                   for a, b in zip(self.coeffs, other.coeffs))

    def __repr__(self) -> str:
        vals = ", ".join(f"{c.to_complex():.3g}" if -900 < c.exponent < 900
                         else repr(c) for c in self.coeffs)
        return f"TruncatedSeries([{vals}])"

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries([-c for c in self.coeffs])

    def scale(self, factor) -> "TruncatedSeries":
        f = as_scaled(factor)
        return TruncatedSeries([c * f for c in self.coeffs])

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        n = self.order
        a, b = self.coeffs, other.coeffs
        out = []
        for m in range(n + 1):
            acc = _ZERO
            for i in range(m + 1):
                if a[i].is_zero or b[m - i].is_zero:
                    continue
                acc = acc + a[i] * b[m - i]
            out.append(acc)
        return TruncatedSeries(out)

    def pow(self, e: int) -> "TruncatedSeries":
        if e < 0:
            raise ValueError("negative series powers are not defined here")
        acc = TruncatedSeries.one(self.order)
        base = self
        while e:
            if e & 1:
                acc = acc * base
            base = base * base if e > 1 else base
            e >>= 1
        return acc

    def reciprocal(self) -> "TruncatedSeries":
        """1/self modulo z^{N+1}; needs a nonzero constant term."""
        c0 = self.coeffs[0]
        if c0.is_zero:
            raise ZeroDivisionError("series has vanishing constant term")
        n = self.order
        inv = [ScaledComplex.from_complex(1.0) / c0] + [_ZERO] * n
        for m in range(1, n + 1):
            acc = _ZERO
            for i in range(1, m + 1):
                if self.coeffs[i].is_zero or inv[m - i].is_zero:
                    continue
                acc = acc + self.coeffs[i] * inv[m - i]
            inv[m] = -acc / c0
        return TruncatedSeries(inv)


def series_add(s: TruncatedSeries, t: TruncatedSeries) -> TruncatedSeries:
    return s + t


def series_mul(s: TruncatedSeries, t: TruncatedSeries) -> TruncatedSeries:
    return s * t


def series_pow(s: TruncatedSeries, e: int) -> TruncatedSeries:
    return s.pow(e)


def rotate(s: TruncatedSeries, rot: RotationNumber, power: int) -> TruncatedSeries:
    """Substitute z -> lam^power * z: coefficient n picks up lam^(n*power)."""
    if power == 0:
        return s
    out = []
    for n, c in enumerate(s.coeffs):
        if c.is_zero or n == 0:
            out.append(c)
        else:
            out.append(c * lam_power(rot, n * power))
    return TruncatedSeries(out)


# ---------------------------------------------------------------------------
# Vertical polynomials (lists of series indexed by the w-degree)
# ---------------------------------------------------------------------------

def _wpoly_zero(n: int, dw: int) -> list[TruncatedSeries]:
    return [TruncatedSeries.zero(n) for _ in range(dw + 1)]


def _wpoly_mul(a: Sequence[TruncatedSeries], b: Sequence[TruncatedSeries],
               dw: int) -> list[TruncatedSeries]:
    n = a[0].order
    out = _wpoly_zero(n, dw)
    for i, ai in enumerate(a):
        if i > dw:
            break
        if ai.is_zero():
            continue
        for j, bj in enumerate(b):
            if i + j > dw:
                break
            if bj.is_zero():
                continue
            out[i + j] = out[i + j] + ai * bj
    return out


def _wpoly_compose(outer: Sequence[TruncatedSeries], inner: Sequence[TruncatedSeries],
                   dw: int) -> list[TruncatedSeries]:
    """outer(inner(w)) truncated at w^dw, Horner in w."""
    n = outer[0].order
    acc = _wpoly_zero(n, dw)
    for coeff in reversed(list(outer)):
        acc = _wpoly_mul(acc, inner, dw)
        acc[0] = acc[0] + coeff
    return acc


def reversion_in_w(h: TruncatedSeries, k: int,
                   dw: int) -> list[TruncatedSeries]:
    """Coefficients of the w-inverse of w -> w + h(z) w^{k+1}, up to w^dw.

    Fixed-point iteration r <- y - h r^{k+1}; each pass pins k further
    orders, and the w^{k+1} coefficient of the result is exactly -h.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = h.order
    y = _wpoly_zero(n, dw)
    if dw >= 1:
        y[1] = TruncatedSeries.one(n)
    r = [ts for ts in y]
    steps = max(1, -(-(dw - 1) // k))
    for _ in range(steps):
        p = r
        for _ in range(k):
            p = _wpoly_mul(p, r, dw)
        r = [y[i] - h * p[i] for i in range(dw + 1)]
    return r


# ---------------------------------------------------------------------------
# Skew germs and fiber changes
# ---------------------------------------------------------------------------

class SkewGerm:
    """F(z,w) = (lam z, sum_j a_j(z) w^j) truncated at (z^N, w^D_w).

    `d` records the vertical degree of the original polynomial; entries
    above d hold tail terms created by conjugation.  `radius` is the
    declared validity radius for numeric z-evaluation.
    """

    __slots__ = ("rot", "a", "d", "radius")

    def __init__(self, rot: RotationNumber, a: Sequence[TruncatedSeries],
                 d: int | None = None, radius: float = 0.1):
        self.rot = rot
        self.a = tuple(a)
        if len(self.a) < 2:
            raise ValueError("a germ needs w-degree at least 1")
        n = self.a[0].order
        for s in self.a:
            if s.order != n:
                raise TruncationMismatchError("all vertical coefficients must share N")
        if d is None:
            d = len(self.a) - 1
        if not 1 <= d <= len(self.a) - 1:
            raise ValueError("vertical degree d out of range")
        self.d = d
        self.radius = float(radius)

    @property
    def n_trunc(self) -> int:
        return self.a[0].order

    @property
    def dw(self) -> int:
        return len(self.a) - 1

    @staticmethod
    def from_coeffs(rot: RotationNumber, coeffs: Sequence[Sequence], n: int,
                    dw: int, d: int | None = None, radius: float = 0.1) -> "SkewGerm":
        """coeffs[j] lists the z-coefficients of a_j (padded with zeros)."""
        if len(coeffs) > dw + 1:
            raise ValueError("more vertical coefficients than D_w allows")
        a = [TruncatedSeries.from_list(c, n) for c in coeffs]
        a += [TruncatedSeries.zero(n) for _ in range(dw + 1 - len(a))]
        return SkewGerm(rot, a, d=d if d is not None else max(1, len(coeffs) - 1),
                        radius=radius)

    def fiber_constants(self) -> list[complex]:
        """a_j(0) for all j: the vertical map on the invariant fiber."""
        return [s.constant_term().to_complex() for s in self.a]

    def is_parabolic_fiber(self, tol: float = 1e-12) -> bool:
        c = self.fiber_constants()
        return abs(c[0]) <= tol and abs(c[1] - 1.0) <= tol

    def lam(self) -> complex:
        return lam_power(self.rot, 1)

    def vertical_coeffs_at(self, z: complex) -> list[complex]:
        """[a_0(z), ..., a_Dw(z)] as plain complex numbers."""
        return [s.eval_complex(z) for s in self.a]

    def approx_eq(self, other: "SkewGerm", rtol: float = 1e-9) -> bool:
        """Coefficientwise equality relative to the larger germ magnitude."""
        if self.dw != other.dw or self.n_trunc != other.n_trunc:
            return False
        ref = max(self.max_abs_log2(), other.max_abs_log2())
        if ref == -math.inf:
            return True
        cut = max(ref + math.log2(rtol), -1000.0)
        return all((a - b).abs_log2() <= cut
                   for s, t in zip(self.a, other.a)
                   for a, b in zip(s.coeffs, t.coeffs))

    def max_abs_log2(self) -> float:
        return max(s.max_abs_log2() for s in self.a)

    def __repr__(self) -> str:
        return (f"SkewGerm(d={self.d}, N={self.n_trunc}, D_w={self.dw}, "
                f"theta~{self.rot.theta():.6f})")


@dataclass(frozen=True)
class Shift:
    """(z, w) -> (z, w + phi(z)): straightens an invariant graph."""
    phi: TruncatedSeries


@dataclass(frozen=True)
class Gauge:
    """(z, w) -> (z, w (1 + psi(z))): rescales the linear coefficient."""
    psi: TruncatedSeries

    def __post_init__(self):
        if (as_scaled(1.0) + self.psi.constant_term()).is_zero:
            raise ValueError("gauge factor 1 + psi(0) must not vanish")


@dataclass(frozen=True)
class Bump:
    """(z, w) -> (z, w + h(z) w^{k+1}): pushes z-dependence up one order.

    Constant h (nonzero at z = 0) is allowed: the resonance-elimination
    steps of the parabolic reduction use exactly that shape.
    """
    h: TruncatedSeries
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("bump order k must be at least 1")


@dataclass(frozen=True)
class WScale:
    """(z, w) -> (z, c w) with c != 0."""
    c: complex

    def __post_init__(self):
        if self.c == 0:
            raise ValueError("scale factor must be nonzero")


FiberChange = Shift | Gauge | Bump | WScale


def inverse_change(ch: FiberChange) -> FiberChange:
    """Exact inverse for the invertible kinds (Shift, Gauge, WScale)."""
    if isinstance(ch, Shift):
        return Shift(-ch.phi)
    if isinstance(ch, Gauge):
        one = TruncatedSeries.one(ch.psi.order)
        return Gauge((one + ch.psi).reciprocal() - one)
    if isinstance(ch, WScale):
        return WScale(1.0 / ch.c)
    raise ValueError("bump changes have no exact inverse in this family")


def conjugate(F: SkewGerm, ch: FiberChange) -> SkewGerm:
    """Phi^{-1} o F o Phi truncated to (N, D_w), Phi acting as identity on z."""
    n, dw = F.n_trunc, F.dw
    if isinstance(ch, Shift):
        phi = ch.phi
        if phi.order != n:
            raise TruncationMismatchError("shift series truncation differs from germ")
        inner = _wpoly_zero(n, dw)
        inner[0] = phi
        if dw >= 1:
            inner[1] = TruncatedSeries.one(n)
        new = _wpoly_compose(F.a, inner, dw)
        new[0] = new[0] - rotate(phi, F.rot, 1)
        return SkewGerm(F.rot, new, d=F.d, radius=F.radius)

    if isinstance(ch, Gauge):
        psi = ch.psi
        if psi.order != n:
            raise TruncationMismatchError("gauge series truncation differs from germ")
        one = TruncatedSeries.one(n)
        factor = one + psi
        denom = one + rotate(psi, F.rot, 1)
        if denom.constant_term().is_zero:
            raise ZeroDivisionError("1 + psi(lam z) has vanishing constant term")
        inv_denom = denom.reciprocal()
        new = []
        fp = one  # factor^j, built incrementally
        for j, aj in enumerate(F.a):
            if j > 0:
                fp = fp * factor
            new.append(aj * fp * inv_denom)
        return SkewGerm(F.rot, new, d=F.d, radius=F.radius)

    if isinstance(ch, Bump):
        h, k = ch.h, ch.k
        if h.order != n:
            raise TruncationMismatchError("bump series truncation differs from germ")
        inner = _wpoly_zero(n, dw)
        if dw >= 1:
            inner[1] = TruncatedSeries.one(n)
        if k + 1 <= dw:
            inner[k + 1] = h
        mid = _wpoly_compose(F.a, inner, dw)
        inv = reversion_in_w(rotate(h, F.rot, 1), k, dw)
        new = _wpoly_compose(inv, mid, dw)
        return SkewGerm(F.rot, new, d=F.d, radius=F.radius)

    if isinstance(ch, WScale):
        c = as_scaled(ch.c)
        cinv = as_scaled(1.0) / c
        new = []
        power = cinv  # c^{j-1}
        for j, aj in enumerate(F.a):
            new.append(aj.scale(power))
            power = power * c
        return SkewGerm(F.rot, new, d=F.d, radius=F.radius)

    raise TypeError(f"unknown fiber change {ch!r}")


def retruncate(F: SkewGerm, n: int | None = None,
               dw: int | None = None) -> SkewGerm:
    """Extend or cut the truncation orders; new slots hold zeros."""
    new_n = F.n_trunc if n is None else int(n)
    new_dw = F.dw if dw is None else int(dw)
    if new_n < 0 or new_dw < 1:
        raise ValueError("truncations must satisfy N >= 0, D_w >= 1")

    def fit(s: TruncatedSeries) -> TruncatedSeries:
        if new_n == s.order:
            return s
        if new_n < s.order:
            return TruncatedSeries(s.coeffs[:new_n + 1])
        return TruncatedSeries(list(s.coeffs) + [_ZERO] * (new_n - s.order))

    a = [fit(s) for s in F.a[:new_dw + 1]]
    a += [TruncatedSeries.zero(new_n) for _ in range(new_dw + 1 - len(a))]
    return SkewGerm(F.rot, a, d=min(F.d, new_dw), radius=F.radius)


def residual_invariant_curve(F: SkewGerm, phi: TruncatedSeries) -> TruncatedSeries:
    """sum_j a_j(z) phi(z)^j - phi(lam z), the graph-invariance defect.

    Identically zero through z^N exactly when {w = phi(z)} is invariant to
    that order; used as the independent oracle for the solved curves.
    """
    if phi.order != F.n_trunc:
        raise TruncationMismatchError("curve truncation differs from germ")
    acc = TruncatedSeries.zero(F.n_trunc)
    p = TruncatedSeries.one(F.n_trunc)
    for j, aj in enumerate(F.a):
        if j > 0:
            p = p * phi
        if not aj.is_zero():
            acc = acc + aj * p
    return acc - rotate(phi, F.rot, 1)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _coeff_triple(c: ScaledComplex) -> list:
    return [c.mantissa.real, c.mantissa.imag, c.exponent]


def series_to_triples(s: TruncatedSeries) -> list[list]:
    return [_coeff_triple(c) for c in s.coeffs]


def series_from_triples(triples: Sequence[Sequence], n: int) -> TruncatedSeries:
    coeffs = [ScaledComplex(complex(t[0], t[1]), int(t[2])).normalized()
              for t in triples]
    if len(coeffs) != n + 1:
        raise ValueError(f"expected {n + 1} coefficients, got {len(coeffs)}")
    return TruncatedSeries(coeffs)


def germ_to_json(F: SkewGerm) -> dict:
    return {
        "rotation": rotation_to_json(F.rot),
        "degree": F.d,
        "trunc": {"z": F.n_trunc, "w": F.dw},
        "coeffs": [series_to_triples(s) for s in F.a],
    }


def germ_from_json(obj: dict | str, radius: float = 0.1) -> SkewGerm:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        rot = rotation_from_json(obj["rotation"])
        n = int(obj["trunc"]["z"])
        dw = int(obj["trunc"]["w"])
        d = int(obj["degree"])
        coeffs = obj["coeffs"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed germ JSON: {exc}") from exc
    if len(coeffs) != dw + 1:
        raise ValueError(f"germ JSON needs {dw + 1} vertical coefficients")
    a = [series_from_triples(t, n) for t in coeffs]
    return SkewGerm(rot, a, d=d, radius=radius)
