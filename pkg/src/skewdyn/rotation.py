"""Rotation numbers and small-divisor tables.

The rotation angle theta of a unit-circle multiplier lam = e^{2 pi i theta}
is held as a fixed-point binary fraction so that k*theta mod 1 is exact
integer arithmetic up to the seed error.  All small divisors are recovered
from those fractional parts: |lam^p - 1| = 2*|sin(pi*(p*theta mod 1))|.
Computing the fractional part first (in integers) and only then the sine
avoids the catastrophic cancellation of forming lam^p in floating point.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateDivisorError, PrecisionError
from .scaled import ScaledComplex

DEFAULT_FRAC_BITS = 192
# divisor_table converts fractional parts to doubles; below ~2^-960 the
# sine would leave the normal double range, so larger precisions are
# reserved for the ScaledComplex recursions.
MAX_TABLE_FRAC_BITS = 900
MAX_AUTO_FRAC_BITS = 65536

_GUARD = 64


def _fixed_sqrt(r: int, bits: int) -> int:
    """floor(sqrt(r) * 2^bits) by integer square root."""
    return math.isqrt(r << (2 * bits))


def _golden_tail(bits: int) -> int:
    """(1 + sqrt 5)/2 as a fixed-point integer with `bits` fractional bits."""
    return ((1 << bits) + _fixed_sqrt(5, bits)) >> 1


def _value_from_quotients(quotients: Sequence[int], bits: int) -> int:
    """Fixed-point value of [0; a_1, a_2, ...] completed with an all-ones tail.

    The tail makes the value a quadratic irrational, so explicit-quotient
    rotations are irrational by construction; with all quotients equal to 1
    the value is exactly the golden mean.
    """
    g = bits + _GUARD
    v = _golden_tail(g)
    one = 1 << (2 * g)
    for a in reversed(quotients):
        v = (a << g) + one // v
    x = (1 << (bits + g)) // v
    return x


def _quotients_of_fixed(x: int, bits: int, depth: int) -> list[int]:
    """Leading partial quotients of x/2^bits, stopping before precision runs out."""
    out: list[int] = []
    num, den = x, 1 << bits
    # stop once the remainder is too small to trust (last ~GUARD bits)
    floor_trust = 1 << max(0, bits - _GUARD)
    for _ in range(depth):
        if num <= floor_trust:
            break
        a, rem = divmod(den, num)
        out.append(int(a))
        num, den = rem, num
    return out


@dataclass(frozen=True)
class RotationNumber:
    """An irrational rotation angle theta in (0,1), held to fixed precision.

    `numerator` approximates theta * 2^frac_bits with error below one unit
    in the last place, so the k-th fractional multiple carries absolute
    error at most k * 2^-frac_bits.
    """

    kind: str                      # "surd" | "quotients" | "decimal"
    numerator: int
    frac_bits: int
    params: dict = field(default_factory=dict)
    possibly_rational: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.numerator < (1 << self.frac_bits):
            raise ValueError("rotation angle must lie strictly inside (0,1)")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_surd(p: int, q: int, r: int, s: int,
                  frac_bits: int = DEFAULT_FRAC_BITS) -> "RotationNumber":
        """theta = (p + q*sqrt(r))/s reduced modulo 1; r must not be a square."""
        if s == 0:
            raise ValueError("zero denominator in surd")
        if r < 0:
            raise ValueError("negative radicand")
        if math.isqrt(r) ** 2 == r:
            raise ValueError("radicand is a perfect square; rotation would be rational")
        if q == 0:
            raise ValueError("q = 0 gives a rational rotation")
        g = frac_bits + _GUARD
        num = (p << g) + q * _fixed_sqrt(r, g)
        x = (num // s) % (1 << g)
        x >>= _GUARD
        return RotationNumber("surd", x, frac_bits,
                              params={"p": p, "q": q, "r": r, "s": s})

    @staticmethod
    def from_quotients(quotients: Sequence[int],
                       frac_bits: int = DEFAULT_FRAC_BITS) -> "RotationNumber":
        """Continued fraction [0; a_1, a_2, ...] completed with an all-ones tail."""
        qs = [int(a) for a in quotients]
        if not qs or any(a < 1 for a in qs):
            raise ValueError("partial quotients must be positive integers")
        x = _value_from_quotients(qs, frac_bits)
        return RotationNumber("quotients", x, frac_bits,
                              params={"quotients": qs})

    @staticmethod
    def from_decimal(text: str,
                     frac_bits: int = DEFAULT_FRAC_BITS) -> "RotationNumber":
        """Parse '0.ddd...' exactly; the result is flagged possibly rational."""
        t = text.strip()
        if t.startswith("0."):
            digits = t[2:]
        elif t.startswith("."):
            digits = t[1:]
        else:
            raise ValueError(f"decimal rotation must look like '0.ddd', got {text!r}")
        if not digits or not digits.isdigit():
            raise ValueError(f"malformed decimal rotation {text!r}")
        d = int(digits)
        x = (d << frac_bits) // 10 ** len(digits)
        return RotationNumber("decimal", x, frac_bits,
                              params={"decimal": t if t.startswith("0.") else "0." + digits},
                              possibly_rational=True)

    # -- accessors ---------------------------------------------------------

    def partial_quotients(self, depth: int = 32) -> list[int]:
        if self.kind == "quotients":
            return list(self.params["quotients"])[:depth]
        return _quotients_of_fixed(self.numerator, self.frac_bits, depth)

    def convergent_denominators(self, depth: int = 32) -> list[int]:
        """Denominators q_n of the continued-fraction convergents."""
        dens: list[int] = []
        qm2, qm1 = 0, 1
        for a in self.partial_quotients(depth):
            qm2, qm1 = qm1, a * qm1 + qm2
            dens.append(qm1)
        return dens

    def theta(self) -> float:
        return fixed_to_float(self.numerator, self.frac_bits)


def golden_mean(frac_bits: int = DEFAULT_FRAC_BITS) -> RotationNumber:
    """theta = (sqrt 5 - 1)/2, the bounded-type benchmark rotation."""
    return RotationNumber.from_surd(-1, 1, 5, 2, frac_bits)


def fixed_to_float(numerator: int, bits: int) -> float:
    """numerator / 2^bits as a double, safe for any operand width."""
    nb = numerator.bit_length()
    if nb == 0:
        return 0.0
    shift = max(0, nb - 64)
    return math.ldexp(float(numerator >> shift), shift - bits)


# ---------------------------------------------------------------------------
# Fractional multiples and unit-circle values
# ---------------------------------------------------------------------------

def frac_multiples(rot: RotationNumber, k_max: int) -> list[int]:
    """Fixed-point numerators of (k*theta mod 1) for k = 0..k_max.

    Entry k equals k*theta mod 1 within k * 2^-frac_bits.  Rejected when the
    accumulated error could exceed 2^-64.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if rot.frac_bits < 64 or k_max > (1 << (rot.frac_bits - 64)):
        raise PrecisionError(
            f"k_max={k_max} needs more than the {rot.frac_bits} fractional bits available")
    mask = (1 << rot.frac_bits) - 1
    x = rot.numerator
    out = [0] * (k_max + 1)
    acc = 0
    for k in range(1, k_max + 1):
        acc = (acc + x) & mask
        out[k] = acc
    return out


def frac_multiple(rot: RotationNumber, k: int) -> int:
    """Fixed-point numerator of (k*theta mod 1) for a single k >= 0."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return (k * rot.numerator) & ((1 << rot.frac_bits) - 1)


def unit_power(rot: RotationNumber, k: int) -> complex:
    """lam^k = e^{2 pi i k theta} from the reduced fractional part."""
    x = fixed_to_float(frac_multiple(rot, k), rot.frac_bits)
    a = 2.0 * math.pi * x
    return complex(math.cos(a), math.sin(a))


def unit_minus_one(rot: RotationNumber, k: int) -> ScaledComplex:
    """lam^k - 1 as a ScaledComplex, accurate even for tiny divisors.

    Uses the identity e^{2 pi i x} - 1 = 2 i sin(pi x) e^{i pi x}; the sine
    argument is the exact fractional part, reduced into [0, 1/2] by the
    symmetry sin(pi(1-x)) = sin(pi x).
    """
    f = frac_multiple(rot, k)
    if f == 0:
        raise DegenerateDivisorError(f"lam^{k} - 1 vanishes to working precision")
    bits = rot.frac_bits
    half = 1 << (bits - 1)
    red = f if f <= half else (1 << bits) - f
    x_full = fixed_to_float(f, bits)
    phase = complex(math.cos(math.pi * x_full), math.sin(math.pi * x_full))
    nb = red.bit_length()
    exp = nb - 1 - bits  # red/2^bits = mant * 2^exp with mant in [1,2)
    if exp > -900:
        modulus = 2.0 * math.sin(math.pi * fixed_to_float(red, bits))
        return ScaledComplex.from_complex(modulus * 1j * phase)
    # sin(pi x) ~ pi x with relative error below 2^-1800 here
    mant = fixed_to_float(red, nb - 1)
    return ScaledComplex(2.0 * math.pi * mant * 1j * phase, exp).normalized()


# ---------------------------------------------------------------------------
# Divisor tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivisorTable:
    """Small divisors of a rotation up to index m_max.

    d1[p]   = |lam^p - 1|          for 1 <= p <= m_max
    dlam[k] = |lam^k - lam|        for 2 <= k <= m_max
    omega[m] = min(dlam[2..m])     running minimum

    The two families are kept separate on purpose: omega follows the
    lam^k - lam convention, while growth estimates for invariant-curve
    coefficients consume d1 directly.  Unused slots hold NaN.
    `error_bound[j]` bounds the absolute error of any entry whose
    fractional part is j*theta mod 1 (so d1[p] -> j=p, dlam[k] -> j=k-1).
    """

    rot: RotationNumber
    m_max: int
    d1: np.ndarray
    dlam: np.ndarray
    omega: np.ndarray
    error_bound: np.ndarray
    degenerate_indices: tuple[int, ...] = ()

    def omega_d1(self, m: int) -> float:
        """min_{1<=k<=m} |lam^k - 1|, the alternative small-divisor gauge."""
        return float(np.nanmin(self.d1[1:m + 1]))


def divisor_table(rot: RotationNumber, m_max: int,
                  allow_degenerate: bool = False) -> DivisorTable:
    """Tabulate |lam^p - 1|, |lam^k - lam| and the running minimum omega.

    Degenerate entries (fractional part exactly zero, i.e. a rational
    rotation surfacing at this depth) abort the table unless
    `allow_degenerate` is set, in which case they are stored as exact zeros
    and reported in `degenerate_indices`.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    if rot.frac_bits > MAX_TABLE_FRAC_BITS:
        raise PrecisionError(
            f"divisor tables support at most {MAX_TABLE_FRAC_BITS} fractional bits "
            f"(got {rot.frac_bits}); use the ScaledComplex recursions beyond that")
    if rot.frac_bits < 64 or m_max > (1 << (rot.frac_bits - 64)):
        raise PrecisionError(
            f"m_max={m_max} needs more than the {rot.frac_bits} fractional bits available")

    bits = rot.frac_bits
    x = rot.numerator
    mask = (1 << bits) - 1
    half = 1 << (bits - 1)
    scale = 2.0 ** -bits
    sin_, pi_ = math.sin, math.pi

    d1 = np.full(m_max + 1, np.nan)
    degenerate: list[int] = []
    acc = 0
    vals = d1  # local alias for speed
    for p in range(1, m_max + 1):
        acc = (acc + x) & mask
        if acc == 0:
            degenerate.append(p)
            vals[p] = 0.0
            continue
        red = acc if acc <= half else (acc ^ mask) + 1
        vals[p] = 2.0 * sin_(pi_ * (float(red) * scale))

    if degenerate and not allow_degenerate:
        raise DegenerateDivisorError(
            f"rotation is rational to working precision: lam^p = 1 for p in {degenerate[:4]}")

    dlam = np.full(m_max + 1, np.nan)
    dlam[2:] = d1[1:m_max]
    omega = np.full(m_max + 1, np.nan)
    np.minimum.accumulate(dlam[2:], out=omega[2:])

    err = np.arange(m_max + 1, dtype=float) * (2.0 * math.pi * scale) + 8e-16
    return DivisorTable(rot, m_max, d1, dlam, omega, err, tuple(degenerate))


def brjuno_partial_sum(table: DivisorTable, K: int) -> float:
    """sum_{k=0}^{K} 2^-k log(1/omega(2^{k+1})) over the tabulated divisors."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if 2 ** (K + 1) > table.m_max:
        raise ValueError(f"table holds m_max={table.m_max} < 2^{K + 1}")
    total = 0.0
    for k in range(K + 1):
        om = float(table.omega[2 ** (k + 1)])
        if not om > 0.0:
            raise DegenerateDivisorError("omega vanished; partial sum undefined")
        total += math.log(1.0 / om) / 2.0 ** k
    return total


def cremer_exponent(table: DivisorTable, m: int) -> float:
    """(1/m) log(1/omega(m)), the divergence-rate gauge at index m."""
    if not 2 <= m <= table.m_max:
        raise ValueError("m out of table range")
    om = float(table.omega[m])
    if not om > 0.0:
        raise DegenerateDivisorError("omega vanished; exponent undefined")
    return math.log(1.0 / om) / m


def cremer_running_max(table: DivisorTable, m: int) -> float:
    """max over 2..m of the exponent above."""
    if not 2 <= m <= table.m_max:
        raise ValueError("m out of table range")
    om = table.omega[2:m + 1]
    if not np.all(om > 0.0):
        raise DegenerateDivisorError("omega vanished; exponent undefined")
    idx = np.arange(2, m + 1, dtype=float)
    return float(np.max(-np.log(om) / idx))


def liouville_quotients(depth: int, growth: Callable[[int], int],
                        frac_bits: int | None = None,
                        max_frac_bits: int = MAX_AUTO_FRAC_BITS) -> RotationNumber:
    """Rotation with partial quotients a_n = growth(n), n = 1..depth.

    When `frac_bits` is omitted it is sized from the quotients so that every
    divisor table up to the square of the last convergent denominator stays
    resolvable; oversized requests raise PrecisionError.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    qs = []
    for n in range(1, depth + 1):
        a = int(growth(n))
        if a < 1:
            raise ValueError(f"growth({n}) = {a} is not a positive integer")
        qs.append(a)
    if frac_bits is None:
        need = 2 * (sum(a.bit_length() for a in qs) + depth) + 128
        frac_bits = max(DEFAULT_FRAC_BITS, (need + 63) // 64 * 64)
    if frac_bits > max_frac_bits:
        raise PrecisionError(
            f"auto-sized frac_bits={frac_bits} exceeds the ceiling {max_frac_bits}")
    return RotationNumber.from_quotients(qs, frac_bits)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def rotation_to_json(rot: RotationNumber) -> dict:
    out = {"kind": rot.kind, "frac_bits": rot.frac_bits}
    out.update(rot.params)
    return out


def rotation_from_json(obj: dict | str) -> RotationNumber:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("rotation JSON must be an object with a 'kind' field")
    kind = obj["kind"]
    bits = int(obj.get("frac_bits", DEFAULT_FRAC_BITS))
    if kind == "surd":
        return RotationNumber.from_surd(int(obj["p"]), int(obj["q"]),
                                        int(obj["r"]), int(obj["s"]), bits)
    if kind == "quotients":
        return RotationNumber.from_quotients([int(a) for a in obj["quotients"]], bits)
    if kind == "decimal":
        return RotationNumber.from_decimal(str(obj["decimal"]), bits)
    raise ValueError(f"unknown rotation kind {kind!r}")


def write_divisor_csv(table: DivisorTable, path) -> None:
    """Columns: m, dlam, omega, cremer_exponent."""
    om = table.omega
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "dlam", "omega", "cremer_exponent"])
        for m in range(2, table.m_max + 1):
            ce = math.log(1.0 / om[m]) / m if om[m] > 0.0 else math.inf
            w.writerow([m, repr(float(table.dlam[m])), repr(float(om[m])), repr(ce)])
