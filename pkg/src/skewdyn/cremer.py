"""Divergence witnesses for non-Brjuno rotations.

Two coefficient recursions whose growth certifies the absence of an
invariant graph: the linear example phi_n = phi_{n-1}/(lam^n - 1) and a
greedy quadratic construction that keeps every numerator away from zero.
Coefficients live in ScaledComplex; growth exponents are read off the
binary exponents directly, never from materialized magnitudes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .rotation import RotationNumber, unit_minus_one
from .scaled import ScaledComplex, as_scaled

_LN2 = math.log(2.0)


def linear_example_phi(rot: RotationNumber, phi0: complex,
                       m_max: int) -> list[ScaledComplex]:
    """Coefficients of the formal invariant graph of (lam z, w + z + z w).

    phi_1 = (1 + phi_0)/(lam - 1), then phi_n = phi_{n-1}/(lam^n - 1).
    The recursion telescopes to phi_n = (1 + phi_0)/prod_{j<=n}(lam^j - 1),
    which the tests check against the recursion.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    out = [as_scaled(phi0)]
    cur = (as_scaled(1.0) + as_scaled(phi0)) / unit_minus_one(rot, 1)
    out.append(cur)
    for n in range(2, m_max + 1):
        cur = cur / unit_minus_one(rot, n)
        out.append(cur)
    return out


@dataclass(frozen=True)
class GreedyResult:
    """bits[n] is the chosen coefficient a_n, phi[n] the solved coefficient,
    numerator_log2[n] = log2 |a_n + S_n| (the greedy lower-bound witness)."""
    bits: list[int]
    phi: list[ScaledComplex]
    numerator_log2: list[float]


def greedy_quadratic(rot: RotationNumber, m_max: int) -> GreedyResult:
    """Choose a_n in {0,1} keeping |a_n + sum_j phi_j phi_{n-j}| >= 1/2.

    Ties and choices maximize the numerator modulus; exact ties take 0.
    The >= 1/2 bound always has a witness: |S| < 1/2 forces a = 1, and
    |S| >= 1/2 permits a = 0 (asserted every step).
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    one = as_scaled(1.0)
    phi: list[ScaledComplex] = [ScaledComplex.zero()]
    bits: list[int] = [0]   # index 0 unused
    numerator_log2: list[float] = [-math.inf]
    phi.append(one / unit_minus_one(rot, 1))
    bits.append(1)
    numerator_log2.append(0.0)
    for n in range(2, m_max + 1):
        s = ScaledComplex.zero()
        for j in range(1, n):
            if phi[j].is_zero or phi[n - j].is_zero:
                continue
            s = s + phi[j] * phi[n - j]
        with_one = one + s
        m0, m1 = s.abs_log2(), with_one.abs_log2()
        a, num, mag = (0, s, m0) if m0 >= m1 else (1, with_one, m1)
        assert mag >= -1.0, f"greedy bound violated at n={n}: |num| = 2^{mag}"
        bits.append(a)
        numerator_log2.append(mag)
        phi.append(num / unit_minus_one(rot, n))
    return GreedyResult(bits, phi, numerator_log2)


@dataclass(frozen=True)
class GrowthProfile:
    """Per-index magnitudes of a coefficient sequence (natural logs).

    log_mag[m] = ln |phi_m|, exponents[m] = (1/m) ln |phi_m| for m >= 1,
    running_max[m] = max over 1..m of the exponents.
    """
    log_mag: np.ndarray
    exponents: np.ndarray
    running_max: np.ndarray

    @property
    def m_max(self) -> int:
        return len(self.log_mag) - 1


def growth_profile(coeffs: list[ScaledComplex]) -> GrowthProfile:
    if not coeffs:
        raise ValueError("empty coefficient list")
    n = len(coeffs) - 1
    log_mag = np.empty(n + 1)
    for m, c in enumerate(coeffs):
        log_mag[m] = c.exponent * _LN2 + (math.log(abs(c.mantissa))
                                          if not c.is_zero else -math.inf)
    exps = np.full(n + 1, -math.inf)
    if n >= 1:
        exps[1:] = log_mag[1:] / np.arange(1, n + 1)
    running = np.maximum.accumulate(exps)
    return GrowthProfile(log_mag, exps, running)


def write_growth_csv(rot: RotationNumber, coeffs: list[ScaledComplex], path,
                     bits: list[int] | None = None) -> None:
    """Columns: m, a_m, log_phi, exponent, running_max, log_inv_divisor."""
    prof = growth_profile(coeffs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "a_m", "log_phi", "exponent", "running_max",
                    "log_inv_divisor"])
        for m in range(1, prof.m_max + 1):
            div = -unit_minus_one(rot, m).abs_ln()
            w.writerow([m,
                        bits[m] if bits is not None and m < len(bits) else "",
                        repr(float(prof.log_mag[m])),
                        repr(float(prof.exponents[m])),
                        repr(float(prof.running_max[m])),
                        repr(div)])
