"""Normalization pipeline for skew germs over an irrational rotation.

Four cohomological recursions (base linearization, invariant curve, linear
gauge, order bumps) are chained until the vertical map has z-independent
coefficients up to a requested w-order; a final constant-coefficient
reduction brings the parabolic jet to the shape w - w^{k+1} + b w^{2k+1}.
Every solved series divides by small divisors lam^p - 1, so a degenerate
(rational) rotation aborts the recursion.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .errors import LinearFiberError
from .rotation import RotationNumber, unit_minus_one
from .scaled import ScaledComplex, as_scaled
from .series import (Bump, FiberChange, Gauge, Shift, SkewGerm, TruncatedSeries,
                     WScale, conjugate, lam_power, rotate)

_PRE_TOL = 1e-9       # tolerance for the parabolic-fiber preconditions
JET_ZERO_RTOL = 1e-10  # a constant counts as zero below this fraction of the jet


def _divisor(rot: RotationNumber, p: int) -> ScaledComplex:
    """lam^p - 1 with degeneracy check."""
    return unit_minus_one(rot, p)


def compose_series(outer: TruncatedSeries, inner: TruncatedSeries) -> TruncatedSeries:
    """outer(inner(z)) truncated; inner must have zero constant term."""
    if not inner.constant_term().is_zero:
        raise ValueError("series composition needs inner(0) = 0")
    n = outer.order
    acc = TruncatedSeries.zero(n)
    for c in reversed(outer.coeffs):
        acc = acc * inner
        acc = acc.with_coeff(0, acc[0] + c)
    return acc


def linearize_base(f: TruncatedSeries, rot: RotationNumber) -> TruncatedSeries:
    """Solve sigma(lam z) = f(sigma(z)) with sigma = z + O(z^2).

    Coefficient recursion: sigma_n = [z^n] f(sigma) / (lam^n - lam), the
    divisor taken from the reduced fractional parts of n*theta.
    """
    n = f.order
    lam = lam_power(rot, 1)
    if not f[0].is_zero:
        raise ValueError("base map must fix the origin (f_0 = 0)")
    if abs(f[1].to_complex() - lam) > _PRE_TOL:
        raise ValueError("base map derivative must equal the rotation multiplier")
    sigma = [ScaledComplex.zero()] * (n + 1)
    if n >= 1:
        sigma[1] = as_scaled(1.0)
    lam_sc = as_scaled(lam)
    # powers[m][p] = [z^p] sigma^m, filled order by order; sigma_0 = 0 keeps
    # coefficient p of sigma^m (m >= 2) free of sigma_p, so in-place filling
    # is consistent.
    deg = max((m for m in range(n + 1) if not f[m].is_zero), default=1)
    powers: list[list[ScaledComplex]] = [[ScaledComplex.zero()] * (n + 1)
                                         for _ in range(deg + 1)]
    if deg >= 1:
        powers[1] = sigma
    for p in range(2, n + 1):
        for m in range(2, deg + 1):
            acc = ScaledComplex.zero()
            prev = powers[m - 1]
            for i in range(p + 1):
                if prev[i].is_zero or sigma[p - i].is_zero:
                    continue
                acc = acc + prev[i] * sigma[p - i]
            powers[m][p] = acc
        rhs = ScaledComplex.zero()
        for m in range(2, deg + 1):
            if f[m].is_zero or powers[m][p].is_zero:
                continue
            rhs = rhs + f[m] * powers[m][p]
        sigma[p] = rhs / (lam_sc * _divisor(rot, p - 1))  # lam^p - lam
    return TruncatedSeries(sigma)


def linearization_residual(f: TruncatedSeries, rot: RotationNumber,
                           sigma: TruncatedSeries) -> TruncatedSeries:
    """sigma(lam z) - f(sigma(z)), the defect of the solved conjugacy."""
    return rotate(sigma, rot, 1) - compose_series(f, sigma)


def solve_invariant_curve(F: SkewGerm) -> TruncatedSeries:
    """Solve sum_j a_j(z) phi(z)^j = phi(lam z) with phi(0) = 0.

    Requires the parabolic-fiber normal base point a_0(0) = 0, a_1(0) = 1;
    the root phi_0 = 0 of the constant-term equation is hard-coded.
    """
    cs = F.fiber_constants()
    if abs(cs[0]) > _PRE_TOL or abs(cs[1] - 1.0) > _PRE_TOL:
        raise ValueError("germ must satisfy a_0(0) = 0 and a_1(0) = 1")
    n, dw = F.n_trunc, F.dw
    rot = F.rot
    phi = [ScaledComplex.zero()] * (n + 1)
    powers: list[list[ScaledComplex]] = [[ScaledComplex.zero()] * (n + 1)
                                         for _ in range(dw + 1)]
    if dw >= 1:
        powers[1] = phi
    a = F.a
    for p in range(1, n + 1):
        for m in range(2, dw + 1):
            acc = ScaledComplex.zero()
            prev = powers[m - 1]
            for i in range(p + 1):
                if prev[i].is_zero or phi[p - i].is_zero:
                    continue
                acc = acc + prev[i] * phi[p - i]
            powers[m][p] = acc
        rhs = a[0][p]
        for t in range(1, p + 1):
            if a[1][t].is_zero or phi[p - t].is_zero:
                continue
            rhs = rhs + a[1][t] * phi[p - t]
        for m in range(2, dw + 1):
            for t in range(0, p + 1):
                if a[m][t].is_zero or powers[m][p - t].is_zero:
                    continue
                rhs = rhs + a[m][t] * powers[m][p - t]
        phi[p] = rhs / _divisor(rot, p)
    return TruncatedSeries(phi)


def solve_linear_gauge(F: SkewGerm) -> TruncatedSeries:
    """Solve psi(z)(1 + abar(z)) - psi(lam z) + abar(z) = 0, abar = a_1 - 1.

    After conjugating by the gauge (z, w(1+psi(z))) the linear coefficient
    is identically one through the truncation.
    """
    n = F.n_trunc
    rot = F.rot
    abar = F.a[1] - TruncatedSeries.one(n)
    if abs(abar.constant_term().to_complex()) > _PRE_TOL:
        raise ValueError("gauge step needs a_1(0) = 1")
    psi = [ScaledComplex.zero()] * (n + 1)
    for p in range(1, n + 1):
        rhs = abar[p]
        for m in range(1, p):
            if abar[m].is_zero or psi[p - m].is_zero:
                continue
            rhs = rhs + abar[m] * psi[p - m]
        psi[p] = rhs / _divisor(rot, p)
    return TruncatedSeries(psi)


def solve_order_bump(F: SkewGerm, k: int) -> TruncatedSeries:
    """Solve xi(z) - xi(lam z) + alpha_{k+1}(z) = alpha_{k+1}(0).

    Coefficientwise xi_n = alpha_{k+1,n} / (lam^n - 1), xi_0 = 0; after the
    bump (z, w + xi(z) w^{k+1}) the w^{k+1} coefficient is constant.
    """
    if not 1 <= k < F.dw:
        raise ValueError("bump order must satisfy 1 <= k < D_w")
    n = F.n_trunc
    rot = F.rot
    alpha = F.a[k + 1]
    xi = [ScaledComplex.zero()] * (n + 1)
    for p in range(1, n + 1):
        if alpha[p].is_zero:
            continue
        xi[p] = alpha[p] / _divisor(rot, p)
    return TruncatedSeries(xi)


# ---------------------------------------------------------------------------
# The assembled pipeline
# ---------------------------------------------------------------------------

@dataclass
class ChangeLog:
    """Ordered fiber changes applied by the pipeline, plus the base
    linearization series (identity when the base was already linear)."""
    sigma: TruncatedSeries
    changes: list[FiberChange] = field(default_factory=list)

    def replay(self, F: SkewGerm) -> SkewGerm:
        """Re-apply every change to the original germ."""
        cur = F
        for ch in self.changes:
            cur = conjugate(cur, ch)
        return cur


@dataclass
class NormalForm:
    """Vertical map with constant coefficients through w^{k+h+1}.

    jet[i] is the coefficient of w^{k+1+i}; tail lists the z-dependent
    coefficients from order k+h+2 up to the w-truncation.  After the
    parabolic reduction, `b` carries the coefficient of w^{2k+1}.
    """
    k: int
    h: int
    jet: list[complex]
    tail: list[TruncatedSeries]
    germ: SkewGerm
    original_constants: list[complex]
    stage_residuals: dict[str, float] = field(default_factory=dict)
    b: complex | None = None

    def tail_defect(self) -> float:
        """max |alpha_m(0) - g_{0,m}| over the reported tail orders."""
        worst = 0.0
        base = self.k + self.h + 2
        for i, s in enumerate(self.tail):
            m = base + i
            orig = self.original_constants[m] if m < len(self.original_constants) else 0j
            worst = max(worst, abs(s.constant_term().to_complex() - orig))
        return worst

    def z_dependence_defect(self) -> float:
        """Largest |z^{>=1} coefficient| among the constant-jet orders."""
        worst = -math.inf
        for j in range(0, min(self.k + self.h + 1, self.germ.dw) + 1):
            s = self.germ.a[j]
            for p in range(1, s.order + 1):
                worst = max(worst, s[p].abs_log2())
        return 2.0 ** worst if worst > -math.inf else 0.0


def detect_parabolic_order(F: SkewGerm) -> int:
    """Least k >= 1 with g_{0,k+1} above the zero cliff; LinearFiberError if none."""
    cs = F.fiber_constants()
    mags = [abs(c) for c in cs[2:]]
    if not mags or max(mags) == 0.0:
        raise LinearFiberError("vertical map is the identity on the fiber")
    cliff = JET_ZERO_RTOL * max(mags)
    for j in range(2, len(cs)):
        if abs(cs[j]) > cliff:
            return j - 1
    raise LinearFiberError("vertical map is the identity on the fiber")


def _max_series_mag(s: TruncatedSeries, start: int = 0) -> float:
    m = -math.inf
    for p in range(start, s.order + 1):
        m = max(m, s[p].abs_log2())
    return 2.0 ** m if m > -math.inf else 0.0


def normalize(F: SkewGerm, h_target: int, n: int | None = None,
              dw: int | None = None) -> tuple[NormalForm, ChangeLog]:
    """Run curve -> gauge -> bumps until orders 2..k+h_target+1 are constant.

    The bump loop starts at w^2: when k > 1 the low orders carry z-dependent
    coefficients vanishing at z = 0, and the target form has none.  Optional
    n/dw re-truncate the input germ first.
    """
    if h_target < 0:
        raise ValueError("h_target must be nonnegative")
    if n is not None or dw is not None:
        from .series import retruncate
        F = retruncate(F, n=n, dw=dw)
    cs = F.fiber_constants()
    if abs(cs[0]) > _PRE_TOL or abs(cs[1] - 1.0) > _PRE_TOL:
        raise ValueError("germ must satisfy g_0(0) = 0 and g_0'(0) = 1")
    k = detect_parabolic_order(F)
    top = k + h_target + 1
    if top > F.dw:
        raise ValueError(f"depth h={h_target} needs w-truncation >= {top}, "
                         f"germ has {F.dw}")
    residuals: dict[str, float] = {}
    log = ChangeLog(sigma=TruncatedSeries.identity(F.n_trunc))

    def stage_scale(germ: SkewGerm, *extra: TruncatedSeries) -> float:
        mags = [germ.max_abs_log2()] + [s.max_abs_log2() for s in extra]
        return max(1.0, 2.0 ** max(mags))

    phi = solve_invariant_curve(F)
    log.changes.append(Shift(phi))
    cur = conjugate(F, Shift(phi))
    residuals["curve"] = _max_series_mag(cur.a[0]) / stage_scale(cur, phi)

    psi = solve_linear_gauge(cur)
    log.changes.append(Gauge(psi))
    cur = conjugate(cur, Gauge(psi))
    one = TruncatedSeries.one(F.n_trunc)
    residuals["gauge"] = _max_series_mag(cur.a[1] - one) / stage_scale(cur, psi)

    for order in range(2, top + 1):
        xi = solve_order_bump(cur, order - 1)
        log.changes.append(Bump(xi, order - 1))
        cur = conjugate(cur, Bump(xi, order - 1))
        residuals[f"bump_w{order}"] = (_max_series_mag(cur.a[order], start=1)
                                       / stage_scale(cur, xi))

    jet = [cur.a[j].constant_term().to_complex() for j in range(k + 1, top + 1)]
    tail = [cur.a[m] for m in range(top + 1, F.dw + 1)]
    nf = NormalForm(k=k, h=h_target, jet=jet, tail=tail, germ=cur,
                    original_constants=cs, stage_residuals=residuals)
    return nf, log


def reduce_parabolic_tail(nf: NormalForm, dw: int | None = None,
                          changelog: ChangeLog | None = None) -> NormalForm:
    """Rescale to leading -w^{k+1}, then kill the constant coefficients
    between w^{k+1} and w^{2k+1} with constant bumps; report the residual
    coefficient b of w^{2k+1}.

    Needs depth h >= k so that the jet through w^{2k+1} is constant.  The
    eliminated order m uses the bump power m-k; the division by 2k+1-m is
    nonzero precisely because the resonant order m = 2k+1 is skipped.
    Optional dw cuts the carried w-truncation first.
    """
    k = nf.k
    if nf.h < k:
        raise ValueError(f"reduction needs depth h >= k (h={nf.h}, k={k})")
    g1 = nf.jet[0]
    if g1 == 0:
        raise ValueError("leading jet coefficient vanished")
    cur = nf.germ
    if dw is not None:
        if dw < 2 * k + 1:
            raise ValueError(f"reduction needs D_w >= {2 * k + 1}")
        from .series import retruncate
        cur = retruncate(cur, dw=dw)
    n = cur.n_trunc
    c = cmath.exp(cmath.log(-1.0 / g1) / k)
    changes: list[FiberChange] = [WScale(c)]
    cur = conjugate(cur, WScale(c))
    for m in range(k + 2, 2 * k + 1):
        cm = cur.a[m].constant_term().to_complex()
        q = cm / (2 * k + 1 - m)
        ch = Bump(TruncatedSeries.constant(q, n), m - k - 1)
        changes.append(ch)
        cur = conjugate(cur, ch)
    if changelog is not None:
        changelog.changes.extend(changes)
    b = cur.a[2 * k + 1].constant_term().to_complex() if 2 * k + 1 <= cur.dw else None
    jet = [cur.a[j].constant_term().to_complex()
           for j in range(k + 1, min(2 * k + 1, cur.dw) + 1)]
    tail = [cur.a[m] for m in range(2 * k + 2, cur.dw + 1)]
    residuals = dict(nf.stage_residuals)
    return NormalForm(k=k, h=k, jet=jet, tail=tail, germ=cur,
                      original_constants=cur.fiber_constants(),
                      stage_residuals=residuals, b=b)
