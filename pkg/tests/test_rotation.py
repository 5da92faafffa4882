import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import skewdyn as sd
from skewdyn.errors import DegenerateDivisorError, PrecisionError

GOLDEN_THETA = 0.61803398874989484820458683436563811772
GOLDEN_2THETA_FRAC = 0.23606797749978969640917366873127623544
GOLDEN_OMEGA2 = 1.8640648476264552430680633373822093828  # 2 sin(pi theta)


def test_golden_theta():
    rot = sd.golden_mean()
    assert abs(rot.theta() - GOLDEN_THETA) < 1e-15
    assert rot.partial_quotients(10) == [1] * 10


def test_frac_multiples_basics(golden):
    fm = sd.frac_multiples(golden, 4)
    assert fm[0] == 0
    vals = [sd.fixed_to_float(f, golden.frac_bits) for f in fm]
    assert abs(vals[1] - GOLDEN_THETA) < 1e-15
    assert abs(vals[2] - GOLDEN_2THETA_FRAC) < 1e-15
    # cross-check against 2*theta - 1
    assert abs(vals[2] - (2 * vals[1] - 1)) < 1e-15
    assert all(0.0 <= v < 1.0 for v in vals)


def test_frac_multiples_precision_rejection():
    rot = sd.RotationNumber.from_surd(-1, 1, 5, 2, frac_bits=96)
    with pytest.raises(PrecisionError):
        sd.frac_multiples(rot, 2 ** 33)


def test_divisor_table_golden(golden, golden_table):
    t = golden_table
    assert abs(t.dlam[2] - GOLDEN_OMEGA2) < 1e-14
    assert abs(t.omega[2] - GOLDEN_OMEGA2) < 1e-14
    om = t.omega[2:]
    assert np.all(np.diff(om) <= 0)
    assert np.all(om > 0) and np.all(om <= 2)
    # dlam[k] and d1[k-1] describe the same unit-circle distance
    assert np.allclose(t.dlam[2:], t.d1[1:t.m_max], rtol=0, atol=0)
    # omega_d1 is the alternative gauge; for golden both stay comparable
    assert 0 < t.omega_d1(100) <= t.omega[100] * 2


def test_divisor_table_rational_degenerate():
    rot = sd.RotationNumber.from_decimal("0.5")
    assert rot.possibly_rational
    with pytest.raises(DegenerateDivisorError):
        sd.divisor_table(rot, 4)
    t = sd.divisor_table(rot, 2, allow_degenerate=True)
    # |lam^2 - lam| = |1 - (-1)| = 2 at theta = 1/2
    assert t.dlam[2] == pytest.approx(2.0, abs=1e-15)
    assert t.omega[2] == pytest.approx(2.0, abs=1e-15)
    assert t.d1[2] == 0.0 and 2 in t.degenerate_indices


def test_divisor_table_deterministic(golden):
    a = sd.divisor_table(golden, 500)
    b = sd.divisor_table(golden, 500)
    assert np.array_equal(a.dlam[2:], b.dlam[2:])
    assert np.array_equal(a.omega[2:], b.omega[2:])


def test_unit_circle_consistency(golden):
    # fixed-point sine route vs repeated unit-complex multiplication
    lam = sd.unit_power(golden, 1)
    acc = 1 + 0j
    for k in range(1, 1001):
        acc *= lam
        via_sine = 2.0 * abs(math.sin(math.pi * sd.fixed_to_float(
            sd.frac_multiple(golden, k), golden.frac_bits)))
        assert abs(via_sine - abs(acc - 1)) <= 1e-10 + k * 1e-15


def test_unit_minus_one_matches_table(golden, golden_table):
    for k in (1, 2, 5, 55, 1000):
        sc = sd.unit_minus_one(golden, k)
        assert 2.0 ** sc.abs_log2() == pytest.approx(golden_table.d1[k], rel=1e-12)


def test_unit_minus_one_tiny_divisor_scaled_path():
    rot = sd.RotationNumber.from_quotients([2 ** 1200], frac_bits=2048)
    sc = sd.unit_minus_one(rot, 1)
    # theta ~ 2^-1200 + O(2^-2400): |lam - 1| ~ 2 pi theta
    assert sc.abs_ln() == pytest.approx(math.log(2 * math.pi) - 1200 * math.log(2),
                                        rel=1e-6)


def test_brjuno_partial_sum_synthetic(golden):
    t = sd.divisor_table(golden, 256)
    flat = sd.DivisorTable(golden, 256, t.d1, t.dlam,
                           np.full(257, 2.0), t.error_bound)
    for K in (0, 3, 6):
        expect = sum(2.0 ** -k for k in range(K + 1)) * math.log(0.5)
        assert sd.brjuno_partial_sum(flat, K) == pytest.approx(expect, rel=1e-14)
        assert expect < 0


def test_brjuno_partial_sum_golden_finite(golden_table):
    v = sd.brjuno_partial_sum(golden_table, 6)
    assert math.isfinite(v)
    with pytest.raises(ValueError):
        sd.brjuno_partial_sum(golden_table, 11)  # 2^12 > 2048


def test_brjuno_nondecreasing_when_small_omegas(golden):
    t = sd.divisor_table(golden, 256)
    om = np.minimum(t.omega, 0.9)
    small = sd.DivisorTable(golden, 256, t.d1, t.dlam, om, t.error_bound)
    sums = [sd.brjuno_partial_sum(small, K) for K in range(7)]
    assert all(b >= a for a, b in zip(sums, sums[1:]))


def test_cremer_exponent(golden_table):
    flat = sd.DivisorTable(golden_table.rot, 64, golden_table.d1,
                           golden_table.dlam, np.ones(65),
                           golden_table.error_bound)
    assert sd.cremer_exponent(flat, 17) == 0.0
    m = sd.cremer_running_max(golden_table, 2048)
    assert 0 < m < 2  # bounded-type rotation


def test_cremer_running_max_golden_10k(golden):
    t = sd.divisor_table(golden, 10 ** 4)
    assert sd.cremer_running_max(t, 10 ** 4) < 2


def test_liouville_quotients_all_ones_is_golden(golden):
    rot = sd.liouville_quotients(12, lambda n: 1, frac_bits=192)
    assert rot.numerator == golden.numerator


def test_liouville_quotients_doubly_exponential():
    rot = sd.liouville_quotients(6, lambda n: 2 ** (2 ** n), frac_bits=512)
    assert rot.partial_quotients(6) == [2 ** (2 ** n) for n in range(1, 7)]
    t = sd.divisor_table(rot, 600)
    assert math.isfinite(sd.cremer_running_max(t, 500))


def test_liouville_quotients_linear_growth_finite_sums():
    rot = sd.liouville_quotients(10, lambda n: n)
    t = sd.divisor_table(rot, 2 ** 7)
    for K in range(7):
        assert math.isfinite(sd.brjuno_partial_sum(t, K))


def test_liouville_quotients_validation():
    with pytest.raises(ValueError):
        sd.liouville_quotients(3, lambda n: 0)
    with pytest.raises(PrecisionError):
        sd.liouville_quotients(4, lambda n: 2 ** (10 ** 5), max_frac_bits=4096)


def test_convergent_denominators(cremer_rotation):
    dens = cremer_rotation.convergent_denominators(2)
    assert dens[0] == 4 and dens[1] == 4 * 2 ** 400 + 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=50), min_size=1, max_size=8))
def test_omega_monotone_for_random_quotients(quots):
    rot = sd.RotationNumber.from_quotients(quots)
    t = sd.divisor_table(rot, 128)
    om = t.omega[2:]
    assert np.all(np.diff(om) <= 0)
    assert np.all(om > 0)


def test_rotation_json_round_trip(golden):
    j = sd.rotation_to_json(golden)
    back = sd.rotation_from_json(j)
    assert back.numerator == golden.numerator
    rot = sd.RotationNumber.from_quotients([3, 1, 4, 1, 5])
    assert sd.rotation_from_json(sd.rotation_to_json(rot)).numerator == rot.numerator
    dec = sd.RotationNumber.from_decimal("0.1234567890123456789")
    assert sd.rotation_from_json(sd.rotation_to_json(dec)).numerator == dec.numerator
    with pytest.raises(ValueError):
        sd.rotation_from_json({"kind": "nope"})


def test_divisor_csv(tmp_path, golden):
    t = sd.divisor_table(golden, 64)
    path = tmp_path / "d.csv"
    sd.write_divisor_csv(t, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "m,dlam,omega,cremer_exponent"
    assert len(lines) == 64  # header + m = 2..64
    om = [float(line.split(",")[2]) for line in lines[1:]]
    assert all(b <= a for a, b in zip(om, om[1:]))
