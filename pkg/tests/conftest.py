import numpy as np
import pytest
from hypothesis import settings

import skewdyn as sd

settings.register_profile("det", derandomize=True, deadline=None)
settings.load_profile("det")


@pytest.fixture(scope="session")
def golden():
    return sd.golden_mean()


@pytest.fixture(scope="session")
def golden_table(golden):
    return sd.divisor_table(golden, 2048)


@pytest.fixture(scope="session")
def cremer_rotation():
    # one huge quotient right after a tiny one: the small divisor at the
    # first denominator collapses immediately, so divergence shows up for
    # indices a desk-scale run can reach
    return sd.RotationNumber.from_quotients([4, 2 ** 400], frac_bits=512)


def random_series_coeffs(rng, n, scale=0.3, const=None):
    v = (rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)) * scale
    if const is not None:
        v[0] = const
    return list(v)


def random_parabolic_germ(rot, n, dw, seed, degree=3, scale=0.3):
    """A seeded degree-`degree` germ with a_0(0) = 0, a_1(0) = 1."""
    rng = np.random.default_rng(seed)
    coeffs = [random_series_coeffs(rng, n, scale, const=0),
              random_series_coeffs(rng, n, scale, const=1)]
    for _ in range(2, degree + 1):
        coeffs.append(random_series_coeffs(rng, n, scale))
    return sd.SkewGerm.from_coeffs(rot, coeffs, n, dw, d=degree)


def rel_defect(series, *scales):
    """Largest coefficient modulus relative to the participating scales."""
    ref = max(1.0, *(2.0 ** s.max_abs_log2() for s in scales)) if scales else 1.0
    return 2.0 ** series.max_abs_log2() / ref
