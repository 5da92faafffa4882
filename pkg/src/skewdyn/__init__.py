"""skewdyn: small-divisor arithmetic, truncated-series normal forms and
parabolic orbit dynamics for polynomial skew-products over a rotation."""

__version__ = "0.1.0"

from .errors import (DegenerateDivisorError, LinearFiberError, PrecisionError,
                     SkewdynError, TruncationMismatchError)
from .scaled import ScaledComplex, as_scaled
from .rotation import (DivisorTable, RotationNumber, brjuno_partial_sum,
                       cremer_exponent, cremer_running_max, divisor_table,
                       fixed_to_float, frac_multiple, frac_multiples,
                       golden_mean, liouville_quotients, rotation_from_json,
                       rotation_to_json, unit_minus_one, unit_power,
                       write_divisor_csv)
from .series import (Bump, FiberChange, Gauge, Shift, SkewGerm,
                     TruncatedSeries, WScale, conjugate, germ_from_json,
                     germ_to_json, inverse_change, lam_power,
                     residual_invariant_curve, reversion_in_w, rotate,
                     series_add, series_mul, series_pow)
from .normalform import (ChangeLog, NormalForm, compose_series,
                         detect_parabolic_order, linearization_residual,
                         linearize_base, normalize, reduce_parabolic_tail,
                         solve_invariant_curve, solve_linear_gauge,
                         solve_order_bump)
from .cremer import (GreedyResult, GrowthProfile, greedy_quadratic,
                     growth_profile, linear_example_phi, write_growth_csv)
from .petals import (BASIN, ESCAPE, PETAL, UNDECIDED, ConstantVerticalMap,
                     FatouGrid, HypothesisReport, OrbitConfig, OrbitRecord,
                     ParabolicLocal, SampleReport, Verdict,
                     attracting_directions, critical_orbit_check,
                     directions_for_jet, fatou_slice,
                     forward_invariance_check, in_attracting_petal,
                     iterate_orbit, repelling_expansion_check,
                     vertical_derivative_sum)

__all__ = [name for name in dir() if not name.startswith("_")]
