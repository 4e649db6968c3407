"""Two-sample t-test and McNemar's test for original-vs-refined comparisons.

The t-test works from sample summaries (mean, sd, n) with pooled variance
by default, reporting the tail probabilities and the 5% critical values.
McNemar's test reduces paired per-item outcomes to discordant counts and a
continuity-corrected z score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

__all__ = [
    "SampleSummary",
    "TTestReport",
    "McNemarReport",
    "t_test_two_sample",
    "mcnemar",
    "paired_outcomes",
    "student_t_sf",
    "student_t_upper_critical",
]


@dataclass(frozen=True)
class SampleSummary:
    """Mean, sample standard deviation (n-1 denominator) and size of one sample."""

    mean: float
    sd: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"sample size must be >= 2, got {self.n}")
        if not (math.isfinite(self.sd) and self.sd >= 0.0):
            raise ValueError(f"standard deviation must be >= 0, got {self.sd}")
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean}")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SampleSummary":
        arr = np.asarray(values, dtype=np.float64)
        return cls(mean=float(arr.mean()), sd=float(arr.std(ddof=1)), n=len(arr))


@dataclass(frozen=True)
class TTestReport:
    t_stat: float
    df: float
    p_one_tail: float
    p_two_tail: float
    t_crit_one: float
    t_crit_two: float


@dataclass(frozen=True)
class McNemarReport:
    b: int  # discordant pairs where the first method was better
    c: int  # discordant pairs where the second method was better
    z: float


def student_t_sf(t: float, df: float) -> float:
    """Upper tail probability P(T >= t) of Student's t with df degrees of freedom.

    Computed through the regularized incomplete beta function.
    """
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    p = 0.5 * float(special.betainc(0.5 * df, 0.5, x))
    return p if t >= 0 else 1.0 - p


def student_t_upper_critical(tail_prob: float, df: float) -> float:
    """The t > 0 with P(T >= t) = tail_prob, found by bisection."""
    if not (0.0 < tail_prob < 0.5):
        raise ValueError(f"tail probability must be in (0, 0.5), got {tail_prob}")
    lo, hi = 0.0, 1.0
    while student_t_sf(hi, df) > tail_prob:
        hi *= 2.0
        if hi > 1e9:
            raise ArithmeticError("critical value bracket expansion failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_sf(mid, df) > tail_prob:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def t_test_two_sample(
    a: SampleSummary,
    b: SampleSummary,
    significance: float = 0.05,
    welch: bool = False,
) -> TTestReport:
    """Unpaired two-sample t-test from summaries (pooled variance by default).

    With both variances zero, equal means give t = 0 and unequal means give
    a signed infinite t with zero p-values.
    """
    var_a, var_b = a.sd**2, b.sd**2
    if welch:
        se_sq = var_a / a.n + var_b / b.n
        if se_sq > 0.0:
            df = se_sq**2 / (
                (var_a / a.n) ** 2 / (a.n - 1) + (var_b / b.n) ** 2 / (b.n - 1)
            )
        else:
            df = float(a.n + b.n - 2)
    else:
        pooled = ((a.n - 1) * var_a + (b.n - 1) * var_b) / (a.n + b.n - 2)
        se_sq = pooled * (1.0 / a.n + 1.0 / b.n)
        df = float(a.n + b.n - 2)

    diff = a.mean - b.mean
    if se_sq == 0.0:
        t = 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    else:
        t = diff / math.sqrt(se_sq)

    p_one = student_t_sf(abs(t), df)
    return TTestReport(
        t_stat=t,
        df=df,
        p_one_tail=p_one,
        p_two_tail=min(1.0, 2.0 * p_one),
        t_crit_one=student_t_upper_critical(significance, df),
        t_crit_two=student_t_upper_critical(significance / 2.0, df),
    )


def mcnemar(b: int, c: int) -> McNemarReport:
    """Continuity-corrected McNemar z score from the discordant-pair counts."""
    if b < 0 or c < 0:
        raise ValueError(f"discordant counts must be >= 0, got b={b}, c={c}")
    if b + c == 0:
        z = 0.0
    else:
        z = max(abs(b - c) - 1, 0) / math.sqrt(b + c)
    return McNemarReport(b=b, c=c, z=z)


def paired_outcomes(
    errors_original: Sequence[float],
    errors_refined: Sequence[float],
    tie_epsilon: float = 0.0,
) -> tuple[int, int]:
    """Reduce paired error lists to McNemar discordant counts (b, c).

    b counts pairs where the original error is smaller by more than
    tie_epsilon, c the reverse; pairs within tie_epsilon count in neither.
    """
    if len(errors_original) != len(errors_refined):
        raise ValueError(
            f"paired lists differ in length: {len(errors_original)} vs {len(errors_refined)}"
        )
    if tie_epsilon < 0:
        raise ValueError(f"tie epsilon must be >= 0, got {tie_epsilon}")
    b = c = 0
    for orig, ref in zip(errors_original, errors_refined):
        if orig < ref - tie_epsilon:
            b += 1
        elif ref < orig - tie_epsilon:
            c += 1
    return b, c
