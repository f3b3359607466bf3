"""Paired one-sided significance testing with a self-contained Student-t CDF.

The CDF is evaluated through the regularized incomplete beta function
(continued fraction, modified Lentz iteration) rather than a lookup table,
so p-values are testable against an independent statistical oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MAX_ITER = 300
_EPS = 3e-16
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued-fraction kernel of the incomplete beta function."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise RuntimeError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0, 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs positive shape parameters")
    if x < 0 or x > 1:
        raise ValueError("betainc needs x in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """P(T <= t) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    reject: bool
    alpha: float
    df: int


def paired_ttest(
    a, b, *, alternative: str = "less", alpha: float = 0.05
) -> TTestResult:
    """One-sided paired t-test on per-seed metric lists.

    ``alternative='less'`` tests whether method ``a`` scores lower than ``b``
    (the right direction for error rates); ``'greater'`` tests the opposite.
    Pairing is positional (same seed at the same index). Zero-variance
    differences leave the statistic undefined and raise a ValueError naming
    the condition.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError("paired test needs two equally long 1-d metric lists")
    n = a.shape[0]
    if n < 2:
        raise ValueError("paired test needs at least 2 pairs")
    if alternative not in ("less", "greater"):
        raise ValueError("alternative must be 'less' or 'greater'")

    diffs = a - b
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        raise ValueError(
            "zero-variance differences: every pair differs by the same amount, "
            "so the paired t statistic is undefined"
        )
    statistic = float(diffs.mean() / (sd / math.sqrt(n)))
    cdf = t_cdf(statistic, n - 1)
    p_value = cdf if alternative == "less" else 1.0 - cdf
    return TTestResult(
        statistic=statistic,
        p_value=p_value,
        reject=bool(p_value < alpha),
        alpha=alpha,
        df=n - 1,
    )
