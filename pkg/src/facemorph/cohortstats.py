"""Two-cohort comparison of facial features: t-tests, boxplots, mean faces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .morphometrics import FEATURE_LABELS, FEATURE_NAMES, FeatureVector
from .shaperegress import LandmarkSet, mean_shape

# continued-fraction settings for the incomplete beta function
_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0:
        return 1.0
    if math.isinf(t):
        return 0.0
    t2 = t * t
    # pick the argument form that avoids cancellation
    if t2 < df:
        return 1.0 - betainc(0.5, 0.5 * df, t2 / (df + t2))
    return betainc(0.5 * df, 0.5, df / (df + t2))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float


def _mean_var(x: np.ndarray) -> tuple[float, float]:
    m = math.fsum(x) / len(x)
    v = math.fsum((xi - m) ** 2 for xi in x) / (len(x) - 1)
    return m, v


def welch_t_test(a: Sequence[float], b: Sequence[float], equal_var: bool = False) -> TTestResult:
    """Unpaired two-sample t-test, Welch by default, Student with ``equal_var``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) < 2 or len(b) < 2:
        raise ValueError("insufficient sample")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    na, nb = len(a), len(b)
    if va == 0 and vb == 0:
        raise ValueError("zero variance")
    if equal_var:
        df = na + nb - 2.0
        sp = ((na - 1) * va + (nb - 1) * vb) / df
        se = math.sqrt(sp * (1.0 / na + 1.0 / nb))
    else:
        qa, qb = va / na, vb / nb
        se = math.sqrt(qa + qb)
        df = (qa + qb) ** 2 / (qa * qa / (na - 1) + qb * qb / (nb - 1))
    t = (ma - mb) / se
    if ma == mb:
        t = 0.0
    return TTestResult(t, df, t_two_sided_p(t, df))


@dataclass(frozen=True)
class BoxplotSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def _quantile(sorted_x: np.ndarray, q: float) -> float:
    # linear interpolation between order statistics at position q*(n-1)
    pos = q * (len(sorted_x) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_x) - 1)
    frac = pos - lo
    return float(sorted_x[lo] + (sorted_x[hi] - sorted_x[lo]) * frac)


def boxplot_summary(x: Sequence[float], whis: float = 1.5) -> BoxplotSummary:
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    if len(x) == 0:
        raise ValueError("empty sample")
    q1, med, q3 = (_quantile(x, q) for q in (0.25, 0.5, 0.75))
    lo_fence = q1 - whis * (q3 - q1)
    hi_fence = q3 + whis * (q3 - q1)
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)])
    return BoxplotSummary(float(x[0]), q1, med, q3, float(x[-1]),
                          float(inside[0]), float(inside[-1]), outliers)


@dataclass
class Cohort:
    label: str
    features: list[FeatureVector]
    shapes: list[LandmarkSet] | None = None

    def __post_init__(self):
        arr = self.matrix()
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError(f"cohort {self.label!r} has non-finite features")

    def matrix(self) -> np.ndarray:
        if not self.features:
            return np.zeros((0, len(FEATURE_NAMES)))
        return np.stack([f.as_array() for f in self.features])


@dataclass
class FeatureComparison:
    name: str
    label: str
    mean_a: float
    sd_a: float
    mean_b: float
    sd_b: float
    box_a: BoxplotSummary | None
    box_b: BoxplotSummary | None
    test: TTestResult | None
    error: str | None = None


@dataclass
class CohortReport:
    label_a: str
    label_b: str
    n_a: int
    n_b: int
    rows: list[FeatureComparison]
    mean_face_a: LandmarkSet | None = None
    mean_face_b: LandmarkSet | None = None
    equal_var: bool = False

    def p_values(self) -> dict[str, float | None]:
        return {r.name: (r.test.p if r.test else None) for r in self.rows}


def _describe(x: np.ndarray) -> tuple[float, float]:
    if len(x) == 0:
        return math.nan, math.nan
    m = math.fsum(x) / len(x)
    sd = math.sqrt(math.fsum((v - m) ** 2 for v in x) / (len(x) - 1)) if len(x) > 1 else math.nan
    return m, sd


def compare_cohorts(a: Cohort, b: Cohort, equal_var: bool = False) -> CohortReport:
    """Per-feature t-tests and boxplots in table order, plus mean faces.

    A feature that cannot be tested keeps its row with ``error`` set.
    """
    xa, xb = a.matrix(), b.matrix()
    rows = []
    for j, (name, label) in enumerate(zip(FEATURE_NAMES, FEATURE_LABELS)):
        ca, cb = xa[:, j], xb[:, j]
        ma, sa = _describe(ca)
        mb, sb = _describe(cb)
        box_a = boxplot_summary(ca) if len(ca) else None
        box_b = boxplot_summary(cb) if len(cb) else None
        try:
            test, err = welch_t_test(ca, cb, equal_var=equal_var), None
        except ValueError as exc:
            test, err = None, str(exc)
        rows.append(FeatureComparison(name, label, ma, sa, mb, sb, box_a, box_b, test, err))
    mfa = mean_shape(a.shapes) if a.shapes else None
    mfb = mean_shape(b.shapes) if b.shapes else None
    return CohortReport(a.label, b.label, len(xa), len(xb), rows, mfa, mfb, equal_var)
