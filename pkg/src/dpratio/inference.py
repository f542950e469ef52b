"""Ratio inference on released sums.

Point estimates, plug-in moments, delta-method variances on the ratio and
log-ratio scales, Wald intervals under three variance strategies, and the
two-ratio z-test.  Everything here is post-processing of a
:class:`~dpratio.mechanisms.ReleasedSums`, so it consumes no further privacy
budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from statistics import NormalDist

import numpy as np

from .core import Moments, SumVector
from .errors import (
    DegenerateDenominatorError,
    DegenerateNumeratorError,
    DegenerateVarianceError,
    InvalidConfigError,
    ScaleMismatchError,
)
from .mechanisms import ReleasedSums, draw_noise, exact_release

_NORMAL = NormalDist()


class Scale(str, Enum):
    RATIO = "ratio"
    LOG = "log"


class Method(str, Enum):
    PUBLIC = "public"
    NO_CORRECTION = "no_correction"
    MONTE_CARLO = "monte_carlo"
    ANALYTICAL = "analytical"


@dataclass(frozen=True)
class RatioEstimate:
    """A point estimate with variance and Wald interval on one scale."""

    point: float
    variance: float
    scale: Scale
    method: Method
    ci_lower: float
    ci_upper: float
    level: float
    flags: tuple[str, ...] = ()

    @property
    def width(self) -> float:
        return self.ci_upper - self.ci_lower

    def to_json_dict(self) -> dict:
        return {
            "point": self.point,
            "variance": self.variance,
            "scale": self.scale.value,
            "method": self.method.value,
            "ci": [self.ci_lower, self.ci_upper],
            "level": self.level,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class TwoRatioTest:
    """z-test of equality of two independently estimated ratios."""

    difference: float
    variance: float
    z_statistic: float
    p_value: float


def plug_in_moments(released: ReleasedSums) -> Moments:
    """Plug-in means, variances, and covariance of the two weighted means.

    Evaluates the weighted-mean moment formulas with the (noisy) sums.
    Negative variance plug-ins, which noisy sums can produce, are floored at
    zero and flagged; a covariance outside the Cauchy-Schwarz envelope is
    flagged but kept.
    """
    v = released.values
    total_w = v["sum_w"]
    if not total_w > 0.0:
        raise DegenerateDenominatorError(f"noisy sum_w = {total_w} is not positive")
    mu_y = v["sum_wy"] / total_w
    mu_s = v["sum_ws"] / total_w
    kish_inverse = v["sum_w2"] / (total_w * total_w)
    var_s = kish_inverse * (v["sum_ws2"] / total_w - mu_s * mu_s)
    var_y = kish_inverse * (v["sum_wy2"] / total_w - mu_y * mu_y)
    cov = kish_inverse * (v["sum_wys"] / total_w - mu_y * mu_s)
    flags = []
    if var_s < 0.0:
        var_s = 0.0
        flags.append("var_s_bar_floored")
    if var_y < 0.0:
        var_y = 0.0
        flags.append("var_y_bar_floored")
    if cov * cov > var_s * var_y:
        flags.append("cov_outside_cauchy_schwarz")
    return Moments(mu_s, mu_y, var_s, var_y, cov, tuple(flags))


def _variance_on_scale(m: Moments, scale: Scale) -> tuple[float, tuple[str, ...]]:
    if scale is Scale.RATIO:
        if m.mu_y == 0.0:
            raise DegenerateDenominatorError("ratio variance undefined at mu_y == 0")
        mu_y2 = m.mu_y * m.mu_y
        raw = (
            m.var_s_bar / mu_y2
            - 2.0 * m.mu_s * m.cov_ys_bar / (mu_y2 * m.mu_y)
            + m.mu_s * m.mu_s * m.var_y_bar / (mu_y2 * mu_y2)
        )
    else:
        if m.mu_s == 0.0 or m.mu_y == 0.0:
            raise DegenerateDenominatorError("log-ratio variance undefined at zero mean")
        raw = (
            m.var_s_bar / (m.mu_s * m.mu_s)
            - 2.0 * m.cov_ys_bar / (m.mu_s * m.mu_y)
            + m.var_y_bar / (m.mu_y * m.mu_y)
        )
    if raw < 0.0:
        return 0.0, ("variance_floored",)
    return raw, ()


def ratio_variance(m: Moments) -> float:
    """Delta-method variance of the ratio of the two means (floored at 0)."""
    return _variance_on_scale(m, Scale.RATIO)[0]


def log_ratio_variance(m: Moments) -> float:
    """Delta-method variance of the log of the ratio (floored at 0)."""
    return _variance_on_scale(m, Scale.LOG)[0]


def point_estimate(released: ReleasedSums, scale: Scale = Scale.RATIO) -> float:
    """Noisy score sum over noisy label sum, optionally on the log scale."""
    numerator = released.values["sum_ws"]
    denominator = released.values["sum_wy"]
    if not denominator > 0.0:
        raise DegenerateDenominatorError(f"noisy sum_wy = {denominator} is not positive")
    ratio = numerator / denominator
    if scale is Scale.LOG:
        if not numerator > 0.0:
            raise DegenerateNumeratorError(f"noisy sum_ws = {numerator} is not positive")
        return math.log(ratio)
    return ratio


def wald_interval(point: float, variance: float, level: float) -> tuple[float, float]:
    """point +/- z_{(1+level)/2} * sqrt(variance)."""
    if not 0.0 < level < 1.0:
        raise InvalidConfigError(f"level must lie in (0, 1), got {level}")
    if variance < 0.0:
        raise ValueError("variance must be non-negative")
    half = _NORMAL.inv_cdf(0.5 * (1.0 + level)) * math.sqrt(variance)
    return point - half, point + half


def _wald_estimate(
    point: float,
    variance: float,
    scale: Scale,
    method: Method,
    level: float,
    flags: tuple[str, ...],
) -> RatioEstimate:
    lower, upper = wald_interval(point, variance, level)
    return RatioEstimate(
        point=point,
        variance=variance,
        scale=scale,
        method=method,
        ci_lower=lower,
        ci_upper=upper,
        level=level,
        flags=flags,
    )


def ci_no_correction(
    released: ReleasedSums, scale: Scale = Scale.RATIO, level: float = 0.95
) -> RatioEstimate:
    """Wald interval that ignores the noise injected by the release.

    The noisy sums are treated as if they were exact: plug-in moments feed
    the delta-method variance directly.  Expect under-coverage at small
    sample sizes or small budgets.
    """
    point = point_estimate(released, scale)
    moments = plug_in_moments(released)
    variance, var_flags = _variance_on_scale(moments, scale)
    return _wald_estimate(point, variance, scale, Method.NO_CORRECTION, level, moments.flags + var_flags)


def ci_monte_carlo(
    released: ReleasedSums,
    scale: Scale = Scale.RATIO,
    level: float = 0.95,
    draws: int = 200,
    rng: np.random.Generator | None = None,
) -> RatioEstimate:
    """Wald interval with the injected variance estimated by simulation.

    Fresh noise pairs for the score and label sums are drawn at the original
    release variances and stacked on top of the already-noisy sums; the mean
    squared deviation of the re-noised ratios from the point estimate is
    added to the no-correction variance.  Replicates with a non-positive
    denominator (or non-positive ratio on the log scale) are redrawn, up to
    10 * draws rejections.
    """
    if draws < 2:
        raise InvalidConfigError(f"draws must be at least 2, got {draws}")
    if rng is None:
        rng = np.random.default_rng()

    numerator = released.values["sum_ws"]
    denominator = released.values["sum_wy"]
    point = point_estimate(released, scale)
    moments = plug_in_moments(released)
    base_variance, var_flags = _variance_on_scale(moments, scale)
    flags = moments.flags + var_flags

    var_s = released.noise_variance["sum_ws"]
    var_y = released.noise_variance["sum_wy"]
    if var_s == 0.0 and var_y == 0.0:
        extra = 0.0
    else:
        replicates = np.empty(draws)
        filled = 0
        rejected = 0
        cap = 10 * draws
        while filled < draws:
            k = draws - filled
            noisy_num = numerator + draw_noise(rng, released.mechanism, var_s, k)
            noisy_den = denominator + draw_noise(rng, released.mechanism, var_y, k)
            ok = noisy_den > 0.0
            if scale is Scale.LOG:
                ok &= noisy_num > 0.0
            accepted = int(ok.sum())
            rejected += k - accepted
            if rejected > cap:
                raise DegenerateDenominatorError(
                    f"monte carlo resampling exceeded {cap} rejected replicates"
                )
            replicates[filled : filled + accepted] = noisy_num[ok] / noisy_den[ok]
            filled += accepted
        if rejected > 0:
            flags = flags + ("monte_carlo_redraw",)
        if scale is Scale.LOG:
            deviations = np.log(replicates) - point
        else:
            deviations = replicates - point
        extra = float(np.mean(deviations * deviations))

    return _wald_estimate(point, base_variance + extra, scale, Method.MONTE_CARLO, level, flags)


def ci_analytical(
    released: ReleasedSums, scale: Scale = Scale.RATIO, level: float = 0.95
) -> RatioEstimate:
    """Wald interval with the injected variance added in closed form.

    The release noise is independent of the data, so it adds its variance to
    the score-sum and label-sum variance terms and leaves the covariance
    alone.  On the mean scale that correction is the noise variance divided
    by the squared released weight total; the corrected moments then feed
    the usual delta-method variance.  Noise in the remaining released sums
    is not corrected for.
    """
    point = point_estimate(released, scale)
    moments = plug_in_moments(released)
    total_w = released.values["sum_w"]
    w2 = total_w * total_w
    corrected = Moments(
        mu_s=moments.mu_s,
        mu_y=moments.mu_y,
        var_s_bar=moments.var_s_bar + released.noise_variance["sum_ws"] / w2,
        var_y_bar=moments.var_y_bar + released.noise_variance["sum_wy"] / w2,
        cov_ys_bar=moments.cov_ys_bar,
        flags=moments.flags,
    )
    variance, var_flags = _variance_on_scale(corrected, scale)
    return _wald_estimate(point, variance, scale, Method.ANALYTICAL, level, corrected.flags + var_flags)


def public_estimate(
    sums: SumVector, scale: Scale = Scale.RATIO, level: float = 0.95
) -> RatioEstimate:
    """Non-private baseline: the no-correction pipeline on the exact sums."""
    estimate = ci_no_correction(exact_release(sums), scale, level)
    return replace(estimate, method=Method.PUBLIC)


def two_ratio_test(a: RatioEstimate, b: RatioEstimate) -> TwoRatioTest:
    """Two-sided z-test of equality of two independent ratio estimates."""
    if a.scale is not b.scale:
        raise ScaleMismatchError(f"cannot compare {a.scale.value} and {b.scale.value} estimates")
    variance = a.variance + b.variance
    if not variance > 0.0:
        raise DegenerateVarianceError("combined variance must be positive")
    difference = a.point - b.point
    z = difference / math.sqrt(variance)
    p_value = math.erfc(abs(z) / math.sqrt(2.0))
    return TwoRatioTest(difference=difference, variance=variance, z_statistic=z, p_value=p_value)
