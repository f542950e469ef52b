"""Noise calibration and privatized release of summary sums.

The Gaussian mechanism provides (epsilon, delta)-DP, the Laplace mechanism
pure epsilon-DP.  A release splits the total budget evenly across the
distinct sums of the profile (basic composition); collapsed duplicates are
released once and mirrored, which is what makes the smaller profiles cheaper.
All randomness comes from a caller-supplied numpy Generator, so a release is
fully determined by one seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .core import Bounds, Profile, SumVector, sensitivity_per_sum
from .errors import (
    InvalidBudgetError,
    InvalidConfigError,
    InvalidSplitError,
    MechanismMismatchError,
)


class MechanismKind(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) privacy budget; delta == 0 means pure DP."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise InvalidBudgetError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (0.0 <= self.delta < 1.0):
            raise InvalidBudgetError(f"delta must lie in [0, 1), got {self.delta}")


def gaussian_sigma(sensitivity: float, budget: PrivacyBudget) -> float:
    """Standard deviation of Gaussian noise for one release at ``budget``.

    sigma = sensitivity * sqrt(2 ln(1.25/delta)) / epsilon; requires delta > 0.
    """
    if sensitivity < 0.0:
        raise ValueError("sensitivity must be non-negative")
    if budget.delta == 0.0:
        raise MechanismMismatchError("the Gaussian mechanism requires delta > 0")
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon


def laplace_scale(sensitivity: float, epsilon: float) -> float:
    """Scale of Laplace noise for one release: sensitivity / epsilon.

    The associated noise variance is 2 * scale**2.
    """
    if sensitivity < 0.0:
        raise ValueError("sensitivity must be non-negative")
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise InvalidBudgetError(f"epsilon must be positive and finite, got {epsilon}")
    return sensitivity / epsilon


def split_budget(total: PrivacyBudget, k: int) -> PrivacyBudget:
    """Even per-release budget so k releases jointly satisfy ``total``.

    Basic composition: k releases at (eps/k, delta/k) compose to (eps, delta).
    """
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise InvalidSplitError(f"k must be a positive integer, got {k!r}")
    return PrivacyBudget(total.epsilon / k, total.delta / k)


def _laplace_from_uniform(u: np.ndarray, scale) -> np.ndarray:
    # Inverse CDF of the centred Laplace. u == 0.0 (possible: rng.random()
    # covers [0, 1)) is clamped to the smallest positive double, which maps
    # to a finite deep-tail draw of the correct sign.
    u = np.maximum(u, np.finfo(np.float64).tiny)
    return np.where(u < 0.5, scale * np.log(2.0 * u), -scale * np.log(2.0 * (1.0 - u)))


def draw_noise(
    rng: np.random.Generator,
    mechanism: MechanismKind | None,
    noise_variance: float,
    size: int | None = None,
) -> np.ndarray | float:
    """Centred noise with the given variance from the mechanism's distribution.

    A ``None`` mechanism (the no-noise public pathway) yields zeros.
    """
    if noise_variance < 0.0:
        raise ValueError("noise_variance must be non-negative")
    if mechanism is None or noise_variance == 0.0:
        return 0.0 if size is None else np.zeros(size)
    if mechanism is MechanismKind.GAUSSIAN:
        return math.sqrt(noise_variance) * rng.standard_normal(size)
    scale = math.sqrt(noise_variance / 2.0)
    out = _laplace_from_uniform(rng.random(size), scale)
    return float(out) if size is None else out


@dataclass(frozen=True)
class ReleasedSums:
    """Noisy sums plus the exact noise calibration used to produce them.

    ``values`` and ``noise_variance`` carry all seven canonical field names;
    collapsed duplicates mirror the single released entry.  ``mechanism`` is
    ``None`` only for the no-noise pathway built by :func:`exact_release`.
    """

    values: Mapping[str, float]
    noise_variance: Mapping[str, float]
    mechanism: MechanismKind | None
    per_sum_budget: PrivacyBudget | None
    profile: Profile

    @property
    def released_fields(self) -> tuple[str, ...]:
        return self.profile.released_fields

    def to_json_dict(self) -> dict:
        released = self.released_fields
        return {
            "mechanism": self.mechanism.value if self.mechanism is not None else None,
            "profile": self.profile.value,
            "per_sum_budget": (
                {"epsilon": self.per_sum_budget.epsilon, "delta": self.per_sum_budget.delta}
                if self.per_sum_budget is not None
                else None
            ),
            "values": {f: self.values[f] for f in released},
            "noise_variance": {f: self.noise_variance[f] for f in released},
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "ReleasedSums":
        profile = Profile(payload["profile"])
        mechanism = payload.get("mechanism")
        budget = payload.get("per_sum_budget")
        values = dict(payload["values"])
        variance = dict(payload["noise_variance"])
        missing = set(profile.released_fields) - set(values)
        if missing:
            raise InvalidConfigError(f"released values missing fields: {sorted(missing)}")
        for alias, source in profile.aliases.items():
            values[alias] = values[source]
            variance[alias] = variance[source]
        return cls(
            values=values,
            noise_variance=variance,
            mechanism=MechanismKind(mechanism) if mechanism is not None else None,
            per_sum_budget=PrivacyBudget(**budget) if budget is not None else None,
            profile=profile,
        )


def release(
    sums: SumVector,
    bounds: Bounds,
    total_budget: PrivacyBudget,
    mechanism: MechanismKind,
    rng: np.random.Generator,
) -> ReleasedSums:
    """Privatize the distinct sums under an even split of ``total_budget``.

    Each released sum receives independent noise calibrated to its own
    sensitivity at budget (eps/k, delta/k), where k is the profile size.
    Collapsed duplicates mirror the released entry instead of consuming
    budget.
    """
    if bounds.profile is not sums.profile:
        raise InvalidConfigError(
            f"bounds declare profile {bounds.profile.value} but sums carry {sums.profile.value}"
        )
    if mechanism is MechanismKind.GAUSSIAN and total_budget.delta == 0.0:
        raise MechanismMismatchError("the Gaussian mechanism requires delta > 0")
    if mechanism is MechanismKind.LAPLACE and total_budget.delta != 0.0:
        raise MechanismMismatchError("the Laplace mechanism requires delta == 0")

    profile = sums.profile
    fields = profile.released_fields
    per = split_budget(total_budget, len(fields))
    sens = sensitivity_per_sum(bounds, profile)

    if mechanism is MechanismKind.GAUSSIAN:
        sigmas = np.array([gaussian_sigma(sens[f], per) for f in fields])
        noises = sigmas * rng.standard_normal(len(fields))
        variances = sigmas * sigmas
    else:
        scales = np.array([laplace_scale(sens[f], per.epsilon) for f in fields])
        noises = _laplace_from_uniform(rng.random(len(fields)), scales)
        variances = 2.0 * scales * scales

    exact = sums.as_dict()
    values = {f: exact[f] + float(e) for f, e in zip(fields, noises)}
    noise_variance = {f: float(v) for f, v in zip(fields, variances)}
    for alias, source in profile.aliases.items():
        values[alias] = values[source]
        noise_variance[alias] = noise_variance[source]
    return ReleasedSums(
        values=values,
        noise_variance=noise_variance,
        mechanism=mechanism,
        per_sum_budget=per,
        profile=profile,
    )


def exact_release(sums: SumVector) -> ReleasedSums:
    """Wrap exact sums as a zero-noise release (the non-private baseline)."""
    values = sums.as_dict()
    return ReleasedSums(
        values=values,
        noise_variance={f: 0.0 for f in values},
        mechanism=None,
        per_sum_budget=None,
        profile=sums.profile,
    )
