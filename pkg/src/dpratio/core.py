"""Domain types and exact summary statistics.

Everything downstream (noise calibration, ratio inference, simulation) runs
on up to seven weighted sums of the raw records.  This module computes those
sums exactly, knows their sensitivity under add/remove-one neighboring, and
provides Kish's effective sample size.  All functions here are pure and all
types immutable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ._kernels import weighted_sums
from .errors import (
    BoundsViolationError,
    DatasetFormatError,
    EmptyDatasetError,
    InvalidConfigError,
    InvalidSumsError,
)

#: Canonical field order of the seven sums.
SUM_FIELDS = ("sum_w", "sum_wy", "sum_ws", "sum_w2", "sum_wy2", "sum_ws2", "sum_wys")

# Relative slack for the Cauchy-Schwarz sanity check on exact sums.
_CS_SLACK = 1e-12


class Profile(str, Enum):
    """Which of the seven sums are distinct (and hence released separately).

    Binary labels make ``sum_wy2`` redundant with ``sum_wy``; unit weights
    additionally make ``sum_w2`` redundant with ``sum_w``.  The profile is
    declared by the caller through :class:`Bounds`, never inferred from the
    data, because the number of released sums is public metadata.
    """

    FULL7 = "full7"
    BINARY6 = "binary6"
    UNWEIGHTED5 = "unweighted5"

    @property
    def released_fields(self) -> tuple[str, ...]:
        """Names of the sums that carry independent noise on release."""
        dropped = self.aliases
        return tuple(f for f in SUM_FIELDS if f not in dropped)

    @property
    def aliases(self) -> dict[str, str]:
        """Collapsed sums, mapped to the released sum they duplicate."""
        if self is Profile.BINARY6:
            return {"sum_wy2": "sum_wy"}
        if self is Profile.UNWEIGHTED5:
            return {"sum_wy2": "sum_wy", "sum_w2": "sum_w"}
        return {}

    @property
    def size(self) -> int:
        return len(self.released_fields)


@dataclass(frozen=True)
class Bounds:
    """Public bounds on label, score, and weight, plus the declared profile.

    ``binary_y`` asserts y is 0/1 (forcing unit bounds on y and s);
    ``unit_weights`` asserts all weights are exactly one.  Both flags tighten
    the release profile, and both are validated against the data when sums
    are computed.
    """

    y_low: float = 0.0
    y_high: float = 1.0
    s_low: float = 0.0
    s_high: float = 1.0
    w_low: float = 1.0
    w_high: float = 1.0
    binary_y: bool = False
    unit_weights: bool = False

    def __post_init__(self) -> None:
        values = (self.y_low, self.y_high, self.s_low, self.s_high, self.w_low, self.w_high)
        if not all(math.isfinite(v) for v in values):
            raise InvalidConfigError("bounds must be finite")
        if not (0.0 <= self.y_low <= self.y_high):
            raise InvalidConfigError("label bounds require 0 <= y_low <= y_high")
        if not (0.0 <= self.s_low <= self.s_high):
            raise InvalidConfigError("score bounds require 0 <= s_low <= s_high")
        if not (0.0 < self.w_low <= self.w_high):
            raise InvalidConfigError("weight bounds require 0 < w_low <= w_high")
        if self.binary_y and ((self.y_low, self.y_high) != (0.0, 1.0) or (self.s_low, self.s_high) != (0.0, 1.0)):
            raise InvalidConfigError("binary_y requires y and s bounds of (0, 1)")
        if self.unit_weights and (self.w_low, self.w_high) != (1.0, 1.0):
            raise InvalidConfigError("unit_weights requires weight bounds of (1, 1)")

    @classmethod
    def binary(cls, w_low: float = 1.0, w_high: float = 1.0, unit_weights: bool = False) -> "Bounds":
        """Bounds for a binary classification dataset with bounded weights."""
        return cls(0.0, 1.0, 0.0, 1.0, w_low, w_high, binary_y=True, unit_weights=unit_weights)

    @classmethod
    def binary_unweighted(cls) -> "Bounds":
        """Bounds for binary classification data with all weights equal to one."""
        return cls.binary(unit_weights=True)

    @property
    def profile(self) -> Profile:
        if self.binary_y and self.unit_weights:
            return Profile.UNWEIGHTED5
        if self.binary_y:
            return Profile.BINARY6
        return Profile.FULL7


@dataclass(frozen=True)
class Record:
    """One observation: label y, model score s, sampling weight w."""

    y: float
    s: float
    w: float = 1.0


@dataclass(frozen=True)
class Moments:
    """Plug-in means, variances of the means, and their covariance.

    ``flags`` records floored negative variance plug-ins and covariance
    values outside the Cauchy-Schwarz envelope, both of which can occur when
    the moments are computed from noisy sums.
    """

    mu_s: float
    mu_y: float
    var_s_bar: float
    var_y_bar: float
    cov_ys_bar: float
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.var_s_bar < 0.0 or self.var_y_bar < 0.0:
            raise InvalidSumsError("moment variances must be floored at zero before construction")


@dataclass(frozen=True)
class SumVector:
    """The exact (non-private) summary sums of one dataset."""

    sum_w: float
    sum_wy: float
    sum_ws: float
    sum_w2: float
    sum_wy2: float
    sum_ws2: float
    sum_wys: float
    profile: Profile

    def __post_init__(self) -> None:
        values = self.as_dict()
        if not all(math.isfinite(v) for v in values.values()):
            raise InvalidSumsError("sums must be finite")
        if not self.sum_w > 0.0:
            raise InvalidSumsError("sum_w must be positive for non-empty data")
        for alias, source in self.profile.aliases.items():
            if values[alias] != values[source]:
                raise InvalidSumsError(f"profile {self.profile.value} requires {alias} == {source}")
        cs_bound = self.sum_wy2 * self.sum_ws2
        if self.sum_wys * self.sum_wys > cs_bound * (1.0 + _CS_SLACK) + _CS_SLACK:
            raise InvalidSumsError("sum_wys^2 exceeds sum_wy2 * sum_ws2")

    def as_dict(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in SUM_FIELDS}

    def __add__(self, other: "SumVector") -> "SumVector":
        """Elementwise sum; sums of disjoint datasets aggregate this way."""
        if not isinstance(other, SumVector):
            return NotImplemented
        if other.profile is not self.profile:
            raise InvalidSumsError("cannot add sums with different profiles")
        merged = {f: getattr(self, f) + getattr(other, f) for f in SUM_FIELDS}
        return SumVector(profile=self.profile, **merged)


def _validate_column(values: np.ndarray, low: float, high: float, name: str) -> None:
    ok = (values >= low) & (values <= high)  # NaN compares false
    if not ok.all():
        idx = int(np.argmin(ok))
        raise BoundsViolationError(
            f"record {idx}: {name}={float(values[idx])} outside [{low}, {high}]", index=idx
        )


def compute_sums_from_arrays(
    y: np.ndarray, s: np.ndarray, w: np.ndarray, bounds: Bounds
) -> SumVector:
    """Exact summary sums from parallel label/score/weight arrays.

    Validates every value against ``bounds`` (out-of-bounds records are
    errors, never clipped) and collapses duplicate sums according to the
    declared profile.  Accumulation is compensated, so the result does not
    depend on record order beyond ~1e-12 relative.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    s = np.ascontiguousarray(s, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if y.ndim != 1 or s.shape != y.shape or w.shape != y.shape:
        raise InvalidConfigError("y, s, w must be one-dimensional arrays of equal length")
    if y.size == 0:
        raise EmptyDatasetError("dataset has no records")
    _validate_column(y, bounds.y_low, bounds.y_high, "y")
    _validate_column(s, bounds.s_low, bounds.s_high, "s")
    _validate_column(w, bounds.w_low, bounds.w_high, "w")
    if bounds.binary_y:
        binary = (y == 0.0) | (y == 1.0)
        if not binary.all():
            idx = int(np.argmin(binary))
            raise BoundsViolationError(f"record {idx}: y={float(y[idx])} not in {{0, 1}}", index=idx)

    totals = weighted_sums(y, s, w)
    values = dict(zip(SUM_FIELDS, (float(t) for t in totals)))
    profile = bounds.profile
    for alias, source in profile.aliases.items():
        values[alias] = values[source]
    return SumVector(profile=profile, **values)


def compute_sums(records: Sequence[Record], bounds: Bounds) -> SumVector:
    """Exact summary sums of a sequence of :class:`Record`."""
    n = len(records)
    if n == 0:
        raise EmptyDatasetError("dataset has no records")
    y = np.fromiter((r.y for r in records), dtype=np.float64, count=n)
    s = np.fromiter((r.s for r in records), dtype=np.float64, count=n)
    w = np.fromiter((r.w for r in records), dtype=np.float64, count=n)
    return compute_sums_from_arrays(y, s, w, bounds)


def sensitivity_per_sum(bounds: Bounds, profile: Profile | None = None) -> dict[str, float]:
    """Add/remove-one sensitivity of each released sum.

    Adding or removing one record changes each sum by at most its summand
    evaluated at the upper bounds, so the sensitivities are products of
    ``w_high``, ``y_high``, ``s_high``.  Returns one entry per released sum
    of the profile, in canonical field order.
    """
    if profile is None:
        profile = bounds.profile
    uw, uy, us = bounds.w_high, bounds.y_high, bounds.s_high
    full = {
        "sum_w": uw,
        "sum_wy": uw * uy,
        "sum_ws": uw * us,
        "sum_w2": uw * uw,
        "sum_wy2": uw * uy * uy,
        "sum_ws2": uw * us * us,
        "sum_wys": uw * uy * us,
    }
    return {name: full[name] for name in profile.released_fields}


def kish_effective_n(sums: SumVector) -> float:
    """Kish's effective sample size, (sum w)^2 / sum w^2."""
    if not sums.sum_w2 > 0.0:
        raise InvalidSumsError("sum_w2 must be positive")
    return sums.sum_w * sums.sum_w / sums.sum_w2


def read_dataset_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a ``y,s,w`` CSV (the ``w`` column is optional) into arrays.

    Values must parse as finite decimal reals; a missing weight column means
    unit weights.  Raises :class:`DatasetFormatError` naming the offending
    line on any malformed content.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError("missing header row", line=1) from None
        header = [h.strip() for h in header]
        if header == ["y", "s", "w"]:
            has_w = True
        elif header == ["y", "s"]:
            has_w = False
        else:
            raise DatasetFormatError(f"expected header 'y,s,w' or 'y,s', got {header!r}", line=1)

        ys: list[float] = []
        ss: list[float] = []
        ws: list[float] = []
        width = 3 if has_w else 2
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise DatasetFormatError(
                    f"line {lineno}: expected {width} fields, got {len(row)}", line=lineno
                )
            try:
                parsed = [float(tok) for tok in row]
            except ValueError:
                raise DatasetFormatError(f"line {lineno}: non-numeric value in {row!r}", line=lineno) from None
            if not all(math.isfinite(v) for v in parsed):
                raise DatasetFormatError(f"line {lineno}: non-finite value in {row!r}", line=lineno)
            ys.append(parsed[0])
            ss.append(parsed[1])
            ws.append(parsed[2] if has_w else 1.0)

    return (
        np.asarray(ys, dtype=np.float64),
        np.asarray(ss, dtype=np.float64),
        np.asarray(ws, dtype=np.float64),
    )
