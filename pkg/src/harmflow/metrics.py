"""Distortion and loss metrics: THD, eddy-current loss, series summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySeries, ZeroFundamental

#: Rated winding eddy-current loss factor, per-unit of rated load loss.
DEFAULT_P_EC_R = 0.05


@dataclass(frozen=True)
class HarmonicSet:
    """Magnitudes of one quantity at the fundamental and harmonic orders.

    components holds (order, magnitude) pairs with order >= 2; units are
    whatever the caller uses, THD is unit-free and eddy loss expects
    per-unit of rated current.
    """

    fundamental: float
    components: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    @staticmethod
    def from_magnitudes(magnitudes: dict[int, float]) -> "HarmonicSet":
        fundamental = magnitudes.get(1, 0.0)
        comps = tuple(
            (h, m) for h, m in sorted(magnitudes.items()) if h >= 2
        )
        return HarmonicSet(fundamental=fundamental, components=comps)


@dataclass(frozen=True)
class SeriesSummary:
    """Five-number summary plus mean of one time series."""

    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


def thd(harmonic_set: HarmonicSet) -> float:
    """Total harmonic distortion in percent: 100*sqrt(sum M_h^2)/M_1, h >= 2."""
    if not (harmonic_set.fundamental > 0):
        raise ZeroFundamental(
            f"THD undefined for fundamental = {harmonic_set.fundamental}"
        )
    if not harmonic_set.components:
        return 0.0
    mags = np.array([m for _, m in harmonic_set.components], dtype=float)
    return 100.0 * float(np.sqrt(np.sum(mags * mags))) / harmonic_set.fundamental


def eddy_current_loss(
    harmonic_set: HarmonicSet, p_ec_r: float = DEFAULT_P_EC_R
) -> float:
    """Winding eddy-current loss, per-unit: p_ec_r * sum_h I_h^2 * h^2.

    The sum includes h=1, so a clean rated sinusoid gives exactly p_ec_r.
    Inputs must be per-unit of the transformer rated current.
    """
    total = harmonic_set.fundamental ** 2
    for h, mag in harmonic_set.components:
        total += (mag * h) ** 2
    return p_ec_r * total


def harmonic_eddy_component(
    harmonic_set: HarmonicSet, p_ec_r: float = DEFAULT_P_EC_R
) -> float:
    """Eddy loss with the fundamental term removed; 0 for a clean sinusoid."""
    return eddy_current_loss(harmonic_set, p_ec_r) - p_ec_r * harmonic_set.fundamental ** 2


def summarize(series) -> SeriesSummary:
    """Five-number summary with linearly interpolated quartiles."""
    values = np.asarray(series, dtype=float)
    if values.size == 0:
        raise EmptySeries("cannot summarize an empty series")
    q1, median, q3 = np.percentile(values, [25.0, 50.0, 75.0])
    return SeriesSummary(
        min=float(values.min()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        max=float(values.max()),
        mean=float(values.mean()),
    )
