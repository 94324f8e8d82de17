"""Harmonic spectrum extraction from sampled waveforms, and synthesis.

Extraction projects an integer number of fundamental cycles onto the
harmonic bins with a rectangular window; on integer-cycle records the bins
are exactly orthogonal, so no taper or leakage correction is needed.
Angles use the sine convention (entry h contributes
multiplier_h * sin(2*pi*h*f0*t + angle_h)) and are referenced to the
fundamental zero crossing: angle_h = raw phase of h minus h times the raw
fundamental phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FundamentalAbsent,
    InsufficientSamples,
    NyquistViolation,
    ValidationError,
)

DEFAULT_N_CYCLES = 12
DEFAULT_MAX_ORDER = 50

#: Fundamental bin magnitudes below this fraction of waveform RMS are
#: treated as absent (normalization would blow up on noise).
_FUNDAMENTAL_FLOOR = 1e-9


@dataclass(frozen=True)
class WaveformRecord:
    """Uniformly sampled real waveform."""

    sample_rate: float
    samples: np.ndarray
    quantity: str = "current"  # current | voltage

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=float)
        )


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Fundamental-relative spectrum: (order, multiplier, angle_deg) entries.

    Invariants: order 1 present with multiplier exactly 1.0, orders strictly
    increasing, multipliers nonnegative. kind tags whether the multipliers
    describe a current or a voltage source.
    """

    entries: tuple[tuple[int, float, float], ...]
    kind: str = "current"  # current | voltage
    name: str = ""
    _by_order: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        orders = [e[0] for e in self.entries]
        if 1 not in orders:
            raise ValidationError("spectrum lacks the order-1 entry")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValidationError("spectrum orders must be strictly increasing")
        for order, mult, _ in self.entries:
            if mult < 0:
                raise ValidationError(f"negative multiplier at order {order}")
        m1 = dict((o, m) for o, m, _ in self.entries)[1]
        if abs(m1 - 1.0) > 1e-9:
            raise ValidationError(f"order-1 multiplier must be 1.0, got {m1}")
        object.__setattr__(
            self, "_by_order", {o: (m, a) for o, m, a in self.entries}
        )

    def orders(self) -> list[int]:
        return [o for o, _, _ in self.entries]

    def harmonic_orders(self) -> list[int]:
        return [o for o, _, _ in self.entries if o >= 2]

    def has_order(self, k: int) -> bool:
        return k in self._by_order

    def multiplier(self, k: int) -> float:
        return self._by_order[k][0]

    def angle(self, k: int) -> float:
        return self._by_order[k][1]


def fundamental_only(kind: str = "current") -> HarmonicSpectrum:
    return HarmonicSpectrum(entries=((1, 1.0, 0.0),), kind=kind)


def extract_spectrum(
    waveform: WaveformRecord,
    f0: float = 60.0,
    n_cycles: int = DEFAULT_N_CYCLES,
    max_order: int = DEFAULT_MAX_ORDER,
) -> HarmonicSpectrum:
    """Project a waveform onto harmonic bins of f0 over exactly n_cycles.

    The record is truncated to the nearest integer sample count covering
    n_cycles; with a non-integer samples-per-cycle ratio this introduces a
    frequency error below half a sample per record (sub-100 ppm for the
    bundled capture rates), which is accepted instead of resampling.
    Orders with magnitude below 1e-6 of the fundamental are dropped.
    """
    if max_order * f0 >= waveform.sample_rate / 2:
        raise NyquistViolation(
            f"max_order {max_order} at f0={f0} Hz needs sample_rate > "
            f"{2 * max_order * f0} Hz, got {waveform.sample_rate}"
        )
    n_needed = int(round(n_cycles * waveform.sample_rate / f0))
    if n_needed < 2 or len(waveform.samples) < n_needed:
        raise InsufficientSamples(
            f"need {n_needed} samples for {n_cycles} cycles at "
            f"{waveform.sample_rate} Hz, got {len(waveform.samples)}"
        )
    window = waveform.samples[:n_needed]
    bins = np.fft.rfft(window)
    rms = float(np.sqrt(np.mean(window * window)))

    top = min(max_order, (len(bins) - 1) // n_cycles)
    amplitudes = 2.0 * bins[np.arange(1, top + 1) * n_cycles] / n_needed
    mags = np.abs(amplitudes)
    if rms == 0 or mags[0] < _FUNDAMENTAL_FLOOR * rms:
        raise FundamentalAbsent(
            f"order-1 magnitude {mags[0] if rms else 0.0:.3e} is below "
            f"{_FUNDAMENTAL_FLOOR} of the record RMS"
        )
    # cosine-convention phase from the DFT, shifted +90 deg to the sine
    # convention, then referenced to the fundamental zero crossing
    phases = np.degrees(np.angle(amplitudes)) + 90.0
    phi1 = phases[0]

    entries = [(1, 1.0, 0.0)]
    for h in range(2, top + 1):
        mult = mags[h - 1] / mags[0]
        if mult < 1e-6:
            continue
        entries.append((h, float(mult), wrap_angle(phases[h - 1] - h * phi1)))
    return HarmonicSpectrum(
        entries=tuple(entries), kind=waveform.quantity
    )


def synthesize_waveform(
    spectrum: HarmonicSpectrum,
    fundamental_amplitude: float,
    f0: float = 60.0,
    sample_rate: float = 19980.0,
    duration: float = 0.2,
) -> WaveformRecord:
    """Sum of sinusoids realizing a spectrum, for round-trip testing."""
    top = max(spectrum.orders())
    if top * f0 >= sample_rate / 2:
        raise NyquistViolation(
            f"order {top} at f0={f0} Hz violates Nyquist for "
            f"sample_rate={sample_rate} Hz"
        )
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    x = np.zeros(n)
    for order, mult, angle in spectrum.entries:
        x += mult * np.sin(2 * np.pi * order * f0 * t + np.radians(angle))
    return WaveformRecord(
        sample_rate=sample_rate,
        samples=fundamental_amplitude * x,
        quantity=spectrum.kind,
    )


def wrap_angle(deg: float) -> float:
    """Normalize an angle in degrees to (-180, 180]."""
    wrapped = (deg + 180.0) % 360.0 - 180.0
    return 180.0 if wrapped == -180.0 else wrapped
