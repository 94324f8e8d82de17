"""Load and DER device models and their harmonic-domain equivalents.

Nonlinear aggregate loads become Norton equivalents: a frequency-dependent
shunt admittance (a user-set mix of one series R-L branch and one parallel
R-L branch, each reproducing its share of the rated P, Q at the
fundamental) in parallel with a spectrum-driven harmonic current source.
PV and EV converters become a harmonic voltage source behind a series R-L
impedance; their fundamental behavior is a plain power injection (PV
exports at unity power factor, EV draws its charging power).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError, ZeroPower
from .harmonics import injection_from_spectrum
from .spectrum import HarmonicSpectrum


@dataclass(frozen=True)
class NortonLoadModel:
    """Aggregate load: p_rated/q_rated in W/var at v_rated, spectrum by name.

    series_fraction sets how much of the rated power sits in the series
    R-L branch; the rest goes to the parallel branch. The two ends of that
    range bracket the damping the load presents near a resonance.
    """

    bus: str
    p_rated: float
    q_rated: float
    series_fraction: float = 0.5
    spectrum: str = ""
    profile: str = ""

    def __post_init__(self):
        if not (0.0 <= self.series_fraction <= 1.0):
            raise ValidationError(
                f"series_fraction must be in [0, 1], got {self.series_fraction}"
            )
        if self.p_rated < 0:
            raise ValidationError(f"p_rated must be >= 0, got {self.p_rated}")


@dataclass(frozen=True)
class PVModel:
    """PV inverter: unity-pf export scaled by an irradiance profile."""

    bus: str
    s_rating: float
    power_factor: float = 1.0
    profile: str = ""
    spectrum: str = ""
    series_r: float = 0.0
    series_x: float = 0.0

    def __post_init__(self):
        if not (self.s_rating > 0):
            raise ValidationError(f"s_rating must be > 0, got {self.s_rating}")


@dataclass(frozen=True)
class EVModel:
    """EV charger, grid-to-vehicle only.

    capacity in watt-hours; charge_power is the maximum grid-side draw.
    eta_inv applies to the grid-side input, p_idle is drawn battery-side,
    eta_ch applies to what reaches the cells.
    """

    bus: str
    capacity: float
    charge_power: float
    soc_min: float = 0.1
    soc_max: float = 1.0
    soc_target: float = 0.95
    eta_inv: float = 0.96
    eta_ch: float = 0.95
    p_idle: float = 100.0
    spectrum: str = ""
    availability: str = ""
    series_r: float = 0.0
    series_x: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.soc_min <= self.soc_target <= self.soc_max <= 1.0):
            raise ValidationError(
                "need 0 <= soc_min <= soc_target <= soc_max <= 1, got "
                f"{self.soc_min}/{self.soc_target}/{self.soc_max}"
            )
        for name in ("eta_inv", "eta_ch"):
            eta = getattr(self, name)
            if not (0.0 < eta <= 1.0):
                raise ValidationError(f"{name} must be in (0, 1], got {eta}")

    def initial_state(self, soc: float | None = None) -> "EVState":
        s = self.soc_min if soc is None else soc
        return EVState(energy=s * self.capacity, soc=s, charging=True)


@dataclass(frozen=True)
class EVState:
    """Battery state between timesteps; charging=False is terminal."""

    energy: float
    soc: float
    charging: bool


# ---------------------------------------------------------------------------
# Norton load equivalent
# ---------------------------------------------------------------------------

def norton_admittance(
    load: NortonLoadModel, v_rated: float, h: float, scale: float = 1.0
) -> complex:
    """Shunt admittance of the load at order h, Siemens at v_rated volts.

    Fit at the fundamental: the series branch takes series_fraction of
    (P, Q) through Z_s = |V|^2 (P + jQ) / (s |S|^2); the parallel branch
    takes the rest with G = (1-s) P / |V|^2 and B = -(1-s) Q / |V|^2.
    Frequency law: Z_s(h) = R_s + j h X_s, Y_p(h) = G + j B / h. The h=1
    sum reproduces (P - jQ)/|V|^2 exactly. Raises ZeroPower when the
    scaled load vanishes (nothing to stamp).
    """
    if not (v_rated > 0):
        raise ValidationError(f"v_rated must be > 0, got {v_rated}")
    p = load.p_rated * scale
    q = load.q_rated * scale
    if p == 0 and q == 0:
        raise ZeroPower(f"load at {load.bus} scaled to zero power")
    v2 = v_rated * v_rated
    s_frac = load.series_fraction
    y = 0j
    if s_frac > 0:
        s2 = p * p + q * q
        z1 = v2 * complex(p, q) / (s_frac * s2)
        y += 1.0 / complex(z1.real, h * z1.imag)
    if s_frac < 1:
        g = (1 - s_frac) * p / v2
        b = -(1 - s_frac) * q / v2
        y += complex(g, b / h)
    return y


def norton_equivalent(
    load: NortonLoadModel,
    v_rated: float,
    h: float,
    scale: float = 1.0,
    spectrum: HarmonicSpectrum | None = None,
    fundamental_current: complex = 0j,
    slack_angle: float = 0.0,
    polarity_shift: float = 180.0,
) -> tuple[complex, complex]:
    """(current source, shunt admittance) of the load at order h.

    At h=1 the source is the load's fundamental current as supplied by the
    power-flow solve; at h >= 2 it comes from the spectrum shift rule, or
    is zero when the spectrum lacks that order.
    """
    y = norton_admittance(load, v_rated, h, scale)
    if h == 1:
        return fundamental_current, y
    if spectrum is None or not spectrum.has_order(int(h)):
        return 0j, y
    source = injection_from_spectrum(
        spectrum, fundamental_current, slack_angle, int(h), polarity_shift
    )
    return source, y


# ---------------------------------------------------------------------------
# PV / EV
# ---------------------------------------------------------------------------

def pv_operating_point(
    pv: PVModel, profile_value: float, t: float = 0.0
) -> tuple[float, float]:
    """(P, Q) exported by the inverter at one instant, watts/vars.

    P = profile_value * s_rating at unity power factor, so the apparent
    power constraint P^2 + Q^2 <= S^2 holds by construction. t is the
    step time; the operating point depends on it only through the profile.
    """
    if not (0.0 <= profile_value <= 1.0):
        raise ValidationError(
            f"profile value must be in [0, 1], got {profile_value}"
        )
    return profile_value * pv.s_rating, 0.0


def ev_step(
    ev: EVModel, state: EVState, p_available: float, dt: float
) -> EVState:
    """Advance the battery by one step of dt seconds under G2V charging.

    Stored energy gains (eta_inv * P_in - p_idle) * eta_ch * dt/3600 with
    P_in = min(p_available, charge_power). SoC is clamped to
    [soc_min, soc_target] (soc_target <= soc_max by construction); the
    charging flag clears exactly when the clamp lands on the target, and a
    cleared flag is permanent.
    """
    if not state.charging or state.soc >= ev.soc_target:
        return EVState(energy=state.energy, soc=state.soc, charging=False)
    p_in = min(p_available, ev.charge_power)
    de = (ev.eta_inv * p_in - ev.p_idle) * ev.eta_ch * dt / 3600.0
    soc = state.soc + de / ev.capacity
    soc = min(max(soc, ev.soc_min), ev.soc_target)
    return EVState(
        energy=soc * ev.capacity,
        soc=soc,
        charging=soc < ev.soc_target,
    )


def ev_grid_draw(ev: EVModel, state: EVState, p_available: float) -> float:
    """Grid-side watts the charger pulls during the coming step."""
    if not state.charging or state.soc >= ev.soc_target:
        return 0.0
    return min(p_available, ev.charge_power)


def der_harmonic_source(
    device,
    spectrum: HarmonicSpectrum,
    fundamental_terminal_current: complex,
    k: int,
    terminal_voltage: complex = 1.0 + 0j,
    slack_angle: float = 0.0,
    polarity_shift: float = 180.0,
) -> tuple[complex, complex]:
    """(voltage source, series impedance) of a converter at order k.

    The internal fundamental voltage is reconstructed from the terminal
    pair: V1_int = V_term + Z(1) * I_term with I_term export-positive (an
    idle device sees V1_int = V_term). The order-k source magnitude is the
    spectrum multiplier times |V1_int| with the same angle shift rule as
    current spectra; the series impedance scales as R + j k X. Units follow
    the inputs (per-unit in, per-unit out).
    """
    z1 = complex(device.series_r, device.series_x)
    v1_internal = terminal_voltage + z1 * fundamental_terminal_current
    e_k = injection_from_spectrum(
        spectrum, v1_internal, slack_angle, k, polarity_shift
    )
    z_k = complex(device.series_r, k * device.series_x)
    return e_k, z_k
