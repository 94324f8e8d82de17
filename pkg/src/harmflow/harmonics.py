"""Per-order harmonic network solves, frequency scans, resonance helpers.

At orders above the fundamental every constant-power device is replaced by
a linear equivalent (Norton shunt or voltage source behind an impedance),
so each order is one linear solve: Y_k V_k = I_k. The slack bus carries no
harmonic source; it is grounded through the source Thevenin impedance, or
held at exactly zero volts when that impedance is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import MissingOrder, ResonancePole, SingularNetwork
from .kernels import solve_shunted_batch
from .network import Network, build_admittance, thevenin_shunt
from .spectrum import HarmonicSpectrum, wrap_angle

#: Max allowed ||Y_k V_k - I_k||_inf for a solution to be returned.
RESIDUAL_TOL = 1e-9

DEFAULT_SCAN_FMIN = 60.0
DEFAULT_SCAN_FMAX = 3000.0
DEFAULT_SCAN_STEP = 10.0

#: (bus id, per-unit admittance) pairs added to the diagonal at one order.
ShuntList = Iterable[tuple[str, complex]]


@dataclass(frozen=True)
class HarmonicInjection:
    """Current source at one bus and one order, per-unit on the system base."""

    bus: str
    order: int
    current: complex


@dataclass
class HarmonicSolution:
    """Bus voltages at one order, canonical order, per-unit."""

    order: float
    bus_order: list[str]
    voltages: np.ndarray
    residual: float

    def voltage(self, bus_id: str) -> complex:
        return complex(self.voltages[self.bus_order.index(bus_id)])


@dataclass
class ImpedanceCurve:
    """Driving-point impedance vs frequency at one bus, Ohm.

    failures lists (frequency, reason) for scan points whose solve did not
    meet tolerance; those frequencies carry no point.
    """

    bus: str
    points: list[tuple[float, complex]] = field(default_factory=list)
    failures: list[tuple[float, str]] = field(default_factory=list)

    def frequencies(self) -> np.ndarray:
        return np.array([f for f, _ in self.points])

    def magnitudes(self) -> np.ndarray:
        return np.abs(np.array([z for _, z in self.points]))

    def peak(self) -> tuple[float, complex]:
        """(frequency, impedance) of the largest |Z| sample."""
        i = int(np.argmax(self.magnitudes()))
        return self.points[i]


def injection_from_spectrum(
    spectrum: HarmonicSpectrum,
    fundamental_current: complex,
    slack_angle: float,
    k: int,
    polarity_shift: float = 180.0,
) -> complex:
    """Harmonic current phasor at order k from a fundamental-relative spectrum.

    Magnitude is |I1| times the order-k multiplier. The spectrum angle is
    shifted by k times the fundamental angle relative to the slack angle,
    plus a fixed polarity shift (180 degrees by default; pass 0 or -180 to
    flip the convention). Result angle normalized to (-180, 180].
    """
    if not spectrum.has_order(k):
        raise MissingOrder(f"spectrum has no order {k}")
    mag = abs(fundamental_current) * spectrum.multiplier(k)
    phi1 = np.degrees(np.angle(fundamental_current))
    angle = wrap_angle(
        spectrum.angle(k) + k * (phi1 - slack_angle) + polarity_shift
    )
    return mag * np.exp(1j * np.radians(angle))


def assemble_harmonic_matrix(
    network: Network,
    h: float,
    shunts: ShuntList = (),
    triplen_blocking: bool = True,
) -> np.ndarray:
    """Dense per-unit Y at order h with device and source shunts stamped in.

    The slack diagonal gets the Thevenin grounding admittance when the
    source impedance is nonzero; a zero source impedance is handled by the
    solver (hard ground), not here.
    """
    y = build_admittance(
        network, h, check_diagonal=False, triplen_blocking=triplen_blocking
    ).toarray()
    for bus_id, admittance in shunts:
        y[network.bus_index(bus_id), network.bus_index(bus_id)] += admittance
    y_th = thevenin_shunt(network, h)
    if y_th != 0:
        y[network.slack_index, network.slack_index] += y_th
    return y


def solve_harmonic(
    network: Network,
    injections: list[HarmonicInjection],
    device_shunts: ShuntList = (),
    order: float | None = None,
) -> HarmonicSolution:
    """Directly solve Y_k V_k = I_k for one order.

    The order is taken from the injections when not given explicitly.
    Raises SingularNetwork when the factorization fails or the residual
    exceeds RESIDUAL_TOL.
    """
    if order is None:
        if not injections:
            raise ValueError("order must be given when there are no injections")
        order = injections[0].order
    n = network.n_buses
    rhs = np.zeros(n, dtype=complex)
    for inj in injections:
        rhs[network.bus_index(inj.bus)] += inj.current

    y = assemble_harmonic_matrix(network, order, device_shunts)
    grounded_slack = thevenin_shunt(network, order) == 0
    voltages, residual = _solve_one(network, y, rhs, grounded_slack, order)
    return HarmonicSolution(
        order=order,
        bus_order=network.bus_order(),
        voltages=voltages,
        residual=residual,
    )


def _solve_one(network, y, rhs, grounded_slack, h):
    n = network.n_buses
    if grounded_slack:
        keep = np.arange(n) != network.slack_index
        y_solve = np.ascontiguousarray(y[np.ix_(keep, keep)])
        rhs_solve = rhs[keep]
    else:
        keep = None
        y_solve = y
        rhs_solve = rhs
    m = y_solve.shape[0]
    x, residual, info = solve_shunted_batch(
        y_solve.reshape(1, m, m),
        np.zeros((1, m), dtype=complex),
        rhs_solve.reshape(1, m),
    )
    if info[0] != 0:
        raise SingularNetwork(f"Y(h={h}) is singular (lapack info {info[0]})")
    if residual[0] >= RESIDUAL_TOL:
        raise SingularNetwork(
            f"solve at h={h} left residual {residual[0]:.3e} >= {RESIDUAL_TOL}"
        )
    if keep is None:
        return x[0], float(residual[0])
    voltages = np.zeros(n, dtype=complex)
    voltages[keep] = x[0]
    return voltages, float(residual[0])


def frequency_scan(
    network: Network,
    bus: str,
    f_min: float = DEFAULT_SCAN_FMIN,
    f_max: float = DEFAULT_SCAN_FMAX,
    step: float = DEFAULT_SCAN_STEP,
    device_shunts: ShuntList | Callable[[float], ShuntList] = (),
) -> ImpedanceCurve:
    """Driving-point impedance at a bus over a frequency sweep.

    Injects exactly 1 A at each frequency and reads the bus voltage back
    as Z(f) in Ohm. device_shunts may be a fixed list or a callable of the
    harmonic order (device admittances are frequency-dependent). Singular
    points are recorded in the curve's failures and skipped.
    """
    if not (0 < f_min < f_max) or step <= 0:
        raise ValueError(
            f"need 0 < f_min < f_max and step > 0, got "
            f"[{f_min}, {f_max}] step {step}"
        )
    shunts_at = device_shunts if callable(device_shunts) else (lambda h: device_shunts)
    n_points = int(np.floor((f_max - f_min) / step + 1e-9)) + 1
    frequencies = f_min + step * np.arange(n_points)

    bus_i = network.bus_index(bus)
    grounded_slack = network.source is None or (
        network.source.thevenin_r == 0 and network.source.thevenin_x == 0
    )
    n = network.n_buses
    keep = np.arange(n) != network.slack_index if grounded_slack else slice(None)
    i_pu = 1.0 / network.current_base(bus)

    curve = ImpedanceCurve(bus=bus)
    if grounded_slack and bus_i == network.slack_index:
        # dead short at every frequency
        curve.points = [(float(f), 0j) for f in frequencies]
        return curve

    # sweeps see the positive-sequence continuum: the integer-order triplen
    # blocking rule would punch discontinuities into the curve wherever the
    # grid lands on a multiple of three
    matrices = []
    for f in frequencies:
        h = f / network.base_frequency
        y = assemble_harmonic_matrix(
            network, h, shunts_at(h), triplen_blocking=False
        )
        matrices.append(y[keep][:, keep] if grounded_slack else y)
    base = np.array(matrices)
    m = base.shape[1]

    rhs = np.zeros((n_points, m), dtype=complex)
    col = bus_i - (1 if grounded_slack and bus_i > network.slack_index else 0)
    rhs[:, col] = i_pu
    x, residual, info = solve_shunted_batch(
        base, np.zeros((n_points, m), dtype=complex), rhs
    )

    v_base = network.voltage_base(bus)
    for p, f in enumerate(frequencies):
        if info[p] != 0:
            curve.failures.append((float(f), f"singular (lapack info {info[p]})"))
        elif residual[p] >= RESIDUAL_TOL:
            curve.failures.append((float(f), f"residual {residual[p]:.3e}"))
        else:
            curve.points.append((float(f), complex(x[p, col]) * v_base))
    return curve


def parallel_resonance_impedance(l_sys: float, c: float, f: float) -> complex:
    """Undamped source-inductance/shunt-capacitor impedance jwL/(1 - w^2 LC)."""
    if l_sys <= 0 or c <= 0 or f <= 0:
        raise ValueError("l_sys, c and f must all be positive")
    w = 2 * np.pi * f
    denom = 1.0 - w * w * l_sys * c
    if abs(denom) < 1e-12:
        raise ResonancePole(
            f"undamped pole at f={f} Hz (|1 - w^2 LC| = {abs(denom):.3e})"
        )
    return 1j * w * l_sys / denom


def resonant_frequency(l_sys: float, c: float) -> float:
    """Parallel resonant frequency 1/(2*pi*sqrt(LC)) in Hz."""
    if l_sys <= 0 or c <= 0:
        raise ValueError("l_sys and c must be positive")
    return 1.0 / (2 * np.pi * np.sqrt(l_sys * c))
