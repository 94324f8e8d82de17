"""Feeder data model and per-harmonic admittance assembly.

Models a radial distribution feeder as a per-phase positive-sequence
equivalent: one slack bus with a Thevenin source, series branches
(pi model), two-winding transformers, and shunt capacitor banks.

Units:
- Branch resistance/reactance: Ohm at the fundamental (60 Hz)
- Branch shunt susceptance: Siemens at the fundamental, total (split half
  per end)
- Capacitor susceptance: Siemens at the fundamental (= 2*pi*60*C)
- Transformer leakage: per-unit on the transformer's own kVA rating
- Bus nominal voltage: Volts line-to-ground
- Source Thevenin impedance: Ohm at the fundamental

``build_admittance`` returns the bus admittance matrix in per-unit on the
network-wide MVA base with per-bus voltage bases taken from the bus
nominal voltages, rows/columns in canonical bus order (slack first, then
lexicographic by id).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SingularNetwork, ValidationError

#: Harmonic order is treated as an exact integer when within this distance
#: of one; used only for the triplen-blocking rule on fractional scans.
_INTEGER_ORDER_TOL = 1e-9


@dataclass(frozen=True)
class Bus:
    """A network node.

    nominal_voltage is line-to-ground Volts and sets the per-unit voltage
    base on this bus. Exactly one bus in a network carries is_slack=True.
    """

    id: str
    nominal_voltage: float
    is_slack: bool = False


@dataclass(frozen=True)
class Branch:
    """Series line segment between two buses (pi model).

    resistance/reactance are series totals in Ohm at 60 Hz;
    shunt_susceptance is the total line-charging susceptance in Siemens at
    60 Hz, half of which is stamped at each end. length_scaled marks that
    the stored values are totals, not per-length figures.
    """

    from_bus: str
    to_bus: str
    resistance: float
    reactance: float
    shunt_susceptance: float = 0.0
    length_scaled: bool = True


@dataclass(frozen=True)
class CapacitorBank:
    """Shunt capacitor: susceptance in Siemens at the fundamental."""

    bus: str
    susceptance: float


@dataclass(frozen=True)
class TransformerBranch:
    """Two-winding transformer between from_bus (primary) and to_bus.

    Leakage is per-unit on rated_kva. With constant_xr=True the apparent
    resistance rises proportionally with frequency so X/R stays constant;
    otherwise only the reactance scales. blocks_triplen marks a delta
    primary winding: at integer orders divisible by three the element
    provides no primary/secondary coupling, and triplen current on the
    secondary side sees only the leakage path to the circulating winding.
    turns_ratio is the off-nominal per-unit ratio (1.0 = nominal taps).
    """

    from_bus: str
    to_bus: str
    rated_kva: float
    leakage_r: float
    leakage_x: float
    turns_ratio: float = 1.0
    constant_xr: bool = False
    blocks_triplen: bool = False

    @property
    def name(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


@dataclass(frozen=True)
class SourceEquivalent:
    """Stiff source behind a Thevenin impedance at the slack bus.

    voltage_mag (per-unit) and voltage_angle (degrees) fix the slack
    voltage at the fundamental; at harmonic orders the internal source is
    zero and the bus is grounded through thevenin_r + j*h*thevenin_x.
    """

    bus: str
    voltage_mag: float = 1.0
    voltage_angle: float = 0.0
    thevenin_r: float = 0.0
    thevenin_x: float = 0.0


@dataclass(frozen=True)
class Violation:
    """One broken invariant found by validate_network."""

    code: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.element}): {self.message}"


@dataclass
class Network:
    """Immutable-after-validation container for one feeder."""

    buses: list[Bus]
    branches: list[Branch] = field(default_factory=list)
    transformers: list[TransformerBranch] = field(default_factory=list)
    capacitor_banks: list[CapacitorBank] = field(default_factory=list)
    source: SourceEquivalent | None = None
    base_frequency: float = 60.0
    per_unit_base_mva: float = 1.0
    name: str = ""

    def __post_init__(self):
        self._order = _canonical_order(self.buses)
        self._index = {bus_id: i for i, bus_id in enumerate(self._order)}
        self._by_id = {b.id: b for b in self.buses}

    # -- canonical ordering -------------------------------------------------

    def bus_order(self) -> list[str]:
        """Bus ids in canonical order: slack first, then lexicographic."""
        return list(self._order)

    def bus_index(self, bus_id: str) -> int:
        return self._index[bus_id]

    def bus(self, bus_id: str) -> Bus:
        return self._by_id[bus_id]

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def slack_id(self) -> str:
        return self._order[0]

    @property
    def slack_index(self) -> int:
        return 0

    # -- per-unit bases -----------------------------------------------------

    @property
    def base_va(self) -> float:
        return self.per_unit_base_mva * 1e6

    def voltage_base(self, bus_id: str) -> float:
        return self._by_id[bus_id].nominal_voltage

    def impedance_base(self, bus_id: str) -> float:
        v = self.voltage_base(bus_id)
        return v * v / self.base_va

    def current_base(self, bus_id: str) -> float:
        return self.base_va / self.voltage_base(bus_id)


def _canonical_order(buses: list[Bus]) -> list[str]:
    slack = sorted(b.id for b in buses if b.is_slack)
    rest = sorted(b.id for b in buses if not b.is_slack)
    return slack + rest


# ---------------------------------------------------------------------------
# Element stamps
# ---------------------------------------------------------------------------

def branch_admittance(branch: Branch, h: float) -> np.ndarray:
    """2x2 admittance stamp of a line at harmonic order h, in Siemens.

    Series impedance scales as Z(h) = R + j*h*X (resistance held
    frequency-independent); line charging scales linearly: j*B*h/2 per end.
    """
    z = complex(branch.resistance, h * branch.reactance)
    y = 1.0 / z
    y_sh = 0.5j * h * branch.shunt_susceptance
    return np.array([[y + y_sh, -y], [-y, y + y_sh]], dtype=complex)


def transformer_series_impedance(xfmr: TransformerBranch, h: float) -> complex:
    """Leakage impedance at order h, per-unit on the transformer rating."""
    if xfmr.constant_xr:
        return complex(h * xfmr.leakage_r, h * xfmr.leakage_x)
    return complex(xfmr.leakage_r, h * xfmr.leakage_x)


def transformer_admittance(xfmr: TransformerBranch, h: float) -> np.ndarray:
    """2x2 admittance stamp at order h, per-unit on the transformer rating.

    Standard two-winding stamp with the off-nominal ratio t on the from
    side: [[y/t^2, -y/t], [-y/t, y]]. Triplen blocking is applied at
    assembly time, not here (this is the pure frequency law).
    """
    y = 1.0 / transformer_series_impedance(xfmr, h)
    t = xfmr.turns_ratio
    return np.array([[y / (t * t), -y / t], [-y / t, y]], dtype=complex)


def capacitor_admittance(bank: CapacitorBank, h: float) -> complex:
    """Shunt admittance of a capacitor bank at order h: j*h*B Siemens."""
    return 1j * h * bank.susceptance


def _is_blocked_triplen(xfmr: TransformerBranch, h: float) -> bool:
    if not xfmr.blocks_triplen:
        return False
    nearest = round(h)
    return abs(h - nearest) < _INTEGER_ORDER_TOL and nearest % 3 == 0


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def build_admittance(
    network: Network,
    h: float,
    check_diagonal: bool = True,
    triplen_blocking: bool = True,
):
    """Assemble the sparse per-unit bus admittance matrix at order h.

    Superposes all element stamps in canonical bus order. Branch and
    capacitor stamps (Siemens) are normalized with
    Y_pu[i, j] = Y_S[i, j] * Vbase_i * Vbase_j / S_base; transformer stamps
    (per-unit on their own rating) are rescaled by rated_kva / base_kva.
    A transformer that blocks triplens is stamped with no coupling at
    integer triplen orders; its secondary keeps the leakage path to ground.
    triplen_blocking=False skips that rule: frequency sweeps probe the
    positive-sequence continuum, where a grid point landing exactly on a
    triplen multiple must not see a discontinuous network.

    Raises SingularNetwork when a bus ends up with an exactly zero diagonal
    (pass check_diagonal=False to defer that check to a later stage that
    adds device shunts).
    """
    n = network.n_buses
    dense = np.zeros((n, n), dtype=complex)
    s_base = network.base_va

    for br in network.branches:
        i = network.bus_index(br.from_bus)
        j = network.bus_index(br.to_bus)
        stamp = branch_admittance(br, h)
        vi = network.voltage_base(br.from_bus)
        vj = network.voltage_base(br.to_bus)
        scale = np.array([[vi * vi, vi * vj], [vi * vj, vj * vj]]) / s_base
        _stamp_into(dense, i, j, stamp * scale)

    base_kva = network.per_unit_base_mva * 1e3
    for xf in network.transformers:
        i = network.bus_index(xf.from_bus)
        j = network.bus_index(xf.to_bus)
        if triplen_blocking and _is_blocked_triplen(xf, h):
            y = 1.0 / transformer_series_impedance(xf, h)
            stamp = np.array([[0.0, 0.0], [0.0, y]], dtype=complex)
        else:
            stamp = transformer_admittance(xf, h)
        _stamp_into(dense, i, j, stamp * (xf.rated_kva / base_kva))

    for bank in network.capacitor_banks:
        i = network.bus_index(bank.bus)
        v = network.voltage_base(bank.bus)
        dense[i, i] += capacitor_admittance(bank, h) * v * v / s_base

    if check_diagonal:
        for k in range(n):
            if dense[k, k] == 0:
                raise SingularNetwork(
                    f"bus {network.bus_order()[k]} has zero diagonal in Y(h={h})"
                )
    return sp.csc_matrix(dense)


def _stamp_into(dense: np.ndarray, i: int, j: int, stamp: np.ndarray) -> None:
    dense[i, i] += stamp[0, 0]
    dense[i, j] += stamp[0, 1]
    dense[j, i] += stamp[1, 0]
    dense[j, j] += stamp[1, 1]


def thevenin_shunt(network: Network, h: float) -> complex:
    """Per-unit grounding admittance of the shorted source at order h.

    Returns 0 when the Thevenin impedance is zero: the slack bus is then a
    hard ground at harmonic orders and must be partitioned out instead.
    """
    src = network.source
    if src is None:
        return 0.0
    z_ohm = complex(src.thevenin_r, h * src.thevenin_x)
    if z_ohm == 0:
        return 0.0
    return network.impedance_base(src.bus) / z_ohm


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_network(network: Network) -> list[Violation]:
    """Check all type invariants plus graph connectivity.

    Returns an empty list for a well-formed network; violations are data,
    not exceptions.
    """
    out: list[Violation] = []
    ids = [b.id for b in network.buses]
    known = set(ids)

    if len(ids) != len(known):
        seen: set[str] = set()
        for i in ids:
            if i in seen:
                out.append(Violation("DuplicateBusId", i, "bus id appears twice"))
            seen.add(i)

    slack = [b.id for b in network.buses if b.is_slack]
    if len(slack) == 0:
        out.append(Violation("NoSlack", "<network>", "no slack bus declared"))
    elif len(slack) > 1:
        out.append(Violation("DuplicateSlack", ",".join(sorted(slack)),
                             "more than one slack bus"))

    for b in network.buses:
        if not (b.nominal_voltage > 0):
            out.append(Violation("NonPositiveVoltage", b.id,
                                 f"nominal_voltage = {b.nominal_voltage}"))

    def check_ref(kind: str, element: str, bus_id: str) -> None:
        if bus_id not in known:
            out.append(Violation("DanglingReference", element,
                                 f"{kind} references unknown bus '{bus_id}'"))

    for br in network.branches:
        el = f"branch {br.from_bus}-{br.to_bus}"
        check_ref("branch", el, br.from_bus)
        check_ref("branch", el, br.to_bus)
        if br.from_bus == br.to_bus:
            out.append(Violation("SelfLoop", el, "from and to are the same bus"))
        if br.resistance < 0 or br.reactance < 0:
            out.append(Violation("NegativeImpedance", el,
                                 f"R={br.resistance}, X={br.reactance}"))
        if br.resistance == 0 and br.reactance == 0:
            out.append(Violation("ZeroImpedance", el, "series impedance is zero"))

    for xf in network.transformers:
        el = f"transformer {xf.name}"
        check_ref("transformer", el, xf.from_bus)
        check_ref("transformer", el, xf.to_bus)
        if xf.from_bus == xf.to_bus:
            out.append(Violation("SelfLoop", el, "from and to are the same bus"))
        if not (xf.rated_kva > 0):
            out.append(Violation("NonPositiveRating", el,
                                 f"rated_kva = {xf.rated_kva}"))
        if not (xf.leakage_x > 0):
            out.append(Violation("NonPositiveLeakage", el,
                                 f"leakage_x = {xf.leakage_x}"))
        if not (xf.turns_ratio > 0):
            out.append(Violation("NonPositiveRatio", el,
                                 f"turns_ratio = {xf.turns_ratio}"))

    for bank in network.capacitor_banks:
        el = f"capacitor @{bank.bus}"
        check_ref("capacitor", el, bank.bus)
        if not (bank.susceptance > 0):
            out.append(Violation("NonPositiveSusceptance", el,
                                 f"susceptance = {bank.susceptance}"))

    if network.source is None:
        out.append(Violation("NoSource", "<network>", "no source equivalent"))
    else:
        src = network.source
        check_ref("source", "source", src.bus)
        if not (src.voltage_mag > 0):
            out.append(Violation("NonPositiveVoltage", "source",
                                 f"voltage_mag = {src.voltage_mag}"))
        if src.bus in known and not network.bus(src.bus).is_slack:
            out.append(Violation("SourceNotAtSlack", "source",
                                 f"source bus '{src.bus}' is not the slack bus"))
        if src.thevenin_r < 0 or src.thevenin_x < 0:
            out.append(Violation("NegativeImpedance", "source",
                                 f"R={src.thevenin_r}, X={src.thevenin_x}"))

    for v in (network.base_frequency, network.per_unit_base_mva):
        if not (math.isfinite(v) and v > 0):
            out.append(Violation("BadBase", "<network>",
                                 f"base_frequency/per_unit_base_mva = {v}"))

    if not out and not _is_connected(network):
        out.append(Violation("Disconnected", "<network>",
                             "bus graph is not connected"))
    return out


def _is_connected(network: Network) -> bool:
    if network.n_buses <= 1:
        return True
    adj: dict[str, set[str]] = {b.id: set() for b in network.buses}
    for br in network.branches:
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    for xf in network.transformers:
        adj[xf.from_bus].add(xf.to_bus)
        adj[xf.to_bus].add(xf.from_bus)
    start = network.buses[0].id
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(adj)


def require_valid(network: Network) -> Network:
    """Raise ValidationError with all violations, or return the network."""
    violations = validate_network(network)
    if violations:
        raise ValidationError("; ".join(str(v) for v in violations))
    return network
