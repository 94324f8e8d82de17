"""Fundamental-frequency power flow by fixed-point current injection.

Solves the nonlinear nodal equations on the slack-partitioned system:
with the slack voltage pinned, iterate

    I_ns = conj(S / V_ns)          (constant-power injections)
    V_ns <- Yns_ns^-1 (I_ns - Yns_s * V_s)

until the largest voltage update falls below tolerance. Radial feeders
with sane loading converge in a handful of iterations; divergence is
reported, not silently clipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CollapsedVoltage, NonConvergence, SingularNetwork
from .network import Network, build_admittance

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITER = 100

#: Iteration aborts if any bus magnitude drops below this floor (pu); a
#: constant-power load below it is past the nose of the PV curve.
VOLTAGE_FLOOR = 0.1


@dataclass(frozen=True)
class PowerInjection:
    """Net constant-power draw at a bus (positive = consumption), Watts/vars."""

    bus: str
    active_power: float
    reactive_power: float


@dataclass
class FundamentalSolution:
    """Converged fundamental state in canonical bus order."""

    bus_order: list[str]
    voltages: np.ndarray          # complex per-unit, canonical order
    iterations: int
    mismatch: float               # max |V_new - V_old| at exit, pu
    converged: bool
    injected_currents: np.ndarray = field(default=None)  # complex pu

    def voltage(self, bus_id: str) -> complex:
        return complex(self.voltages[self.bus_order.index(bus_id)])


def nodal_current(power: complex, voltage: complex) -> complex:
    """Constant-power nodal current: I = conj(S/V) = (P - jQ) / conj(V).

    Sign convention: S is consumption, I is the current drawn from the
    bus, so the injection into the network is -I.
    """
    if voltage == 0:
        raise CollapsedVoltage("nodal current undefined at V = 0")
    return np.conj(power / voltage)


def solve_fundamental(
    network: Network,
    injections: list[PowerInjection],
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FundamentalSolution:
    """Run the fixed-point iteration from a flat start.

    Injections are aggregated per bus and normalized to the network power
    base. Raises NonConvergence when max_iter is exhausted and
    CollapsedVoltage when any magnitude crosses the floor, with the
    iteration count and final mismatch attached.
    """
    order = network.bus_order()
    n = len(order)
    y = build_admittance(network, 1.0).toarray()

    src = network.source
    v_slack = src.voltage_mag * np.exp(1j * np.deg2rad(src.voltage_angle))

    s_pu = np.zeros(n, dtype=complex)
    for inj in injections:
        i = network.bus_index(inj.bus)
        s_pu[i] += complex(inj.active_power, inj.reactive_power) / network.base_va

    ns = np.arange(n) != network.slack_index
    y_ns_ns = y[np.ix_(ns, ns)]
    y_ns_s = y[ns, network.slack_index]
    try:
        lu = sp.linalg.splu(sp.csc_matrix(y_ns_ns))
    except RuntimeError as exc:
        raise SingularNetwork(f"non-slack admittance block is singular: {exc}")

    v = np.full(ns.sum(), v_slack, dtype=complex)
    s_ns = s_pu[ns]
    mismatch = np.inf
    for it in range(1, max_iter + 1):
        i_drawn = np.conj(s_ns / v)
        v_new = lu.solve(-i_drawn - y_ns_s * v_slack)
        mismatch = float(np.max(np.abs(v_new - v)))
        v = v_new
        if np.min(np.abs(v)) < VOLTAGE_FLOOR:
            raise CollapsedVoltage(
                f"voltage magnitude fell below {VOLTAGE_FLOOR} pu "
                f"after {it} iterations (load beyond feeder capability)"
            )
        if mismatch < tolerance:
            break
    else:
        raise NonConvergence(
            f"fixed point not reached in {max_iter} iterations "
            f"(last update {mismatch:.3e} pu)",
            iterations=max_iter,
            mismatch=mismatch,
        )

    voltages = np.empty(n, dtype=complex)
    voltages[network.slack_index] = v_slack
    voltages[ns] = v
    currents = np.zeros(n, dtype=complex)
    nonzero = s_pu != 0
    currents[nonzero] = -np.conj(s_pu[nonzero] / voltages[nonzero])
    return FundamentalSolution(
        bus_order=order,
        voltages=voltages,
        iterations=it,
        mismatch=mismatch,
        converged=True,
        injected_currents=currents,
    )
