"""Quasi-static time-series driver and the sequential-placement experiment.

Each step: scale load and generation by the minute profiles, solve the
fundamental power flow, convert every device to its harmonic-domain
equivalent, solve one linear system per harmonic order, and record
monitor voltages and metrics. Orders whose right-hand side is identically
zero are skipped (the homogeneous system has the zero solution).

All per-order base matrices are assembled once up front; per-step work is
a diagonal shunt update plus one batched solve, which is what keeps a
1440-step day tractable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .devices import (
    EVModel,
    EVState,
    NortonLoadModel,
    PVModel,
    ev_grid_draw,
    ev_step,
    norton_admittance,
    pv_operating_point,
)
from .errors import (
    CollapsedVoltage,
    NonConvergence,
    SingularNetwork,
    ValidationError,
)
from .harmonics import RESIDUAL_TOL, assemble_harmonic_matrix
from .kernels import solve_shunted_batch
from .metrics import (
    DEFAULT_P_EC_R,
    HarmonicSet,
    eddy_current_loss,
    harmonic_eddy_component,
    summarize,
    thd,
)
from .network import (
    Network,
    _is_blocked_triplen,
    require_valid,
    thevenin_shunt,
    transformer_admittance,
    transformer_series_impedance,
)
from .powerflow import PowerInjection, solve_fundamental
from .spectrum import HarmonicSpectrum, wrap_angle

DEFAULT_DT = 60.0

#: Substation THD level flagged (not enforced) in propagation reports.
PROPAGATION_THD_FLAG_PCT = 5.0


@dataclass(frozen=True)
class LoadProfile:
    """Named multiplier series at 1-minute resolution."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValidationError(f"profile '{self.name}' must be a 1-D series")
        if np.any(self.values < 0):
            raise ValidationError(f"profile '{self.name}' has negative values")

    def value_at(self, t_seconds: float) -> float:
        minute = int(t_seconds // 60.0)
        return float(self.values[minute])

    @property
    def coverage_seconds(self) -> float:
        return self.values.size * 60.0


@dataclass
class Monitor:
    """Recorded complex voltages at one bus: fundamental plus each order."""

    bus: str
    orders: list[int]
    v1: np.ndarray          # (steps,) complex pu
    harmonics: np.ndarray   # (steps, n_orders) complex pu

    def voltage_set(self, step: int) -> HarmonicSet:
        comps = tuple(
            (h, float(np.abs(self.harmonics[step, i])))
            for i, h in enumerate(self.orders)
        )
        return HarmonicSet(fundamental=float(np.abs(self.v1[step])), components=comps)

    def thd_series(self) -> np.ndarray:
        mags = np.abs(self.harmonics)
        return 100.0 * np.sqrt((mags * mags).sum(axis=1)) / np.abs(self.v1)


@dataclass
class QstsResult:
    """Everything one run produced, series keyed by element name."""

    bus_order: list[str]
    orders: list[int]
    steps: int
    dt: float
    monitors: dict[str, Monitor]
    thd_pct: dict[str, np.ndarray]
    eddy_total: dict[str, np.ndarray]
    eddy_harmonic: dict[str, np.ndarray]
    ev_soc: dict[str, np.ndarray]
    fundamental_iterations: np.ndarray
    wall_time_s: float = 0.0

    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt

    def summaries(self) -> dict[str, dict]:
        """SeriesSummary per recorded series, keyed metric/element."""
        out: dict[str, dict] = {}
        for bus, series in self.thd_pct.items():
            out[f"thd_pct/{bus}"] = summarize(series)
        for name, series in self.eddy_total.items():
            out[f"eddy_total_pu/{name}"] = summarize(series)
        for name, series in self.eddy_harmonic.items():
            out[f"eddy_harmonic_pu/{name}"] = summarize(series)
        for name, series in self.ev_soc.items():
            out[f"ev_soc/{name}"] = summarize(series)
        return out


def default_orders(spectra: dict[str, HarmonicSpectrum]) -> list[int]:
    """Odd orders 3..49 plus every order any spectrum carries."""
    orders = set(range(3, 50, 2))
    for spec in spectra.values():
        orders.update(spec.harmonic_orders())
    return sorted(orders)


# ---------------------------------------------------------------------------
# Engine internals
# ---------------------------------------------------------------------------

class _Plan:
    """Per-run immutable precomputation shared by all steps."""

    def __init__(self, network, devices, profiles, spectra, orders,
                 polarity_shift):
        self.network = network
        self.orders = orders
        self.polarity_shift = polarity_shift
        n = network.n_buses
        self.grounded_slack = thevenin_shunt(network, 2.0) == 0
        self.keep = np.arange(n) != network.slack_index if self.grounded_slack \
            else np.ones(n, dtype=bool)
        self.col = {
            bus: int(np.sum(self.keep[: network.bus_index(bus)]))
            for bus in network.bus_order()
            if self.keep[network.bus_index(bus)]
        }
        self.m = int(self.keep.sum())
        self.slack_angle = network.source.voltage_angle

        self.loads = [d for d in devices if isinstance(d, NortonLoadModel)]
        self.pvs = [d for d in devices if isinstance(d, PVModel)]
        self.evs = [d for d in devices if isinstance(d, EVModel)]
        for dev in self.loads + self.pvs + self.evs:
            if dev.bus not in network.bus_order():
                raise ValidationError(f"device bus '{dev.bus}' not in network")
            if self.grounded_slack and dev.bus == network.slack_id:
                raise ValidationError(
                    f"device at slack bus '{dev.bus}' needs a nonzero source "
                    "impedance (the bus is a hard ground at harmonic orders)"
                )

        def need(name, table, what):
            if name not in table:
                raise ValidationError(f"{what} '{name}' is not loaded")
            return table[name]

        self.load_profile = [
            need(d.profile, profiles, "profile") if d.profile else None
            for d in self.loads
        ]
        self.load_spectrum = [
            need(d.spectrum, spectra, "spectrum") if d.spectrum else None
            for d in self.loads
        ]
        self.pv_profile = [
            need(d.profile, profiles, "profile") if d.profile else None
            for d in self.pvs
        ]
        self.pv_spectrum = [
            need(d.spectrum, spectra, "spectrum") if d.spectrum else None
            for d in self.pvs
        ]
        self.ev_avail = [
            need(d.availability, profiles, "profile") if d.availability else None
            for d in self.evs
        ]
        self.ev_spectrum = [
            need(d.spectrum, spectra, "spectrum") if d.spectrum else None
            for d in self.evs
        ]
        for kind, devs, specs in (("pv", self.pvs, self.pv_spectrum),
                                  ("ev", self.evs, self.ev_spectrum)):
            for dev, spec in zip(devs, specs):
                if spec is not None and dev.series_r == 0 and dev.series_x == 0:
                    raise ValidationError(
                        f"{kind} at {dev.bus} has a spectrum but zero series "
                        "impedance; the harmonic source needs one"
                    )

        korders = np.array(orders, dtype=float)
        # base matrix per order: network + source shunt + constant PV shunts
        mats = []
        for h in korders:
            y = assemble_harmonic_matrix(network, h)
            for pv, spec in zip(self.pvs, self.pv_spectrum):
                if spec is None:
                    continue
                z = complex(pv.series_r, h * pv.series_x) / network.impedance_base(pv.bus)
                i = network.bus_index(pv.bus)
                y[i, i] += 1.0 / z
            mats.append(y[self.keep][:, self.keep] if self.grounded_slack else y)
        self.base = np.array(mats)

        # unit-multiplier load admittance per (load, order), per-unit
        self.load_y = np.zeros((len(self.loads), len(orders)), dtype=complex)
        for li, load in enumerate(self.loads):
            v_rated = network.voltage_base(load.bus)
            scale_pu = v_rated * v_rated / network.base_va
            for oi, h in enumerate(korders):
                self.load_y[li, oi] = (
                    norton_admittance(load, v_rated, h) * scale_pu
                )
        self.load_col = np.array(
            [self.col[d.bus] for d in self.loads], dtype=int
        ) if self.loads else np.zeros(0, dtype=int)

        # spectrum lookup arrays per nonlinear load: (order index, K, angle)
        self.load_spec_arrays = [
            self._spectrum_arrays(spec) for spec in self.load_spectrum
        ]
        self.pv_spec_arrays = [
            self._spectrum_arrays(spec) for spec in self.pv_spectrum
        ]
        self.ev_spec_arrays = [
            self._spectrum_arrays(spec) for spec in self.ev_spectrum
        ]
        self.ev_z = [
            np.array([complex(d.series_r, h * d.series_x) for h in korders])
            / network.impedance_base(d.bus)
            for d in self.evs
        ]
        self.pv_z = [
            np.array([complex(d.series_r, h * d.series_x) for h in korders])
            / network.impedance_base(d.bus)
            for d in self.pvs
        ]

    def _spectrum_arrays(self, spec):
        if spec is None:
            return None
        pos, mult, ang = [], [], []
        index = {h: i for i, h in enumerate(self.orders)}
        for h in spec.harmonic_orders():
            if h in index:
                pos.append(index[h])
                mult.append(spec.multiplier(h))
                ang.append(spec.angle(h))
        return (np.array(pos, dtype=int), np.array(mult), np.array(ang))

    def shifted_source(self, arrays, fundamental: complex) -> tuple[np.ndarray, np.ndarray]:
        """(order positions, phasors) of one device's spectral sources."""
        pos, mult, ang = arrays
        k = np.array(self.orders, dtype=float)[pos]
        phi1 = np.degrees(np.angle(fundamental))
        angles = ang + k * (phi1 - self.slack_angle) + self.polarity_shift
        phasors = np.abs(fundamental) * mult * np.exp(1j * np.radians(angles))
        return pos, phasors


def run_qsts(
    network: Network,
    devices: list,
    profiles: dict[str, LoadProfile],
    spectra: dict[str, HarmonicSpectrum],
    steps: int,
    dt: float = DEFAULT_DT,
    harmonic_orders: list[int] | None = None,
    monitors: list[str] | None = None,
    polarity_shift: float = 180.0,
    p_ec_r: float = DEFAULT_P_EC_R,
    ev_initial_soc: float | None = None,
) -> QstsResult:
    """Simulate `steps` timesteps of dt seconds on a validated network.

    Deterministic: identical inputs give identical outputs (wall time is
    measured but carried outside the result series). Solver failures halt
    the run with the failing step attached to the exception.
    """
    t_start = time.perf_counter()
    require_valid(network)
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")

    orders = sorted(set(harmonic_orders)) if harmonic_orders else default_orders(spectra)
    if any(o < 2 for o in orders):
        raise ValidationError(f"harmonic orders must be >= 2, got {orders}")
    plan = _Plan(network, devices, profiles, spectra, orders, polarity_shift)

    horizon = steps * dt
    for prof in (plan.load_profile + plan.pv_profile + plan.ev_avail):
        if prof is not None and prof.coverage_seconds < horizon:
            raise ValidationError(
                f"profile '{prof.name}' covers {prof.coverage_seconds} s "
                f"but the horizon is {horizon} s"
            )

    monitor_buses = list(monitors) if monitors else network.bus_order()
    for bus in monitor_buses:
        if bus not in network.bus_order():
            raise ValidationError(f"monitor bus '{bus}' not in network")

    n_orders = len(orders)
    mon = {
        bus: Monitor(
            bus=bus,
            orders=list(orders),
            v1=np.zeros(steps, dtype=complex),
            harmonics=np.zeros((steps, n_orders), dtype=complex),
        )
        for bus in monitor_buses
    }
    xf_rows = _transformer_rows(network, orders)
    eddy_total = {name: np.zeros(steps) for name in xf_rows}
    eddy_harm = {name: np.zeros(steps) for name in xf_rows}
    ev_keys = [f"ev{i}@{d.bus}" for i, d in enumerate(plan.evs)]
    ev_soc = {key: np.zeros(steps) for key in ev_keys}
    ev_states = [d.initial_state(ev_initial_soc) for d in plan.evs]
    iterations = np.zeros(steps, dtype=int)

    for step in range(steps):
        t = step * dt
        try:
            v_full, volts, iters, ev_states = _solve_step(
                plan, t, dt, ev_states
            )
        except (NonConvergence, SingularNetwork, CollapsedVoltage) as exc:
            exc.step = step
            exc.args = (f"step {step} (t={t:.0f} s): {exc.args[0]}",) + exc.args[1:]
            raise
        iterations[step] = iters
        for bus, rec in mon.items():
            i = network.bus_index(bus)
            rec.v1[step] = v_full[i]
            rec.harmonics[step] = volts[:, i]
        for name, (i_row, blocked_rows, idx_f, idx_t) in xf_rows.items():
            i1 = abs(i_row[0][0] * v_full[idx_f] + i_row[0][1] * v_full[idx_t])
            comps = []
            for oi, h in enumerate(orders):
                row = blocked_rows[oi]
                ik = row[0] * volts[oi, idx_f] + row[1] * volts[oi, idx_t]
                comps.append((h, float(abs(ik))))
            hs = HarmonicSet(fundamental=float(i1), components=tuple(comps))
            eddy_total[name][step] = eddy_current_loss(hs, p_ec_r)
            eddy_harm[name][step] = harmonic_eddy_component(hs, p_ec_r)
        for key, state in zip(ev_keys, ev_states):
            ev_soc[key][step] = state.soc

    return QstsResult(
        bus_order=network.bus_order(),
        orders=list(orders),
        steps=steps,
        dt=dt,
        monitors=mon,
        thd_pct={bus: rec.thd_series() for bus, rec in mon.items()},
        eddy_total=eddy_total,
        eddy_harmonic=eddy_harm,
        ev_soc=ev_soc,
        fundamental_iterations=iterations,
        wall_time_s=time.perf_counter() - t_start,
    )


def _transformer_rows(network, orders):
    """Per transformer: to-side stamp rows at h=1 and at each order.

    Rows are per-unit on the transformer's own rating, so row @ [V_f, V_t]
    is the element current in per-unit of rated current, which is the
    base the eddy-loss factor expects.
    """
    out = {}
    for xf in network.transformers:
        rows = []
        for h in [1.0] + [float(o) for o in orders]:
            if _is_blocked_triplen(xf, h):
                y = 1.0 / transformer_series_impedance(xf, h)
                rows.append(np.array([0.0, y], dtype=complex))
            else:
                stamp = transformer_admittance(xf, h)
                rows.append(stamp[1])
        out[xf.name] = (
            rows[:1],
            rows[1:],
            network.bus_index(xf.from_bus),
            network.bus_index(xf.to_bus),
        )
    return out


def _solve_step(plan, t, dt, ev_states):
    """One timestep: fundamental solve, harmonic batch, EV advance."""
    network = plan.network
    orders = plan.orders
    n_orders = len(orders)

    load_mult = np.array([
        prof.value_at(t) if prof is not None else 1.0
        for prof in plan.load_profile
    ])
    injections = []
    load_s = []
    for load, mult in zip(plan.loads, load_mult):
        s = complex(load.p_rated, load.q_rated) * mult
        load_s.append(s)
        if s != 0:
            injections.append(PowerInjection(load.bus, s.real, s.imag))
    pv_p = []
    for pv, prof in zip(plan.pvs, plan.pv_profile):
        p, q = pv_operating_point(pv, prof.value_at(t) if prof else 1.0, t)
        pv_p.append(p)
        if p != 0 or q != 0:
            injections.append(PowerInjection(pv.bus, -p, -q))
    ev_draw = []
    for ev, avail_prof, state in zip(plan.evs, plan.ev_avail, ev_states):
        avail = avail_prof.value_at(t) if avail_prof is not None else 1.0
        if avail <= 0:
            ev_draw.append(0.0)
            continue
        draw = ev_grid_draw(ev, state, avail * ev.charge_power)
        ev_draw.append(draw)
        if draw > 0:
            injections.append(PowerInjection(ev.bus, draw, 0.0))

    fund = solve_fundamental(network, injections)
    v_full = fund.voltages

    # harmonic right-hand side and per-step diagonal shunts
    rhs = np.zeros((n_orders, plan.m), dtype=complex)
    shunts = np.zeros((n_orders, plan.m), dtype=complex)
    if plan.loads:
        scaled = plan.load_y * load_mult[:, None]          # (loads, orders)
        for li in range(len(plan.loads)):
            shunts[:, plan.load_col[li]] += scaled[li]
    for li, (load, s, arrays) in enumerate(
        zip(plan.loads, load_s, plan.load_spec_arrays)
    ):
        if arrays is None or s == 0:
            continue
        v_bus = v_full[network.bus_index(load.bus)]
        i1 = np.conj(s / network.base_va / v_bus)          # drawn, pu
        pos, phasors = plan.shifted_source(arrays, i1)
        rhs[pos, plan.load_col[li]] += phasors
    for pv, arrays, z_k, p in zip(plan.pvs, plan.pv_spec_arrays, plan.pv_z, pv_p):
        if arrays is None:
            continue
        col = plan.col[pv.bus]
        v_term = v_full[network.bus_index(pv.bus)]
        i_term = np.conj(complex(p, 0.0) / network.base_va / v_term)
        z1 = complex(pv.series_r, pv.series_x) / network.impedance_base(pv.bus)
        v_int = v_term + z1 * i_term
        pos, e_k = plan.shifted_source(arrays, v_int)
        rhs[pos, col] += e_k / z_k[pos]
    for ev, arrays, z_k, draw, state in zip(
        plan.evs, plan.ev_spec_arrays, plan.ev_z, ev_draw, ev_states
    ):
        if arrays is None or draw <= 0:
            continue
        col = plan.col[ev.bus]
        v_term = v_full[network.bus_index(ev.bus)]
        i_term = np.conj(complex(-draw, 0.0) / network.base_va / v_term)
        z1 = complex(ev.series_r, ev.series_x) / network.impedance_base(ev.bus)
        v_int = v_term + z1 * i_term
        pos, e_k = plan.shifted_source(arrays, v_int)
        rhs[pos, col] += e_k / z_k[pos]
        shunts[:, col] += 1.0 / z_k

    volts = np.zeros((n_orders, network.n_buses), dtype=complex)
    active = np.abs(rhs).max(axis=1) > 0 if plan.m else np.zeros(n_orders, bool)
    if active.any():
        x, residual, info = solve_shunted_batch(
            plan.base[active], shunts[active], rhs[active]
        )
        bad = np.flatnonzero(info != 0)
        if bad.size:
            h = np.array(orders)[active][bad[0]]
            raise SingularNetwork(f"Y(h={h}) is singular")
        worst = np.flatnonzero(residual >= RESIDUAL_TOL)
        if worst.size:
            h = np.array(orders)[active][worst[0]]
            raise SingularNetwork(
                f"solve at h={h} left residual {residual[worst[0]]:.3e}"
            )
        volts[np.ix_(active, plan.keep)] = x

    new_states = []
    for ev, avail_prof, state in zip(plan.evs, plan.ev_avail, ev_states):
        avail = avail_prof.value_at(t) if avail_prof is not None else 1.0
        if avail <= 0:
            new_states.append(state)
        else:
            new_states.append(ev_step(ev, state, avail * ev.charge_power, dt))
    return v_full, volts, fund.iterations, new_states


# ---------------------------------------------------------------------------
# Sequential placement
# ---------------------------------------------------------------------------

@dataclass
class PropagationResult:
    """Peak THD per monitor for each placement stage (stage 0 = baseline)."""

    placement_buses: list[str]
    monitor_buses: list[str]
    peaks: list[dict[str, float]]
    substation_bus: str
    threshold_pct: float = PROPAGATION_THD_FLAG_PCT
    threshold_stage: int | None = None

    def substation_peaks(self) -> list[float]:
        return [stage[self.substation_bus] for stage in self.peaks]


def thd_propagation(
    network: Network,
    devices: list,
    load_template: NortonLoadModel,
    placement_buses: list[str],
    profiles: dict[str, LoadProfile],
    spectra: dict[str, HarmonicSpectrum],
    steps: int,
    dt: float = DEFAULT_DT,
    harmonic_orders: list[int] | None = None,
    monitors: list[str] | None = None,
    polarity_shift: float = 180.0,
) -> PropagationResult:
    """Re-run the horizon with 0..N template loads placed cumulatively.

    Stage s activates the template at the first s placement buses on top
    of the baseline devices. Reports max-over-time THD per monitor per
    stage and the first stage at which the substation peak crosses the
    flag threshold (a report, not an error).
    """
    for bus in placement_buses:
        if bus not in network.bus_order():
            raise ValidationError(f"placement bus '{bus}' not in network")
    if not load_template.spectrum:
        raise ValidationError("propagation template load needs a spectrum")

    monitor_buses = list(monitors) if monitors else network.bus_order()
    peaks: list[dict[str, float]] = []
    for stage in range(len(placement_buses) + 1):
        placed = [
            replace(load_template, bus=bus)
            for bus in placement_buses[:stage]
        ]
        result = run_qsts(
            network,
            devices + placed,
            profiles,
            spectra,
            steps=steps,
            dt=dt,
            harmonic_orders=harmonic_orders,
            monitors=monitor_buses,
            polarity_shift=polarity_shift,
        )
        peaks.append({
            bus: float(np.max(result.thd_pct[bus])) for bus in monitor_buses
        })

    substation = network.slack_id
    threshold_stage = None
    if substation in (monitor_buses if monitors else network.bus_order()):
        for stage, stage_peaks in enumerate(peaks):
            if stage_peaks.get(substation, 0.0) > PROPAGATION_THD_FLAG_PCT:
                threshold_stage = stage
                break
    return PropagationResult(
        placement_buses=list(placement_buses),
        monitor_buses=monitor_buses,
        peaks=peaks,
        substation_bus=substation,
        threshold_stage=threshold_stage,
    )
