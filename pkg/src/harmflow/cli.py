"""Command-line interface: scan, solve, qsts, propagate, spectrum.

Every command reads one feeder JSON plus a resources directory and writes
CSV/JSON result files into --out. Numeric output is fixed at 9 significant
digits and documents carry no timestamps, so re-running a command with the
same inputs rewrites byte-identical files. Exit codes: 0 success, 2 input
or validation error, 3 numerical failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .devices import NortonLoadModel, PVModel, norton_admittance
from .errors import HarmflowError, NumericalError, ValidationError
from .feeder import (
    bundled_feeder_path,
    feeder_sha256,
    load_feeder,
    load_resources,
    load_waveform_csv,
    write_spectrum_csv,
)
from .harmonics import frequency_scan
from .kernels import backend_name
from .metrics import HarmonicSet, thd
from .network import Network
from .qsts import (
    PROPAGATION_THD_FLAG_PCT,
    default_orders,
    run_qsts,
    thd_propagation,
)
from .spectrum import DEFAULT_MAX_ORDER, DEFAULT_N_CYCLES, extract_spectrum


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _round9(obj):
    """Clamp every float in a JSON-ish document to 9 significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    return obj


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(_round9(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else _fmt(cell) for cell in row
        ))
    path.write_text("\n".join(lines) + "\n")


def _load_inputs(args):
    feeder_path = bundled_feeder_path() if args.feeder == "bundled" \
        else Path(args.feeder)
    if not feeder_path.is_file():
        raise ValidationError(f"feeder file '{feeder_path}' does not exist")
    network, devices = load_feeder(feeder_path)
    resources = Path(args.resources) if args.resources else feeder_path.parent
    profiles, spectra = load_resources(resources)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_doc = {
        "tool_version": __version__,
        "feeder": str(args.feeder),
        "feeder_sha256": feeder_sha256(feeder_path),
        "resources": str(resources),
        "backend": backend_name(),
    }
    return network, devices, profiles, spectra, out_dir, base_doc


def _summary_name_check(network, devices, spectra, profiles):
    """Fail fast when a device names a resource that did not load."""
    for dev in devices:
        spec = getattr(dev, "spectrum", "")
        if spec and spec not in spectra:
            raise ValidationError(
                f"device at {dev.bus} references missing spectrum '{spec}'"
            )
        for attr in ("profile", "availability"):
            name = getattr(dev, attr, "")
            if name and name not in profiles:
                raise ValidationError(
                    f"device at {dev.bus} references missing profile '{name}'"
                )


def _scan_shunt_fn(network: Network, devices, profiles):
    """Damping shunts for scans: t=0 loads plus PV converter impedances."""
    loads = [d for d in devices if isinstance(d, NortonLoadModel)]
    pvs = [d for d in devices if isinstance(d, PVModel) and d.spectrum]

    def shunts(h):
        out = []
        for load in loads:
            mult = profiles[load.profile].value_at(0.0) if load.profile else 1.0
            if load.p_rated * mult == 0 and load.q_rated * mult == 0:
                continue
            v = network.voltage_base(load.bus)
            y = norton_admittance(load, v, h, mult)
            out.append((load.bus, y * v * v / network.base_va))
        for pv in pvs:
            z = complex(pv.series_r, h * pv.series_x)
            out.append((pv.bus, network.impedance_base(pv.bus) / z))
        return out

    return shunts


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_scan(args) -> int:
    network, devices, profiles, spectra, out_dir, doc = _load_inputs(args)
    _summary_name_check(network, devices, spectra, profiles)
    if args.bus not in network.bus_order():
        raise ValidationError(f"scan bus '{args.bus}' not in network")
    if args.fmin >= args.fmax:
        raise ValidationError(f"--fmin {args.fmin} must be below --fmax {args.fmax}")
    if args.step <= 0:
        raise ValidationError(f"--step must be positive, got {args.step}")
    curve = frequency_scan(
        network, args.bus, args.fmin, args.fmax, args.step,
        device_shunts=_scan_shunt_fn(network, devices, profiles),
    )
    csv_path = out_dir / f"scan_{args.bus}.csv"
    _write_csv(
        csv_path,
        ["frequency_hz", "z_real_ohm", "z_imag_ohm", "z_mag_ohm"],
        [(f, z.real, z.imag, abs(z)) for f, z in curve.points],
    )
    peak_f, peak_z = curve.peak()
    doc.update({
        "command": "scan",
        "options": {"bus": args.bus, "fmin": args.fmin, "fmax": args.fmax,
                    "step": args.step},
        "points": len(curve.points),
        "failures": [{"frequency_hz": f, "reason": r} for f, r in curve.failures],
        "peak": {"frequency_hz": peak_f, "z_mag_ohm": abs(peak_z)},
        "files": [csv_path.name],
    })
    _write_json(out_dir / "summary.json", doc)
    print(f"scan: {len(curve.points)} points -> {csv_path}")
    print(f"scan: |Z| peaks at {peak_f:.9g} Hz ({abs(peak_z):.9g} ohm)")
    return 0


def cmd_solve(args) -> int:
    network, devices, profiles, spectra, out_dir, doc = _load_inputs(args)
    _summary_name_check(network, devices, spectra, profiles)
    orders = _parse_orders(args.orders) if args.orders else None
    result = run_qsts(
        network, devices, profiles, spectra,
        steps=1, dt=60.0, harmonic_orders=orders,
    )
    files = []
    for oi, order in enumerate(result.orders):
        rows = []
        for bus in result.bus_order:
            v = result.monitors[bus].harmonics[0, oi]
            rows.append((bus, v.real, v.imag, abs(v)))
        path = out_dir / f"harmonics_h{order}.csv"
        _write_csv(path, ["bus", "v_real_pu", "v_imag_pu", "v_mag_pu"], rows)
        files.append(path.name)
    fundamental_rows = [
        (bus, result.monitors[bus].v1[0].real, result.monitors[bus].v1[0].imag,
         abs(result.monitors[bus].v1[0]))
        for bus in result.bus_order
    ]
    path = out_dir / "fundamental.csv"
    _write_csv(path, ["bus", "v_real_pu", "v_imag_pu", "v_mag_pu"], fundamental_rows)
    files.append(path.name)
    doc.update({
        "command": "solve",
        "options": {"orders": result.orders},
        "thd_pct": {bus: float(result.thd_pct[bus][0]) for bus in result.bus_order},
        "eddy_total_pu": {k: float(v[0]) for k, v in result.eddy_total.items()},
        "eddy_harmonic_pu": {k: float(v[0]) for k, v in result.eddy_harmonic.items()},
        "files": files,
    })
    _write_json(out_dir / "summary.json", doc)
    worst = max(doc["thd_pct"], key=doc["thd_pct"].get)
    print(f"solve: {len(result.orders)} orders, "
          f"max THD {doc['thd_pct'][worst]:.9g}% at bus {worst}")
    return 0


def cmd_qsts(args) -> int:
    network, devices, profiles, spectra, out_dir, doc = _load_inputs(args)
    _summary_name_check(network, devices, spectra, profiles)
    monitors = args.monitors.split(",") if args.monitors else None
    result = run_qsts(
        network, devices, profiles, spectra,
        steps=args.steps, dt=args.dt, monitors=monitors,
    )
    files = []
    for bus, monitor in result.monitors.items():
        header = ["step", "time_s", "v1_pu", "thd_pct"] + [
            f"h{o}_pu" for o in result.orders
        ]
        mags = np.abs(monitor.harmonics)
        thd_series = result.thd_pct[bus]
        rows = [
            tuple([str(s), s * result.dt, float(np.abs(monitor.v1[s])),
                   float(thd_series[s])] + [float(m) for m in mags[s]])
            for s in range(result.steps)
        ]
        path = out_dir / f"monitor_{bus}.csv"
        _write_csv(path, header, rows)
        files.append(path.name)
    if result.eddy_total:
        header = ["step", "time_s"]
        columns = []
        for name in sorted(result.eddy_total):
            header += [f"eddy_total_pu_{name}", f"eddy_harmonic_pu_{name}"]
            columns += [result.eddy_total[name], result.eddy_harmonic[name]]
        rows = [
            tuple([str(s), s * result.dt] + [float(c[s]) for c in columns])
            for s in range(result.steps)
        ]
        path = out_dir / "eddy.csv"
        _write_csv(path, header, rows)
        files.append(path.name)
    if result.ev_soc:
        header = ["step", "time_s"] + [f"soc_{k}" for k in sorted(result.ev_soc)]
        series = [result.ev_soc[k] for k in sorted(result.ev_soc)]
        rows = [
            tuple([str(s), s * result.dt] + [float(c[s]) for c in series])
            for s in range(result.steps)
        ]
        path = out_dir / "ev_soc.csv"
        _write_csv(path, header, rows)
        files.append(path.name)

    summaries = result.summaries()
    box_rows = [
        (key, s.min, s.q1, s.median, s.q3, s.max, s.mean)
        for key, s in sorted(summaries.items())
    ]
    path = out_dir / "boxplot.csv"
    _write_csv(path, ["metric", "min", "q1", "median", "q3", "max", "mean"], box_rows)
    files.append(path.name)

    doc.update({
        "command": "qsts",
        "options": {"steps": result.steps, "dt": result.dt,
                    "orders": result.orders,
                    "monitors": sorted(result.monitors)},
        "summaries": {
            key: {"min": s.min, "q1": s.q1, "median": s.median,
                  "q3": s.q3, "max": s.max, "mean": s.mean}
            for key, s in summaries.items()
        },
        "files": sorted(files),
    })
    _write_json(out_dir / "summary.json", doc)
    peak_bus = max(result.thd_pct, key=lambda b: result.thd_pct[b].max())
    print(f"qsts: {result.steps} steps x {len(result.orders)} orders "
          f"in {result.wall_time_s:.2f} s")
    print(f"qsts: peak THD {result.thd_pct[peak_bus].max():.9g}% at bus {peak_bus}")
    return 0


def cmd_propagate(args) -> int:
    network, devices, profiles, spectra, out_dir, doc = _load_inputs(args)
    _summary_name_check(network, devices, spectra, profiles)
    placements = [b.strip() for b in args.placements.split(",") if b.strip()]
    if not placements:
        raise ValidationError("--placements must list at least one bus")
    template = NortonLoadModel(
        bus=placements[0],
        p_rated=args.template_kw * 1e3,
        q_rated=args.template_kvar * 1e3,
        series_fraction=args.template_mix,
        spectrum=args.template_spectrum,
        profile=args.template_profile,
    )
    monitors = args.monitors.split(",") if args.monitors else None
    result = thd_propagation(
        network, devices, template, placements, profiles, spectra,
        steps=args.steps, dt=args.dt, monitors=monitors,
    )
    rows = []
    for stage, peaks in enumerate(result.peaks):
        for bus in result.monitor_buses:
            rows.append((str(stage), bus, peaks[bus]))
    path = out_dir / "propagation.csv"
    _write_csv(path, ["stage", "bus", "peak_thd_pct"], rows)
    doc.update({
        "command": "propagate",
        "options": {"placements": placements, "steps": args.steps, "dt": args.dt,
                    "template_kw": args.template_kw,
                    "template_kvar": args.template_kvar,
                    "template_mix": args.template_mix,
                    "template_spectrum": args.template_spectrum,
                    "template_profile": args.template_profile},
        "substation_bus": result.substation_bus,
        "substation_peaks_pct": result.substation_peaks(),
        "threshold_pct": result.threshold_pct,
        "threshold_stage": result.threshold_stage,
        "files": [path.name],
    })
    _write_json(out_dir / "summary.json", doc)
    print(f"propagate: {len(placements)} placements, substation peaks "
          + ", ".join(f"{p:.3f}%" for p in result.substation_peaks()))
    if result.threshold_stage is None:
        print(f"propagate: substation peak never exceeded "
              f"{PROPAGATION_THD_FLAG_PCT}%")
    else:
        print(f"propagate: substation peak first exceeded "
              f"{PROPAGATION_THD_FLAG_PCT}% at stage {result.threshold_stage}")
    return 0


def cmd_spectrum(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    waveform_path = Path(args.waveform)
    if not waveform_path.is_file():
        raise ValidationError(f"waveform file '{waveform_path}' does not exist")
    waveform = load_waveform_csv(waveform_path, quantity=args.quantity)
    spectrum = extract_spectrum(
        waveform, f0=args.f0, n_cycles=args.cycles, max_order=args.max_order
    )
    csv_path = out_dir / f"spectrum_{waveform_path.stem}.csv"
    write_spectrum_csv(csv_path, spectrum)
    mags = {o: spectrum.multiplier(o) for o in spectrum.orders()}
    distortion = thd(HarmonicSet.from_magnitudes(mags))
    doc = {
        "command": "spectrum",
        "tool_version": __version__,
        "waveform": str(args.waveform),
        "options": {"f0": args.f0, "cycles": args.cycles,
                    "max_order": args.max_order, "quantity": args.quantity},
        "sample_rate_hz": waveform.sample_rate,
        "orders": spectrum.orders(),
        "thd_pct": distortion,
        "files": [csv_path.name],
    }
    _write_json(out_dir / "summary.json", doc)
    print(f"spectrum: {len(spectrum.orders())} orders, THD {distortion:.9g}% "
          f"-> {csv_path}")
    return 0


def _parse_orders(text: str) -> list[int]:
    try:
        orders = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValidationError(f"--orders must be comma-separated integers, got '{text}'")
    if not orders or any(o < 2 for o in orders):
        raise ValidationError(f"--orders must all be >= 2, got '{text}'")
    return orders


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmflow",
        description="Quasi-static time-series harmonic power flow "
                    "for radial distribution feeders",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--feeder", default="bundled",
                       help="feeder JSON path, or 'bundled' for the packaged example")
        p.add_argument("--resources", default=None,
                       help="resources directory (default: the feeder's directory)")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("scan", help="frequency scan at one bus")
    common(p)
    p.add_argument("--bus", required=True)
    p.add_argument("--fmin", type=float, default=60.0)
    p.add_argument("--fmax", type=float, default=3000.0)
    p.add_argument("--step", type=float, default=10.0)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("solve", help="single static harmonic solution")
    common(p)
    p.add_argument("--orders", default=None,
                   help="comma-separated harmonic orders (default: odd 3..49 "
                        "plus spectrum orders)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("qsts", help="time-series simulation")
    common(p)
    p.add_argument("--steps", type=int, default=1440)
    p.add_argument("--dt", type=float, default=60.0)
    p.add_argument("--monitors", default=None,
                   help="comma-separated monitor buses (default: all)")
    p.set_defaults(func=cmd_qsts)

    p = sub.add_parser("propagate", help="sequential nonlinear-load placement")
    common(p)
    p.add_argument("--placements", required=True,
                   help="comma-separated buses, placed cumulatively in order")
    p.add_argument("--steps", type=int, default=1440)
    p.add_argument("--dt", type=float, default=60.0)
    p.add_argument("--monitors", default=None)
    p.add_argument("--template-kw", type=float, default=300.0)
    p.add_argument("--template-kvar", type=float, default=150.0)
    p.add_argument("--template-mix", type=float, default=0.5)
    p.add_argument("--template-spectrum", default="scenario2")
    p.add_argument("--template-profile", default="")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("spectrum", help="extract a spectrum from a waveform CSV")
    p.add_argument("--waveform", required=True)
    p.add_argument("--f0", type=float, default=60.0)
    p.add_argument("--cycles", type=int, default=DEFAULT_N_CYCLES)
    p.add_argument("--max-order", type=int, default=DEFAULT_MAX_ORDER)
    p.add_argument("--quantity", choices=("current", "voltage"), default="current")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_spectrum)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        extra = ""
        iters = getattr(exc, "iterations", None)
        if iters is not None:
            extra = f" (after {iters} iterations, mismatch {exc.mismatch:.3e})"
        print(f"numerical failure: {exc}{extra}", file=sys.stderr)
        return 3
    except HarmflowError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
