"""Feeder file and resource ingestion.

The feeder is one JSON document (schema in docs/feeder_format.md) with
top-level sections buses, branches, transformers, capacitors, source,
loads, devices. Parsing is strict: unknown keys anywhere are rejected, so
typos fail loudly instead of silently dropping an element.

Resources live in a directory with profiles/ (CSV, header `multiplier`,
one row per minute), spectra/ (CSV order,percent,angle_deg) and optional
waveforms/ (CSV time_s,value); names are file stems.
"""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources as importlib_resources
from pathlib import Path

import numpy as np

from .devices import EVModel, NortonLoadModel, PVModel
from .errors import ValidationError
from .network import (
    Branch,
    Bus,
    CapacitorBank,
    Network,
    SourceEquivalent,
    TransformerBranch,
    require_valid,
)
from .qsts import LoadProfile
from .spectrum import HarmonicSpectrum, WaveformRecord

_NUMBER = (int, float)


def _fields(obj, context, required, optional=()):
    """Strict key check: everything in required present, nothing unknown."""
    if not isinstance(obj, dict):
        raise ValidationError(f"{context}: expected an object, got {type(obj).__name__}")
    known = set(required) | set(optional)
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ValidationError(f"{context}: unknown keys {unknown}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ValidationError(f"{context}: missing keys {missing}")
    return obj


def _num(obj, key, context):
    v = obj[key]
    if not isinstance(v, _NUMBER) or isinstance(v, bool):
        raise ValidationError(f"{context}: '{key}' must be a number, got {v!r}")
    return float(v)


def _str(obj, key, context):
    v = obj[key]
    if not isinstance(v, str):
        raise ValidationError(f"{context}: '{key}' must be a string, got {v!r}")
    return v


def _bool(obj, key, context, default=False):
    v = obj.get(key, default)
    if not isinstance(v, bool):
        raise ValidationError(f"{context}: '{key}' must be a boolean, got {v!r}")
    return v


# ---------------------------------------------------------------------------
# Feeder JSON
# ---------------------------------------------------------------------------

_TOP_KEYS = (
    "buses", "branches", "transformers", "capacitors", "source",
    "loads", "devices",
)
_TOP_OPTIONAL = ("name", "base_frequency_hz", "base_mva")


def parse_feeder(doc: dict, name: str = "") -> tuple[Network, list]:
    """Build a validated Network plus device list from a parsed document."""
    _fields(doc, "feeder", required=("buses", "source"),
            optional=tuple(k for k in _TOP_KEYS if k not in ("buses", "source"))
            + _TOP_OPTIONAL)

    buses = []
    for i, raw in enumerate(doc["buses"]):
        ctx = f"buses[{i}]"
        _fields(raw, ctx, required=("id", "nominal_kv"), optional=("slack",))
        buses.append(Bus(
            id=_str(raw, "id", ctx),
            nominal_voltage=_num(raw, "nominal_kv", ctx) * 1e3,
            is_slack=_bool(raw, "slack", ctx),
        ))

    branches = []
    for i, raw in enumerate(doc.get("branches", [])):
        ctx = f"branches[{i}]"
        _fields(raw, ctx, required=("from", "to", "r_ohm", "x_ohm"),
                optional=("b_siemens",))
        branches.append(Branch(
            from_bus=_str(raw, "from", ctx),
            to_bus=_str(raw, "to", ctx),
            resistance=_num(raw, "r_ohm", ctx),
            reactance=_num(raw, "x_ohm", ctx),
            shunt_susceptance=_num(raw, "b_siemens", ctx) if "b_siemens" in raw else 0.0,
        ))

    transformers = []
    for i, raw in enumerate(doc.get("transformers", [])):
        ctx = f"transformers[{i}]"
        _fields(raw, ctx,
                required=("from", "to", "rated_kva", "leakage_r_pu", "leakage_x_pu"),
                optional=("turns_ratio", "constant_xr", "blocks_triplen"))
        transformers.append(TransformerBranch(
            from_bus=_str(raw, "from", ctx),
            to_bus=_str(raw, "to", ctx),
            rated_kva=_num(raw, "rated_kva", ctx),
            leakage_r=_num(raw, "leakage_r_pu", ctx),
            leakage_x=_num(raw, "leakage_x_pu", ctx),
            turns_ratio=_num(raw, "turns_ratio", ctx) if "turns_ratio" in raw else 1.0,
            constant_xr=_bool(raw, "constant_xr", ctx),
            blocks_triplen=_bool(raw, "blocks_triplen", ctx),
        ))

    capacitors = []
    bus_kv = {b.id: b.nominal_voltage for b in buses}
    for i, raw in enumerate(doc.get("capacitors", [])):
        ctx = f"capacitors[{i}]"
        _fields(raw, ctx, required=("bus",), optional=("kvar", "b_siemens"))
        has_kvar = "kvar" in raw
        if has_kvar == ("b_siemens" in raw):
            raise ValidationError(f"{ctx}: give exactly one of 'kvar' or 'b_siemens'")
        bus = _str(raw, "bus", ctx)
        if has_kvar:
            if bus not in bus_kv:
                raise ValidationError(f"{ctx}: unknown bus '{bus}'")
            v = bus_kv[bus]
            b = _num(raw, "kvar", ctx) * 1e3 / (v * v)
        else:
            b = _num(raw, "b_siemens", ctx)
        capacitors.append(CapacitorBank(bus=bus, susceptance=b))

    raw = doc["source"]
    ctx = "source"
    _fields(raw, ctx, required=("bus",),
            optional=("voltage_pu", "angle_deg", "thevenin_r_ohm", "thevenin_x_ohm"))
    source = SourceEquivalent(
        bus=_str(raw, "bus", ctx),
        voltage_mag=_num(raw, "voltage_pu", ctx) if "voltage_pu" in raw else 1.0,
        voltage_angle=_num(raw, "angle_deg", ctx) if "angle_deg" in raw else 0.0,
        thevenin_r=_num(raw, "thevenin_r_ohm", ctx) if "thevenin_r_ohm" in raw else 0.0,
        thevenin_x=_num(raw, "thevenin_x_ohm", ctx) if "thevenin_x_ohm" in raw else 0.0,
    )

    network = Network(
        buses=buses,
        branches=branches,
        transformers=transformers,
        capacitor_banks=capacitors,
        source=source,
        base_frequency=float(doc.get("base_frequency_hz", 60.0)),
        per_unit_base_mva=float(doc.get("base_mva", 1.0)),
        name=str(doc.get("name", name)),
    )
    require_valid(network)

    devices: list = []
    for i, raw in enumerate(doc.get("loads", [])):
        ctx = f"loads[{i}]"
        _fields(raw, ctx, required=("bus", "p_kw", "q_kvar"),
                optional=("profile", "series_fraction"))
        devices.append(NortonLoadModel(
            bus=_str(raw, "bus", ctx),
            p_rated=_num(raw, "p_kw", ctx) * 1e3,
            q_rated=_num(raw, "q_kvar", ctx) * 1e3,
            series_fraction=_num(raw, "series_fraction", ctx)
            if "series_fraction" in raw else 0.5,
            profile=_str(raw, "profile", ctx) if "profile" in raw else "",
        ))
    for i, raw in enumerate(doc.get("devices", [])):
        ctx = f"devices[{i}]"
        if not isinstance(raw, dict) or "type" not in raw:
            raise ValidationError(f"{ctx}: needs a 'type' key")
        kind = raw["type"]
        if kind == "norton_load":
            _fields(raw, ctx, required=("type", "bus", "p_kw", "q_kvar", "spectrum"),
                    optional=("series_fraction", "profile"))
            devices.append(NortonLoadModel(
                bus=_str(raw, "bus", ctx),
                p_rated=_num(raw, "p_kw", ctx) * 1e3,
                q_rated=_num(raw, "q_kvar", ctx) * 1e3,
                series_fraction=_num(raw, "series_fraction", ctx)
                if "series_fraction" in raw else 0.5,
                spectrum=_str(raw, "spectrum", ctx),
                profile=_str(raw, "profile", ctx) if "profile" in raw else "",
            ))
        elif kind == "pv":
            _fields(raw, ctx, required=("type", "bus", "s_kva", "profile"),
                    optional=("spectrum", "series_r_ohm", "series_x_ohm"))
            devices.append(PVModel(
                bus=_str(raw, "bus", ctx),
                s_rating=_num(raw, "s_kva", ctx) * 1e3,
                profile=_str(raw, "profile", ctx),
                spectrum=_str(raw, "spectrum", ctx) if "spectrum" in raw else "",
                series_r=_num(raw, "series_r_ohm", ctx) if "series_r_ohm" in raw else 0.0,
                series_x=_num(raw, "series_x_ohm", ctx) if "series_x_ohm" in raw else 0.0,
            ))
        elif kind == "ev":
            _fields(raw, ctx, required=("type", "bus", "capacity_kwh", "charge_kw"),
                    optional=("soc_min", "soc_max", "soc_target", "eta_inv",
                              "eta_ch", "p_idle_w", "spectrum", "availability",
                              "series_r_ohm", "series_x_ohm"))
            devices.append(EVModel(
                bus=_str(raw, "bus", ctx),
                capacity=_num(raw, "capacity_kwh", ctx) * 1e3,
                charge_power=_num(raw, "charge_kw", ctx) * 1e3,
                soc_min=_num(raw, "soc_min", ctx) if "soc_min" in raw else 0.1,
                soc_max=_num(raw, "soc_max", ctx) if "soc_max" in raw else 1.0,
                soc_target=_num(raw, "soc_target", ctx) if "soc_target" in raw else 0.95,
                eta_inv=_num(raw, "eta_inv", ctx) if "eta_inv" in raw else 0.96,
                eta_ch=_num(raw, "eta_ch", ctx) if "eta_ch" in raw else 0.95,
                p_idle=_num(raw, "p_idle_w", ctx) if "p_idle_w" in raw else 100.0,
                spectrum=_str(raw, "spectrum", ctx) if "spectrum" in raw else "",
                availability=_str(raw, "availability", ctx) if "availability" in raw else "",
                series_r=_num(raw, "series_r_ohm", ctx) if "series_r_ohm" in raw else 0.0,
                series_x=_num(raw, "series_x_ohm", ctx) if "series_x_ohm" in raw else 0.0,
            ))
        else:
            raise ValidationError(
                f"{ctx}: unknown device type '{kind}' "
                "(expected norton_load, pv or ev)"
            )
    known_buses = set(bus_kv)
    for dev in devices:
        if dev.bus not in known_buses:
            raise ValidationError(f"device/load references unknown bus '{dev.bus}'")
    return network, devices


def load_feeder(path) -> tuple[Network, list]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})")
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return parse_feeder(doc, name=path.stem)


def feeder_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Resources
# ---------------------------------------------------------------------------

def load_profile_csv(path) -> LoadProfile:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["multiplier"]:
            raise ValidationError(
                f"{path}: profile CSV must have the single header 'multiplier'"
            )
        try:
            values = [float(row[0]) for row in reader if row]
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path}: bad profile row ({exc})")
    return LoadProfile(name=path.stem, values=np.array(values))


def load_spectrum_csv(path, kind: str = "current") -> HarmonicSpectrum:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["order", "percent", "angle_deg"]:
            raise ValidationError(
                f"{path}: spectrum CSV must have header order,percent,angle_deg"
            )
        entries = []
        for row in reader:
            if not row:
                continue
            try:
                entries.append((int(row[0]), float(row[1]) / 100.0, float(row[2])))
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}: bad spectrum row {row} ({exc})")
    try:
        return HarmonicSpectrum(entries=tuple(entries), kind=kind, name=path.stem)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}")


def write_spectrum_csv(path, spectrum: HarmonicSpectrum) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "percent", "angle_deg"])
        for order, mult, angle in spectrum.entries:
            writer.writerow([order, f"{mult * 100.0:.9g}", f"{angle:.9g}"])


def load_waveform_csv(path, quantity: str = "current") -> WaveformRecord:
    path = Path(path)
    times, values = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["time_s", "value"]:
            raise ValidationError(f"{path}: waveform CSV must have header time_s,value")
        for row in reader:
            if not row:
                continue
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}: bad waveform row {row} ({exc})")
    if len(times) < 2:
        raise ValidationError(f"{path}: waveform needs at least two samples")
    dt = np.diff(times)
    # tolerance leaves room for text-format rounding of the time stamps
    mean_dt = float(np.mean(dt))
    if mean_dt <= 0.0 or np.max(np.abs(dt - mean_dt)) > 1e-6 * mean_dt:
        raise ValidationError(f"{path}: waveform samples are not uniformly spaced")
    return WaveformRecord(
        sample_rate=1.0 / mean_dt, samples=np.array(values), quantity=quantity
    )


def write_waveform_csv(path, waveform: WaveformRecord) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "value"])
        for i, v in enumerate(waveform.samples):
            writer.writerow([f"{i / waveform.sample_rate:.12g}", f"{v:.9g}"])


def load_resources(root) -> tuple[dict[str, LoadProfile], dict[str, HarmonicSpectrum]]:
    """Load every profile and spectrum under a resources directory.

    Spectra whose file stem contains 'voltage' load as voltage spectra;
    everything else is a current spectrum.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"resources directory '{root}' does not exist")
    profiles: dict[str, LoadProfile] = {}
    spectra: dict[str, HarmonicSpectrum] = {}
    prof_dir = root / "profiles"
    if prof_dir.is_dir():
        for path in sorted(prof_dir.glob("*.csv")):
            profiles[path.stem] = load_profile_csv(path)
    spec_dir = root / "spectra"
    if spec_dir.is_dir():
        for path in sorted(spec_dir.glob("*.csv")):
            kind = "voltage" if "voltage" in path.stem else "current"
            spectra[path.stem] = load_spectrum_csv(path, kind=kind)
    return profiles, spectra


def bundled_data_dir() -> Path:
    """Directory holding the packaged example feeder and its resources."""
    return Path(importlib_resources.files("harmflow") / "data")


def bundled_feeder_path() -> Path:
    return bundled_data_dir() / "feeder34.json"
