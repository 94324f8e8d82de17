"""Regenerate the bundled feeder, profiles, spectra and demo waveform.

The shipped files under src/harmflow/data/ are frozen artifacts of this
script. Rerunning it reproduces them byte-identically; edit here, rerun,
and commit the result rather than hand-editing the data.

The feeder is a 34-bus-style radial MV network (24.9 kV class, single
slack, two delta-primary transformers, two capacitor banks) with an LV
service bus carrying the PV/EV/household devices. Capacitor sizes are
tuned by bisection so the driving-point impedance at the main capacitor
bus peaks near 25 times the fundamental; everything else is fixed data.
The load profiles and device spectra are synthetic reconstructions shaped
to the qualitative features the simulator is exercised against, not
measurements.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from harmflow.feeder import parse_feeder, write_waveform_csv
from harmflow.cli import _scan_shunt_fn
from harmflow.harmonics import frequency_scan
from harmflow.qsts import LoadProfile
from harmflow.spectrum import HarmonicSpectrum, synthesize_waveform

DATA = Path(__file__).resolve().parent.parent / "src" / "harmflow" / "data"

PCC_BUS = "844"
TARGET_PEAK_HZ = 1500.0

# (from, to, length in feet); impedances below are per 1000 ft
SEGMENTS = [
    ("800", "802", 2580), ("802", "806", 1730), ("806", "808", 32230),
    ("808", "810", 5804), ("808", "812", 37500), ("812", "814", 29730),
    ("814", "850", 10), ("850", "816", 310), ("816", "818", 1710),
    ("818", "820", 48150), ("820", "822", 13740), ("816", "824", 10210),
    ("824", "826", 3030), ("824", "828", 840), ("828", "830", 20440),
    ("830", "854", 520), ("854", "856", 23330), ("854", "852", 36830),
    ("852", "832", 10), ("832", "858", 4900), ("858", "864", 1620),
    ("858", "834", 5830), ("834", "842", 280), ("842", "844", 1350),
    ("844", "846", 3640), ("846", "848", 530), ("834", "860", 2020),
    ("860", "836", 2680), ("836", "840", 860), ("836", "862", 280),
    ("862", "838", 4860), ("888", "890", 10560),
]
R_PER_KFT = 0.168
X_PER_KFT = 0.125

MV_KV = 24.9        # line-to-line, balanced single-line equivalent
SUB_KV = 4.16       # section behind the in-line transformer
LV_KV = 0.120

# balanced three-phase totals: bus -> (kW, kvar)
LINEAR_LOADS = {
    "810": (8, 4), "820": (17, 8.5), "822": (67.5, 35), "824": (5, 2.5),
    "826": (20, 10), "828": (7, 3.5), "830": (45, 20), "834": (8, 4),
    "836": (10, 5), "838": (14, 7), "840": (27, 21), "844": (135, 105),
    "846": (12, 6), "848": (20, 16), "856": (2, 1), "858": (5, 2.5),
    "860": (43, 27.5), "864": (1, 0.5), "890": (150, 75),
}

SPECTRA = {
    # aggregate residential electronics: declining odd orders
    "scenario1": [
        (1, 100.0, 0.0), (3, 15.0, -20.0), (5, 10.0, 40.0), (7, 7.0, -80.0),
        (9, 4.0, 120.0), (11, 3.0, -160.0), (13, 2.5, 80.0), (15, 1.5, -40.0),
        (17, 1.2, 0.0), (19, 1.0, 60.0), (21, 0.7, -100.0), (23, 0.6, 140.0),
        (25, 0.5, -20.0),
    ],
    # same family plus a switching cluster that lands on the feeder resonance
    "scenario2": [
        (1, 100.0, 0.0), (3, 12.0, -20.0), (5, 8.0, 40.0), (7, 5.5, -80.0),
        (9, 3.0, 120.0), (11, 2.5, -160.0), (13, 2.0, 80.0), (15, 1.2, -40.0),
        (17, 1.0, 0.0), (19, 0.8, 60.0), (21, 0.7, -100.0), (23, 2.5, 140.0),
        (25, 8.0, -30.0), (27, 10.0, 90.0), (29, 7.0, -150.0), (31, 2.0, 30.0),
    ],
    # PV inverter terminal-voltage distortion, high-order switching residue
    "pv_voltage": [
        (1, 100.0, 0.0), (23, 1.5, 30.0), (25, 2.0, -60.0), (27, 2.5, 90.0),
        (29, 1.8, -120.0), (31, 1.2, 150.0), (35, 0.8, 0.0), (37, 0.6, 45.0),
    ],
    # EV charger terminal-voltage distortion, low plus mid orders
    "ev_voltage": [
        (1, 100.0, 0.0), (3, 2.0, -30.0), (5, 3.0, 60.0), (7, 2.2, -90.0),
        (11, 1.5, 120.0), (13, 1.2, -150.0), (23, 1.0, 20.0), (25, 1.4, -70.0),
        (27, 1.1, 110.0),
    ],
}


def build_profiles() -> dict[str, np.ndarray]:
    rng = np.random.default_rng(340709)
    minutes = np.arange(1440, dtype=float)

    def bump(center, width):
        return np.exp(-(((minutes - center) / width) ** 2))

    linear = 0.45 + 0.25 * bump(480, 120) + 0.55 * bump(1200, 150)
    linear += 0.02 * rng.standard_normal(1440)
    linear = np.clip(linear / linear.max(), 0.30, 1.0)

    nonlinear = 0.30 + 0.15 * bump(500, 100) + 0.70 * bump(1230, 160)
    nonlinear += 0.02 * rng.standard_normal(1440)
    nonlinear = np.clip(nonlinear / nonlinear.max(), 0.25, 1.0)

    pv = np.zeros(1440)
    day = (minutes >= 360) & (minutes <= 1110)
    pv[day] = np.sin(np.pi * (minutes[day] - 360) / 750.0) ** 2
    pv = np.clip(pv + 0.01 * rng.standard_normal(1440) * pv, 0.0, 1.0)

    ev = np.zeros(1440)
    ev[900:] = 1.0

    return {
        "residential_linear": np.round(linear, 6),
        "residential_nonlinear": np.round(nonlinear, 6),
        "pv_clear_day": np.round(pv, 6),
        "ev_evening": ev,
    }


def feeder_doc(cap_scale: float) -> dict:
    buses = [{"id": "800", "nominal_kv": MV_KV, "slack": True}]
    mv_buses = sorted({b for seg in SEGMENTS[:-1] for b in seg[:2]} - {"800"})
    buses += [{"id": b, "nominal_kv": MV_KV} for b in mv_buses]
    buses += [
        {"id": "888", "nominal_kv": SUB_KV},
        {"id": "890", "nominal_kv": SUB_KV},
        {"id": "892", "nominal_kv": LV_KV},
    ]
    branches = [
        {
            "from": f, "to": t,
            "r_ohm": round(R_PER_KFT * ft / 1000.0, 6),
            "x_ohm": round(X_PER_KFT * ft / 1000.0, 6),
        }
        for f, t, ft in SEGMENTS[:-1]
    ]
    f, t, ft = SEGMENTS[-1]
    scale = (SUB_KV / MV_KV) ** 2   # 4.16 kV class line
    branches.append({
        "from": f, "to": t,
        "r_ohm": round(R_PER_KFT * ft / 1000.0 * scale, 6),
        "x_ohm": round(X_PER_KFT * ft / 1000.0 * scale, 6),
    })
    doc = {
        "name": "feeder34",
        "base_mva": 1.0,
        "base_frequency_hz": 60.0,
        "buses": buses,
        "branches": branches,
        "transformers": [
            {"from": "832", "to": "888", "rated_kva": 500,
             "leakage_r_pu": 0.019, "leakage_x_pu": 0.0408,
             "constant_xr": True, "blocks_triplen": True},
            {"from": "890", "to": "892", "rated_kva": 50,
             "leakage_r_pu": 0.01, "leakage_x_pu": 0.0204,
             "constant_xr": True, "blocks_triplen": True},
        ],
        "capacitors": [
            {"bus": "844", "kvar": round(33.3 * cap_scale, 3)},
            {"bus": "848", "kvar": round(50.0 * cap_scale, 3)},
        ],
        "source": {
            "bus": "800", "voltage_pu": 1.0, "angle_deg": 0.0,
            "thevenin_r_ohm": 0.8, "thevenin_x_ohm": 4.0,
        },
        "loads": [
            {"bus": bus, "p_kw": p, "q_kvar": q,
             "profile": "residential_linear", "series_fraction": 0.5}
            for bus, (p, q) in sorted(LINEAR_LOADS.items())
        ],
        "devices": [
            {"type": "norton_load", "bus": "844", "p_kw": 90, "q_kvar": 40,
             "series_fraction": 0.5, "spectrum": "scenario1",
             "profile": "residential_nonlinear"},
            {"type": "norton_load", "bus": "860", "p_kw": 45, "q_kvar": 20,
             "series_fraction": 0.5, "spectrum": "scenario1",
             "profile": "residential_nonlinear"},
            {"type": "norton_load", "bus": "836", "p_kw": 30, "q_kvar": 15,
             "series_fraction": 0.5, "spectrum": "scenario1",
             "profile": "residential_nonlinear"},
            {"type": "norton_load", "bus": "892", "p_kw": 1.5, "q_kvar": 0.6,
             "series_fraction": 0.5, "spectrum": "scenario1",
             "profile": "residential_nonlinear"},
            {"type": "pv", "bus": "892", "s_kva": 5.0,
             "profile": "pv_clear_day", "spectrum": "pv_voltage",
             "series_r_ohm": 0.014, "series_x_ohm": 0.144},
            {"type": "ev", "bus": "892", "capacity_kwh": 40.0,
             "charge_kw": 7.2, "soc_min": 0.2, "soc_target": 0.95,
             "spectrum": "ev_voltage", "availability": "ev_evening",
             "series_r_ohm": 0.01, "series_x_ohm": 0.1},
        ],
    }
    return doc


def scan_peak_hz(doc: dict, profiles) -> float:
    network, devices = parse_feeder(doc)
    lp = {name: LoadProfile(name, values) for name, values in profiles.items()}
    curve = frequency_scan(
        network, PCC_BUS, 60.0, 3000.0, 10.0,
        device_shunts=_scan_shunt_fn(network, devices, lp),
    )
    return curve.peak()[0]


def tune_caps(profiles) -> float:
    """Bisect the capacitor scale until the PCC peak sits at the target."""
    lo, hi = 0.05, 4.0
    flo = scan_peak_hz(feeder_doc(lo), profiles)
    fhi = scan_peak_hz(feeder_doc(hi), profiles)
    assert flo > TARGET_PEAK_HZ > fhi, (flo, fhi)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        fmid = scan_peak_hz(feeder_doc(mid), profiles)
        if fmid > TARGET_PEAK_HZ:
            lo = mid
        else:
            hi = mid
    return round(0.5 * (lo + hi), 4)


def main() -> None:
    (DATA / "profiles").mkdir(parents=True, exist_ok=True)
    (DATA / "spectra").mkdir(parents=True, exist_ok=True)
    (DATA / "waveforms").mkdir(parents=True, exist_ok=True)

    profiles = build_profiles()
    for name, values in profiles.items():
        lines = ["multiplier"] + [f"{v:.9g}" for v in values]
        (DATA / "profiles" / f"{name}.csv").write_text("\n".join(lines) + "\n")

    for name, entries in SPECTRA.items():
        lines = ["order,percent,angle_deg"] + [
            f"{o},{p:.9g},{a:.9g}" for o, p, a in entries
        ]
        (DATA / "spectra" / f"{name}.csv").write_text("\n".join(lines) + "\n")

    cap_scale = tune_caps(profiles)
    doc = feeder_doc(cap_scale)
    peak = scan_peak_hz(doc, profiles)
    (DATA / "feeder34.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n"
    )
    print(f"capacitor scale {cap_scale} -> PCC scan peak {peak:.1f} Hz")

    spec = HarmonicSpectrum(
        entries=tuple((o, p / 100.0, a) for o, p, a in SPECTRA["scenario1"]),
        kind="current",
    )
    wave = synthesize_waveform(spec, 10.0, 60.0, 19980.0, 0.25)
    write_waveform_csv(DATA / "waveforms" / "sample_nonlinear.csv", wave)
    print(f"wrote {DATA}")


if __name__ == "__main__":
    main()
