"""Strict feeder JSON parsing, CSV resources and bundled data integrity."""

import json

import numpy as np
import pytest

from harmflow.devices import EVModel, NortonLoadModel, PVModel
from harmflow.errors import ValidationError
from harmflow.feeder import (
    bundled_data_dir,
    bundled_feeder_path,
    feeder_sha256,
    load_feeder,
    load_profile_csv,
    load_resources,
    load_spectrum_csv,
    load_waveform_csv,
    parse_feeder,
    write_spectrum_csv,
    write_waveform_csv,
)
from harmflow.network import require_valid
from harmflow.spectrum import WaveformRecord


def _minimal_doc():
    return {
        "buses": [
            {"id": "s", "nominal_kv": 12.47, "slack": True},
            {"id": "a", "nominal_kv": 12.47},
        ],
        "branches": [{"from": "s", "to": "a", "r_ohm": 0.3, "x_ohm": 0.7}],
        "source": {"bus": "s"},
    }


def test_minimal_feeder_parses_and_validates():
    net, devices = parse_feeder(_minimal_doc())
    require_valid(net)
    assert devices == []
    assert net.bus_order() == ["s", "a"]
    assert net.branches[0].resistance == 0.3


def test_unknown_keys_rejected_everywhere():
    for mutate in (
        lambda d: d.update(extra=1),
        lambda d: d["buses"][0].update(extra=1),
        lambda d: d["branches"][0].update(extra=1),
        lambda d: d["source"].update(extra=1),
    ):
        doc = _minimal_doc()
        mutate(doc)
        with pytest.raises(ValidationError) as err:
            parse_feeder(doc)
        assert "extra" in str(err.value)


def test_missing_required_key_rejected():
    doc = _minimal_doc()
    del doc["branches"][0]["r_ohm"]
    with pytest.raises(ValidationError):
        parse_feeder(doc)


def test_capacitor_kvar_conversion():
    doc = _minimal_doc()
    doc["capacitors"] = [{"bus": "a", "kvar": 300.0}]
    net, _ = parse_feeder(doc)
    v = 12.47e3
    assert abs(net.capacitor_banks[0].susceptance - 300e3 / v**2) < 1e-12


def test_capacitor_exactly_one_sizing_key():
    for caps in (
        [{"bus": "a"}],
        [{"bus": "a", "kvar": 100.0, "b_siemens": 0.1}],
    ):
        doc = _minimal_doc()
        doc["capacitors"] = caps
        with pytest.raises(ValidationError):
            parse_feeder(doc)


def test_transformer_defaults_and_flags():
    doc = _minimal_doc()
    doc["buses"].append({"id": "q", "nominal_kv": 0.48})
    doc["transformers"] = [{
        "from": "a", "to": "q", "rated_kva": 150.0,
        "leakage_r_pu": 0.012, "leakage_x_pu": 0.05,
        "constant_xr": True, "blocks_triplen": True,
    }]
    net, _ = parse_feeder(doc)
    tr = net.transformers[0]
    assert tr.rated_kva == 150.0 and tr.constant_xr and tr.blocks_triplen
    assert tr.turns_ratio == 1.0


def test_load_and_device_unit_conversions():
    doc = _minimal_doc()
    doc["loads"] = [{"bus": "a", "p_kw": 75.0, "q_kvar": 30.0, "profile": "p"}]
    doc["devices"] = [
        {"type": "pv", "bus": "a", "s_kva": 5.0, "profile": "d",
         "spectrum": "v", "series_r_ohm": 0.02, "series_x_ohm": 0.2},
        {"type": "ev", "bus": "a", "capacity_kwh": 40.0, "charge_kw": 7.2,
         "soc_min": 0.2, "soc_target": 0.95, "spectrum": "v",
         "availability": "d", "series_r_ohm": 0.01, "series_x_ohm": 0.1},
    ]
    _, devices = parse_feeder(doc)
    load = next(d for d in devices if isinstance(d, NortonLoadModel))
    pv = next(d for d in devices if isinstance(d, PVModel))
    ev = next(d for d in devices if isinstance(d, EVModel))
    assert load.p_rated == 75e3 and load.q_rated == 30e3
    assert load.series_fraction == 0.5
    assert pv.s_rating == 5e3
    assert ev.capacity == 40e3 and ev.charge_power == 7.2e3


def test_device_at_unknown_bus_rejected():
    doc = _minimal_doc()
    doc["devices"] = [{"type": "norton_load", "bus": "zz",
                       "p_kw": 1.0, "q_kvar": 0.0, "spectrum": "s"}]
    with pytest.raises(ValidationError):
        parse_feeder(doc)


def test_unknown_device_type_rejected():
    doc = _minimal_doc()
    doc["devices"] = [{"type": "windmill", "bus": "a"}]
    with pytest.raises(ValidationError):
        parse_feeder(doc)


def test_sha256_stable_and_content_sensitive(tmp_path):
    p1 = tmp_path / "f1.json"
    p1.write_text(json.dumps(_minimal_doc()))
    h1 = feeder_sha256(p1)
    assert h1 == feeder_sha256(p1)
    doc = _minimal_doc()
    doc["branches"][0]["r_ohm"] = 0.31
    p2 = tmp_path / "f2.json"
    p2.write_text(json.dumps(doc))
    assert feeder_sha256(p2) != h1


def test_profile_csv_round_trip(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("multiplier\n0.5\n1\n0.25\n")
    prof = load_profile_csv(path)
    assert prof.name == "p"
    assert np.allclose(prof.values, [0.5, 1.0, 0.25])
    assert prof.value_at(0.0) == 0.5
    assert prof.value_at(119.9) == 1.0


def test_profile_csv_bad_header(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("mult\n0.5\n")
    with pytest.raises(ValidationError):
        load_profile_csv(path)


def test_spectrum_csv_round_trip(tmp_path):
    path = tmp_path / "spec.csv"
    path.write_text("order,percent,angle_deg\n1,100,0\n5,9.5,-30\n")
    spec = load_spectrum_csv(path)
    assert spec.multiplier(5) == pytest.approx(0.095)
    out = tmp_path / "back.csv"
    write_spectrum_csv(out, spec)
    again = load_spectrum_csv(out)
    assert again.entries == spec.entries


def test_waveform_csv_round_trip(tmp_path):
    rec = WaveformRecord(
        sample_rate=19980.0,
        samples=np.sin(np.linspace(0, 20, 4000)),
        quantity="current",
    )
    path = tmp_path / "w.csv"
    write_waveform_csv(path, rec)
    back = load_waveform_csv(path)
    assert abs(back.sample_rate - 19980.0) < 1e-3
    assert np.abs(back.samples - np.round(rec.samples, 9)).max() < 1e-8


def test_waveform_nonuniform_rejected(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("time_s,value\n0,0\n0.001,1\n0.003,0\n")
    with pytest.raises(ValidationError):
        load_waveform_csv(path)


def test_bundled_feeder_loads_and_validates():
    net, devices = load_feeder(bundled_feeder_path())
    require_valid(net)
    assert net.slack_id == "800"
    assert any(isinstance(d, PVModel) for d in devices)
    assert any(isinstance(d, EVModel) for d in devices)
    profiles, spectra = load_resources(bundled_data_dir())
    # every resource a bundled device names must resolve
    for d in devices:
        for attr in ("profile", "spectrum", "availability"):
            name = getattr(d, attr, "")
            if name:
                assert name in profiles or name in spectra


def test_bundled_spectra_kinds():
    _, spectra = load_resources(bundled_data_dir())
    assert spectra["scenario1"].kind == "current"
    assert spectra["pv_voltage"].kind == "voltage"
    assert spectra["ev_voltage"].kind == "voltage"


def test_resources_dir_missing_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_resources(tmp_path / "nope")
