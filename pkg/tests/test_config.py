import pytest

from batchdist.anomaly import Target
from batchdist.errors import ParseError, ValidationError
from batchdist.workflow.config import (
    load_config,
    parse_property_xml,
    serialize_plant_xml,
    serialize_property_xml,
)
from conftest import PLANT_XML, PROPERTY_XML

PLANT_TEXT = PLANT_XML.read_text()
PROPERTY_TEXT = PROPERTY_XML.read_text()


def test_bundled_scenarios_load(bundle):
    assert [sc.id for sc in bundle.scenarios] == ["1", "2", "3", "4", "5"]
    assert not bundle.issues
    sc1 = bundle.scenarios[0]
    assert sc1.controls.baseline.P_head == 70000.0 and sc1.controls.baseline.dP == 93.0
    assert sc1.plant.c == (1.0,) + (2.5,) * 11
    assert bundle.mixture.names == ("butan-1-ol", "propan-2-ol", "water")


def test_bundled_perturbation_targets(scenarios):
    assert not scenarios["1"].controls.perturbations and not scenarios["2"].controls.perturbations
    assert {p.target for p in scenarios["3"].controls.perturbations} == {Target.EFFLUX_RATIO}
    assert {p.target for p in scenarios["4"].controls.perturbations} == {Target.HEAT_DUTY}
    assert {p.target for p in scenarios["5"].controls.perturbations} == {Target.HEAD_PRESSURE}
    assert [a for a, _ in scenarios["4"].rejected_anomalies] == ["case4-a3"]


def test_property_round_trip(mixture):
    text = serialize_property_xml(mixture)
    again = parse_property_xml(text)
    assert again == mixture
    assert serialize_property_xml(again) == text


def test_plant_round_trip(bundle, mixture):
    text = serialize_plant_xml(bundle.scenarios, property_file="p.xml")
    again = load_config(text, mixture)
    assert serialize_plant_xml(again.scenarios, property_file="p.xml") == text
    for a, b in zip(bundle.scenarios, again.scenarios):
        assert a.controls == b.controls
        assert a.plant == b.plant and a.integrator == b.integrator
        assert (a.x1_0, a.n_app_0, a.horizon) == (b.x1_0, b.n_app_0, b.horizon)
        # repr compares unset (NaN) values as equal
        assert repr(a.annotations) == repr(b.annotations)
        assert a.controls.rejected == b.controls.rejected


def test_efflux_ratio_out_of_range():
    bad = PLANT_TEXT.replace('efflux_ratio="0.44"', 'efflux_ratio="1.3"')
    with pytest.raises(ValidationError):
        load_config(bad, PROPERTY_TEXT)
    bundle = load_config(bad, PROPERTY_TEXT, strict=False)
    assert "2" in bundle.issues and [s.id for s in bundle.scenarios] == ["1", "3", "4", "5"]


def test_unknown_unit_is_unit_mismatch():
    bad = PLANT_TEXT.replace('pressure_unit="Pa"', 'pressure_unit="psi"', 1)
    with pytest.raises(ValidationError, match="unit mismatch"):
        load_config(bad, PROPERTY_TEXT)


def test_kpa_pressures_are_converted(mixture):
    text = PLANT_TEXT.replace(
        'efflux_ratio="0.30" head_pressure="70000" pressure_drop="93.0" heat_duty="230.71"\n'
        '              pressure_unit="Pa"',
        'efflux_ratio="0.30" head_pressure="70" pressure_drop="0.093" heat_duty="230.71"\n'
        '              pressure_unit="kPa"')
    sc = load_config(text, mixture).scenarios[0]
    assert sc.controls.baseline.P_head == 70000.0
    assert sc.controls.baseline.dP == pytest.approx(93.0, rel=1e-14)


def test_missing_binary_pair():
    start = PROPERTY_TEXT.index('<binary i="butan-1-ol" j="water"')
    end = PROPERTY_TEXT.index("/>", start) + 2
    with pytest.raises((ParseError, ValidationError), match="butan-1-ol"):
        parse_property_xml(PROPERTY_TEXT[:start] + PROPERTY_TEXT[end:])


def test_malformed_xml():
    with pytest.raises(ParseError):
        load_config("<batch_distillation><plant>", PROPERTY_TEXT)


def test_duplicate_scenario_ids():
    bad = PLANT_TEXT.replace('<scenario id="2"', '<scenario id="1"')
    with pytest.raises(ParseError, match="duplicate"):
        load_config(bad, PROPERTY_TEXT)


def test_insufficient_holdup():
    bad = PLANT_TEXT.replace('n_app="17.85"', 'n_app="0.8"')
    with pytest.raises(ValidationError, match="n_app"):
        load_config(bad, PROPERTY_TEXT)


def test_empty_serialization_rejected():
    with pytest.raises(ValidationError):
        serialize_plant_xml([])
