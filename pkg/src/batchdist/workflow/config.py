"""XML configuration: the property file and the plant/control file.

Both schemas are documented in ``docs/schema.md``. Parsing is strict:
unknown units, missing attributes and missing binary pairs raise
:class:`ParseError` (with an element path) or :class:`ValidationError`.
"""

from __future__ import annotations

import dataclasses
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..anomaly import Annotation, ControlTrajectory, build_trajectory
from ..column import ControlInputs, PlantParams
from ..errors import BatchDistError, ParseError, ValidationError
from ..integrator import IntegratorConfig
from ..thermo import BinaryParameters, MixtureModel, PureComponent

SCHEMA_VERSION = "1"

_PRESSURE_UNITS = {"Pa": 1.0, "kPa": 1e3, "bar": 1e5, "mmHg": 101325.0 / 760.0}
_TEMPERATURE_OFFSETS = {"K": 0.0, "degC": 273.15}
_ENERGY_UNITS = {"J/mol": 1.0, "kJ/mol": 1e3, "J/kmol": 1e-3}
_CP_UNITS = {"J/mol/K": 1.0, "kJ/kmol/K": 1.0, "J/kmol/K": 1e-3}
_MOLAR_MASS_UNITS = {"kg/mol": 1.0, "g/mol": 1e-3}


@dataclass
class Scenario:
    """One experiment translated into a simulation run."""

    id: str
    plant: PlantParams
    mixture: MixtureModel
    controls: ControlTrajectory
    x1_0: tuple
    n_app_0: float
    horizon: float
    integrator: IntegratorConfig = IntegratorConfig()
    mixture_ref: str = ""
    case: str = ""
    system: str = ""
    setup: str = ""
    operating_point: str = ""
    annotations: tuple = ()

    @property
    def rejected_anomalies(self):
        return self.controls.rejected

    def with_plant(self, plant):
        return dataclasses.replace(self, plant=plant)


@dataclass
class ConfigBundle:
    scenarios: list
    mixture: MixtureModel
    plant: PlantParams
    integrator: IntegratorConfig
    issues: dict = field(default_factory=dict)
    root_attrs: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# helpers


def _load(doc) -> ET.Element:
    """Accept a path, an XML string/bytes or an already parsed element."""
    if isinstance(doc, ET.Element):
        return doc
    if isinstance(doc, ET.ElementTree):
        return doc.getroot()
    try:
        if isinstance(doc, (bytes, bytearray)):
            return ET.fromstring(doc)
        if isinstance(doc, str) and doc.lstrip().startswith("<"):
            return ET.fromstring(doc)
        return ET.parse(os.fspath(doc)).getroot()
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc


def _attr(el, name, path, default=None, required=True):
    if name in el.attrib:
        return el.attrib[name]
    if default is not None or not required:
        return default
    raise ParseError(f"missing attribute '{name}'", path)


def _float(el, name, path, default=None, required=True):
    raw = _attr(el, name, path, default=None if default is None else str(default), required=required)
    if raw is None:
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"attribute '{name}' is not a number: {raw!r}", path) from None
    if not math.isfinite(value):
        raise ParseError(f"attribute '{name}' is not finite", path)
    return value


def _floats(el, name, path):
    raw = _attr(el, name, path)
    try:
        return tuple(float(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise ParseError(f"attribute '{name}' is not a number list: {raw!r}", path) from None


def _unit(el, name, table, path, default=None):
    unit = el.attrib.get(name, default)
    if unit is None:
        raise ParseError(f"missing unit attribute '{name}'", path)
    if unit not in table:
        raise ValidationError(f"{path}: unit mismatch, '{name}'={unit!r} not one of {sorted(table)}")
    return table[unit]


def _fmt(v):
    return repr(float(v))


def _set(el, **attrs):
    for k in sorted(attrs):
        v = attrs[k]
        if v is None:
            continue
        if isinstance(v, bool):
            el.set(k, "true" if v else "false")
        elif isinstance(v, (int, float)):
            el.set(k, _fmt(v) if isinstance(v, float) else str(v))
        elif isinstance(v, (tuple, list)):
            el.set(k, " ".join(_fmt(x) for x in v))
        else:
            el.set(k, str(v))
    return el


def _tostring(root):
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=False) + "\n"


# --------------------------------------------------------------------------
# property file


def parse_property_xml(doc) -> MixtureModel:
    root = _load(doc)
    if root.tag != "properties":
        raise ParseError(f"root element must be <properties>, got <{root.tag}>", "/")
    model = root.attrib.get("activity_model", "NRTL")
    if model != "NRTL":
        raise ValidationError(f"unsupported activity model {model!r}")
    t_ref = _float(root, "reference_temperature", "/properties", default=273.15)
    comps = []
    for i, el in enumerate(root.findall("component")):
        name = _attr(el, "name", f"/properties/component[{i}]")
        path = f"/properties/component[@name='{name}']"
        mm = _float(el, "molar_mass", path) * _unit(el, "molar_mass_unit", _MOLAR_MASS_UNITS, path, "kg/mol")

        ant = el.find("antoine")
        if ant is None:
            raise ParseError("missing <antoine>", path)
        ap = path + "/antoine"
        form = _attr(ant, "form", ap)
        if form not in ("ln", "log10"):
            raise ValidationError(f"{ap}: unknown Antoine form {form!r}")
        p_scale = _unit(ant, "pressure_unit", _PRESSURE_UNITS, ap)
        t_off = _unit(ant, "temperature_unit", _TEMPERATURE_OFFSETS, ap)
        A, B, C = (_float(ant, k, ap) for k in ("A", "B", "C"))
        base = math.log(10.0) if form == "log10" else 1.0
        antoine = (A * base + math.log(p_scale), B * base, C - t_off)
        t_range = (_float(ant, "t_min", ap) + t_off, _float(ant, "t_max", ap) + t_off)

        cp_el = el.find("cp_liquid")
        if cp_el is None:
            raise ParseError("missing <cp_liquid>", path)
        cpp = path + "/cp_liquid"
        cp_scale = _unit(cp_el, "unit", _CP_UNITS, cpp)
        _unit(cp_el, "temperature_unit", {"K": 0.0}, cpp, "K")
        cp = tuple(v * cp_scale for v in _floats(cp_el, "coefficients", cpp))

        dh_el = el.find("dh_vap")
        if dh_el is None:
            raise ParseError("missing <dh_vap>", path)
        dp = path + "/dh_vap"
        if _attr(dh_el, "form", dp, default="watson") != "watson":
            raise ValidationError(f"{dp}: only the watson form is supported")
        dh_scale = _unit(dh_el, "unit", _ENERGY_UNITS, dp)
        _unit(dh_el, "temperature_unit", {"K": 0.0}, dp, "K")
        dh = (_float(dh_el, "dh_ref", dp) * dh_scale, _float(dh_el, "t_ref", dp),
              _float(dh_el, "t_crit", dp), _float(dh_el, "exponent", dp, default=0.38))
        try:
            comps.append(PureComponent(name, antoine, cp, dh, t_range, mm))
        except BatchDistError as exc:
            raise ValidationError(f"{path}: {exc}") from exc

    pairs = {}
    for k, el in enumerate(root.findall("binary")):
        path = f"/properties/binary[{k}]"
        _unit(el, "b_unit", {"K": 1.0}, path, "K")
        key = (_attr(el, "i", path), _attr(el, "j", path))
        pairs[key] = BinaryParameters(
            a_ij=_float(el, "a_ij", path, default=0.0), a_ji=_float(el, "a_ji", path, default=0.0),
            b_ij=_float(el, "b_ij", path, default=0.0), b_ji=_float(el, "b_ji", path, default=0.0),
            alpha=_float(el, "alpha", path, default=0.3),
        )
    try:
        return MixtureModel(tuple(comps), pairs, t_ref)
    except BatchDistError as exc:
        raise ParseError(str(exc), "/properties/binary") from exc


def serialize_property_xml(mixture: MixtureModel) -> str:
    """Canonical SI form (ln, Pa, K) of a mixture model."""
    root = _set(ET.Element("properties"), activity_model="NRTL",
                reference_temperature=float(mixture.reference_temperature))
    for c in mixture.components:
        el = _set(ET.SubElement(root, "component"), name=c.name, molar_mass=float(c.molar_mass),
                  molar_mass_unit="kg/mol")
        A, B, C = c.antoine
        _set(ET.SubElement(el, "antoine"), form="ln", pressure_unit="Pa", temperature_unit="K",
             A=A, B=B, C=C, t_min=c.t_range[0], t_max=c.t_range[1])
        _set(ET.SubElement(el, "cp_liquid"), unit="J/mol/K", temperature_unit="K",
             coefficients=c.cp_liquid)
        dh_ref, t_r, t_c, expo = c.dh_vap
        _set(ET.SubElement(el, "dh_vap"), form="watson", unit="J/mol", temperature_unit="K",
             dh_ref=dh_ref, t_ref=t_r, t_crit=t_c, exponent=expo)
    for (ni, nj), bp in mixture.binary_params.items():
        _set(ET.SubElement(root, "binary"), i=ni, j=nj, a_ij=bp.a_ij, a_ji=bp.a_ji,
             b_ij=bp.b_ij, b_ji=bp.b_ji, alpha=bp.alpha, b_unit="K")
    return _tostring(root)


# --------------------------------------------------------------------------
# plant / control file


def _parse_plant(el, path) -> PlantParams:
    S = int(_float(el, "stages", path))
    kw = dict(S=S)
    for name in ("cp_steel", "cp_glass", "t_ref", "dT_cond", "n_hold", "n_buffer", "k_loss", "t_amb"):
        v = _float(el, name, path, required=False)
        if v is not None:
            kw[name] = v
    stages = {}
    for i, st in enumerate(el.findall("stage")):
        sp = f"{path}/stage[{i}]"
        j = int(_float(st, "index", sp))
        if not 1 <= j <= S or j in stages:
            raise ParseError(f"stage index {j} duplicated or outside 1..{S}", sp)
        stages[j] = st, sp
    if sorted(stages) != list(range(1, S + 1)):
        raise ParseError(f"expected <stage> entries for 1..{S}", path)
    for name in ("m_steel", "m_glass", "c", "q_loss"):
        kw[name] = tuple(_float(stages[j][0], name, stages[j][1]) for j in range(1, S + 1))
    try:
        return PlantParams(**kw)
    except BatchDistError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _parse_integrator(el, path) -> IntegratorConfig:
    if el is None:
        return IntegratorConfig()
    kw = {}
    for f in dataclasses.fields(IntegratorConfig):
        v = _float(el, f.name, path, required=False)
        if v is not None:
            kw[f.name] = int(v) if f.type in ("int", int) else v
    try:
        return IntegratorConfig(**kw)
    except BatchDistError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _parse_scenario(el, path, plant, mixture, integrator, mixture_ref) -> Scenario:
    sid = _attr(el, "id", path)
    ctl = el.find("controls")
    if ctl is None:
        raise ParseError("missing <controls>", path)
    cp = path + "/controls"
    p_scale = _unit(ctl, "pressure_unit", _PRESSURE_UNITS, cp, "Pa")
    eps = _float(ctl, "efflux_ratio", cp)
    if not 0 <= eps <= 1:
        raise ValidationError(f"{cp}: efflux_ratio {eps} outside [0, 1]")
    withdrawal = (0.0,) * plant.S
    if "withdrawal" in ctl.attrib:
        withdrawal = _floats(ctl, "withdrawal", cp)
    try:
        baseline = ControlInputs(
            epsilon=eps,
            P_head=_float(ctl, "head_pressure", cp) * p_scale,
            dP=_float(ctl, "pressure_drop", cp) * p_scale,
            Q_in=_float(ctl, "heat_duty", cp),
            dT_cond_override=_float(ctl, "condenser_offset", cp, default=plant.dT_cond),
            withdrawal=withdrawal,
        )
        baseline.withdrawal_vector(plant.S)
    except BatchDistError as exc:
        raise ValidationError(f"{cp}: {exc}") from exc

    ini = el.find("initial")
    if ini is None:
        raise ParseError("missing <initial>", path)
    ip = path + "/initial"
    x1 = _floats(ini, "x1", ip)
    if len(x1) != mixture.n_components:
        raise ValidationError(f"{ip}: x1 has {len(x1)} entries for {mixture.n_components} components")
    if any(v < 0 for v in x1) or abs(sum(x1) - 1.0) > 1e-10:
        raise ValidationError(f"{ip}: x1 is not a valid composition")
    n_app = _float(ini, "n_app", ip)
    if n_app <= (plant.S - 1) * plant.n_hold + plant.n_buffer:
        raise ValidationError(f"{ip}: n_app = {n_app} mol does not cover the stage and buffer holdups")

    annotations = []
    for k, an in enumerate(el.findall("anomaly")):
        ap = f"{path}/anomaly[{k}]"
        stage = _float(an, "stage", ap, required=False)
        annotations.append(Annotation(
            anomaly_id=_attr(an, "id", ap),
            cause=_attr(an, "cause", ap, default=""),
            t_start=_float(an, "t_start", ap),
            t_end=_float(an, "t_end", ap),
            value=_float(an, "value", ap, required=False) if "value" in an.attrib else float("nan"),
            target=an.attrib.get("target") or None,
            stage=None if stage is None else int(stage),
            ramp_up=_float(an, "ramp_up", ap, required=False),
            ramp_down=_float(an, "ramp_down", ap, required=False),
            simulated=an.attrib.get("simulated", "true").lower() != "false",
        ))
    try:
        traj = build_trajectory(baseline, annotations)
    except BatchDistError as exc:
        raise ValidationError(f"{path}: {exc}") from exc

    horizon = _float(el, "horizon", path)
    if horizon < 0:
        raise ValidationError(f"{path}: horizon must be >= 0")
    return Scenario(
        id=sid, plant=plant, mixture=mixture, controls=traj, x1_0=tuple(x1), n_app_0=n_app,
        horizon=horizon, integrator=integrator, mixture_ref=mixture_ref,
        case=el.attrib.get("case", ""), system=el.attrib.get("system", ""),
        setup=el.attrib.get("setup", ""), operating_point=el.attrib.get("operating_point", ""),
        annotations=tuple(annotations),
    )


def load_config(plant_xml, property_xml, strict=True) -> ConfigBundle:
    """Parse both documents.

    ``property_xml`` may also be an already parsed :class:`MixtureModel`.
    With ``strict=False`` a broken scenario block is recorded in
    ``bundle.issues[scenario_id]`` instead of aborting the whole file.
    """
    if isinstance(property_xml, MixtureModel):
        mixture = property_xml
    else:
        mixture = parse_property_xml(property_xml)
    root = _load(plant_xml)
    if root.tag != "batch_distillation":
        raise ParseError(f"root element must be <batch_distillation>, got <{root.tag}>", "/")
    plant_el = root.find("plant")
    if plant_el is None:
        raise ParseError("missing <plant>", "/batch_distillation")
    plant = _parse_plant(plant_el, "/batch_distillation/plant")
    integrator = _parse_integrator(root.find("integrator"), "/batch_distillation/integrator")
    mixture_ref = root.attrib.get("property_file", "")
    scenarios, issues, seen = [], {}, set()
    for k, el in enumerate(root.findall("scenario")):
        path = f"/batch_distillation/scenario[{k}]"
        sid = el.attrib.get("id", f"#{k}")
        if sid in seen:
            exc = ParseError(f"duplicate scenario id {sid!r}", path)
            if strict:
                raise exc
            issues[sid] = str(exc)
            continue
        seen.add(sid)
        try:
            scenarios.append(_parse_scenario(el, path, plant, mixture, integrator, mixture_ref))
        except (ParseError, ValidationError) as exc:
            if strict:
                raise
            issues[sid] = str(exc)
    return ConfigBundle(scenarios, mixture, plant, integrator, issues,
                        {k: v for k, v in root.attrib.items()})


def parse_config(plant_xml, property_xml):
    """Return ``(scenarios, mixture)``; raises on the first schema violation."""
    bundle = load_config(plant_xml, property_xml, strict=True)
    return bundle.scenarios, bundle.mixture


def _plant_element(plant: PlantParams):
    el = _set(ET.Element("plant"), stages=plant.S, cp_steel=plant.cp_steel, cp_glass=plant.cp_glass,
              t_ref=plant.t_ref, dT_cond=plant.dT_cond, n_hold=plant.n_hold, n_buffer=plant.n_buffer,
              k_loss=plant.k_loss, t_amb=plant.t_amb)
    for j in range(plant.S):
        _set(ET.SubElement(el, "stage"), index=j + 1, m_steel=plant.m_steel[j],
             m_glass=plant.m_glass[j], c=plant.c[j], q_loss=plant.q_loss[j])
    return el


def _integrator_element(cfg: IntegratorConfig):
    return _set(ET.Element("integrator"), **dataclasses.asdict(cfg))


def _scenario_element(sc: Scenario):
    el = _set(ET.Element("scenario"), id=sc.id, case=sc.case or None, system=sc.system or None,
              setup=sc.setup or None, operating_point=sc.operating_point or None,
              horizon=float(sc.horizon))
    b = sc.controls.baseline
    _set(ET.SubElement(el, "controls"), efflux_ratio=float(b.epsilon), head_pressure=float(b.P_head),
         pressure_drop=float(b.dP), heat_duty=float(b.Q_in), pressure_unit="Pa",
         condenser_offset=None if b.dT_cond_override is None else float(b.dT_cond_override),
         withdrawal=b.withdrawal if any(b.withdrawal) else None)
    _set(ET.SubElement(el, "initial"), x1=sc.x1_0, n_app=float(sc.n_app_0))
    for a in sc.annotations:
        _set(ET.SubElement(el, "anomaly"), id=a.anomaly_id, cause=a.cause, target=a.target,
             stage=a.stage, t_start=float(a.t_start), t_end=float(a.t_end),
             value=None if a.value != a.value else float(a.value),
             ramp_up=None if a.ramp_up is None else float(a.ramp_up),
             ramp_down=None if a.ramp_down is None else float(a.ramp_down),
             simulated=a.simulated)
    return el


def serialize_plant_xml(scenarios, plant: Optional[PlantParams] = None,
                        integrator: Optional[IntegratorConfig] = None, property_file="") -> str:
    """Canonical plant/control document (sorted attributes, repr floats)."""
    scenarios = list(scenarios)
    if plant is None and not scenarios:
        raise ValidationError("need a plant block or at least one scenario")
    if plant is None:
        plant = scenarios[0].plant
    if integrator is None:
        integrator = scenarios[0].integrator if scenarios else IntegratorConfig()
    root = _set(ET.Element("batch_distillation"), version=SCHEMA_VERSION,
                property_file=property_file or (scenarios[0].mixture_ref if scenarios else "") or None)
    root.append(_plant_element(plant))
    root.append(_integrator_element(integrator))
    for sc in scenarios:
        if sc.plant != plant or sc.integrator != integrator:
            raise ValidationError(f"scenario {sc.id} does not share the document's plant/integrator")
        root.append(_scenario_element(sc))
    return _tostring(root)


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
