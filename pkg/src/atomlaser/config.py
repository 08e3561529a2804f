"""Run-configuration files: parsing, validation, canonical emission.

Configs are TOML with unit-suffixed keys (T_nK, Phi_per_s, dt_max_s, ...)
grouped into trap / pump / integrator / experiment / output tables.
Parsing is strict: unknown tables or keys are errors, and validation
collects every problem in one pass instead of stopping at the first.

parse_config(emit_config(cfg)) reproduces cfg exactly; the canonical
emission also defines the config hash recorded in run outputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

try:
    import tomllib as tomli
except ImportError:
    import tomli

from .constants import A_RB87, K_B, L3_RB87, M_RB87
from .integrator import IntegratorConfig
from .rates import ProcessToggles, PumpParams
from .trap import TrapSpecies

MODES = ("simulate", "sweep", "optimize-cut", "kappa-scan", "sources",
         "validate")

_NUMBER = ("number", (int, float))
_INTEGER = ("integer", int)
_BOOL = ("boolean", bool)
_STRING = ("string", str)
_NUMBER_LIST = ("list of numbers", list)


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


# key -> (type spec, constraint, constraint text, default); default None
# with no entry in _REQUIRED means "omit unless given"
_TRAP_KEYS = {
    "omega_r_hz": (_NUMBER, _positive, "> 0", 110.0),
    "omega_z_hz": (_NUMBER, _positive, "> 0", 14.0),
    "mass_kg": (_NUMBER, _positive, "> 0", M_RB87),
    "scattering_length_m": (_NUMBER, _positive, "> 0", A_RB87),
}

_PUMP_KEYS = {
    "Phi_per_s": (_NUMBER, _non_negative, ">= 0", None),
    "T_nK": (_NUMBER, _positive, "> 0", None),
    "gamma_per_s": (_NUMBER, _non_negative, ">= 0", None),
    "eps_cut_kBT": (_NUMBER, _positive, "> 0", None),
    "eps_cut_J": (_NUMBER, _positive, "> 0", None),
    "L3_m6_per_s": (_NUMBER, _non_negative, ">= 0", L3_RB87),
    "source_number": (_NUMBER, _positive, "> 0", 4.2e6),
    "thermal_thermal": (_BOOL, None, "", True),
    "thermal_condensate": (_BOOL, None, "", True),
    "three_body": (_BOOL, None, "", True),
    "replenishment": (_BOOL, None, "", True),
    "redistribution": (_BOOL, None, "", True),
    "outcoupling": (_BOOL, None, "", True),
}

_PUMP_REQUIRED = ("Phi_per_s", "T_nK", "gamma_per_s")

_INTEGRATOR_KEYS = {
    "rtol": (_NUMBER, _positive, "> 0", 1e-6),
    "atol_N0": (_NUMBER, _positive, "> 0", 1e-3),
    "atol_g": (_NUMBER, _positive, "> 0", 1e-12),
    "dt_init_s": (_NUMBER, _positive, "> 0", 1e-5),
    "dt_max_s": (_NUMBER, _positive, "> 0", 0.05),
    "dt_min_s": (_NUMBER, _positive, "> 0", 1e-12),
    "steady_window_s": (_NUMBER, _positive, "> 0", 0.1),
    "steady_frac": (_NUMBER, _positive, "> 0", 1e-3),
    "steady_abs": (_NUMBER, _positive, "> 0", 1.0),
    "sample_interval_s": (_NUMBER, _positive, "> 0", 0.01),
    "steady_checks": (_INTEGER, _positive, "> 0", 5),
    "n_nodes": (_INTEGER, lambda v: v >= 8, ">= 8", 400),
    "n0_floor": (_NUMBER, _non_negative, ">= 0", 1.0),
    "max_rejects": (_INTEGER, _positive, "> 0", 60),
    "t_max_s": (_NUMBER, _positive, "> 0", 60.0),
    "snapshot_times_s": (_NUMBER_LIST, None, "", ()),
}

# mode-specific experiment keys; "mode" itself is handled separately
_EXPERIMENT_KEYS = {
    "simulate": {},
    "sweep": {
        "parameter": (_STRING, lambda v: v in ("Phi", "T", "eps_cut",
                                               "gamma"),
                      "one of Phi, T, eps_cut, gamma", None),
        "values_per_s": (_NUMBER_LIST, None, "", None),
        "values_nK": (_NUMBER_LIST, None, "", None),
        "values_kBT": (_NUMBER_LIST, None, "", None),
        "n_initial": (_NUMBER, _positive, "> 0", 4.2e6),
    },
    "optimize-cut": {
        "bracket_kBT": (_NUMBER_LIST, None, "", (0.5, 8.0)),
        "n_pre": (_INTEGER, lambda v: v >= 4, ">= 4", 12),
        "rel_width": (_NUMBER, _positive, "> 0", 1e-2),
        "n_initial": (_NUMBER, _positive, "> 0", 4.2e6),
    },
    "kappa-scan": {
        "Phi_min_per_s": (_NUMBER, _positive, "> 0", None),
        "Phi_max_per_s": (_NUMBER, _positive, "> 0", None),
        "T_min_nK": (_NUMBER, _positive, "> 0", None),
        "T_max_nK": (_NUMBER, _positive, "> 0", None),
        "n_Phi": (_INTEGER, lambda v: v >= 2, ">= 2", 4),
        "n_T": (_INTEGER, lambda v: v >= 2, ">= 2", 4),
        "bracket_kBT": (_NUMBER_LIST, None, "", (1e-3, 8.0)),
        "n_pre": (_INTEGER, lambda v: v >= 4, ">= 4", 12),
        "n_initial": (_NUMBER, _positive, "> 0", 4.2e6),
    },
    "sources": {
        "catalog": (_STRING, None, "", ""),
        "threshold_per_s": (_NUMBER, _positive, "> 0", 1e-3),
    },
    "validate": {},
}

_SCAN_REQUIRED = ("Phi_min_per_s", "Phi_max_per_s", "T_min_nK", "T_max_nK")

_OUTPUT_KEYS = {
    "directory": (_STRING, None, "", "results"),
    "snapshots": (_BOOL, None, "", True),
}

_BLOCK_ORDER = ("trap", "pump", "integrator", "experiment", "output")


class ConfigError(ValueError):
    """All validation problems of a config, collected."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  "
                         + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run configuration.

    tree is the normalized key/value structure (defaults filled in) and is
    the sole basis of equality, canonical emission and hashing; the typed
    views below are derived from it.
    """

    tree: dict
    ts: TrapSpecies = field(compare=False)
    pump: PumpParams = field(compare=False)
    integrator: IntegratorConfig = field(compare=False)
    eps_cut: float = field(compare=False)
    t_max: float = field(compare=False)
    mode: str = field(compare=False)
    experiment: dict = field(compare=False)
    out_dir: str = field(compare=False)
    snapshots: bool = field(compare=False)


def _check_type(block, key, value, spec, errors):
    label, types = spec
    if isinstance(value, bool) and types is not bool:
        errors.append(f"{block}.{key}: expected {label}, got boolean")
        return None
    if not isinstance(value, types):
        errors.append(f"{block}.{key}: expected {label}, "
                      f"got {type(value).__name__}")
        return None
    if types is list:
        items = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                errors.append(f"{block}.{key}: list entries must be numbers")
                return None
            items.append(float(item))
        return tuple(items)
    if types is int:
        return int(value)
    if label == "number":
        return float(value)
    return value


def _validate_block(name, given, schema, errors):
    out = {}
    for key, value in given.items():
        if key not in schema:
            errors.append(f"{name}.{key}: unknown key")
            continue
        spec, constraint, text, _ = schema[key]
        coerced = _check_type(name, key, value, spec, errors)
        if coerced is None:
            continue
        if constraint is not None and not constraint(coerced):
            errors.append(f"{name}.{key}: must be {text}, got {coerced!r}")
            continue
        out[key] = coerced
    for key, (_, _, _, default) in schema.items():
        if key not in out and default is not None:
            out[key] = default
    return out


def _normalize(raw: dict, errors: list) -> dict:
    if not isinstance(raw, dict):
        errors.append("top level: expected tables")
        return {}
    for block in raw:
        if block not in _BLOCK_ORDER:
            errors.append(f"{block}: unknown table")
    tree = {}
    tree["trap"] = _validate_block(
        "trap", raw.get("trap", {}), _TRAP_KEYS, errors)

    pump_raw = raw.get("pump", {})
    tree["pump"] = _validate_block("pump", pump_raw, _PUMP_KEYS, errors)
    for key in _PUMP_REQUIRED:
        if key not in pump_raw:
            errors.append(f"pump.{key}: required")
    has_kbt = "eps_cut_kBT" in tree["pump"]
    has_j = "eps_cut_J" in tree["pump"]
    if has_kbt and has_j:
        errors.append("pump: eps_cut_kBT and eps_cut_J are mutually "
                      "exclusive")
    elif not (has_kbt or has_j):
        errors.append("pump: one of eps_cut_kBT or eps_cut_J is required")

    tree["integrator"] = _validate_block(
        "integrator", raw.get("integrator", {}), _INTEGRATOR_KEYS, errors)
    integ = tree["integrator"]
    if all(k in integ for k in ("dt_min_s", "dt_init_s", "dt_max_s")) and \
            not (integ["dt_min_s"] <= integ["dt_init_s"]
                 <= integ["dt_max_s"]):
        errors.append("integrator: need dt_min_s <= dt_init_s <= dt_max_s")

    exp_raw = dict(raw.get("experiment", {}))
    mode = exp_raw.pop("mode", "simulate")
    if not isinstance(mode, str) or mode not in MODES:
        errors.append(f"experiment.mode: must be one of {', '.join(MODES)}")
        mode = "simulate"
    exp = _validate_block("experiment", exp_raw,
                          _EXPERIMENT_KEYS[mode], errors)
    exp["mode"] = mode
    if mode == "sweep":
        _check_sweep_values(exp, errors)
    if mode == "kappa-scan":
        for key in _SCAN_REQUIRED:
            if key not in exp_raw:
                errors.append(f"experiment.{key}: required for kappa-scan")
        _check_bracket(exp, errors)
    if mode == "optimize-cut":
        _check_bracket(exp, errors)
    tree["experiment"] = exp

    tree["output"] = _validate_block(
        "output", raw.get("output", {}), _OUTPUT_KEYS, errors)
    return tree


_SWEEP_VALUE_KEY = {"Phi": "values_per_s", "gamma": "values_per_s",
                    "T": "values_nK", "eps_cut": "values_kBT"}


def _check_sweep_values(exp, errors):
    if "parameter" not in exp:
        errors.append("experiment.parameter: required for sweep")
        return
    want = _SWEEP_VALUE_KEY[exp["parameter"]]
    given = [k for k in ("values_per_s", "values_nK", "values_kBT")
             if k in exp]
    if given != [want]:
        errors.append(f"experiment: sweep over {exp['parameter']} takes "
                      f"exactly the key {want}")
        return
    if len(exp[want]) == 0 or any(v <= 0 for v in exp[want]):
        errors.append(f"experiment.{want}: values must be positive")


def _check_bracket(exp, errors):
    br = exp.get("bracket_kBT")
    if br is None:
        return
    if len(br) != 2 or not 0 < br[0] < br[1]:
        errors.append("experiment.bracket_kBT: must be two increasing "
                      "positive numbers")


def _build(tree: dict, errors: list):
    """Typed objects from a normalized tree; constructor errors are
    collected rather than raised."""
    ts = pump = integ = None
    eps_cut = t_max = 0.0
    try:
        t = tree["trap"]
        two_pi = 2.0 * math.pi
        ts = TrapSpecies(omega_r=two_pi * t["omega_r_hz"],
                         omega_z=two_pi * t["omega_z_hz"],
                         mass=t["mass_kg"],
                         scattering_length=t["scattering_length_m"])
    except (KeyError, ValueError) as exc:
        errors.append(f"trap: {exc}")
    p = tree["pump"]
    try:
        toggles = ProcessToggles(
            thermal_thermal=p["thermal_thermal"],
            thermal_condensate=p["thermal_condensate"],
            three_body=p["three_body"],
            replenishment=p["replenishment"],
            redistribution=p["redistribution"],
            outcoupling=p["outcoupling"])
        pump = PumpParams(flux=p["Phi_per_s"],
                          temperature=p["T_nK"] * 1e-9,
                          outcoupling=p["gamma_per_s"],
                          l3=p["L3_m6_per_s"],
                          source_number=p["source_number"],
                          toggles=toggles)
        if "eps_cut_J" in p:
            eps_cut = p["eps_cut_J"]
        else:
            eps_cut = p["eps_cut_kBT"] * K_B * pump.temperature
    except (KeyError, ValueError) as exc:
        errors.append(f"pump: {exc}")
    i = tree["integrator"]
    try:
        integ = IntegratorConfig(
            rtol=i["rtol"], atol_n0=i["atol_N0"], atol_g=i["atol_g"],
            dt_init=i["dt_init_s"], dt_max=i["dt_max_s"],
            dt_min=i["dt_min_s"], steady_window=i["steady_window_s"],
            steady_frac=i["steady_frac"], steady_abs=i["steady_abs"],
            sample_interval=i["sample_interval_s"],
            steady_checks=i["steady_checks"], n_nodes=i["n_nodes"],
            n0_floor=i["n0_floor"], max_rejects=i["max_rejects"],
            snapshot_times=tuple(i["snapshot_times_s"]))
        t_max = i["t_max_s"]
    except (KeyError, ValueError) as exc:
        errors.append(f"integrator: {exc}")
    return ts, pump, integ, eps_cut, t_max


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text.  Raises ConfigError listing every
    problem found."""
    errors = []
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    tree = _normalize(raw, errors)
    if errors:
        raise ConfigError(errors)
    ts, pump, integ, eps_cut, t_max = _build(tree, errors)
    if errors:
        raise ConfigError(errors)
    return RunConfig(tree=tree, ts=ts, pump=pump, integrator=integ,
                     eps_cut=eps_cut, t_max=t_max,
                     mode=tree["experiment"]["mode"],
                     experiment=tree["experiment"],
                     out_dir=tree["output"]["directory"],
                     snapshots=tree["output"]["snapshots"])


def parse_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(text: str, overrides) -> str:
    """Apply KEY=VALUE overrides (dotted paths, TOML literals) to config
    text, returning new text.  Unknown paths are left to validation."""
    if not overrides:
        return text
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    errors = []
    for item in overrides:
        if "=" not in item:
            errors.append(f"override {item!r}: expected KEY=VALUE")
            continue
        path, _, literal = item.partition("=")
        keys = path.strip().split(".")
        if len(keys) != 2 or not all(keys):
            errors.append(f"override {item!r}: key must be table.key")
            continue
        try:
            value = tomli.loads(f"v = {literal.strip()}")["v"]
        except tomli.TOMLDecodeError:
            value = literal.strip()
        raw.setdefault(keys[0], {})[keys[1]] = value
    if errors:
        raise ConfigError(errors)
    return _emit_tree(raw)


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    raise TypeError(f"cannot emit {type(v).__name__}")


def _emit_tree(tree: dict) -> str:
    lines = []
    for block in _BLOCK_ORDER:
        if block not in tree or not tree[block]:
            continue
        lines.append(f"[{block}]")
        for key in sorted(tree[block]):
            lines.append(f"{key} = {_format_value(tree[block][key])}")
        lines.append("")
    return "\n".join(lines)


def emit_config(cfg: RunConfig) -> str:
    """Canonical text form: fixed table order, sorted keys, normalized
    values.  parse_config(emit_config(cfg)) == cfg."""
    return _emit_tree(cfg.tree)


def config_hash(cfg: RunConfig) -> str:
    """Hash of the canonical emission; identifies the physics and solver
    settings of a run."""
    return hashlib.sha256(emit_config(cfg).encode("utf-8")).hexdigest()
