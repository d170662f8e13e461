"""Scenario files and the built-in registry.

A scenario is one TOML file::

    id = "fig2-left-caption"
    description = "..."
    assumptions = ["..."]

    [plant]
    omega0 = 1.0
    gamma = 1.0

    [initial]
    E = 0.1            # or a list for a batch of runs
    Q = 1.0
    P = 0.0

    [controller]
    law = "sga-d"      # sga-d | sga-dr | sga-f | incoherent-finite | incoherent-exponential
    e_star = 0.8
    gamma1 = 3.0
    gamma2 = 0.5
    # alpha1, alpha2, kappa, gamma_fin, u0, n0,
    # dr_use_tilde, clamp_n, literal_paper_update

    [run]
    t_final = 20.0
    h_int = 1e-3
    # sample_interval = 1.0
    # oracle = 60

Unknown keys are rejected. Overrides use dotted keys, ``controller.gamma2=30``.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controllers import ControllerConfig, Law, SgaGains
from .errors import ConfigError, InvalidInputError
from .integrator import Scenario
from .model import OscillatorParams

_SCHEMA = {
    "": {"id", "description", "assumptions", "plant", "initial", "controller", "run"},
    "plant": {"omega0", "gamma"},
    "initial": {"E", "Q", "P"},
    "controller": {
        "law",
        "e_star",
        "gamma1",
        "gamma2",
        "alpha1",
        "alpha2",
        "kappa",
        "gamma_fin",
        "u0",
        "n0",
        "dr_use_tilde",
        "clamp_n",
        "literal_paper_update",
    },
    "run": {"t_final", "h_int", "sample_interval", "oracle"},
}
_GAIN_KEYS = ("gamma1", "gamma2", "alpha1", "alpha2", "kappa", "gamma_fin")


def _check_keys(tree: Mapping[str, Any]) -> None:
    for key, value in tree.items():
        if key not in _SCHEMA[""]:
            raise ConfigError(f"unknown key {key!r}")
        if key in ("plant", "initial", "controller", "run"):
            if not isinstance(value, dict):
                raise ConfigError(f"{key!r} must be a table")
            for sub in value:
                if sub not in _SCHEMA[key]:
                    raise ConfigError(f"unknown key {key}.{sub!r}")


def _number(table: Mapping, key: str, where: str, default=None):
    value = table.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _flag(table: Mapping, key: str, where: str) -> bool:
    value = table.get(key, False)
    if not isinstance(value, bool):
        raise ConfigError(f"{where}.{key} must be true or false, got {value!r}")
    return value


def scenario_from_tree(tree: Mapping[str, Any], default_id: str = "scenario") -> Scenario:
    """Validate a parsed key-value tree and build the Scenario."""
    _check_keys(tree)
    initial = tree.get("initial", {})
    if "E" not in initial:
        raise ConfigError("initial.E (initial energy) is mandatory")
    energies = initial["E"]
    if not isinstance(energies, list):
        energies = [energies]
    for e in energies:
        if isinstance(e, bool) or not isinstance(e, (int, float)):
            raise ConfigError(f"initial.E must be numbers, got {e!r}")
    ctrl = tree.get("controller", {})
    if "law" not in ctrl:
        raise ConfigError("controller.law is mandatory")
    try:
        law = Law(ctrl["law"])
    except ValueError:
        choices = ", ".join(l.value for l in Law)
        raise ConfigError(f"controller.law {ctrl['law']!r} is not one of: {choices}") from None
    if "e_star" not in ctrl:
        raise ConfigError("controller.e_star is mandatory")
    plant = tree.get("plant", {})
    run = tree.get("run", {})
    oracle = run.get("oracle")
    if oracle is not None and (isinstance(oracle, bool) or not isinstance(oracle, int)):
        raise ConfigError(f"run.oracle must be an integer dimension, got {oracle!r}")
    try:
        gains = SgaGains(
            **{k: _number(ctrl, k, "controller") for k in _GAIN_KEYS if k in ctrl}
        )
        return Scenario(
            id=str(tree.get("id", default_id)),
            params=OscillatorParams(
                omega0=_number(plant, "omega0", "plant", 1.0),
                gamma=_number(plant, "gamma", "plant", 1.0),
            ),
            controller=ControllerConfig(
                law=law,
                gains=gains,
                e_star=_number(ctrl, "e_star", "controller"),
                u0=_number(ctrl, "u0", "controller"),
                n0=_number(ctrl, "n0", "controller"),
                dr_use_tilde=_flag(ctrl, "dr_use_tilde", "controller"),
                clamp_n=_flag(ctrl, "clamp_n", "controller"),
                literal_paper_update=_flag(ctrl, "literal_paper_update", "controller"),
            ),
            initial_energies=tuple(float(e) for e in energies),
            q0=_number(initial, "Q", "initial", 1.0),
            p0=_number(initial, "P", "initial", 0.0),
            t_final=_number(run, "t_final", "run", 20.0),
            h_int=_number(run, "h_int", "run", 1e-3),
            sample_interval=_number(run, "sample_interval", "run"),
            oracle_dim=oracle,
            notes=tuple(str(a) for a in tree.get("assumptions", ())),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc


def parse_override(item: str) -> tuple[list[str], Any]:
    """``"controller.gamma2=30"`` -> (["controller", "gamma2"], 30.0)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    path = [part.strip() for part in key.strip().split(".") if part.strip()]
    if not path:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return path, value


def apply_overrides(tree: dict, overrides: Iterable[str]) -> dict:
    for item in overrides:
        path, value = parse_override(item)
        node = tree
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a non-table")
        node[path[-1]] = value
    return tree


def read_tree(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return _parse(text, str(path))


def _parse(text: str, origin: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"{origin}: parse error: {exc}") from exc


def load_config(path, overrides: Iterable[str] = ()) -> Scenario:
    tree = apply_overrides(read_tree(path), overrides)
    return scenario_from_tree(tree, default_id=Path(path).stem)


def registry_ids() -> list[str]:
    files = resources.files("sgosc").joinpath("scenarios").iterdir()
    return sorted(f.name[: -len(".toml")] for f in files if f.name.endswith(".toml"))


def registry_tree(scenario_id: str) -> dict:
    resource = resources.files("sgosc").joinpath("scenarios", f"{scenario_id}.toml")
    if not resource.is_file():
        raise ConfigError(
            f"unknown scenario {scenario_id!r}; known: {', '.join(registry_ids())}"
        )
    return _parse(resource.read_text(encoding="utf-8"), f"{scenario_id}.toml")


def resolve(name: str, overrides: Iterable[str] = ()) -> Scenario:
    """Scenario by registry id or by file path."""
    if Path(name).suffix == ".toml" or Path(name).exists():
        return load_config(name, overrides)
    tree = apply_overrides(registry_tree(name), overrides)
    return scenario_from_tree(tree, default_id=name)


def scenario_to_tree(scenario: Scenario) -> dict:
    """Resolved parameters in the config layout, for reports."""
    ctrl = scenario.controller
    gains = ctrl.gains
    controller = {"law": ctrl.law.value, "e_star": ctrl.e_star}
    controller.update({k: getattr(gains, k) for k in _GAIN_KEYS})
    controller.update(
        u0=ctrl.u0,
        n0=ctrl.n0,
        dr_use_tilde=ctrl.dr_use_tilde,
        clamp_n=ctrl.clamp_n,
        literal_paper_update=ctrl.literal_paper_update,
    )
    return {
        "plant": {"omega0": scenario.params.omega0, "gamma": scenario.params.gamma},
        "initial": {"E": list(scenario.initial_energies), "Q": scenario.q0, "P": scenario.p0},
        "controller": controller,
        "run": {
            "t_final": scenario.t_final,
            "h_int": scenario.h_int,
            "sample_interval": scenario.sample_interval,
            "oracle": scenario.oracle_dim,
        },
    }
