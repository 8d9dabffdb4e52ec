"""Experiment configuration: TOML files with a strict schema, plus built-in presets.

A config looks like::

    name = "motivating"
    trials = 100
    master_seed = 0
    outputs = "runs/motivating"

    [instance]
    kind = "jump_around"
    d = 6
    theta = [1.0, -0.95, 0.0, 0.45, 0.95, 0.99]
    sigma_u_sq = 0.35

    [mode]
    log_mode = "practical"

    [[algorithms]]
    name = "cpeg"
    delta = 0.1

An optional ``[sweep]`` table (``field`` and ``values``) repeats the
experiment over values of one instance field. Unknown keys anywhere are
rejected.
"""

from dataclasses import dataclass, field, replace
from importlib import resources
import copy
import math
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import BadParam, ParseError, ValidationError
from ..estimators import LogBarMode
from ..instances import instance_from_spec

ALGORITHMS = ("cpeg", "cpeug", "cpeg_plugin", "static_oracle", "static_xy", "static_uniform", "se",
              "ucb_ols", "ucb_iv")
UCB_ALGORITHMS = ("ucb_ols", "ucb_iv")
DEFAULT_HORIZON = 30_000

_TOP_KEYS = {"name", "trials", "master_seed", "outputs", "workers", "instance", "algorithms", "mode", "sweep"}
_MODE_KEYS = {"log_mode", "emit_svg", "traces", "timing"}
_SWEEP_KEYS = {"field", "values"}
_ALGO_KEYS = {"name", "label", "delta", "omega", "horizon", "gamma_min", "g", "max_phases",
              "max_total_samples", "L_nu", "L_eta", "theta_norm_bound", "bound_slack",
              "gamma_design", "theta_design", "offline_rows", "log_mode"}


@dataclass(frozen=True)
class AlgoSpec:
    """One algorithm entry of a config.

    ``gamma_min`` is ``"true"`` (the simulator's ``sigma_min(Gamma)``),
    ``"warmup"`` (estimated online, its samples counted) or a number.
    Noise bounds default to the tight values of the instance, scaled by
    ``bound_slack``.
    """

    name: str
    label: str = None
    delta: float = 0.1
    omega: float = 1.0
    horizon: int = None
    gamma_min: object = "true"
    g: float = 144.0
    max_phases: int = 40
    max_total_samples: int = 10 ** 15
    L_nu: float = None
    L_eta: float = None
    theta_norm_bound: float = None
    bound_slack: float = 1.0
    gamma_design: str = "xy"
    theta_design: str = "xy"
    offline_rows: int = 10_000
    log_mode: str = None

    @property
    def display(self):
        return self.label or self.name

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    instance: dict
    algorithms: tuple
    trials: int = 1
    master_seed: int = 0
    outputs: str = "runs/out"
    workers: int = 1
    log_mode: LogBarMode = LogBarMode.PRACTICAL
    emit_svg: bool = True
    traces: bool = True
    timing: bool = False
    sweep: dict = field(default=None)

    def instance_specs(self):
        """``[(instance_id, spec), ...]`` with the sweep expanded."""
        if not self.sweep:
            return [(self.name, dict(self.instance))]
        out = []
        for v in self.sweep["values"]:
            spec = dict(self.instance)
            spec[self.sweep["field"]] = v
            out.append((f"{self.name}[{self.sweep['field']}={v:g}]", spec))
        return out

    def with_overrides(self, trials=None, master_seed=None, outputs=None, workers=None):
        changes = {k: v for k, v in dict(trials=trials, master_seed=master_seed, outputs=outputs,
                                         workers=workers).items() if v is not None}
        cfg = replace(self, **changes)
        _validate_top(cfg)
        return cfg


def _require(cond, msg):
    if not cond:
        raise ValidationError(msg)


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - allowed)
    _require(not unknown, f"{where}: unknown key(s) {unknown}")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _parse_algo(i, raw):
    where = f"algorithms[{i}]"
    _require(isinstance(raw, dict), f"{where} must be a table")
    _check_keys(raw, _ALGO_KEYS, where)
    _require("name" in raw, f"{where}: missing 'name'")
    name = raw["name"]
    _require(name in ALGORITHMS, f"{where}.name: {name!r} is not one of {list(ALGORITHMS)}")
    for key in ("delta", "omega", "g", "L_nu", "L_eta", "theta_norm_bound", "bound_slack"):
        if key in raw:
            _require(_is_num(raw[key]), f"{where}.{key} must be a number")
    for key in ("horizon", "max_phases", "max_total_samples", "offline_rows"):
        if key in raw:
            _require(_is_int(raw[key]) and raw[key] >= 1, f"{where}.{key} must be a positive integer")
    if "delta" in raw:
        _require(0 < raw["delta"] < 1, f"{where}.delta must lie in (0, 1)")
    if "omega" in raw:
        _require(0 < raw["omega"] <= 1, f"{where}.omega must lie in (0, 1]")
    if "g" in raw:
        _require(raw["g"] >= 1, f"{where}.g must be at least 1")
    if "bound_slack" in raw:
        _require(raw["bound_slack"] >= 1, f"{where}.bound_slack must be at least 1")
    if "gamma_min" in raw:
        gm = raw["gamma_min"]
        _require(gm in ("true", "warmup") or (_is_num(gm) and gm > 0),
                 f"{where}.gamma_min must be 'true', 'warmup' or a positive number")
    for key in ("gamma_design", "theta_design"):
        if key in raw:
            _require(raw[key] in ("xy", "uniform"), f"{where}.{key} must be 'xy' or 'uniform'")
    if "log_mode" in raw:
        _require(raw["log_mode"] in ("theoretical", "practical"), f"{where}.log_mode must be theoretical|practical")
    if "label" in raw:
        _require(isinstance(raw["label"], str) and raw["label"], f"{where}.label must be a nonempty string")
    if name in UCB_ALGORITHMS:
        raw = {"horizon": DEFAULT_HORIZON, **raw}
    else:
        _require("horizon" not in raw, f"{where}: horizon only applies to UCB baselines")
    return AlgoSpec(**raw)


def _validate_top(cfg):
    _require(_is_int(cfg.trials) and cfg.trials >= 1, "trials must be an integer >= 1")
    _require(_is_int(cfg.master_seed) and cfg.master_seed >= 0, "master_seed must be a nonnegative integer")
    _require(_is_int(cfg.workers) and cfg.workers >= 1, "workers must be an integer >= 1")
    _require(isinstance(cfg.outputs, str) and cfg.outputs, "outputs must be a path string")


def config_from_dict(data, source="<config>"):
    """Validate a parsed TOML document and build an :class:`ExperimentConfig`."""
    data = copy.deepcopy(data)
    try:
        _check_keys(data, _TOP_KEYS, source)
        _require("instance" in data, f"{source}: missing [instance] table")
        _require(isinstance(data["instance"], dict), f"{source}: [instance] must be a table")
        algos = data.get("algorithms", [])
        _require(isinstance(algos, list) and algos, f"{source}: at least one [[algorithms]] entry is required")
        specs = tuple(_parse_algo(i, a) for i, a in enumerate(algos))
        labels = [s.display for s in specs]
        _require(len(set(labels)) == len(labels), f"{source}: duplicate algorithm labels {labels}")
        mode = data.get("mode", {})
        _require(isinstance(mode, dict), f"{source}: [mode] must be a table")
        _check_keys(mode, _MODE_KEYS, f"{source} [mode]")
        if "log_mode" in mode:
            _require(mode["log_mode"] in ("theoretical", "practical"), "mode.log_mode must be theoretical|practical")
        for key in ("emit_svg", "traces", "timing"):
            if key in mode:
                _require(isinstance(mode[key], bool), f"mode.{key} must be true or false")
        sweep = data.get("sweep")
        if sweep is not None:
            _require(isinstance(sweep, dict), f"{source}: [sweep] must be a table")
            _check_keys(sweep, _SWEEP_KEYS, f"{source} [sweep]")
            _require(isinstance(sweep.get("field"), str), "sweep.field must name an instance field")
            vals = sweep.get("values")
            _require(isinstance(vals, list) and vals and all(_is_num(v) for v in vals),
                     "sweep.values must be a nonempty list of numbers")
        cfg = ExperimentConfig(
            name=data.get("name", os.path.splitext(os.path.basename(source))[0]),
            instance=data["instance"],
            algorithms=specs,
            trials=data.get("trials", 1),
            master_seed=data.get("master_seed", 0),
            outputs=data.get("outputs", os.path.join("runs", str(data.get("name", "out")))),
            workers=data.get("workers", 1),
            log_mode=LogBarMode(mode.get("log_mode", "practical")),
            emit_svg=mode.get("emit_svg", True),
            traces=mode.get("traces", True),
            timing=mode.get("timing", False),
            sweep=sweep,
        )
        _validate_top(cfg)
        _require(isinstance(cfg.name, str) and cfg.name, "name must be a nonempty string")
        # every instance (each sweep point) must build and pass its own checks
        for iid, spec in cfg.instance_specs():
            try:
                inst = instance_from_spec(spec)
            except (BadParam, ValueError, TypeError) as exc:
                raise ValidationError(f"{source}: instance {iid}: {exc}") from exc
            for s in specs:
                if s.name in UCB_ALGORITHMS:
                    _require(inst.is_compliance, f"{source}: {s.name} needs a compliance instance")
                    _require(s.horizon >= inst.d, f"{source}: {s.name}.horizon must be at least d")
    except ValidationError as exc:
        raise ValidationError(str(exc)) from None
    return cfg


def parse_config(text, source="<config>"):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from None
    return config_from_dict(data, source)


def preset_names():
    files = resources.files(__package__).joinpath("presets").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".toml"))


def preset_text(name):
    if name not in preset_names():
        raise ValidationError(f"unknown preset {name!r}; available: {preset_names()}")
    return resources.files(__package__).joinpath("presets", f"{name}.toml").read_text()


def load_preset(name):
    return parse_config(preset_text(name), f"preset:{name}")


def load_config(path):
    """Load a config file. ``presets/<name>`` (or a bare preset name) that is
    not an existing file resolves to the built-in preset."""
    path = os.fspath(path)
    if os.path.isfile(path):
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read(), path)
    base = os.path.basename(path)
    if base.endswith(".toml"):
        base = base[:-5]
    if base in preset_names():
        return load_preset(base)
    raise ValidationError(f"config file not found: {path}")
