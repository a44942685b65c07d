"""Algorithm configuration records, named presets and the key-value config file."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .landscape import InstanceSpec, LandscapeError
from .optimizers import GAUSSIAN, UNIFORM, OptimizerParams


class ValidationError(ValueError):
    pass


class ConfigParseError(ValueError):
    pass


@dataclass(frozen=True)
class ComponentToggles:
    multipopulation: bool = False
    n_subpops: int = 1
    exclusion: bool = False
    r_excl: float = 0.0
    anti_convergence: bool = False
    r_conv: float = 0.0
    local_search: bool = False
    r_ls: float = 0.0
    etry: int = 0
    local_search_on_change_only: bool = False
    # change detection is part of every configuration and cannot be switched off
    change_detection: bool = field(default=True, init=False)


@dataclass(frozen=True)
class AlgorithmConfig:
    name: str = "custom"
    pop_size: int = 100
    optimizer: OptimizerParams = OptimizerParams()
    toggles: ComponentToggles = ComponentToggles()
    seed: int = 0

    @property
    def n_subpops(self) -> int:
        return self.toggles.n_subpops if self.toggles.multipopulation else 1

    def with_seed(self, seed: int) -> "AlgorithmConfig":
        return replace(self, seed=seed)

    def validate(self) -> "AlgorithmConfig":
        validate(self)
        return self


def validate(cfg: AlgorithmConfig) -> None:
    """Raise ValidationError naming the first offending field."""
    o, t = cfg.optimizer, cfg.toggles
    if cfg.pop_size < 1:
        raise ValidationError("pop_size must be > 0")
    for name, value in (("optimizer.phi1", o.phi1), ("optimizer.phi2", o.phi2)):
        if value < 0:
            raise ValidationError(f"{name} must be ≥ 0")
    if o.chi <= 0:
        raise ValidationError("optimizer.chi must be > 0")
    if o.r_cloud < 0:
        raise ValidationError("r_cloud must be ≥ 0")
    if not 0.0 <= o.es_fraction <= 1.0:
        raise ValidationError("optimizer.es_fraction must be in [0, 1]")
    if o.cloud not in (UNIFORM, GAUSSIAN):
        raise ValidationError(f"optimizer.cloud must be '{UNIFORM}' or '{GAUSSIAN}'")
    if t.n_subpops < 1:
        raise ValidationError("multipopulation.n_subpops must be ≥ 1")
    if t.multipopulation and t.n_subpops > cfg.pop_size:
        raise ValidationError("multipopulation.n_subpops must not exceed pop_size")
    multi = t.multipopulation and t.n_subpops >= 2
    if t.exclusion and not multi:
        raise ValidationError("exclusion requires multipopulation on with n_subpops ≥ 2")
    if t.anti_convergence and not multi:
        raise ValidationError("anti_convergence requires multipopulation on with n_subpops ≥ 2")
    for name, value in (("r_excl", t.r_excl), ("r_conv", t.r_conv), ("r_ls", t.r_ls)):
        if value < 0:
            raise ValidationError(f"{name} must be ≥ 0")
    if t.etry < 0:
        raise ValidationError("local_search.etry must be ≥ 0")


# mQSO exclusion/convergence radius for 10 swarms on [0, 100]^5: 0.5 * 100 / 10 ** (1 / 5)
MQSO_RADIUS = 31.5

_PSO = OptimizerParams(chi=0.729, phi1=2.05, phi2=2.05, r_cloud=1.0)


def _single(name: str, es_fraction: float) -> AlgorithmConfig:
    return AlgorithmConfig(name=name, pop_size=100,
                           optimizer=replace(_PSO, es_fraction=es_fraction))


PRESETS: dict[str, AlgorithmConfig] = {
    "PSO_baseline": _single("PSO_baseline", 0.0),
    "ES_baseline": _single("ES_baseline", 1.0),
    "AbCD_ES25": _single("AbCD_ES25", 0.25),
    "AbCD_ES50": _single("AbCD_ES50", 0.5),
    "AbCD_ES75": _single("AbCD_ES75", 0.75),
    "mQSO": AlgorithmConfig(
        name="mQSO",
        pop_size=100,
        optimizer=replace(_PSO, es_fraction=0.5),
        toggles=ComponentToggles(multipopulation=True, n_subpops=10,
                                 exclusion=True, r_excl=MQSO_RADIUS,
                                 anti_convergence=True, r_conv=MQSO_RADIUS),
    ),
    "AbCD_man": _single("AbCD_man", 0.75),
    # Qualitative shape of the automatically designed configuration; the
    # numeric values are placeholders until replaced by `tune` output.
    "AbCD_auto": AlgorithmConfig(
        name="AbCD_auto",
        pop_size=100,
        optimizer=replace(_PSO, es_fraction=0.75),
        toggles=ComponentToggles(multipopulation=True, n_subpops=50,
                                 local_search=True, r_ls=40.0, etry=2),
    ),
}
PRESETS["PSO"] = replace(PRESETS["PSO_baseline"], name="PSO")
PRESETS["ES"] = replace(PRESETS["ES_baseline"], name="ES")


def build_preset(name: str) -> AlgorithmConfig:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ValidationError(f"unknown preset {name!r}; known presets: {known}") from None


# -- config file -------------------------------------------------------------

_INSTANCE_KEYS = {
    "lambda": "lambda_",
    "change_frequency": "change_frequency",
    "height_severity": "height_severity",
    "width_severity": "width_severity",
    "min_height": "min_height",
    "max_height": "max_height",
    "min_width": "min_width",
    "max_width": "max_width",
    "seed": "seed",
}


def _config_keys() -> dict[str, tuple[str, str, type]]:
    keys = {"name": ("", "name", str), "pop_size": ("", "pop_size", int), "seed": ("", "seed", int)}
    for f in fields(OptimizerParams):
        keys[f"optimizer.{f.name}"] = ("optimizer", f.name, type(getattr(OptimizerParams(), f.name)))
    sections = {
        "multipopulation": ("multipopulation", "n_subpops"),
        "exclusion": ("exclusion", "r_excl"),
        "anti_convergence": ("anti_convergence", "r_conv"),
        "local_search": ("local_search", "r_ls", "etry", "on_change_only"),
    }
    defaults = ComponentToggles()
    for section, (flag, *params) in sections.items():
        keys[f"{section}.enabled"] = ("toggles", flag, bool)
        for p in params:
            attr = "local_search_on_change_only" if p == "on_change_only" else p
            keys[f"{section}.{p}"] = ("toggles", attr, type(getattr(defaults, attr)))
    return keys


CONFIG_KEYS = _config_keys()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: AlgorithmConfig, instances: list[InstanceSpec] | None = None) -> str:
    lines = [f"# AbCD configuration '{cfg.name}'"]
    for key, (group, attr, _) in CONFIG_KEYS.items():
        src = cfg if group == "" else getattr(cfg, group)
        lines.append(f"{key} = {_fmt(getattr(src, attr))}")
    if instances:
        lines.append("instance.list = " + " ".join(s.instance_id for s in instances))
        base = instances[0]
        for key, attr in _INSTANCE_KEYS.items():
            if getattr(base, attr) != getattr(InstanceSpec(), attr):
                lines.append(f"instance.{key} = {_fmt(getattr(base, attr))}")
    return "\n".join(lines) + "\n"


def _convert(raw: str, kind: type, key: str, lineno: int):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigParseError(
            f"line {lineno}: {key} expects {kind.__name__}, got {raw!r}") from None


def parse_config(text: str) -> tuple[AlgorithmConfig, list[InstanceSpec]]:
    """Parse the flat ``section.key = value`` format; unknown keys are errors."""
    top: dict = {}
    opt: dict = {}
    tog: dict = {}
    inst_names: list[str] = []
    inst_over: dict = {}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigParseError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key == "instance.list":
            inst_names = raw.replace(",", " ").split()
            continue
        if key.startswith("instance."):
            sub = key[len("instance."):]
            if sub not in _INSTANCE_KEYS:
                raise ConfigParseError(f"line {lineno}: unknown key {key!r}")
            kind = int if sub in ("change_frequency", "seed") else float
            inst_over[_INSTANCE_KEYS[sub]] = _convert(raw, kind, key, lineno)
            continue
        if key not in CONFIG_KEYS:
            raise ConfigParseError(f"line {lineno}: unknown key {key!r}")
        group, attr, kind = CONFIG_KEYS[key]
        value = _convert(raw, kind, key, lineno)
        {"": top, "optimizer": opt, "toggles": tog}[group][attr] = value
    cfg = AlgorithmConfig(
        optimizer=OptimizerParams(**opt),
        toggles=ComponentToggles(**tog),
        **top,
    )
    validate(cfg)
    try:
        instances = [InstanceSpec.from_shorthand(n, **inst_over) for n in inst_names]
    except LandscapeError as exc:
        raise ValidationError(f"instance: {exc}") from None
    return cfg, instances


def load_config(path: str | Path) -> tuple[AlgorithmConfig, list[InstanceSpec]]:
    return parse_config(Path(path).read_text())


def save_config(cfg: AlgorithmConfig, path: str | Path,
                instances: list[InstanceSpec] | None = None) -> None:
    Path(path).write_text(dump_config(cfg, instances))


def config_to_dict(cfg: AlgorithmConfig) -> dict:
    return asdict(cfg)
