"""Run configuration: a ``key = value`` file with ``[section]`` headers.

Every key is declared in :data:`SCHEMA`; unknown keys, type mismatches and
constraint violations raise :class:`ValidationError` naming the line. The
manifest written at the start of each run is itself a valid config file, so a
run can be replayed from its manifest.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import __version__
from .errors import ValidationError
from .grid import GridSpec
from .mollifier import EXTENSIONS
from .nash_moser import INNER_SOLVERS, IterationConfig
from .norms import INDEX_MODES
from .oracle import FORMS, OracleConfig
from .shear import PROFILES, ShearProfile

OUTPUT_ENV = "PRANDTL_LAB_OUTPUT"
FAMILIES = ("sine_gauss", "zero")


def _positive(v):
    return v > 0


def _at_least(n):
    return lambda v: v >= n


def _one_of(choices):
    return lambda v: v in choices


def _norm_list(text: str) -> tuple:
    """"k,ell,lam; k,ell,lam" -> ((k, ell, lam), ...)."""
    out = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected k,ell,lam triples, got {chunk!r}")
        out.append((int(parts[0]), float(parts[1]), float(parts[2])))
    return tuple(out)


def _float_list(text: str) -> tuple:
    return tuple(float(p) for p in text.replace(",", " ").split())


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (parser, default, check, description of the constraint)
SCHEMA = {
    "grid": {
        "T": (float, 1.0, _positive, "> 0"),
        "Y": (float, 12.0, _positive, "> 0"),
        "L_x": (float, 6.283185307179586, _positive, "> 0"),
        "n_t": (int, 32, _at_least(4), ">= 4"),
        "n_x": (int, 32, _at_least(4), ">= 4"),
        "n_y": (int, 128, _at_least(8), ">= 8"),
    },
    "shear": {
        "profile": (str, "erf_canonical", _one_of(PROFILES), f"one of {PROFILES}"),
        "width": (float, 1.0, _positive, "> 0"),
        "rate": (float, 1.0, _positive, "> 0"),
        "table_y": (_float_list, (), None, ""),
        "table_u": (_float_list, (), None, ""),
    },
    "perturbation": {
        "family": (str, "sine_gauss", _one_of(FAMILIES), f"one of {FAMILIES}"),
        "eps": (float, 0.01, _at_least(0), ">= 0"),
        "mode": (int, 1, _at_least(1), ">= 1"),
    },
    "schedule": {
        "theta0": (float, 10.0, _at_least(4), ">= 4"),
        "n_max": (int, 8, _at_least(1), ">= 1"),
        "k0": (int, 2, _one_of((1, 2)), "1 or 2"),
        "tolerance_residual": (float, 0.0, _at_least(0), ">= 0"),
    },
    "norms": {
        "track": (_norm_list, ((1, 1.0, 0.0),), None, ""),
        "tangential_index_mode": (str, "sum", _one_of(INDEX_MODES), f"one of {INDEX_MODES}"),
    },
    "solver": {
        "inner_solver": (str, "via_w", _one_of(INNER_SOLVERS), f"one of {INNER_SOLVERS}"),
        "far_extension": (str, "edge", _one_of(EXTENSIONS), f"one of {EXTENSIONS}"),
        "track_lambda": (_parse_bool, False, None, ""),
        "picard_max": (int, 8, _at_least(1), ">= 1"),
        "picard_tol": (float, 1e-10, _positive, "> 0"),
        "oracle_form": (str, "perturbation", _one_of(FORMS), f"one of {FORMS}"),
    },
    "output": {
        "directory": (str, "runs", None, ""),
        "seed": (int, 0, _at_least(0), ">= 0"),
    },
}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(",".join(repr(x) for x in triple) for triple in value)
        return " ".join(repr(x) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _defaults() -> dict:
    return {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values[section][key]`` holds typed values."""

    values: dict = dc_field(default_factory=_defaults)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.values == other.values

    def grid(self) -> GridSpec:
        return GridSpec(**self.values["grid"])

    def profile(self) -> ShearProfile:
        s = self.values["shear"]
        return ShearProfile(s["profile"], s["width"], s["rate"], s["table_y"], s["table_u"])

    def iteration(self) -> IterationConfig:
        sch, sol = self.values["schedule"], self.values["solver"]
        orders = tuple((k, ell) for k, ell, _ in self.values["norms"]["track"])
        return IterationConfig(eps=self.values["perturbation"]["eps"], k0=sch["k0"], theta0=sch["theta0"],
                               n_max=sch["n_max"], inner_solver=sol["inner_solver"],
                               monitor_orders=orders or ((1, 1.0),),
                               tolerance_residual=sch["tolerance_residual"],
                               far_extension=sol["far_extension"], track_lambda=sol["track_lambda"])

    def oracle(self) -> OracleConfig:
        sol = self.values["solver"]
        return OracleConfig(picard_max=sol["picard_max"], picard_tol=sol["picard_tol"], form=sol["oracle_form"])

    def output_dir(self) -> Path:
        """Output directory; a relative path is placed under $PRANDTL_LAB_OUTPUT when set."""
        d = Path(self.values["output"]["directory"])
        root = os.environ.get(OUTPUT_ENV)
        if root and not d.is_absolute():
            return Path(root) / d
        return d

    def to_text(self, header: str = "") -> str:
        lines = [f"# {h}" for h in header.splitlines()] if header else []
        for sec, keys in self.values.items():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {_format(v)}" for k, v in keys.items())
            lines.append("")
        return "\n".join(lines)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    values = _defaults()
    seen_lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ValidationError(f"{where}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ValidationError(f"{where}: unknown section [{section}]; known: {', '.join(SCHEMA)}")
            continue
        if "=" not in line:
            raise ValidationError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ValidationError(f"{where}: key outside of any [section]")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ValidationError(f"{where}: unknown key {key!r} in [{section}]")
        parser, _, check, constraint = SCHEMA[section][key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ValidationError(f"{where}: {section}.{key} = {value!r} has the wrong type ({exc})") from None
        if check is not None and not check(parsed):
            raise ValidationError(f"{where}: {section}.{key} = {value} violates constraint {constraint}")
        values[section][key] = parsed
        seen_lines[(section, key)] = where

    cfg = RunConfig(values)
    _cross_check(cfg, seen_lines, source)
    return cfg


def _cross_check(cfg: RunConfig, seen: dict, source: str):
    """Constraints spanning several keys, reported at the line of the key that triggers them."""
    shear = cfg["shear"]
    if shear["profile"] == "custom_table":
        for key in ("table_y", "table_u"):
            if not shear[key]:
                where = seen.get(("shear", "profile"), source)
                raise ValidationError(f"{where}: profile custom_table requires the key shear.{key}")
    g = cfg["grid"]
    if g["Y"] / (g["n_y"] - 1) >= 1:
        where = seen.get(("grid", "n_y"), seen.get(("grid", "Y"), source))
        raise ValidationError(f"{where}: grid spacing Y/(n_y-1) must be < 1")
    for key in ("track",):
        for k, ell, lam in cfg["norms"][key]:
            if not 0 <= k <= 3 or ell < 0 or lam < 0:
                where = seen.get(("norms", key), source)
                raise ValidationError(f"{where}: norm triple ({k},{ell},{lam}) needs 0 <= k <= 3, ell >= 0, lam >= 0")
    try:
        cfg.grid()
        cfg.profile()
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from None


def with_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``section.key=value`` strings through the same validation as a file."""
    lines = [cfg.to_text()]
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValidationError(f"override {item!r} must look like section.key=value")
        name, value = item.split("=", 1)
        section, key = name.strip().split(".", 1)
        lines.append(f"[{section}]\n{key} = {value.strip()}")
    return parse_config_text("\n".join(lines), "<overrides>")


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), str(path))


def write_manifest(cfg: RunConfig, directory, command: str) -> Path:
    """Write ``manifest.cfg`` (a replayable config with a comment header)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "manifest.cfg"
    path.write_text(cfg.to_text(f"prandtl-lab {__version__}\ncommand: {command}"))
    return path
