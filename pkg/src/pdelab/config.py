"""Flat dotted-key experiment configs.

Format: one ``key = value`` assignment per line, ``#`` comments, blank
lines ignored. Keys are dotted paths (``model.radial.kind``); values are
plain strings typed by the consumer. Parse errors name the offending
key and line number. The same representation round-trips through
:func:`dumps`, which is what the JSON summaries echo.
"""

from __future__ import annotations

import numpy as np

from .bayes import PriorSpec
from .model import ModelSpec, radial_from_name
from .shrinkage import LossSpec, ShrinkageSpec, default_tuning


class ConfigError(ValueError):
    pass


def parse(text: str) -> dict:
    """Parse config text into an ordered key -> string dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def dumps(cfg: dict) -> str:
    return "\n".join(f"{k} = {v}" for k, v in cfg.items()) + "\n"


def load(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


# ----------------------------------------------------------------------
# Typed getters
# ----------------------------------------------------------------------

def require(cfg: dict, key: str) -> str:
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    return cfg[key]


def get_int(cfg, key, default=None):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected integer, got {raw!r}") from exc


def get_float(cfg, key, default=None):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected number, got {raw!r}") from exc


def get_floats(cfg, key, default=None):
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return list(default)
    try:
        return [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected numbers, got {raw!r}") from exc


# ----------------------------------------------------------------------
# Block builders
# ----------------------------------------------------------------------

def parse_family(token: str):
    """One radial family: 'normal', 'student:5', 'discrete:1*0.5+4*0.5'."""
    token = token.strip()
    if token == "normal":
        return "normal", radial_from_name("normal")
    if token.startswith("student:"):
        df = float(token.split(":", 1)[1])
        return f"student:{df:g}", radial_from_name("student", df=df)
    if token.startswith("discrete:"):
        atoms = []
        for part in token.split(":", 1)[1].split("+"):
            z, w = part.split("*")
            atoms.append((float(z), float(w)))
        return token, radial_from_name("discrete", atoms=atoms)
    raise ConfigError(f"unknown radial family {token!r}")


def parse_families(raw: str):
    return [parse_family(tok) for tok in raw.split(";") if tok.strip()]


def model_from_config(cfg: dict, prefix: str = "model") -> ModelSpec:
    kind = cfg.get(f"{prefix}.radial.kind", "normal")
    if kind == "student":
        radial = radial_from_name("student", df=get_float(cfg, f"{prefix}.radial.df"))
    elif kind == "discrete":
        _, radial = parse_family("discrete:" + require(cfg, f"{prefix}.radial.atoms"))
    elif kind == "normal":
        radial = radial_from_name("normal")
    else:
        raise ConfigError(f"key {prefix}.radial.kind: unknown kind {kind!r}")
    d = get_int(cfg, f"{prefix}.d")
    theta = get_floats(cfg, f"{prefix}.theta", default=[0.0] * d)
    return ModelSpec(
        d=d,
        k=get_int(cfg, f"{prefix}.k"),
        c=get_float(cfg, f"{prefix}.c"),
        theta=np.asarray(theta),
        eta=get_float(cfg, f"{prefix}.eta", 1.0),
        radial=radial,
    )


def model_to_config(spec: ModelSpec, prefix: str = "model") -> dict:
    num = lambda v: format(float(v), ".17g")
    out = {
        f"{prefix}.d": str(spec.d),
        f"{prefix}.k": str(spec.k),
        f"{prefix}.c": num(spec.c),
        f"{prefix}.theta": ",".join(num(v) for v in spec.theta),
        f"{prefix}.eta": num(spec.eta),
        f"{prefix}.radial.kind": spec.radial.name,
    }
    params = spec.radial.params()
    if "df" in params:
        out[f"{prefix}.radial.df"] = num(params["df"])
    if "atoms" in params:
        out[f"{prefix}.radial.atoms"] = "+".join(f"{z:g}*{w:g}" for z, w in params["atoms"])
    return out


def parse_prior(token: str, a: float = -1.0) -> PriorSpec:
    """Prior selector: 'harmonic', 'flat', or 'twopoint:m=2'."""
    token = token.strip()
    if token in ("flat", "harmonic"):
        return PriorSpec(kind=token, a=a)
    if token.startswith("twopoint:"):
        arg = token.split(":", 1)[1]
        if not arg.startswith("m="):
            raise ConfigError(f"two-point prior takes 'twopoint:m=VALUE', got {token!r}")
        return PriorSpec(kind="two-point", a=a, m=float(arg[2:]))
    raise ConfigError(f"unknown prior {token!r}")


def prior_from_config(cfg: dict, prefix: str = "prior") -> PriorSpec:
    kind = require(cfg, f"{prefix}.kind")
    a = get_float(cfg, f"{prefix}.a", -1.0)
    if kind == "twopoint" or kind == "two-point":
        return PriorSpec(kind="two-point", a=a, m=get_float(cfg, f"{prefix}.m"))
    return parse_prior(kind, a=a)


def shrinkage_from_config(cfg: dict, c: float, prefix: str = "estimator") -> ShrinkageSpec:
    kind = cfg.get(f"{prefix}.kind", "james-stein")
    raw_a = cfg.get(f"{prefix}.a", "auto")
    a = default_tuning(c) if raw_a == "auto" else float(raw_a)
    return ShrinkageSpec(kind=kind, a=a)


def parse_loss(token: str) -> LossSpec:
    token = token.strip()
    if token in ("log", "squared-error"):
        return LossSpec(kind=token)
    if token.startswith("power:"):
        return LossSpec(kind="power", p=float(token.split(":", 1)[1]))
    if token.startswith("reflected-normal:"):
        return LossSpec(kind="reflected-normal", alpha=float(token.split(":", 1)[1]))
    raise ConfigError(f"unknown loss {token!r}")


def losses_from_config(cfg: dict, key: str = "loss.kinds") -> list:
    raw = cfg.get(key, cfg.get("loss.kind", "log"))
    return [parse_loss(tok) for tok in raw.split(";") if tok.strip()]


def validate_experiment(cfg: dict) -> str:
    kind = require(cfg, "experiment.kind")
    known = ("risk-compare", "point-risk", "posterior-check", "stein-check", "bayes-pde-eval", "verify-all")
    if kind not in known:
        raise ConfigError(f"key 'experiment.kind': unknown kind {kind!r}; expected one of {known}")
    if kind != "verify-all" and "budget.seed" not in cfg:
        raise ConfigError("missing required key 'budget.seed' (wall-clock seeding is not supported)")
    return kind
