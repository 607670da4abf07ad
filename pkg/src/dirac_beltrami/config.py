"""Key-value run configs for the command line.

A config file holds ``key = value`` lines; ``#`` starts a comment. Keys are
checked against the schema of the command before anything runs, and unknown
keys are an error.
"""
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SEED_ENV = "DIRAC_BELTRAMI_SEED"


class ConfigError(ValueError):
    pass


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return [float(t) for t in s.replace(",", " ").split()]


def _ints(s):
    return [int(t) for t in s.replace(",", " ").split()]


def _path(s):
    return s.strip()


def _choice(*opts):
    def parse(s):
        v = s.strip()
        if v not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return v
    return parse


_COMMON = {
    "seed": (int, 0),
    "threads": (int, 1),
    "dim": (int, 2),
    "N": (int, 32),
    "L": (float, 2 * math.pi),
    "out": (_path, None),
}

_COEFF = {
    "coefficient": (_path, None),
    "coefficient_kind": (_choice("zero", "bump", "planar", "random"), "bump"),
    "M": (float, 0.5),
    "mu": (complex, 0.5),
    "support": (float, 1.6),
}

SCHEMAS = {
    "verify-identities": {
        "trials": (int, 100),
        "grids": (_ints, None),
        "n_max": (int, 4),
        "delta_sign": (int, 1),
    },
    "solve": dict(_COEFF, **{
        "h_degree": (int, 3),
        "tol": (float, 1e-10),
        "max_iter": (int, 200),
        "dealias": (_bool, False),
        "oracle": (_bool, False),
    }),
    "divform": {
        "coefficient": (_path, None),
        "coefficient_kind": (_choice("identity", "layered", "symmetric", "normal"), "symmetric"),
        "instances": (int, 20),
        "lam": (float, 0.5),
        "Lam": (float, 2.0),
        "layer_amplitude": (float, 0.5),
        "xi0": (_floats, None),
        "tol": (float, 1e-10),
        "max_iter": (int, 400),
    },
    "montel": dict(_COEFF, **{
        "family_size": (int, 64),
        "degree_max": (int, 4),
        "inner": (float, 0.25),
        "outer": (float, 0.5),
        "eps_schedule": (_floats, None),
        "min_chain": (int, 3),
        "gate": (float, 1e-7),
        "tol": (float, 1e-11),
    }),
    "caccioppoli": dict(_COEFF, **{
        "family_size": (int, 100),
        "degree_max": (int, 4),
        "inner": (float, 0.25),
        "outer": (float, 0.5),
        "refine": (_bool, True),
        "tol": (float, 1e-11),
    }),
}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_dict(self):
        return {k: (str(v) if isinstance(v, complex) else v) for k, v in self.values.items()}


def parse_text(command, text, source="<string>"):
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = dict(_COMMON, **SCHEMAS[command])
    values = {k: d for k, (_, d) in schema.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (t.strip() for t in line.split("=", 1))
        if key == "command":
            if val != command:
                raise ConfigError(f"{source}:{lineno}: config is for {val!r}, not {command!r}")
            continue
        if key not in schema:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} for {command}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = schema[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            values["seed"] = int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    cfg = RunConfig(command, values, source)
    validate(cfg)
    return cfg


def load(command, path=None):
    if path is None:
        return parse_text(command, "", "<defaults>")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_text(command, text, str(p))


def validate(cfg):
    v = cfg.values

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(1 <= v["dim"] <= 6, "dim must be in 1..6")
    need(v["N"] >= 4 and v["N"] % 2 == 0, "N must be even and >= 4")
    need(v["L"] > 0, "L must be positive")
    need(v["threads"] >= 1, "threads must be >= 1")
    c = cfg.command
    if c == "verify-identities":
        need(v["trials"] >= 1, "trials must be >= 1")
        need(v["delta_sign"] in (1, -1), "delta_sign must be 1 or -1")
        need(1 <= v["n_max"] <= 6, "n_max must be in 1..6")
        if v["grids"] is not None:
            need(len(v["grids"]) % 2 == 0 and v["grids"], "grids is a list of dim, N pairs")
    if c in ("solve", "montel", "caccioppoli"):
        need(v["M"] >= 0, "M must be >= 0")
        need(v["tol"] > 0, "tol must be positive")
    if c == "solve":
        need(v["h_degree"] >= 1, "h_degree must be >= 1")
        need(v["max_iter"] >= 1, "max_iter must be >= 1")
    if c in ("montel", "caccioppoli"):
        need(v["degree_max"] >= 1, "degree_max must be >= 1")
        need(0 < v["inner"] < v["outer"] <= 1, "need 0 < inner < outer <= 1")
    if c == "montel":
        need(v["family_size"] >= 8, f"family_size must be >= 8 (got {v['family_size']})")
        need(v["min_chain"] >= 3, "min_chain must be >= 3")
    if c == "caccioppoli":
        need(v["family_size"] >= 1, "family_size must be >= 1")
    if c == "divform":
        need(v["dim"] >= 2, "divform needs dim >= 2")
        need(v["instances"] >= 1, "instances must be >= 1")
        if v["xi0"] is not None:
            need(len(v["xi0"]) == v["dim"], "xi0 needs dim entries")
