"""INI-style run configuration.

Every key is optional; missing keys keep the built-in problem defaults.

    [problem]
    name = hertz            ; or groove
    setup = square          ; groove only: square | strip
    b = 1.0
    r = 0.001               ; gap amplitude
    delta_factor = 2.154434 ; Hertz approach in units of r
    l = 8.0
    h = 2.0
    q = 0.0075

    [mesh]
    density = 15            ; elements on the possible contact part
    order = 2

    [material.all]          ; both bodies; [material.lower] / [material.upper] override
    kind = transversely_isotropic
    E = 2.0
    nu = 0.3
    E_t = 1.0
    nu_t = 0.3
    G_t = 0.3846153846
    hypothesis = plane_strain

    [contact]
    c = 0.05
    theta = 0.4             ; explicit penalty, overrides c
    gap = parabolic         ; parabolic | groove | constant
    gap_params = r=0.001, b=1.0

    [scheme]
    policy = segment        ; none | all | segment | active
    lo = 0.0
    hi = 1.0
    gamma = 0.72
    eps_u = 1e-3
    max_iter = 200
    inject = 0.0            ; energy-norm size of injected errors

    [sweep]
    gammas = 0.02:1.98:0.02 ; start:stop:step or a comma list
    schemes = neumann-neumann, robin-0-1b
    cs = 0.1, 0.01
    densities = 32, 64
    eps_list = 1e-2, 1e-3, 1e-4, 1e-5, 1e-6
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .contact import SubareaPolicy
from .experiments import ExperimentSpec, default_gamma_grid, default_schemes
from .fem import ConfigError
from .material import Material, MaterialError

_PROBLEM_FLOATS = ("b", "r", "delta_factor", "l", "h", "q")
_MATERIAL_KEYS = ("kind", "E", "nu", "E_t", "nu_t", "G_t", "hypothesis")


@dataclass
class RunConfig:
    spec: ExperimentSpec
    policy: SubareaPolicy = field(default_factory=SubareaPolicy.none)
    gamma: float = 0.5
    inject: float = 0.0
    gammas: np.ndarray | None = None
    schemes: dict | None = None
    cs: list = field(default_factory=lambda: [0.1, 0.01])
    densities: list = field(default_factory=lambda: [32, 64])
    eps_list: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])


def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def parse_grid(text):
    """``"a:b:step"`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        try:
            a, b, step = (float(v) for v in text.split(":"))
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}") from exc
        if step <= 0 or b < a:
            raise ConfigError(f"bad grid {text!r}")
        return np.round(np.arange(a, b + 0.5 * step, step), 10)
    return np.asarray(_floats(text))


def _params(text):
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"gap parameter {item!r} is not key=value")
        out[key.strip()] = float(val)
    return out


def _material(section, fallback):
    vals = dict(fallback)
    for key in _MATERIAL_KEYS:
        if key in section:
            vals[key] = section[key]
    if not vals:
        return None
    kind = vals.pop("kind", "isotropic")
    hyp = vals.pop("hypothesis", "plane_strain")
    try:
        nums = {k: float(v) for k, v in vals.items()}
        if kind == "isotropic":
            return Material.isotropic(nums["E"], nums["nu"], hypothesis=hyp)
        if kind == "transversely_isotropic":
            return Material.transversely_isotropic(nums["E"], nums["E_t"], nums["nu"], nums["nu_t"],
                                                   nums["G_t"], hypothesis=hyp)
    except KeyError as exc:
        raise ConfigError(f"material is missing {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad material value: {exc}") from exc
    raise MaterialError(f"unknown material kind {kind!r}")


def load_config(path_or_text, overrides=None):
    """Parse a config file (or its text) into a :class:`RunConfig`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep E and E_t distinct from e
    try:
        if "\n" in str(path_or_text) or "[" in str(path_or_text):
            cp.read_string(str(path_or_text))
        else:
            with open(path_or_text) as fh:
                cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc

    known = {"problem", "mesh", "contact", "scheme", "sweep"}
    for name in cp.sections():
        if name not in known and not name.startswith("material."):
            raise ConfigError(f"unknown section [{name}]")

    kw = {}
    try:
        if cp.has_section("problem"):
            sec = cp["problem"]
            kw["problem"] = sec.get("name", "hertz")
            if "setup" in sec:
                kw["setup"] = sec["setup"]
            for key in _PROBLEM_FLOATS:
                if key in sec:
                    kw[key] = sec.getfloat(key)
        if cp.has_section("mesh"):
            sec = cp["mesh"]
            if "density" in sec:
                kw["density"] = sec.getint("density")
            if "order" in sec:
                kw["order"] = sec.getint("order")
        if cp.has_section("contact"):
            sec = cp["contact"]
            if "c" in sec:
                kw["c"] = sec.getfloat("c")
            if "theta" in sec:
                kw["theta"] = sec.getfloat("theta")
            if "gap" in sec:
                kw["gap"] = (sec["gap"].strip(), _params(sec.get("gap_params", "")))
        shared = dict(cp["material.all"]) if cp.has_section("material.all") else {}
        lower = _material(cp["material.lower"] if cp.has_section("material.lower") else {}, shared)
        upper = _material(cp["material.upper"] if cp.has_section("material.upper") else {}, shared)
        if lower is not None or upper is not None:
            if lower is None or upper is None:
                raise ConfigError("give materials for both bodies (use [material.all])")
            kw["body_materials"] = (lower, upper)

        sch = cp["scheme"] if cp.has_section("scheme") else {}
        if "eps_u" in sch:
            kw["eps_u"] = float(sch["eps_u"])
        if "max_iter" in sch:
            kw["max_iter"] = int(sch["max_iter"])
        if overrides:
            kw.update({k: v for k, v in overrides.items() if v is not None})
        spec = ExperimentSpec(**kw)

        kind = sch.get("policy", "none").strip() if sch else "none"
        if kind == "segment":
            policy = SubareaPolicy.segment(float(sch.get("lo", 0.0)), float(sch.get("hi", spec.b)))
        elif kind in ("none", "all", "active"):
            policy = SubareaPolicy(kind)
        else:
            raise ConfigError(f"unknown policy {kind!r}")
        run = RunConfig(spec, policy, gamma=float(sch.get("gamma", 0.5)) if sch else 0.5,
                        inject=float(sch.get("inject", 0.0)) if sch else 0.0)

        if cp.has_section("sweep"):
            sec = cp["sweep"]
            if "gammas" in sec:
                run.gammas = parse_grid(sec["gammas"])
            if "schemes" in sec:
                avail = default_schemes(spec.b)
                names = [n.strip() for n in sec["schemes"].split(",") if n.strip()]
                missing = [n for n in names if n not in avail]
                if missing:
                    raise ConfigError(f"unknown scheme(s) {missing}; choose from {sorted(avail)}")
                run.schemes = {n: avail[n] for n in names}
            if "cs" in sec:
                run.cs = _floats(sec["cs"])
            if "densities" in sec:
                run.densities = [int(v) for v in _floats(sec["densities"])]
            if "eps_list" in sec:
                run.eps_list = _floats(sec["eps_list"])
    except ValueError as exc:
        if isinstance(exc, (ConfigError, MaterialError)):
            raise
        raise ConfigError(str(exc)) from exc
    if run.gammas is None:
        run.gammas = default_gamma_grid()
    return run
