"""Scenario text files and construction of geometry/config from distances.

Format: ``[section]`` headers, ``key = value`` lines, ``#`` comments. Lists are
comma separated. Sections: ``system``, ``geometry``, ``ga``. Every key is
optional; omitted values fall back to the reference scenario below.

Large-scale rules: ``mu_k = g0 * l_ur^-a_ur``, ``nu = g0 * l_rb^-a_rb``,
``xi_k = g0 * (l_ub_k)^-a_ub`` with ``g0 = 1e-3``, ``a_ur = 2``, ``a_rb = 2.5``,
``a_ub = 4`` by default.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import TWO_PI, ScenarioGeometry, SystemConfig, dbm_to_watt, make_rng
from .errors import ConfigError, ScenarioParseError
from .ga import GaConfig

# user-BS distances on the semicircle; cycled when K differs from 4
DEFAULT_L_UB = (988.0, 980.0, 980.0, 988.0)

PAPER_DEFAULTS = {
    "system": {
        "M": "50", "N": "25", "K": "4", "p_dbm": "30", "sigma2_dbm": "-104",
        "k_r": "0.08", "k_u": "0.08", "k_b": "0.08", "d_over_lambda": "0.5",
    },
    "geometry": {
        "l_rb": "1000", "l_ur": "20", "rho": "10", "epsilon": "1",
        "pathloss_ref": "1e-3", "exp_rb": "2.5", "exp_ur": "2", "exp_ub": "4",
        "angles": "random",  # angle_seed falls back to the run seed
    },
    "ga": {},
}

DESK_OVERRIDES = {"M": "16", "N": "16", "K": "2"}

KNOWN_KEYS = {
    "system": set(PAPER_DEFAULTS["system"]) | {"p_watt", "sigma2_watt"},
    "geometry": set(PAPER_DEFAULTS["geometry"]) | {
        "l_ub", "angle_seed", "psi_a_kr", "psi_e_kr", "phi_a_rb", "phi_e_rb", "psi_a_rb", "psi_e_rb"},
    "ga": {"S_e", "S_m", "S_p", "max_iters", "mutation_rate", "phase_grid", "seed", "patience",
           "restarts", "refine"},
}

ANGLE_KEYS = ("psi_a_kr", "psi_e_kr", "phi_a_rb", "phi_e_rb", "psi_a_rb", "psi_e_rb")


@dataclass
class ScenarioFile:
    """Parsed key-value document; ``lines`` remembers where each key was set."""

    values: dict[str, dict[str, str]] = field(default_factory=lambda: {s: {} for s in KNOWN_KEYS})
    lines: dict[tuple[str, str], int] = field(default_factory=dict)
    path: str | None = None
    text: str = ""

    @classmethod
    def parse(cls, text: str, path: str | None = None) -> "ScenarioFile":
        doc = cls(path=path, text=text)
        section = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ScenarioParseError(f"malformed section header {raw.strip()!r}", lineno, path)
                section = line[1:-1].strip().lower()
                if section not in KNOWN_KEYS:
                    raise ScenarioParseError(f"unknown section [{section}]", lineno, path)
                continue
            if "=" not in line:
                raise ScenarioParseError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
            if section is None:
                raise ScenarioParseError("key outside of any section", lineno, path)
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in KNOWN_KEYS[section]:
                raise ScenarioParseError(f"unknown key {key!r} in [{section}]", lineno, path)
            if key in doc.values[section]:
                raise ScenarioParseError(f"duplicate key {key!r}", lineno, path)
            doc.values[section][key] = value
            doc.lines[(section, key)] = lineno
        return doc

    @classmethod
    def load(cls, path) -> "ScenarioFile":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.parse(fh.read(), str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file {path}: {exc.strerror}") from exc

    def has(self, section: str, key: str) -> bool:
        return key in self.values[section]

    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:16]


@dataclass
class Scenario:
    geometry: ScenarioGeometry
    config: SystemConfig
    ga: GaConfig
    source: ScenarioFile
    l_ub: np.ndarray
    angle_mode: str
    angle_seed: int | None

    def describe(self) -> dict[str, str]:
        """Flat description for output headers."""
        g, c = self.geometry, self.config
        fmt = lambda arr: ";".join(f"{v:.17g}" for v in np.atleast_1d(arr))
        return {
            "scenario_sha256": self.source.digest(),
            "M": str(c.M), "N": str(c.N), "K": str(c.K),
            "p_watt": fmt(c.p), "sigma2_watt": f"{c.sigma2:.17g}",
            "k_r": f"{c.k_r:g}", "k_u": f"{c.k_u:g}", "k_b": f"{c.k_b:g}",
            "nu": f"{g.nu:.17g}", "mu": fmt(g.mu), "xi": fmt(g.xi),
            "rho": f"{g.rho:g}", "epsilon": fmt(g.epsilon),
            "angle_mode": self.angle_mode,
            "angle_seed": "" if self.angle_seed is None else str(self.angle_seed),
            "psi_a_kr": fmt(g.psi_a_kr), "psi_e_kr": fmt(g.psi_e_kr),
            "phi_rb": fmt([g.phi_a_rb, g.phi_e_rb]), "psi_rb": fmt([g.psi_a_rb, g.psi_e_rb]),
        }


class _Reader:
    def __init__(self, doc: ScenarioFile, overrides: dict[str, str]):
        self.doc = doc
        self.overrides = overrides

    def raw(self, section, key):
        if section in self.doc.values and key in self.doc.values[section]:
            return self.doc.values[section][key], self.doc.lines.get((section, key))
        if section == "system" and key in self.overrides:
            return self.overrides[key], None
        return PAPER_DEFAULTS.get(section, {}).get(key), None

    def _fail(self, section, key, msg, line):
        raise ScenarioParseError(f"[{section}] {key}: {msg}", line, self.doc.path)

    def floats(self, section, key):
        text, line = self.raw(section, key)
        if text is None:
            return None
        try:
            vals = [float(tok) for tok in text.split(",")]
        except ValueError:
            self._fail(section, key, f"expected number(s), got {text!r}", line)
        if not all(math.isfinite(v) for v in vals):
            self._fail(section, key, "values must be finite", line)
        return vals

    def number(self, section, key):
        vals = self.floats(section, key)
        if vals is None:
            return None
        if len(vals) != 1:
            text, line = self.raw(section, key)
            self._fail(section, key, "expected a single number", line)
        return vals[0]

    def integer(self, section, key):
        text, _ = self.raw(section, key)
        if text is not None and text.strip().lstrip("+-").isdigit():
            return int(text)  # exact, even beyond float precision
        v = self.number(section, key)
        if v is None:
            return None
        if v != int(v):
            self._fail(section, key, f"expected an integer, got {v}", self.raw(section, key)[1])
        return int(v)

    def text(self, section, key):
        return self.raw(section, key)[0]

    def line(self, section, key):
        return self.raw(section, key)[1]


def _per_user(reader, section, key, K, what):
    vals = reader.floats(section, key)
    if vals is None:
        return None
    if len(vals) == 1:
        return np.full(K, vals[0])
    if len(vals) != K:
        raise ScenarioParseError(f"[{section}] {key}: expected 1 or K={K} values for {what}, got {len(vals)}",
                                 reader.line(section, key), reader.doc.path)
    return np.asarray(vals)


def build_scenario(doc: ScenarioFile, desk_scale: bool = False, seed: int | None = None) -> Scenario:
    """Geometry, system and GA configuration from a parsed scenario file.

    ``desk_scale`` substitutes M=16, N=16, K=2 for whichever of those the file
    leaves unset. ``seed`` is the fallback for ``angle_seed`` and the GA seed.
    """
    r = _Reader(doc, DESK_OVERRIDES if desk_scale else {})
    M, N, K = r.integer("system", "M"), r.integer("system", "N"), r.integer("system", "K")
    if K is None or K < 1:
        raise ConfigError("K must be a positive integer")

    if doc.has("system", "p_watt"):
        p = _per_user(r, "system", "p_watt", K, "powers")
    else:
        p = dbm_to_watt(_per_user(r, "system", "p_dbm", K, "powers"))
    sigma2 = (r.number("system", "sigma2_watt") if doc.has("system", "sigma2_watt")
              else float(dbm_to_watt(r.number("system", "sigma2_dbm"))))
    knobs = {key: r.number("system", key) for key in ("k_r", "k_u", "k_b", "d_over_lambda")}
    try:
        config = SystemConfig(M=M, N=N, K=K, p=tuple(p), sigma2=sigma2, **knobs)
    except ValueError as exc:
        raise ConfigError(f"{doc.path or '<scenario>'}: {exc}") from exc

    g0 = r.number("geometry", "pathloss_ref")
    l_rb, l_ur = r.number("geometry", "l_rb"), r.number("geometry", "l_ur")
    if doc.has("geometry", "l_ub"):
        l_ub = np.asarray(r.floats("geometry", "l_ub"))
        if l_ub.size != K:
            raise ConfigError(f"{doc.path or '<scenario>'}:{r.line('geometry', 'l_ub')}: "
                              f"K={K} but {l_ub.size} l_ub entries given")
    else:
        l_ub = np.resize(np.asarray(DEFAULT_L_UB), K)
    if min(l_rb, l_ur) <= 0 or np.any(l_ub <= 0) or g0 <= 0:
        raise ConfigError("distances and the reference path gain must be positive")
    nu = g0 * l_rb ** -r.number("geometry", "exp_rb")
    mu = np.full(K, g0 * l_ur ** -r.number("geometry", "exp_ur"))
    xi = g0 * l_ub ** -r.number("geometry", "exp_ub")

    rho = r.number("geometry", "rho")
    epsilon = _per_user(r, "geometry", "epsilon", K, "Rician factors")

    mode = r.text("geometry", "angles").strip().lower()
    angle_seed = None
    if mode == "random":
        angle_seed = r.integer("geometry", "angle_seed") if doc.has("geometry", "angle_seed") else None
        if angle_seed is None:
            angle_seed = 0 if seed is None else int(seed)
        draw = make_rng(angle_seed).uniform(0.0, TWO_PI, size=2 * K + 4)
        angles = {"psi_a_kr": draw[:K], "psi_e_kr": draw[K:2 * K], "phi_a_rb": draw[2 * K],
                  "phi_e_rb": draw[2 * K + 1], "psi_a_rb": draw[2 * K + 2], "psi_e_rb": draw[2 * K + 3]}
    elif mode == "explicit":
        angles = {}
        for key in ANGLE_KEYS:
            if not doc.has("geometry", key):
                raise ConfigError(f"explicit angles need {key}")
        angles["psi_a_kr"] = _per_user(r, "geometry", "psi_a_kr", K, "angles")
        angles["psi_e_kr"] = _per_user(r, "geometry", "psi_e_kr", K, "angles")
        for key in ANGLE_KEYS[2:]:
            angles[key] = r.number("geometry", key)
    else:
        raise ScenarioParseError(f"[geometry] angles: expected 'random' or 'explicit', got {mode!r}",
                                 r.line("geometry", "angles"), doc.path)
    try:
        geometry = ScenarioGeometry(nu=nu, mu=mu, xi=xi, rho=rho, epsilon=epsilon, **angles)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    ga_kwargs = {}
    for key in ("S_e", "S_m", "S_p", "max_iters", "phase_grid", "seed", "patience", "restarts"):
        if doc.has("ga", key):
            ga_kwargs[key] = r.integer("ga", key)
    if doc.has("ga", "mutation_rate"):
        ga_kwargs["mutation_rate"] = r.number("ga", "mutation_rate")
    if doc.has("ga", "refine"):
        flag = r.text("ga", "refine").strip().lower()
        if flag not in ("true", "false", "yes", "no", "1", "0"):
            raise ScenarioParseError(f"[ga] refine: expected true or false, got {flag!r}",
                                     r.line("ga", "refine"), doc.path)
        ga_kwargs["refine"] = flag in ("true", "yes", "1")
    if "seed" not in ga_kwargs and seed is not None:
        ga_kwargs["seed"] = int(seed)
    try:
        ga = GaConfig(**ga_kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{doc.path or '<scenario>'}: [ga] {exc}") from exc
    return Scenario(geometry, config, ga, doc, l_ub, mode, angle_seed)


def default_scenario(desk_scale: bool = True, seed: int = 0) -> Scenario:
    return build_scenario(ScenarioFile.parse(""), desk_scale=desk_scale, seed=seed)
