"""Scenario configuration: TOML parsing, validation and object builders.

Every section and key has an explicit default, so a parsed config echoes
the complete scenario.  Angles are given in degrees, complex numbers as
``[re, im]`` pairs.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from dataclasses import field as _field

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .leafwise import AdmissibleLeaf, LeafFamily, sample_leaf_family, stable_line_leaf
from .norms import AnisoParams, HalfPlane
from .spectral import ChiProfile, aligned_cones, build_cone_system, is_power_of_two
from .torus import TorusMap, TrigTerm, Weight

SUBCOMMANDS = ("spectrum", "determinant", "norm", "ly-check", "lyapunov", "pathology", "probe-indicator", "match")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``line``/``column`` are set for syntax errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


@dataclass
class MapSection:
    linear_part: list = field(default_factory=lambda: [[2, 1], [1, 1]])
    epsilon: float = 0.0
    # each term: {freq = [m1, m2], coeff = [[re, im], [re, im]]}
    terms: list = field(default_factory=lambda: [{"freq": [0, 1], "coeff": [[0.0, -1.0], [0.0, 0.0]]}])
    smoothness_r: float = math.inf


@dataclass
class WeightSection:
    kind: str = "reciprocal-jacobian"
    value: float = 1.0
    scale: float = 1.0
    # each term: {mode = [m1, m2], coeff = [re, im]}
    terms: list = field(default_factory=list)


@dataclass
class GridSection:
    N: int = 64


@dataclass
class ParamsSection:
    t: float = 1.0
    s: float = -2.0
    p: float = 1.0
    q: float = math.inf


@dataclass
class ConesSection:
    aperture_plus: float = 60.0
    aperture_minus: float = 60.0
    aligned: bool = True
    axis_plus: float = 90.0
    axis_minus: float = 0.0


@dataclass
class LeavesSection:
    kind: str = "stable-line"
    offsets: list = field(default_factory=lambda: [0.0, 0.31])
    generators: list = field(default_factory=list)
    count: int = 3
    seed: int = 0
    perturbation: float = 0.0


@dataclass
class ChiSection:
    kind: str = "bump"


@dataclass
class FieldSection:
    kind: str = "mode"
    k: list = field(default_factory=lambda: [16, 0])
    band: int = 8
    decay: float = 1.5


@dataclass
class ExperimentSection:
    n_max: int = 10
    K: list = field(default_factory=lambda: [32, 48])
    how_many: int = 10
    residual_tol: float = 1e-8
    movement_tol: float = 1e-4
    search_radius: float = 0.0
    match_radius: float = 0.6
    match_tol: float = 1e-3
    m0: int = 2
    m_max: int = 6
    n0: int = -1
    probe_N: int = 131072
    probe_modes: list = field(default_factory=lambda: [[17, -27], [34, -55]])
    tail_decay: bool = False
    tail_r: float = 6.0
    tail_delta: float = 0.1
    n_iter: int = 100000
    case: int = 1
    blowup_t: float = 0.25
    phi_exponent: float | str = 1.25
    resolutions: list = field(default_factory=lambda: [128, 256, 512])
    probe_resolutions: list = field(default_factory=lambda: [64, 128, 256])
    halfplane_direction: list = field(default_factory=lambda: [1, 0])
    halfplane_start: float = 0.0
    halfplane_width: float = 0.5


@dataclass
class OutputSection:
    dir: str = "anisolab-out"
    seed: int = 0
    deterministic: bool = True
    threads: int = 1


@dataclass
class ScenarioConfig:
    map: MapSection = _field(default_factory=MapSection)
    weight: WeightSection = _field(default_factory=WeightSection)
    grid: GridSection = _field(default_factory=GridSection)
    params: ParamsSection = _field(default_factory=ParamsSection)
    cones: ConesSection = _field(default_factory=ConesSection)
    leaves: LeavesSection = _field(default_factory=LeavesSection)
    chi: ChiSection = _field(default_factory=ChiSection)
    field: FieldSection = _field(default_factory=FieldSection)
    experiment: ExperimentSection = _field(default_factory=ExperimentSection)
    output: OutputSection = _field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def replace(self, section: str, **kw) -> "ScenarioConfig":
        """Copy with keys of one section overridden, validated again."""
        d = self.to_dict()
        d[section].update(kw)
        return from_dict(d)


_SECTIONS = {f.name: f.default_factory for f in fields(ScenarioConfig)}


def _coerce(section: str, key: str, value, default):
    where = f"[{section}] {key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if section == "experiment" and key == "phi_exponent" and value == "log":
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected an array, got {value!r}")
        return copy.deepcopy(value)
    return value


def from_dict(d: dict) -> ScenarioConfig:
    """Validated config from a nested mapping; missing keys take their defaults."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a table")
    sections = {}
    for name, factory in _SECTIONS.items():
        sec = factory()
        given = d.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{name}] must be a table, got {type(given).__name__}")
        known = {f.name for f in fields(sec)}
        for key, value in given.items():
            if key not in known:
                raise ConfigError(f"[{name}] unknown key {key!r}; known keys: {sorted(known)}")
            setattr(sec, key, _coerce(name, key, value, getattr(sec, key)))
        sections[name] = sec
    for name in d:
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]; known sections: {sorted(_SECTIONS)}")
    cfg = ScenarioConfig(**sections)
    validate(cfg)
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a TOML scenario.

    Raises:
        ConfigError: with ``line``/``column`` for syntax errors, or naming
            the violated rule for invalid values.
    """
    try:
        d = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        line = col = None
        lineno = getattr(exc, "lineno", None)
        if lineno is not None:
            line, col = exc.lineno, exc.colno
        else:
            import re
            m = re.search(r"line (\d+), column (\d+)", msg)
            if m:
                line, col = int(m.group(1)), int(m.group(2))
        raise ConfigError(f"syntax error: {msg}", line, col) from None
    return from_dict(d)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate(cfg: ScenarioConfig) -> None:
    """Cross-field rules: map, weight, grid, parameter window, cones, leaves, experiment knobs."""
    try:
        build_map(cfg)
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"[map] {exc}") from None
    try:
        build_weight(cfg)
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"[weight] {exc}") from None
    if not is_power_of_two(cfg.grid.N) or cfg.grid.N < 8:
        raise ConfigError(f"[grid] N must be a power of two >= 8, got {cfg.grid.N}")
    try:
        build_params(cfg)
    except ValueError as exc:
        raise ConfigError(f"[params] {exc}") from None
    try:
        ChiProfile(cfg.chi.kind)
    except ValueError as exc:
        raise ConfigError(f"[chi] {exc}") from None
    c = cfg.cones
    if not (0 < c.aperture_plus < 180 and 0 < c.aperture_minus < 180):
        raise ConfigError("[cones] apertures must lie in (0, 180) degrees")
    try:
        build_cones(cfg)
    except ValueError as exc:
        raise ConfigError(f"[cones] cones must be disjoint: {exc}") from None
    if cfg.leaves.kind not in ("stable-line", "horizontal", "custom"):
        raise ConfigError(f"[leaves] kind must be 'stable-line', 'horizontal' or 'custom', got {cfg.leaves.kind!r}")
    if cfg.leaves.kind == "custom" and not cfg.leaves.generators:
        raise ConfigError("[leaves] custom leaves need at least one generator")
    if cfg.field.kind not in ("mode", "random"):
        raise ConfigError(f"[field] kind must be 'mode' or 'random', got {cfg.field.kind!r}")
    e = cfg.experiment
    if e.n_max < 1:
        raise ConfigError("[experiment] n_max must be >= 1")
    if not e.K or any((not isinstance(k, int)) or k < 2 for k in e.K):
        raise ConfigError("[experiment] K must be a non-empty array of integers >= 2")
    if e.case not in (1, 2, 3):
        raise ConfigError("[experiment] case must be 1, 2 or 3")
    if not (e.phi_exponent == "log" or isinstance(e.phi_exponent, float)):
        raise ConfigError("[experiment] phi_exponent must be a number or \"log\"")
    for key in ("resolutions", "probe_resolutions"):
        vals = getattr(e, key)
        if not vals or any(not isinstance(v, int) or not is_power_of_two(v) for v in vals):
            raise ConfigError(f"[experiment] {key} must be powers of two")
    if not is_power_of_two(e.probe_N):
        raise ConfigError("[experiment] probe_N must be a power of two")
    if e.blowup_t < 0:
        raise ConfigError("[experiment] blowup_t must be >= 0")
    try:
        HalfPlane(tuple(e.halfplane_direction), e.halfplane_start, e.halfplane_width)
    except ValueError as exc:
        raise ConfigError(f"[experiment] {exc}") from None
    if cfg.output.threads < 1:
        raise ConfigError("[output] threads must be >= 1")


# -- builders ----------------------------------------------------------------

def _cplx(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    re, im = pair
    return complex(float(re), float(im))


def build_map(cfg: ScenarioConfig) -> TorusMap:
    m = cfg.map
    terms = tuple(TrigTerm(tuple(t["freq"]), (_cplx(t["coeff"][0]), _cplx(t["coeff"][1]))) for t in m.terms)
    return TorusMap(tuple(tuple(r) for r in m.linear_part), m.epsilon, terms if m.epsilon else (), m.smoothness_r)


def build_weight(cfg: ScenarioConfig) -> Weight:
    w = cfg.weight
    terms = tuple((tuple(t["mode"]), _cplx(t["coeff"])) for t in w.terms)
    return Weight(w.kind, w.value, terms, w.scale)


def build_params(cfg: ScenarioConfig) -> AnisoParams:
    p = cfg.params
    return AnisoParams(p.t, p.s, p.p, p.q, cfg.map.smoothness_r)


def build_cones(cfg: ScenarioConfig, tmap: TorusMap | None = None):
    c = cfg.cones
    ap, am = math.radians(c.aperture_plus), math.radians(c.aperture_minus)
    if c.aligned:
        return aligned_cones(tmap or build_map(cfg), ap, am, ChiProfile(cfg.chi.kind))
    return build_cone_system(ap, am, math.radians(c.axis_plus), math.radians(c.axis_minus),
                             ChiProfile(cfg.chi.kind))


def build_leaves(cfg: ScenarioConfig, tmap: TorusMap | None = None) -> list:
    lv = cfg.leaves
    if lv.kind == "stable-line":
        tmap = tmap or build_map(cfg)
        return [stable_line_leaf(tmap, o, leaf_id=f"stable@{o}") for o in lv.offsets]
    if lv.kind == "horizontal":
        return [AdmissibleLeaf(offset=float(o), leaf_id=f"horizontal@{o}") for o in lv.offsets]
    gens = [AdmissibleLeaf.from_dict(g) for g in lv.generators]
    fam = LeafFamily(build_cones(cfg, tmap), gens, perturbation=lv.perturbation)
    return sample_leaf_family(fam, lv.count, lv.seed)


def build_halfplane(cfg: ScenarioConfig) -> HalfPlane:
    e = cfg.experiment
    return HalfPlane(tuple(e.halfplane_direction), e.halfplane_start, e.halfplane_width)


def default_config() -> ScenarioConfig:
    return from_dict({})


def as_int_array(rows) -> np.ndarray:
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)
