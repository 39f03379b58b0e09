"""Problem config files (TOML) with a closed key set per section.

Example::

    [problem]
    dim = 1
    horizon = 1.0
    priority = "PlayerII"

    [dynamics]
    drift = "affine"
    drift_A = 0.0
    drift_beta = 0.0
    diffusion = "constant"
    diffusion_sigma = 0.5

    [payoffs]
    running = "bump"
    running_amplitude = 2.0
    running_center = [0.0]
    running_width = 0.3
    terminal = "hat"
    terminal_height = 1.0
    terminal_center = [0.0]
    terminal_width = 1.0

    [costs]
    I_fixed = 0.3
    I_proportional = 1.2
    II_fixed = 0.15
    II_proportional = 1.1
    h = 0.05

    [actions]
    I = [[0.25], [0.5]]
    II = [[-0.25], [-0.5]]
    cone_I = ["+"]
    cone_II = ["-"]

    [solver]
    bounds = [[-2.0, 2.0]]
    nodes = [401]

    [simulation]
    paths = 100000
    seed = 7
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import Boundary, GridRequest
from .problem import (
    AffineCost,
    AffineDrift,
    BumpGain,
    Cone,
    ConstantDiffusion,
    ConstantPayoff,
    DiagonalAffineDiffusion,
    GaussianPayoff,
    HatPayoff,
    Priority,
    ProblemSpec,
    Sampling,
    TrigGain,
    ZeroGain,
)
from .simulator import SimConfig
from .solver import SolverOptions

SECTIONS = ("problem", "dynamics", "payoffs", "costs", "actions", "solver", "simulation")
REQUIRED = ("problem", "dynamics", "payoffs", "costs", "actions", "solver")

_DRIFT = {"affine": ("A", "beta")}
_DIFFUSION = {"constant": ("sigma",), "diagonal_affine": ("s0", "s1")}
_RUNNING = {"zero": (), "bump": ("amplitude", "center", "width"), "trig": ("amplitude", "wavevector", "omega", "phase")}
_TERMINAL = {"hat": ("height", "center", "width"), "gaussian": ("height", "center", "width"), "constant": ("value",)}


class ConfigError(ValueError):
    """Malformed config; the message names the offending section and field."""


@dataclass(frozen=True)
class Config:
    spec: ProblemSpec
    grid: GridRequest
    solver: SolverOptions
    act_tol: float
    sampling: Sampling
    simulation: SimConfig
    allowance: float
    digest: str
    raw: dict = field(repr=False, compare=False, default_factory=dict)


class _Section:
    def __init__(self, name: str, data: dict):
        self.name = name
        self.data = data
        self.used: set[str] = set()

    def get(self, key, default=..., kind=float):
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError(f"[{self.name}] missing required field '{key}'")
            return default
        value = self.data[key]
        try:
            if kind is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError
                return float(value)
            if kind is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError
                return value
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind == "array":
                arr = np.asarray(value, dtype=float)
                if not np.all(np.isfinite(arr)):
                    raise TypeError
                return arr
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.name}] field '{key}' has an invalid value {value!r}") from None
        return value

    def family(self, key, families: dict) -> str:
        name = self.get(key, kind=str)
        if name not in families:
            raise ConfigError(f"[{self.name}] {key} = {name!r} is not one of {sorted(families)}")
        return name

    def finish(self):
        unknown = sorted(set(self.data) - self.used)
        if unknown:
            raise ConfigError(f"[{self.name}] unknown key(s): {', '.join(unknown)}")


def _params(sec: _Section, prefix: str, names: tuple[str, ...]) -> dict:
    # every parameter is optional; family constructors supply defaults
    out = {}
    for name in names:
        key = f"{prefix}_{name}"
        if key in sec.data:
            out[name] = sec.get(key, kind="array")
        else:
            sec.used.add(key)
    return out


def _scalar(v, default):
    return default if v is None else float(np.asarray(v).reshape(-1)[0])


def _vec(v, dim, default=0.0):
    if v is None:
        return np.full(dim, default)
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 1:
        return np.full(dim, float(arr[0]))
    if arr.size != dim:
        raise ConfigError(f"expected a length-{dim} vector, got {arr.tolist()}")
    return arr


def _cost(sec: _Section, player: str) -> AffineCost:
    return AffineCost(
        fixed=sec.get(f"{player}_fixed"),
        proportional=sec.get(f"{player}_proportional"),
        modulation=_check_modulation(sec, sec.get(f"{player}_modulation", "constant", kind=str), player),
        rate=sec.get(f"{player}_rate", 0.0),
        amp=sec.get(f"{player}_amp", 0.0),
        omega=sec.get(f"{player}_omega", 0.0),
    )


def _check_modulation(sec: _Section, value: str, player: str) -> str:
    if value not in ("constant", "linear", "sine"):
        raise ConfigError(f"[{sec.name}] {player}_modulation = {value!r} is not one of constant, linear, sine")
    return value


def _actions(sec: _Section, key: str, dim: int) -> np.ndarray:
    arr = sec.get(key, kind="array")
    if arr.size == 0:
        return np.zeros((0, dim))
    if arr.ndim == 1 and dim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ConfigError(f"[{sec.name}] {key} must be a list of length-{dim} vectors")
    return arr


def parse_config(text: str, digest: str | None = None) -> Config:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    for name in REQUIRED:
        if name not in raw:
            raise ConfigError(f"missing section [{name}]")
    sec = {name: _Section(name, raw.get(name, {})) for name in SECTIONS}
    for name in SECTIONS:
        if not isinstance(sec[name].data, dict):
            raise ConfigError(f"[{name}] must be a table")

    p = sec["problem"]
    dim = p.get("dim", kind=int)
    if dim < 1:
        raise ConfigError("[problem] dim must be >= 1")
    horizon = p.get("horizon")
    priority = p.get("priority", "PlayerII", kind=str)
    if priority not in ("PlayerII", "PlayerI"):
        raise ConfigError(f"[problem] priority = {priority!r} is not PlayerII or PlayerI")

    d = sec["dynamics"]
    d.family("drift", _DRIFT)
    dp = _params(d, "drift", _DRIFT["affine"])
    try:
        drift = AffineDrift.make(dim, dp.get("A", 0.0), _vec(dp.get("beta"), dim))
        dfam = d.family("diffusion", _DIFFUSION)
        qp = _params(d, "diffusion", _DIFFUSION[dfam])
        if dfam == "constant":
            sigma = qp.get("sigma", 0.0)
            sigma = float(np.asarray(sigma)) if np.size(sigma) == 1 else np.asarray(sigma).reshape(dim, dim)
            diffusion = ConstantDiffusion.make(dim, sigma)
        else:
            diffusion = DiagonalAffineDiffusion.make(dim, _vec(qp.get("s0"), dim), _vec(qp.get("s1"), dim))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[dynamics] {exc}") from None

    y = sec["payoffs"]
    rfam = y.family("running", _RUNNING)
    rp = _params(y, "running", _RUNNING[rfam])
    if rfam == "zero":
        running = ZeroGain()
    elif rfam == "bump":
        running = BumpGain(_scalar(rp.get("amplitude"), 0.0), _vec(rp.get("center"), dim), _scalar(rp.get("width"), 1.0))
    else:
        running = TrigGain(
            _scalar(rp.get("amplitude"), 0.0),
            _vec(rp.get("wavevector"), dim, 1.0),
            _scalar(rp.get("omega"), 0.0),
            _scalar(rp.get("phase"), 0.0),
        )
    tfam = y.family("terminal", _TERMINAL)
    tp = _params(y, "terminal", _TERMINAL[tfam])
    if tfam == "constant":
        terminal = ConstantPayoff(_scalar(tp.get("value"), 0.0))
    else:
        cls = HatPayoff if tfam == "hat" else GaussianPayoff
        terminal = cls(_scalar(tp.get("height"), 1.0), _vec(tp.get("center"), dim), _scalar(tp.get("width"), 1.0))
    if getattr(running, "width", 1.0) <= 0 or getattr(terminal, "width", 1.0) <= 0:
        raise ConfigError("[payoffs] widths must be positive")

    c = sec["costs"]
    cost_I = _cost(c, "I")
    cost_II = _cost(c, "II")
    h = c.get("h", 0.0)

    a = sec["actions"]
    actions_I = _actions(a, "I", dim)
    actions_II = _actions(a, "II", dim)
    cone_I = tuple(a.get("cone_I", ["+"] * dim, kind=list))
    cone_II = tuple(a.get("cone_II", ["-"] * dim, kind=list))

    s = sec["solver"]
    bounds = s.get("bounds", kind="array")
    nodes = s.get("nodes", kind="array")
    if bounds.shape != (dim, 2) or nodes.shape != (dim,) or np.any(nodes != np.round(nodes)):
        raise ConfigError(f"[solver] bounds must be {dim} [lo, hi] pairs and nodes {dim} integers")
    steps = s.get("time_steps", 0, kind=int)
    boundary = s.get("boundary", "NeumannZeroSecond", kind=str)
    if boundary not in [b.value for b in Boundary]:
        raise ConfigError(f"[solver] boundary = {boundary!r} is not one of {[b.value for b in Boundary]}")
    fp_tol = s.get("fp_tol", 1e-9)
    opts = SolverOptions(
        fp_tol=fp_tol,
        fp_max_iter=s.get("fp_max_iter", 200, kind=int),
        transform_tol=s.get("transform_tol", 5e-6),
        override_assumptions=s.get("override_assumptions", False, kind=bool),
    )
    act_tol = s.get("act_tol", 10 * fp_tol)
    sampling = Sampling(bounds=tuple(map(tuple, bounds.tolist())), k=s.get("k", 1e-3))

    m = sec["simulation"]
    sim = SimConfig(
        paths=m.get("paths", 100_000, kind=int),
        seed=m.get("seed", 0, kind=int),
        substeps=m.get("substeps", 1, kind=int),
        t0=m.get("t0", 0.0),
        x0=tuple(_vec(m.get("x0", kind="array") if "x0" in m.data else None, dim)),
    )
    m.used.add("x0")
    allowance = m.get("allowance", 0.05)

    for name in SECTIONS:
        sec[name].finish()

    try:
        spec = ProblemSpec(
            dim=dim,
            horizon=horizon,
            drift=drift,
            diffusion=diffusion,
            running_gain=running,
            terminal_gain=terminal,
            cost_I=cost_I,
            cost_II=cost_II,
            actions_I=actions_I,
            actions_II=actions_II,
            cone_I=Cone(cone_I),
            cone_II=Cone(cone_II),
            priority=Priority(priority),
            h=h,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid problem: {exc}") from None

    grid = GridRequest(
        bounds=tuple(map(tuple, bounds.tolist())),
        nodes=tuple(int(n) for n in nodes),
        time_steps=steps or None,
        boundary=Boundary(boundary),
    )
    digest = digest or hashlib.sha256(text.encode()).hexdigest()
    return Config(spec, grid, opts, act_tol, sampling, sim, allowance, digest, raw)


def load_config(path: str | Path) -> Config:
    data = Path(path).read_bytes()
    return parse_config(data.decode("utf-8"), hashlib.sha256(data).hexdigest())
