"""Game instances: coefficient families, action cones, and assumption checks.

A :class:`ProblemSpec` bundles the dynamics ``dX = b dt + sigma dW``, the
running gain ``f``, terminal gain ``g``, the two impulse cost functions and the
two finite action lists.  Every coefficient comes from a closed family of
parametrised functions so that specs can be serialised, hashed and checked.

All family callables are vectorised over points stored in the last axis:
``x`` has shape ``(..., dim)``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray


class Priority(str, enum.Enum):
    """Which player's impulse is kept when both act at the same instant."""

    PLAYER_II = "PlayerII"
    PLAYER_I = "PlayerI"


# ---------------------------------------------------------------------------
# coefficient families
# ---------------------------------------------------------------------------


def _matrix(value: ArrayLike, dim: int, name: str) -> NDArray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr * np.eye(dim)
    if arr.shape != (dim, dim):
        raise ValueError(f"{name} must be a scalar or a {dim}x{dim} matrix, got shape {arr.shape}")
    return arr


def _vector(value: ArrayLike, dim: int, name: str) -> NDArray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"{name} must be a scalar or a length-{dim} vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AffineDrift:
    """b(t, x) = A x + beta."""

    A: NDArray
    beta: NDArray
    family: str = field(default="affine", init=False)

    @classmethod
    def make(cls, dim: int, A: ArrayLike = 0.0, beta: ArrayLike = 0.0) -> "AffineDrift":
        return cls(_matrix(A, dim, "drift A"), _vector(beta, dim, "drift beta"))

    def __call__(self, t: float, x: NDArray) -> NDArray:
        return x @ self.A.T + self.beta

    def params(self) -> dict:
        return {"A": self.A.tolist(), "beta": self.beta.tolist()}


@dataclass(frozen=True)
class ConstantDiffusion:
    """sigma(t, x) = S (a fixed matrix)."""

    S: NDArray
    family: str = field(default="constant", init=False)

    @classmethod
    def make(cls, dim: int, sigma: ArrayLike = 0.0) -> "ConstantDiffusion":
        return cls(_matrix(sigma, dim, "diffusion sigma"))

    def __call__(self, t: float, x: NDArray) -> NDArray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.S, x.shape[:-1] + self.S.shape)

    def params(self) -> dict:
        return {"sigma": self.S.tolist()}


@dataclass(frozen=True)
class DiagonalAffineDiffusion:
    """sigma(t, x) = diag(s0_i + s1_i * x_i)."""

    s0: NDArray
    s1: NDArray
    family: str = field(default="diagonal_affine", init=False)

    @classmethod
    def make(cls, dim: int, s0: ArrayLike = 0.0, s1: ArrayLike = 0.0) -> "DiagonalAffineDiffusion":
        return cls(_vector(s0, dim, "diffusion s0"), _vector(s1, dim, "diffusion s1"))

    def __call__(self, t: float, x: NDArray) -> NDArray:
        x = np.asarray(x, dtype=float)
        diag = self.s0 + self.s1 * x
        out = np.zeros(x.shape + (x.shape[-1],))
        idx = np.arange(x.shape[-1])
        out[..., idx, idx] = diag
        return out

    def params(self) -> dict:
        return {"s0": self.s0.tolist(), "s1": self.s1.tolist()}


@dataclass(frozen=True)
class ZeroGain:
    family: str = field(default="zero", init=False)

    def __call__(self, t: float, x: NDArray) -> NDArray:
        return np.zeros(np.shape(x)[:-1])

    def sup_norm(self) -> float:
        return 0.0

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class BumpGain:
    """f(t, x) = amplitude * exp(-|x - center|^2 / (2 width^2))."""

    amplitude: float
    center: NDArray
    width: float
    family: str = field(default="bump", init=False)

    def __call__(self, t: float, x: NDArray) -> NDArray:
        r2 = np.sum((np.asarray(x, dtype=float) - self.center) ** 2, axis=-1)
        return self.amplitude * np.exp(-0.5 * r2 / self.width**2)

    def sup_norm(self) -> float:
        return abs(self.amplitude)

    def params(self) -> dict:
        return {"amplitude": self.amplitude, "center": self.center.tolist(), "width": self.width}


@dataclass(frozen=True)
class TrigGain:
    """f(t, x) = amplitude * cos(<wavevector, x> + omega t + phase)."""

    amplitude: float
    wavevector: NDArray
    omega: float = 0.0
    phase: float = 0.0
    family: str = field(default="trig", init=False)

    def __call__(self, t: float, x: NDArray) -> NDArray:
        arg = np.asarray(x, dtype=float) @ self.wavevector + self.omega * t + self.phase
        return self.amplitude * np.cos(arg)

    def sup_norm(self) -> float:
        return abs(self.amplitude)

    def params(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "wavevector": self.wavevector.tolist(),
            "omega": self.omega,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class HatPayoff:
    """g(x) = height * max(0, 1 - |x - center| / width) (Euclidean norm)."""

    height: float
    center: NDArray
    width: float
    family: str = field(default="hat", init=False)

    def __call__(self, x: NDArray) -> NDArray:
        r = np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1)
        return self.height * np.maximum(0.0, 1.0 - r / self.width)

    def sup_norm(self) -> float:
        return abs(self.height)

    def params(self) -> dict:
        return {"height": self.height, "center": self.center.tolist(), "width": self.width}


@dataclass(frozen=True)
class GaussianPayoff:
    """g(x) = height * exp(-|x - center|^2 / (2 width^2))."""

    height: float
    center: NDArray
    width: float
    family: str = field(default="gaussian", init=False)

    def __call__(self, x: NDArray) -> NDArray:
        r2 = np.sum((np.asarray(x, dtype=float) - self.center) ** 2, axis=-1)
        return self.height * np.exp(-0.5 * r2 / self.width**2)

    def sup_norm(self) -> float:
        return abs(self.height)

    def params(self) -> dict:
        return {"height": self.height, "center": self.center.tolist(), "width": self.width}


@dataclass(frozen=True)
class ConstantPayoff:
    value: float
    family: str = field(default="constant", init=False)

    def __call__(self, x: NDArray) -> NDArray:
        return np.full(np.shape(x)[:-1], float(self.value))

    def sup_norm(self) -> float:
        return abs(self.value)

    def params(self) -> dict:
        return {"value": self.value}


@dataclass(frozen=True)
class AffineCost:
    """c(t, xi) = m(t) * (fixed + proportional * |xi|).

    The modulation ``m`` is one of ``constant`` (m = 1), ``linear``
    (m = 1 + rate t) or ``sine`` (m = 1 + amp sin(omega t)); it must stay
    positive on [0, T].
    """

    fixed: float
    proportional: float
    modulation: str = "constant"
    rate: float = 0.0
    amp: float = 0.0
    omega: float = 0.0
    family: str = field(default="affine", init=False)

    def __post_init__(self):
        if self.modulation not in ("constant", "linear", "sine"):
            raise ValueError(f"unknown cost modulation {self.modulation!r}")

    def factor(self, t: ArrayLike) -> NDArray:
        t = np.asarray(t, dtype=float)
        if self.modulation == "linear":
            return 1.0 + self.rate * t
        if self.modulation == "sine":
            return 1.0 + self.amp * np.sin(self.omega * t)
        return np.ones_like(t)

    def __call__(self, t: float, xi: NDArray) -> NDArray:
        mag = np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)
        return self.factor(t) * (self.fixed + self.proportional * mag)

    def params(self) -> dict:
        return {
            "fixed": self.fixed,
            "proportional": self.proportional,
            "modulation": self.modulation,
            "rate": self.rate,
            "amp": self.amp,
            "omega": self.omega,
        }


@dataclass(frozen=True)
class Cone:
    """Closed convex cone given by per-component sign constraints.

    Each entry of ``signs`` is ``"+"`` (component >= 0), ``"-"`` (<= 0) or
    ``"*"`` (free).
    """

    signs: tuple[str, ...]

    def __post_init__(self):
        bad = [s for s in self.signs if s not in ("+", "-", "*")]
        if bad:
            raise ValueError(f"cone signs must be '+', '-' or '*', got {bad}")

    @property
    def dim(self) -> int:
        return len(self.signs)

    def contains(self, v: ArrayLike, tol: float = 0.0) -> NDArray:
        v = np.asarray(v, dtype=float)
        ok = np.ones(v.shape[:-1], dtype=bool)
        for i, s in enumerate(self.signs):
            if s == "+":
                ok &= v[..., i] >= -tol
            elif s == "-":
                ok &= v[..., i] <= tol
        return ok


# ---------------------------------------------------------------------------
# problem spec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    dim: int
    horizon: float
    drift: AffineDrift
    diffusion: ConstantDiffusion | DiagonalAffineDiffusion
    running_gain: ZeroGain | BumpGain | TrigGain
    terminal_gain: HatPayoff | GaussianPayoff | ConstantPayoff
    cost_I: AffineCost
    cost_II: AffineCost
    actions_I: NDArray
    actions_II: NDArray
    cone_I: Cone
    cone_II: Cone
    priority: Priority = Priority.PLAYER_II
    h: float = 0.0  # strict-subadditivity margin, only used by the validator

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        for name in ("actions_I", "actions_II"):
            acts = np.asarray(getattr(self, name), dtype=float).reshape(-1, self.dim)
            if not np.all(np.isfinite(acts)):
                raise ValueError(f"{name} contains non-finite entries")
            if np.any(np.all(acts == 0.0, axis=1)):
                raise ValueError(f"{name} contains the zero action")
            acts.setflags(write=False)
            object.__setattr__(self, name, acts)
        for name, cone, acts in (
            ("actions_I", self.cone_I, self.actions_I),
            ("actions_II", self.cone_II, self.actions_II),
        ):
            if cone.dim != self.dim:
                raise ValueError(f"cone for {name} has dimension {cone.dim}, expected {self.dim}")
            outside = ~cone.contains(acts)
            if np.any(outside):
                raise ValueError(f"{name} has actions outside its cone: {acts[outside].tolist()}")
        object.__setattr__(self, "priority", Priority(self.priority))

    def cost_floor(self, times: ArrayLike | None = None) -> float:
        """Smallest cost over the listed actions of both players and ``times``."""
        if times is None:
            times = np.linspace(0.0, self.horizon, 65)
        times = np.asarray(times, dtype=float)
        vals = []
        for cost, acts in ((self.cost_I, self.actions_I), (self.cost_II, self.actions_II)):
            if len(acts):
                vals.append(np.min(cost(times[:, None], acts[None, :, :])))
        return float(min(vals)) if vals else math.inf

    def replace(self, **changes) -> "ProblemSpec":
        import dataclasses

        return dataclasses.replace(self, **changes)


def evaluate_coefficients(spec: ProblemSpec, t: float, x: ArrayLike) -> tuple[NDArray, NDArray, float]:
    """Return ``(b(t, x), sigma(t, x), f(t, x))`` at a single point."""
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    if not (np.isfinite(t) and np.all(np.isfinite(x))):
        raise ValueError("evaluate_coefficients needs finite t and x")
    if t < 0 or t > spec.horizon:
        raise ValueError(f"t={t} outside [0, {spec.horizon}]")
    b = np.asarray(spec.drift(t, x), dtype=float)
    sigma = np.asarray(spec.diffusion(t, x), dtype=float)
    f = float(spec.running_gain(t, x))
    return b, sigma, f


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    witness: dict | None = None
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "margin": c.margin,
                    "witness": c.witness,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


@dataclass(frozen=True)
class Sampling:
    """Deterministic sample lattice used by :func:`validate_assumptions`."""

    bounds: tuple[tuple[float, float], ...] = ((-2.0, 2.0),)
    states_per_dim: int = 81
    times: int = 11
    k: float = 1e-3
    lipschitz_cap: float = 1e3
    bound_cap: float = 1e6
    tol: float = 1e-12

    def lattice(self, dim: int) -> NDArray:
        bounds = self.bounds if len(self.bounds) == dim else self.bounds[:1] * dim
        axes = [np.linspace(lo, hi, self.states_per_dim) for lo, hi in bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def time_samples(self, horizon: float) -> NDArray:
        return np.linspace(0.0, horizon, self.times)


# Names are stable; the CLI and tests refer to checks by these keys.
CHECK_NAMES = (
    "lipschitz_growth",
    "bounded_payoffs",
    "cost_floor",
    "subadditivity",
    "no_terminal_impulse",
    "strict_subadditivity",
)


def _as_list(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _check_lipschitz(spec: ProblemSpec, pts: NDArray, times: NDArray, s: Sampling) -> Check:
    # neighbouring lattice pairs plus far pairs; b and sigma are time-independent
    # in the supported families but every sampled time is still visited
    worst_lip, worst_growth = 0.0, 0.0
    lip_witness, growth_witness = None, None
    rng_idx = np.arange(len(pts))
    partners = [np.roll(rng_idx, 1), rng_idx[::-1]]
    for t in times:
        b = spec.drift(t, pts)
        sig = spec.diffusion(t, pts)
        sig_norm = np.linalg.norm(sig.reshape(len(pts), -1), axis=1)
        growth = (sig_norm + np.linalg.norm(b, axis=1)) / (1.0 + np.linalg.norm(pts, axis=1))
        j = int(np.argmax(growth))
        if growth[j] > worst_growth:
            worst_growth, growth_witness = float(growth[j]), {"t": float(t), "x": _as_list(pts[j])}
        for p in partners:
            dx = np.linalg.norm(pts - pts[p], axis=1)
            mask = dx > 0
            num = np.linalg.norm((sig - sig[p]).reshape(len(pts), -1), axis=1) + np.linalg.norm(b - b[p], axis=1)
            ratio = np.where(mask, num / np.where(mask, dx, 1.0), 0.0)
            j = int(np.argmax(ratio))
            if ratio[j] > worst_lip:
                worst_lip = float(ratio[j])
                lip_witness = {"t": float(t), "x": _as_list(pts[j]), "x_prime": _as_list(pts[p[j]])}
    worst = max(worst_lip, worst_growth)
    passed = bool(np.isfinite(worst) and worst <= s.lipschitz_cap)
    witness = None if passed else (lip_witness if worst_lip >= worst_growth else growth_witness)
    return Check(
        "lipschitz_growth",
        passed,
        s.lipschitz_cap - worst,
        witness,
        f"max Lipschitz ratio {worst_lip:.6g}, max growth ratio {worst_growth:.6g}",
    )


def _check_bounded(spec: ProblemSpec, pts: NDArray, times: NDArray, s: Sampling) -> Check:
    fvals = np.stack([spec.running_gain(t, pts) for t in times])
    gvals = spec.terminal_gain(pts)
    fmax = float(np.max(np.abs(fvals)))
    gmax = float(np.max(np.abs(gvals)))
    worst = max(fmax, gmax)
    passed = bool(np.isfinite(worst) and worst <= s.bound_cap)
    witness = None
    if not passed:
        if fmax >= gmax:
            i, j = np.unravel_index(int(np.argmax(np.abs(fvals))), fvals.shape)
            witness = {"t": float(times[i]), "x": _as_list(pts[j])}
        else:
            witness = {"t": spec.horizon, "x": _as_list(pts[int(np.argmax(np.abs(gvals)))])}
    return Check("bounded_payoffs", passed, s.bound_cap - worst, witness, f"sup|f| {fmax:.6g}, sup|g| {gmax:.6g}")


def _cone_infimum(cost: AffineCost, acts: NDArray, times: NDArray) -> tuple[float, dict]:
    """Infimum of ``cost`` over the closure of its cone, sampled in time.

    For the affine family the infimum over a cone is the zero-magnitude limit
    ``m(t) * fixed`` when ``proportional >= 0`` and ``-inf`` otherwise.
    """
    m = cost.factor(times)
    if cost.proportional < 0:
        return -math.inf, {"t": float(times[0]), "action": "unbounded ray"}
    limit = m * cost.fixed
    i = int(np.argmin(limit))
    best, witness = float(limit[i]), {"t": float(times[i]), "action": "zero limit"}
    if len(acts):
        vals = cost(times[:, None], acts[None, :, :])
        i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
        if vals[i, j] < best:
            best, witness = float(vals[i, j]), {"t": float(times[i]), "action": _as_list(acts[j])}
    return best, witness


def _check_cost_floor(spec: ProblemSpec, times: NDArray, s: Sampling) -> Check:
    inf_c, wc = _cone_infimum(spec.cost_I, spec.actions_I, times)
    inf_x, wx = _cone_infimum(spec.cost_II, spec.actions_II, times)
    margin = min(inf_c, inf_x) - s.k
    witness = None
    if margin < 0:
        witness = dict(player="I", **wc) if inf_c <= inf_x else dict(player="II", **wx)
    return Check("cost_floor", bool(margin >= 0), margin, witness, f"inf c {inf_c:.6g}, inf chi {inf_x:.6g}, k {s.k:g}")


def _pairwise_subadditivity(cost: AffineCost, acts: NDArray, times: NDArray, h: float):
    """Worst margin of ``cost(a1) + cost(a2) - h - cost(a1 + a2)`` over ordered pairs."""
    n = len(acts)
    if n == 0:
        return math.inf, None
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    sums = acts[i] + acts[j]
    tt = times[:, None]
    margin = cost(tt, acts[i][None]) + cost(tt, acts[j][None]) - h - cost(tt, sums[None])
    a, b = np.unravel_index(int(np.argmin(margin)), margin.shape)
    witness = {"t": float(times[a]), "a1": _as_list(acts[i[b]]), "a2": _as_list(acts[j[b]])}
    return float(margin[a, b]), witness


def _check_subadditivity(spec: ProblemSpec, times: NDArray, s: Sampling) -> Check:
    # sums of two elements of a convex cone stay in the cone, so no pair is skipped
    mc, wc = _pairwise_subadditivity(spec.cost_I, spec.actions_I, times, 0.0)
    mx, wx = _pairwise_subadditivity(spec.cost_II, spec.actions_II, times, 0.0)
    margin = min(mc, mx)
    passed = margin >= -s.tol
    witness = None if passed else (dict(player="I", **wc) if mc <= mx else dict(player="II", **wx))
    return Check("subadditivity", bool(passed), margin, witness)


def _check_terminal(spec: ProblemSpec, pts: NDArray, s: Sampling) -> Check:
    T = spec.horizon
    g = spec.terminal_gain
    gx = g(pts)
    margin, witness = math.inf, None
    if len(spec.actions_I):
        cand = g(pts[:, None, :] + spec.actions_I[None]) - spec.cost_I(T, spec.actions_I)[None]
        gap = gx[:, None] - cand
        i, j = np.unravel_index(int(np.argmin(gap)), gap.shape)
        if gap[i, j] < margin:
            margin = float(gap[i, j])
            witness = {"player": "I", "t": T, "x": _as_list(pts[i]), "action": _as_list(spec.actions_I[j])}
    if len(spec.actions_II):
        cand = g(pts[:, None, :] + spec.actions_II[None]) + spec.cost_II(T, spec.actions_II)[None]
        gap = cand - gx[:, None]
        i, j = np.unravel_index(int(np.argmin(gap)), gap.shape)
        if gap[i, j] < margin:
            margin = float(gap[i, j])
            witness = {"player": "II", "t": T, "x": _as_list(pts[i]), "action": _as_list(spec.actions_II[j])}
    passed = margin >= -s.tol
    return Check("no_terminal_impulse", bool(passed), margin, None if passed else witness)


def _check_strict(spec: ProblemSpec, times: NDArray, s: Sampling) -> Check:
    h = spec.h
    if not h > 0:
        return Check("strict_subadditivity", False, h, {"h": h}, "margin h must be positive")
    margin, witness = _pairwise_subadditivity(spec.cost_II, spec.actions_II, times, h)
    if witness is not None:
        witness = dict(kind="chi", **witness)
    U, V = spec.actions_I, spec.actions_II
    skipped = 0
    for a, b, c in itertools.product(range(len(U)), range(len(V)), range(len(U))):
        combo = U[a] + V[b] + U[c]
        if not spec.cone_I.contains(combo, tol=1e-12):
            skipped += 1
            continue
        vals = (
            spec.cost_I(times, U[a])
            - spec.cost_II(times, V[b])
            + spec.cost_I(times, U[c])
            - h
            - spec.cost_I(times, combo)
        )
        i = int(np.argmin(vals))
        if vals[i] < margin:
            margin = float(vals[i])
            witness = {
                "kind": "c",
                "t": float(times[i]),
                "xi1": _as_list(U[a]),
                "eta": _as_list(V[b]),
                "xi2": _as_list(U[c]),
            }
    passed = margin >= -s.tol
    return Check(
        "strict_subadditivity",
        bool(passed),
        margin,
        None if passed else witness,
        f"h {h:g}; {skipped} combinations outside cone I skipped",
    )


def validate_assumptions(spec: ProblemSpec, sampling: Sampling | None = None) -> ValidationReport:
    """Check the standing assumptions on a deterministic sample lattice.

    Failures are reported in the returned :class:`ValidationReport`, never
    raised.
    """
    s = sampling or Sampling()
    pts = s.lattice(spec.dim)
    times = s.time_samples(spec.horizon)
    checks = (
        _check_lipschitz(spec, pts, times, s),
        _check_bounded(spec, pts, times, s),
        _check_cost_floor(spec, times, s),
        _check_subadditivity(spec, times, s),
        _check_terminal(spec, pts, s),
        _check_strict(spec, times, s),
    )
    return ValidationReport(checks)
