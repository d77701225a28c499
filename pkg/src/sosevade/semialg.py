"""Game environment: circular region functions and derived semi-algebraic sets.

State is the joint vector x = (x1, x2, x3, x4) with (x1, x2) the evader and
(x3, x4) the pursuer position.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict

import numpy as np

from .poly import Polynomial

NVARS = 4
EVADER_VARS = (0, 1)
PURSUER_VARS = (2, 3)

BOUNDARY_TOL = 1e-9


class Region(enum.Enum):
    X = "X"                      # arena (with the target lobe) for both agents
    XI = "Xi"                    # joint initial set
    XA = "Xa"                    # capture set
    XR = "Xr"                    # target crescent
    XC = "Xc"                    # free-movement region
    CL_X_MINUS_XR = "ClXMinusXr"
    UNSAFE_BOUNDARY_UNION = "UnsafeBoundaryUnion"


@dataclass(frozen=True)
class EnvironmentConfig:
    """All radii, centers, bounds and degree choices for one game instance."""

    R: float = 4.0
    R_ie: float = 0.3
    R_ip: float = 0.3
    R_a: float = 0.5
    R_r: float = 0.5
    x_r: tuple[float, float] = (4.0 * math.cos(math.pi / 4), 4.0 * math.sin(math.pi / 4))
    x_ie: tuple[float, float] = (0.5, -1.8)
    x_ip: tuple[float, float] = (0.5, 1.0)
    u_max: float = 0.015
    w_max: float = 0.01
    alpha: int = 2
    d_rho: int = 4
    d_psi: int = 4
    d_sigma: int = 2
    d_lambda: int = 2
    epsilon_strict: float = 1e-4
    # Inner offset (in h-function units) for the control-bound domain.  The
    # unsafe conditions force rho < 0 on the arena shells while the printed
    # control-bound domain touches them and forces rho >= 0 there; a strictly
    # positive gap restores feasibility of the joint system.
    input_bound_gap: float = 1e-4

    def validate(self) -> None:
        for name in ("R", "R_ie", "R_ip", "R_a", "R_r"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (self.u_max > self.w_max > 0):
            raise ValueError("need u_max > w_max > 0 for a feasible escape strategy")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.R_a >= self.R:
            raise ValueError("catch disc must fit strictly inside the arena (R_a < R)")
        for name in ("d_rho", "d_psi", "d_sigma", "d_lambda"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.d_sigma % 2 or self.d_lambda < 0:
            raise ValueError("d_sigma must be even")
        if self.epsilon_strict <= 0:
            raise ValueError("epsilon_strict must be positive")
        if self.input_bound_gap < 0:
            raise ValueError("input_bound_gap must be nonnegative")
        self._check_disjoint()

    def _check_disjoint(self) -> None:
        # Initial balls, target crescent and capture set must not overlap.
        # Sufficient geometric checks for the circular geometry used here.
        d_ie_r = math.dist(self.x_ie, self.x_r)
        if d_ie_r <= self.R_ie + self.R_r:
            raise ValueError("evader initial ball intersects the target ball")
        if math.hypot(*self.x_ie) + self.R_ie >= self.R:
            raise ValueError("evader initial ball leaves the arena")
        if math.hypot(*self.x_ip) + self.R_ip >= self.R:
            raise ValueError("pursuer initial ball leaves the arena")
        if math.dist(self.x_ie, self.x_ip) <= self.R_ie + self.R_ip + self.R_a:
            raise ValueError("initial balls intersect the capture set")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentConfig":
        kwargs = dict(d)
        for key in ("x_r", "x_ie", "x_ip"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        for key in ("alpha", "d_rho", "d_psi", "d_sigma", "d_lambda"):
            if key in kwargs:
                kwargs[key] = int(kwargs[key])
        return cls(**kwargs)


def _circle(nvars: int, ix: int, iy: int, center: tuple[float, float], radius: float) -> Polynomial:
    x = Polynomial.variable(ix, nvars)
    y = Polynomial.variable(iy, nvars)
    return (x - center[0]) ** 2 + (y - center[1]) ** 2 - radius**2


@dataclass(frozen=True)
class GameSets:
    """The six region functions over the 4-dimensional joint state."""

    h_Xe: Polynomial
    h_Xp: Polynomial
    h_ie: Polynomial
    h_ip: Polynomial
    h_a: Polynomial
    h_re: Polynomial
    cfg: EnvironmentConfig


def build_sets(cfg: EnvironmentConfig) -> GameSets:
    cfg.validate()
    return GameSets(
        h_Xe=_circle(NVARS, 0, 1, (0.0, 0.0), cfg.R),
        h_Xp=_circle(NVARS, 2, 3, (0.0, 0.0), cfg.R),
        h_ie=_circle(NVARS, 0, 1, cfg.x_ie, cfg.R_ie),
        h_ip=_circle(NVARS, 2, 3, cfg.x_ip, cfg.R_ip),
        h_a=Polynomial(NVARS, {
            (2, 0, 0, 0): 1, (0, 0, 2, 0): 1, (1, 0, 1, 0): -2,
            (0, 2, 0, 0): 1, (0, 0, 0, 2): 1, (0, 1, 0, 1): -2,
            (0, 0, 0, 0): -cfg.R_a**2,
        }),
        h_re=_circle(NVARS, 0, 1, cfg.x_r, cfg.R_r),
        cfg=cfg,
    )


def membership(sets: GameSets, region: Region, x, tol: float = BOUNDARY_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(region_mask(sets, region, x[None, :], tol)[0])


class SamplingExhausted(RuntimeError):
    pass


def bounding_box(cfg: EnvironmentConfig) -> tuple[float, float]:
    half = cfg.R + cfg.R_r
    return (-half, half)


def region_mask(sets: GameSets, region: Region, pts: np.ndarray,
                tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorized membership for a batch of points, shape (N, 4) -> (N,) bool."""
    pts = np.asarray(pts, dtype=float)
    he = sets.h_Xe.evaluate_many(pts)
    hp = sets.h_Xp.evaluate_many(pts)
    ha = sets.h_a.evaluate_many(pts)
    hre = sets.h_re.evaluate_many(pts)
    if region is Region.X:
        return ((he <= 0) | (hre <= 0)) & (hp <= 0)
    if region is Region.XI:
        return (sets.h_ie.evaluate_many(pts) < 0) & (sets.h_ip.evaluate_many(pts) < 0)
    if region is Region.XA:
        return (he <= 0) & (hp <= 0) & (ha <= 0)
    if region is Region.XR:
        return (he >= 0) & (hre <= 0) & (hp <= 0)
    if region is Region.XC:
        return (he <= 0) & (hp <= 0) & (ha >= 0)
    if region is Region.CL_X_MINUS_XR:
        return (he <= 0) & (hp <= 0)
    if region is Region.UNSAFE_BOUNDARY_UNION:
        return (
            ((np.abs(he) <= tol) & (hre > 0))
            | (np.abs(hp) <= tol)
            | ((ha <= 0) & (he <= 0) & (hp <= 0))
        )
    raise ValueError(f"unknown region {region}")


def _sample_disc(rng: np.random.Generator, center: tuple[float, float],
                 radius: float, count: int) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(0, 1, size=count))
    theta = rng.uniform(0, 2 * np.pi, size=count)
    return np.column_stack([center[0] + r * np.cos(theta),
                            center[1] + r * np.sin(theta)])


def sample_region(sets: GameSets, region: Region, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic uniform sampling of ``count`` points of a region.

    The initial set is a product of two discs and is sampled directly in
    polar form; other interior regions use vectorized rejection sampling in
    the bounding box.  The measure-zero boundary pieces of the unsafe union
    are generated by projecting random directions onto the defining circles.
    """
    rng = np.random.default_rng(seed)
    cfg = sets.cfg
    lo, hi = bounding_box(cfg)
    if region is Region.UNSAFE_BOUNDARY_UNION:
        return _sample_unsafe_union(sets, count, rng)
    if region is Region.XI:
        # uniform on the product of the two open initial discs
        return np.hstack([
            _sample_disc(rng, cfg.x_ie, cfg.R_ie, count),
            _sample_disc(rng, cfg.x_ip, cfg.R_ip, count),
        ])
    chunks = []
    got = 0
    attempts = 0
    batch = max(4096, 4 * count)
    while got < count:
        pts = rng.uniform(lo, hi, size=(batch, NVARS))
        attempts += batch
        good = pts[region_mask(sets, region, pts)]
        if len(good):
            chunks.append(good)
            got += len(good)
        if attempts > 1e7 and got < max(1, attempts * 1e-6):
            raise SamplingExhausted(f"acceptance rate too low for region {region}")
    return np.vstack(chunks)[:count]


def _sample_unsafe_union(sets: GameSets, count: int, rng: np.random.Generator) -> np.ndarray:
    cfg = sets.cfg
    lo, hi = bounding_box(cfg)
    out = np.empty((count, NVARS))
    kinds = rng.integers(0, 3, size=count)
    i = 0
    while i < count:
        kind = kinds[i]
        p = rng.uniform(lo, hi, size=NVARS)
        if kind == 0:
            # evader on the arena circle, outside the target ball; pursuer inside
            theta = rng.uniform(0, 2 * np.pi)
            p[0], p[1] = cfg.R * np.cos(theta), cfg.R * np.sin(theta)
            rp = np.hypot(p[2], p[3])
            if rp > cfg.R:
                p[2:] *= (cfg.R * rng.uniform(0, 1)) / rp
            if sets.h_re.evaluate(p) <= 0:
                continue
        elif kind == 1:
            # pursuer on the arena circle
            theta = rng.uniform(0, 2 * np.pi)
            p[2], p[3] = cfg.R * np.cos(theta), cfg.R * np.sin(theta)
            re = np.hypot(p[0], p[1])
            if re > cfg.R:
                p[:2] *= (cfg.R * rng.uniform(0, 1)) / re
        else:
            # interior of the capture set: place the pursuer near the evader
            re = np.hypot(p[0], p[1])
            if re > cfg.R:
                p[:2] *= (cfg.R * rng.uniform(0, 1)) / re
            offset = rng.uniform(-cfg.R_a / 2, cfg.R_a / 2, size=2)
            p[2], p[3] = p[0] + offset[0], p[1] + offset[1]
            if not membership(sets, Region.XA, p):
                continue
        if membership(sets, Region.UNSAFE_BOUNDARY_UNION, p, tol=1e-6):
            out[i] = p
            i += 1
    return out
