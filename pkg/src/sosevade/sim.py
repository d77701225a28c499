"""Closed-loop simulation of the joint integrator game.

The evader runs the rational controller u = psi/rho from a certificate; the
pursuer follows one of the scripted strategies.  Dynamics are pure
integrators, so forward Euler is exact for piecewise-constant inputs.
"""

from __future__ import annotations

import enum
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .semialg import Region, build_sets, membership

log = logging.getLogger(__name__)


class Strategy(enum.Enum):
    TAIL_CHASING = "tail-chasing"
    GO_TO_MIDDLE = "go-to-middle"
    BOX_SATURATING = "box-saturating"  # stress variant: saturates the inf-norm box


class Outcome(enum.Enum):
    REACHED_TARGET = "ReachedTarget"
    CAPTURED = "Captured"
    LEFT_ARENA = "LeftArena"
    TIMEOUT = "Timeout"


@dataclass
class SimConfig:
    dt: float = 0.1
    t_max: float = 2000.0
    strategy: Strategy = Strategy.TAIL_CHASING
    x0: tuple = (0.5, -1.8, 0.5, 1.0)
    singularity_floor: float | None = None  # default: scale-aware, from rho coefficients

    def validate(self, cfg) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt * cfg.u_max > cfg.R_a / 10:
            raise ValueError("dt too large: per-step motion must be small vs the catch radius")


@dataclass
class TraceRow:
    t: float
    x: tuple
    u: tuple
    w: tuple
    rho: float
    dist: float


@dataclass
class Trace:
    rows: list = field(default_factory=list)
    outcome: Outcome = Outcome.TIMEOUT
    singular_steps: int = 0


def default_singularity_floor(cert) -> float:
    scale = max((abs(c) for c in cert.rho_hat.terms.values()), default=1.0)
    return 1e-9 * scale


def evader_control(cert, x, singularity_floor: float | None = None) -> np.ndarray:
    """u = psi(x)/rho(x), clamped per axis; saturated fallback near rho = 0."""
    if singularity_floor is None:
        singularity_floor = default_singularity_floor(cert)
    u_max = cert.cfg.u_max
    rho = cert.rho_hat.evaluate(x)
    psi = np.array([p.evaluate(x) for p in cert.psi_hat])
    if abs(rho) >= singularity_floor:
        u = psi / rho
    else:
        log.warning("rho singular at %s (|rho|=%.3e); saturating control", x, abs(rho))
        u = u_max * np.sign(psi)
    return np.clip(u, -u_max, u_max)


def pursuer_control(strategy: Strategy, x, w_max: float, x_r=None) -> np.ndarray:
    """Scripted pursuer moving at full speed along a strategy direction."""
    x = np.asarray(x, dtype=float)
    xe, xp = x[:2], x[2:]
    if strategy is Strategy.TAIL_CHASING:
        d = xe - xp
    elif strategy is Strategy.GO_TO_MIDDLE:
        if x_r is None:
            raise ValueError("go-to-middle needs the target center")
        d = (xe + np.asarray(x_r, dtype=float)) / 2.0 - xp
    elif strategy is Strategy.BOX_SATURATING:
        d = xe - xp
        n = np.abs(d).max()
        if n < 1e-12:
            return np.zeros(2)
        return w_max * np.clip(d / n, -1.0, 1.0)
    else:
        raise ValueError(f"unknown strategy {strategy}")
    n = np.linalg.norm(d)
    if n < 1e-12:
        return np.zeros(2)
    return w_max * d / n


def step(x, u, w, dt: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x + dt * np.concatenate([np.asarray(u, dtype=float), np.asarray(w, dtype=float)])


def run(cert, simcfg: SimConfig) -> Trace:
    """Iterate the closed loop until a terminal event or the horizon."""
    cfg = cert.cfg
    simcfg.validate(cfg)
    sets = build_sets(cfg)
    x = np.asarray(simcfg.x0, dtype=float)
    if not membership(sets, Region.XI, x):
        raise ValueError(f"initial state {tuple(x)} is not in the initial set")
    floor = simcfg.singularity_floor
    if floor is None:
        floor = default_singularity_floor(cert)

    trace = Trace()
    t = 0.0
    n_steps = int(round(simcfg.t_max / simcfg.dt))
    for _ in range(n_steps + 1):
        rho = cert.rho_hat.evaluate(x)
        u = evader_control(cert, x, singularity_floor=floor)
        if abs(rho) < floor:
            trace.singular_steps += 1
        w = pursuer_control(simcfg.strategy, x, cfg.w_max, x_r=cfg.x_r)
        dist = float(np.linalg.norm(x[:2] - x[2:]))
        trace.rows.append(TraceRow(t, tuple(x), tuple(u), tuple(w), float(rho), dist))

        if membership(sets, Region.XR, x):
            trace.outcome = Outcome.REACHED_TARGET
            return trace
        if dist <= cfg.R_a:
            trace.outcome = Outcome.CAPTURED
            return trace
        if not membership(sets, Region.X, x):
            trace.outcome = Outcome.LEFT_ARENA
            return trace
        x = step(x, u, w, simcfg.dt)
        t += simcfg.dt
    trace.outcome = Outcome.TIMEOUT
    return trace


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

CSV_HEADER = "t,x1,x2,x3,x4,u1,u2,w1,w2,rho,dist"


def trace_to_csv(trace: Trace, extra_comments: list[str] | None = None) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in trace.rows:
        fields = [r.t, *r.x, *r.u, *r.w, r.rho, r.dist]
        buf.write(",".join(f"{v:.12g}" for v in fields) + "\n")
    for comment in extra_comments or []:
        buf.write(f"# {comment}\n")
    buf.write(f"# outcome={trace.outcome.value}\n")
    return buf.getvalue()


def trace_from_csv(text: str) -> Trace:
    trace = Trace()
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError("missing or unexpected CSV header")
    for ln in lines[1:]:
        s = ln.strip()
        if not s:
            continue
        if s.startswith("#"):
            if "outcome=" in s:
                trace.outcome = Outcome(s.split("outcome=")[1].strip())
            continue
        vals = [float(tok) for tok in s.split(",")]
        if len(vals) != 11:
            raise ValueError(f"bad CSV row: {s!r}")
        trace.rows.append(TraceRow(
            vals[0], tuple(vals[1:5]), tuple(vals[5:7]), tuple(vals[7:9]),
            vals[9], vals[10]))
    return trace
