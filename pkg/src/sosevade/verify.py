"""Independent sample-based auditing of certificates and simulation traces.

Deliberately avoids the SOS machinery: conditions are checked by direct
polynomial evaluation on sampled points, giving a non-circular audit of
what the solver claims.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial
from .semialg import NVARS, Region, build_sets, bounding_box, membership, sample_region
from .synth import FARKAS_N, farkas_e

EVAL_TOL = 1e-9
EQUALITY_TOL = 1e-7


@dataclass
class ConditionResult:
    name: str
    passed: bool
    worst: float            # most adverse sampled value (sign convention per condition)
    n_samples: int
    detail: str = ""


@dataclass
class VerificationReport:
    conditions: list[ConditionResult] = field(default_factory=list)
    equality_residuals: list[float] = field(default_factory=list)
    seed: int = 0

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.conditions)

    def render(self) -> str:
        lines = [f"seed={self.seed}", f"overall={'pass' if self.overall else 'FAIL'}"]
        for c in self.conditions:
            lines.append(
                f"{c.name}: {'pass' if c.passed else 'FAIL'} "
                f"worst={c.worst:.6e} samples={c.n_samples}"
                + (f" ({c.detail})" if c.detail else "")
            )
        for j, r in enumerate(self.equality_residuals):
            lines.append(f"equality_residual[{j}]={r:.6e}")
        return "\n".join(lines)


def _divergence_parts(cert) -> tuple[Polynomial, list[Polynomial]]:
    """Split the robust divergence expression into base(x) + c(x).w."""
    V, alpha = cert.V, cert.alpha
    psi = cert.psi_hat
    base = V * (psi[0].differentiate(0) + psi[1].differentiate(1))
    base = base - alpha * (V.differentiate(0) * psi[0] + V.differentiate(1) * psi[1])
    wcoeff = [
        V * cert.rho_hat.differentiate(2 + j) - alpha * cert.rho_hat * V.differentiate(2 + j)
        for j in range(2)
    ]
    return base, wcoeff


def _w_vertices(w_max: float) -> np.ndarray:
    return np.array([[s1 * w_max, s2 * w_max] for s1 in (-1, 1) for s2 in (-1, 1)])


def equality_residuals(cert) -> list[float]:
    """Coefficient-wise residual of the two Farkas equality identities."""
    V, alpha = cert.V, cert.alpha
    out = []
    for j in range(2):
        yN = Polynomial.zero(NVARS)
        for k in range(4):
            if FARKAS_N[k, j]:
                yN = yN + cert.y[k] * FARKAS_N[k, j]
        ident = V * yN + V * cert.rho_hat.differentiate(2 + j) \
            - alpha * cert.rho_hat * V.differentiate(2 + j)
        out.append(max((abs(c) for c in ident.terms.values()), default=0.0))
    return out


def check_certificate(cert, n_samples: int = 10000, seed: int = 0) -> VerificationReport:
    """Sample-based audit of all six certificate conditions."""
    cfg = cert.cfg
    sets = build_sets(cfg)
    report = VerificationReport(seed=seed)
    rng = np.random.default_rng(seed)
    lo, hi = bounding_box(cfg)

    # (i) rho >= 0 on the initial set
    pts = sample_region(sets, Region.XI, n_samples, seed=seed)
    vals = cert.rho_hat.evaluate_many(pts)
    report.conditions.append(ConditionResult(
        "rho_nonneg_on_initial", float(vals.min()) >= -EVAL_TOL, float(vals.min()), len(pts)))

    # (ii) rho strictly negative on the unsafe union
    pts = sample_region(sets, Region.UNSAFE_BOUNDARY_UNION, n_samples, seed=seed + 1)
    vals = cert.rho_hat.evaluate_many(pts)
    thresh = -cfg.epsilon_strict / 2
    report.conditions.append(ConditionResult(
        "rho_negative_on_unsafe", float(vals.max()) <= thresh, float(vals.max()), len(pts),
        detail=f"threshold {thresh:g}"))

    # (iii) y entrywise nonnegative on random box points
    box = rng.uniform(lo, hi, size=(n_samples, NVARS))
    worst_y = min(float(yk.evaluate_many(box).min()) for yk in cert.y)
    report.conditions.append(ConditionResult(
        "y_nonneg", worst_y >= -EVAL_TOL, worst_y, n_samples))

    # (iv) equality identities, coefficient-wise
    resids = equality_residuals(cert)
    report.equality_residuals = resids
    report.conditions.append(ConditionResult(
        "farkas_equality", max(resids) < EQUALITY_TOL, max(resids), 2))

    # (v) robust divergence inequality at all W-vertices
    pts = sample_region(sets, Region.CL_X_MINUS_XR, n_samples, seed=seed + 2)
    base, wcoeff = _divergence_parts(cert)
    b = base.evaluate_many(pts)
    c1 = wcoeff[0].evaluate_many(pts)
    c2 = wcoeff[1].evaluate_many(pts)
    verts = _w_vertices(cfg.w_max)
    div_vals = b[:, None] + np.outer(c1, verts[:, 0]) + np.outer(c2, verts[:, 1])
    report.conditions.append(ConditionResult(
        "divergence_positive", float(div_vals.min()) > 0.0, float(div_vals.min()), len(pts)))

    # (vi) control-bound domination on the free-movement region, audited on
    # the same inwardly offset domain the synthesis imposes it on: on the
    # boundary shells the unsafe conditions force rho < 0, so the bound can
    # only hold strictly inside.
    pts = sample_region(sets, Region.XC, n_samples, seed=seed + 3)
    gap = cfg.input_bound_gap
    inner = (
        (sets.h_Xe.evaluate_many(pts) <= -gap)
        & (sets.h_Xp.evaluate_many(pts) <= -gap)
        & (sets.h_a.evaluate_many(pts) >= gap)
    )
    pts = pts[inner]
    rho_v = cert.rho_hat.evaluate_many(pts)
    worst = np.inf
    for i in range(2):
        psi_v = cert.psi_hat[i].evaluate_many(pts)
        margin = cfg.u_max * rho_v - np.abs(psi_v)
        worst = min(worst, float(margin.min()))
    report.conditions.append(ConditionResult(
        "control_bound", worst >= -EVAL_TOL, worst, len(pts),
        detail=f"inner offset {gap:g}"))

    return report


def check_farkas_pointwise(cert, x, n_w_samples: int = 1000, seed: int = 0) -> bool:
    """Brute-force check that the divergence inequality holds for all w in W.

    The expression is affine in w, so the four box vertices decide it; random
    interior samples are included as a consistency audit of that argument.
    """
    x = np.asarray(x, dtype=float)
    base, wcoeff = _divergence_parts(cert)
    b = base.evaluate(x)
    c = np.array([wcoeff[0].evaluate(x), wcoeff[1].evaluate(x)])
    w_max = cert.cfg.w_max
    for w in _w_vertices(w_max):
        if b + c @ w <= 0:
            return False
    rng = np.random.default_rng(seed)
    ws = rng.uniform(-w_max, w_max, size=(n_w_samples, 2))
    return bool((b + ws @ c > 0).all())


@dataclass
class TraceReport:
    checks: list[ConditionResult] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = [f"overall={'pass' if self.overall else 'FAIL'}"]
        for c in self.checks:
            lines.append(
                f"{c.name}: {'pass' if c.passed else 'FAIL'} worst={c.worst:.6e}"
                + (f" ({c.detail})" if c.detail else ""))
        return "\n".join(lines)


def check_trace(trace, cfg) -> TraceReport:
    """Audit a closed-loop trace for safety, containment, and input bounds."""
    from .sim import Outcome

    sets = build_sets(cfg)
    report = TraceReport()
    states = np.array([row.x for row in trace.rows])
    dists = np.linalg.norm(states[:, :2] - states[:, 2:], axis=1)

    min_dist = float(dists.min())
    report.checks.append(ConditionResult(
        "no_capture", min_dist > cfg.R_a, min_dist, len(dists),
        detail=f"catch radius {cfg.R_a}"))

    recomputed = np.abs(dists - np.array([row.dist for row in trace.rows])).max()
    report.checks.append(ConditionResult(
        "dist_column_consistent", recomputed < 1e-9, float(recomputed), len(dists)))

    in_x = all(membership(sets, Region.X, s) for s in states)
    report.checks.append(ConditionResult("stays_in_arena", in_x, 0.0 if in_x else 1.0, len(states)))

    final_in_xr = membership(sets, Region.XR, states[-1])
    consistent = final_in_xr == (trace.outcome is Outcome.REACHED_TARGET)
    report.checks.append(ConditionResult(
        "outcome_consistent", consistent, 0.0 if consistent else 1.0, 1,
        detail=f"outcome={trace.outcome.value}"))

    us = np.array([row.u for row in trace.rows])
    max_u = float(np.abs(us).max()) if us.size else 0.0
    report.checks.append(ConditionResult(
        "control_bound", max_u <= cfg.u_max + 1e-12, max_u, len(us),
        detail=f"u_max {cfg.u_max}"))
    return report
