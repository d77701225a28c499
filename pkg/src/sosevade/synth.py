"""Assembly and solution of the full evader-synthesis SOS program.

Builds the density / controller feasibility program for a game instance,
solves it through the conic layer, and extracts a Certificate carrying the
rational controller u = psi/rho together with all multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic, soscomp
from .poly import Polynomial
from .semialg import NVARS, EnvironmentConfig, GameSets, build_sets
from .soscomp import EQ, GEQ, LEQ, PolyExpr, SosProgram

# Pursuer-control polytope: N w <= e with N stacking +/- identity rows.
FARKAS_N = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


def farkas_e(w_max: float) -> np.ndarray:
    return w_max * np.ones(4)


class SynthesisInfeasible(RuntimeError):
    """No certificate exists at the configured degrees and margin."""


class SynthesisTooLarge(RuntimeError):
    """Program exceeds internal-solver limits; use the SDPA export path."""


class SolverFailure(RuntimeError):
    pass


class VerificationFailed(RuntimeError):
    pass


def build_V(cfg: EnvironmentConfig) -> Polynomial:
    """Squared evader distance to the target center; positive off the target."""
    x1 = Polynomial.variable(0, NVARS)
    x2 = Polynomial.variable(1, NVARS)
    return (x1 - cfg.x_r[0]) ** 2 + (x2 - cfg.x_r[1]) ** 2


def y_degree(cfg: EnvironmentConfig) -> int:
    # y must absorb grad_p(rho): degree d_rho - 1, rounded up to even for SOS
    d = max(cfg.d_rho - 1, 0)
    return d + (d % 2)


@dataclass
class ProgramHandles:
    """Bookkeeping linking symbolic declarations to solver output."""

    program: SosProgram
    rho: soscomp.DecisionPoly
    psi: list
    y_blocks: list
    multiplier_names: dict = field(default_factory=dict)


@dataclass
class Certificate:
    rho_hat: Polynomial
    psi_hat: list  # 2 evader-control numerator polynomials
    y: list        # 4 Farkas dual polynomials
    multipliers: dict
    cfg: EnvironmentConfig
    V: Polynomial
    alpha: int
    solver_status: str = ""
    solver_summary: str = ""


def build_program(cfg: EnvironmentConfig, sets: GameSets | None = None) -> ProgramHandles:
    """The six certificate conditions as one SOS feasibility program."""
    cfg.validate()
    if sets is None:
        sets = build_sets(cfg)
    V = build_V(cfg)
    eps = cfg.epsilon_strict
    prog = SosProgram(NVARS)

    rho = prog.declare_poly("rho", cfg.d_rho)
    psi = [prog.declare_poly(f"psi{i + 1}", cfg.d_psi) for i in range(2)]
    rho_e = PolyExpr.from_decision(rho)
    psi_e = [PolyExpr.from_decision(p) for p in psi]

    handles = ProgramHandles(prog, rho, psi, [])

    # rho >= 0 on the joint initial set
    handles.multiplier_names["initial"] = prog.assert_nonneg_on(
        rho_e, [(sets.h_ie, LEQ), (sets.h_ip, LEQ)], cfg.d_sigma, label="initial")

    # rho < 0 on the unsafe union: arena boundary (evader side, off the
    # target lobe), arena boundary (pursuer side), and the capture set
    handles.multiplier_names["unsafe_arena_e"] = prog.assert_nonneg_on(
        -rho_e - eps, [(sets.h_Xe, EQ), (sets.h_re, GEQ)],
        cfg.d_sigma, cfg.d_lambda, label="unsafe_arena_e")
    handles.multiplier_names["unsafe_arena_p"] = prog.assert_nonneg_on(
        -rho_e - eps, [(sets.h_Xp, EQ)],
        cfg.d_sigma, cfg.d_lambda, label="unsafe_arena_p")
    handles.multiplier_names["unsafe_capture"] = prog.assert_nonneg_on(
        -rho_e - eps, [(sets.h_a, LEQ), (sets.h_Xe, LEQ), (sets.h_Xp, LEQ)],
        cfg.d_sigma, label="unsafe_capture")

    # Farkas dual y >= 0 globally, entrywise SOS
    y_exprs = []
    d_y = y_degree(cfg)
    for k in range(4):
        expr, block = prog.declare_sos(f"y{k + 1}", d_y)
        y_exprs.append(expr)
        handles.y_blocks.append(block)

    # equality condition: V y^T N + V grad_p(rho) - alpha rho grad_p(V) = 0
    dV_p = [V.differentiate(v) for v in (2, 3)]
    for j in range(2):
        yN_j = sum(
            (y_exprs[k] * FARKAS_N[k, j] for k in range(4) if FARKAS_N[k, j]),
            PolyExpr(NVARS),
        )
        expr = (yN_j + rho_e.differentiate(2 + j)) * V - (rho_e * dV_p[j]) * float(cfg.alpha)
        prog.assert_zero(expr, label=f"farkas_eq{j + 1}")

    # divergence condition.  The strictness margin is eps * V, not a constant:
    # at the target center both V and grad V vanish, so the whole expression
    # is structurally zero there and a constant margin would be unsatisfiable.
    dV_e = [V.differentiate(v) for v in (0, 1)]
    div_psi = psi_e[0].differentiate(0) + psi_e[1].differentiate(1)
    y_sum = sum(y_exprs[1:], y_exprs[0])
    div_expr = (
        div_psi * V
        - y_sum * (V * cfg.w_max)
        - (psi_e[0] * dV_e[0] + psi_e[1] * dV_e[1]) * float(cfg.alpha)
        - V * eps
    )
    handles.multiplier_names["divergence"] = prog.assert_nonneg_on(
        div_expr, [(sets.h_Xe, LEQ), (sets.h_Xp, LEQ)], cfg.d_sigma, label="divergence")

    # control bound |psi_i| <= u_max rho on the free-movement region, pulled
    # inward by input_bound_gap.  On the exact region boundary rho must be
    # strictly negative (unsafe conditions above), so demanding
    # u_max rho >= |psi| there as well would be contradictory; the gap leaves
    # a thin shell in which rho crosses zero.
    gap = cfg.input_bound_gap
    for i in range(2):
        for sign, tag in ((-1.0, "m"), (1.0, "p")):
            expr = rho_e * cfg.u_max + psi_e[i] * sign
            handles.multiplier_names[f"input_{i + 1}{tag}"] = prog.assert_nonneg_on(
                expr, [(sets.h_Xe + gap, LEQ), (sets.h_Xp + gap, LEQ), (sets.h_a - gap, GEQ)],
                cfg.d_sigma, label=f"input_{i + 1}{tag}")

    return handles


def _poly_from_decision(dp, values: dict[int, float]) -> Polynomial:
    return Polynomial(dp.nvars, {
        mono: values.get(vid, 0.0) for mono, vid in zip(dp.basis, dp.coeff_ids)
    })


def poly_from_gram(block, Q: np.ndarray) -> Polynomial:
    terms: dict[tuple[int, ...], float] = {}
    side = block.side
    for i in range(side):
        for j in range(side):
            mono = tuple(a + b for a, b in zip(block.basis[i], block.basis[j]))
            terms[mono] = terms.get(mono, 0.0) + Q[i, j]
    return Polynomial(block.nvars, terms)


def extract_certificate(cfg: EnvironmentConfig, handles: ProgramHandles,
                        cp: conic.ConicProgram, sol: conic.Solution) -> Certificate:
    prog = handles.program
    free_ids = prog.free_var_ids()
    values = {vid: sol.free_values[k] for k, vid in enumerate(free_ids)}

    rho = _poly_from_decision(handles.rho, values)
    psi = [_poly_from_decision(p, values) for p in handles.psi]
    y = [poly_from_gram(b, sol.psd_matrices[b.matrix_id]) for b in handles.y_blocks]

    multipliers: dict[str, Polynomial] = {}
    for family, named in handles.multiplier_names.items():
        for mname, obj in named.items():
            key = f"{family}" if mname == "__gram0__" else mname
            if isinstance(obj, soscomp.DecisionPoly):
                multipliers[key] = _poly_from_decision(obj, values)
            else:
                multipliers[key] = poly_from_gram(obj, sol.psd_matrices[obj.matrix_id])

    return Certificate(
        rho_hat=rho, psi_hat=psi, y=y, multipliers=multipliers,
        cfg=cfg, V=build_V(cfg), alpha=cfg.alpha,
        solver_status=sol.status, solver_summary=sol.summary(),
    )


def synthesize(cfg: EnvironmentConfig, tol: float = 1e-8,
               max_iter: int = 100, verify_samples: int = 2000,
               seed: int = 0):
    """Full pipeline: build, solve, extract, and re-audit a certificate.

    Returns (certificate, verification_report).  The audit runs before the
    caller can persist anything: a loose solver 'optimal' must not silently
    produce an unsafe controller.
    """
    handles = build_program(cfg)
    cp = conic.compile(handles.program)
    try:
        sol = conic.solve(cp, tol=tol, max_iter=max_iter)
    except conic.ProgramTooLarge as exc:
        raise SynthesisTooLarge(str(exc)) from exc
    if sol.status == conic.INFEASIBLE:
        raise SynthesisInfeasible(
            "no certificate at these degrees; consider raising d_rho/d_sigma "
            "or relaxing epsilon_strict")
    if sol.status != conic.OPTIMAL:
        raise SolverFailure(f"solver returned {sol.status}: {sol.message}")
    cert = extract_certificate(cfg, handles, cp, sol)

    from . import verify
    report = verify.check_certificate(cert, n_samples=verify_samples, seed=seed)
    if not report.overall:
        raise VerificationFailed(
            "solved certificate failed the independent audit:\n" + report.render())
    return cert, report
