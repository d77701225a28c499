import numpy as np
import pytest

from sosevade.poly import Polynomial, monomial_basis
from sosevade.semialg import NVARS
from sosevade.synth import Certificate, build_V


def random_polynomial(rng: np.random.Generator, nvars: int, maxdeg: int,
                      density: float = 0.5, scale: float = 2.0) -> Polynomial:
    basis = monomial_basis(nvars, maxdeg)
    terms = {}
    for mono in basis:
        if rng.uniform() < density:
            terms[mono] = rng.uniform(-scale, scale)
    return Polynomial(nvars, terms)


def hand_certificate(cfg, rho, psi, y=None) -> Certificate:
    """Certificate shell around hand-written polynomials, for audit tests."""
    if y is None:
        y = [Polynomial.zero(NVARS) for _ in range(4)]
    return Certificate(
        rho_hat=rho, psi_hat=list(psi), y=list(y), multipliers={},
        cfg=cfg, V=build_V(cfg), alpha=cfg.alpha,
        solver_status="HandBuilt", solver_summary="")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
