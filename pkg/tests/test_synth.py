"""Program assembly for the evader-synthesis certificate."""

import math

import numpy as np
import pytest

from sosevade import conic
from sosevade.poly import Polynomial
from sosevade.semialg import NVARS, EnvironmentConfig
from sosevade.synth import (
    FARKAS_N, build_program, build_V, farkas_e, poly_from_gram, y_degree,
)


@pytest.fixture(scope="module")
def cfg():
    return EnvironmentConfig()


@pytest.fixture(scope="module")
def handles(cfg):
    return build_program(cfg)


class TestFarkasData:
    def test_n_stacks_plus_minus_identity(self):
        np.testing.assert_array_equal(FARKAS_N[:2], np.eye(2))
        np.testing.assert_array_equal(FARKAS_N[2:], -np.eye(2))

    def test_e_is_uniform_bound(self):
        np.testing.assert_array_equal(farkas_e(0.25), [0.25] * 4)


class TestBuildV:
    def test_squared_distance_to_target_center(self, cfg):
        V = build_V(cfg)
        assert V.evaluate([*cfg.x_r, 3.0, -2.0]) == pytest.approx(0.0)
        assert V.evaluate([0.0, 0.0, 0.0, 0.0]) == pytest.approx(cfg.R**2)

    def test_independent_of_pursuer(self, cfg):
        V = build_V(cfg)
        assert V.differentiate(2).is_zero() and V.differentiate(3).is_zero()

    def test_unit_example(self):
        cfg = EnvironmentConfig(x_r=(0.0, 4.0))
        assert build_V(cfg).evaluate([1.0, 4.0, 0.0, 0.0]) == pytest.approx(1.0)


class TestYDegree:
    @pytest.mark.parametrize("d_rho,expect", [(1, 0), (2, 2), (4, 4), (5, 4), (6, 6)])
    def test_even_cover_of_rho_gradient(self, d_rho, expect):
        cfg = EnvironmentConfig(d_rho=d_rho)
        assert y_degree(cfg) == expect


class TestBuildProgram:
    def test_constraint_family_count(self, handles):
        # 1 initial + 3 unsafe + 1 divergence + 4 input bounds, plus the
        # 4 entrywise-SOS y declarations and 2 equality identities: 15 total
        assert len(handles.multiplier_names) == 9
        assert len(handles.y_blocks) == 4
        eq_labels = {label for label, _ in handles.program.equalities}
        assert {"farkas_eq1", "farkas_eq2"} <= eq_labels

    def test_family_names(self, handles):
        assert set(handles.multiplier_names) == {
            "initial", "unsafe_arena_e", "unsafe_arena_p", "unsafe_capture",
            "divergence", "input_1m", "input_1p", "input_2m", "input_2p",
        }

    def test_decision_degrees(self, cfg, handles):
        assert handles.rho.degree == cfg.d_rho
        assert all(p.degree == cfg.d_psi for p in handles.psi)
        assert len(handles.rho.coeff_ids) == math.comb(cfg.d_rho + NVARS, NVARS)

    def test_free_multiplier_on_arena_surfaces(self, handles):
        # the two arena-boundary conditions hold on a surface h = 0, so their
        # first multiplier must be a free polynomial, not an SOS block
        from sosevade.soscomp import DecisionPoly
        assert isinstance(handles.multiplier_names["unsafe_arena_e"]["unsafe_arena_e:m0"],
                          DecisionPoly)
        assert isinstance(handles.multiplier_names["unsafe_arena_p"]["unsafe_arena_p:m0"],
                          DecisionPoly)

    def test_desk_scale_fits_internal_solver(self, handles):
        cp = conic.compile(handles.program)
        assert max(cp.psd_blocks) <= conic.MAX_BLOCK_SIDE
        assert len(cp.rows) <= conic.MAX_ROWS

    def test_row_labels_cover_all_families(self, handles):
        cp = conic.compile(handles.program)
        prefixes = {lab.split(":")[0] for lab in cp.row_labels}
        assert {"initial", "unsafe_arena_e", "unsafe_arena_p", "unsafe_capture",
                "divergence", "farkas_eq1", "farkas_eq2",
                "input_1m", "input_1p", "input_2m", "input_2p"} <= prefixes

    def test_paper_scale_flagged_export_only(self):
        cfg = EnvironmentConfig(d_rho=10, d_psi=10, alpha=18, d_sigma=6, d_lambda=6)
        handles = build_program(cfg)
        cp = conic.compile(handles.program)
        with pytest.raises(conic.ProgramTooLarge):
            conic.solve(cp)


class TestGramExtraction:
    def test_poly_from_gram_matches_quadratic_form(self, handles, rng):
        block = handles.y_blocks[0]
        side = block.side
        B = rng.normal(size=(side, side))
        Q = B @ B.T
        p = poly_from_gram(block, Q)
        for _ in range(20):
            x = rng.uniform(-2, 2, size=NVARS)
            v = np.array([Polynomial(NVARS, {m: 1.0}).evaluate(x) for m in block.basis])
            assert p.evaluate(x) == pytest.approx(v @ Q @ v, rel=1e-10, abs=1e-10)
        # PSD Gram means the extracted polynomial is pointwise nonnegative
        pts = rng.uniform(-3, 3, size=(200, NVARS))
        assert p.evaluate_many(pts).min() >= 0.0
