"""Region functions, membership logic, and deterministic sampling."""

import math

import numpy as np
import pytest

from sosevade.semialg import (
    NVARS, EnvironmentConfig, Region, bounding_box, build_sets, membership,
    sample_region,
)


@pytest.fixture(scope="module")
def cfg():
    return EnvironmentConfig()


@pytest.fixture(scope="module")
def sets(cfg):
    return build_sets(cfg)


class TestConfig:
    def test_defaults_validate(self, cfg):
        cfg.validate()

    def test_paper_target_center_on_arena(self, cfg):
        assert math.hypot(*cfg.x_r) == pytest.approx(cfg.R)
        assert cfg.x_r[0] == pytest.approx(cfg.x_r[1])

    @pytest.mark.parametrize("kw", [
        dict(R=-1.0),
        dict(u_max=0.01, w_max=0.015),     # pursuer faster than evader
        dict(w_max=0.0),
        dict(alpha=0),
        dict(R_a=5.0),                     # catch disc swallows the arena
        dict(d_sigma=3),                   # odd SOS degree
        dict(epsilon_strict=0.0),
        dict(input_bound_gap=-1.0),
        dict(x_ie=(3.9, 0.0)),             # initial ball pokes out of the arena
        dict(x_ip=(0.5, -1.5)),            # initial balls inside the catch range
    ])
    def test_invalid_configs_rejected(self, kw):
        with pytest.raises(ValueError):
            EnvironmentConfig(**kw).validate()

    def test_dict_round_trip(self, cfg):
        again = EnvironmentConfig.from_dict(cfg.to_dict())
        assert again == cfg


class TestRegionFunctions:
    def test_values_at_centers(self, cfg, sets):
        # each region function equals -radius^2 at its own center
        assert sets.h_Xe.evaluate([0, 0, 1, 1]) == pytest.approx(-cfg.R**2)
        assert sets.h_Xp.evaluate([1, 1, 0, 0]) == pytest.approx(-cfg.R**2)
        assert sets.h_ie.evaluate([*cfg.x_ie, 0, 0]) == pytest.approx(-cfg.R_ie**2)
        assert sets.h_ip.evaluate([0, 0, *cfg.x_ip]) == pytest.approx(-cfg.R_ip**2)
        assert sets.h_re.evaluate([*cfg.x_r, 0, 0]) == pytest.approx(-cfg.R_r**2)

    def test_capture_function_is_squared_distance(self, cfg, sets, rng):
        for _ in range(50):
            x = rng.uniform(-4, 4, size=NVARS)
            d2 = (x[0] - x[2]) ** 2 + (x[1] - x[3]) ** 2
            assert sets.h_a.evaluate(x) == pytest.approx(d2 - cfg.R_a**2)

    def test_variable_separation(self, sets):
        # evader-side functions do not involve pursuer coordinates
        for p in (sets.h_Xe, sets.h_ie, sets.h_re):
            assert p.differentiate(2).is_zero() and p.differentiate(3).is_zero()
        for p in (sets.h_Xp, sets.h_ip):
            assert p.differentiate(0).is_zero() and p.differentiate(1).is_zero()


class TestMembership:
    def test_hand_picked_points(self, cfg, sets):
        origin_pair = np.zeros(NVARS)
        # origin pair is inside both arena discs, hence in X (capture is separate)
        assert membership(sets, Region.X, origin_pair)
        assert membership(sets, Region.CL_X_MINUS_XR, origin_pair)
        assert membership(sets, Region.XA, origin_pair)
        far_apart = np.array([1.0, 0.0, -1.0, 0.0])
        assert membership(sets, Region.X, far_apart)
        assert membership(sets, Region.XC, far_apart)
        assert not membership(sets, Region.XA, far_apart)
        centers = np.array([*cfg.x_ie, *cfg.x_ip])
        assert membership(sets, Region.XI, centers)
        target = np.array([*cfg.x_r, 0.0, 0.0])
        assert membership(sets, Region.XR, target)
        outside = np.array([10.0, 0.0, 0.0, 0.0])
        assert not membership(sets, Region.X, outside)

    def test_target_lobe_outside_arena_is_in_x(self, cfg, sets):
        # a point of the target ball just outside the arena circle
        scale = (cfg.R + cfg.R_r / 2) / cfg.R
        x = np.array([cfg.x_r[0] * scale, cfg.x_r[1] * scale, 0.0, 0.0])
        assert sets.h_Xe.evaluate(x) > 0
        assert membership(sets, Region.X, x)
        assert membership(sets, Region.XR, x)

    def test_unsafe_union_pieces(self, cfg, sets):
        evader_on_rim = np.array([-cfg.R, 0.0, 0.0, 0.0])
        assert membership(sets, Region.UNSAFE_BOUNDARY_UNION, evader_on_rim)
        pursuer_on_rim = np.array([0.0, 0.0, cfg.R, 0.0])
        assert membership(sets, Region.UNSAFE_BOUNDARY_UNION, pursuer_on_rim)
        captured = np.array([1.0, 1.0, 1.2, 1.0])
        assert membership(sets, Region.UNSAFE_BOUNDARY_UNION, captured)
        # evader on the rim inside the target ball is the target's border, not unsafe
        on_target_arc = np.array([*cfg.x_r, 0.0, 0.0])
        x = on_target_arc / np.array([1, 1, 1, 1])
        assert not membership(sets, Region.UNSAFE_BOUNDARY_UNION, x, tol=1e-6)
        interior = np.array([1.0, 0.0, -1.0, 0.0])
        assert not membership(sets, Region.UNSAFE_BOUNDARY_UNION, interior)

    def test_region_containments_by_audit(self, sets, rng):
        # Xa and Xc are subsets of cl(X \ Xr); Xi is inside Xc
        pts = rng.uniform(-4.5, 4.5, size=(100000, NVARS))
        for p in pts:
            if membership(sets, Region.XA, p) or membership(sets, Region.XC, p):
                assert membership(sets, Region.CL_X_MINUS_XR, p)
            if membership(sets, Region.XI, p):
                assert membership(sets, Region.XC, p)
                assert not membership(sets, Region.XA, p)
                assert not membership(sets, Region.XR, p)


class TestSampling:
    @pytest.mark.parametrize("region", [
        Region.XI, Region.XA, Region.XC, Region.CL_X_MINUS_XR,
        Region.UNSAFE_BOUNDARY_UNION,
    ])
    def test_samples_belong_to_region(self, sets, region):
        pts = sample_region(sets, region, 200, seed=7)
        assert pts.shape == (200, NVARS)
        tol = 1e-6 if region is Region.UNSAFE_BOUNDARY_UNION else 1e-9
        assert all(membership(sets, region, p, tol=tol) for p in pts)

    def test_deterministic(self, sets):
        a = sample_region(sets, Region.XC, 64, seed=3)
        b = sample_region(sets, Region.XC, 64, seed=3)
        np.testing.assert_array_equal(a, b)
        c = sample_region(sets, Region.XC, 64, seed=4)
        assert not np.array_equal(a, c)

    def test_unsafe_union_covers_all_three_pieces(self, cfg, sets):
        pts = sample_region(sets, Region.UNSAFE_BOUNDARY_UNION, 600, seed=1)
        he = sets.h_Xe.evaluate_many(pts)
        hp = sets.h_Xp.evaluate_many(pts)
        ha = sets.h_a.evaluate_many(pts)
        assert (np.abs(he) <= 1e-6).any()
        assert (np.abs(hp) <= 1e-6).any()
        assert (ha <= 0).any()

    def test_samples_stay_in_bounding_box(self, cfg, sets):
        lo, hi = bounding_box(cfg)
        pts = sample_region(sets, Region.CL_X_MINUS_XR, 100, seed=5)
        assert (pts >= lo).all() and (pts <= hi).all()
