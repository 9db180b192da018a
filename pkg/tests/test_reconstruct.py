import math

import numpy as np
import pytest

from multibeta.beta import QuadratureSpec, combined_beta
from multibeta.calibration import KAPPA_C
from multibeta.errors import DegenerateSimplex
from multibeta.funcmodel import make_field
from multibeta.geometry import Box
from multibeta.reconstruct import (base_simplex, build_global_affine,
                                   planar_beta2, select_transversal_planes,
                                   verify_reconstruction)

QUAD = QuadratureSpec(mc_samples=256, seed=3)
UNIT2 = Box((0.0, 0.0), (1.0, 1.0))
UNIT3 = Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


class TestCombined:
    def test_affine_zero(self):
        fld = make_field("affine", 2, a=[0.4, -0.7], b=0.2)
        assert combined_beta(fld, UNIT2, QUAD) <= 1e-9

    def test_regression_lock(self):
        fld = make_field("pwlinear", 2, xs=[0.0, 0.5, 1.0], ys=[0.5, 0.0, 0.5])
        quad = QuadratureSpec(seed=7)
        val = combined_beta(fld, UNIT2, quad)
        assert val == pytest.approx(0.10157754044111342, abs=1e-15)

    def test_dominates_rms_average(self):
        fld = make_field("cone", 2, x0=[0.4, 0.6])
        val = combined_beta(fld, UNIT2, QUAD)
        assert val >= val / math.sqrt(2.0)
        assert val > 0


class TestGlobalAffine:
    def test_triangle_interpolation(self):
        corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        A = build_global_affine(corners, [1.0, 2.0, 3.0])
        # values 1, 2, 3 at the corners force A(x, y) = 1 + x + 2y
        assert np.allclose(A.a, [1.0, 2.0], atol=1e-12)
        assert A.intercept == pytest.approx(1.0, abs=1e-12)

    def test_affine_recovery(self):
        fld = make_field("affine", 3, a=[0.3, -0.8, 0.5], b=-0.1)
        sx = base_simplex(UNIT3)
        A = build_global_affine(sx.v, fld.eval(sx.v))
        assert np.allclose(A.a, [0.3, -0.8, 0.5], atol=1e-12)
        assert A.intercept == pytest.approx(-0.1, abs=1e-12)

    def test_collinear_corners(self):
        with pytest.raises(DegenerateSimplex):
            build_global_affine([(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)], [0.0, 1.0, 2.0])


class TestBaseSimplex:
    @pytest.mark.parametrize("Q", [UNIT2, UNIT3, Box((2.0, -1.0), (0.5, 0.5))])
    def test_nesting(self, Q):
        sx = base_simplex(Q)
        c = 1.0 / 20.0
        assert np.all(sx.contains(Q.dilate(2.0 * c).corners()))
        assert np.all(Q.dilate(0.5).contains(sx.v, tol=1e-12))

    def test_positive_volume(self):
        for Q in (UNIT2, UNIT3):
            assert base_simplex(Q).volume > 0


class TestSelection:
    def test_affine_accepts_unperturbed(self):
        fld = make_field("affine", 2, a=[1.0, 0.5], b=0.0)
        sel = select_transversal_planes(fld, UNIT2, 0.25, 0.05, 8.0, 0, QUAD)
        assert sel.accepted
        assert sel.draw_index == 0
        assert sel.max_restricted <= 1e-10
        assert sel.max_mismatch <= 1e-10
        assert sel.max_metric == 0.0

    def test_cone_certifies(self):
        fld = make_field("cone", 2, x0=[0.45, 0.55])
        sel = select_transversal_planes(fld, UNIT2, 0.25, 0.05, 8.0, 7, QUAD)
        assert sel.accepted
        assert sel.max_metric <= 0.05
        assert len(sel.planes) == 3
        assert sel.corner_points.shape == (3, 2)

    def test_determinism(self):
        fld = make_field("cone", 2, x0=[0.45, 0.55])
        s1 = select_transversal_planes(fld, UNIT2, 0.25, 0.05, 8.0, 7, QUAD)
        s2 = select_transversal_planes(fld, UNIT2, 0.25, 0.05, 8.0, 7, QUAD)
        assert s1.draw_index == s2.draw_index
        assert s1.planes == s2.planes
        assert np.array_equal(s1.mismatches, s2.mismatches)


class TestVerify:
    def test_affine_everything_zero(self):
        fld = make_field("affine", 2, a=[0.7, -0.3], b=0.25)
        rep = verify_reconstruction(fld, UNIT2, seed=0, quad=QUAD)
        assert rep.selection.accepted
        assert rep.beta2_small_direct <= 1e-10
        assert rep.beta2_small_via_affine <= 1e-10
        assert rep.combined_large <= 1e-9
        # the reconstructed map is f itself
        assert np.allclose(rep.affine.a, [0.7, -0.3], atol=1e-10)
        assert rep.affine.intercept == pytest.approx(0.25, abs=1e-10)

    def test_corner_interpolation_exact(self):
        fld = make_field("cone", 2, x0=[0.45, 0.55])
        rep = verify_reconstruction(fld, UNIT2, seed=7, quad=QUAD)
        vals = fld.eval(rep.simplex.v)
        assert np.allclose(rep.affine(rep.simplex.v), vals, atol=1e-12)

    def test_direct_never_beats_fit(self):
        # the direct beta_2 is the optimal fit on cQ, so any specific affine
        # map (including the reconstructed one) scores at least as high
        for kind, params in (("cone", {"x0": [0.45, 0.55]}),
                             ("bump", {"x0": [0.5, 0.4], "scale": 0.4})):
            fld = make_field(kind, 2, **params)
            rep = verify_reconstruction(fld, UNIT2, seed=7, quad=QUAD)
            assert rep.beta2_small_direct <= rep.beta2_small_via_affine + 1e-12

    def test_corner_mismatch_certificate(self):
        # accepted draws bound every corner mismatch by the calibrated
        # multiple of the large-box reference per unit diameter
        fld = make_field("cone", 2, x0=[0.45, 0.55])
        rep = verify_reconstruction(fld, UNIT2, seed=7, quad=QUAD)
        sel = rep.selection
        assert sel.accepted
        CQ = UNIT2.dilate(8.0)
        assert sel.max_mismatch <= KAPPA_C * sel.reference * CQ.diameter + 1e-9

    def test_small_box_in_simplex(self):
        fld = make_field("cone", 3, x0=[0.45, 0.55, 0.5])
        rep = verify_reconstruction(fld, UNIT3, seed=7,
                           quad=QuadratureSpec(nodes=5, restricted_nodes=9,
                                               mc_samples=64, seed=3))
        assert np.all(rep.simplex.contains(UNIT3.dilate(0.1).corners()))

    def test_seed_determinism(self):
        fld = make_field("cone", 2, x0=[0.45, 0.55])
        r1 = verify_reconstruction(fld, UNIT2, seed=7, quad=QUAD)
        r2 = verify_reconstruction(fld, UNIT2, seed=7, quad=QUAD)
        assert r1.beta2_small_direct == r2.beta2_small_direct
        assert r1.combined_large == r2.combined_large
        assert r1.line_integral == r2.line_integral
        assert tuple(r1.affine.a) == tuple(r2.affine.a)

    def test_invalid_small_factor(self):
        fld = make_field("cone", 2, x0=[0.5, 0.5])
        with pytest.raises(ValueError):
            verify_reconstruction(fld, UNIT2, c=0.3, quad=QUAD)


class TestPlanarRoute:
    def test_affine_zero(self):
        fld = make_field("affine", 2, a=[0.2, 0.9], b=0.0)
        val = planar_beta2(fld, UNIT2, [1.0, 0.4], QuadratureSpec(restricted_nodes=17))
        assert val <= 1e-9

    def test_agrees_with_tensor_grid(self):
        from multibeta.beta import beta_p_cube
        fld = make_field("cone", 2, x0=[0.45, 0.55])
        quad = QuadratureSpec(nodes=13, restricted_nodes=25, mc_samples=64)
        strip = planar_beta2(fld, UNIT2, [1.0, 0.3], quad)
        grid = beta_p_cube(fld, UNIT2, 2, quad).value
        assert strip == pytest.approx(grid, rel=0.02)
