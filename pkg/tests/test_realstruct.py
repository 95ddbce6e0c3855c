"""
Tests for the real structures, the residual involution and the fixed locus M'.
"""

import unittest

import numpy as np

import quat
import realstruct
import repvar
from errors import NoConvergence, RankError, UnsupportedCase
from realstruct import FixedPointCertificate, InvolutionKind, NotFixed, PunctureCase


def quad(*entries):
    return repvar.make_quad(*entries)


class TestInvolutions(unittest.TestCase):
    """sigma*, r and the handle swap as maps of quadruples."""

    def setUp(self):
        self.rng = np.random.default_rng(20)

    def test_sigma_is_an_involution(self):
        """sigma* applied twice is the identity for every puncture."""
        quads = quat.haar_sample(self.rng, (100, 4))
        for case in PunctureCase:
            twice = realstruct.sigma_star(case, realstruct.sigma_star(case, quads))
            np.testing.assert_allclose(twice, quads, atol=1e-13)

    def test_sigma_preserves_the_variety(self):
        """sigma* maps mu = 1 to itself."""
        q = repvar.random_point(self.rng)
        for case in PunctureCase:
            image = realstruct.sigma_star(case, q)
            self.assertLess(np.linalg.norm(repvar.constraint_residual(image)), 1e-9)

    def test_r_is_an_involution_fixing_f(self):
        """r negates A1 only."""
        q = repvar.random_point(self.rng)
        r = realstruct.residual_r(q)
        np.testing.assert_array_equal(r[0], -q[0])
        np.testing.assert_array_equal(r[1:], q[1:])
        np.testing.assert_array_equal(realstruct.residual_r(r), q)

    def test_left_formula_on_a_known_point(self):
        """sigma*_left(e^{i phi}, -1, i, j) = (e^{i phi}, -1, i, -j)."""
        q = quad(quat.complex_unit(0.4), -quat.ONE, quat.I, quat.J)
        expected = quad(quat.complex_unit(0.4), -quat.ONE, quat.I, -quat.J)
        np.testing.assert_allclose(realstruct.sigma_star(PunctureCase.LEFT, q), expected, atol=1e-15)

    def test_handle_swap_intertwines_right_and_left(self):
        """swap . sigma_right = sigma_left . swap, exactly."""
        report = realstruct.verify_handle_swap(self.rng, samples=10)
        self.assertTrue(report.valid)
        self.assertLess(report.max_intertwining_error, 1e-14)


class TestPi1(unittest.TestCase):
    """Word-level description of sigma_* (left puncture)."""

    def test_generator_images(self):
        """a1 -> a1, b1 -> b1^-1, b2 -> b1^-1 b2^-1 b1."""
        self.assertEqual(str(realstruct.sigma_star_pi1(0)), "a1")
        self.assertEqual(str(realstruct.sigma_star_pi1(1)), "b1^-1")
        self.assertEqual(str(realstruct.sigma_star_pi1(3)), "b1^-1 b2^-1 b1")

    def test_words_agree_with_quadruple_formula(self):
        """Evaluated words give the class of sigma*_left(q)."""
        rng = np.random.default_rng(21)
        for _ in range(10):
            self.assertLess(realstruct.check_pi1_consistency(repvar.random_point(rng)), 1e-8)

    def test_other_punctures_unsupported(self):
        """Word formulas exist only for the left puncture."""
        with self.assertRaises(UnsupportedCase):
            realstruct.sigma_star_pi1(0, PunctureCase.MIDDLE)


class TestFixedness(unittest.TestCase):
    """Class-level fixedness and certificates."""

    def test_known_fixed_points(self):
        """(1, -1, i, j) is fixed by sigma*_left with conjugator +-i."""
        q = quad(quat.ONE, -quat.ONE, quat.I, quat.J)
        cert = realstruct.is_class_fixed(InvolutionKind.SIGMA, PunctureCase.LEFT, q)
        self.assertIsInstance(cert, FixedPointCertificate)
        self.assertLess(cert.residual, 1e-12)
        np.testing.assert_allclose(np.abs(cert.conjugator), quat.I, atol=1e-12)

    def test_r_fixes_the_torus(self):
        """(j, i, e^{ia}, e^{ib}) is r-fixed, conjugator +-i."""
        q = quad(quat.J, quat.I, quat.complex_unit(0.3), quat.complex_unit(1.2))
        cert = realstruct.is_class_fixed(InvolutionKind.R, PunctureCase.LEFT, q)
        self.assertIsInstance(cert, FixedPointCertificate)

    def test_random_point_not_fixed(self):
        """A generic variety point is not sigma*-fixed."""
        q = repvar.random_point(np.random.default_rng(22))
        result = realstruct.is_class_fixed(InvolutionKind.SIGMA, PunctureCase.LEFT, q)
        self.assertIsInstance(result, NotFixed)
        self.assertGreater(result.gap, 1e-6)

    def test_random_fixed_point_for_each_case(self):
        """Fixed-class search returns valid, irreducible, on-variety certificates."""
        rng = np.random.default_rng(23)
        for case in PunctureCase:
            cert = realstruct.random_fixed_point(case, rng)
            self.assertTrue(cert.is_valid())
            self.assertLess(np.linalg.norm(repvar.constraint_residual(cert.quad)), 1e-10)
            again = realstruct.is_class_fixed(InvolutionKind.SIGMA, case, cert.quad)
            self.assertIsInstance(again, FixedPointCertificate)

    def test_symmetrize_nearby_point(self):
        """A small perturbation of a fixed point symmetrizes back onto M'."""
        rng = np.random.default_rng(24)
        cert = realstruct.random_fixed_point(PunctureCase.LEFT, rng)
        moved = repvar.project_to_variety(repvar.retract(cert.quad, 1e-3 * rng.standard_normal(12)))
        result = realstruct.symmetrize(PunctureCase.LEFT, moved)
        self.assertLess(result.residual, 1e-8)

    def test_symmetrize_rejects_far_starts(self):
        """Starts far from M' are refused before iterating."""
        rng = np.random.default_rng(25)
        for _ in range(20):
            q = repvar.random_point(rng)
            if repvar.fingerprint_gap(q, realstruct.sigma_star(PunctureCase.LEFT, q)) > 0.5:
                with self.assertRaises(NoConvergence):
                    realstruct.symmetrize(PunctureCase.LEFT, q)
                return
        self.skipTest("no far start drawn")


class TestMPrimeFrames(unittest.TestCase):
    """Tangent spaces of M'."""

    def test_mprime_has_dimension_three(self):
        """tangent_frame_Mprime has rank 3 at random fixed points of every case."""
        rng = np.random.default_rng(26)
        for case in PunctureCase:
            for _ in range(3):
                cert = realstruct.random_fixed_point(case, rng)
                frame = realstruct.tangent_frame_Mprime(case, cert)
                self.assertEqual(frame.rank, 3)

    def test_involution_matrix_squares_to_identity(self):
        """The linearized sigma* is an involution of T M."""
        rng = np.random.default_rng(27)
        cert = realstruct.random_fixed_point(PunctureCase.MIDDLE, rng)
        tau = realstruct.involution_matrix(InvolutionKind.SIGMA, PunctureCase.MIDDLE, cert)
        np.testing.assert_allclose(tau @ tau, np.eye(6), atol=1e-6)

    def test_invariant_subspace_of_non_orthogonal_involution(self):
        """The +1 space is found even when the involution is not symmetric."""
        shear = np.array([[1.0, 0.0], [3.0, -1.0]])
        basis = realstruct.invariant_subspace(shear)
        self.assertEqual(basis.shape, (2, 1))
        np.testing.assert_allclose(shear @ basis, basis, atol=1e-12)

    def test_rank_error_on_wrong_count(self):
        """RankError carries expected and found ranks."""
        error = RankError(3, 2, "tangent_frame_Mprime")
        self.assertEqual((error.expected, error.found), (3, 2))


class TestFixRCensus(unittest.TestCase):
    """Fixed classes of r on M."""

    def test_nearest_s2_point_on_the_torus(self):
        """Points of the torus are their own nearest point."""
        q = quad(quat.J, quat.I, quat.complex_unit(-1.0), quat.complex_unit(2.5))
        g = quat.haar_sample(np.random.default_rng(28))
        _, distance = realstruct.nearest_s2_point(repvar.conjugate_quad(g, q))
        self.assertLess(distance, 1e-10)

    def test_small_census_lands_on_torus(self):
        """Every fixed class found for r lies on the torus (j, i, e^{ia}, e^{ib})."""
        census = realstruct.fix_r_census(5, np.random.default_rng(29))
        self.assertTrue(census.passed, census.outliers)
        self.assertEqual(census.landed, 5)


if __name__ == '__main__':
    unittest.main()
