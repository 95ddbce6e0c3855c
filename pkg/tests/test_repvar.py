"""
Tests for the representation variety: constraint, projection, tangent frames,
trace fingerprints and word evaluation.
"""

import unittest

import numpy as np

import quat
import repvar
from errors import DegenerateGauge, NoConvergence
from repvar import Word


class TestConstraint(unittest.TestCase):
    """mu and its Jacobian."""

    def setUp(self):
        self.rng = np.random.default_rng(10)

    def test_known_points(self):
        """(1, -1, i, j) and (j, i, i, 1) lie on the variety."""
        for q in (repvar.make_quad(quat.ONE, -quat.ONE, quat.I, quat.J),
                  repvar.make_quad(quat.J, quat.I, quat.I, quat.ONE)):
            self.assertLess(np.linalg.norm(repvar.constraint_residual(q)), 1e-15)

    def test_identity_tuple_is_off_the_variety(self):
        """The trivial tuple has mu = -1, the farthest point from the variety."""
        q = repvar.make_quad(quat.ONE, quat.ONE, quat.ONE, quat.ONE)
        np.testing.assert_allclose(repvar.mu(q), -quat.ONE)

    def test_analytic_jacobian_matches_differences(self):
        """The analytic Jacobian agrees with central differences."""
        q = quat.haar_sample(self.rng, (4,))
        np.testing.assert_allclose(repvar.mu_jacobian(q), repvar.numerical_mu_jacobian(q), atol=1e-7)

    def test_projection_reaches_tolerance(self):
        """Random tuples project onto mu = 1."""
        for _ in range(5):
            q = repvar.random_point(self.rng)
            self.assertLess(np.linalg.norm(repvar.constraint_residual(q)), 1e-10)
            self.assertTrue(repvar.is_irreducible(q))

    def test_projection_iterations_exhausted(self):
        """A zero iteration cap cannot fix an off-variety start."""
        q = quat.haar_sample(self.rng, (4,))
        with self.assertRaises(NoConvergence):
            repvar.project_to_variety(q, max_iter=0)


class TestTangentFrames(unittest.TestCase):
    """Horizontal tangent spaces of M."""

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_frame_has_rank_six(self):
        """T M has dimension 6 at random irreducible points."""
        for _ in range(10):
            frame = repvar.tangent_frame_M(repvar.random_point(self.rng))
            self.assertEqual(frame.rank, 6)
            np.testing.assert_allclose(frame.vectors @ frame.vectors.T, np.eye(6), atol=1e-10)

    def test_frame_is_horizontal_and_tangent(self):
        """Frame vectors are killed by d mu and orthogonal to conjugation."""
        q = repvar.random_point(self.rng)
        frame = repvar.tangent_frame_M(q)
        np.testing.assert_allclose(repvar.mu_jacobian(q) @ frame.vectors.T, 0, atol=1e-10)
        np.testing.assert_allclose(repvar.gauge_vectors(q) @ frame.vectors.T, 0, atol=1e-10)

    def test_reducible_tuple_has_degenerate_gauge(self):
        """A tuple inside one circle subgroup has a 1-dimensional orbit."""
        q = repvar.make_quad(quat.complex_unit(0.3), quat.complex_unit(1.1), quat.I, quat.complex_unit(-0.7))
        with self.assertRaises(DegenerateGauge):
            repvar.gauge_directions(q)
        self.assertFalse(repvar.is_irreducible(q))


class TestClasses(unittest.TestCase):
    """Conjugation invariants."""

    def setUp(self):
        self.rng = np.random.default_rng(12)

    def test_fingerprint_is_conjugation_invariant(self):
        """Traces do not change under simultaneous conjugation."""
        q = repvar.random_point(self.rng)
        g = quat.haar_sample(self.rng)
        self.assertLess(repvar.fingerprint_gap(q, repvar.conjugate_quad(g, q)), 1e-13)
        self.assertEqual(repvar.fingerprint(q).shape, (14,))

    def test_class_distance(self):
        """Conjugate tuples are at distance zero, distinct classes are not."""
        p = repvar.random_point(self.rng)
        g = quat.haar_sample(self.rng)
        self.assertLess(repvar.class_distance(p, repvar.conjugate_quad(g, p)), 1e-10)
        self.assertGreater(repvar.class_distance(p, repvar.random_point(self.rng)), 1e-3)

    def test_retract_and_tangent_between(self):
        """tangent_between inverts retract for small steps."""
        q = repvar.random_point(self.rng)
        v = 1e-3 * self.rng.standard_normal(12)
        np.testing.assert_allclose(repvar.tangent_between(q, repvar.retract(q, v)), v, atol=1e-12)


class TestWords(unittest.TestCase):
    """Free-group words in a1, b1, a2, b2."""

    def test_free_reduction(self):
        """x x^-1 cancels on construction."""
        word = Word.parse("a1 b1 b1^-1 a2")
        self.assertEqual(str(word), "a1 a2")

    def test_inverse_and_product(self):
        """w w^-1 is the empty word."""
        word = Word.parse("a1 b2^-1 a2")
        self.assertEqual((word * word.inverse()).letters, ())

    def test_parse_rejects_unknown_tokens(self):
        """Only the four generators with exponent +-1 are accepted."""
        with self.assertRaises(ValueError):
            Word.parse("c1")
        with self.assertRaises(ValueError):
            Word.parse("a1^2")

    def test_boundary_word_evaluates_to_minus_mu(self):
        """[a1,b1][a2,b2] evaluates to -mu, hence to -1 on the variety."""
        rng = np.random.default_rng(13)
        q = repvar.random_point(rng)
        np.testing.assert_allclose(repvar.evaluate_word(repvar.BOUNDARY_WORD, q), -quat.ONE, atol=1e-9)

    def test_sign_carries_through(self):
        """A central sign multiplies the value."""
        q = repvar.make_quad(quat.J, quat.I, quat.I, quat.ONE)
        value = repvar.evaluate_word(Word.parse("a1", sign=-1), q)
        np.testing.assert_allclose(value, -quat.J)


if __name__ == '__main__':
    unittest.main()
