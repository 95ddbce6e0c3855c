"""
Tests for the spectral-sequence bookkeeping: E1 page, differential
certificates, the embedded sphere and the Betti numbers.
"""

import unittest

import spectral
from errors import IncompleteCertification, PremiseFailure, UnsupportedCase, UnsupportedTopology
from morse import CircleOrientation, CriticalSubmanifold, RActionEvidence
from realstruct import HandleSwapReport, PunctureCase
from spectral import BettiVector, Differential, E1Page, RPrimeReport


def pieces():
    return [
        CriticalSubmanifold("S1p", -1.0, 0, 1, 1, 1, "rotation_by_pi", "not_applicable"),
        CriticalSubmanifold("S2p", 0.0, 1, 1, 2, 1, "trivial", "reverses"),
        CriticalSubmanifold("S3p", 1.0, 2, 1, 1, 1, "rotation_by_pi", "preserves"),
    ]


def evidence(negative_flip=0.0):
    found = RActionEvidence(case=PunctureCase.LEFT, samples=8)
    found.rotation_distance = {"S1p": 1e-12, "S3p": 1e-12}
    found.s2_fixed_residual = 1e-12
    found.s2_normal_deviation = 1e-7
    found.s2_negative_flip = negative_flip
    found.s2_det_range = (1.0, 1.0)
    found.s2_components = 2
    found.s2_branch_signs = (-1, 1)
    found.s2_negative_holonomy = {"S2p+": 1, "S2p-": 1}
    found.orientations = {
        "S1p": CircleOrientation("S1p", 1, 1.0, 1),
        "S3p": CircleOrientation("S3p", 1, 1.0, 1),
        "S2p+": CircleOrientation("S2p+", 1),
        "S2p-": CircleOrientation("S2p-", 1),
    }
    return found


def sphere(intersections=1, transversality=0.7):
    return RPrimeReport(
        case=PunctureCase.LEFT,
        grid_n=16,
        intersections=[[0.0] * 16 for _ in range(intersections)],
        transversality=transversality,
    )


class TestE1Page(unittest.TestCase):
    """E1 ranks from critical circles."""

    def test_ranks(self):
        """Ranks are [[1,1],[2,2],[1,1]] with total 8."""
        page = spectral.build_e1(pieces())
        self.assertEqual(page.ranks, ((1, 1), (2, 2), (1, 1)))
        self.assertEqual(page.total_rank, 8)
        self.assertEqual(page.notes, ())
        self.assertEqual(page.rank(5, 0), 0)

    def test_thresholds_separate_critical_values(self):
        """Sublevel thresholds sit between -1, 0 and 1."""
        page = spectral.build_e1(pieces())
        self.assertEqual(page.thresholds, (-1.5, -0.5, 0.5, 1.5))

    def test_single_minimum(self):
        """A lone minimum circle gives a one-row page."""
        page = spectral.build_e1(pieces()[:1])
        self.assertEqual(page.ranks, ((1, 1), (0, 0), (0, 0)))

    def test_non_circle_rejected(self):
        """Critical pieces of dimension other than 1 are unsupported."""
        bad = CriticalSubmanifold("S2p", 0.0, 1, 2, 1, 2, "trivial", "reverses")
        with self.assertRaises(UnsupportedTopology):
            spectral.build_e1([bad])

    def test_index_out_of_range(self):
        """Index 3 does not fit a 3-manifold with circle pieces."""
        bad = CriticalSubmanifold("S3p", 1.0, 3, 1, 1, 1, "rotation_by_pi", "preserves")
        with self.assertRaises(UnsupportedTopology):
            spectral.build_e1([bad])


class TestD1Certificates(unittest.TestCase):
    """Certificates for the first differentials."""

    def test_all_four_vanish(self):
        """Consistent evidence closes all d1 maps."""
        page = spectral.build_e1(pieces())
        certs = spectral.certify_d1(page, pieces(), evidence())
        self.assertEqual({c.target for c in certs}, {
            Differential.D1_00_TO_10, Differential.D1_10_TO_20,
            Differential.D1_01_TO_11, Differential.D1_11_TO_21,
        })
        self.assertTrue(all(c.vanishes for c in certs))

    def test_sign_products(self):
        """Both anticommutation premises record a sign product of -1."""
        page = spectral.build_e1(pieces())
        for cert in spectral.certify_d1(page, pieces(), evidence()):
            for premise in cert.premises:
                if premise.name == "anticommutes_with_r":
                    self.assertEqual(premise.evidence["sign_product"], -1)

    def test_identity_dr_fails(self):
        """If dr fixes the negative line of S2' the d1 argument breaks."""
        page = spectral.build_e1(pieces())
        with self.assertRaises(PremiseFailure) as caught:
            spectral.certify_d1(page, pieces(), evidence(negative_flip=2.0))
        self.assertIn("r_reverses_s2_negative_line", caught.exception.premise)
        self.assertIsNotNone(caught.exception.certificate)

    def test_r_signs(self):
        """r* is trivial on H^0, H^1 and reverses only the S2' Thom class."""
        signs = spectral.r_signs(pieces(), evidence())
        self.assertEqual(signs.on_h0, {"S1p": 1, "S2p": 1, "S3p": 1})
        self.assertEqual(signs.on_h1, {"S1p": 1, "S2p": 1, "S3p": 1})
        self.assertEqual(signs.thom, {"S1p": 1, "S2p": -1, "S3p": 1})


class TestD2Certificate(unittest.TestCase):
    """The embedded sphere closes d2."""

    def setUp(self):
        self.page = spectral.build_e1(pieces())

    def test_single_transverse_intersection(self):
        """One transverse meeting point with S1' makes d2 vanish."""
        cert = spectral.certify_d2(self.page, sphere())
        self.assertTrue(cert.vanishes)
        self.assertEqual(cert.target, Differential.D2_01_TO_20)

    def test_zero_or_two_intersections_fail(self):
        """Any count other than one is refused."""
        for count in (0, 2):
            with self.assertRaises(PremiseFailure):
                spectral.certify_d2(self.page, sphere(intersections=count))

    def test_tangential_meeting_fails(self):
        """A degenerate meeting point is refused."""
        with self.assertRaises(PremiseFailure):
            spectral.certify_d2(self.page, sphere(transversality=0.01))

    def test_transfer_through_handle_swap(self):
        """With a valid swap and an equal reference page the transfer holds."""
        swap = HandleSwapReport(samples=4, max_intertwining_error=0.0, max_variety_residual=1e-13)
        cert = spectral.certify_d2(self.page, sphere(), transfer=swap, reference_page=self.page)
        self.assertTrue(cert.vanishes)
        self.assertIn("handle swap", cert.argument)

    def test_transfer_needs_reference_page(self):
        """Without the reference page the total-rank premise fails."""
        swap = HandleSwapReport(samples=4, max_intertwining_error=0.0, max_variety_residual=1e-13)
        with self.assertRaises(PremiseFailure):
            spectral.certify_d2(self.page, sphere(), transfer=swap)


class TestSphere(unittest.TestCase):
    """Sweep of the sphere (1, B1, i, j)."""

    def test_left_sweep(self):
        """On a 16x16 grid every point is fixed and S1' is met once."""
        report = spectral.verify_rprime(PunctureCase.LEFT, grid_n=16)
        self.assertEqual(report.unfixed_points, 0)
        self.assertLess(report.max_constraint_residual, 1e-12)
        self.assertEqual(report.intersection_count, 1)
        self.assertTrue(report.valid)

    def test_right_has_no_sphere(self):
        """The right puncture gets its d2 through the handle swap instead."""
        with self.assertRaises(UnsupportedCase):
            spectral.verify_rprime(PunctureCase.RIGHT, grid_n=16)

    def test_coarse_grid_rejected(self):
        """Grids below 16 are too coarse to trust."""
        with self.assertRaises(ValueError):
            spectral.verify_rprime(PunctureCase.LEFT, grid_n=8)


class TestBetti(unittest.TestCase):
    """Reading Betti numbers off a certified page."""

    def setUp(self):
        self.page = spectral.build_e1(pieces())
        self.certs = spectral.certify_d1(self.page, pieces(), evidence())
        self.certs.append(spectral.certify_d2(self.page, sphere()))

    def test_betti_numbers(self):
        """The certified page gives 1 3 3 1 with Euler characteristic 0."""
        b = spectral.betti(self.page, self.certs)
        self.assertEqual(b.as_tuple(), (1, 3, 3, 1))
        self.assertEqual(b.euler_characteristic, 0)
        self.assertEqual(str(b), "1 3 3 1")
        self.assertTrue(spectral.compare_torus(b))

    def test_missing_certificate(self):
        """Dropping the d2 certificate leaves the page unreadable."""
        with self.assertRaises(IncompleteCertification) as caught:
            spectral.betti(self.page, self.certs[:-1])
        self.assertEqual(caught.exception.missing, ["d2_01_to_20"])

    def test_compare_torus_rejects_other_vectors(self):
        """Only binomial(3, n) matches the 3-torus."""
        self.assertFalse(spectral.compare_torus(BettiVector(1, 1, 1, 1)))
        self.assertFalse(spectral.compare_torus(BettiVector(1, 0, 0, 1)))

    def test_page_from_rank_table(self):
        """Betti numbers are anti-diagonal sums."""
        page = E1Page(ranks=((1, 0), (0, 0), (0, 1)))
        b = spectral.betti(page, self.certs)
        self.assertEqual(b.as_tuple(), (1, 0, 0, 1))


if __name__ == '__main__':
    unittest.main()
