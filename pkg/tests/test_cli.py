"""
Tests for the command-line surface and report rendering.
"""

import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

import cli
from cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, RunConfig, VerificationReport, CheckRecord
from config import config
from errors import ConfigError, UnknownCheck
from realstruct import PunctureCase
from report import JsonEncoder, TextFormatter


def strip_timing(document):
    for check in document["checks"]:
        check.pop("wall_time_s")
    return document


class TestRunConfig(unittest.TestCase):
    """Validation of run settings."""

    def test_defaults_validate(self):
        """The default configuration is valid."""
        self.assertIsInstance(RunConfig().validate(), RunConfig)

    def test_rejects_bad_values(self):
        """Non-positive tolerances, tiny grids and zero workers are refused."""
        for changes in ({"tol_fixed": 0.0}, {"tol_eig": -1e-5}, {"grid_n": 8},
                        {"workers": 0}, {"samples": 0}, {"format": "xml"}, {"seed": -1}):
            with self.assertRaises(ConfigError):
                RunConfig(**changes).validate()

    def test_echo_has_no_paths(self):
        """The echoed config holds the numeric settings and the puncture name."""
        echo = RunConfig(puncture=PunctureCase.MIDDLE, seed=7).echo()
        self.assertEqual(echo["puncture"], "middle")
        self.assertEqual(echo["seed"], 7)
        self.assertNotIn("output_path", echo)


class TestCommands(unittest.TestCase):
    """Subcommands and exit codes."""

    def setUp(self):
        self.saved = dict(vars(config.tolerances))
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        for name, value in self.saved.items():
            setattr(config.tolerances, name, value)
        self.tmp.cleanup()

    def out(self, name):
        return os.path.join(self.tmp.name, name)

    def test_unknown_check_is_a_usage_error(self):
        """An unregistered check name exits with code 2."""
        self.assertEqual(cli.main(["check", "no-such-check"]), EXIT_USAGE)
        with self.assertRaises(UnknownCheck):
            cli.cmd_check("no-such-check", RunConfig())

    def test_bad_tolerance_is_a_usage_error(self):
        """A negative tolerance exits with code 2."""
        self.assertEqual(cli.main(["check", "algebra", "--tol-fixed", "-1"]), EXIT_USAGE)

    def test_missing_subcommand(self):
        """argparse errors become exit code 2."""
        self.assertEqual(cli.main([]), EXIT_USAGE)

    def test_pi1_check_writes_json(self):
        """The word-level check passes and the JSON artifact parses."""
        path = self.out("pi1.json")
        code = cli.main(["check", "pi1-consistency", "--format", "json", "--out", path])
        self.assertEqual(code, EXIT_PASS)
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
        self.assertEqual(document["schema_version"], 1)
        self.assertTrue(document["verdict"])
        self.assertEqual([c["name"] for c in document["checks"]], ["pi1-consistency"])
        self.assertIsNone(document["betti"])

    def test_algebra_check_text(self):
        """The algebra check passes and renders a PASS line."""
        report = cli.cmd_check("algebra", RunConfig())
        self.assertTrue(report.verdict)
        self.assertIn("[PASS] algebra", cli.render(report, "text"))
        evidence = report.checks[0].evidence
        for key in ("commutator_inverse", "conj_trace", "log_exp"):
            self.assertLess(evidence[key], 1e-11)

    def test_same_seed_same_report(self):
        """Two runs of a census with one seed agree outside timing fields."""
        cfg = RunConfig(seed=5, samples=3, workers=2)
        first = strip_timing(cli.cmd_check("fix-r-census", cfg).to_dict())
        second = strip_timing(cli.cmd_check("fix-r-census", cfg).to_dict())
        self.assertEqual(JsonEncoder.encode(first), JsonEncoder.encode(second))

    def test_worker_count_does_not_change_results(self):
        """Census evidence is the same for one and for two workers."""
        one = cli.cmd_check("fix-r-census", RunConfig(seed=6, samples=3, workers=1))
        two = cli.cmd_check("fix-r-census", RunConfig(seed=6, samples=3, workers=2))
        self.assertEqual(one.checks[0].evidence, two.checks[0].evidence)

    def test_pi1_skipped_off_left(self):
        """Word formulas only exist for the left puncture."""
        report = cli.cmd_check("pi1-consistency", RunConfig(puncture=PunctureCase.RIGHT))
        self.assertEqual(report.checks, [])
        self.assertFalse(report.verdict)


class TestVerificationChain(unittest.TestCase):
    """The certificate chain on computed evidence, at reduced sampling."""

    def setUp(self):
        self.saved = dict(vars(config.tolerances))
        self.samples = patch.object(config.run, "FAMILY_SAMPLES", 8)
        self.samples.start()

    def tearDown(self):
        self.samples.stop()
        for name, value in self.saved.items():
            setattr(config.tolerances, name, value)

    def test_betti_left(self):
        """The left puncture certifies every differential and reads off 1 3 3 1."""
        report = cli.cmd_betti(RunConfig(grid_n=16))
        self.assertTrue(report.verdict, report.to_dict())
        self.assertEqual(report.betti, (1, 3, 3, 1))
        certificates = report.checks[0].evidence["certificates"]
        self.assertEqual(len(certificates), 5)
        self.assertTrue(all(cert["vanishes"] for cert in certificates))

    def test_betti_middle(self):
        """The middle puncture reaches the same Betti numbers."""
        report = cli.cmd_betti(RunConfig(puncture=PunctureCase.MIDDLE, grid_n=16))
        self.assertTrue(report.verdict, report.to_dict())
        self.assertEqual(report.betti, (1, 3, 3, 1))

    def test_skip_rprime_leaves_betti_unreadable(self):
        """Without the sphere the page is incomplete and the run exits with 1."""
        cfg = RunConfig(grid_n=16, skip_rprime=True)
        report = cli.cmd_betti(cfg)
        self.assertTrue(report.checks[0].passed)
        betti = report.checks[1]
        self.assertFalse(betti.passed)
        self.assertEqual(betti.evidence["error"], "IncompleteCertification")
        self.assertIsNone(report.betti)
        with open(os.devnull, "w") as sink, patch("sys.stdout", sink):
            code = cli.main(["betti", "--skip-rprime", "--grid-n", "16"])
        self.assertEqual(code, EXIT_FAIL)

    def test_huge_eigenvalue_tolerance_fails_indices(self):
        """With tol_eig = 10 every Hessian looks degenerate and the index check fails."""
        cfg = RunConfig(tol_eig=10.0)
        cfg.apply()
        report = cli.cmd_check("indices", cfg)
        self.assertFalse(report.verdict)
        for family in ("S1p", "S2p", "S3p"):
            self.assertEqual(list(report.checks[0].evidence[family]["classifications"]), ["0,3"])


class TestRendering(unittest.TestCase):
    """JSON and text output."""

    def test_float_format(self):
        """Floats keep 17 significant digits and always look like floats."""
        self.assertEqual(JsonEncoder.format_float(2.0), "2.0")
        self.assertEqual(JsonEncoder.format_float(0.5), "0.5")
        self.assertEqual(JsonEncoder.format_float(1e-10), "1e-10")
        self.assertEqual(JsonEncoder.format_float(float("nan")), "null")

    def test_encoder_uses_seventeen_digits(self):
        """json.dumps output carries the 17-digit float text and nulls for non-finite values."""
        encoded = JsonEncoder.encode({"x": [0.1, 2.0, float("inf")]}, indent=None)
        self.assertEqual(encoded, '{"x": [0.10000000000000001, 2.0, null]}')

    def test_floats_round_trip_exactly(self):
        """Every float, numpy scalars included, reads back bit for bit."""
        values = [0.1, 1 / 3, 2.0 ** -52, 1e300, np.float64(np.pi), -np.float32(0.25)]
        decoded = json.loads(JsonEncoder.encode(values))
        self.assertEqual(decoded, [float(v) for v in values])

    def test_encoding_is_valid_json(self):
        """Nested data with numpy-free values round-trips through json."""
        data = {"b": [1, 2.5, None], "a": {"flag": True, "text": 'say "hi"\n'}}
        self.assertEqual(json.loads(JsonEncoder.encode(data)), data)

    def test_key_order_is_preserved(self):
        """Keys come out in insertion order."""
        encoded = JsonEncoder.encode({"z": 1, "a": 2})
        self.assertLess(encoded.index('"z"'), encoded.index('"a"'))

    def test_text_report(self):
        """The text layout lists checks, Betti numbers and the verdict."""
        report = VerificationReport(config=RunConfig().echo(),
                                    checks=[CheckRecord("betti", True, {"betti": [1, 3, 3, 1]})],
                                    betti=(1, 3, 3, 1))
        text = TextFormatter.format_report(JsonEncoder.to_plain(report.to_dict()))
        self.assertIn("[PASS] betti", text)
        self.assertIn("betti: 1 3 3 1", text)
        self.assertTrue(text.rstrip().endswith("verdict: PASS"))


if __name__ == '__main__':
    unittest.main()
