import math
import tempfile
import unittest

import numpy as np
from nose2.tools import params


class BesovNormTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import besov, spectral

        self.sut = besov
        self.spectral = spectral
        self.grid = spectral.Grid(2, 64)

    def test_invalid_exponents(self):
        # setup
        from spectral_ins import errors

        # exercise / verify
        with self.assertRaises(errors.InvalidIndexError):
            self.sut.BesovIndex(0.0, 0.5, 1)
        with self.assertRaises(errors.InvalidIndexError):
            self.sut.BesovIndex(0.0, 2, float("nan"))

    @params((0.5, 2, 1, True), (1.0, 2, 1, True), (1.0, 2, 2, False), (1.5, 2, 1, False))
    def test_banach_gate(self, s, p, r, expected):
        # setup
        idx = self.sut.BesovIndex(s, p, r)

        # exercise
        actual = idx.banach_gate(2)

        # verify
        self.assertEqual(expected, actual)

    @params((-0.5, 2, 1), (1.0, 3, 2), (0.0, 4, math.inf))
    def test_one_shell_field(self, s, p, r):
        # setup
        u = self.spectral.fourier_mode(self.grid, (4, 0))
        u = u / self.spectral.lp_norm(u, p)

        # exercise
        actual = self.sut.besov_norm(u, self.sut.BesovIndex(s, p, r))

        # verify
        self.assertAlmostEqual(1.0, actual / 2.0 ** (2 * s), delta=0.02)

    def test_zero_field(self):
        # setup
        u = self.spectral.SpectralField.zeros(self.grid)

        # exercise
        actual = self.sut.besov_norm(u, self.sut.BesovIndex(0.0, 2, 1))

        # verify
        self.assertEqual(0.0, actual)

    @params((0, 2), (1, 2), (0, 3))
    def test_dilation_covariance(self, shift, p):
        # setup
        from spectral_ins import random_fields

        rng = random_fields.generator(shift * 10 + p)
        s = self.grid.n / p - 1 + shift

        for _ in range(5):
            u = random_fields.band_limited(self.grid, rng)

            # exercise
            report = self.sut.scaling_check(u, self.sut.BesovIndex(s, p, 1))

            # verify
            self.assertLessEqual(report["relative_error"], 0.01)

    def test_critical_invariance(self):
        # setup
        from spectral_ins import random_fields

        rng = random_fields.generator(0)
        u = random_fields.divergence_free(self.grid, rng)
        rho = random_fields.band_limited(self.grid, rng)

        # exercise
        report = self.sut.critical_scaling_check(rho, u, 2)

        # verify
        self.assertAlmostEqual(1.0, report["velocity_ratio"], places=10)
        self.assertAlmostEqual(1.0, report["density_ratio"], places=10)

    def test_triangle_inequality_and_homogeneity(self):
        # setup
        from spectral_ins import random_fields

        rng = random_fields.generator(21)
        u = random_fields.band_limited(self.grid, rng)
        v = random_fields.band_limited(self.grid, rng)
        idx = self.sut.BesovIndex(0.0, 3, 1)

        # exercise
        together = self.sut.besov_norm(u + v, idx)
        scaled = self.sut.besov_norm(u * -3.0, idx)

        # verify
        self.assertLessEqual(
            together, self.sut.besov_norm(u, idx) + self.sut.besov_norm(v, idx) + 1e-12
        )
        self.assertAlmostEqual(3.0 * self.sut.besov_norm(u, idx), scaled, places=10)

    def test_monotone_in_r_and_embedding(self):
        # setup
        from spectral_ins import random_fields

        rng = random_fields.generator(22)
        constants = []
        for _ in range(5):
            u = random_fields.band_limited(self.grid, rng)

            # exercise
            monotone = self.sut.monotonicity_check(u, 0.5, 2, 1, 2)
            embedding = self.sut.embedding_check(u, 0.5, 2, 4, 1)
            constants.append(embedding["constant"])

            # verify
            self.assertTrue(monotone["passed"])
        self.assertLess(max(constants) / min(constants), 3.0)

    def test_tail_norm_is_non_increasing(self):
        # setup
        from spectral_ins import random_fields

        a = random_fields.coefficient_values(
            self.grid, random_fields.generator(5), 1.0, 0.3, shells=[0, 1, 2, 3]
        )
        idx = self.sut.BesovIndex.density(2, 2)
        partition = self.spectral.build_partition(self.grid)

        # exercise
        tails = [self.sut.tail_norm(a - 1.0, idx, m) for m in partition.indices]

        # verify
        for before, after in zip(tails, tails[1:]):
            self.assertLessEqual(after, before)
        self.assertGreater(tails[0], 0.0)


class CharacterizationTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import besov, spectral

        self.sut = besov
        self.spectral = spectral
        self.grid = spectral.Grid(2, 32)

    def test_one_shell_low_frequency_ratio(self):
        # setup
        u = self.spectral.fourier_mode(self.grid, (2, 0))

        # exercise
        report = self.sut.low_freq_equivalence(u, self.sut.BesovIndex(-0.5, 2, 1))

        # verify
        self.assertAlmostEqual(2.0 ** -0.5 / (1 - 2.0 ** -0.5), report["ratio"])
        self.assertLessEqual(report["ratio"], 8.0)
        self.assertGreaterEqual(report["ratio"], 1 / 8.0)

    def test_positive_s_is_rejected(self):
        # setup
        from spectral_ins import errors

        u = self.spectral.fourier_mode(self.grid, (2, 0))

        # exercise / verify
        with self.assertRaises(errors.InvalidIndexError):
            self.sut.low_freq_characterization(u, self.sut.BesovIndex(0.0, 2, 1))

    def test_zero_field(self):
        # setup
        u = self.spectral.SpectralField.zeros(self.grid)

        # exercise
        actual = self.sut.low_freq_characterization(u, self.sut.BesovIndex(-1.0, 2, 1))

        # verify
        self.assertEqual(0.0, actual)

    def test_random_field_ratio_is_finite(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.band_limited(self.grid, random_fields.generator(3))

        # exercise
        report = self.sut.low_freq_equivalence(u, self.sut.BesovIndex(-1.0, 2, 1))

        # verify
        self.assertTrue(math.isfinite(report["ratio"]))
        self.assertGreater(report["ratio"], 0.0)

    def test_interpolation_is_sharp_on_one_shell(self):
        # setup
        u = self.spectral.fourier_mode(self.grid, (2, 0))

        # exercise
        report = self.sut.interpolation_check(u, -1.0, 1.0, 0.3, 2, 1)

        # verify
        self.assertTrue(report["passed"])
        self.assertLessEqual(abs(report["slack"]), 1e-10 * report["rhs"])

    def test_interpolation_is_strict_on_two_shells(self):
        # setup
        u = self.spectral.fourier_mode(self.grid, (1, 0)) + self.spectral.fourier_mode(
            self.grid, (0, 4), amplitude=3.0
        )

        # exercise
        report = self.sut.interpolation_check(u, -1.0, 1.0, 0.5, 2, 1)

        # verify
        self.assertTrue(report["passed"])
        self.assertGreater(report["slack"], 0.0)

    def test_duality_pair_recovers_l2(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.band_limited(self.grid, random_fields.generator(4))

        # exercise
        report = self.sut.duality_pair(u, u, self.sut.BesovIndex(0.0, 2, 2))

        # verify
        expected = self.spectral.lp_norm(u, 2) ** 2
        self.assertLessEqual(abs(report["pair"] - expected), 0.05 * expected)

    def test_duality_pair_of_separated_shells(self):
        # setup
        grid = self.spectral.Grid(2, 64)
        u = self.spectral.fourier_mode(grid, (1, 0))
        v = self.spectral.fourier_mode(grid, (0, 8))

        # exercise
        report = self.sut.duality_pair(u, v, self.sut.BesovIndex(0.5, 2, 1))

        # verify
        self.assertEqual(0.0, report["pair"])

    def test_duality_ratio_is_bounded(self):
        # setup
        from spectral_ins import random_fields

        rng = random_fields.generator(5)
        idx = self.sut.BesovIndex(0.5, 3, 1)
        ratios = []

        # exercise
        for _ in range(20):
            u = random_fields.band_limited(self.grid, rng)
            v = random_fields.band_limited(self.grid, rng)
            ratios.append(self.sut.duality_pair(u, v, idx)["ratio"])

        # verify
        self.assertLess(max(ratios), 10.0)


class NormTraceTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import besov

        self.sut = besov

    def test_left_endpoint_aggregation(self):
        # setup
        trace = self.sut.integral_trace("l1")
        for t, value in [(0.0, 1.0), (0.5, 2.0), (1.0, 4.0)]:
            trace.append(t, value)

        # exercise
        running = trace.running()

        # verify
        self.assertEqual([0.0, 0.5, 1.5], running)
        self.assertEqual(1.5, trace.aggregate())

    def test_sup_aggregation(self):
        # setup
        trace = self.sut.sup_trace("sup")
        for t, value in [(0.0, 3.0), (0.1, 1.0), (0.2, 2.0)]:
            trace.append(t, value)

        # exercise
        actual = trace.aggregate()

        # verify
        self.assertEqual(3.0, actual)

    def test_invariants(self):
        # setup
        from spectral_ins import errors

        trace = self.sut.sup_trace("x")
        trace.append(0.0, 1.0)

        # exercise / verify
        with self.assertRaises(errors.InvalidInputError):
            trace.append(0.0, 1.0)
        with self.assertRaises(errors.InvalidInputError):
            trace.append(1.0, -1.0)

    def test_csv_export(self):
        # setup
        first = self.sut.NormTrace("a", 1.0, times=[0.0, 0.1], values=[1.0, 1 / 3])
        second = self.sut.NormTrace("b", math.inf, times=[0.1], values=[2.0])

        # exercise
        with tempfile.TemporaryDirectory() as directory:
            path = f"{directory}/traces.csv"
            self.sut.write_traces_csv(path, [first, second])
            with open(path) as f:
                content = f.read().splitlines()
            parsed = self.sut.read_traces_csv(path)

        # verify
        self.assertEqual("t,a,b", content[0])
        self.assertEqual("0,1,", content[1])
        self.assertEqual("0.10000000000000001,0.33333333333333331,2", content[2])
        self.assertEqual([1.0, 1 / 3], parsed["a"][1])
        np.testing.assert_array_equal([0.1], parsed["b"][0])
