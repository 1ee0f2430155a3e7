import math
import unittest

import numpy as np
from nose2.tools import params


class GridTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import spectral

        self.sut = spectral

    @params((4, 16), (2, 12), (3, 4))
    def test_invalid_grids_are_rejected(self, n, N):
        # setup
        from spectral_ins import errors

        # exercise / verify
        with self.assertRaises(errors.InvalidInputError):
            self.sut.Grid(n, N)

    def test_rfft_layout(self):
        # setup
        grid = self.sut.Grid(3, 16)

        # exercise
        rshape = grid.rshape
        wavenumbers = grid.wavenumbers

        # verify
        self.assertEqual((16, 16, 9), rshape)
        self.assertEqual((3, 16, 16, 9), wavenumbers.shape)
        self.assertEqual(8.0, np.max(np.abs(grid.integer_wavenumbers[0])))

    def test_dilation_keeps_samples_and_scales_wavenumbers(self):
        # setup
        grid = self.sut.Grid(2, 16)

        # exercise
        dilated = grid.dilated(2)

        # verify
        self.assertAlmostEqual(math.pi, dilated.L)
        np.testing.assert_allclose(2 * grid.wavenumbers, dilated.wavenumbers)


class PartitionTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import spectral

        self.sut = spectral

    @params(2, 3)
    def test_partition_identities(self, n):
        # setup
        grid = self.sut.Grid(n, 64)

        # exercise
        report = self.sut.partition_report(self.sut.build_partition(grid))

        # verify
        self.assertEqual(-1, report["j_min"])
        self.assertEqual(3, report["j_max"])
        self.assertLessEqual(report["sum_defect"], 1e-12)
        self.assertGreaterEqual(report["square_sum_min"], 0.5)
        self.assertLessEqual(report["square_sum_max"], 1.0 + 1e-12)
        self.assertEqual(0.0, report["overlap_max"])
        self.assertEqual(0.0, report["support_leak"])

    @params((2, 16), (2, 32), (3, 32), (2, 64))
    def test_top_shell_annulus_stays_below_nyquist(self, n, N):
        # setup
        from spectral_ins import constants

        grid = self.sut.Grid(n, N)
        nyquist = N / 2 * grid.k0

        # exercise
        partition = self.sut.build_partition(grid)

        # verify
        self.assertLessEqual(constants.PARTITION_OUTER * 2.0 ** partition.j_max, nyquist)
        self.assertGreater(constants.PARTITION_OUTER * 2.0 ** (partition.j_max + 1), nyquist)
        r = grid.k_magnitude
        for index, j in enumerate(partition.indices):
            outside = (r < constants.PARTITION_INNER * 2.0 ** j) | (r > 2.0 ** (j + 1))
            self.assertEqual(0.0, np.max(np.abs(partition.phi_masks[index][outside])))

    def test_insufficient_resolution(self):
        # setup
        from spectral_ins import errors

        grid = self.sut.Grid(2, 8)

        # exercise / verify
        with self.assertRaises(errors.InsufficientResolution):
            self.sut.build_partition(grid)

    def test_dyadic_block_is_identity_at_annulus_centre(self):
        # setup
        grid = self.sut.Grid(2, 64)
        u = self.sut.fourier_mode(grid, (4, 0))

        # exercise
        blocks = self.sut.dyadic_blocks(u)

        # verify
        np.testing.assert_allclose(blocks[2].fourier, u.fourier, atol=1e-14)
        for j in (-1, 0, 1, 3):
            self.assertEqual(0.0, np.max(np.abs(blocks[j].fourier)))

    def test_blocks_sum_to_band_limited_field(self):
        # setup
        from spectral_ins import random_fields

        grid = self.sut.Grid(2, 64)
        u = random_fields.band_limited(grid, random_fields.generator(3))

        # exercise
        total = sum(self.sut.dyadic_blocks(u).values(), self.sut.SpectralField.zeros(grid))

        # verify
        np.testing.assert_allclose(total.fourier, u.fourier, atol=1e-12)

    def test_far_blocks_do_not_interact(self):
        # setup
        from spectral_ins import random_fields

        grid = self.sut.Grid(3, 32)
        u = random_fields.band_limited(grid, random_fields.generator(5))

        # exercise
        twice = self.sut.dyadic_block(self.sut.dyadic_block(u, 0), 2)

        # verify
        self.assertEqual(0.0, np.max(np.abs(twice.fourier)))

    def test_block_out_of_range(self):
        # setup
        from spectral_ins import errors

        grid = self.sut.Grid(2, 32)
        u = self.sut.fourier_mode(grid, (2, 0))

        # exercise / verify
        with self.assertRaises(errors.IndexRangeError):
            self.sut.dyadic_block(u, 7)

    def test_low_cutoff_limits(self):
        # setup
        from spectral_ins import random_fields

        grid = self.sut.Grid(2, 64)
        partition = self.sut.build_partition(grid)
        u = random_fields.band_limited(grid, random_fields.generator(11))
        high = self.sut.fourier_mode(grid, (8, 0))

        # exercise
        everything = self.sut.low_cutoff(u, partition.j_max + 1)
        nothing = self.sut.low_cutoff(high, 1)

        # verify
        np.testing.assert_allclose(everything.fourier, u.fourier, atol=1e-12)
        self.assertEqual(0.0, np.max(np.abs(nothing.fourier)))

    def test_low_cutoff_matches_block_sum(self):
        # setup
        from spectral_ins import random_fields

        grid = self.sut.Grid(2, 64)
        u = random_fields.band_limited(grid, random_fields.generator(2))
        blocks = self.sut.dyadic_blocks(u)

        # exercise
        low = self.sut.low_cutoff(u, 2)

        # verify
        expected = blocks[-1] + blocks[0] + blocks[1]
        np.testing.assert_allclose(low.fourier, expected.fourier, atol=1e-12)

    def test_truncation_report_of_band_limited_field(self):
        # setup
        from spectral_ins import random_fields

        grid = self.sut.Grid(2, 32)
        u = random_fields.band_limited(grid, random_fields.generator(1))

        # exercise
        report = self.sut.truncation_report(u)

        # verify
        self.assertAlmostEqual(0.0, report["out_of_band"])
        self.assertAlmostEqual(0.0, report["chi_block"])
        self.assertGreater(report["highest_shell"], 0.0)


class OperatorsTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import spectral

        self.sut = spectral
        self.grid = spectral.Grid(2, 32)

    def test_leray_split_of_a_gradient(self):
        # setup
        from spectral_ins import random_fields

        g = random_fields.band_limited(self.grid, random_fields.generator(4))
        u = self.sut.gradient(g)

        # exercise
        p, q = self.sut.leray_split(u)

        # verify
        self.assertLessEqual(np.max(np.abs(p.fourier)), 1e-12)
        np.testing.assert_allclose(q.fourier, u.fourier, atol=1e-12)

    def test_leray_split_of_a_divergence_free_field(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.divergence_free(self.grid, random_fields.generator(8))

        # exercise
        p, q = self.sut.leray_split(u)

        # verify
        self.assertLessEqual(np.max(np.abs(q.fourier)), 1e-12)
        np.testing.assert_allclose(p.fourier, u.fourier, atol=1e-12)

    def test_projectors_are_complementary_and_idempotent(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.band_limited(
            self.grid, random_fields.generator(9), shape=(2,)
        )

        # exercise
        p, q = self.sut.leray_split(u)
        pp, pq = self.sut.leray_split(p)
        qp, qq = self.sut.leray_split(q)

        # verify
        np.testing.assert_allclose((p + q).fourier, u.fourier, atol=1e-12)
        np.testing.assert_allclose(pp.fourier, p.fourier, atol=1e-12)
        np.testing.assert_allclose(qq.fourier, q.fourier, atol=1e-12)
        self.assertLessEqual(np.max(np.abs(pq.fourier)), 1e-12)
        self.assertLessEqual(np.max(np.abs(self.sut.divergence(p).fourier)), 1e-12)

    def test_leray_split_needs_mean_zero(self):
        # setup
        from spectral_ins import errors

        u = self.sut.SpectralField.constant(self.grid, [1.0, 0.0], shape=(2,))

        # exercise / verify
        with self.assertRaises(errors.ZeroModeError):
            self.sut.leray_split(u)

    def test_identity_multiplier(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.band_limited(self.grid, random_fields.generator(6))

        # exercise
        actual = self.sut.apply_multiplier(self.sut.IDENTITY, u)

        # verify
        np.testing.assert_array_equal(u.fourier, actual.fourier)

    def test_laplacian_symbol_scales_with_box(self):
        # setup
        grid = self.sut.Grid(2, 32, math.pi)
        u = self.sut.fourier_mode(grid, (3, 1))

        # exercise
        actual = self.sut.laplacian(u)

        # verify
        expected = -(3 ** 2 + 1 ** 2) * grid.k0 ** 2
        np.testing.assert_allclose(actual.physical, expected * u.physical, atol=1e-11)

    def test_negative_degree_needs_mean_zero(self):
        # setup
        from spectral_ins import errors

        u = self.sut.fourier_mode(self.grid, (1, 0)) + 1.0

        # exercise / verify
        with self.assertRaises(errors.ZeroModeError):
            self.sut.inverse_laplacian(u)

    def test_divergence_of_gradient_is_laplacian(self):
        # setup
        from spectral_ins import random_fields

        g = random_fields.band_limited(self.grid, random_fields.generator(10))

        # exercise
        actual = self.sut.divergence(self.sut.gradient(g))

        # verify
        np.testing.assert_allclose(
            actual.fourier, self.sut.laplacian(g).fourier, atol=1e-10
        )

    def test_jacobian_convention(self):
        # setup
        x = self.grid.coordinates()
        u = self.sut.SpectralField.from_physical(
            self.grid, np.stack([np.sin(x[1]), np.zeros_like(x[0])])
        )

        # exercise
        jacobian = self.sut.jacobian(u)

        # verify
        np.testing.assert_allclose(jacobian.physical[0, 1], np.cos(x[1]), atol=1e-12)
        np.testing.assert_allclose(jacobian.physical[1, 0], 0.0, atol=1e-12)

    def test_bernstein_ratios(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.band_limited(self.grid, random_fields.generator(12))

        # exercise
        report = self.sut.bernstein_check(u, 2.0)

        # verify
        self.assertGreaterEqual(report["lower"], 0.75 - 1e-12)
        self.assertLessEqual(report["upper"], 2.0 + 1e-12)

    def test_parseval_and_reality(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.band_limited(
            self.sut.Grid(3, 16), random_fields.generator(13), shape=(3,)
        )

        # exercise
        physical = self.sut.lp_norm(u, 2)
        spectral_norm = self.sut.l2_norm_spectral(u)
        residue = self.sut.max_imaginary_residue(self.sut.jacobian(u))

        # verify
        self.assertLessEqual(abs(physical - spectral_norm), 1e-10 * spectral_norm)
        self.assertLessEqual(residue, 1e-12)

    def test_dealiased_product_drops_high_harmonics(self):
        # setup
        grid = self.sut.Grid(2, 64)
        u = self.sut.fourier_mode(grid, (20, 0))

        # exercise
        dealiased = self.sut.multiply(u, u)
        collocated = self.sut.multiply(u, u, dealias=False)

        # verify
        np.testing.assert_allclose(dealiased.physical, 0.5, atol=1e-12)
        self.assertGreater(np.max(np.abs(collocated.physical - 0.5)), 0.1)

    def test_einsum_contracts_components(self):
        # setup
        from spectral_ins import random_fields

        u = random_fields.band_limited(self.grid, random_fields.generator(14), shape=(2,))
        identity = self.sut.identity_matrix(self.grid)

        # exercise
        actual = self.sut.einsum("ij,j->i", identity, u, dealias=False)

        # verify
        np.testing.assert_allclose(actual.fourier, u.fourier, atol=1e-12)
