import math
import unittest

import numpy as np


def area_preserving_displacement(grid, epsilon=0.1):
    """Two composed shears: X(y) = (y1 + f(y2), y2 + g(y1 + f(y2))) has det DX = 1."""
    from spectral_ins import spectral

    y1, y2 = grid.coordinates()
    f = epsilon * np.sin(y2)
    g = epsilon * np.sin(y1 + f)
    return spectral.SpectralField.from_physical(grid, np.stack([f, g]))


def steady(field, times):
    from spectral_ins import stokes

    return stokes.TimeSeries(times, [field] * len(times))


class FlowStateTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import lagrange, spectral

        self.sut = lagrange
        self.spectral = spectral
        self.grid = spectral.Grid(2, 32)

    def test_identity_flow(self):
        # exercise
        flow = self.sut.FlowState.identity(self.grid)

        # verify
        self.assertEqual(0.0, flow.deviation)
        self.assertLessEqual(flow.inversion_defect(), 1e-14)
        self.assertLessEqual(flow.determinant_defect(), 1e-14)

    def test_constant_velocity_is_a_shift(self):
        # setup
        c = self.spectral.SpectralField.constant(self.grid, [0.3, -0.2], shape=(2,))
        v = steady(c, np.linspace(0.0, 0.5, 6))

        # exercise
        flow = self.sut.flow_from_velocity(v)
        earlier = self.sut.flow_from_velocity(v, t=0.3)

        # verify
        np.testing.assert_allclose(flow.X.mean, [0.15, -0.1], atol=1e-14)
        np.testing.assert_allclose(earlier.X.mean, [0.09, -0.06], atol=1e-14)
        self.assertTrue(flow.X.without_mean().is_constant())
        self.assertLessEqual(flow.inversion_defect(), 1e-14)
        self.assertEqual(0.0, flow.smallness)

    def test_shear_velocity_preserves_measure(self):
        # setup
        shear = self.spectral.fourier_mode(self.grid, (0, 1), 0.1, phase=-math.pi / 2, direction=(1.0, 0.0))
        v = steady(shear, np.linspace(0.0, 1.0, 11))

        # exercise
        trajectory = self.sut.flow_trajectory(v)

        # verify
        self.assertEqual(11, len(trajectory))
        for flow in trajectory:
            self.assertLessEqual(flow.determinant_defect(), 1e-12)
            self.assertLessEqual(flow.inversion_defect(), 1e-10)
        self.assertAlmostEqual(1.0, trajectory[-1].t)

    def test_composed_shears_preserve_measure(self):
        # exercise
        flow = self.sut.FlowState.from_displacement(area_preserving_displacement(self.grid), 1.0)
        report = self.sut.flow_invariants_check(flow)

        # verify
        self.assertTrue(report.passed)
        self.assertLessEqual(report.details["inversion_defect"], 1e-10)
        self.assertLessEqual(report.measured_constant, 1e-12)

    def test_large_displacement_is_not_invertible(self):
        # setup
        from spectral_ins import errors

        displacement = area_preserving_displacement(self.grid, epsilon=2.0)

        # exercise / verify
        with self.assertRaises(errors.FlowNotInvertible):
            self.sut.FlowState.from_displacement(displacement, 1.0)

    def test_unknown_time(self):
        # setup
        from spectral_ins import errors

        v = steady(self.spectral.SpectralField.zeros(self.grid, (2,)), np.linspace(0.0, 1.0, 3))

        # exercise / verify
        with self.assertRaises(errors.InvalidInputError):
            self.sut.flow_from_velocity(v, t=0.25)


class CompositionTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import lagrange, spectral

        self.sut = lagrange
        self.spectral = spectral
        self.grid = spectral.Grid(2, 16)

    def test_constant_shift(self):
        # setup
        field = self.spectral.fourier_mode(self.grid, (1, 2))
        shift = self.spectral.SpectralField.constant(self.grid, [0.3, -0.1], shape=(2,))

        # exercise
        actual = self.sut.compose(field, shift)

        # verify
        expected = self.spectral.sample(self.grid, lambda x, y: np.cos(x + 0.3 + 2 * (y - 0.1)))
        np.testing.assert_allclose(actual.physical, expected.physical, atol=1e-12)

    def test_zero_displacement_is_exact(self):
        # setup
        from spectral_ins import random_fields

        field = random_fields.band_limited(self.grid, random_fields.generator(0), shape=(2,))

        # exercise
        actual = self.sut.compose(field, self.spectral.SpectralField.zeros(self.grid, (2,)))

        # verify
        np.testing.assert_allclose(actual.fourier, field.fourier, atol=1e-12)

    def test_taylor_expansion_agrees_with_direct_summation(self):
        # setup
        from spectral_ins import random_fields

        rng = random_fields.generator(1)
        field = random_fields.band_limited(self.grid, rng, decay=1.0)
        displacement = random_fields.band_limited(self.grid, rng, shape=(2,), norm=0.01)

        # exercise
        direct = self.sut.interpolate(field, displacement)
        taylor = self.sut.interpolate(field, displacement, budget=0)

        # verify
        self.assertEqual(self.sut.METHOD_DIRECT, direct.method)
        self.assertEqual(self.sut.METHOD_TAYLOR, taylor.method)
        np.testing.assert_allclose(taylor.values, direct.values, atol=1e-9)
        self.assertLess(taylor.accuracy, 1e-8)

    def test_displacement_shape_is_checked(self):
        # setup
        from spectral_ins import errors

        field = self.spectral.fourier_mode(self.grid, (1, 0))

        # exercise / verify
        with self.assertRaises(errors.InvalidInputError):
            self.sut.interpolate(field, np.zeros((3, 16, 16)))

    def test_composition_bound_of_identity_flow(self):
        # setup
        field = self.spectral.fourier_mode(self.grid, (2, 1))
        flow = self.sut.FlowState.identity(self.grid)

        # exercise
        report = self.sut.composition_bound_check(field, flow, 0.5)

        # verify
        self.assertAlmostEqual(1.0, report.measured_constant, places=10)
        self.assertEqual("fractional", report.details["case"])

    def test_composition_bound_regular_case(self):
        # setup
        field = self.spectral.fourier_mode(self.grid, (2, 1))
        flow = self.sut.FlowState.from_displacement(area_preserving_displacement(self.grid, 0.05), 1.0)

        # exercise
        report = self.sut.composition_bound_check(field, flow, 1.0)

        # verify
        self.assertTrue(report.passed)
        self.assertGreater(report.details["jacobian_deviation"], 0.0)

    def test_composition_index_gate(self):
        # setup
        from spectral_ins import errors

        field = self.spectral.fourier_mode(self.grid, (1, 0))
        flow = self.sut.FlowState.identity(self.grid)

        # exercise / verify
        with self.assertRaises(errors.InvalidIndexError):
            self.sut.composition_bound_check(field, flow, 1.5)


class InverseFlowTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import lagrange, spectral

        self.sut = lagrange
        self.spectral = spectral
        self.grid = spectral.Grid(2, 32)

    def test_identity(self):
        # exercise
        inverse = self.sut.inverse_flow(self.sut.FlowState.identity(self.grid))

        # verify
        self.assertEqual(1, inverse.iterations)
        self.assertEqual(0.0, np.max(np.abs(inverse.displacement.fourier)))

    def test_constant_shift(self):
        # setup
        c = self.spectral.SpectralField.constant(self.grid, [0.2, 0.1], shape=(2,))
        flow = self.sut.FlowState.from_displacement(c, 1.0)

        # exercise
        inverse = self.sut.inverse_flow(flow)

        # verify
        np.testing.assert_allclose(inverse.displacement.mean, [-0.2, -0.1], atol=1e-12)

    def test_round_trip(self):
        # setup
        flow = self.sut.FlowState.from_displacement(area_preserving_displacement(self.grid), 1.0)

        # exercise
        inverse = self.sut.inverse_flow(flow)
        report = self.sut.round_trip_check(flow, inverse)

        # verify
        self.assertLessEqual(inverse.defect, 1e-10)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.measured_constant, 1e-8)

    def test_stagnation(self):
        # setup
        from spectral_ins import errors

        flow = self.sut.FlowState.from_displacement(area_preserving_displacement(self.grid), 1.0)

        # exercise / verify
        with self.assertRaises(errors.InverseStagnation):
            self.sut.inverse_flow(flow, max_iter=2)


class TransportedOperatorsTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import lagrange, spectral

        self.sut = lagrange
        self.spectral = spectral
        self.grid = spectral.Grid(2, 32)
        self.K = spectral.fourier_mode(self.grid, (1, 1))
        self.H = spectral.fourier_mode(self.grid, (1, 0), direction=(1.0, 0.5)) + spectral.fourier_mode(
            self.grid, (0, 2), 0.5, direction=(0.0, 1.0)
        )

    def test_identity_flow(self):
        # exercise
        report = self.sut.transported_operators(self.H, self.K, self.sut.FlowState.identity(self.grid))

        # verify
        self.assertTrue(report.passed)
        self.assertLessEqual(report.measured_constant, 1e-10)

    def test_constant_shift(self):
        # setup
        c = self.spectral.SpectralField.constant(self.grid, [0.4, -0.3], shape=(2,))
        flow = self.sut.FlowState.from_displacement(c, 1.0)

        # exercise
        report = self.sut.transported_operators(self.H, self.K, flow)

        # verify
        self.assertLessEqual(report.measured_constant, 1e-10)

    def test_measure_preserving_flow(self):
        # setup
        flow = self.sut.FlowState.from_displacement(area_preserving_displacement(self.grid), 1.0)

        # exercise
        report = self.sut.transported_operators(self.H, self.K, flow)

        # verify
        self.assertTrue(report.passed)
        self.assertLessEqual(report.details["gradient_defect"], 1e-5)
        self.assertLessEqual(report.details["divergence_defect"], 1e-5)

    def test_transported_divergence_of_identity(self):
        # setup
        u = self.spectral.fourier_mode(self.grid, (1, 0), direction=(1.0, 0.0))
        A = self.spectral.identity_matrix(self.grid)

        # exercise
        actual = self.sut.transported_divergence(A, u)

        # verify
        np.testing.assert_allclose(
            actual.fourier, self.spectral.divergence(u).fourier, atol=1e-12
        )


class StabilityBoundsTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import lagrange, random_fields, spectral

        self.sut = lagrange
        self.spectral = spectral
        self.grid = spectral.Grid(2, 16)
        self.times = np.linspace(0.0, 0.05, 6)
        rng = random_fields.generator(2)
        self.v1 = steady(random_fields.divergence_free(self.grid, rng, decay=1.0, norm=0.01), self.times)
        self.v2 = self.v1 + steady(
            random_fields.divergence_free(self.grid, rng, decay=1.0, norm=0.001), self.times
        )

    def test_equal_velocities(self):
        # exercise
        reports = self.sut.stability_bounds_check(self.v1, self.v1)

        # verify
        self.assertEqual(6, len(reports))
        for report in reports[3:]:
            self.assertIsNone(report.measured_constant)
            self.assertEqual([0.0], report.details["lhs"])
            self.assertTrue(report.passed)

    def test_zero_velocity(self):
        # setup
        zero = steady(self.spectral.SpectralField.zeros(self.grid, (2,)), self.times)

        # exercise
        reports = self.sut.stability_bounds_check(zero, zero)

        # verify
        self.assertEqual("inverse_deviation", reports[0].estimate_id)
        self.assertIsNone(reports[0].measured_constant)
        self.assertTrue(all(report.passed for report in reports))

    def test_random_pair(self):
        # exercise
        reports = self.sut.stability_bounds_check(self.v1, self.v2)

        # verify
        for report in reports:
            self.assertTrue(report.passed, report.estimate_id)
            self.assertTrue(math.isfinite(report.measured_constant), report.estimate_id)
            self.assertGreater(report.measured_constant, 0.0)


class SnapshotTest(unittest.TestCase):
    def test_flow_round_trip(self):
        # setup
        import tempfile
        from pathlib import Path
        from spectral_ins import lagrange, spectral

        grid = spectral.Grid(2, 16)
        flow = lagrange.FlowState.from_displacement(area_preserving_displacement(grid), 1.0)

        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "flow.bnsf"

            # exercise
            lagrange.flow_to_snapshot(path, flow)
            restored = lagrange.flow_from_snapshot(path, 1.0)

        # verify
        np.testing.assert_allclose(restored.X.physical, flow.X.physical, atol=1e-14)
        np.testing.assert_allclose(restored.A.physical, flow.A.physical, atol=1e-12)
