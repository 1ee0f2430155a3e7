import json
import math
import unittest

import numpy as np


class ReportsTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import reports

        self.sut = reports

    def test_report_serializes_numpy_and_non_finite_values(self):
        # setup
        from spectral_ins import spectral

        grid = spectral.Grid(2, 16)

        # exercise
        actual_result = self.sut.report(
            "paraproduct",
            np.float64(2.5),
            np.bool_(True),
            grid=grid,
            seed=4,
            details={"sequence": np.array([1.0, math.inf]), "count": np.int64(3)},
        )

        # verify
        content = json.loads(actual_result.to_json())
        self.assertEqual(2.5, content["measured_constant"])
        self.assertIs(True, content["passed"])
        self.assertEqual({"n": 2, "N": 16, "L": grid.L}, content["grid"])
        self.assertEqual([1.0, "inf"], content["details"]["sequence"])
        self.assertEqual(3, content["details"]["count"])

    def test_ratio(self):
        # setup
        # exercise
        # verify
        self.assertEqual(0.5, self.sut.ratio(1.0, 2.0))
        self.assertIsNone(self.sut.ratio(0.0, 0.0))
        self.assertEqual(math.inf, self.sut.ratio(1.0, 0.0))

    def test_to_json_is_stable(self):
        # setup
        first = self.sut.report("remainder", 1.0, True, parameters={"b": 1, "a": 2})
        second = self.sut.report("remainder", 1.0, True, parameters={"a": 2, "b": 1})

        # exercise
        # verify
        self.assertEqual(first.to_json(), second.to_json())
