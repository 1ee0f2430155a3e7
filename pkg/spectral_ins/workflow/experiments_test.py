import csv
import json
import os
from unittest import mock

from . import tasks_unit_tests_helper


def fake_suite_result(grid):
    from spectral_ins import besov
    from spectral_ins import random_fields
    from spectral_ins import reports
    from spectral_ins import suites

    trace = besov.sup_trace("u_norm")
    trace.append(0.0, 1.0)
    trace.append(0.5, 0.25)
    return suites.SuiteResult(
        "partition_check",
        [
            reports.report("partition_identity", 1e-15, True, grid=grid, seed=3),
            reports.report("bernstein", 2.5, False, grid=grid, seed=3),
        ],
        traces=[trace],
        snapshots={"u_final": random_fields.band_limited(grid, random_fields.generator(3))},
    )


class RunExperimentTaskTest(tasks_unit_tests_helper.SpectralInsTaskUnitTest):
    def setUp(self) -> None:
        from spectral_ins.workflow import experiments

        self.module = experiments
        self.make_output_dir()
        self.source = "mode=partition_check\nseed=3\ngrid.N=16\n"
        self.cfg = self.make_config(self.source)

        self.sut = self.module.RunExperimentTask(
            config_json=self.cfg.to_json(),
            source=self.source,
            cache_invalidator=self.cache_invalidator,
        )

        self.wire_up_mocks()

    def test_params_for_results_display(self):
        # setup
        expected_result = {
            "mode": "partition_check",
            "seed": 3,
            "cache_invalidator": self.cache_invalidator,
        }

        # exercise
        actual_result = self.sut.params_for_results_display()

        # verify
        self.assertEqual(expected_result, actual_result)

    def test_run(self):
        # setup
        result = fake_suite_result(self.cfg.build_grid())

        # exercise
        with mock.patch.object(self.module.suites, "run_suite", return_value=result):
            self.sut.run()

        # verify
        self.assert_output(
            {
                "mode": "partition_check",
                "seed": 3,
                "output_dir": self.output_dir,
                "passed": False,
                "failing": ["bernstein"],
            }
        )
        with open(os.path.join(self.output_dir, "config.snapshot")) as f:
            self.assertEqual(self.source, f.read())
        with open(os.path.join(self.output_dir, "config.resolved.json")) as f:
            self.assertEqual(16, json.loads(f.read())["grid"]["N"])
        with open(os.path.join(self.output_dir, "diagnostics.json")) as f:
            diagnostics = json.loads(f.read())
        self.assertEqual(["bernstein"], diagnostics["failing"])
        self.assertEqual(
            ["partition_identity", "bernstein"],
            [report["estimate_id"] for report in diagnostics["reports"]],
        )
        self.assertEqual({"n": 2, "N": 16, "L": self.cfg.grid["L"]}, diagnostics["grid"])
        self.assertIn("runtime", diagnostics)
        self.assertTrue(
            os.path.exists(os.path.join(self.output_dir, "snapshots", "u_final.bnsf"))
        )
        with open(os.path.join(self.output_dir, "traces.csv")) as f:
            self.assertEqual(["t", "u_norm"], next(csv.reader(f)))

    def test_config_snapshot_is_written_before_compute(self):
        # setup
        snapshot = os.path.join(self.output_dir, "config.snapshot")
        seen = []

        def run_suite(cfg):
            seen.append(os.path.exists(snapshot))
            raise RuntimeError("stop")

        # exercise
        with mock.patch.object(self.module.suites, "run_suite", side_effect=run_suite):
            with self.assertRaises(RuntimeError):
                self.sut.run()

        # verify
        self.assertEqual([True], seen)
        self.sut.write_output.assert_not_called()

    def test_flow_snapshots_use_the_flow_writer(self):
        # setup
        from spectral_ins import lagrange

        flow = lagrange.FlowState.identity(self.cfg.build_grid())
        path = os.path.join(self.output_dir, "flow.bnsf")

        # exercise
        with mock.patch.object(self.module.lagrange, "flow_to_snapshot") as flow_to_snapshot:
            self.module.write_snapshot(path, flow)

        # verify
        flow_to_snapshot.assert_called_once_with(path, flow)


class SweepTaskTest(tasks_unit_tests_helper.SpectralInsTaskUnitTest):
    parameter = "physics.oscillation"
    values = [0.1, 0.4]

    def setUp(self) -> None:
        from spectral_ins.workflow import experiments

        self.module = experiments
        self.make_output_dir()
        self.cfg = self.make_config("mode=elliptic\ngrid.N=16\n")

        self.sut = self.module.SweepTask(
            config_json=self.cfg.to_json(),
            source="mode=elliptic\n",
            parameter=self.parameter,
            values=self.values,
            cache_invalidator=self.cache_invalidator,
        )

        self.wire_up_mocks()

    def test_params_for_results_display(self):
        # setup
        expected_result = {
            "mode": "elliptic",
            "parameter": self.parameter,
            "cache_invalidator": self.cache_invalidator,
        }

        # exercise
        actual_result = self.sut.params_for_results_display()

        # verify
        self.assertEqual(expected_result, actual_result)

    def test_requires(self):
        # setup
        # exercise
        actual_result = self.sut.requires()

        # verify
        self.assertEqual(
            ["physics.oscillation=0.1", "physics.oscillation=0.4"], list(actual_result.keys())
        )
        child = actual_result["physics.oscillation=0.4"].experiment
        self.assertEqual(0.4, child.physics["oscillation"])
        self.assertEqual(
            os.path.join(self.output_dir, "physics.oscillation=0.4"), child.output_dir
        )
        self.assertEqual("elliptic", child.mode)

    def test_run(self):
        # setup
        for value, measured, passed in [(0.1, 0.25, True), (0.4, 1.5, False)]:
            label = f"{self.parameter}={value}"
            directory = os.path.join(self.output_dir, label)
            os.makedirs(directory)
            diagnostics = {
                "failing": [] if passed else ["elliptic_contraction_sweep"],
                "reports": [
                    {
                        "estimate_id": "elliptic_contraction_sweep",
                        "measured_constant": measured,
                        "passed": passed,
                    }
                ],
            }
            with open(os.path.join(directory, "diagnostics.json"), "w") as f:
                f.write(json.dumps(diagnostics))
            self.inject_into_input(label, json.dumps({"output_dir": directory}))

        # exercise
        self.sut.run()

        # verify
        with open(os.path.join(self.output_dir, "sweep.csv")) as f:
            rows = list(csv.reader(f))
        self.assertEqual(
            [
                ["value", "estimate_id", "measured_constant", "passed"],
                ["0.1", "elliptic_contraction_sweep", "0.25", "True"],
                ["0.4", "elliptic_contraction_sweep", "1.5", "False"],
            ],
            rows,
        )
        self.assert_output(
            {
                "parameter": self.parameter,
                "values": self.values,
                "output_dir": self.output_dir,
                "passed": False,
                "failing": ["physics.oscillation=0.4:elliptic_contraction_sweep"],
            }
        )
