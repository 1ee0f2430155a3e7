import json
import os
import shutil
import tempfile
import unittest
from unittest import mock


class RunnerTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins.workflow import runner

        self.sut = runner
        self.output_dir = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.output_dir, True)

    def write_diagnostics(self, directory, failing):
        os.makedirs(directory, exist_ok=True)
        diagnostics = {
            "failing": failing,
            "reports": [
                {"estimate_id": "partition_identity", "measured_constant": 1e-16, "passed": True}
            ]
            + [
                {"estimate_id": estimate_id, "measured_constant": 2.0, "passed": False}
                for estimate_id in failing
            ],
        }
        with open(os.path.join(directory, "diagnostics.json"), "w") as f:
            f.write(json.dumps(diagnostics))

    def experiment_task(self, output_dir):
        from spectral_ins import config
        from spectral_ins.workflow import experiments

        cfg = config.load_text("mode=partition_check\ngrid.N=16\n", output_dir=output_dir)
        return experiments.RunExperimentTask(config_json=cfg.to_json(), cache_invalidator="runner_test")

    def completed_task(self, output_dir, failing):
        task = self.experiment_task(output_dir)
        self.write_diagnostics(output_dir, failing)
        task.write_output({"mode": "partition_check", "output_dir": output_dir, "failing": failing})
        return task

    def run_with_status(self, tasks_to_run, status):
        build_result = mock.MagicMock(status=status)
        with mock.patch.object(self.sut.luigi, "build", return_value=build_result) as build:
            with mock.patch.object(self.sut.tasks, "print_stats"):
                with mock.patch.object(self.sut.click, "echo"):
                    exit_code = self.sut.run_tasks(tasks_to_run, 3, self.output_dir)
        return exit_code, build

    def test_reports_table_collects_failing_estimates(self):
        # setup
        self.write_diagnostics(self.output_dir, [])
        self.write_diagnostics(os.path.join(self.output_dir, "stokes.m=2"), ["stokes_splitting"])
        directories = [self.output_dir, os.path.join(self.output_dir, "stokes.m=2")]

        # exercise
        table, failing = self.sut.reports_table(self.output_dir, directories)

        # verify
        self.assertEqual(["stokes.m=2:stokes_splitting"], failing)
        self.assertEqual(4, len(table.table_data))

    def test_written_bundles_ignore_stale_diagnostics(self):
        # setup
        current = os.path.join(self.output_dir, "m=2")
        task = self.completed_task(current, [])
        self.write_diagnostics(os.path.join(self.output_dir, "m=3"), ["stale_estimate"])

        # exercise
        directories = self.sut.written_bundles([task])
        _, failing = self.sut.reports_table(self.output_dir, directories)
        exit_code, _ = self.run_with_status([task], self.sut.LuigiStatusCode.SUCCESS)

        # verify
        self.assertEqual([current], [str(directory) for directory in directories])
        self.assertEqual([], failing)
        self.assertEqual(0, exit_code)

    def test_written_bundles_skip_runs_without_output(self):
        # setup
        task = self.experiment_task(self.output_dir)
        self.write_diagnostics(self.output_dir, ["bernstein"])

        # exercise
        actual_result = self.sut.written_bundles([task])

        # verify
        self.assertEqual([], actual_result)

    def test_run_tasks_success(self):
        # setup
        task = self.completed_task(self.output_dir, [])

        # exercise
        exit_code, build = self.run_with_status([task], self.sut.LuigiStatusCode.SUCCESS)

        # verify
        self.assertEqual(0, exit_code)
        build.assert_called_once_with(
            [task],
            local_scheduler=True,
            detailed_summary=True,
            workers=3,
            log_level=os.environ.get("LUIGI_LOG_LEVEL", "INFO"),
        )
        for event_type in ["start", "failure", "success", "processing_time"]:
            self.assertTrue(os.path.isdir(os.path.join(self.output_dir, "events", event_type)))

    def test_run_tasks_with_failing_estimates(self):
        # setup
        task = self.completed_task(self.output_dir, ["bernstein"])

        # exercise
        exit_code, _ = self.run_with_status([task], self.sut.LuigiStatusCode.SUCCESS)

        # verify
        self.assertEqual(1, exit_code)

    def test_run_tasks_with_failed_task(self):
        # setup
        task = self.experiment_task(self.output_dir)

        # exercise
        exit_code, _ = self.run_with_status([task], self.sut.LuigiStatusCode.FAILED)

        # verify
        self.assertEqual(1, exit_code)
