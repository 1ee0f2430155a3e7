import json
import os
import unittest
from unittest import mock

from click.testing import CliRunner


class CLITest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import cli

        self.sut = cli

    def test_run(self):
        # setup
        runner = CliRunner()

        # exercise
        with mock.patch.object(self.sut, "core") as core_mocked:
            result = runner.invoke(
                self.sut.cli,
                ["--info", "run", "--config", "c.properties", "--mode", "elliptic", "--seed", "4", "--jobs", "2"],
            )

        # verify
        self.assertEqual(0, result.exit_code)
        core_mocked.run.assert_called_once_with("c.properties", "elliptic", 4, None, 2)

    def test_sweep(self):
        # setup
        runner = CliRunner()

        # exercise
        with mock.patch.object(self.sut, "core") as core_mocked:
            result = runner.invoke(
                self.sut.cli, ["sweep", "stokes.m", "1", "2", "3", "--output", "out"]
            )

        # verify
        self.assertEqual(0, result.exit_code)
        core_mocked.sweep.assert_called_once_with(
            None, "stokes.m", ["1", "2", "3"], None, None, "out", 1
        )

    def test_jobs_must_be_positive(self):
        # setup
        runner = CliRunner()

        # exercise
        with mock.patch.object(self.sut, "core"):
            result = runner.invoke(self.sut.cli, ["run", "--jobs", "0"])

        # verify
        self.assertEqual(2, result.exit_code)


class CLIEndToEndTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import cli

        self.sut = cli

    def test_empty_sweep_exits_with_invalid_config(self):
        # setup
        runner = CliRunner()

        # exercise
        with runner.isolated_filesystem():
            result = runner.invoke(self.sut.cli, ["sweep", "physics.oscillation"])

        # verify
        self.assertEqual(2, result.exit_code)

    def test_unknown_sweep_parameter_exits_with_invalid_config(self):
        # setup
        runner = CliRunner()

        # exercise
        with runner.isolated_filesystem():
            result = runner.invoke(self.sut.cli, ["sweep", "physics.viscosity", "1"])

        # verify
        self.assertEqual(2, result.exit_code)
        self.assertIn("physics.viscosity", result.output)

    def test_validate_reports_field_and_line(self):
        # setup
        runner = CliRunner()

        # exercise
        with runner.isolated_filesystem():
            with open("bad.properties", "w") as f:
                f.write("mode=elliptic\n\ngrid.N=24\n")
            result = runner.invoke(self.sut.cli, ["validate", "bad.properties"])

        # verify
        self.assertEqual(2, result.exit_code)
        self.assertIn("grid.N", result.output)
        self.assertIn("line 3", result.output)

    def test_validate_ok(self):
        # setup
        runner = CliRunner()

        # exercise
        with runner.isolated_filesystem():
            with open("good.properties", "w") as f:
                f.write("mode=elliptic\ngrid.N=16\n")
            result = runner.invoke(self.sut.cli, ["validate", "good.properties"])

        # verify
        self.assertEqual(0, result.exit_code)
        self.assertIn("Finished validating: OK", result.output)

    def test_seed_writes_a_valid_example(self):
        # setup
        runner = CliRunner()

        # exercise
        with runner.isolated_filesystem():
            result = runner.invoke(self.sut.cli, ["seed", "stokes_var", "."])
            validated = runner.invoke(self.sut.cli, ["validate", "stokes_var.properties"])

        # verify
        self.assertEqual(0, result.exit_code)
        self.assertEqual(0, validated.exit_code)

    def test_run_builds_one_task_and_exits_with_the_runner_status(self):
        # setup
        runner = CliRunner()
        from spectral_ins import core

        # exercise
        with runner.isolated_filesystem():
            with open("c.properties", "w") as f:
                f.write("mode=partition_check\ngrid.N=16\n")
            with mock.patch.object(core.runner, "run_tasks", return_value=1) as run_tasks:
                result = runner.invoke(
                    self.sut.cli, ["run", "--config", "c.properties", "--output", "out"]
                )

        # verify
        self.assertEqual(1, result.exit_code)
        (tasks_to_run, jobs, output_dir), _ = run_tasks.call_args
        self.assertEqual(1, jobs)
        self.assertEqual("out", output_dir)
        self.assertEqual(1, len(tasks_to_run))
        self.assertEqual("mode=partition_check\ngrid.N=16\n", tasks_to_run[0].source)
        self.assertEqual("partition_check", tasks_to_run[0].experiment.mode)

    def test_compare(self):
        # setup
        runner = CliRunner()
        diagnostics = {"mode": "elliptic", "reports": [], "runtime": 1.0}

        # exercise
        with runner.isolated_filesystem():
            for directory, runtime in [("a", 1.0), ("b", 2.0), ("c", 3.0)]:
                os.makedirs(directory)
                with open(os.path.join(directory, "diagnostics.json"), "w") as f:
                    content = dict(diagnostics, runtime=runtime)
                    if directory == "c":
                        content["mode"] = "stokes_var"
                    f.write(json.dumps(content))
            same = runner.invoke(self.sut.cli, ["compare", "a", "b"])
            different = runner.invoke(self.sut.cli, ["compare", "a", "c"])

        # verify
        self.assertEqual(0, same.exit_code)
        self.assertEqual(1, different.exit_code)
