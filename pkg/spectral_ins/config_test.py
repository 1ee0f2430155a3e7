import os
import shutil
import tempfile
import unittest

from nose2.tools import params


class ConfigTest(unittest.TestCase):
    def setUp(self) -> None:
        from spectral_ins import config

        self.sut = config

    def test_defaults_are_valid(self):
        # setup
        defaults = self.sut.get_defaults()

        # exercise
        actual_result = self.sut.validate(defaults)

        # verify
        self.assertEqual(defaults, actual_result)

    def test_get_defaults_is_a_fresh_copy(self):
        # setup
        self.sut.get_defaults()["grid"]["N"] = 1

        # exercise
        actual_result = self.sut.get_defaults()["grid"]["N"]

        # verify
        self.assertEqual(32, actual_result)

    def test_every_mode_has_a_valid_example(self):
        # setup
        from spectral_ins import constants

        # exercise
        names = self.sut.get_experiment_names()

        # verify
        self.assertEqual(sorted(constants.MODES), sorted(names))
        for name in names:
            cfg = self.sut.load_text(self.sut.get_experiment_text(name))
            self.assertEqual(name, cfg.mode)

    def test_load_text_merges_over_defaults(self):
        # setup
        text = "mode=elliptic\ngrid.N=16\nphysics.oscillation=0.2\n"

        # exercise
        cfg = self.sut.load_text(text)

        # verify
        self.assertEqual("elliptic", cfg.mode)
        self.assertEqual(16, cfg.grid["N"])
        self.assertEqual(2, cfg.grid["n"])
        self.assertEqual(0.2, cfg.physics["oscillation"])
        self.assertEqual(1.0, cfg.physics["a_bar"])
        self.assertEqual(text, cfg.source)
        self.assertEqual({"mode": 1, "grid.N": 2, "physics.oscillation": 3}, cfg.lines)

    def test_command_line_overrides_win(self):
        # setup
        text = "mode=elliptic\nseed=1\noutput_dir=a\n"

        # exercise
        cfg = self.sut.load_text(text, mode="stokes_var", seed=9, output_dir="b")

        # verify
        self.assertEqual(("stokes_var", 9, "b"), (cfg.mode, cfg.seed, cfg.output_dir))

    @params(
        ("grid.N=24", "grid.N", 2),
        ("grid.N=8", "grid.N", 2),
        ("stokes.p=4.5", "stokes.p", 2),
        ("ns.dt=0.5\nns.T=0.1", "ns.dt", 2),
        ("elliptic.p=2.5", "elliptic.regime", None),
        ("physics.mu_slope=10", "physics.mu_slope", 2),
        ("grid.n=4", "grid.n", 2),
        ("grid.spacing=1", "grid.spacing", 2),
        ("elliptic.oscillations=[0.5, 1.2]", "elliptic.oscillations", 2),
        ("mode=turbulence", "mode", 1),
    )
    def test_invalid_configs_name_field_and_line(self, line, field, expected_line):
        # setup
        from spectral_ins import errors

        text = f"mode=elliptic\n{line}\n" if not line.startswith("mode=") else f"{line}\n"

        # exercise
        with self.assertRaises(errors.ConfigError) as context:
            self.sut.load_text(text)

        # verify
        self.assertEqual(field, context.exception.field)
        self.assertEqual(expected_line, context.exception.line)

    def test_with_value(self):
        # setup
        cfg = self.sut.load_text("mode=stokes_var\n")

        # exercise
        actual_result = cfg.with_value("stokes.m", 3)

        # verify
        self.assertEqual(3, actual_result.stokes["m"])
        self.assertIsNone(cfg.stokes["m"])

    def test_with_value_rejects_unknown_keys(self):
        # setup
        from spectral_ins import errors

        cfg = self.sut.load_text("mode=stokes_var\n")

        # exercise
        with self.assertRaises(errors.ConfigError) as context:
            cfg.with_value("stokes.viscosity", 3)

        # verify
        self.assertEqual("stokes.viscosity", context.exception.field)

    def test_to_json_round_trips_through_from_dict(self):
        # setup
        import json

        cfg = self.sut.load_text("mode=ns_local\n")

        # exercise
        actual_result = self.sut.ExperimentConfig.from_dict(json.loads(cfg.to_json()))

        # verify
        self.assertEqual(cfg.to_dict(), actual_result.to_dict())

    def test_load_defaults_renders_a_loadable_source(self):
        # setup
        cfg = self.sut.load_defaults(mode="bony_suite")

        # exercise
        actual_result = self.sut.load_text(cfg.source)

        # verify
        self.assertEqual(cfg.to_dict(), actual_result.to_dict())

    def test_load_config(self):
        # setup
        directory = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, directory, True)
        path = os.path.join(directory, "c.json")
        with open(path, "w") as f:
            f.write('{"mode": "elliptic", "grid": {"N": 16}}')

        # exercise
        cfg = self.sut.load_config(path)

        # verify
        self.assertEqual(16, cfg.grid["N"])

    def test_load_config_missing_file(self):
        # setup
        from spectral_ins import errors

        # exercise
        with self.assertRaises(errors.ConfigError):
            self.sut.load_config("does-not-exist.properties")
