import csv
import json
import time
from pathlib import Path

import luigi

from spectral_ins import besov
from spectral_ins import config
from spectral_ins import constants
from spectral_ins import lagrange
from spectral_ins import snapshots
from spectral_ins import suites
from spectral_ins.workflow import tasks


def write_snapshot(path, state):
    if isinstance(state, lagrange.FlowState):
        lagrange.flow_to_snapshot(path, state)
    else:
        snapshots.write_field(path, state)


def diagnostics_of(cfg, result, runtime):
    return {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "grid": cfg.build_grid().to_dict(),
        "passed": result.passed,
        "failing": result.failing,
        "reports": [report.to_dict() for report in result.reports],
        "runtime": runtime,
    }


def sweep_label(parameter, value):
    return f"{parameter}={value}"


class ExperimentTask(tasks.SpectralInsTask):
    config_json = luigi.Parameter()
    source = luigi.Parameter(default="")

    @property
    def experiment(self):
        return config.ExperimentConfig.from_dict(
            json.loads(self.config_json), source=self.source
        )

    @property
    def output_dir(self):
        return self.experiment.output_dir


class RunExperimentTask(ExperimentTask):
    def params_for_results_display(self):
        cfg = self.experiment
        return {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "cache_invalidator": self.cache_invalidator,
        }

    def run(self):
        cfg = self.experiment
        bundle = Path(cfg.output_dir)
        bundle.mkdir(parents=True, exist_ok=True)
        (bundle / constants.CONFIG_SNAPSHOT).write_text(self.source)
        (bundle / constants.CONFIG_RESOLVED).write_text(cfg.to_json())

        self.info(f"running on {cfg.build_grid()}")
        started = time.perf_counter()
        result = suites.run_suite(cfg)
        runtime = time.perf_counter() - started
        self.info(f"finished in {runtime:.3f}s with {len(result.reports)} reports")

        besov.write_traces_csv(bundle / constants.TRACES_CSV, result.traces)
        for name, state in sorted(result.snapshots.items()):
            write_snapshot(
                bundle / constants.SNAPSHOTS_DIRECTORY / f"{name}{constants.SNAPSHOT_SUFFIX}",
                state,
            )
        diagnostics = diagnostics_of(cfg, result, runtime)
        (bundle / constants.DIAGNOSTICS_JSON).write_text(
            json.dumps(diagnostics, indent=4, sort_keys=True, default=str)
        )
        if not result.passed:
            self.warning(f"failing estimates: {', '.join(result.failing)}")

        self.write_output(
            {
                "mode": cfg.mode,
                "seed": cfg.seed,
                "output_dir": cfg.output_dir,
                "passed": result.passed,
                "failing": result.failing,
            }
        )


class SweepTask(ExperimentTask):
    parameter = luigi.Parameter()
    values = luigi.ListParameter()

    def params_for_results_display(self):
        cfg = self.experiment
        return {
            "mode": cfg.mode,
            "parameter": self.parameter,
            "cache_invalidator": self.cache_invalidator,
        }

    def run_config(self, value):
        cfg = self.experiment.with_value(self.parameter, value)
        return cfg.with_value(
            "output_dir", str(Path(self.output_dir) / sweep_label(self.parameter, value))
        )

    def requires(self):
        return {
            sweep_label(self.parameter, value): RunExperimentTask(
                config_json=self.run_config(value).to_json(),
                source=self.source,
                cache_invalidator=self.cache_invalidator,
            )
            for value in self.values
        }

    def run(self):
        rows = []
        failing = []
        for value in self.values:
            label = sweep_label(self.parameter, value)
            run_output = self.load_from_input(label)
            with open(Path(run_output["output_dir"]) / constants.DIAGNOSTICS_JSON, "r") as f:
                diagnostics = json.loads(f.read())
            for report in diagnostics["reports"]:
                rows.append(
                    [value, report["estimate_id"], report["measured_constant"], report["passed"]]
                )
            failing += [f"{label}:{estimate_id}" for estimate_id in diagnostics["failing"]]

        path = Path(self.output_dir) / constants.SWEEP_CSV
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["value", "estimate_id", "measured_constant", "passed"])
            for value, estimate_id, measured, passed in rows:
                if isinstance(measured, float):
                    measured = format(measured, constants.CSV_FLOAT_FORMAT)
                writer.writerow([value, estimate_id, "" if measured is None else measured, passed])
        self.info(f"wrote {len(rows)} rows to {path}")

        self.write_output(
            {
                "parameter": self.parameter,
                "values": list(self.values),
                "output_dir": self.output_dir,
                "passed": not failing,
                "failing": failing,
            }
        )
