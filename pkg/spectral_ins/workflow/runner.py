import json
import logging
import os
from pathlib import Path

import click
import luigi
import terminaltables
import yaml
from colorclass import Color
from luigi import LuigiStatusCode

from spectral_ins import constants
from spectral_ins.workflow import experiments
from spectral_ins.workflow import tasks

logger = logging.getLogger()
logger.setLevel(logging.INFO)

exit_status_codes = {
    LuigiStatusCode.SUCCESS: constants.EXIT_OK,
    LuigiStatusCode.SUCCESS_WITH_RETRY: constants.EXIT_OK,
    LuigiStatusCode.FAILED: constants.EXIT_SUITE_FAILURE,
    LuigiStatusCode.FAILED_AND_SCHEDULING_FAILED: constants.EXIT_SUITE_FAILURE,
    LuigiStatusCode.SCHEDULING_FAILED: constants.EXIT_SUITE_FAILURE,
    LuigiStatusCode.NOT_RUN: constants.EXIT_SUITE_FAILURE,
    LuigiStatusCode.MISSING_EXT: constants.EXIT_SUITE_FAILURE,
}


def coloured(passed):
    return Color("{green}passed{/green}") if passed else Color("{red}FAILED{/red}")


def task_tree(tasks_to_run):
    """The given tasks and everything they require, each once, requirements after their users."""
    result, seen = [], set()
    pending = list(tasks_to_run)
    while pending:
        task = pending.pop(0)
        if task.task_id in seen:
            continue
        seen.add(task.task_id)
        result.append(task)
        pending += luigi.task.flatten(task.requires())
    return result


def written_bundles(tasks_to_run):
    """Bundle directories named by the outputs of the experiment runs in the tree."""
    directories = []
    for task in task_tree(tasks_to_run):
        if isinstance(task, experiments.RunExperimentTask) and task.output().exists():
            with task.output().open("r") as f:
                directories.append(Path(json.loads(f.read())["output_dir"]))
    return sorted(set(directories))


def load_diagnostics(directories):
    result = []
    for directory in directories:
        filename = Path(directory) / constants.DIAGNOSTICS_JSON
        if not filename.exists():
            logger.warning(f"no {constants.DIAGNOSTICS_JSON} in {directory}")
            continue
        with open(filename, "r") as f:
            result.append((Path(directory), json.loads(f.read())))
    return result


def reports_table(output_dir, directories):
    table_data = [["Run", "Estimate", "Measured", "Passed"]]
    failing = []
    for directory, diagnostics in load_diagnostics(directories):
        run = os.path.relpath(directory, output_dir)
        for report in diagnostics.get("reports", []):
            measured = report.get("measured_constant")
            if isinstance(measured, float):
                measured = f"{measured:.6g}"
            table_data.append(
                [run, report.get("estimate_id"), measured, coloured(report.get("passed"))]
            )
        failing += [
            estimate_id if run == "." else f"{run}:{estimate_id}"
            for estimate_id in diagnostics.get("failing", [])
        ]
    return terminaltables.AsciiTable(table_data), failing


def event_files(tasks_to_run, event_type):
    result = []
    for task in task_tree(tasks_to_run):
        filename = task.events_directory / event_type / f"{task.__class__.__name__}-{task.task_id}.json"
        if filename.exists():
            result.append(filename)
    return sorted(result)


def processing_time_table(tasks_to_run):
    table_data = [["Action", "Params", "Duration"]]
    for filename in event_files(tasks_to_run, "processing_time"):
        with open(filename, "r") as f:
            result = json.loads(f.read())
        params = yaml.safe_dump(result.get("params_for_results"))
        table_data.append([result.get("task_type"), params, result.get("duration")])
    return terminaltables.AsciiTable(table_data)


def echo_failures(tasks_to_run):
    for filename in event_files(tasks_to_run, "failure"):
        with open(filename, "r") as f:
            result = json.loads(f.read())
        click.echo(Color("{red}" + result.get("task_type") + " failed{/red}"))
        click.echo(yaml.safe_dump({"parameters": result.get("params_for_results")}))
        click.echo("\n".join(result.get("exception_stack_trace")))
        click.echo("")


def run_tasks(tasks_to_run, num_workers, output_dir):
    for result_type in constants.EVENT_TYPES:
        os.makedirs(Path(output_dir) / constants.EVENTS_DIRECTORY / result_type, exist_ok=True)

    logger.info(f"About to run workflow with {num_workers} workers")
    tasks.print_stats()

    run_result = luigi.build(
        tasks_to_run,
        local_scheduler=True,
        detailed_summary=True,
        workers=num_workers,
        log_level=os.environ.get("LUIGI_LOG_LEVEL", constants.LUIGI_DEFAULT_LOG_LEVEL),
    )

    click.echo("Results")
    click.echo(processing_time_table(tasks_to_run).table)
    table, failing = reports_table(output_dir, written_bundles(tasks_to_run))
    click.echo(table.table)
    echo_failures(tasks_to_run)

    exit_status_code = exit_status_codes.get(run_result.status, constants.EXIT_SUITE_FAILURE)
    if failing:
        click.echo(Color("{red}failing estimates: " + ", ".join(failing) + "{/red}"))
        exit_status_code = constants.EXIT_SUITE_FAILURE
    return exit_status_code
