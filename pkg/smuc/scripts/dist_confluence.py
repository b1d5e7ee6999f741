"""
Simulates a program on a field under many message schedules and checks that every
schedule ends in the field computed by the global semantics.

Parameters:
    field_file, program_file: the inputs
    num_seeds (default 100): how many schedules to try
    trace_directory (optional): where to write the event log of each schedule
"""
import logging

from vistautils.parameters import Parameters
from vistautils.parameters_only_entrypoint import parameters_only_entry_point

from smuc.config import SmucSettings
from smuc.dist import (
    agrees_with,
    bfs_infrastructure,
    check_termination_soundness,
    check_tree_locality,
    simulate,
)
from smuc.errors import InvariantViolation
from smuc.field import load_field_file
from smuc.program import load_program_file, run
from smuc.saf import is_saf, translate_program


def main(params: Parameters):
    field = load_field_file(params.existing_file("field_file"))
    program = load_program_file(params.existing_file("program_file"))
    num_seeds = params.positive_integer("num_seeds", default=100)
    trace_directory = params.optional_creatable_directory("trace_directory")
    settings = SmucSettings.from_parameters(params)

    if not is_saf(program):
        (program, allocated) = translate_program(program, field=field)
        logging.info("Translated the program using %s auxiliary labels", allocated)
    expected = run(program, field, settings=settings).field
    infrastructure = bfs_infrastructure(field)
    for seed in range(num_seeds):
        simulation = simulate(field, infrastructure, program, seed, settings.fuel)
        if trace_directory is not None:
            simulation.write_events(trace_directory / f"events-{seed}.jsonl")
        problem = check_termination_soundness(simulation.events) or check_tree_locality(
            simulation.events, infrastructure
        )
        if problem is not None:
            raise InvariantViolation(f"Schedule {seed}: {problem}")
        if not agrees_with(simulation.execution, expected):
            raise InvariantViolation(f"Schedule {seed} disagrees with the global run")
    logging.info("All %s schedules agree with the global run", num_seeds)


if __name__ == "__main__":
    parameters_only_entry_point(main)
