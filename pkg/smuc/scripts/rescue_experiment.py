"""
Runs the rescue program on a batch of random scenarios and compares each outcome
with the direct computation.

Parameters:
    output_file: a JSON-lines file receiving one record per scenario
    landmarks, victims, rescuers: scenario sizes
    num_seeds (default 10) and first_seed (default 0): which scenarios to draw
    saved_literal (default false): whether a victim counts as saved with at most
        *howMany* candidates instead of at least
    dot_directory (optional): where to write a DOT rendering of each outcome
"""
import json
import logging

from vistautils.parameters import Parameters
from vistautils.parameters_only_entrypoint import parameters_only_entry_point

from smuc.config import SmucSettings
from smuc.rescue import (
    check_routes,
    gen_scenario,
    oracle_assignment,
    rescue_to_dot,
    run_rescue,
)


def main(params: Parameters):
    output_file = params.creatable_file("output_file")
    landmarks = params.integer("landmarks")
    victims = params.integer("victims")
    rescuers = params.integer("rescuers")
    first_seed = params.integer("first_seed", default=0)
    num_seeds = params.positive_integer("num_seeds", default=10)
    saved_literal = params.boolean("saved_literal", default=False)
    dot_directory = params.optional_creatable_directory("dot_directory")
    settings = SmucSettings.from_parameters(params)

    disagreements = 0
    with output_file.open("w") as out:
        for seed in range(first_seed, first_seed + num_seeds):
            field = gen_scenario(landmarks, victims, rescuers, seed)
            outcome = run_rescue(field, saved_literal=saved_literal, settings=settings)
            expected = oracle_assignment(field, saved_literal=saved_literal)
            record = outcome.to_json()
            record["seed"] = seed
            record["oracle_agrees"] = expected == outcome.assignment
            record["route_problem"] = check_routes(field, outcome)
            if not record["oracle_agrees"] or record["route_problem"]:
                disagreements += 1
                logging.warning("Scenario %s: %s", seed, record)
            out.write(json.dumps(record, sort_keys=True))
            out.write("\n")
            if dot_directory is not None:
                (dot_directory / f"rescue-{seed}.dot").write_text(rescue_to_dot(outcome))
    logging.info(
        "%s of %s scenarios disagreed with the direct computation",
        disagreements,
        num_seeds,
    )


if __name__ == "__main__":
    parameters_only_entry_point(main)
