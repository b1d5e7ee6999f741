import json
from pathlib import Path

from vistautils.parameters import Parameters

from smuc.scripts import dist_confluence, rescue_experiment

FIXTURES = Path(__file__).parent.parent / "fixtures"


def test_dist_confluence_writes_event_logs(tmp_path):
    dist_confluence.main(
        Parameters.from_mapping(
            {
                "field_file": str(FIXTURES / "cycle.json"),
                "program_file": str(FIXTURES / "programs" / "loop.smuc"),
                "num_seeds": 3,
                "trace_directory": str(tmp_path / "traces"),
            }
        )
    )
    assert sorted(path.name for path in (tmp_path / "traces").iterdir()) == [
        "events-0.jsonl",
        "events-1.jsonl",
        "events-2.jsonl",
    ]


def test_rescue_experiment_records_every_scenario(tmp_path):
    output_file = tmp_path / "rescue.jsonl"
    rescue_experiment.main(
        Parameters.from_mapping(
            {
                "output_file": str(output_file),
                "landmarks": 8,
                "victims": 2,
                "rescuers": 3,
                "num_seeds": 3,
                "first_seed": 5,
            }
        )
    )
    records = [json.loads(line) for line in output_file.read_text().splitlines()]
    assert [record["seed"] for record in records] == [5, 6, 7]
    assert all(record["oracle_agrees"] for record in records)
    assert all(record["route_problem"] is None for record in records)
