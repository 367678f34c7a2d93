import dataclasses
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from irpft.bench import load_config, read_results, run_matrix

from helpers import FULL_SCALE


def pytest_report_header(config):
    scale = "full (paper-scale benchmark)" if FULL_SCALE else "small (IRPFT_TEST_SCALE=small)"
    return f"irpft test scale: {scale}"


@pytest.fixture(scope="session")
def benchmark_results(tmp_path_factory):
    """Run the benchmark matrix once per test session and parse its output.

    At full scale this is the default configuration (the expensive part of the
    acceptance suite); IRPFT_TEST_SCALE=small shrinks it for development runs.
    """
    cfg = load_config(None)
    if not FULL_SCALE:
        cfg = dataclasses.replace(
            cfg,
            episodes=4,
            particle_counts=(5, 10),
            planner=dataclasses.replace(cfg.planner, n_iterations=300),
        )
    out = tmp_path_factory.mktemp("bench") / "results.jsonl"
    run_matrix(cfg, out, progress=True)
    header, rows, stored = read_results(out)
    return {"path": out, "header": header, "rows": rows, "aggregate": stored, "config": cfg}
