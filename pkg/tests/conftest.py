import os

import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--run-extended", action="store_true", default=False,
        help="run the extended (long-horizon) acceptance checks",
    )


def pytest_collection_modifyitems(config, items):
    run_extended = config.getoption("--run-extended") or os.environ.get("RUN_EXTENDED") == "1"
    if run_extended:
        return
    skip = pytest.mark.skip(reason="extended suite; enable with --run-extended or RUN_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def pytest_configure(config):
    config.addinivalue_line("markers", "extended: long-horizon acceptance checks")
    config.addinivalue_line("markers", "slow: multi-minute acceptance checks")
