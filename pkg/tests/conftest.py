import functools
import sys

import pytest

from locdim.config import load_config
from locdim.loops import maximal_loop_classes
from locdim.netgraph import build_transition_graph

DEFAULT_FIXTURES = ["golden-bc", "testud", "cantor-like", "lau-wang", "finite-type", "di12"]


@functools.lru_cache(maxsize=None)
def config(name: str):
    return load_config(name)


@functools.lru_cache(maxsize=None)
def graph(name: str):
    return build_transition_graph(config(name).ifs)


@functools.lru_cache(maxsize=None)
def classes(name: str):
    cfg = config(name)
    return tuple(maximal_loop_classes(graph(name), cfg.ifs.probs))


@pytest.fixture(params=DEFAULT_FIXTURES)
def fixture_name(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
