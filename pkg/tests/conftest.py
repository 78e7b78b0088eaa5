import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from setagger import synthetic  # noqa: E402

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def bundled_corpus():
    """Paths of the synthetic corpus shipped with the package."""
    from importlib.resources import files

    root = files("setagger") / "data" / "synthetic"
    return str(root / "posts.tsv"), str(root / "tags.tsv")


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    return synthetic.write_corpus(str(directory), n_posts=120, n_tags=4, seed=3)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
