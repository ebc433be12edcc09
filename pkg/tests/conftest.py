import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from choiceforge.core import AttributeSchema, ChoiceDataset, ParameterVector  # noqa: E402


@pytest.fixture
def random_instance():
    """Factory for small random datasets with matching random parameters."""

    def make(seed, n_obs=50, n_alt=3, n_attr=3, outside=True):
        rng = np.random.default_rng(seed)
        names = tuple(f"x{k}" for k in range(n_attr - 1)) + ("price",)
        schema = AttributeSchema(names)
        X = rng.normal(size=(n_obs, n_alt, n_attr))
        X[:, :, -1] = rng.uniform(0.0, 5.0, size=(n_obs, n_alt))
        chosen = rng.integers(0, n_alt + int(outside), size=n_obs)
        data = ChoiceDataset(schema, X, chosen, outside)
        consts = np.concatenate([[0.0], rng.normal(scale=0.5, size=n_alt - 1)])
        params = ParameterVector(rng.normal(size=n_attr), schema, consts)
        return params, data

    return make


@pytest.fixture
def binary_schema():
    return AttributeSchema(("quality", "price"))



def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
