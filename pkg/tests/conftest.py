import numpy as np
import pytest

from lvgp_fusion.benchmarks import generate_parabola
from lvgp_fusion.dataset import MultiSourceDataset, VariableSchema
from lvgp_fusion.gp import FitOptions
from lvgp_fusion.lvgp import fit_lvgp


def make_dataset(X, y, sources=None, levels=None, numeric=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    numeric = numeric or tuple(f"x{i + 1}" for i in range(X.shape[1]))
    if sources is None:
        schema = VariableSchema(numeric, (), None, "y")
        return MultiSourceDataset(schema, X, np.zeros((len(y), 0), dtype=np.int64), y)
    levels = tuple(levels or dict.fromkeys(sources))
    schema = VariableSchema(numeric, (), "source", "y", {"source": levels})
    codes = np.array([levels.index(s) for s in sources])[:, None]
    return MultiSourceDataset(schema, X, codes, y)


@pytest.fixture(scope="session")
def parabola():
    return generate_parabola(0)


@pytest.fixture(scope="session")
def parabola_lvgp(parabola):
    train, _ = parabola
    return fit_lvgp(train, FitOptions(seed=0))


@pytest.fixture(scope="session")
def record(pytestconfig):
    """Print and keep one PASS/FAIL line per acceptance criterion."""
    lines = pytestconfig.__dict__.setdefault("_acceptance_lines", [])

    def _record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
