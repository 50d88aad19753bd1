import numpy as np
import pytest
from click.testing import CliRunner

from dataset import save_sequence, synth_sequence
from graph import assemble, propagation_operator, repair_isolated_nodes
from models import SpatioTemporalGraph
from schemas import PropagationMode, SynthSpec
from solver import build_problem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symmetric(rng: np.random.Generator, n: int, density: float) -> np.ndarray:
    weights = rng.random((n, n)) * (rng.random((n, n)) < density)
    upper = np.triu(weights, k=1)
    return upper + upper.T


def random_graph(rng: np.random.Generator, n_prev: int, n_curr: int, density: float = 0.3) -> SpatioTemporalGraph:
    """Two-frame graph with random sparse blocks, isolated nodes repaired."""
    temporal = rng.random((n_prev, n_curr)) * (rng.random((n_prev, n_curr)) < density)
    g = assemble(random_symmetric(rng, n_prev, density), random_symmetric(rng, n_curr, density), temporal)
    return repair_isolated_nodes(g)


def random_problem(rng: np.random.Generator, n_prev: int, n_curr: int, d: int = 3):
    g = random_graph(rng, n_prev, n_curr, density=rng.uniform(0.1, 0.6))
    operator = propagation_operator(g, PropagationMode.MIXED, 0.01, 0.07)
    features = rng.normal(size=(n_prev + n_curr, d)) * 20 + np.array([50.0, 0.0, 0.0])[:d]
    f = (rng.random(n_prev) < 0.4).astype(float)
    return build_problem(g, operator, features, f)


@pytest.fixture
def graph_factory(rng):
    return lambda n_prev, n_curr, density=0.3: random_graph(rng, n_prev, n_curr, density)


@pytest.fixture
def problem_factory(rng):
    return lambda n_prev, n_curr, d=3: random_problem(rng, n_prev, n_curr, d)


@pytest.fixture
def short_spec():
    return SynthSpec(name="square", length=5, seed=3)


@pytest.fixture
def sequence_root(tmp_path, short_spec):
    """Sequence root with one short synthetic sequence on disk."""
    root = tmp_path / "sequences"
    save_sequence(synth_sequence(short_spec), root)
    return root


@pytest.fixture
def runner():
    return CliRunner()
