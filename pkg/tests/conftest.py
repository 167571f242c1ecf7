"""Pytest fixtures for the allocator test suite.

The backend package lives under ``Artifacts/backend``; it is put on
``sys.path`` here so tests import ``app`` the same way the CLI does.

Key fixtures:

* ``homogeneous_problem`` – two identical learners, every update count equal.
* ``heterogeneous_problem`` – two learners, the second twice as slow.
* ``edge_spec`` – the default edge scenario (K=20, T=7.5 s, MNIST).
* ``write_config`` – writes a dotted-key config file into ``tmp_path``.
* ``override_settings`` – patches fields of the global ``settings`` object.

``make_problem`` and ``target_tau_problem`` are plain helpers for tests that
need many instances.
"""

from pathlib import Path
import sys
from typing import Any, Callable, Dict, Sequence

import numpy as np
import pytest

ROOT_PATH = Path(__file__).resolve().parents[1]
BACKEND_PATH = ROOT_PATH / "Artifacts" / "backend"

if str(BACKEND_PATH) not in sys.path:
    sys.path.insert(0, str(BACKEND_PATH))

from app.core.config import settings
from app.edge_model import build_learner, time_coefficients
from app.schemas import AllocationProblem, ScenarioSpec, TaskProfile, TimeCoefficients


def make_problem(
    c2: Sequence[float],
    c1: Sequence[float],
    c0: Sequence[float],
    budget: float,
    dataset_size: int,
    lower: int = 1,
    upper: int | None = None,
) -> AllocationProblem:
    return AllocationProblem(
        coefficients=tuple(TimeCoefficients(c2=a, c1=b, c0=c) for a, b, c in zip(c2, c1, c0)),
        cycle_budget_s=budget,
        dataset_size=dataset_size,
        batch_lower=lower,
        batch_upper=upper if upper is not None else dataset_size,
    )


def target_tau_problem(rng: np.random.Generator, num_learners: int, dataset_size: int) -> tuple[AllocationProblem, float]:
    """
    An instance with edge-model coefficients whose relaxed optimum is a known common tau.

    With a_k = c2*tau + c1 the budget T = (d + sum c0/a_k) / sum 1/a_k makes the
    batches (T - c0)/a_k sum to d exactly.
    """
    task = TaskProfile()
    learners = [
        build_learner(k, 50.0 * (1.0 - rng.random()), float(rng.choice([2.4e9, 700e6])), 5e6, 23.0, -174.0)
        for k in range(1, num_learners + 1)
    ]
    coefficients = [time_coefficients(learner, task) for learner in learners]
    tau = float(rng.uniform(2.2, 15.0))
    slopes = np.array([c.c2 * tau + c.c1 for c in coefficients])
    offsets = np.array([c.c0 for c in coefficients])
    budget = float((dataset_size + np.sum(offsets / slopes)) / np.sum(1.0 / slopes))
    problem = AllocationProblem(
        coefficients=tuple(coefficients),
        cycle_budget_s=budget,
        dataset_size=dataset_size,
        batch_lower=1,
        batch_upper=dataset_size,
    )
    return problem, tau


@pytest.fixture
def homogeneous_problem() -> AllocationProblem:
    return make_problem([1.0, 1.0], [0.0, 0.0], [0.0, 0.0], budget=10.0, dataset_size=10, lower=1, upper=9)


@pytest.fixture
def heterogeneous_problem() -> AllocationProblem:
    return make_problem([1.0, 2.0], [0.0, 0.0], [0.0, 0.0], budget=12.0, dataset_size=10, lower=1, upper=12)


@pytest.fixture
def edge_spec() -> ScenarioSpec:
    return ScenarioSpec()


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str], str]:
    """Write config text to a fresh file and return its path."""

    counter = {"n": 0}

    def _write(text: str) -> str:
        counter["n"] += 1
        path = tmp_path / f"run{counter['n']}.cfg"
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


@pytest.fixture
def override_settings(monkeypatch: pytest.MonkeyPatch) -> Callable[..., None]:
    """Patch settings fields for the duration of one test."""

    def _override(**values: Dict[str, Any]) -> None:
        for name, value in values.items():
            monkeypatch.setattr(settings, name, value)

    return _override
