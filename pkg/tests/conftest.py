import numpy as np
import pytest

from trustcal import data_gen

# populated by the acceptance suite; echoed after the run so the per-criterion
# lines stay visible even with output capture on
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
from trustcal.ai_model import train
from trustcal.config import Config
from trustcal.dataset import (
    LABEL_NEG,
    LABEL_POS,
    TaskInstance,
    canonical_schema,
    split,
)

SCHEMA = canonical_schema()


def make_instance(idx, age=35.0, edu=10.0, occ="Sales", mar="Never-married",
                  hours=40.0, label=LABEL_NEG):
    return TaskInstance(
        id=f"i{idx:06d}",
        values={"age": float(age), "education-years": float(edu), "occupation": occ,
                "marital-status": mar, "hours-per-week": float(hours)},
        label=label,
    )


def random_instance(rng, idx):
    """An in-domain instance with uniform feature values and a random label."""
    return make_instance(
        idx,
        age=float(rng.integers(17, 91)),
        edu=float(rng.integers(1, 17)),
        occ=str(rng.choice(SCHEMA.feature("occupation").domain)),
        mar=str(rng.choice(SCHEMA.feature("marital-status").domain)),
        hours=float(rng.integers(1, 100)),
        label=LABEL_POS if rng.random() < 0.5 else LABEL_NEG,
    )


@pytest.fixture(scope="session")
def schema():
    return SCHEMA


@pytest.fixture(scope="session")
def small_corpus():
    return data_gen.corpus_instances(n=3000, seed=11)


@pytest.fixture(scope="session")
def small_split(small_corpus):
    return split(small_corpus, 0.7, 42)


@pytest.fixture(scope="session")
def small_model(small_split):
    return train(small_split)


@pytest.fixture(scope="session")
def default_config():
    return Config()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
