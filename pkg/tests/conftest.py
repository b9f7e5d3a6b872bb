import pytest

from passtune.backend.mini import MiniBackend
from passtune.backend.passlist import PassList
from passtune.ircore import normalize
from passtune.minigen import generate_corpus


@pytest.fixture(scope="session")
def backend():
    return MiniBackend()


@pytest.fixture(scope="session")
def vocab(backend):
    return backend.vocabulary


@pytest.fixture(scope="session")
def corpus20():
    return generate_corpus(20, seed=101)


@pytest.fixture(scope="session")
def apply_flags(backend):
    """Compile raw IR text under the given flags on the mini backend."""

    def _run(text, *flags):
        return backend.apply(normalize(text), PassList(tuple(flags), backend.vocabulary))

    return _run
