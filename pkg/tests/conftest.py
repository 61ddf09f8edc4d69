import pytest

from iotprint import synth

CORPUS_SEED = 7
EVAL_SEED = 3


@pytest.fixture(scope="session")
def corpus():
    return synth.standard_corpus(CORPUS_SEED)


@pytest.fixture(scope="session")
def corpus_profiles(corpus):
    return [synth.profile_for_entry(entry) for entry in corpus]


@pytest.fixture(scope="session")
def base_profiles(corpus_profiles):
    """One profile per archetype, instance twins excluded."""
    return corpus_profiles[:6]
