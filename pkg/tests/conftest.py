import pytest

from selftrain.classifier import Hyperparams
from selftrain.data import make_vocab, synth_generate

# Small, fast corpora shared across engine / llm / cli tests. The
# acceptance suite builds its own (larger) fixtures with pinned settings.

VOCAB = make_vocab(3, 25)


def fast_hyperparams(**overrides) -> Hyperparams:
    base = dict(
        feature_dim=2**12, epochs=40, learning_rate=0.2, lr_decay=False, patience=None
    )
    base.update(overrides)
    return Hyperparams(**base)


@pytest.fixture(scope="session")
def easy_train():
    return synth_generate(30, VOCAB, 0.05, seed=11, words_min=4, words_max=8)


@pytest.fixture(scope="session")
def easy_test():
    return synth_generate(20, VOCAB, 0.05, seed=12, words_min=4, words_max=8)


@pytest.fixture(scope="session")
def easy_val():
    return synth_generate(10, VOCAB, 0.05, seed=13, words_min=4, words_max=8)
