import numpy as np
import pytest

from illumine.classifier import train_classifier
from illumine.domains import DigitDomain, RoadDomain, load_seed_images
from illumine.mnist import synth_corpus


@pytest.fixture(scope="session")
def small_corpus():
    """Shared synthetic digit corpus: (train_x, train_y, test_x, test_y)."""
    return synth_corpus(2000, 500, seed=0)


@pytest.fixture(scope="session")
def small_classifier(small_corpus):
    tr_x, tr_y, te_x, te_y = small_corpus
    return train_classifier(tr_x, tr_y, epochs=3, lr=0.1, rng_seed=0,
                            test_images=te_x, test_labels=te_y)


@pytest.fixture(scope="session")
def digit_seed_images(small_corpus):
    tr_x, tr_y, te_x, te_y = small_corpus
    images = np.concatenate([te_x, tr_x])
    labels = np.concatenate([te_y, tr_y])
    return load_seed_images(images, labels, 5)


def make_digit_domain(features, classifier, seed_images):
    return DigitDomain(tuple(features), seed_images, 5, model=classifier)


def make_road_domain(features):
    return RoadDomain(tuple(features))


@pytest.fixture
def digit_domain(small_classifier, digit_seed_images):
    def build(features=("Mov", "Lum")):
        return make_digit_domain(features, small_classifier, digit_seed_images)
    return build


@pytest.fixture
def road_domain():
    def build(features=("MLP", "StdSA")):
        return make_road_domain(features)
    return build
