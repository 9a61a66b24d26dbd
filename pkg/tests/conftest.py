import os

# acceptance runtime budgets are single-threaded; pin the pools before
# numpy loads its BLAS
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np
import pytest

from zslproto import build_similarity_matrix, init_classifier, make_synthetic_world


@pytest.fixture(scope="session")
def tiny_world():
    """3 seen + 2 unseen classes in 6-d feature space; cheap everywhere."""
    return make_synthetic_world(
        seed=3,
        num_seen=3,
        num_unseen=2,
        feature_dim=6,
        attr_dim=4,
        samples_per_seen_class=8,
        noise_scale=0.3,
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_world):
    _, attrs, _ = tiny_world
    return init_classifier(
        attr_dim=attrs.attr_dim, feature_dim=6, encoder_hidden=8, scorer_hidden=8, seed=1
    )


@pytest.fixture(scope="session")
def tiny_sim(tiny_world):
    _, attrs, _ = tiny_world
    return build_similarity_matrix(attrs, phi=0.1)


@pytest.fixture
def tiny_batch(tiny_world):
    dataset, _, _ = tiny_world
    feats = dataset.split_features("train_seen")[:5]
    labels = dataset.split_labels("train_seen")[:5]
    return np.asarray(feats), np.asarray(labels)
