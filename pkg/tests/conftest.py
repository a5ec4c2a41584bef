import numpy as np
import pytest

from nsb import cnn, localizer, phantom, pipeline


@pytest.fixture(scope="session")
def phantom_dataset(tmp_path_factory):
    """Small shared dataset: 6 phantoms per class at native resolution."""
    root = tmp_path_factory.mktemp("phantoms")
    manifest = phantom.build_dataset(6, seed=4242, out_dir=root)
    return manifest


@pytest.fixture(scope="session")
def phantom_bundle(phantom_dataset):
    """Network-ready arrays for the shared dataset."""
    return pipeline.load_training_arrays(phantom_dataset)


@pytest.fixture(scope="session")
def trained_pipeline(phantom_bundle):
    """Quickly trained weights on the tiny shared dataset.

    Good enough for plumbing tests; quality assertions live in the
    acceptance suite, which trains at full scale.
    """
    images, labels, boxes = phantom_bundle
    cls_w, _ = cnn.train_classifier(
        images, labels,
        cnn.TrainConfig(epochs=10, learning_rate=0.02, batch_size=4, seed=7),
    )
    det_w, _ = localizer.train_detector(
        images, boxes,
        localizer.DetectorTrainConfig(
            epochs=30, learning_rate=0.05, batch_size=8, seed=7
        ),
    )
    return pipeline.TumorPipeline(cls_w, det_w)
