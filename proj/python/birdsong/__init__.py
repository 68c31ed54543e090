"""Bird vocalization classification pipeline."""

import json

from . import _core
from ._core import (
    FEATURE_FORMAT_VERSION,
    MODEL_FORMAT_VERSION,
    SAMPLE_RATE,
    WINDOW_LENGTH,
    Error,
    FeatureExtractor,
    Model,
    __version__,
    build_catalog,
    class_scores,
    decode_model,
    encode_model,
    load_clip,
    load_model,
    parse_labels,
    read_features,
    resample,
    split_by_source,
    window_count,
    windowize,
    write_features,
    write_wav,
)


def metrics_report(truth, predicted, n_classes, class_names=()):
    """Per-class and macro scores as a dict (confusion rows are predictions)."""
    return json.loads(_core.metrics_report_json(list(truth), list(predicted), n_classes, list(class_names)))


def bench(model, image, warmup=2, runs=10):
    return json.loads(model.bench_json(image, warmup, runs))

