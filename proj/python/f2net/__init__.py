# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The F2Net Authors
"""Python bindings for the F2Net C++ core.

Configurations and reports cross the boundary as JSON text; this module turns
them into dicts.
"""

import json

from . import _core
from ._core import CheckpointError, ConfigError, DimensionError, MetricError, set_num_threads

__all__ = [
    "Model",
    "toy_config",
    "default_config",
    "resolve_config",
    "gen_synthetic",
    "load_pair",
    "metrics",
    "run_cli",
    "set_num_threads",
    "ConfigError",
    "DimensionError",
    "CheckpointError",
    "MetricError",
]


def toy_config():
    return json.loads(_core.toy_config())


def default_config():
    return json.loads(_core.default_config())


def resolve_config(cfg):
    """Fill defaults and validate; raises ConfigError naming the field."""
    return json.loads(_core.resolve_config(json.dumps(cfg)))


class Model:
    """A float32 model plus its optimiser state."""

    def __init__(self, config=None, *, _session=None):
        self._s = _session if _session is not None else _core.Model(json.dumps(config or toy_config()))

    @classmethod
    def load(cls, path):
        return cls(_session=_core.Model.load(str(path)))

    def save(self, path):
        self._s.save(str(path))

    @property
    def config(self):
        return json.loads(self._s.config)

    @property
    def num_parameters(self):
        return self._s.num_parameters

    @property
    def iteration(self):
        return self._s.iteration

    def logits(self, image, tile=0, overlap=0):
        return self._s.logits(image, tile, overlap)

    def predict(self, image, tile=0, overlap=0):
        return self._s.predict(image, tile, overlap)

    def decompose(self, image):
        """(stem, lf, hf) on the padded grid."""
        return self._s.decompose(image)

    def train_step(self, images, labels):
        return self._s.train_step(list(images), list(labels))


def gen_synthetic(root, seed, count, size, classes):
    """Write a synthetic dataset; returns (manifest dict, worst texture-mean deviation)."""
    manifest, deviation = _core.gen_synthetic(str(root), seed, count, size, classes)
    return json.loads(manifest), deviation


def load_pair(root, split, stem):
    return _core.load_pair(str(root), split, stem)


def metrics(pred, gt, num_classes, ignore_index=None):
    return json.loads(_core.metrics(pred, gt, num_classes, ignore_index))


def run_cli(*args):
    return _core.run_cli([str(a) for a in args])
