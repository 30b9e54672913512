"""Python access to the pvrnet library.

Configurations cross the boundary as JSON; the helpers here accept and return
plain dicts.
"""

import json

from . import _pvrnet
from ._pvrnet import (
    evaluate_classification,
    family_name,
    knn_graph,
    retrieval_map,
    run_cli,
    run_verification,
    select_top_k,
)

__all__ = [
    "default_config",
    "normalize_config",
    "generate_shape",
    "render_views",
    "family_name",
    "knn_graph",
    "select_top_k",
    "evaluate_classification",
    "retrieval_map",
    "run_verification",
    "run_cli",
]


def default_config():
    return json.loads(_pvrnet.default_config())


def normalize_config(config=None):
    return json.loads(_pvrnet.normalize_config(json.dumps(config or {})))


def generate_shape(class_id, seed, config=None):
    return _pvrnet.generate_shape(class_id, seed, json.dumps(config or {}))


def render_views(points, config=None):
    return _pvrnet.render_views(points, json.dumps(config or {}))
