"""Scene knowledge-graph completion: predict entity types missing from scenes.

Three interchangeable solvers (embedding-based link prediction, association
rules, co-occurrence collective classification) over a shared scene/type
graph, plus a synthetic generator with an exact Bayes-optimal accuracy
ceiling and a ranking/classification evaluation harness.
"""

from .graph import (
    KnowledgeGraph,
    RankedPrediction,
    SceneRecord,
    SplitResult,
    build_graph,
    extract_scenes,
    reify_includes_type,
    relation_tails,
    scene_observation_graph,
    split_and_mask,
)

__version__ = "0.1.0"

__all__ = [
    "KnowledgeGraph",
    "RankedPrediction",
    "SceneRecord",
    "SplitResult",
    "build_graph",
    "extract_scenes",
    "reify_includes_type",
    "relation_tails",
    "scene_observation_graph",
    "split_and_mask",
    "__version__",
]
