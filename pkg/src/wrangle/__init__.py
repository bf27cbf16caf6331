"""Context-informed data wrangling: matching, mapping, transformation and repair."""

from .evaluate import MetricsReport, evaluate
from .model import (
    AttributeRef,
    ContextRelationship,
    ContextType,
    PipelineConfig,
    Relation,
    TargetAttr,
    TargetSchema,
    TargetTable,
)
from .pipeline import PipelineResult, run_pipeline

__all__ = [
    "AttributeRef",
    "ContextRelationship",
    "ContextType",
    "MetricsReport",
    "PipelineConfig",
    "PipelineResult",
    "Relation",
    "TargetAttr",
    "TargetSchema",
    "TargetTable",
    "evaluate",
    "run_pipeline",
]
