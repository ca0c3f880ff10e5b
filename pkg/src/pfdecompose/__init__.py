"""Requirements-driven microservice decomposition over problem-frames models."""

from importlib import resources

from .dsl import PfmParseError, check, load, parse, serialize
from .engine import (
    DecompositionResult,
    FacilitySimilarity,
    MergeConflictError,
    MergeEdge,
    Microservice,
    ModelValidationError,
    build_similarity,
    decompose,
)
from .model import (
    CorrelationLevel,
    CorrelationMatrix,
    DomainKind,
    DomainNode,
    Interface,
    MergeHint,
    Model,
    ProblemDiagram,
    Requirement,
    SimilarityOverride,
    facility_set,
    pair,
    validate,
)

__version__ = "0.1.0"


def case_study_source() -> str:
    """``.pfm`` text of the bundled smart campus model."""
    return resources.files(__package__).joinpath("data/smart_campus.pfm").read_text(encoding="utf-8")


def load_case_study(computed: bool = False) -> Model:
    """The bundled smart campus model.

    With ``computed=True`` the declared similarity counts are dropped so the
    counts are derived from the facility sets instead.
    """
    import dataclasses

    model = parse(case_study_source())
    if computed:
        model = dataclasses.replace(model, similarity_override=None)
    return model
