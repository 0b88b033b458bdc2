"""
Self-describing checkpoint documents.

A document is a JSON object with a ``format`` tag, a ``version`` and named
sections. Floats are written with ``repr`` precision, so every array
round-trips bit-exactly. Each package contributes the codec for its own
section; this module holds the envelope plus the ``architecture``, ``sem``,
``mask`` and ``lipschitz`` sections.
"""

import logging
from typing import Any, Dict, List

import numpy as np

from shared.constants import CHECKPOINT_FORMAT, CHECKPOINT_VERSION
from shared.exceptions import DataError
from shared.output_utils import read_json_document, write_json_document

from .masks import GumbelMask
from .models import LinearSem, MlpSem, SemModel

logger = logging.getLogger(__name__)


def array_to_list(values: np.ndarray) -> List:
    return np.asarray(values, dtype=float).tolist()


def list_to_array(values: Any, name: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise DataError(f"checkpoint field '{name}' is not numeric: {e}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"checkpoint field '{name}' holds non-finite values")
    return arr


def sem_to_dict(model: SemModel) -> Dict[str, Any]:
    if isinstance(model, LinearSem):
        return {"b": array_to_list(model.b), "contractive": model.contractive}
    return {
        "w1": array_to_list(model.w1),
        "b1": array_to_list(model.b1),
        "w2": array_to_list(model.w2),
        "b2": array_to_list(model.b2),
        "activation": model.activation,
    }


def sem_from_dict(architecture: str, section: Dict[str, Any], lipschitz_target: float) -> SemModel:
    try:
        if architecture == "linear":
            return LinearSem(
                list_to_array(section["b"], "sem.b"),
                lipschitz_target=lipschitz_target,
                is_contractive=bool(section.get("contractive", True)),
            )
        if architecture == "mlp":
            return MlpSem(
                w1=list_to_array(section["w1"], "sem.w1"),
                b1=list_to_array(section["b1"], "sem.b1"),
                w2=list_to_array(section["w2"], "sem.w2"),
                b2=list_to_array(section["b2"], "sem.b2"),
                activation=section.get("activation", "tanh"),
                lipschitz_target=lipschitz_target,
            )
    except KeyError as e:
        raise DataError(f"checkpoint section 'sem' lacks field {e}")
    except ValueError as e:
        raise DataError(f"checkpoint section 'sem' is invalid: {e}")
    raise DataError(f"unknown architecture '{architecture}' in checkpoint")


def mask_to_dict(mask: GumbelMask) -> Dict[str, Any]:
    return {"logits": array_to_list(mask.logits), "temperature": mask.temperature, "hard": mask.hard}


def mask_from_dict(section: Dict[str, Any]) -> GumbelMask:
    try:
        return GumbelMask(
            list_to_array(section["logits"], "mask.logits"),
            temperature=float(section["temperature"]),
            hard=bool(section.get("hard", False)),
        )
    except KeyError as e:
        raise DataError(f"checkpoint section 'mask' lacks field {e}")


def model_sections(model: SemModel, mask: GumbelMask) -> Dict[str, Any]:
    """The architecture, sem, mask and lipschitz sections of a document."""
    return {
        "architecture": model.kind,
        "sem": sem_to_dict(model),
        "mask": mask_to_dict(mask),
        "lipschitz": {"target": model.lipschitz_target, "bound": model.lipschitz_bound()},
    }


def model_from_sections(document: Dict[str, Any]) -> SemModel:
    for key in ("architecture", "sem", "lipschitz"):
        if key not in document:
            raise DataError(f"checkpoint is missing section '{key}'")
    return sem_from_dict(document["architecture"], document["sem"], float(document["lipschitz"]["target"]))


def write_document(path: str, sections: Dict[str, Any]) -> str:
    """Write the envelope plus ``sections`` atomically."""
    document = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION}
    document.update(sections)
    return write_json_document(path, document, atomic=True)


def read_document(path: str) -> Dict[str, Any]:
    document = read_json_document(path)
    if document.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a checkpoint document (format '{document.get('format')}')")
    if document.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {document.get('version')}")
    logger.debug(f"Read checkpoint {path} with sections {sorted(document)}")
    return document
