"""
Ground-truth sidecar in the checkpoint document format.
"""

import logging
from typing import Any, Dict, Tuple

import numpy as np

from graph_model import EdgePattern
from missing_mechanism import MnarModel
from sem_engine import GumbelMask, model_from_sections, model_sections, read_document, write_document
from shared.config import from_dict, to_dict
from shared.exceptions import DataError
from target_likelihood import NoiseModel

from .config import InstanceSpec
from .generator import GroundTruth

logger = logging.getLogger(__name__)

# saturated logits reproduce the planted pattern under any mask reading
PLANTED_LOGIT = 30.0


def truth_mask(target: EdgePattern) -> GumbelMask:
    return GumbelMask(np.where(target.edges == 1, PLANTED_LOGIT, -PLANTED_LOGIT), hard=True)


def graph_sections(target: EdgePattern, m_edges: EdgePattern) -> Dict[str, Any]:
    return {"target": target.edges.astype(int).tolist(), "m_edges": m_edges.edges.astype(int).tolist()}


def graphs_from_sections(document: Dict[str, Any]) -> Tuple[EdgePattern, EdgePattern]:
    section = document.get("graphs")
    if section is None:
        raise DataError("document is missing section 'graphs'")
    try:
        return EdgePattern(np.array(section["target"])), EdgePattern(np.array(section["m_edges"]))
    except KeyError as e:
        raise DataError(f"section 'graphs' lacks field {e}")
    except ValueError as e:
        raise DataError(f"section 'graphs' is invalid: {e}")


def write_truth(truth: GroundTruth, spec: InstanceSpec, path: str) -> str:
    """Write the generating parameters, both patterns and the instance spec."""
    sections = model_sections(truth.model, truth_mask(truth.target))
    sections.update(
        {
            "noise": truth.noise.to_dict(),
            "mnar": truth.mnar.to_dict(),
            "graphs": graph_sections(truth.target, truth.m_edges),
            "instance": to_dict(spec),
            "spec_hash": spec.spec_hash(),
        }
    )
    write_document(path, sections)
    logger.info(f"Wrote ground truth to {path}")
    return path


def read_truth(path: str) -> Tuple[GroundTruth, InstanceSpec]:
    """Inverse of write_truth.

    Raises:
        DataError: not a truth document or a section fails to parse
    """
    document = read_document(path)
    for key in ("noise", "mnar", "instance"):
        if key not in document:
            raise DataError(f"{path}: truth document is missing section '{key}'")
    target, m_edges = graphs_from_sections(document)
    truth = GroundTruth(
        model=model_from_sections(document),
        mnar=MnarModel.from_dict(document["mnar"]),
        target=target,
        m_edges=m_edges,
        noise=NoiseModel.from_dict(document["noise"]),
    )
    return truth, from_dict(InstanceSpec, document["instance"], "instance")
