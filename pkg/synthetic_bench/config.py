"""
Configuration for synthetic instance generation.
"""

import hashlib
import json
from dataclasses import dataclass
from typing import List, Optional

from shared.config import (
    require_choice,
    require_nonnegative,
    require_positive,
    require_range,
    to_dict,
)
from shared.constants import (
    DEFAULT_LIPSCHITZ,
    DEFAULT_MAX_PARENTS,
    DEFAULT_N_PER_INTERVENTION,
    DEFAULT_NODES,
    DEFAULT_NOISE_SIGMA,
    DEFAULT_WEIGHT_BAND,
    MECHANISMS,
    SEM_FAMILIES,
)
from shared.exceptions import ConfigError

PILOT_ROWS = 2000
RATE_TOLERANCE = 0.01


@dataclass
class InstanceSpec:
    """
    Ground-truth instance and sampling protocol.

    Attributes:
        k: node count
        er_density: expected degree of the ER graph (1.0 for ER-1, 2.0 for ER-2)
        sem_family: 'linear' or 'tanh'
        weight_low / weight_high: magnitude band of the weights (random sign)
        lipschitz_target: contractivity target of the mechanism
        noise_sigma: standard deviation of every noise term
        n_per_intervention: rows per intervention regime
        interventions: node sets per regime; None means every single node
        include_observational: add a regime without interventions
        max_parents: cap on the parents of each missingness indicator
        missing_rate: target average missingness over non-intervened cells
        mechanism: 'mnar', 'mar' or 'mcar'
        allow_cycles: False generates a DAG
        contractive: rescale weights to the Lipschitz target
        seed: master seed
    """

    k: int = DEFAULT_NODES
    er_density: float = 1.0
    sem_family: str = "linear"
    weight_low: float = DEFAULT_WEIGHT_BAND[0]
    weight_high: float = DEFAULT_WEIGHT_BAND[1]
    lipschitz_target: float = DEFAULT_LIPSCHITZ
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    n_per_intervention: int = DEFAULT_N_PER_INTERVENTION
    interventions: Optional[List[List[int]]] = None
    include_observational: bool = False
    max_parents: int = DEFAULT_MAX_PARENTS
    missing_rate: float = 0.1
    mechanism: str = "mnar"
    allow_cycles: bool = True
    contractive: bool = True
    seed: int = 0

    def __post_init__(self):
        require_positive("k", self.k)
        require_nonnegative("er_density", self.er_density)
        require_choice("sem_family", self.sem_family, SEM_FAMILIES)
        require_choice("mechanism", self.mechanism, MECHANISMS)
        require_positive("weight_low", self.weight_low)
        if not self.weight_high > self.weight_low:
            raise ConfigError(f"weight band must satisfy 0 < low < high (got {self.weight_low}, {self.weight_high})", field="weight_high")
        require_range("lipschitz_target", self.lipschitz_target, 0.0, 1.0)
        if self.lipschitz_target == 0.0:
            require_positive("lipschitz_target", self.lipschitz_target)
        require_positive("noise_sigma", self.noise_sigma)
        require_positive("n_per_intervention", self.n_per_intervention)
        require_nonnegative("max_parents", self.max_parents)
        require_range("missing_rate", self.missing_rate, 0.0, 1.0)
        require_nonnegative("seed", self.seed)
        if self.interventions is not None:
            self.interventions = [sorted({int(node) for node in regime}) for regime in self.interventions]
            for regime in self.interventions:
                for node in regime:
                    if not 0 <= node < self.k:
                        raise ConfigError(f"intervention target {node} outside 0..{self.k - 1}", field="interventions")
        if not self.regimes:
            raise ConfigError("at least one sampling regime is required", field="interventions")

    @property
    def regimes(self) -> List[List[int]]:
        """Intervention node sets in sampling order."""
        regimes = [list(r) for r in self.interventions] if self.interventions is not None else [[node] for node in range(self.k)]
        if self.include_observational:
            regimes = [[]] + regimes
        return regimes

    @property
    def ignorable(self) -> bool:
        return self.mechanism in ("mar", "mcar")

    def spec_hash(self) -> str:
        canonical = json.dumps(to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
