"""
Ground-truth instance generation and interventional data simulation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit

from graph_model import EdgePattern, ErConfig, generate_er
from missing_mechanism import MnarModel, sample_r
from sem_engine import InterventionMask, LinearSem, MlpSem, SemModel, solve_fixed_point
from shared.constants import SIMULATION_TOL
from target_likelihood import NoiseModel

from .config import PILOT_ROWS, InstanceSpec
from .dataset import Dataset

logger = logging.getLogger(__name__)

# intercept of indicators that never go missing
NEVER_MISSING_LOGIT = -50.0
BISECTION_BOUNDS = (-30.0, 30.0)
BISECTION_TOL = 1e-8


@dataclass(eq=False)
class GroundTruth:
    """The generating mechanism, noise, missingness model and both edge patterns."""

    model: SemModel
    mnar: MnarModel
    target: EdgePattern
    m_edges: EdgePattern
    noise: NoiseModel

    @property
    def mask(self) -> np.ndarray:
        return self.target.edges.astype(float)


def _band_weights(shape: Tuple[int, ...], low: float, high: float, rng: np.random.Generator) -> np.ndarray:
    magnitude = rng.uniform(low, high, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * magnitude


def _mechanism_parents(spec: InstanceSpec, rng: np.random.Generator) -> np.ndarray:
    """0/1 X -> R pattern for the chosen mechanism family."""
    k = spec.k
    parents = np.zeros((k, k), dtype=np.int8)
    if spec.mechanism == "mcar" or spec.max_parents == 0 or k == 1:
        return parents
    if spec.mechanism == "mar":
        always_observed = np.sort(rng.permutation(k)[: int(np.ceil(k / 2))])
        pool_of = {j: always_observed for j in range(k) if j not in set(always_observed)}
    else:
        pool_of = {j: np.delete(np.arange(k), j) for j in range(k)}
    for j, pool in pool_of.items():
        if pool.size == 0:
            continue
        count = int(rng.integers(1, min(spec.max_parents, pool.size) + 1))
        parents[rng.choice(pool, size=count, replace=False), j] = 1
    return parents


def _never_missing(spec: InstanceSpec, parents: np.ndarray) -> np.ndarray:
    """Indicators that stay at 1: the always-observed block under MAR."""
    if spec.mechanism != "mar":
        return np.zeros(spec.k, dtype=bool)
    return parents.sum(axis=0) == 0


def calibrate_intercepts(w: np.ndarray, x: np.ndarray, eligible: np.ndarray, rate: float, fixed: np.ndarray) -> np.ndarray:
    """
    Bisect each z_k so the mean missing probability over eligible pilot cells equals ``rate``.

    Args:
        w: K x K mechanism weights
        x: (n, K) pilot values
        eligible: (n, K) cells that can go missing (non-intervened)
        rate: target rate in [0, 1)
        fixed: indicators pinned at NEVER_MISSING_LOGIT

    Returns:
        K intercepts
    """
    k = w.shape[0]
    z = np.full(k, NEVER_MISSING_LOGIT)
    if rate == 0.0:
        return z
    base = x @ w
    for j in range(k):
        cells = base[eligible[:, j], j]
        if fixed[j] or cells.size == 0:
            continue
        lo, hi = BISECTION_BOUNDS
        while hi - lo > BISECTION_TOL:
            mid = 0.5 * (lo + hi)
            if expit(cells + mid).mean() < rate:
                lo = mid
            else:
                hi = mid
        z[j] = 0.5 * (lo + hi)
    return z


def gen_instance(spec: InstanceSpec) -> GroundTruth:
    """
    Sample the ground truth for ``spec``.

    Weights are drawn on +/-(weight_low, weight_high) over an ER pattern and,
    when contractive, rescaled so the spectral norm is at most the Lipschitz
    target. Missingness parents are drawn per indicator up to the cap and the
    intercepts are calibrated on pilot simulations to the target rate.
    """
    graph_seq, weight_seq, mech_seq, pilot_seq = np.random.SeedSequence(spec.seed).spawn(4)
    target = generate_er(
        ErConfig(spec.k, spec.er_density, spec.allow_cycles, spec.seed),
        rng=np.random.default_rng(graph_seq),
    )
    weight_rng = np.random.default_rng(weight_seq)
    weights = target.edges * _band_weights((spec.k, spec.k), spec.weight_low, spec.weight_high, weight_rng)
    if spec.contractive:
        norm = np.linalg.norm(weights, 2) if weights.any() else 0.0
        if norm > spec.lipschitz_target:
            weights *= spec.lipschitz_target / norm

    if spec.sem_family == "linear":
        model: SemModel = LinearSem(weights, lipschitz_target=spec.lipschitz_target, is_contractive=spec.contractive)
    else:
        # tanh((M * W)^T x) as a network with identity output layer
        model = MlpSem(
            w1=weights,
            b1=np.zeros(spec.k),
            w2=np.eye(spec.k),
            b2=np.zeros(spec.k),
            activation="tanh",
            lipschitz_target=spec.lipschitz_target,
        )
    noise = NoiseModel.isotropic(spec.k, spec.noise_sigma)

    mech_rng = np.random.default_rng(mech_seq)
    parents = _mechanism_parents(spec, mech_rng)
    w = parents * _band_weights((spec.k, spec.k), spec.weight_low, spec.weight_high, mech_rng)
    m_edges = EdgePattern(parents)

    x, s = _simulate_values(model, target.edges.astype(float), noise, spec, PILOT_ROWS, np.random.default_rng(pilot_seq))
    z = calibrate_intercepts(w, x, s == 1, spec.missing_rate, _never_missing(spec, parents))
    mnar = MnarModel(w, z, m_edges)
    logger.info(f"Generated instance: {target.num_edges} target edges, {m_edges.num_edges} missingness edges")
    return GroundTruth(model=model, mnar=mnar, target=target, m_edges=m_edges, noise=noise)


def _regime_values(model, mask, noise, k, regime, n, rng) -> Tuple[np.ndarray, np.ndarray]:
    d = np.ones(k, dtype=bool)
    d[list(regime)] = False
    clamp = np.where(d, 0.0, rng.standard_normal((n, k)))
    eps = rng.standard_normal((n, k)) * np.sqrt(noise.variances)
    iv = InterventionMask(np.broadcast_to(d, (n, k)), clamp)
    x = solve_fixed_point(model, mask, iv, eps, tol=SIMULATION_TOL)
    return x, np.broadcast_to(d, (n, k)).astype(np.int8)


def _simulate_values(model, mask, noise, spec: InstanceSpec, n_total: int, rng) -> Tuple[np.ndarray, np.ndarray]:
    """Pilot rows spread evenly over the regimes."""
    regimes = spec.regimes
    per = int(np.ceil(n_total / len(regimes)))
    xs, ss = zip(*(_regime_values(model, mask, noise, spec.k, regime, per, rng) for regime in regimes))
    return np.concatenate(xs), np.concatenate(ss)


def _simulate_records(truth: GroundTruth, spec: InstanceSpec, seed: Optional[int], threads: int):
    regimes = spec.regimes
    children = np.random.SeedSequence([spec.seed if seed is None else seed, 1]).spawn(len(regimes))

    def _one(args) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        regime, seq = args
        regime_rng = np.random.default_rng(seq)
        x, s = _regime_values(truth.model, truth.mask, truth.noise, spec.k, regime, spec.n_per_intervention, regime_rng)
        if spec.missing_rate == 0.0:
            r = np.ones_like(s)
        else:
            r = sample_r(truth.mnar, x, protected=(s == 0), rng=regime_rng)
        return x, r, s

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        parts: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = list(executor.map(_one, zip(regimes, children)))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def simulate(truth: GroundTruth, spec: InstanceSpec, seed: Optional[int] = None, threads: int = 1) -> Dataset:
    """
    Draw n_per_intervention rows for every regime and coarsen them.

    Intervened nodes are clamped to standard-normal values and never go
    missing. Each regime draws from its own child stream of ``seed``
    (default ``spec.seed``), so results do not depend on ``threads``.

    Raises:
        FixedPointError: the mechanism is not contractive
    """
    x, r, s = _simulate_records(truth, spec, seed, threads)
    y = np.where(r == 1, x, np.nan)
    data = Dataset(y, r, s, ignorable=spec.ignorable, provenance=spec.spec_hash())
    logger.info(f"Simulated {data.n} records, missing rate {data.missing_rate:.3f}")
    return data


def simulate_complete(truth: GroundTruth, spec: InstanceSpec, seed: Optional[int] = None, threads: int = 1) -> Tuple[Dataset, np.ndarray]:
    """Simulated dataset plus its uncoarsened values (the complete-data control)."""
    x, r, s = _simulate_records(truth, spec, seed, threads)
    data = Dataset(np.where(r == 1, x, np.nan), r, s, ignorable=spec.ignorable, provenance=spec.spec_hash())
    return data, x
