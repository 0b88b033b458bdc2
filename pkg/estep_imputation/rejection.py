"""
Rejection-sampling E-step for general (nonlinear, MNAR) models.

For a record with missing block Omega the unnormalized posterior is

    p(x_Omega, y_Gamma | theta) * p(r | x, phi),

proposals come from a Gaussian around the fixed-point completion of the record
and a draw is accepted with probability weight / (c0 * q). The envelope c0 is
set from pilot draws and raised (restarting the record) whenever a draw
exceeds it.

Every record owns a random stream keyed by (seed, epoch, record, sample), so
results do not depend on chunking or thread count.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import norm
from tqdm import tqdm

from missing_mechanism import MnarModel, log_prob_r_rows
from sem_engine import InterventionMask, SemModel, solve_fixed_point
from shared.exceptions import ProposalMismatchError
from target_likelihood import (
    LogDetEstimatorConfig,
    NoiseModel,
    RouletteDraw,
    draw_roulette,
    log_density_rows,
    resolve_logdet_mode,
)

from .batch import ImputedBatch, interventions_of
from .config import RejectionConfig

logger = logging.getLogger(__name__)

LOG2 = float(np.log(2.0))


def log_posterior_weight_rows(
    x: np.ndarray,
    r: np.ndarray,
    s: np.ndarray,
    model: SemModel,
    mask: np.ndarray,
    noise: NoiseModel,
    mnar: MnarModel,
    logdet_mode: str = "auto",
    logdet_cfg: Optional[LogDetEstimatorConfig] = None,
    draw: Optional[RouletteDraw] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """log p(x | theta) + log p(r | x, phi) for each completed row."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = np.atleast_2d(np.asarray(s))
    iv = interventions_of(x, s)
    target = log_density_rows(model, mask, noise, x, iv, logdet_mode, logdet_cfg, rng=rng, draw=draw)
    return target + log_prob_r_rows(mnar, r, x, skip=~s.astype(bool))


def log_posterior_weight(x_full, model, mask, noise, iv: InterventionMask, mnar, r, logdet_mode="auto", cfg=None, rng=None) -> float:
    x_full = np.asarray(x_full, dtype=float)
    target = log_density_rows(model, mask, noise, x_full, iv, logdet_mode, cfg, rng=rng)[0]
    return float(target + log_prob_r_rows(mnar, r, x_full, skip=~iv.d))


def posterior_weight(x_full, model, mask, noise, iv: InterventionMask, mnar, r, logdet_mode="auto", cfg=None, rng=None) -> float:
    """Unnormalized posterior weight exp(log p(x | theta) + log p(r | x, phi))."""
    return float(np.exp(log_posterior_weight(x_full, model, mask, noise, iv, mnar, r, logdet_mode, cfg, rng)))


def proposal_centers(model: SemModel, mask: np.ndarray, y: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve x_Omega = F(x)_Omega with the observed block held at its recorded values."""
    missing = np.asarray(r) == 0
    held = np.where(missing, 0.0, y)
    return solve_fixed_point(model, mask, InterventionMask(missing, held), np.zeros_like(held))


@dataclass
class _RecordState:
    """Sampler state of one (record, sample) pair."""

    index: int
    base: np.ndarray
    missing: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    rng: np.random.Generator
    draw: Optional[RouletteDraw] = None
    log_c0: float = np.inf
    attempts: int = 0
    total_attempts: int = 0
    restarts: int = 0
    best_x: Optional[np.ndarray] = None
    best_lw: float = -np.inf
    seen_x: List[np.ndarray] = field(default_factory=list)
    seen_lw: List[np.ndarray] = field(default_factory=list)
    result: Optional[np.ndarray] = None
    used_fallback: bool = False


class RejectionSampler:
    """Rejection sampler bound to one frozen parameter snapshot."""

    def __init__(
        self,
        model: SemModel,
        mask: np.ndarray,
        noise: NoiseModel,
        mnar: MnarModel,
        cfg: RejectionConfig,
        logdet_mode: str = "auto",
        logdet_cfg: Optional[LogDetEstimatorConfig] = None,
    ):
        self.model = model
        self.mask = np.asarray(mask, dtype=float)
        self.noise = noise
        self.mnar = mnar
        self.cfg = cfg
        self.logdet_mode = resolve_logdet_mode(logdet_mode, model)
        self.logdet_cfg = logdet_cfg if logdet_cfg is not None else LogDetEstimatorConfig()
        self.logger = logging.getLogger(self.__class__.__name__)

    def _log_weights(self, states: Sequence[_RecordState], blocks: Sequence[np.ndarray], r, s) -> List[np.ndarray]:
        """Log importance ratios log(weight / q) for each state's block of proposals."""
        rows, rs, ss, n_terms, probes = [], [], [], [], []
        for state, block in zip(states, blocks):
            x = np.repeat(state.base[None, :], block.shape[0], axis=0)
            x[:, state.missing] = block
            rows.append(x)
            rs.append(np.repeat(r[state.index][None, :], block.shape[0], axis=0))
            ss.append(np.repeat(s[state.index][None, :], block.shape[0], axis=0))
            if state.draw is not None:
                n_terms.append(np.repeat(state.draw.n_terms, block.shape[0]))
                probes.append(np.repeat(state.draw.probes, block.shape[0], axis=0))
        draw = RouletteDraw(np.concatenate(n_terms), np.concatenate(probes)) if n_terms else None
        lw = log_posterior_weight_rows(
            np.concatenate(rows),
            np.concatenate(rs),
            np.concatenate(ss),
            self.model,
            self.mask,
            self.noise,
            self.mnar,
            self.logdet_mode,
            self.logdet_cfg,
            draw=draw,
        )
        out, start = [], 0
        for state, block in zip(states, blocks):
            stop = start + block.shape[0]
            log_q = norm.logpdf(block, loc=state.center, scale=state.scale).sum(axis=1)
            values = lw[start:stop] - log_q
            out.append(np.where(np.isfinite(values), values, -np.inf))
            start = stop
        return out

    def _propose(self, state: _RecordState, count: int) -> np.ndarray:
        return state.center + state.scale * state.rng.standard_normal((count, state.center.size))

    def _remember(self, state: _RecordState, block: np.ndarray, lw: np.ndarray) -> None:
        j = int(np.argmax(lw))
        if lw[j] > state.best_lw:
            state.best_lw = float(lw[j])
            state.best_x = block[j].copy()
        if self.cfg.fallback == "resample-proposal":
            state.seen_x.append(block)
            state.seen_lw.append(lw)

    def _finish_with_fallback(self, state: _RecordState) -> None:
        state.used_fallback = True
        if self.cfg.fallback == "resample-proposal" and state.seen_x:
            lw = np.concatenate(state.seen_lw)
            probs = np.exp(lw - lw.max())
            probs /= probs.sum()
            state.result = np.concatenate(state.seen_x)[state.rng.choice(probs.size, p=probs)]
        else:
            state.result = state.best_x

    def _step(self, state: _RecordState, block: np.ndarray, lw: np.ndarray) -> None:
        """Consume one block of proposals in order."""
        self._remember(state, block, lw)
        uniforms = state.rng.random(block.shape[0])
        for j in range(block.shape[0]):
            state.attempts += 1
            state.total_attempts += 1
            if lw[j] > state.log_c0:
                if state.restarts < self.cfg.max_restarts:
                    state.restarts += 1
                    state.log_c0 = float(lw[j]) + LOG2
                    state.attempts = 0
                    self.logger.debug(f"Record {state.index}: envelope raised to log c0 = {state.log_c0:.4f}, restarting")
                    return
                state.result = block[j]
                return
            if np.log(uniforms[j]) < lw[j] - state.log_c0:
                state.result = block[j]
                return
        if state.attempts >= self.cfg.max_attempts:
            self._finish_with_fallback(state)

    def sample_chunk(self, indices: np.ndarray, y, r, s, epoch: int, record_ids: np.ndarray) -> Dict[int, List[_RecordState]]:
        """Impute the records ``indices`` (positions into y/r/s)."""
        cfg = self.cfg
        centers = proposal_centers(self.model, self.mask, y[indices], r[indices])
        states: List[_RecordState] = []
        for pos, i in enumerate(indices):
            missing = r[i] == 0
            scale = np.sqrt(cfg.proposal_scale * self.noise.variances[missing])
            base = np.where(missing, 0.0, y[i])
            for sample in range(cfg.samples_per_record):
                rng = np.random.default_rng([cfg.seed, epoch, int(record_ids[i]), sample])
                draw = draw_roulette(self.logdet_cfg, 1, self.model.k, rng) if self.logdet_mode == "stochastic" else None
                states.append(_RecordState(int(i), base, missing, centers[pos][missing], scale, rng, draw))

        # pilot draws set the envelope
        pilots = [self._propose(state, cfg.pilot_draws) for state in states]
        for state, block, lw in zip(states, pilots, self._log_weights(states, pilots, r, s)):
            if not np.any(np.isfinite(lw)):
                raise ProposalMismatchError(f"record {int(record_ids[state.index])}: every proposal has zero posterior weight")
            self._remember(state, block, lw)
            state.log_c0 = float(np.log(cfg.c0)) if cfg.c0 is not None else float(lw.max()) + LOG2

        active = list(states)
        while active:
            blocks = [self._propose(state, min(cfg.block_size, cfg.max_attempts - state.attempts)) for state in active]
            for state, block, lw in zip(active, blocks, self._log_weights(active, blocks, r, s)):
                self._step(state, block, lw)
            active = [state for state in active if state.result is None]

        by_record: Dict[int, List[_RecordState]] = {}
        for state in states:
            by_record.setdefault(state.index, []).append(state)
        return by_record


def impute_rejection(
    y: np.ndarray,
    r: np.ndarray,
    s: np.ndarray,
    model: SemModel,
    mask: np.ndarray,
    noise: NoiseModel,
    mnar: MnarModel,
    cfg: RejectionConfig,
    epoch: int = 0,
    logdet_mode: str = "auto",
    logdet_cfg: Optional[LogDetEstimatorConfig] = None,
    threads: int = 1,
    record_ids: Optional[np.ndarray] = None,
    progress: bool = False,
) -> ImputedBatch:
    """
    Draw posterior completions for every record with missing entries.

    Args:
        y: (n, K) recorded values, NaN where missing
        r: (n, K) missingness indicators (1 observed)
        s: (n, K) intervention indicators (0 intervened)
        model: Mechanism snapshot
        mask: Mask values used for the snapshot
        noise: Noise model snapshot
        mnar: Missingness mechanism snapshot
        cfg: Rejection sampler settings
        epoch: EM epoch, part of every record's random-stream key
        logdet_mode: 'auto', 'exact' or 'stochastic'
        logdet_cfg: Stochastic estimator settings
        threads: Worker threads over record chunks
        record_ids: Global record ids for the stream keys (default 0..n-1)
        progress: Show a progress bar over chunks

    Returns:
        ImputedBatch with samples_per_record rows per record, ordered by record

    Raises:
        ProposalMismatchError: a record where every pilot proposal has zero weight
    """
    y = np.asarray(y, dtype=float)
    r = np.asarray(r)
    s = np.asarray(s)
    n = y.shape[0]
    record_ids = np.arange(n) if record_ids is None else np.asarray(record_ids)
    todo = np.flatnonzero(np.any(r == 0, axis=1))
    per_record = cfg.samples_per_record

    sampler = RejectionSampler(model, mask, noise, mnar, cfg, logdet_mode, logdet_cfg)
    results: Dict[int, List[_RecordState]] = {}
    lock = threading.Lock()
    chunks = [todo[i : i + cfg.chunk_size] for i in range(0, todo.size, cfg.chunk_size)]

    def _run(chunk):
        out = sampler.sample_chunk(chunk, y, r, s, epoch, record_ids)
        with lock:
            results.update(out)

    if chunks:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
            futures = [executor.submit(_run, chunk) for chunk in chunks]
            for future in tqdm(as_completed(futures), total=len(futures), desc="E-step", disable=not progress):
                future.result()

    x_rows, attempts, fallback, index = [], [], [], []
    for i in range(n):
        if i in results:
            for state in results[i]:
                row = state.base.copy()
                row[state.missing] = state.result
                x_rows.append(row)
                attempts.append(state.total_attempts)
                fallback.append(state.used_fallback)
                index.append(i)
        else:
            for _ in range(per_record):
                x_rows.append(y[i].copy())
                attempts.append(1)
                fallback.append(False)
                index.append(i)
    index = np.asarray(index, dtype=int)
    return ImputedBatch(
        x=np.asarray(x_rows, dtype=float).reshape(-1, y.shape[1]),
        r=r[index],
        s=s[index],
        attempts=np.asarray(attempts, dtype=int),
        fallback=np.asarray(fallback, dtype=bool),
        record_index=index,
    )
