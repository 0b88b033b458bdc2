"""
Penalized EM driver.

Each epoch imputes the missing values once under a frozen snapshot of the
parameters, then makes one pass of minibatch Adam ascent. Theta and phi are
updated on alternating minibatches (even global steps theta, odd steps phi).
"""

import dataclasses
import logging
from typing import Optional

import numpy as np
from tqdm import tqdm

from estep_imputation import ImputedBatch, impute_gaussian, impute_rejection
from graph_model import is_acyclic, prune_to_acyclic
from sem_engine import LinearSem, draw_mask, expected_mask, spectral_normalize
from shared.constants import ERROR_MESSAGES
from shared.exceptions import ConfigError, NonFiniteGradientError, TrainingError

from .config import TrainConfig
from .extraction import edge_strength, extract_graph
from .objective import mechanism_grad, objective_report, penalty_grad_logits, penalty_subgrad_w, q_objective_with_grad
from .state import MASK_LOGITS, MNAR_W, FitState, initialize_state

logger = logging.getLogger(__name__)

# pruned edges are pinned far below the inclusion threshold
PRUNED_LOGIT = -30.0
MAX_ABORTED_EPOCHS = 3
# stream tags keyed together with (seed, epoch)
_ESTEP_STREAM = 1
_MSTEP_STREAM = 2
_EVAL_STREAM = 3


def _stream(cfg: TrainConfig, epoch: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, epoch, tag])


def m_step(imputed: ImputedBatch, state: FitState, cfg: TrainConfig, epoch: int = 0) -> FitState:
    """
    One pass of minibatch Adam ascent on the penalized objective.

    Theta steps draw a relaxed mask, ascend the objective minus the mask
    penalties and project the model back to its Lipschitz target. Phi steps
    ascend the mechanism likelihood minus lambda2 |w|_1 (subgradient with
    sign(0) = 0). The state is updated in place and returned.

    Raises:
        NonFiniteGradientError: a gradient holds NaN or infinity
    """
    rng = _stream(cfg, epoch, _MSTEP_STREAM)
    order = rng.permutation(len(imputed))
    mask = state.mask.with_temperature(cfg.temperature_at(epoch))
    state.mask = mask
    for start in range(0, order.size, cfg.batch_size):
        batch = imputed.rows(order[start : start + cfg.batch_size])
        if state.step % 2 == 0:
            sample = draw_mask(state.mask, rng)
            _, grad = q_objective_with_grad(batch, state, cfg, sample=sample, rng=rng)
            grads = dict(grad.theta)
            grads[MASK_LOGITS] = grads[MASK_LOGITS] - penalty_grad_logits(state, cfg)
            state.with_theta(state.optimizer.ascend(state.theta(), grads))
            state.model = spectral_normalize(state.model, power_iters=cfg.power_iters)
        else:
            grads = mechanism_grad(batch, state)
            grads[MNAR_W] = grads[MNAR_W] - penalty_subgrad_w(state, cfg) * state.mnar.support()
            state.with_phi(state.optimizer.ascend(state.phi(), grads))
        state.step += 1
    return state


class EMTrainer:
    """Runs penalized EM on one dataset."""

    def __init__(self, cfg: TrainConfig, progress: bool = False):
        self.cfg = cfg
        self.progress = progress
        self.logger = logging.getLogger(self.__class__.__name__)

    def check_preconditions(self, data) -> None:
        if data.n == 0:
            raise TrainingError("dataset is empty")
        if self.cfg.estep_mode == "gaussian-exact" and not self.skips_estep(data) and not (data.ignorable or self.cfg.assume_ignorable):
            raise ConfigError(ERROR_MESSAGES["gaussian_exact_requires"], field="estep_mode")

    def skips_estep(self, data) -> bool:
        return data.pre_imputed or not data.has_missing

    def e_step(self, data, state: FitState, epoch: int) -> ImputedBatch:
        """Complete the records under the current (frozen) parameters."""
        cfg = self.cfg
        if self.skips_estep(data):
            return ImputedBatch.pass_through(data.y, data.r, data.s)
        snapshot_mask = expected_mask(state.mask)
        if cfg.estep_mode == "gaussian-exact":
            if not isinstance(state.model, LinearSem):
                raise ConfigError(ERROR_MESSAGES["gaussian_exact_requires"], field="estep_mode")
            rng = _stream(cfg, epoch, _ESTEP_STREAM)
            effective = snapshot_mask * state.model.b
            draws = [impute_gaussian(data.y, data.r, data.s, effective, state.noise, rng) for _ in range(cfg.rejection.samples_per_record)]
            if len(draws) == 1:
                return draws[0]
            order = np.argsort(np.tile(np.arange(data.n), len(draws)), kind="stable")
            return ImputedBatch(
                x=np.concatenate([d.x for d in draws])[order],
                r=np.concatenate([d.r for d in draws])[order],
                s=np.concatenate([d.s for d in draws])[order],
                attempts=np.concatenate([d.attempts for d in draws])[order],
                fallback=np.concatenate([d.fallback for d in draws])[order],
                record_index=np.tile(np.arange(data.n), len(draws))[order],
            )
        return impute_rejection(
            data.y,
            data.r,
            data.s,
            state.model,
            snapshot_mask,
            state.noise,
            state.mnar,
            dataclasses.replace(cfg.rejection, seed=cfg.seed),
            epoch=epoch,
            logdet_mode=cfg.logdet_mode,
            logdet_cfg=cfg.logdet,
            threads=cfg.threads,
        )

    def fit(self, data, state: Optional[FitState] = None) -> FitState:
        """
        Run the configured number of epochs.

        Args:
            data: Dataset (y, r, s, ignorable, pre_imputed)
            state: Starting state; a fresh initialization when None

        Returns:
            The trained FitState with one history record per epoch
        """
        cfg = self.cfg
        self.check_preconditions(data)
        state = state if state is not None else initialize_state(data, cfg)
        if self.skips_estep(data):
            reason = "pre-imputed values" if data.pre_imputed else "no missing entries"
            self.logger.info(f"E-step pass-through ({reason})")

        quiet_epochs = 0
        aborted_in_row = 0
        for epoch in tqdm(range(state.epoch, cfg.epochs), desc="EM epochs", disable=not self.progress):
            before = state.parameter_vector()
            imputed = self.e_step(data, state, epoch)
            stats = imputed.acceptance_stats()
            if stats["records"]:
                self.logger.info(
                    f"Epoch {epoch}: imputed {stats['records']} rows, mean attempts {stats['mean_attempts']:.2f}, "
                    f"fallbacks {stats['fallback_count']}"
                )
            aborted = False
            try:
                m_step(imputed, state, cfg, epoch)
                aborted_in_row = 0
            except NonFiniteGradientError as e:
                aborted = True
                aborted_in_row += 1
                self.logger.warning(f"Epoch {epoch} aborted: {e}")
                if aborted_in_row >= MAX_ABORTED_EPOCHS:
                    raise
            report = objective_report(imputed, state, cfg, rng=_stream(cfg, epoch, _EVAL_STREAM))
            change = float(np.max(np.abs(state.parameter_vector() - before))) if before.size else 0.0
            state.epoch = epoch + 1
            state.history.append(
                {
                    "epoch": epoch,
                    **report,
                    "imputed_records": stats["records"],
                    "mean_attempts": stats["mean_attempts"],
                    "fallback_count": stats["fallback_count"],
                    "lipschitz_bound": state.model.lipschitz_bound(),
                    "temperature": state.mask.temperature,
                    "max_change": change,
                    "aborted": aborted,
                }
            )
            quiet_epochs = quiet_epochs + 1 if change < cfg.early_stop_tol else 0
            if cfg.early_stop and quiet_epochs >= cfg.early_stop_patience:
                self.logger.info(f"Early stop after epoch {epoch}: parameter change below {cfg.early_stop_tol:g} for {quiet_epochs} epochs")
                break
        return state


def run_em(data, cfg: TrainConfig, progress: bool = False) -> FitState:
    """
    Penalized EM from a fresh initialization.

    Raises:
        ConfigError: gaussian-exact requested for a non-ignorable dataset
        InitializationError: the dataset cannot seed the parameters
        ProposalMismatchError: the E-step found no usable proposal for a record
    """
    return EMTrainer(cfg, progress=progress).fit(data)


def enforce_acyclic(state: FitState, cfg: TrainConfig) -> FitState:
    """Prune the extracted graph to a DAG by pinning the removed edges' logits."""
    target, _ = extract_graph(state, cfg.edge_threshold)
    if is_acyclic(target):
        return state
    pruned = prune_to_acyclic(target, edge_strength(state))
    removed = (target.edges == 1) & (pruned.edges == 0)
    logits = state.mask.logits.copy()
    logits[removed] = PRUNED_LOGIT
    state.mask = state.mask.with_logits(logits)
    logger.info(f"DAG pruning removed {int(removed.sum())} edge(s) from the extracted graph")
    return state


def run_em_dag(data, cfg: TrainConfig, progress: bool = False) -> FitState:
    """
    EM with the acyclicity penalty on the expected mask.

    The extracted graph is guaranteed acyclic: if thresholding leaves a cycle,
    edges on cycles are dropped weakest first. With lambda_dag = 0 this is
    exactly run_em.
    """
    state = run_em(data, cfg, progress=progress)
    if not cfg.dag_constrained:
        return state
    return enforce_acyclic(state, cfg)
