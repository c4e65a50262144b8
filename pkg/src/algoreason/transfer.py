"""Pre-training and the four ways of reusing algorithmic knowledge.

- ``pretrain``: one shared processor, one head per algorithm, round-robin
  batches; returns the best-validation checkpoint.
- ``apply_pf``: copy the pre-trained processor into a target model and
  freeze it (heads stay fresh).
- ``apply_pft``: same copy, left trainable.
- ``apply_2proc``: two processors, the pre-trained one frozen, a fresh one
  trainable; their latents are combined by elementwise mean.
- ``train_mtl`` (see harness): the base algorithms and the target task are
  trained together through one shared processor; each cycle accumulates
  every task's gradients in fixed order, then takes one optimizer step.
"""

from dataclasses import dataclass, field

import numpy as np

from .algorithms import algo_feature_specs
from .checkpoint import load_checkpoint, save_checkpoint
from .features import Trajectory
from .model import Model, ProcessorParams, build_model
from .optim import AdamState
from .rng import Rng
from .training import bucket_batches, evaluate_outputs, train_step

TRANSFER_MODES = ("none", "pf", "pft", "2proc", "mtl")


@dataclass
class TransferConfig:
    mode: str = "none"
    pretrained_checkpoint: str | None = None
    base_algorithms: tuple[str, ...] = ()
    combine: str = "mean"

    def __post_init__(self):
        if self.mode not in TRANSFER_MODES:
            raise ValueError(f"unknown transfer mode {self.mode!r}")
        if self.mode in ("pf", "pft", "2proc") and not self.pretrained_checkpoint:
            raise ValueError(f"{self.mode} requires a pretrained checkpoint")
        if self.mode == "mtl" and not self.base_algorithms:
            raise ValueError("mtl requires base algorithms")


@dataclass
class PretrainResult:
    model: Model
    history: list[dict]
    best_epoch: int
    best_score: float


def pretrain(
    algos: list[str],
    train_trajs: dict[str, list[Trajectory]],
    val_trajs: dict[str, list[Trajectory]],
    rng: Rng,
    epochs: int = 100,
    batch_size: int = 64,
    lr: float = 3e-4,
    latent: int = 128,
    edge_state: bool = False,
    checkpoint_path=None,
    target_accuracy: float | dict[str, float] | None = None,
    log=None,
) -> PretrainResult:
    """Train one shared processor on several algorithms at once.

    Batches cycle round-robin over the algorithms; the checkpoint with the
    best mean validation output accuracy is kept (and written to
    ``checkpoint_path`` if given). ``target_accuracy`` (one value or a
    per-algorithm map) stops early once every algorithm reaches its target.
    """
    model = build_model(latent, rng.split("init"), edge_state,
                        {a: algo_feature_specs(a) for a in algos})
    opt = AdamState(lr=lr)
    history: list[dict] = []
    best_score, best_epoch = -1.0, -1

    for epoch in range(epochs):
        epoch_rng = rng.split(f"epoch{epoch}")
        per_algo = {a: bucket_batches(train_trajs[a], batch_size, epoch_rng.split(a))
                    for a in algos}
        losses = {a: 0.0 for a in algos}
        counts = {a: 0 for a in algos}
        for round_idx in range(max(len(b) for b in per_algo.values())):
            for a in algos:  # round-robin: one batch per algorithm per cycle
                batches = per_algo[a]
                if round_idx < len(batches):
                    losses[a] += train_step(model, batches[round_idx], opt)
                    counts[a] += 1

        accuracy = {}
        for a in algos:
            scores = evaluate_outputs(model, val_trajs[a], batch_size)
            accuracy[a] = float(np.mean(list(scores.values())))
        entry = {
            "epoch": epoch,
            "train_loss": {a: losses[a] / max(counts[a], 1) for a in algos},
            "val_accuracy": accuracy,
        }
        history.append(entry)
        if log:
            log(entry)

        score = float(np.mean(list(accuracy.values())))
        if score > best_score:
            best_score, best_epoch = score, epoch
            if checkpoint_path is not None:
                save_checkpoint(model, checkpoint_path, opt,
                                extra={"best_epoch": epoch, "val_accuracy": accuracy})
        if target_accuracy is not None:
            targets = (target_accuracy if isinstance(target_accuracy, dict)
                       else {a: target_accuracy for a in algos})
            if all(accuracy[a] >= t for a, t in targets.items()):
                break

    if checkpoint_path is not None and best_epoch >= 0:
        model = load_checkpoint(checkpoint_path)
    return PretrainResult(model, history, best_epoch, best_score)


def _copy_processor(src: ProcessorParams, dst: ProcessorParams) -> None:
    if set(src.params) != set(dst.params):
        raise ValueError("processor parameter sets differ")
    for name, p in src.params.items():
        dst.params[name].data = p.data.copy()
        dst.params[name].zero_grad()


def apply_pf(checkpoint_path, target_model: Model) -> Model:
    """Copy the pre-trained processor into the target and freeze it."""
    source = load_checkpoint(checkpoint_path)
    _copy_processor(source.processors[0], target_model.processors[0])
    target_model.processors[0].trainable = False
    return target_model


def apply_pft(checkpoint_path, target_model: Model) -> Model:
    """Copy the pre-trained processor into the target, leaving it trainable."""
    source = load_checkpoint(checkpoint_path)
    _copy_processor(source.processors[0], target_model.processors[0])
    target_model.processors[0].trainable = True
    return target_model


def apply_2proc(checkpoint_path, target_model: Model, rng: Rng) -> Model:
    """Frozen pre-trained processor beside a fresh trainable one; their
    latent updates are averaged elementwise."""
    source = load_checkpoint(checkpoint_path)
    frozen = ProcessorParams.init(target_model.latent, target_model.edge_state,
                                  rng.split("2proc"))
    _copy_processor(source.processors[0], frozen)
    frozen.trainable = False
    target_model.processors = [frozen, target_model.processors[0]]
    target_model.combine = "mean"
    return target_model


def apply_transfer(config: TransferConfig, target_model: Model, rng: Rng) -> Model:
    if config.mode in ("none", "mtl"):
        return target_model
    if config.mode == "pf":
        return apply_pf(config.pretrained_checkpoint, target_model)
    if config.mode == "pft":
        return apply_pft(config.pretrained_checkpoint, target_model)
    return apply_2proc(config.pretrained_checkpoint, target_model, rng)


def mtl_cycle(model: Model, traj_batches: list, co_batch, opt: AdamState,
              co_steps: int | None = None) -> dict[str, float]:
    """One multi-task cycle: accumulate every task's gradients in fixed
    order (algorithms, then the optimization task), then step once, so the
    processor gradient is exactly the sum of per-task contributions."""
    from .training import adam_step_on_model, co_loss, run_batch  # local: avoid cycle

    model.zero_grads()
    losses: dict[str, float] = {}
    for batch in traj_batches:
        result = run_batch(model, batch, "train")
        result.loss.backward()
        losses[batch.algo_id] = result.loss.item()
    if co_batch is not None:
        loss, _ = co_loss(model, co_batch, co_steps)
        loss.backward()
        losses[co_batch.task_id] = loss.item()
    adam_step_on_model(model, opt)
    return losses


def train_mtl(
    algos: list[str],
    co_task: str | None,
    traj_train: dict[str, list[Trajectory]],
    co_train: list,
    rng: Rng,
    epochs: int = 20,
    batch_size: int = 64,
    lr: float = 3e-4,
    latent: int = 128,
    edge_state: bool = False,
    co_steps: int | None = None,
    model: Model | None = None,
    log=None,
) -> tuple[Model, list[dict]]:
    """Train base algorithms and the target task through one shared processor."""
    from .training import bucket_batches as traj_batches_of
    from .training import co_bucket_batches

    if model is None:
        head_specs = {a: algo_feature_specs(a) for a in algos}
        model = build_model(latent, rng.split("init"), edge_state, head_specs)
        if co_task is not None:
            from .co_tasks import co_feature_specs

            model.add_head(co_task, co_feature_specs(co_task), rng.split(f"head.{co_task}"))
    opt = AdamState(lr=lr)
    history = []
    for epoch in range(epochs):
        epoch_rng = rng.split(f"epoch{epoch}")
        per_algo = {a: traj_batches_of(traj_train[a], batch_size, epoch_rng.split(a))
                    for a in algos}
        co_batches = (co_bucket_batches(co_task, co_train, batch_size, epoch_rng.split("co"))
                      if co_task is not None else [])
        cycles = max([len(b) for b in per_algo.values()] + [len(co_batches)])
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for idx in range(cycles):
            batches = [per_algo[a][idx] for a in algos if idx < len(per_algo[a])]
            co_batch = co_batches[idx] if idx < len(co_batches) else None
            for task, value in mtl_cycle(model, batches, co_batch, opt, co_steps).items():
                sums[task] = sums.get(task, 0.0) + value
                counts[task] = counts.get(task, 0) + 1
        entry = {"epoch": epoch,
                 "train_loss": {t: sums[t] / counts[t] for t in sums}}
        history.append(entry)
        if log:
            log(entry)
    return model, history
