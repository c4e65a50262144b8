"""Batching and gradient steps for trajectory training.

Trajectories are grouped by exact (n, T); every batch stacks same-shape
arrays with a leading batch axis, so no padding or masking is needed.
Gradient accumulation order inside a step is fixed, keeping whole training
runs bit-reproducible for a given seed.
"""

from dataclasses import dataclass

import numpy as np

from .co_tasks import (
    TspInstance,
    VkcInstance,
    co_feature_specs,
    tsp_input_features,
    tsp_target,
    vkc_input_features,
    vkc_target,
)
from .features import FeatureSpec, Trajectory
from .losses import loss_by_kind
from .model import Model, RolloutResult, co_forward, eval_accuracy, rollout
from .optim import AdamState, adam_step
from .rng import Rng


@dataclass
class TrajBatch:
    algo_id: str
    n: int
    T: int
    size: int
    inputs: dict[FeatureSpec, np.ndarray]
    hints: dict[FeatureSpec, np.ndarray]
    outputs: dict[FeatureSpec, np.ndarray]


def collate(trajs: list[Trajectory]) -> TrajBatch:
    first = trajs[0]
    if any(t.n != first.n or t.T != first.T or t.algo_id != first.algo_id for t in trajs):
        raise ValueError("collate requires identical (algo, n, T)")
    stack = lambda group, spec: np.stack([getattr(t, group)[spec] for t in trajs])
    return TrajBatch(
        first.algo_id,
        first.n,
        first.T,
        len(trajs),
        {spec: stack("inputs", spec) for spec in first.inputs},
        {spec: stack("hints", spec) for spec in first.hints},
        {spec: stack("outputs", spec) for spec in first.outputs},
    )


def bucket_batches(trajs: list[Trajectory], batch_size: int, rng: Rng | None = None
                   ) -> list[TrajBatch]:
    """Shuffle, group by (n, T), emit batches of at most ``batch_size``."""
    order = list(range(len(trajs)))
    if rng is not None:
        rng.shuffle(order)
    buckets: dict[tuple[int, int], list[Trajectory]] = {}
    for i in order:
        buckets.setdefault((trajs[i].n, trajs[i].T), []).append(trajs[i])
    batches = []
    for key in sorted(buckets):
        group = buckets[key]
        for lo in range(0, len(group), batch_size):
            batches.append(collate(group[lo : lo + batch_size]))
    if rng is not None:
        rng.shuffle(batches)
    return batches


def run_batch(model: Model, batch: TrajBatch, mode: str) -> RolloutResult:
    return rollout(model, batch.algo_id, batch.inputs, batch.hints, batch.outputs,
                   batch.T, mode=mode)


def adam_step_on_model(model: Model, state: AdamState) -> None:
    params = model.trainable_params()
    adam_step(params, {name: p.grad for name, p in params.items()}, state)


def train_step(model: Model, batch: TrajBatch, state: AdamState) -> float:
    """Forward, backward, one Adam update on the trainable parameters."""
    model.zero_grads()
    result = run_batch(model, batch, "train")
    result.loss.backward()
    adam_step_on_model(model, state)
    return result.loss.item()


def accumulate_gradients(model: Model, batches: list[TrajBatch]) -> dict[str, float]:
    """Backward each batch without stepping; grads sum in list order."""
    losses = {}
    for batch in batches:
        result = run_batch(model, batch, "train")
        result.loss.backward()
        losses[batch.algo_id] = result.loss.item()
    return losses


def evaluate_outputs(model: Model, trajs: list[Trajectory], batch_size: int = 64
                     ) -> dict[str, float]:
    """Mean per-feature output accuracy under self-fed (eval-mode) rollouts."""
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for batch in bucket_batches(trajs, batch_size):
        result = run_batch(model, batch, "eval")
        scores = eval_accuracy(result.output_preds, batch.outputs)
        for name, score in scores.items():
            totals[name] = totals.get(name, 0.0) + score * batch.size
            counts[name] = counts.get(name, 0) + batch.size
    return {name: totals[name] / counts[name] for name in totals}


# --- optimization-task batches ---------------------------------------------


@dataclass
class CoBatch:
    task_id: str
    n: int
    size: int
    inputs: dict[FeatureSpec, np.ndarray]
    target: np.ndarray
    output_spec: FeatureSpec


def collate_co(task_id: str, instances: list) -> CoBatch:
    n = instances[0].graph.n
    if any(inst.graph.n != n for inst in instances):
        raise ValueError("collate_co requires equal node counts")
    if task_id == "tsp":
        feats = [tsp_input_features(i) for i in instances]
        target = np.stack([tsp_target(i) for i in instances])
        out_spec = co_feature_specs("tsp")["tour_pred"]
    elif task_id == "vkc":
        feats = [vkc_input_features(i) for i in instances]
        target = np.stack([vkc_target(i) for i in instances])
        out_spec = co_feature_specs("vkc")["centers"]
    else:
        raise KeyError(f"unknown task {task_id!r}")
    inputs = {spec: np.stack([f[spec] for f in feats]) for spec in feats[0]}
    return CoBatch(task_id, n, len(instances), inputs, target, out_spec)


def co_bucket_batches(task_id: str, instances: list, batch_size: int,
                      rng: Rng | None = None) -> list[CoBatch]:
    order = list(range(len(instances)))
    if rng is not None:
        rng.shuffle(order)
    buckets: dict[int, list] = {}
    for i in order:
        buckets.setdefault(instances[i].graph.n, []).append(instances[i])
    batches = []
    for n in sorted(buckets):
        group = buckets[n]
        for lo in range(0, len(group), batch_size):
            batches.append(collate_co(task_id, group[lo : lo + batch_size]))
    if rng is not None:
        rng.shuffle(batches)
    return batches


def co_steps_for(n: int, steps: int | None) -> int:
    """Processor iterations for hint-free inference; defaults to n."""
    return n if steps is None else steps


def co_loss(model: Model, batch: CoBatch, steps: int | None = None):
    preds = co_forward(model, batch.task_id, batch.inputs, co_steps_for(batch.n, steps))
    logits = preds[batch.output_spec]
    return loss_by_kind(batch.output_spec.kind, logits, batch.target), logits


def co_train_step(model: Model, batch: CoBatch, state: AdamState,
                  steps: int | None = None) -> float:
    model.zero_grads()
    loss, _ = co_loss(model, batch, steps)
    loss.backward()
    params = model.trainable_params()
    adam_step(params, {name: p.grad for name, p in params.items()}, state)
    return loss.item()


def co_predict(model: Model, task_id: str, instances: list, batch_size: int = 64,
               steps: int | None = None) -> list[np.ndarray]:
    """Output logits per instance, in input order."""
    outputs: list[np.ndarray | None] = [None] * len(instances)
    index = {id(inst): i for i, inst in enumerate(instances)}
    for batch_insts in _group_by_n(instances, batch_size):
        batch = collate_co(task_id, batch_insts)
        preds = co_forward(model, task_id, batch.inputs, co_steps_for(batch.n, steps))
        logits = preds[batch.output_spec].data
        for row, inst in enumerate(batch_insts):
            outputs[index[id(inst)]] = logits[row]
    return outputs


def _group_by_n(instances: list, batch_size: int) -> list[list]:
    buckets: dict[int, list] = {}
    for inst in instances:
        buckets.setdefault(inst.graph.n, []).append(inst)
    groups = []
    for n in sorted(buckets):
        group = buckets[n]
        groups.extend(group[lo : lo + batch_size] for lo in range(0, len(group), batch_size))
    return groups
