"""Encode-process-decode network over trajectory features.

One shared recurrent *processor* runs a gated max-aggregation message pass
over node latents; each algorithm or task owns a lightweight *head*: one
linear encoder per feature (into the node / edge / graph channel) and one
decoder per predicted feature. Node latents start at zero and are updated
by a convex gate: h <- g * h_candidate + (1 - g) * h_previous.

All ops accept a leading batch axis, so a batch of same-shape instances is
processed as stacked arrays.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, constant, parameter
from .features import FeatureSpec
from .losses import loss_by_kind
from .optim import xavier_uniform
from .rng import Rng

DEFAULT_LATENT = 128


# --- parameter containers ---------------------------------------------------


@dataclass
class ProcessorParams:
    """Shared message-passing weights; size-independent of the graph."""

    latent: int
    edge_state: bool
    params: dict[str, Tensor]
    trainable: bool = True

    @staticmethod
    def init(latent: int, edge_state: bool, rng: Rng) -> "ProcessorParams":
        h = latent
        z = 3 * h  # encoded inputs ‖ node latent ‖ graph channel
        shapes = {
            "msg_src": (z, h),
            "msg_dst": (z, h),
            "msg_edge": (h, h),
            "msg_w2": (h, h),
            "out_w": (z + h, h),
            "gate_w": (z + h, h),
        }
        if edge_state:
            shapes.update(
                {
                    "emsg_he": (h, h),
                    "eout_src": (z, h),
                    "eout_dst": (z, h),
                    "eout_edge": (h, h),
                    "eout_he": (h, h),
                    "egate_src": (z, h),
                    "egate_dst": (z, h),
                    "egate_edge": (h, h),
                    "egate_he": (h, h),
                }
            )
        params = {
            name: parameter(xavier_uniform(rng.split(f"proc.{name}"), *shape))
            for name, shape in shapes.items()
        }
        for name in ("msg_b1", "msg_b2", "out_b", "gate_b") + (
            ("eout_b", "egate_b") if edge_state else ()
        ):
            params[name] = parameter(np.zeros(h))
        return ProcessorParams(latent, edge_state, params)


# feature encoders are bias-free (zero features encode to zero); decoders
# carry biases. num_channels: how many stacked input channels feed the encoder.
def _encoder_channels(spec: FeatureSpec) -> int:
    if spec.kind == "categorical":
        return spec.num_categories
    if spec.kind == "pointer" and spec.location == "edge":
        return 3
    return 1


@dataclass
class AlgoHead:
    """Per-task encoder/decoder weights, keyed by feature name."""

    task_id: str
    latent: int
    edge_state: bool
    specs: dict[str, FeatureSpec]
    params: dict[str, Tensor] = field(default_factory=dict)

    @staticmethod
    def init(task_id: str, specs: dict[str, FeatureSpec], latent: int,
             edge_state: bool, rng: Rng) -> "AlgoHead":
        head = AlgoHead(task_id, latent, edge_state, dict(specs))
        h = latent
        for name, spec in specs.items():
            key = f"{task_id}.{name}"
            if spec.stage in ("input", "hint"):
                head.params[f"enc.{name}"] = parameter(
                    xavier_uniform(rng.split(f"enc.{key}"), _encoder_channels(spec), h)
                )
            if spec.stage in ("hint", "output"):
                # decoders read cat(encoded inputs, latent): hint-copy paths
                # stay learnable without squeezing through the gated update
                if spec.location == "node":
                    if spec.kind == "pointer":
                        dec = {"q": (2 * h, h), "k": (2 * h, h), "e": (h, 1)}
                        bias_dim = 1
                    else:
                        out = spec.num_categories if spec.kind == "categorical" else 1
                        dec = {"w": (2 * h, out)}
                        bias_dim = out
                elif spec.location == "edge":
                    width = h if spec.kind == "pointer" else 1
                    dec = {"src": (2 * h, width), "dst": (2 * h, width), "e": (h, width)}
                    bias_dim = width
                    if spec.kind == "pointer":
                        dec["key"] = (2 * h, h)
                else:
                    raise ValueError(f"no decoder for graph-located feature {name}")
                if edge_state and "e" in dec:
                    dec["he"] = (h, dec["e"][1])
                for part, shape in dec.items():
                    head.params[f"dec.{name}.{part}"] = parameter(
                        xavier_uniform(rng.split(f"dec.{key}.{part}"), *shape)
                    )
                head.params[f"dec.{name}.b"] = parameter(np.zeros(bias_dim))
        return head


@dataclass
class ModelState:
    """Recurrent latents; reset to zero at the start of every rollout."""

    h: Tensor
    h_edge: Tensor | None = None


@dataclass
class Model:
    latent: int
    edge_state: bool
    processors: list[ProcessorParams]
    heads: dict[str, AlgoHead]
    combine: str = "mean"

    def add_head(self, task_id: str, specs: dict[str, FeatureSpec], rng: Rng) -> AlgoHead:
        head = AlgoHead.init(task_id, specs, self.latent, self.edge_state, rng)
        self.heads[task_id] = head
        return head

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for i, proc in enumerate(self.processors):
            for name, p in proc.params.items():
                out[f"proc{i}.{name}"] = p
        for task_id, head in sorted(self.heads.items()):
            for name, p in head.params.items():
                out[f"head.{task_id}.{name}"] = p
        return out

    def trainable_params(self) -> dict[str, Tensor]:
        out = {}
        for i, proc in enumerate(self.processors):
            if proc.trainable:
                for name, p in proc.params.items():
                    out[f"proc{i}.{name}"] = p
        for task_id, head in sorted(self.heads.items()):
            for name, p in head.params.items():
                out[f"head.{task_id}.{name}"] = p
        return out

    def zero_grads(self) -> None:
        for p in self.named_params().values():
            p.zero_grad()

    def param_count(self) -> int:
        return sum(p.data.size for p in self.named_params().values())


def build_model(latent: int, rng: Rng, edge_state: bool = False,
                head_specs: dict[str, dict[str, FeatureSpec]] | None = None) -> Model:
    model = Model(latent, edge_state, [ProcessorParams.init(latent, edge_state, rng)], {})
    for task_id, specs in (head_specs or {}).items():
        model.add_head(task_id, specs, rng.split(f"head.{task_id}"))
    return model


# --- encoding ----------------------------------------------------------------


def _one_hot(indices: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(indices.shape + (n,))
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return out


def _edge_pointer_channels(pointers: np.ndarray, n: int) -> np.ndarray:
    """Size-invariant encoding of an (..., n, n) pointer matrix.

    Channels: pred equals the row node; pred equals the column node; and per
    (row, k) the fraction of columns whose pred is k (spread onto edge row->k).
    """
    rows = np.arange(n)[:, None]
    cols = np.arange(n)[None, :]
    c1 = (pointers == rows).astype(np.float64)
    c2 = (pointers == cols).astype(np.float64)
    mass = np.zeros(pointers.shape)
    np.add.at(
        mass.reshape(-1, n, n),
        (
            np.repeat(np.arange(mass.size // (n * n)), n * n),
            np.tile(np.repeat(np.arange(n), n), mass.size // (n * n)),
            pointers.reshape(-1, n * n).reshape(-1),
        ),
        1.0 / n,
    )
    return np.stack([c1, c2, mass], axis=-1)


def _encoder_input(spec: FeatureSpec, value: np.ndarray, n: int) -> tuple[str, np.ndarray]:
    """Map a raw feature value to (channel, array ready for its encoder)."""
    if spec.location == "node":
        if spec.kind == "pointer":
            return "edge", _one_hot(value, n)[..., None]
        if spec.kind == "categorical":
            return "node", value
        return "node", value[..., None]
    if spec.location == "edge":
        if spec.kind == "pointer":
            return "edge", _edge_pointer_channels(value, n)
        return "edge", value[..., None]
    if spec.kind == "scalar":
        return "graph", value[..., None]
    raise ValueError(f"unsupported graph feature kind {spec.kind}")


def encode_step(head: AlgoHead, features: dict[FeatureSpec, np.ndarray]
                ) -> tuple[Tensor, Tensor, Tensor | None]:
    """Sum per-feature linear encodings into node, edge and graph channels."""
    node_terms, edge_terms, graph_terms = [], [], []
    n = None
    for spec, value in features.items():
        if spec.name not in head.specs or f"enc.{spec.name}" not in head.params:
            raise KeyError(f"head {head.task_id} has no encoder for {spec.name}")
        if spec.location == "node":
            n = value.shape[-1] if spec.kind != "categorical" else value.shape[-2]
        elif spec.location == "edge":
            n = value.shape[-1]
    if n is None:
        raise ValueError("cannot infer node count: no node/edge features")
    for spec, value in features.items():
        channel, arr = _encoder_input(spec, np.asarray(value), n)
        enc = ad.linear(constant(arr), head.params[f"enc.{spec.name}"])
        (node_terms if channel == "node" else edge_terms if channel == "edge"
         else graph_terms).append(enc)

    batch_shape = None
    for terms, loc in ((node_terms, "node"), (edge_terms, "edge")):
        if terms:
            batch_shape = terms[0].shape[: -(2 if loc == "node" else 3)]
            break
    h = head.latent
    zeros_node = constant(np.zeros(batch_shape + (n, h)))
    zeros_edge = constant(np.zeros(batch_shape + (n, n, h)))
    u = ad.add_n(node_terms) if node_terms else zeros_node
    e = ad.add_n(edge_terms) if edge_terms else zeros_edge
    g_feat = ad.add_n(graph_terms) if graph_terms else None
    return u, e, g_feat


# --- the processor -----------------------------------------------------------


def init_state(model: Model, batch_shape: tuple[int, ...], n: int) -> ModelState:
    h = constant(np.zeros(batch_shape + (n, model.latent)))
    h_edge = constant(np.zeros(batch_shape + (n, n, model.latent))) if model.edge_state else None
    return ModelState(h, h_edge)


def _single_processor_step(proc: ProcessorParams, state: ModelState, z: Tensor,
                           e: Tensor, adj: np.ndarray) -> ModelState:
    p = proc.params
    pre = ad.add_n(
        [
            ad.expand_src(ad.linear(z, p["msg_src"])),
            ad.expand_dst(ad.linear(z, p["msg_dst"])),
            ad.linear(e, p["msg_edge"], p["msg_b1"]),
        ]
        + ([ad.linear(state.h_edge, p["emsg_he"])] if proc.edge_state else [])
    )
    messages = ad.linear(ad.relu(pre), p["msg_w2"], p["msg_b2"])
    m = ad.max_aggregate(messages, adj)

    zm = ad.concat([z, m], axis=-1)
    candidate = ad.linear(zm, p["out_w"], p["out_b"])
    gate = ad.sigmoid(ad.linear(zm, p["gate_w"], p["gate_b"]))
    h_new = _gated(gate, candidate, state.h)

    h_edge_new = None
    if proc.edge_state:
        def pair(prefix):
            return ad.add_n(
                [
                    ad.expand_src(ad.linear(z, p[f"{prefix}_src"])),
                    ad.expand_dst(ad.linear(z, p[f"{prefix}_dst"])),
                    ad.linear(e, p[f"{prefix}_edge"], p[f"{prefix}_b"]),
                    ad.linear(state.h_edge, p[f"{prefix}_he"]),
                ]
            )

        h_edge_new = _gated(ad.sigmoid(pair("egate")), pair("eout"), state.h_edge)
    return ModelState(h_new, h_edge_new)


def _gated(gate: Tensor, candidate: Tensor, previous: Tensor) -> Tensor:
    """g*candidate + (1-g)*previous; exact at both gate saturations, so a
    gate stuck at zero makes the latent a literal fixed point."""
    keep = ad.add_const(ad.scale(gate, -1.0), 1.0)
    return ad.add(ad.elementwise_mul(gate, candidate), ad.elementwise_mul(keep, previous))


def processor_step(model: Model, state: ModelState, u: Tensor, e: Tensor,
                   adj: np.ndarray | None = None, g_feat: Tensor | None = None) -> ModelState:
    """One message-passing update of the latent state.

    z concatenates encoded inputs, the previous latent, and a graph channel
    (encoded graph features plus the max over node latents). With several
    processors (two-processor transfer) their candidate states are combined
    elementwise by the mean.
    """
    n = state.h.shape[-2]
    batch_shape = state.h.shape[:-2]
    if adj is None:
        adj = np.broadcast_to(np.ones((n, n), dtype=bool), batch_shape + (n, n))

    # graph channel: pooled latents plus pooled current encodings, so global
    # comparisons over this step's inputs (e.g. an argmin) are visible within
    # the step, plus any encoded graph-located features
    ctx = ad.add(ad.reduce_max(state.h, axis=-2), ad.reduce_max(u, axis=-2))
    if g_feat is not None:
        ctx = ad.add(ctx, g_feat)
    z = ad.concat([u, state.h, ad.expand_to_nodes(ctx, n)], axis=-1)

    outs = [_single_processor_step(proc, state, z, e, adj) for proc in model.processors]
    if len(outs) == 1:
        return outs[0]
    if model.combine != "mean":
        raise ValueError(f"unknown combine {model.combine!r}")
    h = ad.scale(ad.add_n([o.h for o in outs]), 1.0 / len(outs))
    h_edge = None
    if model.edge_state:
        h_edge = ad.scale(ad.add_n([o.h_edge for o in outs]), 1.0 / len(outs))
    return ModelState(h, h_edge)


# --- decoding ------------------------------------------------------------------


def decode_feature(head: AlgoHead, name: str, state: ModelState, e: Tensor,
                   u: Tensor) -> Tensor:
    spec = head.specs[name]
    p = head.params
    h = ad.concat([u, state.h], axis=-1)
    n = h.shape[-2]

    def edge_ctx(out_key: str) -> Tensor:
        terms = [
            ad.expand_src(ad.linear(h, p[f"dec.{name}.src"])),
            ad.expand_dst(ad.linear(h, p[f"dec.{name}.dst"])),
            ad.linear(e, p[f"dec.{name}.e"], p[f"dec.{name}.b"]),
        ]
        if head.edge_state:
            terms.append(ad.linear(state.h_edge, p[f"dec.{name}.he"]))
        return ad.add_n(terms)

    if spec.location == "node":
        if spec.kind == "pointer":
            q = ad.linear(h, p[f"dec.{name}.q"])
            k = ad.linear(h, p[f"dec.{name}.k"])
            scores = ad.matmul(q, ad.transpose_pair(k))
            e_term = ad.linear(e, p[f"dec.{name}.e"], p[f"dec.{name}.b"])
            if head.edge_state:
                e_term = ad.add(e_term, ad.linear(state.h_edge, p[f"dec.{name}.he"]))
            return ad.add(scores, ad.squeeze_last(e_term))
        out = ad.linear(h, p[f"dec.{name}.w"], p[f"dec.{name}.b"])
        return out if spec.kind == "categorical" else ad.squeeze_last(out)

    if spec.kind == "pointer":
        ctx = edge_ctx(name)  # (..., n, n, latent)
        key = ad.linear(h, p[f"dec.{name}.key"])
        flat = ad.reshape(ctx, ctx.shape[:-3] + (n * n, head.latent))
        scores = ad.matmul(flat, ad.transpose_pair(key))
        return ad.reshape(scores, ctx.shape[:-3] + (n, n, n))
    return ad.squeeze_last(edge_ctx(name))


def decode_step(head: AlgoHead, state: ModelState, e: Tensor, stage: str,
                u: Tensor) -> dict[FeatureSpec, Tensor]:
    """Predictions (logits or raw scalars) for every feature of a stage."""
    if stage not in ("hint", "output"):
        raise ValueError("decode stage must be 'hint' or 'output'")
    return {
        spec: decode_feature(head, name, state, e, u)
        for name, spec in head.specs.items()
        if spec.stage == stage
    }


# --- rollout --------------------------------------------------------------------


def harden_prediction(spec: FeatureSpec, logits: np.ndarray) -> np.ndarray:
    """Turn decoder outputs into feedable hint values (argmax / threshold)."""
    if spec.kind == "pointer":
        return np.argmax(logits, axis=-1)
    if spec.kind in ("mask_one", "categorical"):
        out = np.zeros_like(logits)
        np.put_along_axis(out, np.argmax(logits, axis=-1)[..., None], 1.0, axis=-1)
        return out
    if spec.kind == "mask":
        return (logits > 0.0).astype(np.float64)
    return logits


@dataclass
class RolloutResult:
    loss: Tensor
    hint_loss: Tensor | None
    output_loss: Tensor
    output_preds: dict[FeatureSpec, np.ndarray]
    hint_preds: list[dict[FeatureSpec, np.ndarray]]


def rollout(model: Model, algo_id: str, inputs: dict[FeatureSpec, np.ndarray],
            hints: dict[FeatureSpec, np.ndarray], outputs: dict[FeatureSpec, np.ndarray],
            T: int, mode: str = "train") -> RolloutResult:
    """Run T processor steps with hint supervision.

    Step t consumes the hints of step t-1: ground truth when training
    (teacher forcing), its own hardened predictions when evaluating. Hint
    losses target the state at step min(t, T-1) (the final state is a fixed
    point) and are averaged over steps; the output loss is added at step T.
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be train or eval")
    head = model.heads[algo_id]
    hint_specs = sorted((s for s in hints), key=lambda s: s.name)
    pos_spec = head.specs["pos"]  # node-located 'pos' is always present
    n = inputs[pos_spec].shape[-1]
    batch_shape = inputs[pos_spec].shape[:-1]

    state = init_state(model, batch_shape, n)
    feed = {spec: _time_slice(spec, hints[spec], 0) for spec in hint_specs}

    step_losses: list[Tensor] = []
    hint_preds: list[dict[FeatureSpec, np.ndarray]] = []
    output_preds: dict[FeatureSpec, np.ndarray] = {}
    output_loss: Tensor | None = None

    for t in range(1, T + 1):
        u, e, g_feat = encode_step(head, {**inputs, **feed})
        state = processor_step(model, state, u, e, None, g_feat)

        target_t = min(t, T - 1)
        preds = decode_step(head, state, e, "hint", u)
        if preds:
            terms = [
                loss_by_kind(spec.kind, preds[spec], _time_slice(spec, hints[spec], target_t))
                for spec in hint_specs
            ]
            step_losses.append(ad.add_n(terms) if len(terms) > 1 else terms[0])
        hint_preds.append({spec: pred.data.copy() for spec, pred in preds.items()})

        if t < T:
            if mode == "train":
                feed = {spec: _time_slice(spec, hints[spec], t) for spec in hint_specs}
            else:
                feed = {spec: harden_prediction(spec, preds[spec].data) for spec in hint_specs}
        else:
            out_preds = decode_step(head, state, e, "output", u)
            terms = []
            for spec in sorted(outputs, key=lambda s: s.name):
                terms.append(loss_by_kind(spec.kind, out_preds[spec], outputs[spec]))
                output_preds[spec] = out_preds[spec].data.copy()
            output_loss = ad.add_n(terms) if len(terms) > 1 else terms[0]

    hint_loss = None
    total = output_loss
    if step_losses:
        hint_loss = ad.scale(ad.add_n(step_losses) if len(step_losses) > 1 else step_losses[0],
                             1.0 / len(step_losses))
        total = ad.add(hint_loss, output_loss)
    return RolloutResult(total, hint_loss, output_loss, output_preds, hint_preds)


def feature_rank(spec: FeatureSpec) -> int:
    """Number of trailing axes one snapshot of this feature occupies."""
    if spec.location == "edge":
        return 2
    if spec.location == "node":
        return 2 if spec.kind == "categorical" else 1
    return 0 if spec.kind == "scalar" else 1


def _time_slice(spec: FeatureSpec, hint_array: np.ndarray, t: int) -> np.ndarray:
    """Select time step t; hints are laid out (batch..., T, feature...)."""
    axis = hint_array.ndim - 1 - feature_rank(spec)
    return np.take(hint_array, t, axis=axis)


def co_forward(model: Model, task_id: str, inputs: dict[FeatureSpec, np.ndarray],
               steps: int) -> dict[FeatureSpec, Tensor]:
    """Hint-free rollout: encode once, run ``steps`` processor updates,
    decode outputs at the end. steps=0 decodes straight from zero latents."""
    head = model.heads[task_id]
    pos_spec = head.specs["pos"]
    n = inputs[pos_spec].shape[-1]
    batch_shape = inputs[pos_spec].shape[:-1]
    u, e, g_feat = encode_step(head, inputs)
    state = init_state(model, batch_shape, n)
    for _ in range(steps):
        state = processor_step(model, state, u, e, None, g_feat)
    return decode_step(head, state, e, "output", u)


def eval_accuracy(predictions: dict[FeatureSpec, np.ndarray],
                  targets: dict[FeatureSpec, np.ndarray]) -> dict[str, float]:
    """Per-feature accuracy: argmax match for pointer/mask_one/categorical,
    element match for masks, |error| < 1e-3 * target range for scalars."""
    out = {}
    for spec, target in targets.items():
        pred = predictions[spec]
        if spec.kind == "pointer":
            out[spec.name] = float(np.mean(np.argmax(pred, axis=-1) == target))
        elif spec.kind in ("mask_one", "categorical"):
            out[spec.name] = float(np.mean(np.argmax(pred, axis=-1) == np.argmax(target, axis=-1)))
        elif spec.kind == "mask":
            out[spec.name] = float(np.mean((pred > 0.0) == (target > 0.5)))
        else:
            span = float(target.max() - target.min()) or 1.0
            out[spec.name] = float(np.mean(np.abs(pred - target) < 1e-3 * span))
    return out
