"""Model checkpoints: a JSON manifest of parameter shapes plus flat arrays.

Floats are printed with 17 significant digits, so save -> load -> save
reproduces the file byte for byte and parameters bit for bit. The manifest
also records each head's feature specs and the processor configuration, so
a checkpoint is self-describing.
"""

import numpy as np

from .features import FeatureSpec
from .model import AlgoHead, Model, ProcessorParams
from .optim import AdamState
from .rng import Rng
from .serialize import dumps, loads


def _spec_obj(spec: FeatureSpec) -> dict:
    obj = {"name": spec.name, "stage": spec.stage, "location": spec.location, "kind": spec.kind}
    if spec.num_categories is not None:
        obj["num_categories"] = spec.num_categories
    return obj


def save_checkpoint(model: Model, path, optimizer: AdamState | None = None,
                    extra: dict | None = None) -> None:
    params = model.named_params()
    obj = {
        "meta": {
            "latent": model.latent,
            "edge_state": model.edge_state,
            "combine": model.combine,
            "processors": [{"trainable": p.trainable} for p in model.processors],
            "heads": {
                task_id: [_spec_obj(s) for _, s in sorted(head.specs.items())]
                for task_id, head in sorted(model.heads.items())
            },
            "optimizer": None
            if optimizer is None
            else {
                "lr": optimizer.lr,
                "beta1": optimizer.beta1,
                "beta2": optimizer.beta2,
                "eps": optimizer.eps,
            },
            "extra": extra or {},
        },
        "manifest": {name: list(p.data.shape) for name, p in sorted(params.items())},
        "data": {name: [float(v) for v in p.data.reshape(-1)]
                 for name, p in sorted(params.items())},
    }
    with open(path, "w") as f:
        f.write(dumps(obj) + "\n")


def load_checkpoint(path) -> Model:
    with open(path) as f:
        obj = loads(f.read())
    meta = obj["meta"]
    latent, edge_state = meta["latent"], meta["edge_state"]
    rng = Rng(0)  # placeholder weights, overwritten below
    processors = []
    for proc_meta in meta["processors"]:
        proc = ProcessorParams.init(latent, edge_state, rng)
        proc.trainable = bool(proc_meta["trainable"])
        processors.append(proc)
    model = Model(latent, edge_state, processors, {}, combine=meta.get("combine", "mean"))
    for task_id, spec_objs in meta["heads"].items():
        specs = {
            s["name"]: FeatureSpec(s["name"], s["stage"], s["location"], s["kind"],
                                   s.get("num_categories"))
            for s in spec_objs
        }
        model.heads[task_id] = AlgoHead.init(task_id, specs, latent, edge_state, rng)

    params = model.named_params()
    if set(params) != set(obj["manifest"]):
        missing = set(obj["manifest"]) ^ set(params)
        raise ValueError(f"checkpoint parameter names do not match model: {sorted(missing)[:5]}")
    for name, p in params.items():
        shape = tuple(obj["manifest"][name])
        if shape != p.data.shape:
            raise ValueError(f"{name}: checkpoint shape {shape} vs model {p.data.shape}")
        p.data = np.asarray(obj["data"][name], dtype=np.float64).reshape(shape)
        p.grad = np.zeros_like(p.data)
    return model


def checkpoint_meta(path) -> dict:
    with open(path) as f:
        return loads(f.read())["meta"]
