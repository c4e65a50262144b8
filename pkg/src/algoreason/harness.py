"""Experiment pipeline: dataset generation, training, evaluation, baselines.

Every command is a pure function of (config, seed): datasets are generated
from the config seed, model runs from the per-run seed, and all file output
goes through the fixed-format JSON/CSV writers, so reruns are byte-identical.

File layout under ``out_dir``:

- data/<name>.jsonl          instances or trajectories with ground truth
- checkpoints/<run>.json     model parameters (self-describing)
- metrics/<run>.json         per-epoch logs
- results.csv / results.json aggregated relative-error tables
"""

import csv
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import ALGO_PRESETS, algo_feature_specs, sample_trajectory
from .checkpoint import load_checkpoint, save_checkpoint
from .co_tasks import (
    CenterSet,
    Tour,
    TspInstance,
    VkcInstance,
    beam_search_tour,
    co_feature_specs,
    relative_error,
    topk_centers,
    tour_cost,
    tsp_instance_from_json,
    tsp_instance_to_json,
    vkc_instance_from_json,
    vkc_instance_to_json,
    vkc_objective,
)
from .features import load_trajectories, save_trajectories
from .graphs import gen_er_connected, gen_euclidean_complete
from .model import Model, build_model
from .optim import AdamState
from .rng import Rng
from .serialize import dumps, format_float
from .solvers import (
    SizeLimitError,
    beam_weight_tour,
    christofides,
    gon_farthest_first,
    greedy_nn_tour,
    held_karp,
    vkc_exact,
)
from .training import co_bucket_batches, co_predict, co_train_step, evaluate_outputs
from .transfer import TransferConfig, apply_transfer, mtl_cycle, pretrain

TSP_ORACLE_LIMIT = 24  # held_karp memory bound this harness is willing to pay
VKC_ORACLE_LIMIT = 20  # beyond this, exact k-center requires k <= 3


@dataclass
class ExperimentConfig:
    task: str = "pretrain"  # pretrain | tsp | vkc
    algorithms: list[str] = field(default_factory=lambda: ["bellman_ford", "mst_prim"])
    train_sizes: list[int] = field(default_factory=lambda: [8, 9, 10, 11, 12])
    samples_per_size: int = 400
    val_size: int = 12
    val_count: int = 100
    test_sizes: list[int] = field(default_factory=lambda: [16, 24])
    test_counts: list[int] = field(default_factory=lambda: [40, 20])
    epochs: int = 100
    batch_size: int = 64
    lr: float = 3e-4
    latent: int = 128
    edge_state: bool = False
    transfer: str = "none"
    pretrained: str | None = None
    beam_widths: list[int] = field(default_factory=lambda: [128, 1280])
    val_beam_width: int = 8
    k: int = 5
    graph_dist: str | None = None  # euclidean | er; default depends on task
    er_p: float = 0.5
    co_steps: int | None = None  # processor iterations at inference; None -> n
    target_accuracy: float | None = None  # pretrain early stop
    curve_sizes: list[int] = field(default_factory=list)
    seed: int = 0
    out_dir: str = "runs/default"

    def __post_init__(self):
        if self.task not in ("pretrain", "tsp", "vkc"):
            raise ValueError(f"unknown task {self.task!r}")
        if len(self.test_sizes) != len(self.test_counts):
            raise ValueError("test_sizes and test_counts must align")
        for name in ("samples_per_size", "val_count", "epochs", "batch_size", "latent"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.task == "vkc" and self.k < 1:
            raise ValueError("k must be positive")

    @property
    def dist(self) -> str:
        if self.graph_dist is not None:
            return self.graph_dist
        return "er" if self.task == "vkc" else "euclidean"


def resolve_algorithms(names: list[str]) -> list[str]:
    """Expand preset names (tsp_base, mtab, fmitb) into algorithm lists."""
    out: list[str] = []
    for name in names:
        out.extend(ALGO_PRESETS.get(name, (name,)))
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    from .serialize import loads

    data = {}
    if path is not None:
        with open(path) as f:
            data = loads(f.read())
    data.update(overrides or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**data)
    cfg.algorithms = resolve_algorithms(cfg.algorithms)
    return cfg


def _dirs(cfg: ExperimentConfig) -> dict[str, Path]:
    base = Path(cfg.out_dir)
    dirs = {"base": base, "data": base / "data", "checkpoints": base / "checkpoints",
            "metrics": base / "metrics"}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs


# --- dataset generation ------------------------------------------------------


def make_tsp_instance(n: int, rng: Rng, with_target: bool = True) -> TspInstance:
    if with_target and n > TSP_ORACLE_LIMIT:
        raise SizeLimitError(f"no exact tour ground truth beyond n={TSP_ORACLE_LIMIT}")
    g = gen_euclidean_complete(n, rng)
    start = int(rng.integers(n))
    if not with_target:
        return TspInstance(g, start)
    cost, tour = held_karp(g, size_guard=TSP_ORACLE_LIMIT)
    order = canonical_tour_from(tour, start)
    return TspInstance(g, start, cost, Tour(order))


def canonical_tour_from(tour: Tour, start: int) -> np.ndarray:
    """Rotate to ``start`` and orient toward the smaller-indexed neighbour."""
    order = list(tour.order)
    i = order.index(start)
    order = order[i:] + order[:i]
    if order[-1] < order[1]:
        order = [order[0]] + order[1:][::-1]
    return np.array(order)


def make_vkc_instance(n: int, k: int, rng: Rng, er_p: float = 0.5,
                      with_target: bool = True) -> VkcInstance:
    if with_target and n > VKC_ORACLE_LIMIT and k > 3:
        raise SizeLimitError(f"no exact k-center ground truth for n={n}, k={k}")
    g = gen_er_connected(n, er_p, rng)
    if not with_target:
        return VkcInstance(g, k)
    opt, centers = vkc_exact(g, k, max_n=VKC_ORACLE_LIMIT)
    return VkcInstance(g, k, opt, centers)


def cmd_gen_data(cfg: ExperimentConfig) -> list[Path]:
    """Write train/val/test datasets with ground truth attached."""
    dirs = _dirs(cfg)
    rng = Rng(cfg.seed).split("data")
    written = []

    def emit(path: Path, lines: list[str]):
        with open(path, "w") as f:
            f.writelines(line + "\n" for line in lines)
        written.append(path)

    if cfg.task == "pretrain":
        for algo in cfg.algorithms:
            a_rng = rng.split(algo)
            train = [
                sample_trajectory(algo, n, a_rng, cfg.dist, cfg.er_p)
                for n in cfg.train_sizes
                for _ in range(cfg.samples_per_size)
            ]
            save_trajectories(dirs["data"] / f"{algo}.train.jsonl", train)
            written.append(dirs["data"] / f"{algo}.train.jsonl")
            val_rng = rng.split(f"{algo}.val")
            val = [sample_trajectory(algo, cfg.val_size, val_rng, cfg.dist, cfg.er_p)
                   for _ in range(cfg.val_count)]
            save_trajectories(dirs["data"] / f"{algo}.val.jsonl", val)
            written.append(dirs["data"] / f"{algo}.val.jsonl")
            for size, count in zip(cfg.test_sizes, cfg.test_counts):
                t_rng = rng.split(f"{algo}.test{size}")
                test = [sample_trajectory(algo, size, t_rng, cfg.dist, cfg.er_p)
                        for _ in range(count)]
                save_trajectories(dirs["data"] / f"{algo}.test{size}.jsonl", test)
                written.append(dirs["data"] / f"{algo}.test{size}.jsonl")
        return written

    if cfg.task == "tsp":
        make, to_json = make_tsp_instance, tsp_instance_to_json
    else:
        def make(n, r, with_target=True):
            return make_vkc_instance(n, cfg.k, r, cfg.er_p, with_target)
        to_json = vkc_instance_to_json

    train_rng = rng.split("train")
    train = [make(n, train_rng) for n in cfg.train_sizes for _ in range(cfg.samples_per_size)]
    emit(dirs["data"] / f"{cfg.task}.train.jsonl", [to_json(i) for i in train])
    val_rng = rng.split("val")
    val = [make(cfg.val_size, val_rng) for _ in range(cfg.val_count)]
    emit(dirs["data"] / f"{cfg.task}.val.jsonl", [to_json(i) for i in val])
    for size, count in zip(cfg.test_sizes, cfg.test_counts):
        t_rng = rng.split(f"test{size}")
        test = [make(size, t_rng) for _ in range(count)]
        emit(dirs["data"] / f"{cfg.task}.test{size}.jsonl", [to_json(i) for i in test])
    return written


def load_instances(cfg: ExperimentConfig, split: str) -> list:
    path = Path(cfg.out_dir) / "data" / f"{cfg.task}.{split}.jsonl"
    parse = tsp_instance_from_json if cfg.task == "tsp" else vkc_instance_from_json
    with open(path) as f:
        return [parse(line) for line in f if line.strip()]


# --- pretraining --------------------------------------------------------------


def pretrain_checkpoint_path(cfg: ExperimentConfig, seed: int) -> Path:
    return _dirs(cfg)["checkpoints"] / f"pretrain_seed{seed}.json"


def cmd_pretrain(cfg: ExperimentConfig, seed: int | None = None) -> dict:
    """Train the shared processor on the configured algorithms."""
    dirs = _dirs(cfg)
    seed = cfg.seed if seed is None else seed
    data_dir = dirs["data"]
    train = {a: load_trajectories(data_dir / f"{a}.train.jsonl") for a in cfg.algorithms}
    val = {a: load_trajectories(data_dir / f"{a}.val.jsonl") for a in cfg.algorithms}

    ck_path = pretrain_checkpoint_path(cfg, seed)
    entries = []
    result = pretrain(
        cfg.algorithms, train, val, Rng(seed).split("pretrain"),
        epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr, latent=cfg.latent,
        edge_state=cfg.edge_state, checkpoint_path=ck_path,
        target_accuracy=cfg.target_accuracy, log=entries.append,
    )
    metrics = {
        "seed": seed,
        "epochs": entries,
        "best_epoch": result.best_epoch,
        "best_score": result.best_score,
    }
    if cfg.curve_sizes:
        metrics["curve"] = pretrain_size_curve(cfg, result.model)
    path = dirs["metrics"] / f"pretrain_seed{seed}.json"
    with open(path, "w") as f:
        f.write(dumps(metrics) + "\n")
    return metrics


def pretrain_size_curve(cfg: ExperimentConfig, model: Model) -> list[dict]:
    """Validation-style accuracy of each algorithm across instance sizes."""
    rows = []
    for size in cfg.curve_sizes:
        for algo in cfg.algorithms:
            rng = Rng(cfg.seed).split(f"curve.{algo}.{size}")
            trajs = [sample_trajectory(algo, size, rng, cfg.dist, cfg.er_p)
                     for _ in range(cfg.val_count)]
            scores = evaluate_outputs(model, trajs, cfg.batch_size)
            rows.append({"algorithm": algo, "size": size,
                         "accuracy": float(np.mean(list(scores.values())))})
    return rows


# --- task training ---------------------------------------------------------------


def model_label(cfg: ExperimentConfig) -> str:
    suffix = "" if cfg.transfer == "none" else f"_{cfg.transfer}"
    if cfg.edge_state:
        suffix += "_ueh"
    return f"mpnn{suffix}"


def task_checkpoint_path(cfg: ExperimentConfig, seed: int) -> Path:
    return _dirs(cfg)["checkpoints"] / f"{cfg.task}_{model_label(cfg)}_seed{seed}.json"


def decode_solutions(cfg: ExperimentConfig, model: Model, instances: list,
                     width: int) -> list:
    logits = co_predict(model, cfg.task, instances, cfg.batch_size, cfg.co_steps)
    if cfg.task == "tsp":
        return [beam_search_tour(lg, inst.start, width)
                for lg, inst in zip(logits, instances)]
    return [topk_centers(1.0 / (1.0 + np.exp(-lg)), inst.k)
            for lg, inst in zip(logits, instances)]


def solution_rel_errors(cfg: ExperimentConfig, instances: list, solutions: list) -> np.ndarray:
    errs = []
    for inst, sol in zip(instances, solutions):
        if cfg.task == "tsp":
            errs.append(relative_error(tour_cost(inst.graph, sol), inst.opt_cost))
        else:
            obj = vkc_objective(inst.graph, sol, inst.distances())
            errs.append(relative_error(obj, inst.opt_objective) if inst.opt_objective > 0
                        else float(obj > 0.0))
    return np.array(errs)


def val_relative_error(cfg: ExperimentConfig, model: Model, val_instances: list) -> float:
    sols = decode_solutions(cfg, model, val_instances, cfg.val_beam_width)
    return float(np.mean(solution_rel_errors(cfg, val_instances, sols)))


def cmd_train(cfg: ExperimentConfig, seed: int | None = None) -> dict:
    """Train the task model under the configured transfer mode."""
    if cfg.task == "pretrain":
        raise ValueError("use cmd_pretrain for the pretrain task")
    dirs = _dirs(cfg)
    seed = cfg.seed if seed is None else seed
    rng = Rng(seed).split(f"{cfg.task}.{cfg.transfer}")
    train = load_instances(cfg, "train")
    val = load_instances(cfg, "val")

    pretrained = cfg.pretrained
    if pretrained is None and cfg.transfer in ("pf", "pft", "2proc"):
        pretrained = str(pretrain_checkpoint_path(cfg, seed))
    tc = TransferConfig(cfg.transfer, pretrained, tuple(cfg.algorithms))

    head_specs = {cfg.task: co_feature_specs(cfg.task)}
    if cfg.transfer == "mtl":
        head_specs.update({a: algo_feature_specs(a) for a in cfg.algorithms})
    model = build_model(cfg.latent, rng.split("init"), cfg.edge_state, head_specs)
    model = apply_transfer(tc, model, rng)

    traj_train = {}
    if cfg.transfer == "mtl":
        data_dir = dirs["data"]
        traj_train = {a: load_trajectories(data_dir / f"{a}.train.jsonl")
                      for a in cfg.algorithms}

    opt = AdamState(lr=cfg.lr)
    ck_path = task_checkpoint_path(cfg, seed)
    history, best = [], (np.inf, -1)
    from .training import bucket_batches as traj_buckets

    for epoch in range(cfg.epochs):
        e_rng = rng.split(f"epoch{epoch}")
        co_batches = co_bucket_batches(cfg.task, train, cfg.batch_size, e_rng.split("co"))
        if cfg.transfer == "mtl":
            per_algo = {a: traj_buckets(traj_train[a], cfg.batch_size, e_rng.split(a))
                        for a in cfg.algorithms}
            cycles = max([len(co_batches)] + [len(b) for b in per_algo.values()])
            loss_sum, count = 0.0, 0
            for idx in range(cycles):
                batches = [per_algo[a][idx] for a in cfg.algorithms if idx < len(per_algo[a])]
                co_batch = co_batches[idx] if idx < len(co_batches) else None
                losses = mtl_cycle(model, batches, co_batch, opt, cfg.co_steps)
                if cfg.task in losses:
                    loss_sum += losses[cfg.task]
                    count += 1
        else:
            loss_sum, count = 0.0, 0
            for batch in co_batches:
                loss_sum += co_train_step(model, batch, opt, cfg.co_steps)
                count += 1
        val_err = val_relative_error(cfg, model, val)
        entry = {"epoch": epoch, "train_loss": loss_sum / max(count, 1),
                 "val_rel_err": val_err}
        history.append(entry)
        if val_err < best[0]:
            best = (val_err, epoch)
            save_checkpoint(model, ck_path, opt,
                            extra={"task": cfg.task, "transfer": cfg.transfer,
                                   "seed": seed, "best_epoch": epoch,
                                   "val_rel_err": val_err})

    metrics = {"seed": seed, "transfer": cfg.transfer, "epochs": history,
               "best_epoch": best[1], "best_val_rel_err": best[0]}
    with open(dirs["metrics"] / f"{cfg.task}_{model_label(cfg)}_seed{seed}.json", "w") as f:
        f.write(dumps(metrics) + "\n")
    return metrics


# --- evaluation -------------------------------------------------------------------


@dataclass
class ResultRow:
    model: str
    size: int
    width: int | None
    mean_rel_err: float
    std: float | None
    seeds: int
    per_seed: dict[str, float] = field(default_factory=dict)

    def as_obj(self) -> dict:
        return {
            "model": self.model,
            "size": self.size,
            "width": self.width,
            "mean_rel_err": self.mean_rel_err,
            "std": self.std,
            "seeds": self.seeds,
            "per_seed": self.per_seed,
        }


def aggregate_row(model: str, size: int, width: int | None,
                  per_seed_means: dict[int, float]) -> ResultRow:
    values = [per_seed_means[s] for s in sorted(per_seed_means)]
    std = float(np.std(values, ddof=1)) if len(values) >= 2 else None
    return ResultRow(model, size, width, float(np.mean(values)), std, len(values),
                     {str(s): float(v) for s, v in sorted(per_seed_means.items())})


def write_results(cfg: ExperimentConfig, rows: list[ResultRow], stem: str = "results"
                  ) -> tuple[Path, Path]:
    rows = sorted(rows, key=lambda r: (r.size, r.model, r.width if r.width else 0))
    base = _dirs(cfg)["base"]
    csv_path = base / f"{stem}.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "size", "width", "mean_rel_err", "std", "seeds"])
    for r in rows:
        writer.writerow([
            r.model, r.size, "" if r.width is None else r.width,
            format_float(r.mean_rel_err), "" if r.std is None else format_float(r.std),
            r.seeds,
        ])
    csv_path.write_text(buf.getvalue())
    json_path = base / f"{stem}.json"
    json_path.write_text(dumps([r.as_obj() for r in rows]) + "\n")
    return csv_path, json_path


def cmd_eval(cfg: ExperimentConfig, seeds: list[int], widths: list[int] | None = None,
             include_oracle: bool = False, stem: str = "results") -> list[ResultRow]:
    """Decode trained models on every test size and aggregate across seeds."""
    widths = cfg.beam_widths if widths is None else widths
    if cfg.task == "vkc":
        widths = [None]
    label = model_label(cfg)
    rows = []
    test_sets = {size: load_instances(cfg, f"test{size}") for size in cfg.test_sizes}
    models = {seed: load_checkpoint(task_checkpoint_path(cfg, seed)) for seed in seeds}
    for size, instances in test_sets.items():
        for width in widths:
            per_seed = {}
            for seed, model in models.items():
                sols = decode_solutions(cfg, model, instances,
                                        width if width else cfg.val_beam_width)
                per_seed[seed] = float(np.mean(solution_rel_errors(cfg, instances, sols)))
            rows.append(aggregate_row(label, size, width, per_seed))
        if include_oracle:
            opt_sols = [inst.opt_tour if cfg.task == "tsp" else inst.opt_centers
                        for inst in instances]
            errs = solution_rel_errors(cfg, instances, opt_sols)
            rows.append(aggregate_row("oracle", size, None, {0: float(np.mean(errs))}))
    write_results(cfg, rows, stem)
    return rows


def cmd_baselines(cfg: ExperimentConfig, stem: str = "baselines") -> list[ResultRow]:
    """Deterministic heuristics over the test sets, same report format."""
    rows = []
    rng = Rng(cfg.seed).split("baselines")
    for size in cfg.test_sizes:
        instances = load_instances(cfg, f"test{size}")
        if cfg.task == "tsp":
            per = {"greedy": [], "beam_w1280": [], "christofides": []}
            for inst in instances:
                per["greedy"].append(greedy_nn_tour(inst.graph, inst.start))
                per["beam_w1280"].append(beam_weight_tour(inst.graph, inst.start, 1280))
                per["christofides"].append(christofides(inst.graph).tour)
            for name, sols in per.items():
                errs = solution_rel_errors(cfg, instances, sols)
                width = 1280 if name == "beam_w1280" else None
                rows.append(aggregate_row(name, size, width,
                                          {cfg.seed: float(np.mean(errs))}))
        else:
            sols = []
            for i, inst in enumerate(instances):
                first = int(rng.split(f"gon.{size}.{i}").integers(inst.graph.n))
                sols.append(gon_farthest_first(inst.graph, inst.k, first, inst.distances()))
            errs = solution_rel_errors(cfg, instances, sols)
            rows.append(aggregate_row("farthest_first", size, None,
                                      {cfg.seed: float(np.mean(errs))}))
    write_results(cfg, rows, stem)
    return rows
