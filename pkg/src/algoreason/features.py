"""Typed feature taxonomy for algorithm execution trajectories.

Every quantity an algorithm touches is a feature with a stage (input, hint,
output), a location (node, edge, graph) and a kind (scalar, categorical,
mask, mask_one, pointer). A trajectory bundles the inputs, the timed hint
snapshots, and the outputs of one execution.

Array shapes by location/kind (n = node count, hints gain a leading T axis):

=========  =========  ==========================================
location   kind       shape / content
=========  =========  ==========================================
node       scalar     (n,) float
node       mask       (n,) in {0, 1}
node       mask_one   (n,) one-hot
node       pointer    (n,) int node index
node       categorical(n, C) one-hot rows
edge       scalar     (n, n) float
edge       mask       (n, n) in {0, 1}
edge       pointer    (n, n) int node index
graph      scalar     () float
graph      mask_one   (n,) one-hot over nodes
=========  =========  ==========================================
"""

from dataclasses import dataclass

import numpy as np

from .serialize import dumps, loads

STAGES = ("input", "hint", "output")
LOCATIONS = ("node", "edge", "graph")
KINDS = ("scalar", "categorical", "mask", "mask_one", "pointer")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    stage: str
    location: str
    kind: str
    num_categories: int | None = None

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"bad stage {self.stage!r}")
        if self.location not in LOCATIONS:
            raise ValueError(f"bad location {self.location!r}")
        if self.kind not in KINDS:
            raise ValueError(f"bad kind {self.kind!r}")
        if self.kind == "categorical":
            if self.num_categories is None or self.num_categories < 2:
                raise ValueError("categorical features need num_categories >= 2")
        elif self.num_categories is not None:
            raise ValueError("num_categories only applies to categorical features")

    def base_shape(self, n: int) -> tuple[int, ...]:
        """Shape of one snapshot of this feature on an n-node instance."""
        if self.location == "node":
            return (n, self.num_categories) if self.kind == "categorical" else (n,)
        if self.location == "edge":
            return (n, n)
        if self.kind == "scalar":
            return ()
        return (n,)


@dataclass
class Trajectory:
    """One recorded execution: inputs, T hint snapshots, outputs.

    Hint snapshot 0 is the algorithm's initialized state and snapshot T-1 its
    final state, so outputs that are "the final value of a hint" literally
    equal the last snapshot.
    """

    algo_id: str
    n: int
    T: int
    inputs: dict[FeatureSpec, np.ndarray]
    hints: dict[FeatureSpec, np.ndarray]
    outputs: dict[FeatureSpec, np.ndarray]

    def get(self, name: str) -> np.ndarray:
        for group in (self.inputs, self.hints, self.outputs):
            for spec, value in group.items():
                if spec.name == name:
                    return value
        raise KeyError(name)

    def spec_named(self, name: str) -> FeatureSpec:
        for group in (self.inputs, self.hints, self.outputs):
            for spec in group:
                if spec.name == name:
                    return spec
        raise KeyError(name)

    def hint_at(self, t: int) -> dict[FeatureSpec, np.ndarray]:
        return {spec: value[t] for spec, value in self.hints.items()}


def _check_values(spec: FeatureSpec, arr: np.ndarray, n: int) -> None:
    if spec.kind == "pointer":
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{spec.name}: pointers must be integer arrays")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(f"{spec.name}: pointer out of range")
    elif spec.kind == "mask":
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise ValueError(f"{spec.name}: mask values must be 0/1")
    elif spec.kind == "mask_one":
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise ValueError(f"{spec.name}: mask_one values must be 0/1")
        sums = arr.sum(axis=-1)
        if not np.all(sums == 1.0):
            raise ValueError(f"{spec.name}: mask_one slices must sum to exactly 1")
    elif spec.kind == "categorical":
        sums = arr.sum(axis=-1)
        if not np.all(sums == 1.0):
            raise ValueError(f"{spec.name}: categorical rows must be one-hot")
    else:
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{spec.name}: scalar features must be finite")


def validate_trajectory(traj: Trajectory) -> None:
    """Raise ValueError on any shape or kind-constraint violation."""
    if traj.T < 1:
        raise ValueError("trajectory needs at least one hint step")
    for stage, group in (("input", traj.inputs), ("hint", traj.hints), ("output", traj.outputs)):
        for spec, arr in group.items():
            if spec.stage != stage:
                raise ValueError(f"{spec.name}: stage {spec.stage} stored under {stage}")
            expected = spec.base_shape(traj.n)
            if stage == "hint":
                expected = (traj.T,) + expected
            if arr.shape != expected:
                raise ValueError(f"{spec.name}: shape {arr.shape}, expected {expected}")
            _check_values(spec, arr, traj.n)


def trajectory_to_json(traj: Trajectory) -> str:
    features = []
    for group in (traj.inputs, traj.hints, traj.outputs):
        for spec, arr in group.items():
            features.append(
                {
                    "name": spec.name,
                    "stage": spec.stage,
                    "location": spec.location,
                    "kind": spec.kind,
                    "data": arr.tolist(),
                }
            )
    return dumps({"algo_id": traj.algo_id, "n": traj.n, "T": traj.T, "features": features})


def trajectory_from_json(line: str) -> Trajectory:
    obj = loads(line)
    groups: dict[str, dict[FeatureSpec, np.ndarray]] = {"input": {}, "hint": {}, "output": {}}
    for feat in obj["features"]:
        spec = FeatureSpec(feat["name"], feat["stage"], feat["location"], feat["kind"])
        dtype = np.int64 if spec.kind == "pointer" else np.float64
        groups[spec.stage][spec] = np.asarray(feat["data"], dtype=dtype)
    traj = Trajectory(
        obj["algo_id"], obj["n"], obj["T"], groups["input"], groups["hint"], groups["output"]
    )
    validate_trajectory(traj)
    return traj


def save_trajectories(path, trajectories) -> None:
    with open(path, "w") as f:
        for traj in trajectories:
            f.write(trajectory_to_json(traj) + "\n")


def load_trajectories(path) -> list[Trajectory]:
    with open(path) as f:
        return [trajectory_from_json(line) for line in f if line.strip()]
