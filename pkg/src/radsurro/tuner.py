"""Seeded random hyperparameter search with median pruning and a
crash-resumable JSON-lines trial ledger.

Search bounds follow the surrogate study protocol: MLP layers [1,3] with
nodes [1000,10000]; CNN dense layers [1,3] with nodes [20,1000], conv
layers [1,3], filters [3,27], filter and pooling sizes [1,6], all
integer-uniform.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .nn import NetworkSpec, TrainConfig, build_cnn, build_mlp, train


class StudyError(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSpace:
    kind: str  # "mlp" | "cnn"
    layers: tuple[int, int] = (1, 3)
    mlp_nodes: tuple[int, int] = (1000, 10000)
    cnn_nodes: tuple[int, int] = (20, 1000)
    conv_layers: tuple[int, int] = (1, 3)
    filters: tuple[int, int] = (3, 27)
    filter_size: tuple[int, int] = (1, 6)
    pool_size: tuple[int, int] = (1, 6)

    def __post_init__(self):
        if self.kind not in ("mlp", "cnn"):
            raise ValueError(f"unknown network kind {self.kind!r}")


def sample_spec(space: SearchSpace, seed: int, trial_id: int) -> NetworkSpec:
    """Integer-uniform draw keyed on (seed, trial_id); identical keys give
    identical specs."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial_id,)))

    def draw(bounds):
        return int(rng.integers(bounds[0], bounds[1] + 1))

    n_layers = draw(space.layers)
    if space.kind == "mlp":
        return NetworkSpec(kind="mlp", n_layers=n_layers, nodes=draw(space.mlp_nodes), seed=seed)
    return NetworkSpec(
        kind="cnn",
        n_layers=n_layers,
        nodes=draw(space.cnn_nodes),
        n_conv_layers=draw(space.conv_layers),
        filters=draw(space.filters),
        filter_size=(draw(space.filter_size), draw(space.filter_size)),
        pool_size=(draw(space.pool_size), draw(space.pool_size)),
        seed=seed,
    )


@dataclass
class TrialRecord:
    trial_id: int
    spec: NetworkSpec
    budget_epochs: int
    status: str = "running"  # complete | pruned | failed
    objective: float | None = None
    val_trajectory: list = None
    wall_clock: float = 0.0
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "spec": self.spec.to_json(),
            "budget_epochs": self.budget_epochs,
            "status": self.status,
            "objective": self.objective,
            "val_trajectory": self.val_trajectory or [],
            "wall_clock": self.wall_clock,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrialRecord":
        return cls(
            trial_id=d["trial_id"],
            spec=NetworkSpec.from_json(d["spec"]),
            budget_epochs=d["budget_epochs"],
            status=d["status"],
            objective=d["objective"],
            val_trajectory=d.get("val_trajectory", []),
            wall_clock=d.get("wall_clock", 0.0),
            error=d.get("error"),
        )


def load_ledger(path) -> list[TrialRecord]:
    records = []
    if os.path.exists(path):
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(TrialRecord.from_json(json.loads(line)))
    return records


def _append_ledger(path, record: TrialRecord):
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record.to_json(), sort_keys=True) + "\n")


def _val_split(n: int, seed: int, frac: float = 0.1):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x5A11D,)))
    order = rng.permutation(n)
    n_val = max(1, int(round(frac * n)))
    return order[n_val:], order[:n_val]


def run_study(
    space: SearchSpace,
    x_train,
    y_train,
    n_trials: int,
    budget_epochs: int,
    seed: int,
    ledger_path,
    train_config: TrainConfig | None = None,
    n_checkpoints: int = 5,
) -> tuple[NetworkSpec, list[TrialRecord]]:
    """Train each sampled spec for `budget_epochs` on a 90% fold and rank by
    MAE on the held-out 10% validation fold.  A trial is pruned when its
    validation MAE at a checkpoint exceeds the running median of completed
    values at that checkpoint.  Completed trials in an existing ledger are
    not re-run (crash recovery); ties go to the earliest trial id.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    x_train = np.asarray(x_train)
    y_train = np.asarray(y_train)
    fit_idx, val_idx = _val_split(x_train.shape[0], seed)
    x_fit, y_fit = x_train[fit_idx], y_train[fit_idx]
    x_val, y_val = x_train[val_idx], y_train[val_idx]
    base_cfg = train_config or TrainConfig(epochs=budget_epochs, seed=seed)

    records = {r.trial_id: r for r in load_ledger(ledger_path) if r.status != "running"}
    val_every = max(1, budget_epochs // n_checkpoints)

    for trial_id in range(n_trials):
        if trial_id in records:
            continue
        spec = sample_spec(space, seed, trial_id)
        record = TrialRecord(trial_id=trial_id, spec=spec, budget_epochs=budget_epochs,
                             val_trajectory=[])
        t0 = time.perf_counter()
        try:
            if space.kind == "mlp":
                model = build_mlp(spec, x_train.shape[1], y_train.shape[1])
            else:
                model = build_cnn(spec, x_train.shape[1:], y_train.shape[1])
            cfg = TrainConfig(
                learning_rate=base_cfg.learning_rate, epochs=budget_epochs,
                batch_size=base_cfg.batch_size, l2=base_cfg.l2, seed=seed,
            )

            def checkpoint(epoch, result):
                vloss = result.val_loss[-1][1]
                record.val_trajectory.append([epoch, vloss])
                peers = [
                    v for r in records.values() for e, v in (r.val_trajectory or []) if e == epoch
                ]
                if len(peers) >= 2 and vloss > float(np.median(peers)):
                    record.status = "pruned"
                    return False
                return True

            result = train(model, x_fit, y_fit, cfg, x_val=x_val, y_val=y_val,
                           val_every=val_every, callback=checkpoint)
            if record.status != "pruned":
                record.status = "complete"
                record.objective = result.val_loss[-1][1]
        except Exception as exc:  # noqa: BLE001 - a failed trial is a ledger entry
            record.status = "failed"
            record.error = str(exc)
        record.wall_clock = time.perf_counter() - t0
        records[trial_id] = record
        _append_ledger(ledger_path, record)

    complete = [r for r in records.values() if r.status == "complete"]
    if not complete:
        raise StudyError(f"all {n_trials} trials failed; see ledger {ledger_path}")
    best = min(complete, key=lambda r: (r.objective, r.trial_id))
    ordered = [records[i] for i in sorted(records)]
    return best.spec, ordered
