"""Forward simulation of population-size trajectories.

Each generation draws a progenitor count from the control law at the
current size, then the next size as the i.i.d. offspring sum over those
progenitors. Generation k consumes its own derived substream, so a
trajectory is reproducible from (model, seed) alone and extinct tails
consume no entropy.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import derive_seed, substream
from .model import CbpModel

POP_CAP = 1 << 62


@dataclass(frozen=True)
class Trajectory:
    """Sizes Z_0..Z_n plus the progenitor counts that produced each step.

    ``progenitors[k]`` is the control draw taken at size ``sizes[k]``; it
    has one entry fewer than ``sizes``. ``truncated_at`` is the index of
    the first size that exceeded the population cap (that size is included
    and the run stops there).
    """

    sizes: np.ndarray
    progenitors: Optional[np.ndarray]
    seed: Optional[int]
    model_id: Optional[str]
    extinct: bool
    truncated_at: Optional[int] = None

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if sizes.ndim != 1 or sizes.size < 1:
            raise ValueError("sizes must be a non-empty 1-d array")
        if (sizes < 0).any():
            raise ValueError("sizes must be >= 0")
        object.__setattr__(self, "sizes", sizes)
        if self.progenitors is not None:
            progs = np.asarray(self.progenitors, dtype=np.int64)
            if progs.shape != (sizes.size - 1,):
                raise ValueError("progenitors must have one entry per "
                                 "transition")
            object.__setattr__(self, "progenitors", progs)

    @property
    def n_transitions(self) -> int:
        return int(self.sizes.size - 1)


def simulate(model: CbpModel, n_generations: int, seed: int,
             record_progenitors: bool = True,
             pop_cap: int = POP_CAP) -> Trajectory:
    """Simulate Z_0..Z_{n_generations} from the model's initial size."""
    if n_generations < 1:
        raise ValueError("n_generations must be >= 1")
    sizes = [int(model.z0)]
    progs = []
    truncated_at = None
    z = int(model.z0)
    for k in range(n_generations):
        if z == 0:
            # zero is absorbing for every control family: no draws needed
            sizes.append(0)
            progs.append(0)
            continue
        gen = substream(seed, k)
        u = int(model.control.sample(gen, z))
        z = int(model.offspring.sample_sum(gen, u))
        sizes.append(z)
        progs.append(u)
        if z > pop_cap:
            truncated_at = k + 1
            break
    arr = np.array(sizes, dtype=np.int64)
    return Trajectory(
        sizes=arr,
        progenitors=np.array(progs, dtype=np.int64)
        if record_progenitors else None,
        seed=int(seed),
        model_id=model.model_id,
        extinct=bool(arr[-1] == 0),
        truncated_at=truncated_at,
    )


def batch_simulate(model: CbpModel, n_paths: int, n_generations: int,
                   seed: int, record_progenitors: bool = True) -> list:
    """Independent trajectories; path i is reproducible on its own from
    the derived seed stored in its Trajectory."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    return [simulate(model, n_generations, derive_seed(seed, i),
                     record_progenitors=record_progenitors)
            for i in range(n_paths)]


# ---------------------------------------------------------------------------
# CSV round-trip


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """Write generation/size(/progenitors) rows plus a metadata sidecar.

    The progenitors cell of the final row is empty: no control draw has
    been taken at the last recorded size.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if traj.progenitors is not None:
            writer.writerow(["generation", "size", "progenitors"])
            for k, z in enumerate(traj.sizes):
                u = ("" if k >= traj.progenitors.size
                     else int(traj.progenitors[k]))
                writer.writerow([k, int(z), u])
        else:
            writer.writerow(["generation", "size"])
            for k, z in enumerate(traj.sizes):
                writer.writerow([k, int(z)])
    meta = {
        "seed": traj.seed,
        "model_id": traj.model_id,
        "extinct": traj.extinct,
        "truncated_at": traj.truncated_at,
    }
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def read_trajectory_csv(path: str) -> Trajectory:
    """Read a trajectory written by ``write_trajectory_csv`` or a bare
    one-column list of sizes (with or without a ``size`` header)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no rows")
    header = rows[0]
    has_header = not _is_int(header[0])
    if has_header:
        names = [c.strip().lower() for c in header]
        if "size" not in names:
            raise ValueError(f"{path}: no 'size' column")
        size_col = names.index("size")
        prog_col = names.index("progenitors") if "progenitors" in names else None
        body = rows[1:]
    else:
        size_col, prog_col = 0 if len(rows[0]) == 1 else 1, None
        if len(rows[0]) >= 3:
            prog_col = 2
        body = rows
    sizes = [int(r[size_col]) for r in body]
    progs = None
    if prog_col is not None:
        cells = [r[prog_col].strip() if len(r) > prog_col else ""
                 for r in body]
        vals = [int(c) for c in cells if c != ""]
        if len(vals) == len(sizes) - 1 and all(
                c == "" for c in cells[len(vals):]):
            progs = vals
        elif len(vals) == len(sizes):
            progs = vals[:-1]

    meta = {}
    meta_path = path + ".meta.json"
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
    arr = np.array(sizes, dtype=np.int64)
    return Trajectory(
        sizes=arr,
        progenitors=None if progs is None else np.array(progs, np.int64),
        seed=meta.get("seed"),
        model_id=meta.get("model_id"),
        extinct=bool(meta.get("extinct", arr[-1] == 0)),
        truncated_at=meta.get("truncated_at"),
    )


def _is_int(cell: str) -> bool:
    try:
        int(cell)
        return True
    except ValueError:
        return False
