"""Trajectory directories and atomic file output.

A trajectory directory holds

* ``trajectory.json``: the flow config and step statistics,
* ``trajectory.csv``: ``t,a,b,sup_phi,sup_phiprime,fiber_diam`` per snapshot,
* ``profiles/snap_NNNN.csv``: one profile CSV per snapshot.

Floats are written with ``repr`` so a reload reproduces every bit.
"""

from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .integrator import FlowConfig, FlowTrajectory
from .profile import fiber_diam_upper, read_profile_csv, write_profile_csv

TRAJ_JSON = "trajectory.json"
TRAJ_CSV = "trajectory.csv"
PROFILE_DIR = "profiles"
TRAJ_COLUMNS = ("t", "a", "b", "sup_phi", "sup_phiprime", "fiber_diam")


class StorageError(ValueError):
    pass


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_text_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def replace_dir_atomic(build, target) -> None:
    """Move the finished directory ``build`` onto ``target``.

    An existing ``target`` is replaced only if it is itself an output
    directory of this package (it contains a ``.krflab`` marker).
    """
    build, target = Path(build), Path(target)
    if target.exists():
        if not (target / ".krflab").exists():
            raise StorageError(f"refusing to overwrite {target}: not a krflab output directory")
        old = target.with_name(f".{target.name}.old")
        if old.exists():
            shutil.rmtree(old)
        os.rename(target, old)
        os.rename(build, target)
        shutil.rmtree(old)
    else:
        os.rename(build, target)


def staging_dir(target) -> Path:
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    d = Path(tempfile.mkdtemp(dir=target.parent, prefix=f".{target.name}.build."))
    (d / ".krflab").write_text("", encoding="utf-8")
    return d


def trajectory_rows(traj: FlowTrajectory):
    for p in traj.snapshots:
        yield (p.t, p.a, p.b, float(p.phi.max()), float(p.dphi.max()), fiber_diam_upper(p))


def save_trajectory(traj: FlowTrajectory, target) -> Path:
    """Write ``traj`` to the directory ``target`` atomically."""
    build = staging_dir(target)
    try:
        (build / PROFILE_DIR).mkdir()
        for k, p in enumerate(traj.snapshots):
            write_profile_csv(build / PROFILE_DIR / f"snap_{k:04d}.csv", p)
        meta = {
            "config": traj.config.to_dict(),
            "dt_last": [float(x) for x in traj.dt_last],
            "newton_iters": [int(x) for x in traj.newton_iters],
            "n_steps": int(traj.n_steps),
            "n_rejected": int(traj.n_rejected),
            "completed": bool(traj.completed),
            "n_snapshots": len(traj.snapshots),
        }
        (build / TRAJ_JSON).write_text(dumps_json(meta), encoding="utf-8")
        (build / TRAJ_CSV).write_text(csv_text(TRAJ_COLUMNS, trajectory_rows(traj)),
                                      encoding="utf-8")
        replace_dir_atomic(build, target)
    except BaseException:
        shutil.rmtree(build, ignore_errors=True)
        raise
    return Path(target)


def load_trajectory(path) -> FlowTrajectory:
    path = Path(path)
    meta_file = path / TRAJ_JSON
    if not meta_file.is_file():
        raise StorageError(f"{path}: no {TRAJ_JSON}")
    try:
        meta = json.loads(meta_file.read_text(encoding="utf-8"))
        cfg = FlowConfig.from_dict(meta["config"])
        n = int(meta["n_snapshots"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"{meta_file}: malformed ({exc})") from exc
    snaps = [read_profile_csv(path / PROFILE_DIR / f"snap_{k:04d}.csv") for k in range(n)]
    return FlowTrajectory(cfg, snaps, list(meta["dt_last"]), list(meta["newton_iters"]),
                          int(meta["n_steps"]), int(meta["n_rejected"]), bool(meta["completed"]))
