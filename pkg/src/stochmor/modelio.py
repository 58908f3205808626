"""File interchange: Matrix Market matrices, JSON manifests, CSV tables."""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np
import scipy.io

from .system import StateSpaceModel

__all__ = [
    "save_matrix",
    "load_matrix",
    "save_model",
    "load_model",
    "save_reduction",
    "write_csv",
    "write_json",
]

MANIFEST_NAME = "model.json"


def save_matrix(M, path):
    scipy.io.mmwrite(str(path), np.asarray(M), precision=17)


def load_matrix(path):
    return np.asarray(scipy.io.mmread(str(path)))


def save_model(model, directory, metadata=None):
    """Write a model as Matrix Market files plus a JSON manifest.

    Returns the manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, M in [("A", model.A), ("B1", model.B1), ("C", model.C),
                    ("K", model.K)]:
        files[name] = f"{name}.mtx"
        save_matrix(M, directory / files[name])
    if model.B2 is not None:
        files["B2"] = "B2.mtx"
        save_matrix(model.B2, directory / "B2.mtx")
    if model.N is not None:
        files["N"] = [f"N_{i}.mtx" for i in range(len(model.N))]
        for fname, Ni in zip(files["N"], model.N):
            save_matrix(Ni, directory / fname)
    manifest = {"kind": model.kind, "files": files,
                "metadata": metadata or {}}
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_model(manifest_path):
    """Load a model from a JSON manifest (or a directory containing one)."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    files = manifest["files"]

    def read(name):
        return load_matrix(base / files[name])

    kwargs = dict(A=read("A"), B1=read("B1"), C=read("C"), K=read("K"),
                  kind=manifest.get("kind"))
    if "B2" in files:
        kwargs["B2"] = read("B2")
    if "N" in files:
        kwargs["N"] = tuple(load_matrix(base / f) for f in files["N"])
    return StateSpaceModel(**kwargs)


def save_reduction(result, directory):
    """Write a reduction result: reduced model, bases, history and flags."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_model(result.reduced, directory / "reduced")
    save_matrix(result.V, directory / "V.mtx")
    save_matrix(result.Wb, directory / "Wb.mtx")
    info = {
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "history": [[[float(z.real), float(z.imag)] for z in eigs]
                    for eigs in result.history],
    }
    (directory / "reduction.json").write_text(json.dumps(info, indent=2) + "\n")
    return directory


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


def _fmt(x):
    if isinstance(x, float) or isinstance(x, np.floating):
        return f"{x:.16e}"  # 17 significant digits, round-trip exact
    return str(x)


def write_csv(rows, path, header):
    """Write rows (sequences) as CSV with a header and 17-digit floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
