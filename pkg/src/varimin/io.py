"""File formats: meshes (OFF/OBJ), atom clouds and fields (JSON lines),
run configs, and run manifests.

Float columns in CSV output are printed with 17 significant digits and
JSON floats use the shortest exact representation, so rewriting the
same data produces byte-identical files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .ambient import ambient_from_config, subset_from_config
from .varifold import DiscreteVarifold, SimplicialMesh

CONFIG_SCHEMA = 1


def _fmt(x):
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# meshes


def write_mesh(path, mesh):
    """Write a triangle or segment mesh as OFF or OBJ by extension."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        _write_off(path, mesh)
    elif ext == ".obj":
        _write_obj(path, mesh)
    else:
        raise ValueError(f"unsupported mesh extension {ext!r} (use .off or .obj)")


def read_mesh(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"mesh file not found: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        return _read_off(path)
    if ext == ".obj":
        return _read_obj(path)
    raise ValueError(f"unsupported mesh extension {ext!r} (use .off or .obj)")


def _write_off(path, mesh):
    verts = np.asarray(mesh.vertices, dtype=float)
    cells = np.asarray(mesh.simplices)
    with open(path, "w") as handle:
        handle.write("OFF\n")
        handle.write(f"{len(verts)} {len(cells)} 0\n")
        for row in verts:
            handle.write(" ".join(_fmt(c) for c in row) + "\n")
        for cell in cells:
            handle.write(f"{len(cell)} " + " ".join(str(int(i)) for i in cell) + "\n")


def _read_off(path):
    with open(path) as handle:
        tokens = []
        for line in handle:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ValueError(f"{path}: not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    cursor = 4
    flat = np.array(tokens[cursor : cursor + 3 * nv], dtype=float)
    verts = flat.reshape(nv, 3)
    cursor += 3 * nv
    cells = []
    for _ in range(nf):
        count = int(tokens[cursor])
        cells.append([int(t) for t in tokens[cursor + 1 : cursor + 1 + count]])
        cursor += 1 + count
    sizes = {len(c) for c in cells}
    if len(sizes) != 1 or sizes - {2, 3}:
        raise ValueError(f"{path}: need uniform segment or triangle cells, got sizes {sorted(sizes)}")
    return SimplicialMesh(verts, np.array(cells, dtype=np.int64))


def _write_obj(path, mesh):
    verts = np.asarray(mesh.vertices, dtype=float)
    cells = np.asarray(mesh.simplices)
    tag = "f" if cells.shape[1] == 3 else "l"
    with open(path, "w") as handle:
        for row in verts:
            handle.write("v " + " ".join(_fmt(c) for c in row) + "\n")
        for cell in cells:
            handle.write(tag + " " + " ".join(str(int(i) + 1) for i in cell) + "\n")


def _read_obj(path):
    verts = []
    cells = []
    with open(path) as handle:
        for line in handle:
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] in ("f", "l"):
                idx = [int(p.split("/", 1)[0]) - 1 for p in parts[1:]]
                cells.append(idx)
    if not verts or not cells:
        raise ValueError(f"{path}: no usable vertex/cell data")
    sizes = {len(c) for c in cells}
    if len(sizes) != 1 or sizes - {2, 3}:
        raise ValueError(f"{path}: need uniform segment or triangle cells, got sizes {sorted(sizes)}")
    return SimplicialMesh(np.array(verts, dtype=float), np.array(cells, dtype=np.int64))


# ---------------------------------------------------------------------------
# atom clouds and field exports (JSON lines, one object per atom)


def write_atoms(path, v):
    """One JSON object per atom with keys "x", "P" (rows), "w"."""
    with open(path, "w") as handle:
        for k in range(len(v)):
            obj = {
                "x": v.x[k].tolist(),
                "P": v.P[k].tolist(),
                "w": float(v.w[k]),
            }
            handle.write(json.dumps(obj) + "\n")


def read_atoms(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"atom file not found: {path}")
    xs, Ps, ws = [], [], []
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            x = np.asarray(obj["x"], dtype=float)
            P = np.asarray(obj["P"], dtype=float)
            if P.ndim == 1:
                side = int(round(len(P) ** 0.5))
                P = P.reshape(side, side)
            xs.append(x)
            Ps.append(P)
            ws.append(float(obj["w"]))
    return DiscreteVarifold(x=np.array(xs), P=np.array(Ps), w=np.array(ws))


def write_curvature(path, curvature, relative=None):
    """Per-atom rows with keys "H", "H_N", "residual" in atom order.

    "H_N" is null unless a relative field is attached (either on the
    curvature object itself or passed separately); "residual" carries
    the tangency defect when one was computed.
    """
    values = curvature.values
    rel = relative if relative is not None else getattr(curvature, "relative", None)
    defect = getattr(curvature, "tangency_defect", None)
    with open(path, "w") as handle:
        for k in range(len(values)):
            obj = {
                "H": values[k].tolist(),
                "H_N": None if rel is None else rel[k].tolist(),
                "residual": None if defect is None else float(defect[k]),
            }
            handle.write(json.dumps(obj) + "\n")


def write_tensor(path, tensor):
    """Per-center rows with keys "B" (flattened row-major), "A", "residual"."""
    B = tensor.B
    A = tensor.A
    residual = tensor.residual
    with open(path, "w") as handle:
        for k in range(len(B)):
            obj = {
                "B": B[k].ravel().tolist(),
                "A": None if A is None else A[k].ravel().tolist(),
                "residual": float(residual[k]),
            }
            handle.write(json.dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# run configs and manifests


def load_run_config(path):
    """Validated minimization run config (schema 1).

    Returns a dict with the original fields plus resolved "mesh_path";
    "ambient" and "subset" stay as dicts for the caller to build.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path) as handle:
        config = json.load(handle)
    if config.get("schema") != CONFIG_SCHEMA:
        raise ValueError(
            f"config schema must be {CONFIG_SCHEMA}, got {config.get('schema')!r}"
        )
    for key in ("energy", "subset", "mesh"):
        if key not in config:
            raise ValueError(f"config missing required key {key!r}")
    energy = config["energy"]
    if "p" not in energy or "form" not in energy:
        raise ValueError("config energy section needs 'form' and 'p'")
    base = os.path.dirname(os.path.abspath(path))
    mesh_path = config["mesh"]
    if not os.path.isabs(mesh_path):
        mesh_path = os.path.join(base, mesh_path)
    config["mesh_path"] = mesh_path
    config.setdefault("max_iter", 5000)
    config.setdefault("tol", 1e-6)
    config.setdefault("seed", 0)
    return config


def build_ambient(config):
    return ambient_from_config(config.get("ambient", {"kind": "euclidean", "dim": 3}))


def build_subset(config, ambient):
    return subset_from_config(config["subset"], ambient)


@dataclass
class RunManifest:
    command: str
    config: str = ""
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seed: int = 0
    version: str = ""
    wall_clock_s: float = 0.0

    def write(self, path):
        payload = {
            "command": self.command,
            "config": self.config,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "seed": self.seed,
            "version": self.version,
            "wall_clock_s": self.wall_clock_s,
        }
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")


def write_summary(path, summary):
    """Deterministic machine-readable summary JSON."""
    with open(path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
