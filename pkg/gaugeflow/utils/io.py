import csv
import json
from pathlib import Path

import numpy as np
import torch

from gaugeflow.engine.trace import Trace
from gaugeflow.errors import ConformabilityError
from gaugeflow.geometry.fields import Grid, MultiField, ScalarField, VectorField

# raw field files are little-endian float64, row-major (ny, nx) per channel
FIELD_DTYPE = np.dtype("<f8")


def sidecar(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def _channels(f) -> tuple[Grid, np.ndarray]:
    match f:
        case ScalarField():
            return f.grid, f.values.detach().numpy()[None]
        case VectorField():
            return f.grid, torch.stack([f.ux, f.uy]).detach().numpy()
        case MultiField():
            return f.grid, f.values.detach().numpy()
    raise TypeError(f"cannot write {type(f).__name__} as a field file")


def write_field(path: str | Path, f: ScalarField | VectorField | MultiField):
    grid, data = _channels(f)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data.astype(FIELD_DTYPE).tofile(path)
    meta = {"nx": grid.nx, "ny": grid.ny, "channels": data.shape[0]}
    sidecar(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def read_field(path: str | Path) -> tuple[Grid, torch.Tensor]:
    path = Path(path)
    meta = json.loads(sidecar(path).read_text())
    grid = Grid(int(meta["nx"]), int(meta["ny"]))
    channels = int(meta["channels"])
    data = np.fromfile(path, dtype=FIELD_DTYPE)
    if data.size != channels * grid.size:
        raise ConformabilityError(f"{path}: {data.size} values, sidecar promises {channels}x{grid.ny}x{grid.nx}")
    return grid, torch.from_numpy(data.astype(np.float64).reshape(channels, *grid.shape))


def read_scalar_field(path: str | Path) -> ScalarField:
    grid, data = read_field(path)
    if data.shape[0] != 1:
        raise ConformabilityError(f"{path} holds {data.shape[0]} channels, expected 1")
    return ScalarField(grid, data[0])


def read_vector_field(path: str | Path) -> VectorField:
    grid, data = read_field(path)
    if data.shape[0] != 2:
        raise ConformabilityError(f"{path} holds {data.shape[0]} channels, expected 2")
    return VectorField(grid, data[0], data[1])


def read_multi_field(path: str | Path) -> MultiField:
    grid, data = read_field(path)
    return MultiField(grid, data)


def write_field_csv(path: str | Path, f: ScalarField | VectorField | MultiField):
    """One row per cell: i, j, x, y and one column per channel."""
    grid, data = _channels(f)
    xx, yy = grid.coords()
    rows = [["i", "j", "x", "y", *[f"c{k}" for k in range(data.shape[0])]]]
    for i in range(grid.ny):
        for j in range(grid.nx):
            rows.append([i, j, float(xx[i, j]), float(yy[i, j]), *data[:, i, j].tolist()])
    write_csv(path, rows)


def read_field_csv(path: str | Path, grid: Grid) -> MultiField:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        channels = len(header) - 4
        values = torch.zeros((channels, *grid.shape), dtype=torch.float64)
        seen = 0
        for row in reader:
            i, j = int(row[0]), int(row[1])
            values[:, i, j] = torch.tensor([float(v) for v in row[4:]], dtype=torch.float64)
            seen += 1
    if seen != grid.size:
        raise ConformabilityError(f"{path}: {seen} cells, expected {grid.size}")
    return MultiField(grid, values)


def write_csv(path: str | Path, rows: list[list]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        for r in rows:
            w.writerow(r)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_jsonl(path: str | Path, records: list[dict]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(dumps(record) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_json(path: str | Path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def trace_table(trace: Trace) -> list[list]:
    return [["iter", "energy", "grad_norm", "step"], *[list(row) for row in trace.rows()]]


def write_trace(path: str | Path, trace: Trace):
    write_csv(path, trace_table(trace))
