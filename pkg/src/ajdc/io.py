"""File formats: recordings, ground truth, cospectra stacks, sets, models, reports.

Recordings are written as CSV with a ``t,ch1,...,chN`` header and a sidecar
JSON descriptor with the same stem. The binary alternative stores the T x N
sample matrix as raw little-endian float64 in column-major order, i.e. all T
samples of ch1, then all of ch2, and so on, with no header; the descriptor
carries ``"format": "f64le-colmajor"`` and ``"shape": [T, N]``.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .diagset import DiagonalizationSet
from .errors import ValidationError
from .pipeline import SeparatingModel
from .sim import GroundTruth, Recording, SourceSignal
from .spectral import CospectraStack, FrequencyGrid

BINARY_FORMAT = "f64le-colmajor"


def fmt(x: float) -> str:
    """Shortest round-tripping decimal (positional, never scientific) notation."""
    return np.format_float_positional(float(x), unique=True, trim="-")


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path):
    return json.loads(Path(path).read_text())


def write_table(path, header, columns) -> None:
    """Write equal-length columns as CSV with a header row."""
    rows = zip(*columns)
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_matrix(path, m) -> None:
    m = np.atleast_2d(m)
    Path(path).write_text("\n".join(",".join(fmt(v) for v in row) for row in m) + "\n")


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def descriptor_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_recording(rec: Recording, path, binary: bool = False) -> None:
    """Write ``rec`` to ``path`` (CSV or raw binary) plus its JSON descriptor."""
    path = Path(path)
    desc = {
        "sampling_rate": rec.sampling_rate,
        "interval_boundaries": list(rec.interval_boundaries) if rec.interval_boundaries else None,
        "condition_labels": list(rec.condition_labels) if rec.condition_labels else None,
        "n_channels": rec.n_channels,
        "n_samples": rec.n_samples,
    }
    if binary:
        desc["format"] = BINARY_FORMAT
        desc["shape"] = [rec.n_samples, rec.n_channels]
        desc["data_file"] = path.name
        # (N, T) C-order is exactly the (T, N) matrix in column-major order
        path.write_bytes(np.ascontiguousarray(rec.channels, dtype="<f8").tobytes())
    else:
        desc["format"] = "csv"
        desc["data_file"] = path.name
        t = np.arange(rec.n_samples) / rec.sampling_rate
        header = ["t"] + [f"ch{i + 1}" for i in range(rec.n_channels)]
        write_table(path, header, [t, *rec.channels])
    _write_json(desc, descriptor_path(path))


def read_recording(path) -> Recording:
    path = Path(path)
    dpath = descriptor_path(path)
    desc = _read_json(dpath) if dpath.exists() else {}
    if desc.get("format") == BINARY_FORMAT:
        T, N = desc["shape"]
        raw = np.frombuffer(path.read_bytes(), dtype="<f8")
        if raw.size != T * N:
            raise ValidationError(f"{path} holds {raw.size} values, descriptor says {T}x{N}")
        x = raw.reshape(N, T).astype(float)
        rate = desc["sampling_rate"]
    else:
        header, data = read_table(path)
        if not header or header[0] != "t":
            raise ValidationError(f"{path}: expected a 't,ch1,...' header")
        x = data[:, 1:].T.copy()
        rate = desc.get("sampling_rate")
        if rate is None:
            dt = np.diff(data[:2, 0])
            rate = 1.0 / dt[0] if dt.size and dt[0] > 0 else 1.0
    edges = desc.get("interval_boundaries")
    labels = desc.get("condition_labels")
    return Recording(x, float(rate), tuple(edges) if edges else None,
                     tuple(labels) if labels else None)


def write_truth(truth: GroundTruth, directory) -> None:
    d = Path(directory)
    s = truth.source_matrix
    rate = truth.sampling_rate
    write_table(d / "sources.csv", ["t"] + [f"s{i + 1}" for i in range(len(s))],
                [np.arange(s.shape[1]) / rate, *s])
    _write_json({
        "mixing": truth.mixing.tolist(),
        "layout": "row-major",
        "noise_sd": truth.noise_sd,
        "noise_seed": truth.noise_seed,
        "sampling_rate": rate,
        "kinds": [src.kind for src in truth.sources],
        "sources_file": "sources.csv",
        "interval_boundaries": list(truth.interval_boundaries) if truth.interval_boundaries else None,
        "condition_labels": list(truth.condition_labels) if truth.condition_labels else None,
        "meta": truth.meta,
    }, d / "truth.json")


def read_truth(path) -> GroundTruth:
    path = Path(path)
    if path.is_dir():
        path = path / "truth.json"
    desc = _read_json(path)
    _, data = read_table(path.parent / desc["sources_file"])
    rate = desc["sampling_rate"]
    sources = tuple(SourceSignal(col, rate, kind)
                    for col, kind in zip(data[:, 1:].T, desc["kinds"]))
    edges = desc.get("interval_boundaries")
    labels = desc.get("condition_labels")
    return GroundTruth(np.array(desc["mixing"], dtype=float), sources, desc["noise_sd"],
                       desc.get("noise_seed", 0), tuple(edges) if edges else None,
                       tuple(labels) if labels else None, desc.get("meta", {}))


def write_stack(stack: CospectraStack, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for f, c in enumerate(stack.matrices):
        write_matrix(d / f"cospec_f{f}.csv", c)
    _write_json({
        "grid": {"epoch_length": stack.grid.epoch_length,
                 "sampling_rate": stack.grid.sampling_rate,
                 "frequencies": stack.grid.frequencies.tolist()},
        "epochs_averaged": stack.epochs_averaged,
        "window": stack.window,
        "overlap": stack.overlap,
        "interval": stack.interval,
        "condition": stack.condition,
        "n_channels": stack.n_channels,
    }, d / "stack.json")


def read_stack(directory) -> CospectraStack:
    d = Path(directory)
    desc = _read_json(d / "stack.json")
    g = desc["grid"]
    grid = FrequencyGrid(g["epoch_length"], g["sampling_rate"])
    mats = np.stack([read_matrix(d / f"cospec_f{f}.csv") for f in range(grid.n_frequencies)])
    return CospectraStack(grid, mats, desc["epochs_averaged"], desc["window"],
                          desc["overlap"], desc["interval"], desc["condition"])


def set_digest(dset: DiagonalizationSet) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(dset.descriptor(), sort_keys=True).encode())
    h.update(np.ascontiguousarray(dset.matrices, dtype="<f8").tobytes())
    return h.hexdigest()


def write_set(dset: DiagonalizationSet, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    desc = dset.descriptor()
    for entry, c in zip(desc, dset.matrices):
        write_matrix(d / entry["matrix_file"], c)
    _write_json(desc, d / "set.json")


def read_set(directory) -> DiagonalizationSet:
    d = Path(directory)
    desc = _read_json(d / "set.json")
    mats = np.stack([read_matrix(d / e["matrix_file"]) for e in desc])
    return DiagonalizationSet(mats, [e["bin"] for e in desc], [e["f_hz"] for e in desc],
                              [e["interval"] for e in desc], [e["condition"] for e in desc],
                              [e["weight"] for e in desc])


def model_to_dict(model: SeparatingModel) -> dict:
    return {
        "layout": "row-major",
        "n_channels": model.n_channels,
        "n_components": model.n_components,
        "B": model.B.tolist(),
        "A": model.A.tolist(),
        "component_order": model.component_order.tolist(),
        "sign_flips": model.sign_flips.tolist(),
        "explained_variance": model.explained_variance.tolist(),
        "total_variance": model.total_variance,
        "provenance": model.provenance,
    }


def write_model(model: SeparatingModel, path) -> None:
    _write_json(model_to_dict(model), path)


def read_model(path) -> SeparatingModel:
    d = _read_json(path)
    if d.get("layout", "row-major") != "row-major":
        raise ValidationError(f"unsupported matrix layout {d['layout']!r}")
    return SeparatingModel(np.array(d["B"], dtype=float), np.array(d["A"], dtype=float),
                           np.array(d["explained_variance"]), d["total_variance"],
                           np.array(d["component_order"]), np.array(d["sign_flips"]),
                           d.get("provenance", {}))


def write_trace(trace, path) -> None:
    write_table(path, ["iteration", "criterion"], [np.arange(len(trace)), trace])


def write_report(report: dict, path) -> None:
    _write_json(report, path)
