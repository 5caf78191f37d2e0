"""Observation/feature CSV readers and the plain-text model format."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import InteractionMatrix, TaskFeatureMatrix
from .feat_nnls import FeatModel
from .ifts import LatentModel

_logger = logging.getLogger(__name__)

OBS_HEADER = ["worker_id", "task_id", "count"]
FEAT_HEADER = ["task_id", "feature_id"]
TRUTH_HEADER = ["worker_id", "feature_id", "weight"]
MODEL_KINDS = ("feat-nnls", "ifts", "als-neg", "feat-reg")


class DataFormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class DataValidationError(DataFormatError):
    """Well-formed row carrying an invalid value (e.g. a non-positive count)."""


class ModelFormatError(DataFormatError):
    pass


@dataclass
class IdMaps:
    """External string id -> dense index, numbered in first-appearance order."""

    workers: dict[str, int] = field(default_factory=dict)
    tasks: dict[str, int] = field(default_factory=dict)
    features: dict[str, int] = field(default_factory=dict)

    @staticmethod
    def from_lists(workers=(), tasks=(), features=()) -> "IdMaps":
        return IdMaps(
            {k: i for i, k in enumerate(workers)},
            {k: i for i, k in enumerate(tasks)},
            {k: i for i, k in enumerate(features)},
        )

    @staticmethod
    def ordered(mapping: dict[str, int]) -> list[str]:
        out = [""] * len(mapping)
        for k, i in mapping.items():
            out[i] = k
        return out


def _index(mapping: dict[str, int], key: str, extend: bool, what: str, path, line) -> int:
    idx = mapping.get(key)
    if idx is None:
        if not extend:
            raise DataValidationError(f"unknown {what} id {key!r}", path, line)
        idx = mapping[key] = len(mapping)
    return idx


def _rows(path, header: list[str]):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != header:
            raise DataFormatError(f"expected header {','.join(header)}", path, 1)
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} fields, got {len(row)}", path, reader.line_num
                )
            yield reader.line_num, [f.strip() for f in row]


def load_observations(path, ids: IdMaps | None = None, *, extend: bool = True):
    """Read ``worker_id,task_id,count`` rows into an :class:`InteractionMatrix`.

    Duplicate pairs are summed.  When ``ids`` is given new identifiers are
    appended to it (or rejected if ``extend`` is false).  The matrix shape is
    the size of the id maps after reading.
    """
    ids = ids if ids is not None else IdMaps()
    workers, tasks, counts = [], [], []
    for line, (wid, tid, cnt) in _rows(path, OBS_HEADER):
        try:
            value = int(cnt)
        except ValueError:
            raise DataFormatError(f"count {cnt!r} is not an integer", path, line) from None
        if value < 1:
            raise DataValidationError(f"count must be positive, got {value}", path, line)
        if not wid or not tid:
            raise DataFormatError("empty identifier", path, line)
        workers.append(_index(ids.workers, wid, extend, "worker", path, line))
        tasks.append(_index(ids.tasks, tid, extend, "task", path, line))
        counts.append(value)
    c = InteractionMatrix.from_triples(workers, tasks, counts, (len(ids.workers), len(ids.tasks)))
    return c, ids


def load_features(path, task_map: dict[str, int], feature_map: dict[str, int] | None = None, *,
                  extend_tasks: bool = True) -> TaskFeatureMatrix:
    """Read ``task_id,feature_id`` rows into a binary :class:`TaskFeatureMatrix`.

    Tasks not yet in ``task_map`` are appended to it (the caller's matrices
    may need :func:`widen`).  Tasks with no feature rows get an all-zero row.
    """
    feature_map = feature_map if feature_map is not None else {}
    pairs = []
    for line, (tid, fid) in _rows(path, FEAT_HEADER):
        if not tid or not fid:
            raise DataFormatError("empty identifier", path, line)
        t = _index(task_map, tid, extend_tasks, "task", path, line)
        f = _index(feature_map, fid, True, "feature", path, line)
        pairs.append((t, f))
    rows: list[set[int]] = [set() for _ in range(len(task_map))]
    for t, f in pairs:
        rows[t].add(f)
    missing = sum(1 for r in rows if not r)
    if missing:
        _logger.warning("%d task(s) have no features", missing)
    y = TaskFeatureMatrix(rows, len(feature_map))
    y.feature_ids = IdMaps.ordered(feature_map)
    y.missing_tasks = missing
    return y


def widen(c: InteractionMatrix, n_workers: int, n_tasks: int) -> InteractionMatrix:
    """Pad ``c`` with empty rows/columns up to the given shape."""
    if (n_workers, n_tasks) == c.shape:
        return c
    if n_workers < c.n_workers or n_tasks < c.n_tasks:
        raise ValueError("cannot shrink an interaction matrix")
    csr = c.csr.copy()
    csr.resize((n_workers, n_tasks))
    return InteractionMatrix(csr)


def write_observations(path, c: InteractionMatrix, ids: IdMaps) -> None:
    workers = IdMaps.ordered(ids.workers)
    tasks = IdMaps.ordered(ids.tasks)
    w, t, n = c.entries()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(OBS_HEADER)
        for wi, ti, ni in zip(w, t, n):
            out.writerow([workers[wi], tasks[ti], int(ni)])


# -- model files -------------------------------------------------------------


def _dims(m: np.ndarray) -> str:
    return f"{m.shape[0]}x{m.shape[1]}"


def _matrix_lines(m: np.ndarray) -> list[str]:
    return ["\t".join(repr(float(v)) for v in row) for row in m]


def _id_lines(ids: dict) -> list[str]:
    lines = []
    for key in ("worker_ids", "task_ids", "feature_ids"):
        if key in ids:
            lines.append(f"{key}=" + "\t".join(ids[key]))
    return lines


def save_model(path, model) -> None:
    """Write a model as ``key=value`` header lines followed by matrix rows.

    Values use the shortest decimal that parses back to the same double, so
    :func:`load_model` reproduces the matrices bit for bit.
    """
    if isinstance(model, FeatModel):
        lines = [f"kind={model.kind}", f"dims={_dims(model.x)}", f"alpha={model.alpha!r}", f"lambda={model.lam!r}"]
        if model.kind == "feat-nnls":
            lines.append(f"residual={model.residual}")
        lines += _id_lines(model.ids)
        lines += _matrix_lines(model.x)
    elif isinstance(model, LatentModel):
        lines = [
            f"kind={model.kind}",
            f"u_dims={_dims(model.u)}",
            f"v_dims={_dims(model.v)}",
            f"alpha={model.alpha!r}",
            f"lambda={model.lam!r}",
            f"iterations={model.iterations}",
            f"seed={model.seed}",
        ]
        if model.beta_neg is not None:
            lines.append(f"beta_neg={model.beta_neg!r}")
        lines.append("objective_trace=" + "\t".join(repr(float(v)) for v in model.objective_trace))
        lines += _id_lines(model.ids)
        lines += _matrix_lines(model.u)
        lines += _matrix_lines(model.v)
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_dims(text: str, path, line) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        dims = int(r), int(c)
    except ValueError:
        raise ModelFormatError(f"bad dims {text!r}", path, line) from None
    if dims[0] < 0 or dims[1] < 0:
        raise ModelFormatError(f"bad dims {text!r}", path, line)
    return dims


def _read_matrix(lines, start: int, dims, path, offset: int = 0) -> np.ndarray:
    rows, cols = dims
    out = np.zeros((rows, cols))
    for r in range(rows):
        lineno = offset + start + r + 1
        if start + r >= len(lines):
            raise ModelFormatError(f"expected {rows} matrix rows, file ended", path, lineno)
        fields = lines[start + r].split("\t") if lines[start + r] else []
        if len(fields) != cols:
            raise ModelFormatError(f"dimension mismatch: expected {cols} columns, got {len(fields)}", path, lineno)
        try:
            out[r] = [float(f) for f in fields]
        except ValueError:
            raise ModelFormatError("unparseable number", path, lineno) from None
    return out


def load_model(path):
    """Inverse of :func:`save_model`; returns a FeatModel or LatentModel."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header: dict[str, tuple[str, int]] = {}
    pos = 0
    while pos < len(lines) and "=" in lines[pos]:
        key, _, val = lines[pos].partition("=")
        header[key.strip()] = (val, pos + 1)
        pos += 1
    if "kind" not in header:
        raise ModelFormatError("missing kind line", path, 1)
    kind = header["kind"][0].strip()
    if kind not in MODEL_KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}", path, header["kind"][1])

    def num(key, default=float("nan")):
        if key not in header:
            return default
        val, line = header[key]
        try:
            return float(val)
        except ValueError:
            raise ModelFormatError(f"bad value for {key}", path, line) from None

    ids = {}
    for key in ("worker_ids", "task_ids", "feature_ids"):
        if key in header:
            val = header[key][0]
            ids[key] = val.split("\t") if val else []

    body = lines[pos:]
    while body and not body[-1].strip():
        body.pop()
    if kind in ("feat-nnls", "feat-reg"):
        if "dims" not in header:
            raise ModelFormatError("missing dims line", path, pos + 1)
        dims = _parse_dims(header["dims"][0], path, header["dims"][1])
        x = _read_matrix(body, 0, dims, path, pos)
        _check_trailing(body, dims[0], pos, path)
        model = FeatModel(
            x=x,
            alpha=num("alpha"),
            lam=num("lambda"),
            kind=kind,
            residual=header.get("residual", ("normal", 0))[0].strip(),
        )
    else:
        for key in ("u_dims", "v_dims"):
            if key not in header:
                raise ModelFormatError(f"missing {key} line", path, pos + 1)
        ud = _parse_dims(header["u_dims"][0], path, header["u_dims"][1])
        vd = _parse_dims(header["v_dims"][0], path, header["v_dims"][1])
        if ud[1] != vd[1]:
            raise ModelFormatError("u and v factor counts differ", path, header["v_dims"][1])
        u = _read_matrix(body, 0, ud, path, pos)
        v = _read_matrix(body, ud[0], vd, path, pos)
        _check_trailing(body, ud[0] + vd[0], pos, path)
        trace_text = header.get("objective_trace", ("", 0))[0]
        try:
            trace = [float(t) for t in trace_text.split("\t")] if trace_text else []
        except ValueError:
            raise ModelFormatError("bad objective_trace", path, header["objective_trace"][1]) from None
        model = LatentModel(
            u=u,
            v=v,
            alpha=num("alpha"),
            lam=num("lambda"),
            iterations=int(num("iterations", 0)),
            seed=int(num("seed", 0)),
            objective_trace=trace,
            kind=kind,
            beta_neg=num("beta_neg") if "beta_neg" in header else None,
        )
    model.ids = ids
    return model


def _check_trailing(body, used: int, offset: int, path) -> None:
    if len(body) > used:
        raise ModelFormatError("dimension mismatch: extra matrix rows", path, offset + used + 1)
