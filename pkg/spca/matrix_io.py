"""Plain-text artifacts: CSV matrices, model files, training histories and
key=value files. Floats are written with 17 significant digits so every
value reads back bit-exactly."""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from spca import constants
from spca.core import FidelityVector, IterationRecord, TrainingHistory
from spca.errors import DataFormatError

HISTORY_FILE = "history.csv"
FIDELITY_FILE = "fidelity.csv"
RAW_FIDELITY_FILE = "raw_fidelity.csv"
TRACE_FILE = "trace.csv"


def format_float(value):
    return format(float(value), constants.FLOAT_FORMAT)


def _parse_float(text, path, line):
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"{path}:{line}: {text!r} is not a number") from None


def _parse_optional_float(text, path, line=1):
    return None if text == "" else _parse_float(text, path, line)


def _parse_int(text, path, line):
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(f"{path}:{line}: {text!r} is not an integer") from None


def _writer(handle):
    return csv.writer(handle, lineterminator="\n")


def _write_matrix_rows(writer, M):
    writer.writerow([M.shape[0], M.shape[1]])
    for row in M:
        writer.writerow([format_float(value) for value in row])


def _read_matrix_rows(rows, path):
    """Consume a `d,n` header and d rows from an iterator of (line, fields)."""
    try:
        line, header = next(rows)
    except StopIteration:
        raise DataFormatError(f"{path}: missing matrix header `d,n`") from None
    if len(header) != 2:
        raise DataFormatError(f"{path}:{line}: expected matrix header `d,n`, got {','.join(header)!r}")
    d, n = (_parse_int(value, path, line) for value in header)
    if d < 1 or n < 1:
        raise DataFormatError(f"{path}:{line}: matrix shape must be positive, got {d},{n}")
    M = np.empty((d, n))
    for i in range(d):
        try:
            line, values = next(rows)
        except StopIteration:
            raise DataFormatError(f"{path}: expected {d} matrix rows, found {i}") from None
        if len(values) != n:
            raise DataFormatError(f"{path}:{line}: expected {n} values, found {len(values)}")
        M[i] = [_parse_float(value, path, line) for value in values]
    return M


def _numbered_rows(handle):
    return ((number, fields) for number, fields in enumerate(csv.reader(handle), start=1) if fields)


def write_matrix(path, M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DataFormatError(f"only 2-d matrices can be written, got shape {M.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as csvfile:
        _write_matrix_rows(_writer(csvfile), M)


def read_matrix(path):
    with open(path, newline="") as csvfile:
        rows = _numbered_rows(csvfile)
        M = _read_matrix_rows(rows, path)
        for line, _ in rows:
            raise DataFormatError(f"{path}:{line}: unexpected data after the matrix")
    return M


@dataclass
class SavedModel:
    U: np.ndarray
    weights: np.ndarray
    p: Optional[float]
    eta: Optional[float]
    c: Optional[float]
    headers: Dict[str, str] = field(default_factory=dict)

    @property
    def k(self):
        return self.U.shape[1]

    @property
    def method(self):
        return self.headers.get("method", "spca")


def write_model(path, U, weights, p, eta, c, **headers):
    """Extra headers (method=, normalization=, ...) go before the k, p, eta, c block.

    A parameter given as None is written empty.
    """
    U = np.asarray(U, dtype=float)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        for key, value in headers.items():
            handle.write(f"{key}={value}\n")
        handle.write(f"k={U.shape[1]}\n")
        for key, value in (("p", p), ("eta", eta), ("c", c)):
            handle.write(f"{key}={'' if value is None else format_float(value)}\n")
        writer = _writer(handle)
        _write_matrix_rows(writer, U)
        writer.writerow([format_float(value) for value in np.asarray(weights, dtype=float)])


def read_model(path):
    with open(path, newline="") as handle:
        lines = handle.read().splitlines()

    headers = {}
    index = 0
    while index < len(lines) and "=" in lines[index]:
        key, _, value = lines[index].partition("=")
        headers[key.strip()] = value.strip()
        index += 1
    for key in ("k", "p", "eta", "c"):
        if key not in headers:
            raise DataFormatError(f"{path}: model header is missing `{key}=`")

    body = (
        (number, fields)
        for number, fields in enumerate(csv.reader(lines[index:]), start=index + 1)
        if fields
    )
    U = _read_matrix_rows(body, path)
    k = _parse_int(headers.pop("k"), path, 1)
    if U.shape[1] != k:
        raise DataFormatError(f"{path}: header says k={k} but the basis has {U.shape[1]} columns")
    try:
        line, values = next(body)
    except StopIteration:
        raise DataFormatError(f"{path}: missing the sample weight line") from None
    weights = np.array([_parse_float(value, path, line) for value in values])
    return SavedModel(
        U=U,
        weights=weights,
        p=_parse_optional_float(headers.pop("p"), path),
        eta=_parse_optional_float(headers.pop("eta"), path),
        c=_parse_optional_float(headers.pop("c"), path),
        headers=headers,
    )


def write_key_values(path, values):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        for key, value in values.items():
            handle.write(f"{key}={value}\n")


def read_key_values(path):
    """key=value lines; blank lines and # comments are skipped."""
    values = {}
    with open(path) as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise DataFormatError(f"{path}:{number}: expected key=value, got {raw.strip()!r}")
            values[key.strip()] = value.strip()
    return values


# ---------------------------------------------------------------------------
# training histories


def write_history(directory, history: TrainingHistory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if len(history) == 0:
        raise DataFormatError("cannot write an empty training history")
    n = history[0].weights.shape[0]
    weight_columns = [f"w_{i}" for i in range(n)]
    ell_columns = [f"ell_{i}" for i in range(n)]

    with open(directory / HISTORY_FILE, "w", newline="") as csvfile:
        writer = _writer(csvfile)
        writer.writerow(["iter", "objective", "inner_iters"] + weight_columns)
        for record in history:
            writer.writerow(
                [record.iteration, format_float(record.objective), record.inner_iterations]
                + [format_float(w) for w in record.weights]
            )

    with open(directory / FIDELITY_FILE, "w", newline="") as csvfile:
        writer = _writer(csvfile)
        writer.writerow(["iter", "normalized", "scale"] + ell_columns)
        for record in history:
            writer.writerow(
                [record.iteration, int(record.fidelity.normalized), format_float(record.fidelity.scale)]
                + [format_float(ell) for ell in record.fidelity.ell]
            )

    with open(directory / RAW_FIDELITY_FILE, "w", newline="") as csvfile:
        writer = _writer(csvfile)
        writer.writerow(["iter"] + ell_columns)
        for record in history:
            writer.writerow([record.iteration] + [format_float(ell) for ell in record.raw_fidelity])

    with open(directory / TRACE_FILE, "w", newline="") as csvfile:
        writer = _writer(csvfile)
        writer.writerow(["iter", "step", "trace"])
        for record in history:
            for step, value in enumerate(record.trace):
                writer.writerow([record.iteration, step, format_float(value)])


def _read_table(path):
    with open(path, newline="") as csvfile:
        rows = [row for row in csv.reader(csvfile) if row]
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    return rows[0], rows[1:]


def read_history(directory):
    """Rebuild a TrainingHistory from history.csv, fidelity.csv and trace.csv.

    raw_fidelity.csv is optional; without it raw fidelities repeat the
    recorded ones.
    """
    directory = Path(directory)
    history_path = directory / HISTORY_FILE
    fidelity_path = directory / FIDELITY_FILE
    trace_path = directory / TRACE_FILE

    _, history_rows = _read_table(history_path)
    _, fidelity_rows = _read_table(fidelity_path)
    _, trace_rows = _read_table(trace_path)
    raw_rows = []
    if (directory / RAW_FIDELITY_FILE).exists():
        _, raw_rows = _read_table(directory / RAW_FIDELITY_FILE)

    fidelities = {}
    for line, row in enumerate(fidelity_rows, start=2):
        iteration = _parse_int(row[0], fidelity_path, line)
        if len(row) < 4:
            raise DataFormatError(f"{fidelity_path}:{line}: expected iter,normalized,scale,ell_0,...")
        ell = np.array([_parse_float(value, fidelity_path, line) for value in row[3:]])
        fidelities[iteration] = FidelityVector(
            ell, normalized=row[1] == "1", scale=_parse_float(row[2], fidelity_path, line)
        )
    raw = {}
    for line, row in enumerate(raw_rows, start=2):
        raw[_parse_int(row[0], directory / RAW_FIDELITY_FILE, line)] = np.array(
            [_parse_float(value, directory / RAW_FIDELITY_FILE, line) for value in row[1:]]
        )
    traces = {}
    for line, row in enumerate(trace_rows, start=2):
        if len(row) != 3:
            raise DataFormatError(f"{trace_path}:{line}: expected iter,step,trace")
        iteration = _parse_int(row[0], trace_path, line)
        traces.setdefault(iteration, []).append(_parse_float(row[2], trace_path, line))

    history = TrainingHistory()
    for line, row in enumerate(history_rows, start=2):
        if len(row) < 4:
            raise DataFormatError(f"{history_path}:{line}: expected iter,objective,inner_iters,w_0,...")
        iteration = _parse_int(row[0], history_path, line)
        if iteration not in fidelities:
            raise DataFormatError(f"{fidelity_path}: no fidelities recorded for iteration {iteration}")
        fid = fidelities[iteration]
        history.append(
            IterationRecord(
                iteration=iteration,
                weights=np.array([_parse_float(value, history_path, line) for value in row[3:]]),
                raw_fidelity=raw.get(iteration, fid.ell),
                fidelity=fid,
                objective=_parse_float(row[1], history_path, line),
                trace=traces.get(iteration, []),
            )
        )
    return history
