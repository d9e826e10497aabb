"""Plain-text formats: key = value configs and the CSV dumps."""
from __future__ import annotations

import csv
import datetime as _dt
import json
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .torus import ScalarField, TorusGrid

LEDGER_COLUMNS = ("module", "operation", "parameters", "max_violation", "tolerance", "verdict")


class ConfigError(ValueError):
    """Bad configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


def float_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]


def str_list(text: str) -> list[str]:
    return [x.strip() for x in text.replace(";", ",").split(",") if x.strip()]


def p_list(text: str) -> list[float]:
    return [float("inf") if x.lower() in ("inf", "infinity") else float(x) for x in str_list(text)]


def boolean(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str, schema: dict[str, tuple[Callable, object]]) -> dict:
    """Parse ``key = value`` lines against ``schema`` (key -> (parser, default)).

    Blank lines and ``#`` comments are skipped. Unknown keys, duplicate keys
    and unparsable values raise ConfigError.
    """
    out = {k: d for k, (_, d) in schema.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in schema:
            raise ConfigError(key, f"unknown config key '{key}' (line {lineno})")
        if key in seen:
            raise ConfigError(key, f"duplicate config key '{key}' (line {lineno})")
        seen.add(key)
        try:
            out[key] = schema[key][0](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"bad value for '{key}': {value!r} ({exc})") from None
    return out


# ----------------------------------------------------------------- fields


def write_field_csv(path, field: ScalarField) -> None:
    grid = field.grid
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={grid.n} N={grid.N}\n")
        w = csv.writer(fh)
        w.writerow(["i", "value"] if grid.n == 1 else ["i", "j", "value"])
        for idx in np.ndindex(*grid.shape):
            w.writerow([*idx, repr(float(field.values[idx]))])


def read_field_csv(path) -> ScalarField:
    with open(path, newline="") as fh:
        header = fh.readline()
        meta = dict(tok.split("=") for tok in header.lstrip("#").split())
        grid = TorusGrid(int(meta["n"]), int(meta["N"]))
        rows = list(csv.reader(fh))[1:]
    vals = np.full(grid.shape, np.nan)
    for row in rows:
        idx = tuple(int(x) for x in row[:-1])
        vals[idx] = float(row[-1])
    return grid.field(vals)


def read_coordinate_matrix(path) -> np.ndarray:
    """Header ``rows cols nnz`` then ``i j value`` lines, 0-indexed; dense result."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    rows, cols, nnz = (int(x) for x in lines[0].split())
    body = lines[1:]
    if len(body) != nnz:
        raise ValueError(f"expected {nnz} entries, found {len(body)}")
    if nnz == 0:
        return np.zeros((rows, cols))
    data = np.array([ln.replace(",", " ").split() for ln in body], dtype=float)
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=(rows, cols)).toarray()


def write_coordinate_matrix(path, matrix) -> None:
    m = sp.coo_matrix(np.asarray(matrix))
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i, j, v in zip(m.row, m.col, m.data):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


def read_mass(path) -> np.ndarray:
    vals = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    return np.array([float(v) for v in vals if v])


# ---------------------------------------------------------------- dumps


def write_kernel_csv(path, kernel, alpha: float, t: float, K: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# source={kernel.source} alpha={alpha} t={t} K={K}\n")
        w = csv.writer(fh)
        w.writerow(["node", "value"])
        for i, v in enumerate(kernel.values):
            w.writerow([i, repr(float(v))])


def write_measure_csv(path, measure) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# alpha={measure.alpha} t={measure.t} lam_max={measure.lam_max} "
                 f"residual={measure.residual!r}\n")
        w = csv.writer(fh)
        w.writerow(["node", "weight"])
        for s, wt in zip(measure.nodes, measure.weights):
            w.writerow([repr(float(s)), repr(float(wt))])


def write_boundary_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["boundary_index", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float)):
            w.writerow([i, repr(float(v))])


def read_boundary_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    rows.sort(key=lambda r: int(r[0]))
    return np.array([float(r[1]) for r in rows])


def write_hopf_csv(path, rows: Iterable[dict]) -> None:
    cols = ["run", "m", "max_w", "min_normal_derivative", "min_laplacian", "verdict"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in cols})


def write_trajectory_csv(path, times, norms: dict) -> None:
    keys = list(norms)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"norm_p{k}" for k in keys])
        for i, t in enumerate(times):
            w.writerow([repr(float(t))] + [repr(float(norms[k][i])) for k in keys])


# ----------------------------------------------------------------- ledger


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


class Ledger:
    """Append-only list of check rows, written as CSV with a timestamp line."""

    def __init__(self):
        self.rows: list[dict] = []

    def add(self, module: str, operation: str, parameters: dict, report) -> None:
        params = ";".join(f"{k}={v}" for k, v in parameters.items())
        self.rows.append({"module": module, "operation": operation, "parameters": params,
                          "max_violation": float(report.max_violation),
                          "tolerance": float(report.tolerance), "verdict": report.verdict})

    @property
    def all_passed(self) -> bool:
        return all(r["verdict"] == "pass" for r in self.rows)

    def write(self, path) -> None:
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        with open(path, "w", newline="") as fh:
            fh.write(f"# generated {stamp}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LEDGER_COLUMNS)
            for r in self.rows:
                w.writerow([r["module"], r["operation"], r["parameters"],
                            _fmt(r["max_violation"]), _fmt(r["tolerance"]), r["verdict"]])

    def summary(self) -> dict:
        fails = [r for r in self.rows if r["verdict"] != "pass"]
        worst = max(self.rows, key=lambda r: r["max_violation"] - r["tolerance"], default=None)
        return {"checks": len(self.rows), "passed": len(self.rows) - len(fails),
                "failed": len(fails), "worst": worst}

    def write_summary(self, path, extra: dict | None = None) -> None:
        data = self.summary()
        if extra:
            data.update(extra)
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")
