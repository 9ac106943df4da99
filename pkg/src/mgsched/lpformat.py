"""Plain-text LP interchange format plus a simple solution-file schema.

The exported file follows the widespread CPLEX-style LP layout so third-party
solvers can cross-check an instance:

    \\ comment lines
    Maximize
     obj: 0.11 sell_11_1 - 0.1 buy_11_1
    Subject To
     c0: pv_1_1 + wt_1_1 + bat_1_1 + buy_11_1 - sell_11_1 = 2
    Bounds
     0 <= pv_1_1 <= 5
    Binary
     xg_1_1 w_1
    End

Solution files are CSV with a `variable,value` header; variable names match
the export. Both formats are versioned through the leading comment.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import SchemaError
from .lp import LinearProgram
from .model import MonthlyInstance

FORMAT_TAG = "mgsched-lp v1"


def _terms(cols: np.ndarray, coefs: np.ndarray, names) -> str:
    parts = []
    for col, coef in zip(cols, coefs):
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {repr(abs(float(coef)))} {names(int(col))}")
    if not parts:
        return "0"
    first = parts[0]
    first = first[2:] if first.startswith("+") else "- " + first[2:]
    return " ".join([first] + parts[1:])


def write_lp(path: str | Path, instance: MonthlyInstance) -> Path:
    """Export an instance's MIP in the text LP format."""
    path = Path(path)
    names = instance.var_name
    a_csr = instance.a_matrix.tocsr()
    lines = [f"\\ {FORMAT_TAG}",
             f"\\ month={instance.month} hours={instance.hours} "
             f"architecture={instance.architecture}",
             "Maximize"]
    obj_cols = np.nonzero(instance.c)[0]
    lines.append(" obj: " + _terms(obj_cols, instance.c[obj_cols], names))
    lines.append("Subject To")
    sense_txt = {"<": "<=", "=": "=", ">": ">="}
    for i in range(instance.nrows):
        s, e = a_csr.indptr[i], a_csr.indptr[i + 1]
        expr = _terms(a_csr.indices[s:e], a_csr.data[s:e], names)
        lines.append(f" c{i}: {expr} {sense_txt[instance.senses[i]]} "
                     f"{repr(float(instance.rhs[i]))}")
    lines.append("Bounds")
    for j in range(instance.ncols):
        lines.append(f" {repr(float(instance.lb[j]))} <= {names(j)} "
                     f"<= {repr(float(instance.ub[j]))}")
    lines.append("Binary")
    bin_names = " ".join(names(c) for c in instance.binary_cols)
    lines.append(f" {bin_names}")
    lines.append("End")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_lp(path: str | Path) -> tuple[LinearProgram, list[str], list[int]]:
    """Parse a file written by write_lp.

    Returns (program, variable names in column order, binary column indices).
    """
    path = Path(path)
    section = None
    obj_expr: list[str] = []
    rows: list[tuple[list[str], str, float]] = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: list[str] = []
    order: list[str] = []
    seen: set[str] = set()

    def note(name: str):
        if name not in seen:
            seen.add(name)
            order.append(name)

    for raw in path.read_text().splitlines():
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("maximize", "minimize"):
            if low == "minimize":
                raise SchemaError(f"{path}: only maximize problems are supported")
            section = "obj"
            continue
        if low in ("subject to", "st", "s.t."):
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binary", "binaries", "general"):
            section = "binary"
            continue
        if low == "end":
            section = None
            continue
        if section == "obj":
            expr = line.split(":", 1)[1] if ":" in line else line
            obj_expr.extend(expr.split())
        elif section == "rows":
            expr = line.split(":", 1)[1] if ":" in line else line
            tokens = expr.split()
            op = None
            for cand in ("<=", ">=", "="):
                if cand in tokens:
                    op = cand
                    break
            if op is None:
                raise SchemaError(f"{path}: constraint without sense: {line}")
            k = tokens.index(op)
            rows.append((tokens[:k], {"<=": "<", ">=": ">", "=": "="}[op],
                         float(tokens[k + 1])))
        elif section == "bounds":
            tokens = line.split()
            if len(tokens) != 5 or tokens[1] != "<=" or tokens[3] != "<=":
                raise SchemaError(f"{path}: unsupported bounds line: {line}")
            bounds[tokens[2]] = (float(tokens[0]), float(tokens[4]))
            note(tokens[2])
        elif section == "binary":
            for name in line.split():
                binaries.append(name)

    def parse_terms(tokens: list[str]) -> dict[str, float]:
        # token stream of [sign] [coefficient] name groups
        out: dict[str, float] = {}
        sign = 1.0
        coef: float | None = None
        for tok in tokens:
            if tok == "+":
                sign, coef = 1.0, None
            elif tok == "-":
                sign, coef = -1.0, None
            elif _is_number(tok):
                coef = float(tok)
            else:
                value = sign * (1.0 if coef is None else coef)
                out[tok] = out.get(tok, 0.0) + value
                note(tok)
                sign, coef = 1.0, None
        if coef not in (None, 0.0):
            raise SchemaError(f"dangling coefficient {coef} in expression")
        return out

    obj = parse_terms(obj_expr)
    row_terms = [(parse_terms(toks), sense, rhs) for toks, sense, rhs in rows]
    index = {name: j for j, name in enumerate(order)}
    n = len(order)
    c = np.zeros(n)
    for name, coef in obj.items():
        c[index[name]] = coef
    lb = np.zeros(n)
    ub = np.zeros(n)
    for name, (lo, hi) in bounds.items():
        lb[index[name]] = lo
        ub[index[name]] = hi
    m = len(row_terms)
    ri, ci, vv = [], [], []
    senses = np.empty(m, dtype="U1")
    rhs_arr = np.zeros(m)
    for i, (terms, sense, rhs) in enumerate(row_terms):
        senses[i] = sense
        rhs_arr[i] = rhs
        for name, coef in terms.items():
            ri.append(i)
            ci.append(index[name])
            vv.append(coef)
    a = sp.csr_matrix((vv, (ri, ci)), shape=(m, n)) if m else None
    lp = LinearProgram(c=c, lb=lb, ub=ub, a_matrix=a, senses=senses, rhs=rhs_arr)
    missing = [b for b in binaries if b not in index]
    if missing:
        raise SchemaError(f"{path}: binary names not declared: {missing[:5]}")
    return lp, order, [index[b] for b in binaries]


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def write_solution_csv(path: str | Path, instance: MonthlyInstance,
                       x: np.ndarray) -> Path:
    """Persist a solution vector as `variable,value` rows (export name order).

    The month's starting state of charge is carried along as extra
    `initial_soc_<z>` rows so the file is self-contained for validation.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable", "value"])
        for z in range(instance.n_smg):
            writer.writerow([f"initial_soc_{z + 1}",
                             repr(float(instance.initial_soc[z]))])
        for j in range(instance.ncols):
            writer.writerow([instance.var_name(j), repr(float(x[j]))])
    return path


def read_solution_values(path: str | Path) -> dict[str, float]:
    """Read a `variable,value` solution file into a name -> value map."""
    path = Path(path)
    values: dict[str, float] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["variable", "value"]:
            raise SchemaError(f"{path}: expected header 'variable,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}:{lineno}: expected 2 columns")
            try:
                values[row[0].strip()] = float(row[1])
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: bad value {row[1]!r}") from None
    return values


def read_solution_csv(path: str | Path, instance: MonthlyInstance) -> np.ndarray:
    """Read a solution file back into a vector aligned with the instance."""
    values = read_solution_values(path)
    x = np.zeros(instance.ncols)
    missing = []
    for j in range(instance.ncols):
        name = instance.var_name(j)
        if name in values:
            x[j] = values[name]
        else:
            missing.append(name)
    if missing:
        raise SchemaError(f"{path}: solution lacks {len(missing)} variables "
                          f"(first: {missing[:5]})")
    return x
