#!/usr/bin/env python3
"""External MILP backend: solve an MPS file with scipy.optimize.milp (HiGHS).

Usage: scipy_backend.py <model.mps> <solution.out>

Writes `status`, `objective` and one `var <name> <value>` line per column.
"""
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

INF = 1e30


def num(tok):
    v = float(tok)
    if v >= INF:
        return np.inf
    if v <= -INF:
        return -np.inf
    return v


def read_mps(path):
    rows, senses, row_of = [], [], {}
    cols, col_of = [], {}
    obj_name = None
    cost, lo, hi, integer = [], [], [], []
    rhs = {}
    entries = []
    offset = 0.0
    section = None
    in_int = False
    with open(path) as f:
        for line in f:
            line = line.rstrip("\r\n")
            if not line or line.startswith("*"):
                continue
            tok = line.split()
            if not line[0].isspace():
                section = tok[0]
                continue
            if section == "ROWS":
                kind, name = tok
                if kind == "N":
                    obj_name = obj_name or name
                    continue
                row_of[name] = len(rows)
                rows.append(name)
                senses.append(kind)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                name = tok[0]
                if name not in col_of:
                    col_of[name] = len(cols)
                    cols.append(name)
                    cost.append(0.0)
                    lo.append(0.0)
                    hi.append(1.0 if in_int else np.inf)
                    integer.append(1 if in_int else 0)
                j = col_of[name]
                for k in range(1, len(tok) - 1, 2):
                    if tok[k] == obj_name:
                        cost[j] = num(tok[k + 1])
                    else:
                        entries.append((row_of[tok[k]], j, num(tok[k + 1])))
            elif section == "RHS":
                start = 1 if len(tok) % 2 == 1 else 0
                for k in range(start, len(tok) - 1, 2):
                    if tok[k] == obj_name:
                        offset = -num(tok[k + 1])
                    else:
                        rhs[row_of[tok[k]]] = num(tok[k + 1])
            elif section == "BOUNDS":
                kind, j = tok[0], col_of[tok[2]]
                val = num(tok[3]) if len(tok) > 3 else 0.0
                if kind == "UP":
                    hi[j] = val
                elif kind == "LO":
                    lo[j] = val
                elif kind == "FX":
                    lo[j] = hi[j] = val
                elif kind == "FR":
                    lo[j], hi[j] = -np.inf, np.inf
                elif kind == "MI":
                    lo[j] = -np.inf
                elif kind == "PL":
                    hi[j] = np.inf
                elif kind == "BV":
                    lo[j], hi[j], integer[j] = 0.0, 1.0, 1
                else:
                    raise ValueError(f"unsupported bound type {kind}")
            elif section in ("NAME",):
                continue
            else:
                raise ValueError(f"unsupported section {section}")
    m, n = len(rows), len(cols)
    if entries:
        r, c, v = zip(*entries)
    else:
        r, c, v = (), (), ()
    A = coo_matrix((v, (r, c)), shape=(m, n)).tocsr()
    b = np.array([rhs.get(i, 0.0) for i in range(m)])
    rl = np.where([s in ("G", "E") for s in senses], b, -np.inf)
    ru = np.where([s in ("L", "E") for s in senses], b, np.inf)
    return cols, np.array(cost), A, rl, ru, np.array(lo), np.array(hi), np.array(integer), offset


def main():
    if len(sys.argv) != 3:
        print("usage: scipy_backend.py <model.mps> <solution.out>", file=sys.stderr)
        return 2
    cols, c, A, rl, ru, lo, hi, integer, offset = read_mps(sys.argv[1])
    constraints = [LinearConstraint(A, rl, ru)] if A.shape[0] else []
    res = milp(c, constraints=constraints, integrality=integer, bounds=Bounds(lo, hi),
               options={"mip_rel_gap": 1e-9, "presolve": True})
    with open(sys.argv[2], "w") as out:
        if res.status == 2:
            out.write("status infeasible\n")
            return 0
        if res.x is None:
            print(f"backend failed: {res.message}", file=sys.stderr)
            return 1
        out.write("status optimal\n")
        out.write(f"objective {res.fun + offset!r}\n")
        bound = getattr(res, "mip_dual_bound", None)
        if bound is not None and np.isfinite(bound):
            out.write(f"bound {bound + offset!r}\n")
        for name, v in zip(cols, res.x):
            out.write(f"var {name} {float(v)!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
