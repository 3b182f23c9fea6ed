#!/usr/bin/env python3
"""Solve a CPLEX-LP file with SciPy's MILP interface and emit JSON.

Reads the LP dialect written by the survsched exporter (Minimize, Subject To,
Bounds, Binary, End) and solves it with scipy.optimize.milp. The result is a
JSON document: {"status": ..., "objective": ..., "values": {name: value}}.

Usage: lp_solve.py MODEL.lp [--out SOLUTION.json] [--time-limit SEC] [--gap G]
"""

import argparse
import json
import re
import sys

import numpy as np
from scipy import sparse
from scipy.optimize import LinearConstraint, Bounds, milp

TERM_RE = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)(?:\s+(\S+))?")


def tokenize_terms(expr):
    """Yield (coefficient, name-or-None) pairs from a linear expression."""
    pos = 0
    expr = expr.strip()
    while pos < len(expr):
        m = TERM_RE.match(expr, pos)
        if not m:
            raise ValueError(f"cannot parse term at: {expr[pos:pos + 40]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coeff = sign * float(m.group(2))
        yield coeff, m.group(3)
        pos = m.end()
        while pos < len(expr) and expr[pos] == " ":
            pos += 1


def parse_lp(path):
    section = None
    objective = {}
    obj_const = 0.0
    rows = []  # (terms: dict, op, rhs)
    bounds = {}  # name -> [lb, ub]
    binaries = set()
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("\\"):
                continue
            low = line.lower()
            if low in ("minimize", "maximize"):
                section = "obj"
                sense = 1.0 if low == "minimize" else -1.0
                continue
            if low == "subject to":
                section = "rows"
                continue
            if low == "bounds":
                section = "bounds"
                continue
            if low in ("binary", "binaries", "general", "generals"):
                section = "ints"
                continue
            if low == "end":
                break

            if section == "obj":
                body = line.split(":", 1)[1] if ":" in line else line
                for coeff, name in tokenize_terms(body):
                    if name is None:
                        obj_const += coeff
                    else:
                        objective[name] = objective.get(name, 0.0) + coeff
            elif section == "rows":
                name, body = line.split(":", 1)
                m = re.search(r"(<=|>=|=)", body)
                if not m:
                    raise ValueError(f"row {name} has no comparison operator")
                op = m.group(1)
                lhs, rhs = body[: m.start()], float(body[m.end():])
                terms = {}
                for coeff, vname in tokenize_terms(lhs):
                    if vname is None:
                        rhs -= coeff
                    else:
                        terms[vname] = terms.get(vname, 0.0) + coeff
                rows.append((terms, op, rhs))
            elif section == "bounds":
                if line.endswith(" free"):
                    bounds[line[:-5].strip()] = [-np.inf, np.inf]
                    continue
                parts = line.split("<=")
                if len(parts) == 3:
                    bounds[parts[1].strip()] = [float(parts[0]), float(parts[2])]
                elif len(parts) == 2:
                    bounds[parts[0].strip()] = [-np.inf, float(parts[1])]
                elif ">=" in line:
                    name, lb = line.split(">=")
                    bounds[name.strip()] = [float(lb), np.inf]
                elif "=" in line:
                    name, val = line.split("=")
                    bounds[name.strip()] = [float(val), float(val)]
                else:
                    raise ValueError(f"cannot parse bound line: {line!r}")
            elif section == "ints":
                binaries.update(line.split())

    names = sorted(set(objective) | set(bounds) | binaries
                   | {n for terms, _, _ in rows for n in terms})
    return sense, objective, obj_const, rows, bounds, binaries, names


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("model")
    ap.add_argument("--out", default=None)
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--gap", type=float, default=1e-9)
    args = ap.parse_args()

    sense, objective, obj_const, rows, bounds, binaries, names = parse_lp(args.model)
    idx = {n: i for i, n in enumerate(names)}
    n = len(names)

    c = np.zeros(n)
    for name, coeff in objective.items():
        c[idx[name]] = sense * coeff

    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for name in binaries:
        lb[idx[name]], ub[idx[name]] = 0.0, 1.0
    for name, (blo, bhi) in bounds.items():
        lb[idx[name]], ub[idx[name]] = blo, bhi

    integrality = np.zeros(n)
    for name in binaries:
        integrality[idx[name]] = 1

    data, ri, ci, clo, chi = [], [], [], [], []
    for r, (terms, op, rhs) in enumerate(rows):
        for name, coeff in terms.items():
            data.append(coeff)
            ri.append(r)
            ci.append(idx[name])
        if op == "<=":
            clo.append(-np.inf)
            chi.append(rhs)
        elif op == ">=":
            clo.append(rhs)
            chi.append(np.inf)
        else:
            clo.append(rhs)
            chi.append(rhs)
    constraints = []
    if rows:
        a = sparse.csc_matrix((data, (ri, ci)), shape=(len(rows), n))
        constraints = [LinearConstraint(a, np.array(clo), np.array(chi))]

    options = {"mip_rel_gap": args.gap, "presolve": True}
    if args.time_limit is not None:
        options["time_limit"] = args.time_limit
    res = milp(c, constraints=constraints, bounds=Bounds(lb, ub),
               integrality=integrality, options=options)

    status = {0: "optimal", 1: "time_limit", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "error")
    out = {"status": status, "objective": None, "values": None}
    if res.x is not None:
        out["objective"] = sense * (float(res.fun) + 0.0) + obj_const
        out["values"] = {name: float(res.x[idx[name]]) for name in names}
    text = json.dumps(out)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
