"""Plain-text cone program format.

::

    # comment lines are ignored
    socp 1
    n <n> m <m>
    cones soc:4 soc:3 zero:1
    p
    <n values>
    f
    <m values>
    F
    <n rows of m values, row-major>

Numbers are written with ``repr`` so a dump/load round trip is exact.
"""
from __future__ import annotations

import os

import numpy as np

from .solver import Cone, ConeProgram


def _row(v):
    return " ".join(repr(float(x)) for x in v)


def dumps(prog: ConeProgram) -> str:
    lines = ["socp 1", f"n {prog.n} m {prog.m}",
             "cones " + " ".join(f"{c.kind}:{c.dim}" for c in prog.cones),
             "p", _row(prog.p), "f", _row(prog.f), "F"]
    lines += [_row(r) for r in prog.F]
    return "\n".join(lines) + "\n"


def loads(text: str) -> ConeProgram:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "socp 1":
        raise ValueError("not a cone program dump (missing 'socp 1' header)")
    head = lines[1].split()
    if len(head) != 4 or head[0] != "n" or head[2] != "m":
        raise ValueError(f"bad size line {lines[1]!r}")
    n, m = int(head[1]), int(head[3])
    tok = lines[2].split()
    if tok[0] != "cones":
        raise ValueError("expected cone list")
    cones = []
    for t in tok[1:]:
        kind, dim = t.split(":")
        cones.append(Cone(kind, int(dim)))

    def vec(label, at, size):
        if lines[at] != label:
            raise ValueError(f"expected section {label!r}, got {lines[at]!r}")
        vals = lines[at + 1].split() if size else []
        if len(vals) != size:
            raise ValueError(f"section {label} has {len(vals)} values, expected {size}")
        return np.array([float(v) for v in vals])

    p = vec("p", 3, n)
    f = vec("f", 5, m)
    if lines[7] != "F":
        raise ValueError("expected section 'F'")
    rows = lines[8:8 + n]
    if len(rows) != n:
        raise ValueError("F has too few rows")
    F = np.array([[float(v) for v in r.split()] for r in rows]).reshape(n, m)
    return ConeProgram(p, f, F, tuple(cones))


def dump_program(prog: ConeProgram, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(prog))


def load_program(path: str | os.PathLike) -> ConeProgram:
    with open(path) as fh:
        return loads(fh.read())
