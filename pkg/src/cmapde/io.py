"""Canonical text formats: grid files and convergence CSV logs.

Grid file, bit-exact at 17 significant digits:

    CMA-GRID v1 kind=<torus|box> n=<n> shape=<m1,...,m2n> h=<spacing>
    <value per line, row-major>

Box files list the interior block first, then a BOUNDARY separator line,
then the ring values in row-major order of the full lattice.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError, ValidationError
from .grid import Domain, GridFunction

_MAGIC = "CMA-GRID v1"


def _fmt(v):
    return "%.17g" % v


def save_grid(g: GridFunction, path):
    dom = g.domain
    header = "%s kind=%s n=%d shape=%s h=%s" % (
        _MAGIC,
        dom.kind,
        dom.n,
        ",".join(str(m) for m in dom.shape),
        _fmt(dom.h),
    )
    lines = [header]
    if dom.kind == "torus":
        lines.extend(_fmt(v) for v in g.values.ravel())
    else:
        interior = g.values[tuple(slice(1, m - 1) for m in dom.shape)]
        lines.extend(_fmt(v) for v in interior.ravel())
        lines.append("BOUNDARY")
        lines.extend(_fmt(v) for v in g.values[dom.boundary_mask()])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(line):
    parts = line.strip().split()
    if len(parts) != 6 or " ".join(parts[:2]) != _MAGIC:
        raise ParseError("not a %s file" % _MAGIC, line=1)
    fields = {}
    for tok in parts[2:]:
        if "=" not in tok:
            raise ParseError("malformed header token %r" % tok, line=1)
        k, v = tok.split("=", 1)
        fields[k] = v
    try:
        kind = fields["kind"]
        n = int(fields["n"])
        shape = tuple(int(s) for s in fields["shape"].split(","))
        h = float(fields["h"])
    except (KeyError, ValueError) as exc:
        raise ParseError("bad header: %s" % exc, line=1)
    return kind, n, shape, h


def load_grid(path, expect=None) -> GridFunction:
    """Read a grid file; `expect` optionally pins header fields.

    `expect` maps any of kind/n/shape/h to required values; mismatches raise
    ParseError so callers can fail fast on inconsistent inputs.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty grid file", line=1)
    kind, n, shape, h = _parse_header(lines[0])
    if expect:
        got = {"kind": kind, "n": n, "shape": tuple(shape), "h": h}
        for key, want in expect.items():
            if key == "h":
                if abs(got["h"] - want) > 1e-15 * max(1.0, abs(want)):
                    raise ParseError(
                        "header h=%r does not match expected %r" % (got["h"], want)
                    )
            elif got[key] != want:
                raise ParseError(
                    "header %s=%r does not match expected %r" % (key, got[key], want)
                )
    try:
        domain = Domain(kind=kind, n=n, shape=shape, h=h)
    except ValidationError as exc:
        raise ParseError("invalid domain in header: %s" % exc, line=1)

    values = np.empty(domain.num_points)
    if kind == "torus":
        expected = domain.num_points
        body = lines[1:]
        if len(body) != expected:
            raise ParseError(
                "expected %d values, found %d" % (expected, len(body)),
                line=len(lines),
            )
        for i, tok in enumerate(body):
            values[i] = _parse_value(tok, i + 2)
        arr = values.reshape(domain.shape)
    else:
        inner_shape = tuple(m - 2 for m in domain.shape)
        n_inner = int(np.prod(inner_shape))
        bmask = domain.boundary_mask()
        n_ring = int(bmask.sum())
        body = lines[1:]
        if len(body) != n_inner + 1 + n_ring:
            raise ParseError(
                "expected %d interior + BOUNDARY + %d ring lines, found %d"
                % (n_inner, n_ring, len(body)),
                line=len(lines),
            )
        if body[n_inner] != "BOUNDARY":
            raise ParseError("missing BOUNDARY separator", line=n_inner + 2)
        inner = np.empty(n_inner)
        for i in range(n_inner):
            inner[i] = _parse_value(body[i], i + 2)
        ring = np.empty(n_ring)
        for i in range(n_ring):
            ring[i] = _parse_value(body[n_inner + 1 + i], n_inner + 3 + i)
        arr = np.zeros(domain.shape)
        arr[tuple(slice(1, m - 1) for m in domain.shape)] = inner.reshape(inner_shape)
        arr[bmask] = ring
    return GridFunction(domain, arr)


def _parse_value(tok, line_no):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError("bad value %r" % tok, line=line_no)
    if not np.isfinite(v):
        raise ParseError("non-finite value %r" % tok, line=line_no)
    return v


def write_csv(path, report, log_wall_ms=False):
    """Convergence log: iter,residual_sup,residual_l1,tau,wall_ms.

    wall_ms is written as 0 unless log_wall_ms is set: real timings would
    break byte-identical reruns, which the log format guarantees by default.
    """
    rows = ["iter,residual_sup,residual_l1,tau,wall_ms"]
    total = len(report.residual_sup)
    wall_ms = int(report.wall_seconds * 1000.0) if log_wall_ms else 0
    for i in range(total):
        per = wall_ms // total if total else 0
        rows.append(
            "%d,%s,%s,%s,%d"
            % (
                i,
                _fmt(report.residual_sup[i]),
                _fmt(report.residual_l1[i]),
                _fmt(report.tau),
                per,
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
