"""Command-line entry point: `cma <mode> --config <file> [--out <dir>] [--seed <u64>]`.

Config files are `key = value` lines with `#` comments; unknown keys are
rejected with their line number.  Every run echoes its effective
configuration (defaults applied) before computing, both to stdout and to
<out>/run.log, and the echo reparses to the identical configuration.

Exit codes: 0 converged/pass, 2 certified failure, 3 iteration limit or
divergence, 4 I/O or validation errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .envelopes import (
    EnvelopeParams,
    balayage,
    inf_convolution,
    psh_projection,
    sup_convolution,
)
from .errors import (
    CmaError,
    IterationLimitError,
    NonCauchyError,
    ParseError,
    ValidationError,
)
from .hermitian import HermitianForm
from .io import load_grid, save_grid, write_csv
from .operator import DensityField, EquationData
from .solvers import (
    Continuation,
    SolverConfig,
    continuation_to_zero,
    solve_compact,
    solve_dirichlet,
)
from .verify import (
    check_subsolution,
    check_supersolution,
    comparison_harness,
    stability_diagnostic,
)

MODES = (
    "solve-dirichlet",
    "solve-compact",
    "continue-to-zero",
    "envelope-sup",
    "envelope-inf",
    "project-psh",
    "balayage",
    "check-sub",
    "check-super",
    "compare",
    "stability",
)

# key -> (kind, default); kinds: str, path, float, int, bool, float_or_auto,
# int_list.  None defaults mean "unset".
_KEYS = {
    "mode": ("str", None),
    "out": ("path", "."),
    "seed": ("int", 0),
    "log_wall_ms": ("bool", False),
    "input": ("path", None),
    "input2": ("path", None),
    "density": ("path", None),
    "density2": ("path", None),
    "boundary": ("path", None),
    "epsilon": ("float", None),
    "omega": ("str", None),
    "clip_level": ("float", None),
    "scheme": ("str", "policy_iteration"),
    "tau": ("float_or_auto", "auto"),
    "tol_sup": ("float", 1e-10),
    "max_iter": ("int", 200000),
    "inner_sweeps": ("int", 25),
    "frame_family": ("str", "axes+diagonals"),
    "weight_levels": ("int", 9),
    "kappa_min": ("float", 1.0 / 16.0),
    "kappa_max": ("float", 16.0),
    "epsilon0": ("float", 1.0),
    "factor": ("float", 0.5),
    "cauchy_tol": ("float", 1e-9),
    "max_continuation_steps": ("int", 60),
    "delta": ("float", 0.1),
    "psd_floor": ("float", None),
    "tol": ("float", 1e-8),
    "p": ("float", 2.0),
    "b_start": ("int_list", None),
    "b_width": ("int_list", None),
}

_REQUIRED = {
    "solve-dirichlet": ("density", "boundary"),
    "solve-compact": ("density",),
    "continue-to-zero": ("density",),
    "envelope-sup": ("input",),
    "envelope-inf": ("input",),
    "project-psh": ("input",),
    "balayage": ("input", "density", "b_start", "b_width"),
    "check-sub": ("input", "density"),
    "check-super": ("input", "density"),
    "compare": ("input", "input2", "density"),
    "stability": ("input", "input2", "density", "density2"),
}

_RANGE_CHECKS = {
    "tol_sup": lambda v: v > 0.0,
    "max_iter": lambda v: v >= 1,
    "inner_sweeps": lambda v: v >= 1,
    "weight_levels": lambda v: v >= 1,
    "kappa_min": lambda v: v > 0.0,
    "kappa_max": lambda v: v > 0.0,
    "epsilon": lambda v: v >= 0.0,
    "epsilon0": lambda v: v > 0.0,
    "factor": lambda v: 0.0 < v < 1.0,
    "cauchy_tol": lambda v: v > 0.0,
    "max_continuation_steps": lambda v: v >= 1,
    "delta": lambda v: v > 0.0,
    "tol": lambda v: v > 0.0,
    "p": lambda v: v > 1.0,
    "seed": lambda v: 0 <= v < 2**64,
    "clip_level": lambda v: v > 0.0,
    "tau": lambda v: v == "auto" or v > 0.0,
}


@dataclass
class RunConfig:
    """Fully validated run configuration with defaults applied."""

    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name)

    def echo_lines(self):
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if val is None:
                continue
            if isinstance(val, bool):
                txt = "true" if val else "false"
            elif isinstance(val, float):
                txt = repr(val)
            elif isinstance(val, (list, tuple)):
                txt = ",".join(str(i) for i in val)
            else:
                txt = str(val)
            lines.append("%s = %s" % (key, txt))
        return lines


def _convert(key, raw, line_no):
    kind, _ = _KEYS[key]
    raw = raw.strip()
    try:
        if kind == "str" or kind == "path":
            val = raw
        elif kind == "float":
            val = float(raw)
        elif kind == "int":
            val = int(raw)
        elif kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                val = True
            elif raw.lower() in ("false", "0", "no"):
                val = False
            else:
                raise ValueError("expected boolean")
        elif kind == "float_or_auto":
            val = "auto" if raw == "auto" else float(raw)
        elif kind == "int_list":
            val = tuple(int(t) for t in raw.split(","))
        else:  # pragma: no cover
            raise ValueError("bad kind")
    except ValueError as exc:
        raise ParseError("key %r: %s" % (key, exc), line=line_no)
    check = _RANGE_CHECKS.get(key)
    if check is not None and val is not None and not check(val):
        raise ParseError("key %r: value %r out of range" % (key, raw), line=line_no)
    return val


def parse_config(text, mode=None) -> RunConfig:
    """Parse a key=value config; `mode` comes from the command line.

    Unknown keys, type mismatches, and range violations raise ParseError
    with the offending line number.
    """
    values = {k: d for k, (_, d) in _KEYS.items()}
    for i, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=i)
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ParseError("unknown key %r" % key, line=i)
        values[key] = _convert(key, raw, i)
    if mode is not None:
        if values["mode"] is not None and values["mode"] != mode:
            raise ParseError(
                "config mode %r conflicts with command-line mode %r"
                % (values["mode"], mode)
            )
        values["mode"] = mode
    if values["mode"] is None:
        raise ParseError("no mode given (command line or config)")
    if values["mode"] not in MODES:
        raise ParseError("unknown mode %r" % values["mode"])
    if values["scheme"] not in ("euler", "policy_iteration", "perron_sweep"):
        raise ParseError("unknown scheme %r" % values["scheme"])
    if values["frame_family"] not in ("axes", "axes+diagonals"):
        raise ParseError("unknown frame family %r" % values["frame_family"])
    return RunConfig(values=values)


def _check_inputs(cfg: RunConfig):
    """Required keys present and referenced files readable, before compute."""
    for req in _REQUIRED[cfg.mode]:
        if cfg.values[req] is None:
            raise ValidationError(
                "mode %r requires key %r" % (cfg.mode, req)
            )
    for key in ("input", "input2", "density", "density2", "boundary"):
        path = cfg.values[key]
        if path is not None and not os.path.isfile(path):
            raise ValidationError("input file %r does not exist" % path)


def _omega_from_config(cfg, n, default):
    raw = cfg.omega
    if raw is None:
        raw = default
    if raw == "identity":
        return HermitianForm.identity(n)
    if raw == "zero":
        return HermitianForm.zero(n)
    try:
        parts = [float(t) for t in raw.split(",")]
    except ValueError:
        raise ValidationError("cannot parse omega value %r" % raw)
    if len(parts) == 1:
        if parts[0] < 0.0:
            raise ValidationError("scalar omega must be nonnegative")
        return HermitianForm.identity(n, parts[0])
    if len(parts) != 2 * n * n:
        raise ValidationError(
            "omega entry list must hold %d re,im values" % (2 * n * n)
        )
    mat = np.array(parts[0::2]) + 1j * np.array(parts[1::2])
    return HermitianForm.from_matrix(mat.reshape(n, n))


def _solver_config(cfg, with_continuation=False):
    cont = None
    if with_continuation:
        cont = Continuation(
            epsilon_0=cfg.epsilon0,
            factor=cfg.factor,
            cauchy_tol=cfg.cauchy_tol,
            max_steps=cfg.max_continuation_steps,
        )
    return SolverConfig(
        scheme=cfg.scheme,
        tau=cfg.tau,
        tol_sup=cfg.tol_sup,
        max_iter=cfg.max_iter,
        inner_sweeps=cfg.inner_sweeps,
        frame_family=cfg.frame_family,
        weight_levels=cfg.weight_levels,
        kappa_min=cfg.kappa_min,
        kappa_max=cfg.kappa_max,
        continuation=cont,
    )


def _load_density(cfg, path, domain):
    g = load_grid(path, expect={"kind": domain.kind, "shape": tuple(domain.shape)})
    f = DensityField(domain, g.values)
    if cfg.clip_level is not None:
        f = f.clipped(cfg.clip_level)
    return f


def _equation(cfg, domain, default_omega, default_epsilon):
    f = _load_density(cfg, cfg.density, domain)
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon
    return EquationData(
        epsilon=eps,
        density=f,
        omega=_omega_from_config(cfg, domain.n, default_omega),
    )


class _Log:
    def __init__(self, path):
        self.lines = []
        self.path = path

    def add(self, text):
        self.lines.append(text)
        print(text)

    def flush(self):
        with open(self.path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.lines) + "\n")


def run(cfg: RunConfig) -> int:
    """Execute one configured run; returns the process exit code."""
    out_dir = cfg.out
    os.makedirs(out_dir, exist_ok=True)
    log = _Log(os.path.join(out_dir, "run.log"))
    log.add("# effective configuration")
    for line in cfg.echo_lines():
        log.add(line)
    threads = os.environ.get("CMA_THREADS", "0")
    try:
        cap = int(threads)
        if cap < 0:
            raise ValueError
    except ValueError:
        print("invalid CMA_THREADS=%r" % threads, file=sys.stderr)
        return 4
    log.add("# workers = %d (0 = auto); compute is single-threaded" % cap)

    t0 = time.monotonic()
    try:
        _check_inputs(cfg)
        code = _dispatch(cfg, log)
    except (ParseError, ValidationError, OSError) as exc:
        log.add("error = %s" % exc)
        log.flush()
        print("error: %s" % exc, file=sys.stderr)
        return 4
    except (IterationLimitError, NonCauchyError) as exc:
        log.add("error = %s" % exc)
        log.flush()
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except CmaError as exc:
        log.add("error = %s" % exc)
        log.flush()
        print("error: %s" % exc, file=sys.stderr)
        return 4
    log.flush()
    print("# wall_seconds = %.3f" % (time.monotonic() - t0))
    return code


def _write_solution(cfg, log, sol, report):
    out_grid = os.path.join(cfg.out, "out.grid")
    save_grid(sol, out_grid)
    csv_path = os.path.join(cfg.out, "convergence.csv")
    write_csv(csv_path, report, log_wall_ms=cfg.log_wall_ms)
    log.add("termination = %s" % report.termination)
    log.add("iterations = %d" % report.iterations)
    if report.residual_sup:
        log.add("residual_sup = %.17g" % report.residual_sup[-1])
    log.add("output = %s" % out_grid)


def _dispatch(cfg: RunConfig, log) -> int:
    mode = cfg.mode
    if mode == "solve-dirichlet":
        gamma = load_grid(cfg.boundary)
        domain = gamma.domain
        if domain.kind != "box":
            raise ValidationError("solve-dirichlet needs a box boundary grid")
        eq = _equation(cfg, domain, "zero", 0.0)
        sol, report = solve_dirichlet(
            domain, eq, boundary=gamma, cfg=_solver_config(cfg)
        )
        _write_solution(cfg, log, sol, report)
        return 0 if report.termination == "converged" else 3

    if mode == "solve-compact":
        probe = load_grid(cfg.density)
        domain = probe.domain
        if domain.kind != "torus":
            raise ValidationError("solve-compact needs a torus density grid")
        eq = _equation(cfg, domain, "identity", 1.0)
        sol, report = solve_compact(eq, _solver_config(cfg))
        _write_solution(cfg, log, sol, report)
        return 0 if report.termination == "converged" else 3

    if mode == "continue-to-zero":
        probe = load_grid(cfg.density)
        domain = probe.domain
        eq = _equation(cfg, domain, "identity", 0.0)
        if eq.epsilon != 0.0:
            raise ValidationError("continue-to-zero requires epsilon = 0")
        sol, report = continuation_to_zero(eq, _solver_config(cfg, True))
        _write_solution(cfg, log, sol, report)
        log.add("continuation_steps = %d" % report.extra["continuation_steps"])
        return 0

    if mode in ("envelope-sup", "envelope-inf"):
        u = load_grid(cfg.input)
        fn = sup_convolution if mode == "envelope-sup" else inf_convolution
        w = fn(u, cfg.delta)
        out_grid = os.path.join(cfg.out, "out.grid")
        save_grid(w, out_grid)
        log.add("output = %s" % out_grid)
        return 0

    if mode == "project-psh":
        h = load_grid(cfg.input)
        domain = h.domain
        f = DensityField.constant(domain, 0.0)
        eq = EquationData(
            epsilon=0.0, density=f,
            omega=_omega_from_config(cfg, domain.n, "identity"),
        )
        params = EnvelopeParams(
            delta=cfg.delta, max_iter=cfg.max_iter, tol=cfg.tol_sup,
            psd_floor=cfg.psd_floor,
        )
        scfg = _solver_config(cfg)
        P = psh_projection(h, eq, params, A_set=scfg.direction_set(domain.n))
        out_grid = os.path.join(cfg.out, "out.grid")
        save_grid(P, out_grid)
        log.add("output = %s" % out_grid)
        return 0

    if mode == "balayage":
        u = load_grid(cfg.input)
        domain = u.domain
        eq = _equation(cfg, domain, "identity" if domain.is_torus else "zero", 1.0)
        if len(cfg.b_start) != domain.num_axes or len(cfg.b_width) != domain.num_axes:
            raise ValidationError(
                "b_start/b_width need one entry per lattice axis"
            )
        B = tuple(zip(cfg.b_start, cfg.b_width))
        scfg = _solver_config(cfg)
        params = EnvelopeParams(
            delta=cfg.delta, max_iter=cfg.max_iter, tol=cfg.tol_sup
        )
        U = balayage(u, B, eq, scfg.direction_set(domain.n), params)
        out_grid = os.path.join(cfg.out, "out.grid")
        save_grid(U, out_grid)
        log.add("output = %s" % out_grid)
        return 0

    if mode in ("check-sub", "check-super"):
        u = load_grid(cfg.input)
        domain = u.domain
        eq = _equation(cfg, domain, "identity" if domain.is_torus else "zero", 1.0)
        scfg = _solver_config(cfg)
        check = check_subsolution if mode == "check-sub" else check_supersolution
        cert = check(u, eq, scfg.direction_set(domain.n), tol=cfg.tol)
        log.add(cert.serialize())
        return 0 if cert.passed else 2

    if mode == "compare":
        u = load_grid(cfg.input)
        v = load_grid(cfg.input2, expect={"shape": tuple(u.domain.shape)})
        domain = u.domain
        eq = _equation(cfg, domain, "identity" if domain.is_torus else "zero", 1.0)
        scfg = _solver_config(cfg)
        try:
            cert = comparison_harness(
                u, v, eq, scfg.direction_set(domain.n), tol=cfg.tol
            )
        except CmaError as exc:
            log.add("certificate kind=comparison pass=false invalid_input=%s" % exc)
            return 2
        log.add(cert.serialize())
        return 0 if cert.passed else 2

    if mode == "stability":
        phi1 = load_grid(cfg.input)
        phi2 = load_grid(cfg.input2, expect={"shape": tuple(phi1.domain.shape)})
        f1 = _load_density(cfg, cfg.density, phi1.domain)
        g2 = load_grid(cfg.density2, expect={"shape": tuple(phi1.domain.shape)})
        f2 = DensityField(phi1.domain, g2.values)
        rep = stability_diagnostic(phi1, phi2, f1, f2, p=cfg.p)
        log.add(rep.summary())
        log.add(
            "stability_detail sup12=%.17g l1_12=%.17g sup21=%.17g l1_21=%.17g "
            "lp_f1=%.17g lp_f2=%.17g gamma=%.17g"
            % (
                rep.sup_diff_12, rep.l1_diff_12, rep.sup_diff_21,
                rep.l1_diff_21, rep.lp_f1, rep.lp_f2, rep.gamma,
            )
        )
        return 0

    raise ValidationError("unhandled mode %r" % mode)  # pragma: no cover


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cma",
        description="Monotone Bellman-form solver and verifier for degenerate "
        "complex Monge-Ampere equations",
    )
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", help="output directory (default .)")
    parser.add_argument("--seed", type=int, help="64-bit reproducibility seed")
    args = parser.parse_args(argv)
    text = ""
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print("error: %s" % exc, file=sys.stderr)
            return 4
    try:
        cfg = parse_config(text, mode=args.mode)
        if args.out is not None:
            cfg.values["out"] = args.out
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ParseError("--seed out of range")
            cfg.values["seed"] = args.seed
    except ParseError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 4
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
