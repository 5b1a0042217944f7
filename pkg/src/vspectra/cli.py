"""Command-line front end: ``vspectra {reduce,spectrum,transform-qd,verify}``.

Exit codes: 0 success, 2 input error, 3 zero in the spectrum.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bvp import BoundaryConditionError, SpectralDegeneracyError, assemble_inverse, boundary_values, normalize_bc, shift_preserves_bc
from .coefficients import FunctionDescriptor, evaluate, validate_spec
from .config import ConfigError, ProblemConfig, constant, load
from .expressions import ExpressionError
from .quadrature import SampledFunction, make_grid
from .quasideriv import DimensionMismatchError, ShinZettlMatrix, solve_regularized, transform_frames
from .reduction import IneligibleFormError, build_raw, shift, verify_against_classical
from .spectral import check_khromov, completeness_residual, spectrum
from .volterra import read_kernel_csv, resolvent, write_kernel_csv

log = logging.getLogger("vspectra")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3


class InputError(Exception):
    pass


def fmt_complex(z: complex) -> str:
    z = complex(z) + 0.0  # drop negative zeros
    z = complex(z.real + 0.0, z.imag + 0.0)
    return f"{z.real:.12g}{z.imag:+.12g}i"


def _r(v: float) -> str:
    return repr(float(v))


def _write_columns(path: Path, x: np.ndarray, columns: dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["node", "x"]
        for name in columns:
            head += [f"{name}re", f"{name}im"]
        w.writerow(head)
        for i, xi in enumerate(x):
            row = [i, _r(xi)]
            for vals in columns.values():
                row += [_r(vals[i].real), _r(vals[i].imag)]
            w.writerow(row)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_reduce(cfg: ProblemConfig, args) -> int:
    grid = cfg.grid(args.grid_points)
    spec = cfg.spec()
    diag = None
    if spec is not None:
        diag = validate_spec(spec, grid)
        for w_ in diag.warnings:
            _warn(w_)
        if not diag.ok:
            for e in diag.errors:
                print(f"error: {e}", file=sys.stderr)
            return EXIT_INPUT
    form = cfg.form(grid)
    out = args.out_dir
    write_kernel_csv(form.kernel, out / "kernel.csv")
    _write_columns(out / "u.csv", grid.nodes, {f"u{k}": u.values for k, u in enumerate(form.rank_part)})
    header = form.header()
    header["spectral_eligible"] = form.spectral_eligible
    header["kernel_continuous"] = form.kernel_continuous
    header["diagonal_zero"] = form.kernel.diagonal_zero
    if diag is not None:
        header["diagnostics"] = diag.as_dict()
    (out / "form.json").write_text(json.dumps(header, indent=2, sort_keys=True, default=str) + "\n")
    print(f"reduced {cfg.kind} form: m={form.m} n={form.n} -> {out}")
    return EXIT_OK


def _bc_checks(cfg: ProblemConfig, N: int):
    bc = cfg.boundary()
    if bc.N != N:
        raise InputError(f"boundary matrix is {bc.N}x{bc.N}, operator order is {N}")
    if bc.regular_case:
        _warn("regular case out of scope (2l = N)")
    elif not bc.left_dominant:
        if cfg.kind == "raw-kernel":
            raise InputError("raw kernels need l > N - l")
        _warn("N - l > l: completeness relies on the differential origin of the kernel")
    return bc


def cmd_spectrum(cfg: ProblemConfig, args) -> int:
    grid = cfg.grid(args.grid_points)
    form = cfg.form(grid)
    try:
        form.require_identity_multiplier()
    except IneligibleFormError as exc:
        raise InputError(str(exc)) from exc
    if not form.spectral_eligible:
        _warn("kernel is discontinuous or nonzero on the diagonal; completeness hypotheses may fail")
    bc = _bc_checks(cfg, form.N)
    nbc = normalize_bc(bc)
    a = cfg.shift()
    if a != 0 and not shift_preserves_bc(nbc, form.n):
        raise InputError("shift changes right-end conditions that use quasi-derivatives of order >= n")
    work = shift(form, a) if a != 0 else form
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        A = assemble_inverse(work, nbc)
    sp = cfg.spectral
    need = max([sp["count"]] + list(sp["m_values"]))
    res = spectrum(A, need)
    lam = res.eigenvalues - a
    out = args.out_dir
    count = min(sp["count"], len(res))
    with open(out / "eigenvalues.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im", "multiplicity", "residual"])
        for k in range(count):
            w.writerow([k + 1, _r(lam[k].real), _r(lam[k].imag), res.multiplicities[k], _r(res.residuals[k])])
    e = res.slices[count - 1][1] if count else 0
    _write_columns(out / "rootfns.csv", grid.nodes, {f"phi{k + 1}": res.root_basis[:, k] for k in range(e)})
    cols = {f"g{k + 1}": g.values for k, g in enumerate(A.g)}
    cols.update({f"v{k + 1}": v.values for k, v in enumerate(A.v)})
    _write_columns(out / "gv.csv", grid.nodes, cols)
    write_kernel_csv(A.M, out / "m_kernel.csv")
    report = check_khromov(A).as_dict()
    report["shift"] = [a.real, a.imag]
    report["spectral_eligible"] = form.spectral_eligible
    f = evaluate(FunctionDescriptor.of(sp["test_function"]), grid)
    ms = [m for m in sp["m_values"] if m <= res.root_function_count]
    if len(ms) < len(sp["m_values"]):
        _warn("fewer root functions than requested; completeness curve truncated")
    curve = completeness_residual(res, f, ms) if ms else np.zeros(0)
    report["completeness"] = {
        "test_function": sp["test_function"],
        "norm": float(f.norm()),
        "m": ms,
        "residual": [float(c) for c in curve],
    }
    (out / "khromov.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if args.plot:
        _plots(out, lam[:count], ms, curve)
    for k in range(count):
        print(f"lambda_{k + 1} = {fmt_complex(lam[k])}  (multiplicity {res.multiplicities[k]}, residual {res.residuals[k]:.2e})")
    return EXIT_OK


def _plots(out: Path, lam: np.ndarray, ms, curve) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "vspectra"
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(lam.real, lam.imag, s=12)
    ax.set_xlabel("Re lambda")
    ax.set_ylabel("Im lambda")
    fig.savefig(out / "eigenvalues.svg", metadata={"Date": None})
    plt.close(fig)
    fig, ax = plt.subplots(figsize=(5, 4))
    if len(ms):
        ax.semilogy(ms, np.maximum(curve, 1e-300), "o-")
    ax.set_xlabel("root functions m")
    ax.set_ylabel("projection residual")
    fig.savefig(out / "completeness.svg", metadata={"Date": None})
    plt.close(fig)


def _matrix(grid, rows) -> ShinZettlMatrix:
    return ShinZettlMatrix.from_entries(grid, [[evaluate(FunctionDescriptor.of(v), grid) for v in row] for row in rows])


def cmd_transform_qd(cfg: ProblemConfig, args) -> int:
    t = cfg.raw.get("transform")
    if t is None:
        raise InputError("config has no transform block")
    grid = cfg.grid(args.grid_points)
    Q = _matrix(grid, t["Q"])
    Qt = _matrix(grid, t["Q_tilde"])
    if Q.dimension != Qt.dimension:
        raise InputError(f"matrix dimensions differ ({Q.dimension} vs {Qt.dimension})")
    N = Q.dimension
    init = [constant(v) for v in t.get("initial", [1] + [0] * (N - 1))]
    if len(init) != N:
        raise InputError("initial frame has the wrong length")
    rhs = evaluate(FunctionDescriptor.of(t.get("rhs", 0)), grid)
    Yt = solve_regularized(Qt, rhs, init)
    diff0 = t.get("difference_at_x0")
    diff0 = None if diff0 is None else [constant(v) for v in diff0]
    Yh = transform_frames(Yt, Q, Qt, t.get("x0", 0), diff0)
    cols = {f"ytilde{j}": Yt.values[:, j] for j in range(N)}
    cols.update({f"yhat{j}": Yh.values[:, j] for j in range(N)})
    cols.update({f"y{j}": Yt.values[:, j] + Yh.values[:, j] for j in range(N)})
    _write_columns(args.out_dir / "frames.csv", grid.nodes, cols)
    print(f"max |Yhat| per component: " + ", ".join(f"{np.max(np.abs(Yh.values[:, j])):.3e}" for j in range(N)))
    return EXIT_OK


def _order(e_coarse: float, e_fine: float) -> float:
    if e_fine <= 0 or e_coarse <= 0:
        return float("inf")
    return float(np.log2(e_coarse / e_fine))


def cmd_verify(cfg: ProblemConfig, args) -> int:
    rows = []

    def add(name, measured, tol, order=None, ok=None):
        ok = measured <= tol if ok is None else ok
        rows.append((name, measured, tol, order, "pass" if ok else "fail"))

    P = args.grid_points or cfg.raw.get("grid", {}).get("points", 2001)
    P = P if P % 2 else P + 1
    coarse = (P - 1) // 2 + 1
    vcfg = cfg.raw.get("verify", {})
    spec = cfg.spec()
    if spec is not None:
        tests = vcfg.get("test_functions", ["sin(2*x)", "x^3*exp(x)"])
        for y in tests:
            ef = verify_against_classical(cfg.form(make_grid(P)), spec, y)
            ec = verify_against_classical(cfg.form(make_grid(coarse)), spec, y)
            order = _order(ec, ef)
            add(f"classical[{y}]", ef, 1e-2, order, ef <= 1e-2 and order >= 1)
    for label, kern, exact in (
        ("resolvent[x-t]", "x-t", lambda X, T: -np.sin(X - T)),
        ("resolvent[1]", "1", lambda X, T: -np.exp(-(X - T))),
    ):
        errs = []
        for pts in (201, 401):
            g = make_grid(pts)
            R = resolvent(build_raw(g, 1, 0, kern).kernel)
            X, T = np.meshgrid(g.nodes, g.nodes, indexing="ij")
            errs.append(float(np.max(np.abs(np.tril(R.values - exact(X, T))))))
        order = _order(*errs)
        add(label, errs[1], 5e-4, order, errs[1] <= 5e-4 and abs(order - 2) <= 0.5)
    if "kernel_csv" in vcfg:
        grid = cfg.grid(args.grid_points)
        form = cfg.form(grid)
        try:
            stored = read_kernel_csv(vcfg["kernel_csv"], grid)
            gap = float(np.max(np.abs(stored.values - form.kernel.values)))
        except (OSError, ValueError) as exc:
            _warn(f"kernel file unreadable: {exc}")
            gap = float("inf")
        add("kernel_file", gap, 1e-10)
    if "boundary" in cfg.raw and "coefficients" in cfg.raw:
        grid = cfg.grid(args.grid_points if args.grid_points else 401)
        form = cfg.form(grid)
        if form.multiplier_is_identity:
            nbc = normalize_bc(cfg.boundary())
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                A = assemble_inverse(form, nbc)
            rng = np.random.default_rng(args.seed)
            worst = 0.0
            x = grid.nodes
            for _ in range(5):
                c = rng.normal(size=4)
                f = SampledFunction(grid, sum(c[k] * np.cos(k * np.pi * x + c[-1]) for k in range(3)))
                _, frame, _ = A.frame(f)
                f0 = np.array([e.values[0] for e in frame.entries])
                f1 = np.array([e.values[-1] for e in frame.entries])
                worst = max(worst, float(np.max(np.abs(boundary_values(nbc, f0, f1)))) / f.norm())
            add("round_trip_boundary", worst, 1e-6)
    out = args.out_dir
    with open(out / "verify.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "measured", "tolerance", "order", "status"])
        for r in rows:
            w.writerow([r[0], _r(r[1]), _r(r[2]), "" if r[3] is None else _r(r[3]), r[4]])
    for name, meas, tol, order, status in rows:
        o = "" if order is None else f" order={order:.2f}"
        print(f"{status:4s}  {name:28s} {meas:.3e} (tol {tol:.0e}){o}")
    return EXIT_OK


COMMANDS = {
    "reduce": cmd_reduce,
    "spectrum": cmd_spectrum,
    "transform-qd": cmd_transform_qd,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vspectra", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"vspectra {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out-dir", type=Path, default=Path("."))
        s.add_argument("--grid-points", type=int, default=None)
        s.add_argument("--plot", action="store_true")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _thread_limit():
    n = os.environ.get("VSPECTRA_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        with _thread_limit():
            return COMMANDS[args.command](cfg, args)
    except SpectralDegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.suggested_shift is not None:
            print(f"suggestion: add \"shift\": \"{fmt_complex(exc.suggested_shift)}\" to the config", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, InputError, BoundaryConditionError, DimensionMismatchError, ExpressionError, IneligibleFormError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
