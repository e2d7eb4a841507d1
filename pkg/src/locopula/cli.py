"""Command-line front end: simulate / fit / select / tau over CSV files.

Exit codes: 0 success, 1 I/O error, 2 flag or domain error, 3 when every
grid point of a fit failed to converge.  Numbers are serialized with
repr() (shortest round-trip form), so pipelines are lossless and repeated
runs with identical flags produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .errors import DomainError
from .families import Family, eta_to_par, par_to_tau, parse_family, tau_to_par
from .fitting import Dataset, FitConfig, curve_to_tau, curve_thetas, fit_curve
from .kernels import KERNEL_KINDS, KernelSpec
from .selection import SelectionGrid, select_model
from .simulate import EtaSpec, simulate_dataset

DATASET_HEADER = ["u1", "u2", "x"]
CURVE_HEADER = ["x0", "eta", "theta", "tau", "converged"]
SELECT_HEADER = ["family", "band", "cv", "selected"]


def _fmt(x: float) -> str:
    return repr(float(x))


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _write_text(path: str, text: str) -> None:
    # build in memory first; remove partially written files on failure
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except BaseException:
        try:
            if os.path.exists(path):
                os.remove(path)
        except OSError:
            pass
        raise


def _read_dataset(path: str) -> Dataset:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != DATASET_HEADER:
            raise DomainError(f"{path}: expected header u1,u2,x")
        cols = ([], [], [])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DomainError(f"{path}:{lineno}: expected 3 fields")
            try:
                for c, cell in zip(cols, row):
                    c.append(float(cell))
            except ValueError:
                raise DomainError(f"{path}:{lineno}: unparseable number") from None
    if not cols[0]:
        raise DomainError(f"{path}: no data rows")
    return Dataset(u1=np.array(cols[0]), u2=np.array(cols[1]), x=np.array(cols[2]))


def _parse_eta(text: str) -> EtaSpec:
    if text == "paper-dgm":
        return EtaSpec(kind="paper_dgm")
    if text.startswith("const:"):
        try:
            return EtaSpec(kind="constant", value=float(text[6:]))
        except ValueError:
            raise DomainError(f"bad constant in --eta {text!r}") from None
    raise DomainError("--eta must be 'paper-dgm' or 'const:<value>'")


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise DomainError("--grid must be lo,hi,step")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise DomainError("--grid must be numeric lo,hi,step") from None
    if step <= 0 or hi < lo:
        raise DomainError("--grid requires hi >= lo and step > 0")
    count = int(round((hi - lo) / step)) + 1
    grid = lo + step * np.arange(count)
    return grid[grid <= hi + 1e-12 * max(1.0, abs(hi))]


def _read_grid_file(path: str) -> np.ndarray:
    with open(path, "r") as fh:
        vals = [float(tok) for tok in fh.read().split()]
    if not vals:
        raise DomainError(f"{path}: empty grid file")
    return np.asarray(vals, dtype=float)


def _svg_plot(xs, ys, path: str) -> None:
    width, height = 720, 480
    ml, mr, mt, mb = 60, 20, 20, 45
    pts = [(x, y) for x, y in zip(xs, ys) if np.isfinite(y)]
    x_lo, x_hi = (min(p[0] for p in pts), max(p[0] for p in pts)) if pts else (0, 1)
    y_lo, y_hi = (min(p[1] for p in pts), max(p[1] for p in pts)) if pts else (0, 1)
    if x_hi - x_lo < 1e-12:
        x_hi = x_lo + 1.0
    if y_hi - y_lo < 1e-12:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr)

    def sy(y):
        return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" '
        f'y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
    ]
    for i in range(6):
        xv = x_lo + i * (x_hi - x_lo) / 5
        yv = y_lo + i * (y_hi - y_lo) / 5
        parts.append(f'<line x1="{sx(xv):.2f}" y1="{height - mb}" '
                     f'x2="{sx(xv):.2f}" y2="{height - mb + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(xv):.2f}" y="{height - mb + 18}" '
                     f'font-size="11" text-anchor="middle">{xv:.2f}</text>')
        parts.append(f'<line x1="{ml - 5}" y1="{sy(yv):.2f}" x2="{ml}" '
                     f'y2="{sy(yv):.2f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{sy(yv):.2f}" font-size="11" '
                     f'text-anchor="end" dominant-baseline="middle">{yv:.2f}</text>')
    parts.append(f'<text x="{(ml + width - mr) / 2}" y="{height - 8}" '
                 f'font-size="13" text-anchor="middle">x0</text>')
    parts.append(f'<text x="14" y="{(mt + height - mb) / 2}" font-size="13" '
                 f'text-anchor="middle" transform="rotate(-90 14 '
                 f'{(mt + height - mb) / 2})">Kendall tau</text>')
    segments: list[list[str]] = [[]]
    for x, y in zip(xs, ys):
        if np.isfinite(y):
            segments[-1].append(f"{sx(x):.2f},{sy(y):.2f}")
        elif segments[-1]:
            segments.append([])
    for seg in segments:
        if len(seg) >= 2:
            parts.append(f'<polyline points="{" ".join(seg)}" fill="none" '
                         f'stroke="steelblue" stroke-width="1.5"/>')
    parts.append("</svg>")
    _write_text(path, "\n".join(parts) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locopula",
                                description="conditional copula estimation")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="simulate a conditional-copula dataset")
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--family", required=True)
    ps.add_argument("--eta", required=True,
                    help="'paper-dgm' or 'const:<value>'")
    ps.add_argument("--nu", type=float, default=None)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)

    pf = sub.add_parser("fit", help="fit the calibration curve on a grid")
    pf.add_argument("--in", dest="inpath", required=True)
    pf.add_argument("--family", required=True)
    pf.add_argument("--nu", type=float, default=None)
    pf.add_argument("--band", type=float, required=True)
    pf.add_argument("--kernel", default="gaussian", choices=KERNEL_KINDS)
    pf.add_argument("--degree", type=int, default=1)
    pf.add_argument("--grid", default=None, help="lo,hi,step")
    pf.add_argument("--grid-file", default=None)
    pf.add_argument("--init", default="global", choices=("global", "warm"))
    pf.add_argument("--out", required=True)
    pf.add_argument("--svg", default=None)
    pf.add_argument("--threads", type=int, default=None)

    pl = sub.add_parser("select", help="family/bandwidth selection by LOO-CV")
    pl.add_argument("--in", dest="inpath", required=True)
    pl.add_argument("--families", required=True,
                    help="comma-separated codes or names")
    pl.add_argument("--bands", required=True, help="comma-separated bandwidths")
    pl.add_argument("--n-loo", type=int, required=True)
    pl.add_argument("--kernel", default="gaussian", choices=KERNEL_KINDS)
    pl.add_argument("--degree", type=int, default=1)
    pl.add_argument("--nu", type=float, default=None)
    pl.add_argument("--out", required=True)
    pl.add_argument("--threads", type=int, default=None)

    pt = sub.add_parser("tau", help="parameter/tau/eta conversions")
    pt.add_argument("--family", required=True)
    pt.add_argument("--direction", required=True,
                    choices=("par2tau", "tau2par", "eta2tau"))
    pt.add_argument("--value", type=float, required=True)
    return p


def _cmd_simulate(args) -> int:
    try:
        family = parse_family(args.family)
        spec = _parse_eta(args.eta)
        if args.n < 1:
            raise DomainError("--n must be >= 1")
        if args.seed < 0:
            raise DomainError("--seed must be nonnegative")
        data = simulate_dataset(args.n, family, spec, nu=args.nu, rng=args.seed)
    except DomainError as exc:
        return _fail(str(exc), 2)
    lines = [",".join(DATASET_HEADER)]
    for i in range(data.n):
        lines.append(f"{_fmt(data.u1[i])},{_fmt(data.u2[i])},{_fmt(data.x[i])}")
    try:
        _write_text(args.out, "\n".join(lines) + "\n")
    except OSError as exc:
        return _fail(str(exc), 1)
    return 0


def _cmd_fit(args) -> int:
    try:
        family = parse_family(args.family)
        if (args.grid is None) == (args.grid_file is None):
            raise DomainError("exactly one of --grid / --grid-file is required")
        cfg = FitConfig(family=family, nu=args.nu,
                        kernel=KernelSpec(kind=args.kernel, band=args.band),
                        degree=args.degree)
        if args.threads is not None and args.threads < 1:
            raise DomainError("--threads must be >= 1")
    except DomainError as exc:
        return _fail(str(exc), 2)
    try:
        data = _read_dataset(args.inpath)
        grid = _parse_grid(args.grid) if args.grid else _read_grid_file(args.grid_file)
    except OSError as exc:
        return _fail(str(exc), 1)
    except DomainError as exc:
        return _fail(str(exc), 2)
    try:
        curve = fit_curve(data, grid, cfg, init_strategy=args.init,
                          n_workers=args.threads)
    except DomainError as exc:
        return _fail(str(exc), 2)
    taus = curve_to_tau(curve)
    thetas = curve_thetas(curve)
    lines = [",".join(CURVE_HEADER)]
    for pt, (x0, tau), theta in zip(curve.points, taus, thetas):
        lines.append(f"{_fmt(pt.x0)},{_fmt(pt.eta)},{_fmt(theta)},{_fmt(tau)},"
                     f"{'true' if pt.converged else 'false'}")
    try:
        _write_text(args.out, "\n".join(lines) + "\n")
        if args.svg:
            _svg_plot([t[0] for t in taus], [t[1] for t in taus], args.svg)
    except OSError as exc:
        return _fail(str(exc), 1)
    if not any(pt.converged for pt in curve.points):
        print("error: no grid point converged", file=sys.stderr)
        return 3
    return 0


def _parse_list(text, parse_one):
    items = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not items:
        raise DomainError("empty list flag")
    return [parse_one(tok) for tok in items]


def _cmd_select(args) -> int:
    try:
        fams = _parse_list(args.families, parse_family)
        bands = _parse_list(args.bands, float)
        grid = SelectionGrid(families=tuple(fams), bands=tuple(bands),
                             n_loo=args.n_loo)
        cfg = FitConfig(family=fams[0], nu=args.nu,
                        kernel=KernelSpec(kind=args.kernel, band=bands[0]),
                        degree=args.degree)
        if args.threads is not None and args.threads < 1:
            raise DomainError("--threads must be >= 1")
    except (DomainError, ValueError) as exc:
        return _fail(str(exc), 2)
    try:
        data = _read_dataset(args.inpath)
    except OSError as exc:
        return _fail(str(exc), 1)
    except DomainError as exc:
        return _fail(str(exc), 2)
    try:
        table = select_model(data, grid, cfg, n_workers=args.threads)
    except DomainError as exc:
        return _fail(str(exc), 2)
    lines = [",".join(SELECT_HEADER)]
    for k, row in enumerate(table.rows):
        mark = "true" if k == table.selected else "false"
        lines.append(f"{int(row.family)},{_fmt(row.band)},{_fmt(row.cv)},{mark}")
    try:
        _write_text(args.out, "\n".join(lines) + "\n")
    except OSError as exc:
        return _fail(str(exc), 1)
    return 0


def _cmd_tau(args) -> int:
    try:
        family = parse_family(args.family)
        if args.direction == "par2tau":
            out = par_to_tau(family, args.value)
        elif args.direction == "tau2par":
            out = tau_to_par(family, args.value)
        else:
            out = par_to_tau(family, eta_to_par(family, args.value))
    except DomainError as exc:
        return _fail(str(exc), 2)
    print(f"{out:.10g}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "fit":
        return _cmd_fit(args)
    if args.command == "select":
        return _cmd_select(args)
    return _cmd_tau(args)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
