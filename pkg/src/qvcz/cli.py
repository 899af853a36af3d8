"""Command-line front end: ``qvcz scan-g2 | photon-dist | oracle | validate | replay``.

Every output file gets a sibling ``<name>.manifest.json`` holding the resolved
configuration, the subcommand arguments and the SHA-256 of each output, so
``qvcz replay <manifest>`` can regenerate and verify it.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical tolerance
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .correlators import (CLOSED_FORM_SELECTORS, CSV_COLUMNS, PolSelector, UnsupportedSelector,
                          g2_closed_form, g2_quadrature, scan_curve)
from .oracle import McRunConfig, cross_validate, mc_g2, mc_photon_distribution, VALIDATION_NUS
from .oracle import write_validation_csv
from .photonstats import CutoffError, OffDiagonalSelector, joint_photon_distribution
from .source import (ConfigError, PhysicalConfig, default_config, derive_params, load_config,
                     nu_from_z, z_from_nu)

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_IO = 0, 2, 3, 4


class ToleranceFailure(RuntimeError):
    pass


def _selectors(text: str) -> list[PolSelector]:
    sels = [PolSelector.from_string(s) for s in text.split(",") if s.strip()]
    if not sels:
        raise ConfigError("no selector given")
    return sels


def _nu_grid(args) -> np.ndarray:
    if not (args.nu_min > 0 and args.nu_max >= args.nu_min and args.points >= 1):
        raise ConfigError("need 0 < nu-min <= nu-max and points >= 1")
    if args.points == 1:
        return np.array([args.nu_min])
    return np.geomspace(args.nu_min, args.nu_max, args.points)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _f(x) -> str:
    return repr(float(x))


def _recorded_args(args) -> dict:
    skip = {"out", "config", "func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _write_manifests(args, config: PhysicalConfig, outputs: list[Path]) -> None:
    derived = derive_params(config)
    record = {
        "tool": "qvcz",
        "tool_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "subcommand": args.command,
        "args": _recorded_args(args),
        "config": config.to_json_dict(),
        "derived": {"n_bar": derived.n_bar, "k": derived.k, "I0": derived.I0, "nu": derived.nu},
        "seed": args.seed if args.seed is not None else config.seed,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    for p in outputs:
        man = p.with_name(p.name + ".manifest.json")
        man.write_text(json.dumps({**record, "output": p.name}, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")


def _seed(args, config) -> int:
    return int(args.seed if args.seed is not None else config.seed)


# -- subcommands --------------------------------------------------------------------------

def cmd_scan_g2(args, config: PhysicalConfig, out: Path) -> list[Path]:
    sels = _selectors(args.selector)
    nus = _nu_grid(args)
    seed = _seed(args, config)
    outputs = []
    for si, sel in enumerate(sels):
        path = out / f"g2_{sel}.csv"
        if args.method in ("closed", "quadrature"):
            curve = scan_curve(config, sel, nus, args.method)
            if curve.errors:
                raise ToleranceFailure(f"{sel}: {len(curve.errors)} points failed: "
                                       f"{next(iter(curve.errors.values()))}")
            curve.to_csv(path)
            values = curve.g2
        elif args.method == "mc":
            rows, values = [], []
            for pi, nu in enumerate(nus):
                est = mc_g2(_mc_run(args, seed + 1000 * si + pi, str(sel), nu), config)
                values.append(est.value)
                rows.append([_f(nu), _f(z_from_nu(config, nu)), str(sel), _f(est.value), "mc",
                             _f(est.standard_error), _f(est.standard_error),
                             est.realization_count])
            _write_csv(path, [*CSV_COLUMNS, "stderr", "n_realizations"], rows)
        else:
            rows, values, gap = [], [], 0.0
            for pi, nu in enumerate(nus):
                closed = g2_closed_form(sel, nu) if str(sel) in CLOSED_FORM_SELECTORS else math.nan
                quad, qerr = g2_quadrature(config, sel, nu)
                est = mc_g2(_mc_run(args, seed + 1000 * si + pi, str(sel), nu), config)
                if not math.isnan(closed):
                    gap = max(gap, abs(closed - quad))
                values.append(quad)
                rows.append([_f(nu), _f(z_from_nu(config, nu)), str(sel), _f(closed), _f(quad),
                             _f(qerr), _f(est.value), _f(est.standard_error),
                             est.realization_count])
            _write_csv(path, ["nu", "z_m", "selector", "g2_closed", "g2_quadrature",
                              "err_quadrature", "g2_mc", "stderr_mc", "n_realizations"], rows)
            print(f"{sel}: max |closed - quadrature| = {gap:.2e}")
        values = np.asarray(values, dtype=float)
        print(f"{sel}: {len(nus)} points, g2 in [{np.nanmin(values):.6f}, "
              f"{np.nanmax(values):.6f}] -> {path}")
        outputs.append(path)
    return outputs


def _mc_run(args, seed: int, selector: str, nu: float) -> McRunConfig:
    return McRunConfig(args.realizations, seed, selector, nu=float(nu), workers=args.workers)


def cmd_photon_dist(args, config: PhysicalConfig, out: Path) -> list[Path]:
    sels = _selectors(args.selector)
    if len(sels) != 1:
        raise ConfigError("photon-dist takes a single selector")
    sel = sels[0]
    if not sel.is_diagonal:
        raise OffDiagonalSelector(
            f"selector {sel} is off-diagonal: joint photon-number distributions are defined only "
            "for i=k and j=l (HHHH, HVHV, VVVV, VHVH); use scan-g2 for off-diagonal coherence")
    nu = args.nu if args.nu is not None else nu_from_z(config, config.propagation_distance)
    z = z_from_nu(config, nu)
    analytic = joint_photon_distribution(config, sel, z, args.cutoff)
    if args.method == "analytic":
        dist = analytic
        dist.meta["method"] = "analytic"
        path = out / f"pnd_{sel}_analytic.csv"
        dist.to_csv(path)
    else:
        run = McRunConfig(args.realizations, _seed(args, config), str(sel), nu=nu,
                          workers=args.workers)
        mc = mc_photon_distribution(run, config, args.cutoff)
        dist = mc.distribution
        dist.meta["tv_to_analytic"] = analytic.tv_distance(dist)
        path = out / f"pnd_{sel}_mc.csv"
        mc.to_csv(path)
        print(f"total-variation distance to analytic: {dist.meta['tv_to_analytic']:.3e}")
    print(f"{sel} at nu={nu:.6g} (z={z:.6g} m): tail_mass={dist.tail_mass:.3e}, "
          f"g2_cross={dist.g2_cross():.6f}, means={dist.means()[0]:.6f},{dist.means()[1]:.6f}"
          f" -> {path}")
    return [path]


def cmd_oracle(args, config: PhysicalConfig, out: Path) -> list[Path]:
    sels = [str(s) for s in _selectors(args.selector)]
    for s in sels:
        if s not in CLOSED_FORM_SELECTORS:
            raise UnsupportedSelector(f"oracle validates against closed forms; {s} has none")
    rows = cross_validate(config, args.realizations, _seed(args, config), VALIDATION_NUS, sels,
                          args.workers)
    path = out / "oracle_validation.csv"
    write_validation_csv(rows, path, config, args.realizations)
    worst = max(abs(r.z_score) for r in rows)
    for r in rows:
        flag = "ok " if abs(r.z_score) <= 3 else "BAD"
        print(f"{flag} {r.selector} nu={r.nu:<5g} closed={r.analytic:.6f} "
              f"quadrature={r.quadrature:.6f} mc={r.mc:.6f} +- {r.stderr:.2e} z={r.z_score:+.2f}")
    print(f"max |z| = {worst:.2f} over {len(rows)} cells -> {path}")
    if worst > 3 and not args.no_fail:
        _write_manifests(args, config, [path])
        raise ToleranceFailure(f"Monte Carlo disagrees with the closed form: max |z| = {worst:.2f}")
    return [path]


def cmd_validate(args, config: PhysicalConfig, out: Path | None) -> list[Path]:
    from .acceptance import run_all

    results = run_all(config)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    outputs = []
    if out is not None:
        path = out / "validation_report.json"
        report = [{"criterion": r.number, "name": r.name, "passed": r.passed,
                   "measured": r.measured, "tolerance": r.tolerance,
                   "runtime_s": round(r.runtime, 3)} for r in results]
        path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        outputs.append(path)
    if passed != len(results):
        if outputs:
            _write_manifests(args, config, outputs)
        raise ToleranceFailure("acceptance criteria failed: "
                               + ", ".join(str(r.number) for r in results if not r.passed))
    return outputs


COMMANDS = {"scan-g2": cmd_scan_g2, "photon-dist": cmd_photon_dist, "oracle": cmd_oracle,
            "validate": cmd_validate}


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    config = PhysicalConfig.from_json_dict(manifest["config"])
    ns = argparse.Namespace(**manifest["args"])
    tmp = None
    if args.out is None:
        tmp = tempfile.TemporaryDirectory()
        out = Path(tmp.name)
    else:
        out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[manifest["subcommand"]](ns, config, out)
        fresh = {p.name: _sha256(p) for p in outputs}
    finally:
        if tmp is not None:
            tmp.cleanup()
    bad = [name for name, digest in manifest["outputs"].items() if fresh.get(name) != digest]
    for name in manifest["outputs"]:
        print(f"{'identical' if name not in bad else 'DIFFERS  '} {name}")
    return EXIT_OK if not bad else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qvcz",
        description="Thermal light through a polarization grating: g2 scans, photon-number "
                    "distributions, Monte Carlo cross-validation.")
    parser.add_argument("--version", action="version", version=f"qvcz {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, selector_default="HHHH"):
        p.add_argument("--config", help="JSON config (default: built-in reference setup)")
        p.add_argument("--selector", default=selector_default,
                       help="polarization selector(s) ijkl, comma separated")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo blocks")
        p.add_argument("--realizations", type=int, default=10_000,
                       help="Monte Carlo realizations")

    p = sub.add_parser("scan-g2", help="g2 over a log-spaced nu grid, one CSV per selector")
    common(p, ",".join(CLOSED_FORM_SELECTORS))
    p.add_argument("--nu-min", type=float, default=0.1)
    p.add_argument("--nu-max", type=float, default=4.0)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--method", choices=("closed", "quadrature", "mc", "all"), default="closed")

    p = sub.add_parser("photon-dist", help="joint photon-number distribution p(n1, n2)")
    common(p)
    p.add_argument("--nu", type=float, default=None,
                   help="plane label (default: from the config's propagation distance)")
    p.add_argument("--cutoff", type=int, default=20)
    p.add_argument("--method", choices=("analytic", "mc"), default="analytic")

    p = sub.add_parser("oracle", help="Monte Carlo vs closed-form z-score matrix")
    common(p, ",".join(CLOSED_FORM_SELECTORS))
    p.add_argument("--no-fail", action="store_true", help="report but exit 0 on |z| > 3")

    p = sub.add_parser("validate", help="run the acceptance matrix")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="directory for validation_report.json")

    p = sub.add_parser("replay", help="re-run from a manifest and compare output hashes")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="directory for regenerated outputs")
    return parser


def _resolve_config(args) -> PhysicalConfig:
    config = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        config = PhysicalConfig(**{**config.__dict__, "seed": int(args.seed)})
    return config


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            return cmd_replay(args)
        config = _resolve_config(args)
        out = Path(args.out) if args.out is not None else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](args, config, out)
        if outputs:
            _write_manifests(args, config, outputs)
        return EXIT_OK
    except (ConfigError, UnsupportedSelector, OffDiagonalSelector, ValueError) as exc:
        if isinstance(exc, CutoffError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_TOLERANCE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ToleranceFailure, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
