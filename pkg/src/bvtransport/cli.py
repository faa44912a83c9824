"""Command line entry point (installed as ``bvt``).

Subcommands: ``catalog`` lists the construction variants and reference
fields, ``simulate`` runs one finite-volume scenario, ``traces`` extracts
boundary trace profiles and the pattern rasters, ``verify`` runs one check
suite, ``report`` runs a battery of suites into one report file.

Settings resolve as CLI flag > config file (flat key=value, ``--config``)
> built-in default. Exit codes: 0 all passed, 1 a check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .catalog import (
    VARIANT_TAGS,
    ConstructionVariant,
    assemble_field,
    chessboard_cycle,
)
from .errors import BVTransportError, ConfigurationError
from .io import emit_heatmap, format_report, parse_config, write_conserved_csv, \
    write_profile_csv, write_snapshot_csv
from .solver import Scenario, fill_scenario, smooth_scenario, solve_ibvp
from .suites import SUITE_NAMES, RunConfig, run_suite
from .traces import one_sided_trace, pair_constant, battery
from .transport import evolve_chessboard

_SMOOTH_KINDS = ("constant", "shear")

# config-file keys, with the coercion each one needs
_KEYS = {
    "suite": str,
    "variant": str,
    "kmax": int,
    "level": int,
    "cfl": float,
    "tol": float,
    "horizon": float,
    "out": str,
    "checks": lambda s: tuple(x for x in s.split(",") if x),
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bvt",
        description="Transport laboratory: dyadic chessboard fields, traces, upwind solver.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *names):
        if "suite" in names:
            sp.add_argument("--suite", help=f"one of {', '.join(SUITE_NAMES)}")
        if "variant" in names:
            sp.add_argument("--variant", help="construction variant tag or smooth kind")
        if "kmax" in names:
            sp.add_argument("--kmax", type=int, help="assembly depth K_max (>= 4)")
        if "level" in names:
            sp.add_argument("--level", type=int, help="dyadic grid level")
        if "cfl" in names:
            sp.add_argument("--cfl", type=float, help="CFL target in ]0, 0.45]")
        if "tol" in names:
            sp.add_argument("--tol", type=float, help="residual tolerance")
        if "horizon" in names:
            sp.add_argument("--horizon", type=float, help="time horizon in ]0, 1]")
        sp.add_argument("--out", help="output directory for CSV/PPM/report files")
        sp.add_argument("--config", help="flat key=value settings file")

    sp = sub.add_parser("catalog", help="list variants and reference fields")
    sp.add_argument("--config", help="flat key=value settings file")

    sp = sub.add_parser("simulate", help="run one finite-volume scenario")
    common(sp, "variant", "kmax", "level", "cfl", "horizon")

    sp = sub.add_parser("traces", help="extract boundary trace profiles and rasters")
    common(sp, "variant", "kmax")

    sp = sub.add_parser("verify", help="run one check suite")
    common(sp, "suite", "variant", "kmax", "level", "cfl", "tol")
    sp.add_argument("--checks", help="comma-separated subset of check names")

    sp = sub.add_parser("report", help="run suites and write a combined report")
    common(sp, "suite", "kmax", "level", "cfl", "tol")

    return p


def _settings(args) -> dict:
    """Merge defaults <- config file <- CLI flags into one dict."""
    merged: dict = {}
    path = getattr(args, "config", None)
    if path:
        for key, raw in parse_config(path).items():
            if key not in _KEYS:
                raise ConfigurationError(f"{path}: unknown setting {key!r}")
            try:
                merged[key] = _KEYS[key](raw)
            except ValueError:
                raise ConfigurationError(f"{path}: bad value for {key}: {raw!r}")
    for key in _KEYS:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = _KEYS[key](v) if isinstance(v, str) and key == "checks" else v
    return merged


def _run_config(settings: dict, **forced) -> RunConfig:
    kw = {k: v for k, v in settings.items() if k in RunConfig.__dataclass_fields__}
    kw.update(forced)
    return RunConfig(**kw)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_catalog(args) -> int:
    _settings(args)  # validates the config file even if nothing is used
    print("construction variants (assembled space-time fields):")
    for tag in VARIANT_TAGS:
        var = ConstructionVariant(tag, 8)
        f = assemble_field(var)
        print(f"  {tag:16s} trace mean {var.trace_mean:+.2f}  |b|_inf {f.linf_bound:g}  "
              f"mixing={'yes' if var.mixing else 'no'}")
    print("reference fields:")
    print("  chessboard_cycle(k)         radial jet merge cycle, k >= 3")
    print("  mixing_chessboard_cycle(k)  merge cycle with stirred squares")
    print("  rotation_block(k)           single square rotor")
    print("  mixing_block(k)             scheduled rotor tile")
    print("  smooth: constant, shear     Lipschitz well-posed regime")
    print(f"suites: {', '.join(SUITE_NAMES)}")
    return 0


def _scenario_for(settings: dict) -> Scenario:
    variant = settings.get("variant", "outward")
    level = settings.get("level", 6)
    cfl = settings.get("cfl", 0.4)
    horizon = settings.get("horizon", 0.5)
    if variant in _SMOOTH_KINDS:
        scn, _ = smooth_scenario(variant, level=level, cfl=cfl, T=horizon)
        return scn
    if variant == "fill":
        return fill_scenario(level=level, cfl=cfl, T=horizon)
    if variant in VARIANT_TAGS:
        var = ConstructionVariant(variant, settings.get("kmax", 8))
        return Scenario(
            name=f"ibvp[{variant}]",
            field=assemble_field(var),
            u_bar=0.0,
            g_bar=0.0,
            T=horizon,
            level=level,
            cfl=cfl,
        )
    raise ConfigurationError(
        f"unknown variant {variant!r}; tags: {', '.join(VARIANT_TAGS)}, "
        f"smooth kinds: {', '.join(_SMOOTH_KINDS)}, or 'fill'"
    )


def _cmd_simulate(args) -> int:
    settings = _settings(args)
    scn = _scenario_for(settings)
    traj = solve_ibvp(scn)
    final = traj.final()
    print(f"scenario {scn.name}: level {traj.grid.level}, dt 2**-{traj.meta['J']}, "
          f"{traj.n_steps} steps in {traj.runtime:.2f}s")
    print(f"  mass defect {traj.mass_defect:.3e}  max-principle defect "
          f"{traj.max_principle_defect:.3e}  cfl max {traj.cfl_max:.3f}")
    out = settings.get("out")
    if out:
        os.makedirs(out, exist_ok=True)
        stem = settings.get("variant", "outward")
        write_conserved_csv(os.path.join(out, f"{stem}_conserved.csv"), traj)
        write_snapshot_csv(os.path.join(out, f"{stem}_final.csv"), final)
        mid = final.values[final.values.shape[0] // 2]
        emit_heatmap(mid, os.path.join(out, f"{stem}_midslice.ppm"))
        print(f"  wrote conserved/snapshot CSVs and midslice raster to {out}")
    return 0


def _cmd_traces(args) -> int:
    settings = _settings(args)
    variant = settings.get("variant", "outward")
    if variant not in VARIANT_TAGS:
        raise ConfigurationError(f"traces needs a variant tag, got {variant!r}")
    var = ConstructionVariant(variant, settings.get("kmax", 8))
    fld = assemble_field(var)

    phi = battery(("t", "y1", "y2"))[0]
    target = pair_constant(var.trace_mean, phi)
    print(f"variant {variant}: junction trace pairings against {phi.describe()}")
    for k in range(3, var.k_max + 1):
        r = 2.0 ** (2 - k)
        prof = one_sided_trace(fld, r, "-", "b")
        got = prof.pair(phi)
        print(f"  k={k}  r=2^{2 - k:+d}  <Tr b, phi> = {got:+.6f}  "
              f"(limit {target:+.6f}, gap {abs(got - target):.2e})")

    out = settings.get("out")
    if out:
        os.makedirs(out, exist_ok=True)
        for quantity in ("b", "ub"):
            for label, r in (("quarter", 0.25), ("freeze", var.schedule.freeze_radius)):
                prof = one_sided_trace(fld, r, "-", quantity, nt=32, nlat=64)
                name = f"{variant}_{quantity}_{label}.csv"
                write_profile_csv(os.path.join(out, name), prof)

        # the two reference patterns: the k=3 jet chessboard and the fully
        # mixed end state of the k=3 block schedule
        beta = chessboard_cycle(3)
        ax = (np.arange(64) + 0.5) / 64.0 * beta.lateral_period
        A, B = np.meshgrid(ax, ax, indexing="ij")
        rr = np.full(A.size, 2.0**-4)
        br = beta(rr, rr, A.ravel(), B.ravel())[:, 0].reshape(A.shape)
        emit_heatmap(br, os.path.join(out, "beta3_r_2m4.ppm"))

        state = evolve_chessboard(3)[-1]
        sx = (np.arange(64) + 0.5) / 64.0 * state.tile
        SA, SB = np.meshgrid(sx, sx, indexing="ij")
        emit_heatmap(state.evaluate(SA, SB), os.path.join(out, "z3_r_2m3.ppm"))
        print(f"wrote profile CSVs and pattern rasters to {out}")
    return 0


def _print_report(report) -> None:
    sys.stdout.write(format_report(report))


def _cmd_verify(args) -> int:
    settings = _settings(args)
    if "suite" not in settings:
        raise ConfigurationError("verify needs --suite (or suite= in the config file)")
    cfg = _run_config(settings)
    report = run_suite(cfg)
    _print_report(report)
    return 0 if report.verdict == "PASS" else 1


def _cmd_report(args) -> int:
    settings = _settings(args)
    names = [settings["suite"]] if "suite" in settings else list(SUITE_NAMES)
    out = settings.get("out")
    reports = []
    for name in names:
        cfg = _run_config(settings, suite=name)
        reports.append(run_suite(cfg))
    for rep in reports:
        _print_report(rep)
    if out:
        os.makedirs(out, exist_ok=True)
        text = "".join(format_report(r) for r in reports)
        with open(os.path.join(out, "report.txt"), "w") as f:
            f.write(text)
        print(f"combined report written to {os.path.join(out, 'report.txt')}")
    return 0 if all(r.verdict == "PASS" for r in reports) else 1


_COMMANDS = {
    "catalog": _cmd_catalog,
    "simulate": _cmd_simulate,
    "traces": _cmd_traces,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BVTransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
