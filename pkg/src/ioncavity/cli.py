"""Command-line entry point tying the modules into a reproducible workflow.

Subcommands: bounds, sweep-t2, schemes, future, simulate, tomo, train,
wavepacket.  Every run writes its data outputs plus a manifest JSON listing
the command, config hash, code version, timestamps and output files.

Exit codes: 0 success, 2 usage, 3 validation, 4 computation failure.  A
rerun with identical config and seed produces byte-identical data outputs;
set SOURCE_DATE_EPOCH to pin the manifest timestamps as well.  CPK_THREADS
caps the worker count of parallel sections (tomography bootstrap).
"""

import argparse
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import (CalibrationError, bin_timetags, fit_geometric,
                       integrate_efficiency, train_statistics)
from .bounds import beta_parameter, bound_for_scheme, p_opt, t2_optimal
from .config import ConfigError, load_config
from .explorer import evaluate_future, scheme_ladder, sweep_t2
from .fileio import read_counts, read_timetags, write_csv, write_json
from .simulator import (IntegrationError, IntegrityError, build_system,
                        evolve, simulate_entanglement)
from .tomography import bootstrap, metrics, reconstruct

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_COMPUTE = 4

TWO_PI = 2 * math.pi


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return datetime.fromtimestamp(t, tz=timezone.utc).isoformat()


def _n_workers():
    try:
        return max(1, int(os.environ.get("CPK_THREADS", "1")))
    except ValueError:
        return 1


def _write_manifest(command, cfg, outputs, started):
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "started_at": started,
        "finished_at": _timestamp(),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    path = outputs[0] + ".manifest.json"
    write_json(path, manifest)
    return path


def _models(cfg):
    emitter = cfg.build_emitter()
    cavity = cfg.build_cavity()
    scheme = cfg.build_scheme(emitter)
    return emitter, cavity, scheme


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_bounds(args, cfg):
    _, cavity, scheme = _models(cfg)
    ctx = cavity.coupling(scheme)
    full = bound_for_scheme(scheme, cavity)
    pure = bound_for_scheme(scheme, cavity, variant="pure")
    alpha = cavity.mirrors.alpha_loss
    beta_full = beta_parameter(scheme, "full")
    beta_pure = beta_parameter(scheme, "pure")
    data = {
        "p_bound": full.p_s,
        "p_in": full.p_in,
        "p_esc": full.p_esc,
        "p_pure": pure.p_s,
        "pure_fraction": pure.p_s / full.p_s,
        "cooperativity": ctx.cooperativity,
        "cooperativity_internal": ctx.cooperativity_internal,
        "g_2pi_mhz": ctx.g / TWO_PI / 1e6,
        "kappa_2pi_khz": cavity.kappa / TWO_PI / 1e3,
        "finesse": cavity.finesse,
        "w0_um": cavity.w0 * 1e6,
        "fsr_mhz": cavity.fsr / 1e6,
        "a_tilde": cavity.a_tilde,
        "beta": beta_full,
        "beta_pure": beta_pure,
        "t2_opt_ppm": t2_optimal(beta_full, alpha, cavity.a_tilde) * 1e6,
        "t2_opt_pure_ppm": t2_optimal(beta_pure, alpha, cavity.a_tilde) * 1e6,
        "p_opt": p_opt(beta_full, alpha, cavity.a_tilde),
        "p_opt_pure": p_opt(beta_pure, alpha, cavity.a_tilde),
    }
    write_json(args.output, data)
    return [args.output]


_SWEEP_COLUMNS = ("x", "p_bound", "p_pure", "p_in", "p_esc", "pure_fraction")


def cmd_sweep_t2(args, cfg):
    if not (0 < args.min_ppm < args.max_ppm):
        raise ConfigError("sweep-t2", "need 0 < min-ppm < max-ppm")
    _, cavity, scheme = _models(cfg)
    curve = sweep_t2(scheme, cavity, args.min_ppm * 1e-6,
                     args.max_ppm * 1e-6, args.points, grid=args.grid)
    rows = [(x * 1e6, pb, pp, pi, pe, pp / pb)
            for x, pb, pp, pi, pe in zip(curve.x, curve.p_bound, curve.p_pure,
                                         curve.p_in, curve.p_esc)]
    ann = curve.annotations
    write_csv(args.output, _SWEEP_COLUMNS, rows,
              comment="x = T2 [ppm], probabilities dimensionless; "
                      f"t2_opt_ppm={ann['t2_opt']*1e6:.6g} "
                      f"t2_opt_pure_ppm={ann['t2_opt_pure']*1e6:.6g}")
    return [args.output]


def _design_rows(points):
    return [(p.label, p.p_bound, p.p_pure, p.p_in, p.p_esc, p.pure_fraction)
            for p in points]


def cmd_schemes(args, cfg):
    _, cavity, scheme = _models(cfg)
    pts = scheme_ladder(scheme, cavity)
    write_csv(args.output, _SWEEP_COLUMNS, _design_rows(pts),
              comment="x = coupling scheme, probabilities dimensionless")
    return [args.output]


def cmd_future(args, cfg):
    _, cavity, scheme = _models(cfg)
    pts = [evaluate_future(name, scheme, cavity)
           for name in ("low-loss", "small-waist", "ten-ion")]
    write_csv(args.output, _SWEEP_COLUMNS, _design_rows(pts),
              comment="x = future system, probabilities dimensionless")
    return [args.output]


def cmd_simulate(args, cfg):
    import dataclasses
    tree = dict(cfg.tree["drive"])
    if args.rabi_mhz is not None:
        tree["rabi_mhz"] = args.rabi_mhz
    if args.rabi2_mhz is not None:
        tree["rabi2_mhz"] = args.rabi2_mhz
    if args.detuning_mhz is not None:
        tree["detuning_mhz"] = args.detuning_mhz
    if args.duration_us is not None:
        tree["duration_us"] = args.duration_us
    emitter = cfg.build_emitter()
    cavity = cfg.build_cavity()
    model = build_system(emitter, cavity, jitter_rate=cfg.jitter_rate())
    from .config import GlobalConfig
    cfg2 = GlobalConfig.from_dict({**cfg.to_dict(), "drive": tree})
    drive = cfg2.build_drive(zeeman_split=model.zeeman_split_d52)
    bin_us = args.bin_us if args.bin_us is not None \
        else cfg.tree["analysis"]["bin_us"]
    res = evolve(model, drive, sample_dt=bin_us * 1e-6)
    cum = res.cumulative_p_s
    rows = [(t * 1e6, fh, fv, c) for t, fh, fv, c in
            zip(res.times, res.flux_h, res.flux_v, cum)]
    write_csv(args.output, ("t_us", "flux_H_per_s", "flux_V_per_s", "cum_P_S"),
              rows,
              comment=f"P_S={res.p_s:.6g} P_S_H={res.p_s_h:.6g} "
                      f"P_S_V={res.p_s_v:.6g}")
    return [args.output]


def cmd_wavepacket(args, cfg):
    tags = read_timetags(args.timetags, attempts=args.attempts)
    bin_us = args.bin_us if args.bin_us is not None \
        else cfg.tree["analysis"]["bin_us"]
    wp = bin_timetags(tags, bin_us)
    res = integrate_efficiency(wp, cfg.build_path())
    rows = list(zip(wp.centers, wp.p_d, wp.p_d_err))
    write_csv(args.output, ("t_us", "p_d_per_us", "p_d_err"), rows,
              comment=f"attempts={wp.attempts} bin_us={bin_us:.6g} "
                      f"P_tot={res.p_tot:.6g}({res.p_tot_err:.2g}) "
                      f"P_S={res.p_s:.6g}({res.p_s_err:.2g})")
    return [args.output]


def cmd_train(args, cfg):
    tags = read_timetags(args.timetags, attempts=args.attempts)
    stats = train_statistics(tags, cfg.train_windows())
    fit = fit_geometric(stats)
    data = {
        "p_slot": [float(x) for x in stats.p_slot],
        "p_consec": [float(x) for x in stats.p_consecutive],
        "fit_p": fit.p,
        "fit_p_err": fit.stderr,
        "reduced_chi2": fit.reduced_chi2,
        "slot_chi2": fit.slot_chi2,
        "geometric_ok": fit.geometric_ok,
    }
    write_json(args.output, data)
    return [args.output]


def cmd_tomo(args, cfg):
    table = read_counts(args.counts)
    rec = reconstruct(table)
    met = metrics(rec.rho)
    m = args.resamples if args.resamples is not None \
        else int(cfg.tree["analysis"]["bootstrap_resamples"])
    bs = bootstrap(table, m=m, seed=cfg.seed, n_workers=_n_workers())
    data = {
        "fidelity": met.fidelity,
        "fidelity_err": bs.fidelity_err,
        "purity": met.purity,
        "purity_err": bs.purity_err,
        "theta": met.theta,
        "bound_gap": met.bound_gap,
        "converged": rec.converged,
        "rho_real": [[float(v) for v in row] for row in rec.rho.real],
        "rho_imag": [[float(v) for v in row] for row in rec.rho.imag],
    }
    write_json(args.output, data)
    return [args.output]


# --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="ioncavity",
        description="Photon-collection bounds, CMRT simulation and "
                    "measurement analysis for an ion-cavity interface")
    parser.add_argument("--config", default=None,
                        help="JSON config (defaults reproduce the published "
                             "system)")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="closed-form collection bounds")
    p.add_argument("--output", "-o", default="bounds.json")

    p = sub.add_parser("sweep-t2", help="bound vs output transmission")
    p.add_argument("--min-ppm", type=float, default=10.0)
    p.add_argument("--max-ppm", type=float, default=1000.0)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--grid", choices=("log", "linear"), default="log")
    p.add_argument("--output", "-o", default="sweep_t2.csv")

    p = sub.add_parser("schemes", help="coupling-scheme ladder A-D")
    p.add_argument("--output", "-o", default="schemes.csv")

    p = sub.add_parser("future", help="future-system configurations")
    p.add_argument("--output", "-o", default="future.csv")

    p = sub.add_parser("simulate", help="master-equation photon generation")
    p.add_argument("--rabi-mhz", type=float, default=None)
    p.add_argument("--rabi2-mhz", type=float, default=None)
    p.add_argument("--detuning-mhz", type=float, default=None)
    p.add_argument("--duration-us", type=float, default=None)
    p.add_argument("--bin-us", type=float, default=None)
    p.add_argument("--output", "-o", default="wavepacket_sim.csv")

    p = sub.add_parser("wavepacket", help="bin time tags into p_d(t)")
    p.add_argument("--timetags", required=True)
    p.add_argument("--attempts", type=int, default=None)
    p.add_argument("--bin-us", type=float, default=None)
    p.add_argument("--output", "-o", default="wavepacket.csv")

    p = sub.add_parser("train", help="photon-train statistics and fit")
    p.add_argument("--timetags", required=True)
    p.add_argument("--attempts", type=int, default=None)
    p.add_argument("--output", "-o", default="train.json")

    p = sub.add_parser("tomo", help="two-qubit state tomography")
    p.add_argument("--counts", required=True)
    p.add_argument("--resamples", type=int, default=None)
    p.add_argument("--output", "-o", default="tomo.json")

    return parser


COMMANDS = {
    "bounds": cmd_bounds,
    "sweep-t2": cmd_sweep_t2,
    "schemes": cmd_schemes,
    "future": cmd_future,
    "simulate": cmd_simulate,
    "wavepacket": cmd_wavepacket,
    "train": cmd_train,
    "tomo": cmd_tomo,
}

_VALIDATION_ERRORS = (ConfigError, CalibrationError, ValueError, OSError)
_COMPUTE_ERRORS = (IntegrationError, IntegrityError, ArithmeticError,
                   np.linalg.LinAlgError)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    started = _timestamp()
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        outputs = COMMANDS[args.command](args, cfg)
    except _COMPUTE_ERRORS as err:
        print(f"computation failed: {err}", file=sys.stderr)
        return EXIT_COMPUTE
    except _VALIDATION_ERRORS as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    _write_manifest(args.command, cfg, outputs, started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
