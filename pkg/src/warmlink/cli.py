"""Command-line orchestration: run experiments from a config, persist artifacts.

Every run writes plot-ready CSV/JSON artifacts plus a ledger row keyed by the
config hash.  Exit codes: 0 success, 1 numeric/model failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, circuit, engine, protocols, tomography
from .config import ConfigError, ExperimentConfig, load_config, preset_config
from .dynamics import partial_trace
from .presets import TWO_PI
from .results import ResultLedger, chi_to_json, density_matrix_to_json, write_csv, write_json

log = logging.getLogger("warmlink")

EXPERIMENTS = ("modes", "kappa-sweep", "chevron", "cooling", "retherm",
               "transfer", "bell", "steady-scan", "reset")
FIGURES = ("fig2b", "fig3c", "fig3d", "fig4b", "fig4f", "figS3bd", "figS8",
           "figS10", "figS11")


def _ghz(omega):
    return omega / TWO_PI / 1e9


# ------------------------------------------------------------------ experiments

def run_modes(cfg: ExperimentConfig, out: Path):
    net = cfg.network()
    c = cfg.tree["circuit"]
    band = (c["band_GHz"][0] * TWO_PI * 1e9, c["band_GHz"][1] * TWO_PI * 1e9)
    target = c["target_mode_GHz"] * TWO_PI * 1e9
    phi_off, _ = circuit.off_point_flux(net, target)
    flux = circuit.FluxBias(phi_off)
    modes = circuit.find_modes(net, flux, band, off_flux=flux)
    rows = [(m.mode_index, _ghz(m.omega_m), m.quality_factor, m.kappa * 1e-9,
             m.freq_shift_vs_off / TWO_PI / 1e6) for m in modes]
    art = write_csv(out / "modes.csv",
                    ["mode_index", "freq_GHz", "Q", "kappa_per_ns", "shift_MHz"], rows)
    nearest = min(modes, key=lambda m: abs(m.omega_m - target))
    scalars = {
        "n_modes": len(modes),
        "off_point_flux": phi_off,
        "target_freq_GHz": _ghz(nearest.omega_m),
        "target_Q": nearest.quality_factor,
        "fsr_MHz": net.ideal_fsr / TWO_PI / 1e6,
    }
    return scalars, [art]


def run_kappa_sweep(cfg: ExperimentConfig, out: Path):
    net = cfg.network()
    c = cfg.tree["circuit"]
    target = c["target_mode_GHz"] * TWO_PI * 1e9
    kappa_i = cfg.kappa_intrinsic()
    phis = np.arange(0.25, 0.4985, c["flux_sweep_step"])
    phi, omega, kappa = circuit.kappa_flux_sweep(net, phis, target)
    i_off = int(np.argmin(kappa))
    i_on = int(np.argmax(kappa))
    w_off = omega[i_off]
    rows = [(p, _ghz(w), k, 1e9 / (k + kappa_i), (w - w_off) / TWO_PI / 1e6)
            for p, w, k in zip(phi, omega, kappa)]
    art = write_csv(out / "kappa_sweep.csv",
                    ["phi_ratio", "freq_GHz", "kappa_per_s", "lifetime_ns", "shift_MHz"],
                    rows)
    scalars = {
        "phi_off": float(phi[i_off]),
        "kappa_min_per_s": float(kappa[i_off]),
        "phi_on": float(phi[i_on]),
        "kappa_max_per_s": float(kappa[i_on]),
        "lifetime_min_ns": float(1e9 / (kappa[i_on] + kappa_i)),
        "lifetime_max_ns": float(1e9 / (kappa[i_off] + kappa_i)),
        "coupler_on_off_ratio": float(kappa[i_on] / kappa[i_off]),
    }
    return scalars, [art]


def run_chevron(cfg: ExperimentConfig, out: Path):
    p = cfg.tree["protocols"]
    link = cfg.link(two_qubit=False)
    span = p["chevron_detuning_span_MHz"] * TWO_PI * 1e6
    detunings = np.linspace(-span, span, int(p["chevron_detuning_points"]))
    times, pemap = protocols.rabi_chevron_scan(
        link, detunings, duration=p["chevron_duration_ns"] * 1e-9,
        warm=bool(p["chevron_warm"]))
    rows = []
    for i, d in enumerate(detunings):
        for j, t in enumerate(times):
            rows.append((d / TWO_PI / 1e6, t * 1e9, pemap[i, j]))
    art = write_csv(out / "chevron.csv", ["detuning_MHz", "time_ns", "pe"], rows)
    return {"pe_max": float(pemap.max()), "warm": bool(p["chevron_warm"])}, [art]


def run_cooling(cfg: ExperimentConfig, out: Path):
    p = cfg.tree["protocols"]
    res = protocols.cooling_protocol(cfg.link(two_qubit=False),
                                     duration=p["cooling_duration_ns"] * 1e-9)
    rows = list(zip(res.times * 1e9, res.observables["pe_q0"], res.observables["mode_n"]))
    art = write_csv(out / "cooling.csv", ["time_ns", "pe", "mode_n"], rows)
    fit = analysis.fit_exponential(res.times, res.observables["pe_q0"])
    scalars = {"pe_initial": float(res.observables["pe_q0"][0]),
               "pe_final": float(res.observables["pe_q0"][-1]),
               "tau_ns": fit.tau * 1e9}
    return scalars, [art]


def run_retherm(cfg: ExperimentConfig, out: Path):
    p = cfg.tree["protocols"]
    link = cfg.link(two_qubit=False)
    duration = p["retherm_duration_us"] * 1e-6
    window = p["fit_window_us"] * 1e-6
    arts, scalars = [], {}
    for tag, coupled in (("alone", False), ("coupled", True)):
        res = protocols.rethermalization_protocol(link, duration=duration, coupled=coupled)
        rows = list(zip(res.times * 1e9, res.observables["pe_q0"], res.observables["mode_n"]))
        arts.append(write_csv(out / f"retherm_{tag}.csv", ["time_ns", "pe", "mode_n"], rows))
        mask = res.times <= window
        fit = analysis.fit_exponential(res.times[mask], res.observables["pe_q0"][mask])
        scalars[f"tau_{tag}_us"] = fit.tau * 1e6
        scalars[f"pe_final_{tag}"] = float(res.observables["pe_q0"][-1])
    return scalars, arts


def _transfer_time(cfg: ExperimentConfig, link) -> float:
    p = cfg.tree["protocols"]
    if p["transfer_time_ns"]:
        return p["transfer_time_ns"] * 1e-9
    t_star, _ = protocols.optimize_transfer_time(link, cutoff=int(p["transfer_cutoff"]))
    return t_star


def _confusion(cfg: ExperimentConfig):
    err = cfg.tree["tomography"]["confusion_error"]
    return tomography.ConfusionMatrix.symmetric(err) if err else None


def run_transfer(cfg: ExperimentConfig, out: Path):
    p = cfg.tree["protocols"]
    link = cfg.link()
    cutoff = int(p["transfer_cutoff"])
    t_star = _transfer_time(cfg, link)

    res = protocols.photon_transfer_protocol(link, t_star, cutoff=cutoff)
    rows = list(zip(res.times * 1e9, res.observables["pe_q0"],
                    res.observables["pe_q1"], res.observables["mode_n"]))
    arts = [write_csv(out / "transfer.csv", ["time_ns", "pe_sender", "pe_receiver", "mode_n"],
                      rows)]

    def run_for(prep):
        r = protocols.photon_transfer_protocol(link, t_star, input_prep=prep, cutoff=cutoff)
        pair, _ = protocols.qubit_pair_state(r.final)
        return partial_trace(pair, (1,))

    confusion = _confusion(cfg)
    chi_cor, f_cor = tomography.process_tomography(run_for, confusion=confusion, correct=True)
    if confusion is None:
        chi_raw, f_raw = chi_cor, f_cor
    else:
        chi_raw, f_raw = tomography.process_tomography(run_for, confusion=confusion,
                                                       correct=False)
    arts.append(write_json(out / "chi.json",
                           chi_to_json(chi_cor.matrix, transfer_time_ns=t_star * 1e9)))
    scalars = {"transfer_time_ns": t_star * 1e9,
               "pe_receiver_peak": float(res.observables["pe_q1"].max()),
               "f_chi_raw": f_raw, "f_chi_corrected": f_cor}
    return scalars, arts


def _bell_timings(cfg: ExperimentConfig, link) -> tuple[float, float]:
    p = cfg.tree["protocols"]
    if p["bell_release_ns"] and p["bell_catch_ns"]:
        return p["bell_release_ns"] * 1e-9, p["bell_catch_ns"] * 1e-9
    t1, t2, _ = protocols.optimize_bell_timings(link, cutoff=int(p["transfer_cutoff"]))
    return t1, t2


def run_bell(cfg: ExperimentConfig, out: Path):
    p = cfg.tree["protocols"]
    link = cfg.link()
    cutoff = int(p["transfer_cutoff"])
    t1, t2 = _bell_timings(cfg, link)
    res = protocols.bell_protocol(link, t1, t2, cutoff=cutoff)
    rows = list(zip(res.times * 1e9, res.observables["pe_q0"],
                    res.observables["pe_q1"], res.observables["mode_n"]))
    arts = [write_csv(out / "bell.csv", ["time_ns", "pe_sender", "pe_receiver", "mode_n"], rows)]

    pair, leakage = protocols.qubit_pair_state(res.final)
    target = protocols.bell_target()
    f_direct = tomography.fidelity_state(pair, target)
    tomo = tomography.state_tomography(pair, confusion=_confusion(cfg),
                                       correct=bool(cfg.tree["tomography"]["spam_correct"]),
                                       target=target, leakage=leakage)
    arts.append(write_json(out / "bell_state.json",
                           density_matrix_to_json(tomo.state, release_ns=t1 * 1e9,
                                                  catch_ns=t2 * 1e9)))
    scalars = {"release_ns": t1 * 1e9, "catch_ns": t2 * 1e9,
               "f_bell": f_direct, "f_bell_tomo": tomo.fidelity,
               "leakage": leakage}
    return scalars, arts


def run_steady_scan(cfg: ExperimentConfig, out: Path):
    s = cfg.tree["scan"]
    link = cfg.link(levels=int(cfg.tree["system"]["steady_state_qubit_levels"]),
                    two_qubit=False)
    occ = np.geomspace(s["occupancy_min"], s["occupancy_max"], int(s["occupancy_points"]))
    kap = np.geomspace(s["kappa_min_per_s"], s["kappa_max_per_s"], int(s["kappa_points"]))
    scan = analysis.steady_scan(link.qubit_a, link.g_a, link.mode_frequency,
                                occ, kap, s["target_pe"])
    rows = []
    for i, kc in enumerate(kap):
        for j, nc in enumerate(occ):
            rows.append((nc, kc, scan.pe_surface[i, j]))
    arts = [write_csv(out / "steady_scan.csv", ["occupancy", "kappa_per_s", "pe"], rows),
            write_csv(out / "steady_contour.csv", ["occupancy", "kappa_per_s"],
                      scan.contour)]
    scalars = {"pe_min": float(scan.pe_surface.min()), "pe_max": float(scan.pe_surface.max())}
    kappa_star = cfg.kappa_intrinsic()
    if kap.min() <= kappa_star <= kap.max():
        try:
            mid, lo, hi = scan.occupancy_with_error(kappa_star)
            scalars.update({"occupancy_star": mid, "occupancy_star_lo": lo,
                            "occupancy_star_hi": hi})
        except ValueError:
            log.warning("target P_e not crossed at the readout kappa")
    return scalars, arts


def run_reset(cfg: ExperimentConfig, out: Path):
    p = cfg.tree["protocols"]
    link = cfg.link(two_qubit=False)
    target = cfg.reset_target()
    kappa_res = 1.0 / (p["reset_kappa_inv_ns"] * 1e-9)
    swap = p["reset_swap_period_ns"] * 1e-9
    occ = 0.0
    if target:
        occ = protocols.resonator_occupancy_for_target(
            link.qubit_a, target, resonator_kappa=kappa_res, swap_period=swap)
    res = protocols.readout_reset_protocol(link.qubit_a,
                                           duration=p["reset_duration_us"] * 1e-6,
                                           resonator_kappa=kappa_res,
                                           resonator_occupancy=occ, swap_period=swap)
    rows = list(zip(res.times * 1e9, res.observables["pe_q0"], res.observables["mode_n"]))
    art = write_csv(out / "reset.csv", ["time_ns", "pe", "resonator_n"], rows)
    tail = res.observables["pe_q0"][res.times > 0.8 * res.times[-1]]
    scalars = {"resonator_occupancy": occ, "pe_equilibrium": float(tail.mean()),
               "target_pe": target}
    return scalars, [art]


RUNNERS = {
    "modes": run_modes,
    "kappa-sweep": run_kappa_sweep,
    "chevron": run_chevron,
    "cooling": run_cooling,
    "retherm": run_retherm,
    "transfer": run_transfer,
    "bell": run_bell,
    "steady-scan": run_steady_scan,
    "reset": run_reset,
}


# ------------------------------------------------------------------ figures

def figure_recipe(figure_id: str, cfg: ExperimentConfig, out: Path):
    """Run the experiment bundle behind one summary figure."""
    arts, summary = [], {}

    def sub(name, subdir=None, **overrides):
        tree = json.loads(json.dumps(cfg.tree))
        for dotted, val in overrides.items():
            node = tree
            keys = dotted.split(".")
            for k in keys[:-1]:
                node = node[k]
            node[keys[-1]] = val
        scalars, artifacts = RUNNERS[name](ExperimentConfig(tree), out / (subdir or name))
        arts.extend(artifacts)
        return scalars

    if figure_id == "fig2b":
        summary["kappa_sweep"] = sub("kappa-sweep")
    elif figure_id == "fig3c":
        summary["cooling"] = sub("cooling")
    elif figure_id == "fig3d":
        summary["retherm"] = sub("retherm")
    elif figure_id == "fig4b":
        summary["transfer"] = sub("transfer")
    elif figure_id == "fig4f":
        summary["bell"] = sub("bell")
    elif figure_id == "figS3bd":
        summary["kappa_sweep"] = sub("kappa-sweep")
    elif figure_id == "figS8":
        for t in ("1", "2", "3", "4"):
            summary[f"cooling_{t}K"] = sub("cooling", subdir=f"cooling_{t}K",
                                           t_hot_K=float(t))
            summary[f"retherm_{t}K"] = sub("retherm", subdir=f"retherm_{t}K",
                                           t_hot_K=float(t))
    elif figure_id == "figS10":
        summary["scan_off"] = sub("steady-scan", subdir="scan_off")
        summary["scan_on"] = sub("steady-scan", subdir="scan_on", **{
            "scan.occupancy_min": 0.01, "scan.occupancy_max": 0.3,
            "scan.kappa_min_per_s": 2e7, "scan.kappa_max_per_s": 4e8,
            "scan.target_pe": 0.095,
        })
    elif figure_id == "figS11":
        for t in ("0.83", "1", "2", "3"):
            summary[f"transfer_{t}K"] = sub("transfer", subdir=f"transfer_{t}K",
                                           t_hot_K=float(t))
            summary[f"bell_{t}K"] = sub("bell", subdir=f"bell_{t}K",
                                        t_hot_K=float(t))
    else:
        raise ConfigError(f"unknown figure id {figure_id!r}")

    arts.append(write_json(out / "summary.json", summary))
    return summary, arts


# ------------------------------------------------------------------ entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warmlink",
        description="Simulator of a radiatively cooled thermal microwave quantum link",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config; defaults to the bundled device preset")
        p.add_argument("--out", type=Path, default=Path("warmlink-out"))
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path config override")

    for name in EXPERIMENTS:
        common(sub.add_parser(name, help=f"run the {name} experiment"))
    fig = sub.add_parser("figure", help="reproduce a summary-figure bundle")
    fig.add_argument("figure_id", choices=FIGURES)
    common(fig)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("WARMLINK_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.overrides) if args.config \
            else preset_config(args.overrides)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "type": "config"}), file=sys.stderr)
        return 2

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    name = args.command if args.command != "figure" else f"figure:{args.figure_id}"
    log.info("running %s (engine backend: %s)", name, engine.backend_name())

    try:
        if args.command == "figure":
            scalars, artifacts = figure_recipe(args.figure_id, cfg, out)
        else:
            scalars, artifacts = RUNNERS[args.command](cfg, out)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "type": "config"}), file=sys.stderr)
        return 2
    except Exception as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1

    ledger = ResultLedger(out / "ledger.jsonl")
    entry = ledger.append(name, cfg.hash(), scalars, [str(a) for a in artifacts])
    print(json.dumps({"experiment": name, "config_hash": entry["config_hash"],
                      "scalars": entry["scalars"]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
