"""Command-line front end: subwave bands|modes|stability|lattice-sum."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .capacitance import CapacitanceError, finite_capacitance, finite_frequencies
from .chains import ChainGeometry, DimerCell, GeometryError, build_dimer_chain, build_point_defect_chain
from .config import (
    BANDS_SUMMARY_SCHEMA,
    LATTICE_SUM_SCHEMA,
    LOCALIZATION_SCHEMA,
    STABILITY_SCHEMA,
    ConfigError,
    RunConfig,
    load_config,
    validate_output,
)
from .lattice import (
    LatticeSumConfig,
    LatticeSumError,
    QuasiMomentum,
    check_anomaly,
    helmholtz_lattice_sum_Q,
    static_image_sum,
)
from .multipole import CharacteristicValueError, MultipoleBasis, find_characteristic_values
from .stability import (
    StabilityError,
    classify_midgap,
    localization_metric,
    reference_gap,
    run_stability_experiment,
)
from .topology import TopologyError, band_gap_check, band_inversion_check, compute_band_structure, zak_phase

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_json(path: Path, document: dict, schema: dict) -> None:
    validate_output(document, schema)
    path.write_text(json.dumps(document, indent=2, sort_keys=False) + "\n")


def _json_float(x) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _cell(cfg: RunConfig) -> DimerCell:
    g = cfg.geometry
    try:
        return DimerCell(g["d"], g["d_prime"], g["R"])
    except GeometryError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def _chain(cfg: RunConfig) -> ChainGeometry:
    g = cfg.geometry
    try:
        if g["kind"] == "dimer":
            return build_dimer_chain(g["M"], g["d"], g["d_prime"], g["R"])
        return build_point_defect_chain(g["N"], g["d"], g["R"], g["R_defect"])
    except GeometryError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def cmd_bands(cfg: RunConfig, out: Path) -> int:
    if cfg.geometry["kind"] != "dimer":
        raise ConfigError("geometry.kind: band structures need a dimer cell")
    if cfg.solver["method"] != "capacitance":
        raise ConfigError("solver.method: band structures are computed with the capacitance method")
    cell = _cell(cfg)
    bs = compute_band_structure(cell, cfg.delta, cfg.solver["grid_n"], cfg.solver["order"])
    with open(out / "bands.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alpha", "omega1", "omega2", "theta_alpha", "degenerate_flag"])
        for p in bs.points:
            writer.writerow([_fmt(p.alpha.alpha), _fmt(p.omega1), _fmt(p.omega2), _fmt(p.theta_alpha), int(p.degenerate)])
    alpha0 = cfg.solver["alpha0_fraction"] * math.pi / cell.L
    gap = band_gap_check(bs, alpha0)
    summary: dict = {
        "schema_version": 1,
        "geometry": {"d": cell.d, "d_prime": cell.d_prime, "L": cell.L, "R": cell.R},
        "delta": cfg.delta,
        "grid_n": bs.grid_n,
        "gap": {
            "alpha0": alpha0,
            "max_omega1": gap.max_omega1,
            "min_omega2": gap.min_omega2,
            "width": gap.width,
            "has_gap": gap.has_gap,
        },
    }
    try:
        zak = zak_phase(bs)
        summary["zak_phase"] = zak.value
        summary["winding_number"] = zak.winding
    except TopologyError as exc:
        summary["zak_phase"] = None
        summary["winding_number"] = None
        summary["zak_error"] = str(exc)
    try:
        report = band_inversion_check(cell, cell.swapped(), cfg.delta, cfg.solver["order"])
        summary["edge_character"] = list(report.labels_a)
    except TopologyError:
        summary["edge_character"] = None
    _write_json(out / "bands_summary.json", summary, BANDS_SUMMARY_SCHEMA)
    zak_text = "undefined" if summary["zak_phase"] is None else f"{summary['zak_phase']:.6g}"
    print(f"zak_phase={zak_text} gap_width={gap.width:.6g} rows={bs.grid_n}")
    return EXIT_OK


def cmd_modes(cfg: RunConfig, out: Path) -> int:
    geom = _chain(cfg)
    order = cfg.solver["order"]
    spectrum = finite_frequencies(finite_capacitance(geom, order), cfg.delta, geom.radii)
    omega = spectrum.frequencies
    method = cfg.solver["method"]
    if method == "multipole":
        lo, hi = 0.8 * omega[0], 1.2 * omega[-1]
        omega = np.array(find_characteristic_values(
            geom, None, cfg.delta, (lo, hi), geom.n, MultipoleBasis(cfg.solver["order_lmax"])
        ))
    gap = reference_gap(geom, "full", cfg.delta, order, cfg.solver["grid_n"])
    in_gap = (omega > gap.lower) & (omega < gap.upper)
    (out / "geometry.txt").write_text(geom.to_text())
    with open(out / "modes_frequencies.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "omega", "in_gap"])
        for i, w in enumerate(omega):
            writer.writerow([i, _fmt(w), int(in_gap[i])])
    with open(out / "modes_vectors.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mode", "resonator", "coefficient"])
        for mode in range(geom.n):
            for res in range(geom.n):
                writer.writerow([mode, res, _fmt(spectrum.modes[res, mode])])
    cls = classify_midgap(spectrum, (gap.lower, gap.upper), geom.center_index)
    mode_doc = None
    if cls.index is not None:
        metric = localization_metric(spectrum, cls.index, geom.center_index)
        w = float(omega[cls.index])
        width = gap.upper - gap.lower
        mode_doc = {
            "index": cls.index,
            "frequency": w,
            "center_weight": metric.center_weight,
            "decay_ratio": _json_float(metric.decay_ratio),
            "relative_gap_position": _json_float((w - gap.lower) / width) if math.isfinite(width) else None,
            "distance_to_band_edge": _json_float(min(w - gap.lower, gap.upper - w)),
        }
    doc = {
        "schema_version": 1,
        "n_resonators": geom.n,
        "method": method,
        "reference_gap": {"lower": _json_float(gap.lower), "upper": _json_float(gap.upper)},
        "in_gap_count": int(np.sum(in_gap)),
        "mode": mode_doc,
    }
    _write_json(out / "localization.json", doc, LOCALIZATION_SCHEMA)
    print(f"modes={geom.n} in_gap={int(np.sum(in_gap))}")
    return EXIT_OK


def _emit_stability(report, out: Path) -> None:
    _write_json(out / "stability.json", json.loads(report.to_json()), STABILITY_SCHEMA)
    (out / "stability_trials.csv").write_text(report.to_csv())


def cmd_stability(cfg: RunConfig, out: Path) -> int:
    geom = _chain(cfg)
    st = cfg.stability
    model = st["model"]
    if geom.kind == "point_defect" and model == "full":
        model = "point-defect"
    (out / "geometry.txt").write_text(geom.to_text())
    try:
        report = run_stability_experiment(
            geom, model, st["sigma_pct"], st["trials"], st["seed"], cfg.delta, cfg.solver["order"]
        )
    except StabilityError as exc:
        if exc.report is not None:
            _emit_stability(exc.report, out)
        raise
    _emit_stability(report, out)
    v = report.variances
    for row, key in (("upper band", "upper_band"), ("midgap", "midgap"), ("lower band", "lower_band")):
        value = v[key]
        print(f"{row:<11} {'nan' if math.isnan(value) else f'{value:.3e}'}")
    print(f"retention   {report.retention:.3f}")
    return EXIT_OK


def cmd_lattice_sum(cfg: RunConfig, out: Path) -> int:
    ls = cfg.lattice_sum
    lam, mu = ls["lambda"], ls["mu"]
    if abs(mu) > lam:
        raise ConfigError("lattice_sum.mu: |mu| must not exceed lambda")
    q = QuasiMomentum.from_phase(ls["alphaL"], 1.0)
    doc = {"schema_version": 1, "lambda": lam, "mu": mu, "kL": ls["kL"], "alphaL": q.phase}
    if ls["static"]:
        if q.is_zero() and lam == 0:
            raise LatticeSumError("the static lambda = 0 sum diverges at alpha L = 0")
        value = complex(static_image_sum(lam, 0.0, q)) if mu == 0 else 0j
        doc.update(mode="static", truncation_M=None, tail_estimate=None)
    else:
        if not ls["kL"] > 0:
            raise ConfigError("lattice_sum.kL: must be positive unless static is set")
        lcfg = LatticeSumConfig(truncation_M=ls["M"], tail_tol=cfg.solver["tail_tol"])
        check_anomaly(ls["kL"], q, lcfg.anomaly_margin)
        result = helmholtz_lattice_sum_Q(lam, mu, ls["kL"], q, lcfg)
        value = result.value
        doc.update(mode="helmholtz", truncation_M=result.truncation_M, tail_estimate=result.tail_bound)
    doc["value_real"] = value.real
    doc["value_imag"] = value.imag
    _write_json(out / "lattice_sum.json", doc, LATTICE_SUM_SCHEMA)
    print(json.dumps(doc))
    return EXIT_OK


COMMANDS = {
    "bands": cmd_bands,
    "modes": cmd_modes,
    "stability": cmd_stability,
    "lattice-sum": cmd_lattice_sum,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subwave", description="Subwavelength resonator chain computations.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration (schema version 1)")
    parser.add_argument("--seed", type=int, default=None, help="override stability.seed (unsigned 64-bit)")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed: must be an unsigned 64-bit integer")
            cfg.stability["seed"] = args.seed
        out = Path(args.out or cfg.output["dir"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        LatticeSumError,
        CapacitanceError,
        TopologyError,
        StabilityError,
        CharacteristicValueError,
        GeometryError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
