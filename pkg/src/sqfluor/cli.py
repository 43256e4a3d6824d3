"""Sweep runner: reproduces the CW and pulsed comparison scans as CSV tables.

Subcommands
-----------
aeff             effective interaction area from the geometry section
cw-sweep         squeezed-vs-classical CW rates over (sigma_c_bar, beta_bar)
pulsed-sweep     squeezed-vs-classical pulsed counts over the 3x3 panel grid
schmidt          export the JSI grid and Schmidt spectrum of the pulsed source
validate-config  load a config, echoing every applied default
self-test        run the built-in oracle checks

Determinism: identical configs produce byte-identical CSV bodies; the
timestamp comment is suppressed under --reproducible.  Rows are computed
concurrently up to --jobs but always assembled in deterministic order.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .constants import PI, TWO_PI
from .excitation import (
    PulsedEngineOptions,
    PulsedExcitationEngine,
    fluorescence,
    matched_classical_cw,
    matched_classical_pulsed,
    one_photon_coupling,
    p_classical_pulsed,
    rate_classical_cw,
    rate_squeezed_cw,
)
from .geometry import effective_area
from .sources import (
    SqueezedCW,
    SqueezedPulsed,
    default_jsa_grids,
    export_jsi_csv,
    export_schmidt_csv,
    photon_rate_cw,
    schmidt_decompose,
    schmidt_decompose_analytic,
)
from .system import eta_prefactor

CW_COLUMNS = [
    "sigma_c_over_gamma_b", "beta_bar", "photon_rate_per_s", "r_classical",
    "r_sq_coherent", "r_sq_incoherent", "r_sq_total", "R_fluor_classical",
    "R_fluor_sq_total", "ratio_sq_over_cl", "ratio_coh_over_incoh",
    "crossover", "validity",
]

PULSED_COLUMNS = [
    "sigma_p_over_gamma_b", "sigma_c_over_sigma_p", "beta", "photons_per_pulse",
    "p_classical", "p_sq_coherent", "p_sq_incoherent", "n_fluor_classical",
    "n_fluor_sq_coherent", "n_fluor_sq_incoherent", "n_fluor_sq_total",
    "crossover", "validity",
]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _failed_row(columns, fixed: dict) -> dict:
    row = {c: float("nan") for c in columns}
    row.update(fixed)
    row["validity"] = "failed"
    return row


def _log_grid(lo: float, hi: float, points_per_decade: float) -> np.ndarray:
    decades = np.log10(hi / lo)
    n = max(2, int(np.ceil(decades * points_per_decade)) + 1)
    return np.geomspace(lo, hi, n)


# ---------------------------------------------------------------------------
# CW sweep
# ---------------------------------------------------------------------------


def run_cw_sweep(cfg: RunConfig, jobs: int = 1) -> list[dict]:
    system, coupling = cfg.system, cfg.coupling
    eta = eta_prefactor(system, coupling)
    area = effective_area(cfg.beam(), cfg.beam(), cfg.cloud(), cfg.numerics_options())
    n_atoms = cfg.geometry["n_atoms"]
    opts = cfg.numerics_options()
    src_cfg = cfg.source
    ratios = src_cfg["sigma_c_over_gamma_b"]
    base_grid = _log_grid(
        src_cfg["beta_bar_min"], src_cfg["beta_bar_max"], src_cfg["points_per_decade"]
    )

    tasks = []
    for ratio in ratios:
        sigma = ratio * system.gamma_b
        grid = base_grid
        if src_cfg.get("match_rate_windows") and ratio != ratios[0]:
            # photon rate ~ beta_bar^2 / T_c: matching the rate window across
            # columns scales the beta window by sqrt(sigma_ref / sigma).
            grid = base_grid * np.sqrt(ratios[0] / ratio)
        for beta_bar in grid:
            tasks.append((ratio, sigma, float(beta_bar)))

    def compute(task):
        ratio, sigma, beta_bar = task
        fixed = {"sigma_c_over_gamma_b": ratio, "beta_bar": beta_bar}
        try:
            src = SqueezedCW(
                beta_bar=beta_bar, sigma_c_bar=sigma,
                center_i=system.omega_ba, center_ii=system.omega_cb,
            )
            out_sq = rate_squeezed_cw(src, system, eta, area, coupling, opts)
            rate = photon_rate_cw(src, "I", opts.rel_tol, opts.max_doublings)
            src_cl = matched_classical_cw(src, area)
            out_cl = rate_classical_cw(src_cl, system, eta)
            fl_sq = fluorescence(out_sq, system, n_atoms)
            fl_cl = fluorescence(out_cl, system, n_atoms)
            validity = out_sq.validity.passes if out_sq.validity else True
            return {
                "sigma_c_over_gamma_b": ratio,
                "beta_bar": beta_bar,
                "photon_rate_per_s": rate,
                "r_classical": out_cl.total,
                "r_sq_coherent": out_sq.coherent,
                "r_sq_incoherent": out_sq.incoherent,
                "r_sq_total": out_sq.total,
                "R_fluor_classical": fl_cl.total,
                "R_fluor_sq_total": fl_sq.total,
                "ratio_sq_over_cl": out_sq.total / out_cl.total if out_cl.total else float("nan"),
                "ratio_coh_over_incoh": (
                    out_sq.coherent / out_sq.incoherent if out_sq.incoherent else float("nan")
                ),
                "crossover": beta_bar >= 1.0,
                "validity": validity,
            }
        except Exception:
            return _failed_row(CW_COLUMNS, fixed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(compute, tasks))
    return [compute(t) for t in tasks]


# ---------------------------------------------------------------------------
# pulsed sweep
# ---------------------------------------------------------------------------


def _beta_for_photons(p_weights: np.ndarray, n_photons: float) -> float:
    """Invert N = sum sinh^2(beta sqrt(p_n)) for beta (monotone)."""
    if n_photons <= 0.0:
        return 0.0

    def excess(beta):
        return float(np.sum(np.sinh(beta * np.sqrt(p_weights)) ** 2)) - n_photons

    hi = 1.0
    while excess(hi) < 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("photon-number inversion failed to bracket")
    return brentq(excess, 0.0, hi, rtol=1e-13, maxiter=200)


def _decompose_for_panel(cfg: RunConfig, src: SqueezedPulsed):
    method = cfg.numerics["decomposition"]
    trunc = cfg.numerics["trunc_tol"]
    if method == "svd":
        grids = default_jsa_grids(src, cfg.numerics["jsa_points"])
        return schmidt_decompose(src, *grids, trunc_tol=trunc)
    return schmidt_decompose_analytic(src, trunc_tol=trunc)


def run_pulsed_sweep(cfg: RunConfig, jobs: int = 1) -> list[dict]:
    system, coupling = cfg.system, cfg.coupling
    eta = eta_prefactor(system, coupling)
    area = effective_area(cfg.beam(), cfg.beam(), cfg.cloud(), cfg.numerics_options())
    n_atoms = cfg.geometry["n_atoms"]
    src_cfg = cfg.source
    photon_grid = _log_grid(
        src_cfg["photons_min"], src_cfg["photons_max"], src_cfg["points_per_decade"]
    )
    engine_opts = PulsedEngineOptions(
        quad=cfg.numerics_options(),
        sample_rel_tol=cfg.numerics["sample_rel_tol"],
        mode_weight_tail=cfg.numerics["mode_weight_tail"],
    )
    kappa = one_photon_coupling(system.omega_ba, coupling.mu_sq_ba)
    branch = (system.gamma("cd") / system.gamma_c) * (system.gamma_r["da"] / system.gamma_d)

    rows: list[dict] = []
    for sp_ratio in src_cfg["sigma_p_over_gamma_b"]:
        for sc_ratio in src_cfg["sigma_c_over_sigma_p"]:
            sigma_p = sp_ratio * system.gamma_b
            sigma_c = sc_ratio * sigma_p
            src = SqueezedPulsed(
                beta=1.0, sigma_p=sigma_p, sigma_c=sigma_c,
                center_i=system.omega_ba, center_ii=system.omega_cb,
            )
            dec = _decompose_for_panel(cfg, src)
            beta_max = _beta_for_photons(dec.p, photon_grid[-1])
            working = dec.with_beta(beta_max)
            working = working.truncated(
                working.weighted_mode_count(engine_opts.mode_weight_tail)
            )
            engine = PulsedExcitationEngine(working, system, eta, area, engine_opts)
            # Classical reference is exactly bilinear in the photon numbers.
            src_cl_ref = matched_classical_pulsed(
                working.with_beta(_beta_for_photons(working.p, 1.0)), src
            )
            cl_ref = p_classical_pulsed(src_cl_ref, system, eta, area, opts=engine_opts.quad)
            cl_unit = cl_ref.total / (src_cl_ref.n_photons_i * src_cl_ref.n_photons_ii)

            def compute(n_photons, _engine=engine, _working=working, _src=src,
                        _cl_unit=cl_unit, _sp=sp_ratio, _sc=sc_ratio):
                fixed = {
                    "sigma_p_over_gamma_b": _sp, "sigma_c_over_sigma_p": _sc,
                    "photons_per_pulse": n_photons,
                }
                try:
                    beta = _beta_for_photons(_working.p, n_photons)
                    dec_b = _working.with_beta(beta)
                    out = _engine.outcome(dec_b)
                    pop = kappa * _engine.max_population_weighted(dec_b.s_n**2) / area.a_eff
                    p_cl = _cl_unit * n_photons**2
                    return {
                        "sigma_p_over_gamma_b": _sp,
                        "sigma_c_over_sigma_p": _sc,
                        "beta": beta,
                        "photons_per_pulse": n_photons,
                        "p_classical": p_cl,
                        "p_sq_coherent": out.coherent,
                        "p_sq_incoherent": out.incoherent,
                        "n_fluor_classical": p_cl * branch * n_atoms,
                        "n_fluor_sq_coherent": out.coherent * branch * n_atoms,
                        "n_fluor_sq_incoherent": out.incoherent * branch * n_atoms,
                        "n_fluor_sq_total": out.total * branch * n_atoms,
                        "crossover": beta * np.sqrt(_working.p[0]) >= 1.0,
                        "validity": pop < 0.1,
                    }
                except Exception:
                    return _failed_row(PULSED_COLUMNS, fixed)

            panel_rows = [compute(float(photon_grid[0]))]  # warm caches serially
            rest = [float(n) for n in photon_grid[1:]]
            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    panel_rows.extend(pool.map(compute, rest))
            else:
                panel_rows.extend(compute(n) for n in rest)
            rows.extend(panel_rows)
    return rows


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def emit(rows: list[dict], columns: list[str], cfg: RunConfig, path,
         reproducible: bool = False, json_mirror: bool | None = None) -> None:
    """CSV with a comment header recording config hash and settings."""
    lines = [
        f"# sqfluor {__version__}",
        f"# config_hash: sha256:{cfg.config_hash}",
        "# numerics: " + " ".join(
            f"{k}={cfg.numerics[k]}" for k in sorted(cfg.numerics)
        ),
    ]
    if not reproducible:
        lines.append(f"# generated: {datetime.now(timezone.utc).isoformat()}")
    with open(path, "w", newline="") as handle:
        for line in lines:
            handle.write(line + "\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    mirror = cfg.output["json_mirror"] if json_mirror is None else json_mirror
    if mirror:
        payload = {
            "config_hash": cfg.config_hash,
            "columns": columns,
            "rows": [{c: row[c] for c in columns} for row in rows],
        }
        with open(str(path) + ".json", "w") as handle:
            json.dump(payload, handle, indent=1, sort_keys=True, default=float)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_aeff(cfg: RunConfig, args) -> int:
    cloud = cfg.cloud()
    opts = cfg.numerics_options()
    from .constants import C_LIGHT
    from .geometry import BeamProfile

    for label, omega in (("ba", cfg.system.omega_ba), ("cb", cfg.system.omega_cb)):
        wavelength = TWO_PI * C_LIGHT / omega
        beam = BeamProfile(cfg.geometry["w0"], wavelength=wavelength)
        res = effective_area(beam, beam, cloud, opts)
        print(
            f"A_eff (z_R from {label} wavelength {wavelength*1e9:.1f} nm): "
            f"{res.a_eff:.6e} m^2 = {res.a_eff*1e12:.2f} um^2 "
            f"(rel_err {res.achieved_rel_err:.2e})"
        )
    return 0


def _cmd_cw_sweep(cfg: RunConfig, args) -> int:
    rows = run_cw_sweep(cfg, jobs=args.jobs)
    out = args.out or cfg.output["path"]
    emit(rows, CW_COLUMNS, cfg, out, reproducible=args.reproducible)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_pulsed_sweep(cfg: RunConfig, args) -> int:
    rows = run_pulsed_sweep(cfg, jobs=args.jobs)
    out = args.out or cfg.output["path"]
    emit(rows, PULSED_COLUMNS, cfg, out, reproducible=args.reproducible)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_schmidt(cfg: RunConfig, args) -> int:
    src_cfg = cfg.source
    if cfg.source["regime"] != "squeezed_pulsed":
        print("schmidt export requires source.regime = squeezed_pulsed", file=_sys.stderr)
        return 2
    sigma_p = src_cfg["sigma_p_over_gamma_b"][0] * cfg.system.gamma_b
    sigma_c = src_cfg["sigma_c_over_sigma_p"][0] * sigma_p
    src = SqueezedPulsed(
        beta=1.0, sigma_p=sigma_p, sigma_c=sigma_c,
        center_i=cfg.system.omega_ba, center_ii=cfg.system.omega_cb,
    )
    dec = _decompose_for_panel(cfg, src)
    base = args.out or "schmidt"
    grids = default_jsa_grids(src, n_points=129)
    export_jsi_csv(src, *grids, f"{base}_jsi.csv")
    export_schmidt_csv(dec, f"{base}_schmidt.csv")
    print(f"wrote {base}_jsi.csv and {base}_schmidt.csv ({dec.n_modes} modes, tail {dec.tail:.2e})")
    return 0


def _cmd_validate(cfg: RunConfig, args) -> int:
    print(f"config OK (hash sha256:{cfg.config_hash})")
    print(f"Gamma_b/Gamma_c = {cfg.system.gamma_b / cfg.system.gamma_c:.4f}")
    return 0


def _self_test() -> int:
    """Small oracle suite: closed-form identities the numerics must reproduce."""
    from .spectral import (
        GreenFunctionParams, LorentzianLineshape, SpectralGrid,
        green, lorentzian, quad_1d,
    )
    from .sources import (
        gain_functions_cw, geometric_mode_ratio, schmidt_decompose,
    )
    from .excitation import energy_ledger, population_integrals_from_probability
    from .system import FourLevelSystem

    checks = []
    shape = LorentzianLineshape(2.0e15, 3.0e7)
    checks.append((
        "lorentzian peak = 2/(pi Gamma)",
        abs(float(lorentzian(shape.center, shape)) * np.pi * shape.fwhm - 2.0) < 1e-12,
    ))
    grid = SpectralGrid(shape.center, 50 * shape.fwhm, 4001)
    area = quad_1d(lambda w: lorentzian(w, shape), grid)
    checks.append((
        "lorentzian area matches (2/pi) atan(100)",
        abs(area - 2.0 / np.pi * np.arctan(100.0)) < 1e-6,
    ))
    g = GreenFunctionParams(shape.center, shape.fwhm, 0.0)
    w_test = shape.center + np.linspace(-5, 5, 11) * shape.fwhm
    ident = np.max(np.abs(2 * np.imag(green(w_test, g)) - TWO_PI * lorentzian(w_test, shape)))
    checks.append(("2 Im G = 2 pi L identity", ident < 1e-20))
    gauss = quad_1d(lambda x: np.exp(-x * x), SpectralGrid(0.0, 8.0, 2001))
    checks.append(("Simpson Gaussian = sqrt(pi)", abs(gauss - np.sqrt(PI)) < 1e-8))
    src = SqueezedCW(beta_bar=0.7, sigma_c_bar=1e7, center_i=2e15, center_ii=1.4e15)
    s, c, _ = gain_functions_cw(2e15 + np.linspace(-3e7, 3e7, 101), src, "I")
    checks.append(("c^2 - s^2 = 1", float(np.max(np.abs(c * c - s * s - 1.0))) < 1e-12))
    rate = photon_rate_cw(SqueezedCW(0.01, 1e7, 2e15, 1.4e15))
    t_c = SqueezedCW(0.01, 1e7, 2e15, 1.4e15).t_c
    checks.append(("low-gain photon rate = beta^2/T_c", abs(rate * t_c / 1e-4 - 1) < 0.01))
    sep = SqueezedPulsed(1.0, 1e7, 1e7, 2e15, 1.4e15)
    dec = schmidt_decompose(sep)
    checks.append(("separable JSA has one mode", dec.n_modes == 1 and abs(dec.p[0] - 1) < 1e-6))
    corr = SqueezedPulsed(1.0, 1e7, 1e8, 2e15, 1.4e15)
    dec = schmidt_decompose(corr, trunc_tol=1e-8)
    mu = geometric_mode_ratio(corr)
    law = (1 - mu) * mu ** np.arange(10)
    checks.append((
        "Schmidt spectrum matches geometric law",
        float(np.max(np.abs(dec.p[:10] - law))) < 1e-6,
    ))
    sys4 = FourLevelSystem(
        2.0e15, 1.4e15, 1.3e15, 2.1e15,
        {"ba": 2e7, "cb": 5e6, "cd": 9e6, "da": 3e7},
        {"ba": 1e6, "cb": 0.0, "cd": 2e6, "da": 0.0},
    )
    ledger = energy_ledger(population_integrals_from_probability(1e-6, sys4, 1e-9), sys4)
    conserved = ledger.extinction - (ledger.total_scattered + ledger.total_absorbed)
    checks.append(("energy ledger conserves exactly", conserved == 0.0))

    failures = 0
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} oracle checks passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sqfluor",
        description="Two-photon excitation and fluorescence sweeps for a four-level emitter",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (
        ("aeff", True), ("cw-sweep", True), ("pulsed-sweep", True),
        ("schmidt", True), ("validate-config", True), ("self-test", False),
    ):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--reproducible", action="store_true")
    args = parser.parse_args(argv)

    if args.command == "self-test":
        return _self_test()
    try:
        cfg = load_config(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    for note in cfg.defaults_applied:
        print(f"default: {note}", file=_sys.stderr)
    handlers = {
        "aeff": _cmd_aeff,
        "cw-sweep": _cmd_cw_sweep,
        "pulsed-sweep": _cmd_pulsed_sweep,
        "schmidt": _cmd_schmidt,
        "validate-config": _cmd_validate,
    }
    return handlers[args.command](cfg, args)


if __name__ == "__main__":
    raise SystemExit(main())
