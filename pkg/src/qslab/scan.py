"""Parameter sweeps over (displacement, vibrational index) and figure data.

A scan point fixes the packet shape n and the lattice displacement dx, runs
the exact pipeline (prepare, decompose, overlap trace, bounds report) and
optionally the simulated measurement chain.  Outputs are flat CSV/JSON files
written atomically per point; identical configuration and seed give
byte-identical results.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import dynamics, eigensolve, interferometer, qsl
from .errors import ParameterError
from .model import LatticeModel, LatticeParams, PhysicalConstants

DEFAULT_SEED = 20260809
GRID_LABEL = "default-34 (package choice; log-spaced displacements)"


def default_grid() -> list[tuple[int, float]]:
    """34 scan points: log-spaced displacements per packet shape n = 0, 1, 2.

    The n = 0 ladder steps by 2^(1/3) from 0.04 so the 0.04/0.08/0.16
    reference displacements appear exactly; all series end at 0.5.
    """
    ladder = [0.04 * 2 ** (k / 3.0) for k in range(11)]
    points = [(0, dx) for dx in ladder] + [(0, 0.5)]
    points += [(1, dx) for dx in ladder[:10]] + [(1, 0.5)]
    points += [(2, dx) for dx in ladder[:10]] + [(2, 0.5)]
    return points


@dataclass(frozen=True)
class ScanConfig:
    points: tuple = tuple(default_grid())
    params: LatticeParams = field(default_factory=LatticeParams)
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    estimator: str = "exact"            # "exact" | "experiment"
    seed: int = DEFAULT_SEED
    out_dir: str = "qslab-out"
    time_points: int = 64
    workers: int = 2
    curves: bool = True
    curve_points: int = 25
    ramsey: interferometer.RamseyConfig = field(
        default_factory=interferometer.RamseyConfig)
    state_point: tuple | None = None    # (n, dx) from the config's state section

    def __post_init__(self):
        if self.estimator not in ("exact", "experiment"):
            raise ParameterError(f"estimator must be 'exact' or 'experiment', got {self.estimator!r}")
        if self.time_points < 8:
            raise ParameterError("time grid needs at least 8 points")
        seen = set()
        for n, dx in self.points:
            if n not in (0, 1, 2):
                raise ParameterError(f"packet shape n must be 0, 1 or 2, got {n}")
            if not 0.0 < dx <= 0.5:
                raise ParameterError(f"displacement must lie in (0, 0.5], got {dx}")
            key = (n, round(dx, 12))
            if key in seen:
                raise ParameterError(f"duplicate scan point {key}")
            seen.add(key)


def load_config(path: str) -> ScanConfig:
    """Build a ScanConfig from a nested key-value YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ScanConfig:
    lat = raw.get("lattice", {})
    params = LatticeParams(
        wavelength=float(lat.get("wavelength_nm", 866.0)) * 1e-9,
        depth_at_zero=float(lat.get("depth_Er", 270.0)),
        sites=int(lat.get("sites", 33)),
        points_per_site=int(lat.get("points_per_site", 64)),
    )
    scan = raw.get("scan", {})
    pts = scan.get("points")
    points = tuple((int(n), float(dx)) for n, dx in pts) if pts else tuple(default_grid())
    state = raw.get("state", {})
    state_point = None
    if "dx_halflambda" in state:
        state_point = (int(state.get("n", 0)), float(state["dx_halflambda"]))
    ram = raw.get("ramsey", {})
    ramsey = interferometer.RamseyConfig(
        phase_grid=interferometer.default_phase_grid(int(ram.get("phases", 12))),
        atoms_per_shot=int(ram.get("atoms_per_shot", 20)),
        repetitions=int(ram.get("repetitions", 10)),
        loss_fraction=float(ram.get("loss_fraction", 0.05)),
        light_shift_slope=float(ram.get("light_shift_slope_rad_per_us", 0.0)),
    )
    return ScanConfig(
        points=points,
        params=params,
        estimator=str(scan.get("estimator", "exact")),
        seed=int(scan.get("seed", DEFAULT_SEED)),
        out_dir=str(scan.get("out", "qslab-out")),
        time_points=int(scan.get("time_points", 64)),
        workers=int(scan.get("workers", 2)),
        curves=bool(scan.get("curves", True)),
        curve_points=int(scan.get("curve_points", 25)),
        ramsey=ramsey,
        state_point=state_point,
    )


@dataclass
class PointResult:
    n: int
    dx: float
    model: LatticeModel
    e_n: float
    spectral: dynamics.SpectralState
    moments: dynamics.SpectralMoments
    trace: dynamics.OverlapTrace
    report: qsl.QslReport
    edge_probability: float
    records: list | None = None
    estimates: dict | None = None

    @property
    def label(self) -> str:
        return f"n{self.n}_dx{self.dx:.4f}"


class _DecompositionCache:
    """Per-displacement eigensolutions shared by the n = 0, 1, 2 points."""

    def __init__(self, params: LatticeParams, constants: PhysicalConstants):
        self.params = params
        self.constants = constants

    def solve(self, dx: float):
        model = LatticeModel.from_displacement(dx, self.params, self.constants)
        hamiltonian = model.hamiltonian("down")  # wells at integer sites; the
        # packet carries the relative displacement dx (see prepare_initial)
        eig = eigensolve.decompose(hamiltonian)
        site_e, site_states, _ = eigensolve.single_site_eigenstates(model, 3)
        return model, hamiltonian, eig, site_e, site_states


def run_point(n: int, dx: float, config: ScanConfig, solved=None,
              point_index: int = 0) -> PointResult:
    """Full pipeline for one (n, dx) combination."""
    if solved is None:
        solved = _DecompositionCache(config.params, config.constants).solve(dx)
    model, hamiltonian, eig, site_e, site_states = solved
    state = dynamics.prepare_initial(n, dx, model, site_states=site_states)
    spectral = dynamics.to_spectral(state, eig)
    moms = dynamics.moments(spectral)
    times = dynamics.default_times(moms, config.time_points)
    trace = dynamics.evolve_overlap(spectral, times)
    scale = model.recoil.time_us_per_unit
    rep = qsl.report(moms, trace, time_us_per_unit=scale)
    psi_end = dynamics.reconstruct(spectral, eig, times[-1])
    edge = dynamics.edge_probability(psi_end, model.grid)
    e_n = float(site_e[n] - site_e[0])
    result = PointResult(n=n, dx=dx, model=model, e_n=e_n, spectral=spectral,
                         moments=moms, trace=trace, report=rep,
                         edge_probability=edge)
    if config.estimator == "experiment":
        result.records, result.estimates = _run_experiment(result, config, point_index)
    return result


def _run_experiment(result: PointResult, config: ScanConfig, point_index: int):
    model = result.model
    scale = model.recoil.time_us_per_unit
    times_us = result.trace.times * scale
    visibility = result.trace.visibility
    phase = interferometer.fringe_phase(result.trace, result.e_n)
    point_seed = int(np.random.SeedSequence([config.seed, point_index]).generate_state(1)[0])
    ramsey = replace(config.ramsey, rng_seed=point_seed)
    records = interferometer.simulate_series(times_us, visibility, phase, ramsey)
    v_hat = np.array([r.fit.v for r in records])
    v_raw = np.array([r.fit.v_raw for r in records])
    phi_hat = np.array([r.fit.phi for r in records])
    tau_mt_us = result.report.tau_mt * scale
    hertz = model.recoil.hertz
    estimates = {}
    try:
        e_hat, e_err = interferometer.extract_mean_energy(
            times_us, phi_hat, result.e_n, ramsey.light_shift_slope, hertz, tau_mt_us)
        estimates.update(e_Er=e_hat, e_err_Er=e_err)
    except Exception as exc:  # noqa: BLE001 - recorded, not fatal
        estimates["e_error"] = str(exc)
    try:
        de_hat, de_err = interferometer.extract_uncertainty(times_us, v_raw, hertz, tau_mt_us)
        estimates.update(de_Er=de_hat, de_err_Er=de_err)
    except Exception as exc:  # noqa: BLE001
        estimates["de_error"] = str(exc)
    try:
        xi_hat, xi_cov = interferometer.extract_xi(times_us, v_hat, tau_mt_us)
        estimates.update(xi_fit=xi_hat, xi_err=float(np.sqrt(max(xi_cov[0, 0], 0.0))))
    except Exception as exc:  # noqa: BLE001
        estimates["xi_error"] = str(exc)
    return records, estimates


def coherent_reference_curve(alphas: np.ndarray) -> np.ndarray:
    """Orthogonalization-rate curve of a coherent excitation.

    E = homega alpha^2 and dE = homega alpha give, in units of the trap
    oscillation rate, inv_tau_ml = 4 alpha^2 and inv_tau_mt = 4 alpha; the
    two rates cross at alpha = 1.
    """
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0):
        raise ParameterError("alpha must be positive")
    return np.column_stack([4.0 * alphas**2, 4.0 * alphas])


def qubit_reference_curve(zetas: np.ndarray) -> np.ndarray:
    """Two-level limit: inv_tau_ml = 4 sin^2(zeta/2), inv_tau_mt = 2 sin(zeta)."""
    zetas = np.asarray(zetas, dtype=float)
    if np.any((zetas <= 0) | (zetas >= np.pi / 2.0)):
        raise ParameterError("zeta must lie in (0, pi/2)")
    return np.column_stack([4.0 * np.sin(zetas / 2.0) ** 2, 2.0 * np.sin(zetas)])


def lattice_reference_curves(config: ScanConfig, dx_values: np.ndarray) -> list[dict]:
    """Exact-model (inv_tau_ml, inv_tau_mt) curves, one per packet shape."""
    cache = _DecompositionCache(config.params, config.constants)
    rows = []
    for dx in dx_values:
        solved = cache.solve(float(dx))
        model = solved[0]
        for n in (0, 1, 2):
            state = dynamics.prepare_initial(n, float(dx), model, site_states=solved[4])
            moms = dynamics.moments(dynamics.to_spectral(state, solved[2]))
            rows.append({"n": n, "dx": float(dx),
                         "inv_tau_ml": 4.0 * moms.e / model.homega,
                         "inv_tau_mt": 4.0 * moms.de / model.homega})
    return rows


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _write_atomic(path, "\n".join(lines) + "\n")


def write_json(path: str, payload) -> None:
    _write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_point(result: PointResult, out_dir: str) -> None:
    pdir = os.path.join(out_dir, result.label)
    os.makedirs(pdir, exist_ok=True)
    scale = result.model.recoil.time_us_per_unit
    t_us = result.trace.times * scale
    write_csv(os.path.join(pdir, "trace.csv"),
              ["t_us", "re_A", "im_A", "abs_A", "fs_distance"],
              zip(t_us, result.trace.overlaps.real, result.trace.overlaps.imag,
                  result.trace.visibility, result.trace.fs_distance))
    write_json(os.path.join(pdir, "report.json"), result.report.to_json_dict())
    write_json(os.path.join(pdir, "diagnostics.json"), {
        "edge_probability": result.edge_probability,
        "e_n_Er": result.e_n,
        "depth_Er": result.model.depth,
        "homega_Er": result.model.homega,
        "theta_rad": result.model.theta,
    })
    if result.records is not None:
        rows = []
        for rec in result.records:
            for phi_r, ndown in zip(rec.phi_r, rec.n_down):
                rows.append((rec.t_us, phi_r, rec.n_total, ndown))
        write_csv(os.path.join(pdir, "fringes.csv"),
                  ["t_us", "phi_r", "n_total", "n_down"], rows)
        fits = [{"t_us": rec.t_us, "v": rec.fit.v, "v_err": rec.fit.v_err,
                 "phi": rec.fit.phi, "phi_err": rec.fit.phi_err}
                for rec in result.records]
        write_json(os.path.join(pdir, "fits.json"), fits)
        write_json(os.path.join(pdir, "estimates.json"), result.estimates)


def _figure_rows(results: list[PointResult], estimator: str):
    fig2, fig3, fig4 = [], [], []
    for res in results:
        scale = res.model.recoil.time_us_per_unit
        rep = res.report
        homega = res.model.homega
        t_us = res.trace.times * scale
        mt = np.asarray(qsl.mt_bound(rep.de, res.trace.times))
        ml = np.asarray(qsl.ml_bound(rep.e, res.trace.times))
        tau_c_us = rep.tau_c * scale if rep.tau_c is not None else ""
        for row in zip(t_us, res.trace.visibility, mt, ml):
            fig2.append((res.label, *row, tau_c_us))
        if estimator == "experiment" and res.estimates and "de_Er" in res.estimates:
            e_val = res.estimates.get("e_Er", rep.e)
            de_val = res.estimates["de_Er"]
            xi_val = res.estimates.get("xi_fit", rep.xi_fit)
        else:
            e_val, de_val, xi_val = rep.e, rep.de, rep.xi_fit
        fig3.append((res.n, res.dx, 4.0 * e_val / homega, 4.0 * de_val / homega,
                     "ML" if de_val > e_val else "MT", tau_c_us))
        xi = max(xi_val, 0.0)
        fig4.append((res.n, res.dx, de_val / homega, xi, xi**0.25,
                     int(res.dx > 0.25)))
    return fig2, fig3, fig4


def run_scan(config: ScanConfig) -> dict:
    """Execute every scan point, write artifacts, return the summary."""
    os.makedirs(config.out_dir, exist_ok=True)
    by_dx: dict[float, list[int]] = {}
    for n, dx in config.points:
        by_dx.setdefault(round(float(dx), 12), []).append(n)
    cache = _DecompositionCache(config.params, config.constants)
    point_order = {(n, round(float(dx), 12)): i for i, (n, dx) in enumerate(config.points)}
    results: dict[int, PointResult] = {}
    failures = []

    def run_group(dx_key: float):
        group_results, group_failures = [], []
        try:
            solved = cache.solve(dx_key)
        except Exception as exc:  # noqa: BLE001 - continue-on-error policy
            for n in by_dx[dx_key]:
                group_failures.append({"point": f"n{n}_dx{dx_key:.4f}", "error": str(exc)})
            return group_results, group_failures
        for n in by_dx[dx_key]:
            idx = point_order[(n, dx_key)]
            try:
                group_results.append((idx, run_point(n, dx_key, config, solved, idx)))
            except Exception as exc:  # noqa: BLE001
                group_failures.append({"point": f"n{n}_dx{dx_key:.4f}", "error": str(exc)})
        return group_results, group_failures

    workers = max(1, config.workers)
    if workers == 1:
        batches = [run_group(k) for k in by_dx]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run_group, by_dx))
    for group_results, group_failures in batches:
        failures.extend(group_failures)
        for idx, res in group_results:
            results[idx] = res
    ordered = [results[i] for i in sorted(results)]
    for res in ordered:
        _write_point(res, config.out_dir)

    fig2, fig3, fig4 = _figure_rows(ordered, config.estimator)
    write_csv(os.path.join(config.out_dir, "fig2.csv"),
              ["point", "t_us", "abs_A", "mt_bound", "ml_bound", "tau_c_us"], fig2)
    write_csv(os.path.join(config.out_dir, "fig3.csv"),
              ["n", "dx", "inv_tau_ml", "inv_tau_mt", "regime", "tau_c_us"], fig3)
    write_csv(os.path.join(config.out_dir, "fig4.csv"),
              ["n", "dx", "de_over_homega", "xi", "xi_fourth_root", "nonharmonic"], fig4)
    if config.curves:
        dx_curve = np.geomspace(0.025, 0.5, config.curve_points)
        rows = [(r["n"], r["dx"], r["inv_tau_ml"], r["inv_tau_mt"])
                for r in lattice_reference_curves(config, dx_curve)]
        write_csv(os.path.join(config.out_dir, "fig3_curves.csv"),
                  ["n", "dx", "inv_tau_ml", "inv_tau_mt"], rows)
        zetas = np.linspace(0.02, np.pi / 2.0 - 0.02, 40)
        write_csv(os.path.join(config.out_dir, "fig3_qubit.csv"),
                  ["zeta", "inv_tau_ml", "inv_tau_mt"],
                  [(z, *row) for z, row in zip(zetas, qubit_reference_curve(zetas))])
        alphas = np.geomspace(0.05, 3.0, 40)
        write_csv(os.path.join(config.out_dir, "fig3_coherent.csv"),
                  ["alpha", "inv_tau_ml", "inv_tau_mt"],
                  [(a, *row) for a, row in zip(alphas, coherent_reference_curve(alphas))])

    violations = sum(1 for r in ordered if r.report.min_margin < -qsl.BOUND_MARGIN_TOL)
    summary = {
        "grid": GRID_LABEL if tuple(config.points) == tuple(default_grid()) else "custom",
        "points_completed": len(ordered),
        "points_failed": len(failures),
        "bound_violations": violations,
        "estimator": config.estimator,
        "seed": config.seed,
    }
    write_json(os.path.join(config.out_dir, "summary.json"), summary)
    if failures:
        write_json(os.path.join(config.out_dir, "failures.json"), failures)
    return summary


def aggregate_reports(out_dir: str) -> dict:
    """Rebuild the summary from per-point report.json files on disk."""
    points = []
    for name in sorted(os.listdir(out_dir)):
        rpath = os.path.join(out_dir, name, "report.json")
        if os.path.isfile(rpath):
            with open(rpath, "r", encoding="utf-8") as fh:
                rep = json.load(fh)
            rep["point"] = name
            points.append(rep)
    violations = sum(1 for rep in points
                     if rep["min_margin"] is not None and rep["min_margin"] < -qsl.BOUND_MARGIN_TOL)
    summary = {"points": len(points), "bound_violations": violations}
    write_json(os.path.join(out_dir, "aggregate.json"),
               {"summary": summary, "reports": points})
    return summary
