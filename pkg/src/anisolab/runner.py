"""Scenario orchestration, run reports and plot-ready exports."""

from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import (ConfigError, ScenarioConfig, as_int_array, build_cones, build_halfplane, build_leaves,
                     build_map, build_params, build_weight)
from .determinant import (determinant_series, essential_radius_bound, find_zeros, k_stable_eigenvalues,
                          linear_bound_inputs, match_zeros_spectrum, orbit_bound_inputs, orbit_sums)
from .norms import (AnisoParams, halfplane_blowup_experiment, indicator_multiplier_probe, triebel_norm, u_norm,
                    w_dagger_norm)
from .spectral import ChiProfile, FourierField, SparseField, build_filter_bank, random_field
from .torus import TorusMap, Weight, lyapunov_exponents
from .transfer import (STRUCTURAL_CONSTANT, assemble_matrix, compact_tail_decay, cone_stats, leaf_distortion,
                       ly_measured_growth, ly_theoretical_bound, spectrum, split_bounded_compact,
                       transfer_operator)

RUN_SUBCOMMANDS = ("spectrum", "determinant", "norm", "ly-check", "lyapunov", "pathology", "probe-indicator",
                   "match")


class StageError(RuntimeError):
    """A module error raised inside a named stage of a scenario."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.original = exc


def _table(columns, rows, units=None) -> dict:
    rows = [[_num(v) for v in r] for r in rows]
    return {"columns": list(columns), "units": list(units or ["1"] * len(columns)), "rows": rows}


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def git_hash(data: bytes) -> str:
    """Hash of ``data`` computed the way git hashes a blob."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class RunReport:
    """Everything produced by one scenario run.

    ``report_hash`` covers all fields except ``timings``, so two runs with
    the same config and seed in deterministic mode share it.
    """

    subcommand: str
    config: dict
    config_hash: str
    seed: int
    deterministic: bool
    outputs: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    version: str = __version__
    report_hash: str = ""

    def content(self) -> dict:
        d = _jsonable(asdict(self))
        d.pop("timings")
        d.pop("report_hash")
        return d

    def compute_hash(self) -> str:
        blob = json.dumps(self.content(), sort_keys=True, separators=(",", ":")).encode()
        return git_hash(blob)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


class _Stages:
    def __init__(self, report: RunReport):
        self.report = report

    @contextlib.contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except (ConfigError, StageError):
            raise
        except Exception as exc:  # attribute module errors to the stage
            raise StageError(name, exc) from exc
        finally:
            self.report.timings[name] = time.perf_counter() - t0


# -- subcommands ---------------------------------------------------------------

def _spectra(cfg: ScenarioConfig, rep: RunReport, stage):
    tmap, g = build_map(cfg), build_weight(cfg)
    e = cfg.experiment
    eigs = {}
    for K in e.K:
        with stage(f"assemble K={K}"):
            M = assemble_matrix(tmap, g, K)
        with stage(f"eigensolve K={K}"):
            res = spectrum(M, how_many=e.how_many)
        eigs[K] = res.eigenvalues
        rows = [(z.real, z.imag, abs(z), r) for z, r in zip(res.eigenvalues, res.residuals)]
        rep.tables[f"eigenvalues_K{K}"] = _table(("re", "im", "modulus", "residual"), rows)
        rep.outputs[f"spectrum_K{K}"] = {"method": res.method, "converged": res.converged, "grid": M.grid,
                                         "dim": M.dim, "nnz": int(M.matrix.nnz) if M.is_sparse
                                         else int(np.count_nonzero(M.matrix))}
        rep.verdicts[f"residuals_K{K}"] = bool(np.all(np.asarray(res.residuals) < 1e-8))
    Ks = sorted(eigs)
    fine = eigs[Ks[-1]]
    rep.tables["eigenvalues"] = rep.tables[f"eigenvalues_K{Ks[-1]}"]
    if len(Ks) > 1:
        stable = k_stable_eigenvalues(eigs[Ks[-2]], fine, e.match_radius, e.match_tol)
    else:
        stable = np.array([lam for lam in fine if abs(lam) >= e.match_radius])
    rep.outputs["k_stable_eigenvalues"] = stable
    return stable


def _determinant(cfg: ScenarioConfig, rep: RunReport, stage):
    tmap, g = build_map(cfg), build_weight(cfg)
    e = cfg.experiment
    with stage("orbit sums"):
        sums = orbit_sums(tmap, g, e.n_max)
    with stage("series"):
        series = determinant_series(sums, e.n_max)
    with stage("zeros"):
        R = series.trust_radius if e.search_radius <= 0 else min(e.search_radius, series.trust_radius)
        zs = find_zeros(series, R, e.residual_tol, e.movement_tol)
    rep.tables["orbit_sums"] = _table(("n", "S_re", "S_im", "point_count", "partial"),
                                      [(n + 1, complex(s).real, complex(s).imag, c, p) for n, (s, c, p)
                                       in enumerate(zip(sums.sums, sums.point_counts, sums.partial))])
    rep.tables["coefficients"] = _table(("j", "re", "im"),
                                        [(j, complex(c).real, complex(c).imag) for j, c in enumerate(series.coeffs)])
    rep.tables["zeros"] = _table(("re", "im", "modulus", "inverse_modulus", "residual"),
                                 [(z.real, z.imag, abs(z), 1 / abs(z), r) for z, r in zip(zs.zeros, zs.residuals)])
    rep.outputs["series"] = series.to_dict()
    rep.outputs["zeros"] = zs.to_dict()
    rep.verdicts["orbit_tables_complete"] = not any(sums.partial)
    rep.verdicts["zeros_stable"] = not zs.unstable
    return zs


def run_spectrum(cfg, rep, stage):
    _spectra(cfg, rep, stage)


def run_determinant(cfg, rep, stage):
    _determinant(cfg, rep, stage)


def run_match(cfg, rep, stage):
    stable = _spectra(cfg, rep, stage)
    zs = _determinant(cfg, rep, stage)
    e = cfg.experiment
    with stage("match"):
        m = match_zeros_spectrum(zs, stable, e.match_radius, e.match_tol)
    rep.outputs["match"] = m.to_dict()
    rep.tables["matches"] = _table(("zero_re", "zero_im", "eig_re", "eig_im", "distance"),
                                   [(z.real, z.imag, lam.real, lam.imag, d) for z, lam, d in m.pairs])
    rep.verdicts["all_matched"] = m.all_matched


def _probe_field(cfg: ScenarioConfig, rng) -> FourierField:
    f = cfg.field
    N = cfg.grid.N
    if f.kind == "mode":
        return FourierField.mode(N, f.k)
    return random_field(N, f.band, rng, f.decay)


def run_norm(cfg, rep, stage):
    rng = np.random.default_rng(cfg.output.seed)
    tmap = build_map(cfg)
    params = build_params(cfg)
    cones = build_cones(cfg, tmap)
    leaves = build_leaves(cfg, tmap)
    bank = build_filter_bank(cfg.grid.N, ChiProfile(cfg.chi.kind))
    phi = _probe_field(cfg, rng)
    with stage("u_norm"):
        nr = u_norm(phi, params, leaves, bank)
    with stage("w_dagger_norm"):
        wd = w_dagger_norm(phi, cones, params.t, min(params.s, 0.0), params.p)
    with stage("triebel_norm"):
        tr = triebel_norm(phi, params.t, params.s, params.p, stable_angle=cones.axis_minus)
    ids = [lf.leaf_id for lf in leaves]
    rep.tables["u_norm"] = _table(("leaf_index", "level", "value"),
                                  [(ids.index(lid), lvl, v) for lid, lvl, v in nr.table])
    rep.outputs.update({"u_norm": nr.value, "argmax_leaf": nr.argmax_leaf, "argmax_level": nr.argmax_level,
                        "leaf_ids": ids, "flags": nr.flags, "w_dagger_norm": wd, "triebel_norm": tr})
    rep.verdicts["u_norm_finite"] = bool(math.isfinite(nr.value))


def _weight_bounds(tmap: TorusMap, g: Weight, grid: int = 64):
    """``sup|g|`` and a ``C^1`` proxy ``sup|g| + sup|grad g|`` on a grid."""
    if g.is_constant_on(tmap):
        v = abs(g.constant_value(tmap))
        return v, v
    u = (np.arange(grid) + 0.5) / grid
    X = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1).reshape(-1, 2)
    h = 1e-5
    val = np.abs(g.evaluate(tmap, X))
    d1 = np.abs(g.evaluate(tmap, X + [h, 0]) - g.evaluate(tmap, X - [h, 0])) / (2 * h)
    d2 = np.abs(g.evaluate(tmap, X + [0, h]) - g.evaluate(tmap, X - [0, h])) / (2 * h)
    return float(val.max()), float(val.max() + max(d1.max(), d2.max()))


def run_ly_check(cfg, rep, stage):
    tmap, g = build_map(cfg), build_weight(cfg)
    params = build_params(cfg)
    cones = build_cones(cfg, tmap)
    leaves = build_leaves(cfg, tmap)
    e = cfg.experiment
    exact = tmap.is_linear and g.is_constant_on(tmap)
    with stage("cone stats"):
        stats = cone_stats(tmap, cones)
        f_sup, f_cr = _weight_bounds(tmap, g)
        leaf_factor = leaf_distortion(tmap, leaves[0], params.r)
        nu = ly_theoretical_bound(stats, f_sup, f_cr, params.t, params.s, params.p, leaf_factor)
    with stage("essential radius bound"):
        if exact:
            Q = essential_radius_bound(linear_bound_inputs(tmap, g), params.t, params.s, params.r)
        else:
            Q = essential_radius_bound(orbit_bound_inputs(tmap, g, range(1, 9)), params.t, params.s, params.r)
    with stage("measured growth"):
        if exact:
            N = e.probe_N
            probes = [(f"mode{tuple(k)}", SparseField(N, as_int_array([k]), np.array([1.0 + 0j])))
                      for k in e.probe_modes]
        else:
            N = cfg.grid.N
            rng = np.random.default_rng(cfg.output.seed)
            probes = [(f"random{i}", random_field(N, N // 4, rng, 1.5)) for i in range(2)]
        bank = build_filter_bank(N, ChiProfile(cfg.chi.kind))
        ly = ly_measured_growth(probes, tmap, g, params, leaves, bank, e.m_max, None if e.n0 < 0 else e.n0,
                                nu, Q.Q)
    rep.outputs.update({"cone_stats": stats.to_dict(), "ly_bound": nu.to_dict(), "Q": Q.Q, "Q_mode": Q.mode,
                        "Q_sequence": Q.sequence, "rates": ly.rates, "probe_ids": ly.probes})
    rep.constants["structural_constant"] = STRUCTURAL_CONSTANT
    for i, pid in enumerate(ly.probes):
        rows = [(m, r, nu.nu_b, Q.Q) for m, r in enumerate(ly.ratios[pid])]
        rep.tables[f"ly_{i}"] = _table(("m", "ratio", "bound_nu_b", "bound_Q"), rows)
        rep.verdicts[f"rate_within_Q_{i}"] = bool(ly.rates[pid] <= 1.25 * Q.Q)
    rep.tables["ly"] = rep.tables["ly_0"]
    if e.tail_decay:
        with stage("compact tail"):
            Nt = cfg.grid.N
            bank_t = build_filter_bank(Nt, ChiProfile(cfg.chi.kind))
            phi = random_field(Nt, Nt // 2 - 1, np.random.default_rng(cfg.output.seed))
            sp = split_bounded_compact(transfer_operator(tmap, g), phi, bank_t, cones, cones, stats, e.m0)
            tparams = AnisoParams(params.t, params.s, params.p, params.q, e.tail_r)
            td = compact_tail_decay(sp, bank_t, tparams, leaves, range(1, bank_t.n_max + 1), e.tail_r,
                                    e.tail_delta)
        rep.tables["tail_decay"] = _table(("n0", "value"), list(zip(td.n0, td.values)))
        rep.outputs["tail_decay"] = td.to_dict()
        rep.outputs["split_completeness_defect"] = sp.completeness_defect
        rep.verdicts["split_complete"] = sp.completeness_defect < 1e-10
        rep.verdicts["tail_exponent"] = bool(td.exponent >= td.predicted - 0.3)


def run_lyapunov(cfg, rep, stage):
    tmap = build_map(cfg)
    with stage("lyapunov"):
        chi_u, chi_s = lyapunov_exponents(tmap, cfg.experiment.n_iter, seed=cfg.output.seed)
    lu = tmap.eigen_data()[0]
    rep.outputs.update({"chi_u": chi_u, "chi_s": chi_s, "log_lambda_u_linear": math.log(lu)})
    rep.tables["lyapunov"] = _table(("chi_u", "chi_s", "log_lambda_u_linear"), [(chi_u, chi_s, math.log(lu))])
    rep.verdicts["hyperbolic"] = bool(chi_u > 0 > chi_s)


def run_pathology(cfg, rep, stage):
    e = cfg.experiment
    with stage("blow-up experiment"):
        res = halfplane_blowup_experiment(e.blowup_t, e.case, e.resolutions, e.phi_exponent)
    for run in res.runs:
        rows = list(zip(run.cutoffs, run.I, run.increments, run.control_I))
        rep.tables[f"blowup_N{run.N}"] = _table(("Lambda", "I", "increment", "control_I"), rows)
    rep.tables["blowup"] = rep.tables[f"blowup_N{max(r.N for r in res.runs)}"]
    rep.outputs.update({"case": res.case, "loglog_slopes": {r.N: r.loglog_slope for r in res.runs},
                        "log_slopes": {r.N: r.log_slopes for r in res.runs},
                        "input_l2": {r.N: r.input_l2 for r in res.runs}, "verdicts_by_N": res.verdicts,
                        "law": res.law})
    checks = ["increasing", "diverges"]
    if e.blowup_t > 0:
        checks.append("control_decaying")
    checks.append("law_consistent" if res.case == "boundary-in-Cplus" else "log_slope_stable")
    for c in checks:
        rep.verdicts[c] = all(v.get(c, False) for v in res.verdicts.values())


def _smooth_probe(x1, x2):
    return np.exp(np.cos(2 * np.pi * x1) + np.sin(2 * np.pi * (x1 + 2 * x2)))


def run_probe_indicator(cfg, rep, stage):
    tmap = build_map(cfg)
    params = build_params(cfg)
    cones = build_cones(cfg, tmap)
    leaves = build_leaves(cfg, tmap)
    e = cfg.experiment
    probes = [("smooth", _smooth_probe)]
    if cfg.field.kind == "mode":
        k = cfg.field.k
        probes.append((f"mode{tuple(k)}", lambda x1, x2: np.cos(2 * np.pi * (k[0] * x1 + k[1] * x2))))
    with stage("indicator probe"):
        pr = indicator_multiplier_probe(probes, params, build_halfplane(cfg), leaves, e.probe_resolutions,
                                        ChiProfile(cfg.chi.kind), cones)
    for i, (pid, _) in enumerate(probes):
        rows = [(r[1], r[2], r[3], r[4], r[5]) for r in pr.rows if r[0] == pid]
        rep.tables[f"probe_{i}"] = _table(("N", "u_norm", "u_norm_product", "ratio", "w_dagger_ratio"), rows)
    rep.outputs.update({"probe_ids": [p for p, _ in probes], "plateau": pr.plateau,
                        "transversality": pr.transversality, "halfplane": pr.halfplane})
    rep.verdicts["resolutions_increasing"] = all(np.diff(e.probe_resolutions) > 0) if len(
        e.probe_resolutions) > 1 else True


_DISPATCH = {"spectrum": run_spectrum, "determinant": run_determinant, "match": run_match, "norm": run_norm,
             "ly-check": run_ly_check, "lyapunov": run_lyapunov, "pathology": run_pathology,
             "probe-indicator": run_probe_indicator}


def run_scenario(config: ScenarioConfig, subcommand: str, out_dir=None, seed: int | None = None,
                 threads: int | None = None, deterministic: bool | None = None) -> RunReport:
    """Run one subcommand and, when ``out_dir`` is given, write ``report.json`` and CSV tables there.

    ``seed``, ``threads`` and ``deterministic`` override the config's output
    section; the effective values are echoed in the report.  Deterministic
    mode pins BLAS/FFT thread pools to one thread.
    """
    if subcommand not in _DISPATCH:
        raise ConfigError(f"unknown subcommand {subcommand!r}; expected one of {RUN_SUBCOMMANDS}")
    over = {}
    if seed is not None:
        over["seed"] = int(seed)
    if threads is not None:
        over["threads"] = int(threads)
    if deterministic is not None:
        over["deterministic"] = bool(deterministic)
    if out_dir is not None:
        over["dir"] = str(out_dir)
    cfg = config.replace("output", **over) if over else config
    toml = cfg.to_toml()
    rep = RunReport(subcommand, cfg.to_dict(), git_hash(toml.encode()), cfg.output.seed, cfg.output.deterministic)
    n_threads = 1 if cfg.output.deterministic else cfg.output.threads
    with threadpool_limits(limits=n_threads):
        _DISPATCH[subcommand](cfg, rep, _Stages(rep))
    rep.outputs = _jsonable(rep.outputs)
    rep.report_hash = rep.compute_hash()
    if out_dir is not None:
        write_report(rep, out_dir)
    return rep


def write_report(rep: RunReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(rep.to_json(indent=1))
        fh.write("\n")
    for name, tab in rep.tables.items():
        with open(os.path.join(out_dir, f"{name}.csv"), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(tab["columns"])
            for row in tab["rows"]:
                w.writerow([repr(v) for v in row])


def load_report(path) -> RunReport:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return RunReport(**d)


# -- plot exports ----------------------------------------------------------------

def _derived_columns(which: str, tab: dict):
    cols, rows = tab["columns"], tab["rows"]
    idx = {c: i for i, c in enumerate(cols)}
    if which == "eigenvalues":
        return ("re", "im", "modulus"), ("1", "1", "1"), [[r[idx["re"]], r[idx["im"]], r[idx["modulus"]]]
                                                          for r in rows]
    if which == "blowup":
        out = []
        for r in rows:
            lam, val = r[idx["Lambda"]], r[idx["I"]]
            out.append([lam, val, math.log(lam), math.log(val) if val > 0 else -math.inf])
        return ("Lambda", "I", "logLambda", "logI"), ("frequency", "1", "1", "1"), out
    if which == "ly":
        keep = ("m", "ratio", "bound_nu_b", "bound_Q")
        return keep, ("iterate", "1", "1", "1"), [[r[idx[c]] for c in keep] for r in rows]
    return tuple(cols), tuple(tab.get("units", ["1"] * len(cols))), rows


def export_plot_data(report: RunReport, which: str, path=None) -> str:
    """Whitespace-separated columns of one report table with a commented header.

    ``which`` names a table; ``eigenvalues``, ``blowup`` and ``ly`` select
    the column sets (re, im, modulus), (Lambda, I, logLambda, logI) and
    (m, ratio, bound_nu_b, bound_Q).

    Raises:
        KeyError: if the report has no such table.
    """
    if which not in report.tables:
        raise KeyError(f"report has no table {which!r}; available: {sorted(report.tables)}")
    cols, units, rows = _derived_columns(which, report.tables[which])
    lines = [f"# {which}", "# columns: " + " ".join(cols), "# units: " + " ".join(units)]
    lines += [" ".join(repr(float(v)) for v in r) for r in rows]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
