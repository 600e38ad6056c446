"""Experiment orchestration: reference sweep, faulty-cell selection, full
healing runs, zone reporting, and plot-data emission.

Seeding: every episode's seed derives from the root seed as the first eight
bytes (little endian) of sha256("{root}:{purpose}:{index}"). The rule is
part of the output contract and must stay stable across versions: reruns of
a config+seed must produce byte-identical files.
"""

import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import oracle as oracle_mod
from .errors import EmptyFeasible
from .healer import HealingConfig, run_healing
from .simulator import run_episode
from .statlearn import fit, predict

NAN = float("nan")


def derive_seed(root, purpose, index=0):
    digest = hashlib.sha256(f"{root}:{purpose}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def fmt(value):
    """CSV cell: 9 significant digits, empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.9g}"
    return str(value)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def episode_rows(episode_id, layout, report):
    rows = []
    for e in layout.enbs:
        rows.append((episode_id, e.id, e.alpha, report.arrivals[e.id],
                     report.blocks[e.id], report.completions[e.id],
                     report.bcr_pct[e.id], report.ftt_s[e.id]))
    return rows


EPISODE_HEADER = ("episode_id", "enb_id", "alpha", "arrivals", "blocks",
                  "completions", "bcr_pct", "ftt_s")


def write_episode_csv(path, episode_id, layout, report):
    write_csv(path, EPISODE_HEADER, episode_rows(episode_id, layout, report))


def write_matrix_csv(path, matrix):
    header = ("enb_id",) + tuple(str(i) for i in matrix.ids)
    rows = [(c,) + tuple(float(matrix.values[ci, ji]) for ji in range(len(matrix.ids)))
            for ci, c in enumerate(matrix.ids)]
    write_csv(path, header, rows)


def read_matrix_csv(path):
    from .simulator import InterferenceMatrix

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids = tuple(int(v) for v in header[1:])
        values = np.array([[float(v) for v in row[1:]] for row in reader])
    return InterferenceMatrix(ids=ids, values=values)


# --- single episodes --------------------------------------------------------

def simulate(cfg, seed=None, duration=None, warmup=None, alphas=None):
    """One episode under the config's scenario; returns (layout, report, matrix)."""
    layout = cfg.build_layout()
    if alphas is not None:
        layout = layout.with_alphas(alphas)
    report, matrix = run_episode(
        layout,
        cfg.propagation_params(),
        cfg.traffic_params(),
        duration=duration or cfg.sim.duration_s,
        warmup=warmup if warmup is not None else cfg.sim.warmup_s,
        seed=seed if seed is not None else derive_seed(cfg.seeds.root, "simulate"),
    )
    return layout, report, matrix


def estimate_reference_matrix(cfg, duration=None):
    """Coupling matrix at the reference setting over the longer matrix window."""
    _, _, matrix = simulate(
        cfg,
        seed=derive_seed(cfg.seeds.root, "matrix"),
        duration=duration or cfg.sim.matrix_duration_s,
    )
    return matrix


# --- reference sweep --------------------------------------------------------

def _sweep_job(args):
    cfg, alpha, seed = args
    base = cfg.build_layout()
    layout = base.with_alphas([alpha] * base.n_enbs)
    report, _ = run_episode(layout, cfg.propagation_params(), cfg.traffic_params(),
                            duration=cfg.sim.duration_s, warmup=cfg.sim.warmup_s, seed=seed)
    return alpha, report.mean_bcr(), report.mean_ftt()


def sweep_grid(alpha_min, alpha_max, step):
    n = int(math.floor((alpha_max - alpha_min) / step + 1e-9)) + 1
    return [alpha_min + i * step for i in range(n)]


def sweep(cfg, alpha_min=None, alpha_max=None, step=None):
    """Network-wide alpha sweep: every eNB gets the same value, one episode
    per grid point. Returns rows (alpha, mean_bcr, mean_ftt)."""
    s = cfg.sweep
    alphas = sweep_grid(alpha_min if alpha_min is not None else s.alpha_min,
                        alpha_max if alpha_max is not None else s.alpha_max,
                        step if step is not None else s.alpha_step)
    jobs = [(cfg, a, derive_seed(cfg.seeds.root, "sweep", i)) for i, a in enumerate(alphas)]
    if s.workers > 1:
        with ProcessPoolExecutor(max_workers=s.workers) as pool:
            return list(pool.map(_sweep_job, jobs))
    return [_sweep_job(j) for j in jobs]


def pick_reference(rows, band_pct=2.0):
    """Smallest alpha whose mean BCR and FTT both sit within the tolerance
    band above their respective minima (least power, least interference)."""
    usable = [(a, b, f) for a, b, f in rows if b is not None and f is not None]
    if not usable:
        usable = [(a, b if b is not None else 0.0, f if f is not None else 0.0)
                  for a, b, f in rows]
    if not usable:
        raise EmptyFeasible("sweep table is empty")
    bcr_min = min(b for _, b, _ in usable)
    ftt_min = min(f for _, _, f in usable)
    for band in (band_pct, 2.0 * band_pct):
        tol_b = abs(bcr_min) * band / 100.0
        tol_f = abs(ftt_min) * band / 100.0
        ok = [a for a, b, f in usable if b <= bcr_min + tol_b and f <= ftt_min + tol_f]
        if ok:
            return min(ok)
    raise EmptyFeasible("no alpha satisfies both KPI tolerance bands")


def select_faulty(report):
    """Worst cell by combined rank: rank 1 is the worst value of each KPI,
    absent KPIs rank best; smallest rank sum wins, ties to the smaller id."""
    ids = sorted(report.bcr_pct)

    def ranks(values):
        out = {}
        for i in ids:
            v = values[i]
            if v is None:
                out[i] = len(ids)
                continue
            worse = sum(1 for j in ids if values[j] is not None and values[j] > v)
            out[i] = worse + 1
        return out

    bcr_rank = ranks(report.bcr_pct)
    ftt_rank = ranks(report.ftt_s)
    return min(ids, key=lambda i: (bcr_rank[i] + ftt_rank[i], i))


# --- healing ----------------------------------------------------------------

@dataclass
class ZoneRow:
    zone: str  # innermost zone: "optimization" or "evaluation"
    enb_id: int
    ref_bcr: object
    opt_bcr: object
    bcr_improvement_pct: object
    ref_ftt: object
    opt_ftt: object
    ftt_improvement_pct: object


@dataclass
class ZoneReport:
    faulty: int
    tier1: list
    tier2: list
    rows: list = field(default_factory=list)

    @property
    def optimization_zone(self):
        return [self.faulty] + list(self.tier1)

    @property
    def evaluation_zone(self):
        return self.optimization_zone + list(self.tier2)


def _improvement(ref, opt):
    if ref is None or opt is None or ref == 0:
        return None
    return 100.0 * (ref - opt) / ref


def build_zone_report(faulty, tier1, tier2, ref_report, opt_report):
    rep = ZoneReport(faulty=faulty, tier1=list(tier1), tier2=list(tier2))
    for enb in rep.evaluation_zone:
        zone = "optimization" if enb in rep.optimization_zone else "evaluation"
        rb, ob = ref_report.bcr_pct[enb], opt_report.bcr_pct[enb]
        rf, of = ref_report.ftt_s[enb], opt_report.ftt_s[enb]
        rep.rows.append(ZoneRow(zone, enb, rb, ob, _improvement(rb, ob),
                                rf, of, _improvement(rf, of)))
    return rep


@dataclass
class HealOutcome:
    faulty: int
    tier1: list
    tier2: list
    state: object  # HealingState
    matrix: object
    reference_report: object
    optimized_report: object
    reference_layout: object
    optimized_layout: object
    zone_report: ZoneReport
    measured_reference_cost: float
    measured_optimized_cost: float

    @property
    def converged_alpha(self):
        return self.state.pivot_alpha


def healing_config_from(cfg, faulty, tier1):
    h = cfg.healing
    return HealingConfig(
        faulty_enb=faulty,
        tier1=tuple(tier1),
        bcr_threshold_pct=h.bcr_threshold_pct,
        bcr_discount=h.bcr_discount,
        init_alphas=tuple(h.init_alphas),
        alpha_grid_step=h.alpha_grid_step,
        convergence_tol=h.convergence_tol,
        max_iterations=h.max_iterations,
        min_optimization_iterations=h.min_optimization_iterations,
    )


def _zone_kpis(report, zone):
    out = {}
    for enb in zone:
        ftt = report.ftt_s[enb]
        bcr = report.bcr_pct[enb]
        out[enb] = (NAN if ftt is None else ftt, NAN if bcr is None else bcr)
    return out


def _weighted_cost(kpis, weights, faulty):
    total = kpis[faulty][0]
    for j, w in weights.items():
        total += w * kpis[j][0]
    return float(total)


def heal(cfg):
    """Full healing run against the simulator.

    The optimized-vs-reference comparison episode reuses the reference
    episode's seed (common random numbers), so KPI deltas are paired.
    """
    from .healer import coupling_weights

    layout = cfg.build_layout()
    prop = cfg.propagation_params()
    traffic = cfg.traffic_params()
    root = cfg.seeds.root

    ref_seed = derive_seed(root, "reference")
    ref_report, _ = run_episode(layout, prop, traffic, duration=cfg.sim.duration_s,
                                warmup=cfg.sim.warmup_s, seed=ref_seed)

    faulty = cfg.healing.faulty_enb
    if faulty < 0:
        faulty = select_faulty(ref_report)
    tier1 = sorted(cfg.healing.tier1) or layout.first_tier(faulty)
    tier2 = layout.second_tier(faulty)

    matrix = estimate_reference_matrix(cfg)
    healing_cfg = healing_config_from(cfg, faulty, tier1)

    def runner(alphas, iteration):
        tuned = layout.with_alphas(alphas)
        report, _ = run_episode(tuned, prop, traffic, duration=cfg.sim.duration_s,
                                warmup=cfg.sim.warmup_s,
                                seed=derive_seed(root, "heal", iteration))
        return _zone_kpis(report, [faulty] + list(tier1))

    state = run_healing(runner, healing_cfg, matrix)

    final_alphas = state.history[-1].alphas
    opt_layout = layout.with_alphas(final_alphas)
    opt_report, _ = run_episode(opt_layout, prop, traffic, duration=cfg.sim.duration_s,
                                warmup=cfg.sim.warmup_s, seed=ref_seed)

    weights = coupling_weights(matrix.row(faulty, tier1))
    zone = build_zone_report(faulty, tier1, tier2, ref_report, opt_report)
    return HealOutcome(
        faulty=faulty,
        tier1=list(tier1),
        tier2=list(tier2),
        state=state,
        matrix=matrix,
        reference_report=ref_report,
        optimized_report=opt_report,
        reference_layout=layout,
        optimized_layout=opt_layout,
        zone_report=zone,
        measured_reference_cost=_weighted_cost(_zone_kpis(ref_report, [faulty] + list(tier1)),
                                               weights, faulty),
        measured_optimized_cost=_weighted_cost(_zone_kpis(opt_report, [faulty] + list(tier1)),
                                               weights, faulty),
    )


@dataclass
class OracleOutcome:
    state: object
    params: object
    true_alpha: float
    true_cost: float

    @property
    def converged_alpha(self):
        return self.state.pivot_alpha


def oracle_params_from(cfg):
    o = cfg.oracle

    def curve(c):
        return oracle_mod.KpiCurve(lo=c.lo, hi=c.hi, mid=c.mid, slope=c.slope)

    return oracle_mod.OracleParams(
        coupling_row=tuple(o.coupling_row),
        noise_pct=o.noise_pct,
        ftt_faulty=curve(o.ftt_faulty),
        bcr_faulty=curve(o.bcr_faulty),
        ftt_tier=curve(o.ftt_tier),
        bcr_tier=curve(o.bcr_tier),
    )


def oracle_heal(cfg, seed=None):
    """Healing run against the analytic KPI oracle; reports the analytic
    constrained optimum alongside the loop's converged value."""
    params = oracle_params_from(cfg)
    o = cfg.oracle
    healing_cfg = oracle_mod.healing_config(
        params,
        bcr_threshold_pct=cfg.healing.bcr_threshold_pct,
        bcr_discount=o.bcr_discount,
        init_alphas=tuple(o.init_alphas),
        alpha_grid_step=cfg.healing.alpha_grid_step,
        convergence_tol=cfg.healing.convergence_tol,
        max_iterations=o.max_iterations,
        min_optimization_iterations=o.min_optimization_iterations,
    )
    run_seed = seed if seed is not None else derive_seed(cfg.seeds.root, "oracle")
    runner = oracle_mod.make_runner(params, run_seed)
    state = run_healing(runner, healing_cfg, oracle_mod.interference_matrix(params))
    true_alpha, true_cost = oracle_mod.true_constrained_optimum(params, healing_cfg)
    return OracleOutcome(state=state, params=params, true_alpha=true_alpha,
                         true_cost=true_cost)


# --- persistence ------------------------------------------------------------

TRACE_HEADER = ("k", "phase", "enb_id", "alpha", "ftt_s", "bcr_pct",
                "pivot_alpha", "predicted_cost", "measured_cost", "feasible")


def trace_rows(state):
    rows = []
    for rec in state.history:
        for enb in sorted(rec.kpis):
            ftt, bcr = rec.kpis[enb]
            alpha = rec.pivot_alpha if enb == state.config.faulty_enb else rec.alphas.get(enb)
            rows.append((rec.k, rec.phase, enb, alpha, ftt, bcr, None, None, None, None))
        rows.append((rec.k, rec.phase, None, None, None, None, rec.pivot_alpha,
                     rec.predicted_cost, rec.measured_cost, int(rec.feasible)))
    return rows


def write_trace_csv(path, state):
    write_csv(path, TRACE_HEADER, trace_rows(state))


def write_report_toml(path, outcome):
    lines = ["[healing]"]
    lines.append(f"faulty_enb = {outcome.faulty}")
    lines.append(f"tier1 = {list(outcome.tier1)}")
    lines.append(f"tier2 = {list(outcome.tier2)}")
    lines.append(f"converged = {str(outcome.state.converged).lower()}")
    lines.append(f"converged_alpha = {fmt(outcome.converged_alpha)}")
    lines.append(f"iterations = {outcome.state.iteration}")
    lines.append(f"measured_reference_cost = {fmt(outcome.measured_reference_cost)}")
    lines.append(f"measured_optimized_cost = {fmt(outcome.measured_optimized_cost)}")
    lines.append("")
    for row in outcome.zone_report.rows:
        lines.append(f"[[zone_rows]]")
        lines.append(f"zone = \"{row.zone}\"")
        lines.append(f"enb_id = {row.enb_id}")
        for name in ("ref_bcr", "opt_bcr", "bcr_improvement_pct",
                     "ref_ftt", "opt_ftt", "ftt_improvement_pct"):
            value = getattr(row, name)
            if value is not None:
                lines.append(f"{name} = {fmt(value)}")
        lines.append("")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines).rstrip() + "\n")


CURVE_SAMPLES = 200


def emit_plot_data(out_dir, state, zone_report=None):
    """Plot-ready CSVs: measured scatter per eNB per KPI against the pivot
    value, fitted curves on a dense grid, zone bars, and the evaluation-zone
    KPIs in descending order. Empty runs produce headers-only files."""
    os.makedirs(out_dir, exist_ok=True)
    files = {}

    scatter = []
    for rec in state.history:
        for enb in sorted(rec.kpis):
            ftt, bcr = rec.kpis[enb]
            scatter.append((enb, "ftt", rec.pivot_alpha, ftt))
            scatter.append((enb, "bcr", rec.pivot_alpha, bcr))
    files["scatter"] = os.path.join(out_dir, "plot_scatter.csv")
    write_csv(files["scatter"], ("enb_id", "kpi", "pivot_alpha", "value"), scatter)

    curves = []
    xs = np.linspace(1.0 / CURVE_SAMPLES, 1.0, CURVE_SAMPLES)
    for (enb, kpi), model in sorted(state.models.items()):
        for x in xs:
            curves.append((enb, kpi, float(x), float(predict(model, float(x)))))
    files["curves"] = os.path.join(out_dir, "plot_curves.csv")
    write_csv(files["curves"], ("enb_id", "kpi", "x", "predicted"), curves)

    bars = []
    ordered = []
    if zone_report is not None:
        for row in zone_report.rows:
            bars.append((row.zone, row.enb_id, "bcr", row.ref_bcr, row.opt_bcr,
                         row.bcr_improvement_pct))
            bars.append((row.zone, row.enb_id, "ftt", row.ref_ftt, row.opt_ftt,
                         row.ftt_improvement_pct))
        for kpi, ref_key, opt_key in (("bcr", "ref_bcr", "opt_bcr"),
                                      ("ftt", "ref_ftt", "opt_ftt")):
            refs = sorted(((getattr(r, ref_key), r.enb_id) for r in zone_report.rows
                           if getattr(r, ref_key) is not None), reverse=True)
            opts = sorted(((getattr(r, opt_key), r.enb_id) for r in zone_report.rows
                           if getattr(r, opt_key) is not None), reverse=True)
            for rank in range(max(len(refs), len(opts))):
                rv, ri = refs[rank] if rank < len(refs) else (None, None)
                ov, oi = opts[rank] if rank < len(opts) else (None, None)
                ordered.append((kpi, rank + 1, ri, rv, oi, ov))
    files["zone_bars"] = os.path.join(out_dir, "plot_zone_bars.csv")
    write_csv(files["zone_bars"],
              ("zone", "enb_id", "kpi", "reference", "optimized", "improvement_pct"), bars)
    files["ordered"] = os.path.join(out_dir, "plot_ordered.csv")
    write_csv(files["ordered"],
              ("kpi", "rank", "reference_enb", "reference_value",
               "optimized_enb", "optimized_value"), ordered)
    return files


def persist_heal(out_dir, cfg, outcome):
    """Write the full artefact set for a healing run; returns file paths."""
    files = {}
    files["reference_kpis"] = os.path.join(out_dir, "reference_kpis.csv")
    write_episode_csv(files["reference_kpis"], "reference",
                      outcome.reference_layout, outcome.reference_report)
    files["optimized_kpis"] = os.path.join(out_dir, "optimized_kpis.csv")
    write_episode_csv(files["optimized_kpis"], "optimized",
                      outcome.optimized_layout, outcome.optimized_report)
    files["matrix"] = os.path.join(out_dir, "matrix.csv")
    write_matrix_csv(files["matrix"], outcome.matrix)
    files["trace"] = os.path.join(out_dir, "trace.csv")
    write_trace_csv(files["trace"], outcome.state)
    files["report"] = os.path.join(out_dir, "report.toml")
    write_report_toml(files["report"], outcome)
    files.update(emit_plot_data(out_dir, outcome.state, outcome.zone_report))
    return files


# --- model record -----------------------------------------------------------

def fit_csv(in_path):
    """Fit a KPI curve to a 2-column (x, y) CSV; header row optional."""
    xs, ys = [], []
    with open(in_path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                continue  # header
            xs.append(x)
            ys.append(y)
    return fit(np.array(xs), np.array(ys))


def write_model_toml(path, model):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[model]\n")
        for name in ("beta0", "beta1", "y_lo", "y_hi", "residual_rms"):
            fh.write(f"{name} = {fmt(getattr(model, name))}\n")
        fh.write(f"n_samples = {model.n_samples}\n")
