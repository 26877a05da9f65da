"""Monte Carlo orchestration: replica runs, verdict assembly and report files.

Each replica draws one field; every window size in the N-list is cut from
that same field, so the per-N statistics are marginally exact and cost one
sample per replica. Replicas are processed in fixed chunks whose results are
concatenated and merged in chunk order, which makes every output independent
of the number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import basis, chaos, sampler
from .chaos import Normalization, TestFunction
from .config import ExperimentConfig, canonical_json
from .covariance import CovarianceModel, gradient_covariance, spectral_density
from .errors import ConfigError
from .hermite import HermiteExpansion, double_factorial, limit_constant
from .stats import (MomentAccumulator, Verdict, covariance_verdict, jackknife_covariance, ks_normal_test,
                    tree_merge, trend_verdict, variance_verdict)

FOURTH_MOMENT_K_SE = 4.0
KERNEL_RESOLUTION = 16
KERNEL_TOLERANCE = 0.01
CHUNK_BYTES = 2**26


# replica engine ---------------------------------------------------------------

@dataclass
class Plan:
    """Everything a worker needs to turn replica indices into statistics."""

    kind: str  # "torus" | "box"
    d: int
    M: int
    seed: int
    e: HermiteExpansion
    N_list: list
    f_names: list
    weights: dict  # (N, name) -> lattice weights
    scale: float = 1.0  # applied to the centered functional
    normalization: str = Normalization.CENTERED.value
    sqrt_lam: np.ndarray | None = None
    gradient_axis: int | None = None
    components: list = field(default_factory=list)
    linear: dict = field(default_factory=dict)  # (N, name) -> site weights of the first-chaos part
    K_max: int = 0  # > 0 requests Sobolev norms
    alpha: float = 0.0

    @property
    def chunk(self) -> int:
        cells = (self.M if self.kind == "torus" else self.M - 1) ** self.d
        return int(max(1, min(256, CHUNK_BYTES // (16 * cells))))


def _fields(plan: Plan, indices) -> np.ndarray:
    if plan.kind == "torus":
        rngs = [sampler.replica_rng(plan.seed, r) for r in indices]
        vals = sampler._circulant_fields(plan.sqrt_lam, rngs)
    else:
        vals = sampler.sample_gff_batch(plan.d, plan.M, plan.seed, indices)
    if plan.gradient_axis is not None:
        vals = sampler.gradient_values(vals, plan.gradient_axis, periodic=plan.kind == "torus", batch=True)
    return vals


def _run_chunk(plan: Plan, start: int, stop: int) -> dict:
    vals = _fields(plan, list(range(start, stop)))
    kind = "torus" if plan.kind == "torus" else "zero_boundary_box"
    out = {}
    for N in plan.N_list:
        win = sampler.extract_windows(vals, kind, plan.d, plan.M, sampler.Window(N))
        centered = plan.e(win, centered=True)
        for name in plan.f_names:
            w = plan.weights[(N, name)]
            s = np.tensordot(centered, w, axes=plan.d) * float(N) ** (-plan.d / 2)
            out[("f", N, name)] = s * plan.scale
            for q in plan.components:
                out[("q", N, name, q)] = chaos.chaos_component_values(
                    win, q, plan.e.coeff(q), w, N, plan.d, plan.e.variance_base)
            if (N, name) in plan.linear:
                lin = plan.linear[(N, name)]
                out[("lin", N, name)] = np.tensordot(win, lin, axes=plan.d) * float(N) ** (-plan.d / 2)
        if plan.K_max > 0:
            coeffs = basis.project_all(centered, None, N, plan.d, plan.K_max)
            out[("sob", N)] = basis.sobolev_norms(coeffs, plan.alpha)
    return out


@dataclass
class ReplicaRun:
    """Per-replica statistics (one array of length R per key) and merged accumulators."""

    plan: Plan
    replicas: int
    table: dict
    accumulators: dict  # N -> MomentAccumulator over the test-function vector

    def values(self, N: int, name: str) -> np.ndarray:
        return self.table[("f", N, name)]

    def vector(self, N: int) -> np.ndarray:
        return np.stack([self.values(N, n) for n in self.plan.f_names], axis=1)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("BM_LAB_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


_WORKER_PLAN: Plan | None = None


def _init_worker(plan: Plan):
    global _WORKER_PLAN
    _WORKER_PLAN = plan


def _run_worker_chunk(start: int, stop: int) -> dict:
    return _run_chunk(_WORKER_PLAN, start, stop)


def execute(plan: Plan, replicas: int, threads: int | None = 1) -> ReplicaRun:
    """Run ``replicas`` replicas of ``plan``; results do not depend on ``threads``."""
    bounds = [(s, min(s + plan.chunk, replicas)) for s in range(0, replicas, plan.chunk)]
    threads = resolve_threads(threads)
    if threads > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(bounds)), initializer=_init_worker,
                                 initargs=(plan,)) as pool:
            parts = list(pool.map(_run_worker_chunk, *zip(*bounds)))
    else:
        parts = [_run_chunk(plan, a, b) for a, b in bounds]
    keys = list(parts[0]) if parts else []
    table = {k: np.concatenate([p[k] for p in parts]) for k in keys}
    k = len(plan.f_names)
    accs = {}
    for N in plan.N_list:
        if not parts or not plan.f_names:
            accs[N] = MomentAccumulator(k)
            continue
        accs[N] = tree_merge(
            MomentAccumulator.from_batch(np.stack([p[("f", N, n)] for n in plan.f_names], axis=1))
            for p in parts)
    return ReplicaRun(plan, replicas, table, accs)


def _names(fs: list[TestFunction]) -> list[str]:
    names = []
    for i, f in enumerate(fs):
        base = f.name or f"f{i}"
        names.append(base if base not in names else f"{base}#{i}")
    return names


def analysis_model(config: ExperimentConfig) -> CovarianceModel:
    """Covariance of the field the observable is applied to."""
    model = config.build_model()
    if config.field == "gradient":
        return gradient_covariance(config.d, config.gradient_axis, max(config.radius, config.max_N))
    return model


def box_size(config: ExperimentConfig, model: CovarianceModel) -> int:
    if config.M is not None:
        return int(config.M)
    return sampler.default_torus_size(model, config.max_N)


def build_plan(config: ExperimentConfig, e: HermiteExpansion, scale: float = 1.0,
               normalization: str = Normalization.CENTERED.value, sobolev: bool = False) -> Plan:
    model = config.build_model()
    fs = config.build_test_functions()
    names = _names(fs)
    M = box_size(config, model)
    weights = {(N, n): f.on_lattice(N) for N in config.N_list for f, n in zip(fs, names)}
    plan = Plan("box" if config.is_gff else "torus", config.d, M, config.seed, e, list(config.N_list), names,
                weights, scale, normalization, components=list(config.components))
    if not config.is_gff:
        plan.sqrt_lam = np.sqrt(spectral_density(model, M) / M**config.d)
    if config.field == "gradient":
        plan.gradient_axis = config.gradient_axis
    if sobolev:
        plan.K_max, plan.alpha = config.K_max, float(config.alpha)
    return plan


def run_replicas(config: ExperimentConfig, threads: int | None = 1, e: HermiteExpansion | None = None,
                 scale: float = 1.0, normalization: str = Normalization.CENTERED.value,
                 sobolev: bool = False) -> ReplicaRun:
    """Sample ``config.replicas`` fields and evaluate every requested statistic.

    ``R = 0`` gives an empty table and zeroed accumulators.
    """
    model = analysis_model(config)
    if e is None:
        e = config.build_observable(model.variance)
    plan = build_plan(config, e, scale, normalization, sobolev)
    return execute(plan, int(config.replicas), threads)


# reports ---------------------------------------------------------------------------

@dataclass
class Report:
    config: ExperimentConfig
    verdicts: list
    summary: list = field(default_factory=list)  # rows (N, f, statistic, value, se)
    stats_rows: list = field(default_factory=list)  # rows (replica_index, N, f, q, normalization, value)
    info: dict = field(default_factory=dict)

    @property
    def run_id(self) -> str:
        return hashlib.sha256(self.config.to_json().encode()).hexdigest()[:16]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "seed": self.config.seed, "experiment": self.config.experiment,
                "pass": self.passed, "verdicts": [v.to_dict() for v in self.verdicts],
                "info": self.info, "config": self.config.to_dict()}


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


SUMMARY_HEADER = ("N", "f", "statistic", "value", "se")
STATS_HEADER = ("replica_index", "N", "f", "q", "normalization", "value")
VERDICT_HEADER = ("name", "observed", "predicted", "rule", "tolerance", "se", "pass")


def write_report(report: Report, out_dir) -> Path:
    """Write report.json, verdicts.csv, summary.csv and stats.csv; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(canonical_json(report.to_dict()) + "\n")
    vrows = [(v.name, float(v.observed), float(v.predicted), v.rule, float(v.tolerance), float(v.se),
              int(v.passed)) for v in report.verdicts]
    (out / "verdicts.csv").write_text(_csv(vrows, VERDICT_HEADER))
    (out / "summary.csv").write_text(_csv(report.summary, SUMMARY_HEADER))
    (out / "stats.csv").write_text(_csv(report.stats_rows, STATS_HEADER))
    return out


def plotdata(run_dir, out_path=None) -> str:
    """Tidy CSV ``experiment,N,f,statistic,value,se`` from a run directory's summary."""
    run_dir = Path(run_dir)
    rows = []
    src = run_dir / "summary.csv"
    experiment = ""
    if (run_dir / "report.json").exists():
        import json

        experiment = json.loads((run_dir / "report.json").read_text()).get("experiment", "")
    if src.exists():
        with open(src, newline="") as fh:
            for r in csv.DictReader(fh):
                rows.append((experiment, int(r["N"]), r["f"], r["statistic"], r["value"], r["se"]))
    rows.sort(key=lambda r: (r[3], r[2], r[1]))
    text = _csv(rows, ("experiment",) + SUMMARY_HEADER)
    if out_path is not None:
        Path(out_path).write_text(text)
    return text


def _stats_rows(run: ReplicaRun) -> list:
    rows = []
    for key, arr in run.table.items():
        if key[0] == "f":
            q, norm = "all", run.plan.normalization
        elif key[0] == "q":
            q, norm = key[3], Normalization.CENTERED.value
        else:
            continue
        for i, v in enumerate(arr):
            rows.append((i, key[1], key[2], q, norm, float(v)))
    rows.sort(key=lambda r: (r[1], r[2], str(r[3]), r[0]))
    return rows


# white-noise (CLT) experiments -----------------------------------------------------------

def summability_gate(config: ExperimentConfig, e: HermiteExpansion, model: CovarianceModel):
    """Limit constant of the observable, raising :class:`DivergenceError` when not summable."""
    return limit_constant(e, model, config.radius)


def predicted_covariance(config: ExperimentConfig, e: HermiteExpansion, model: CovarianceModel,
                         fs: list[TestFunction], N: int, C: float) -> np.ndarray:
    """Predicted covariance matrix of the CLT-scaled functionals at window size ``N``."""
    k = len(fs)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            if config.prediction == "limit":
                v = fs[i].inner(fs[j])
            else:
                v = chaos.functional_covariance(e, model, fs[i], fs[j], N) / C
            out[i, j] = out[j, i] = v
    return out


def run_clt(config: ExperimentConfig, threads: int | None = 1) -> Report:
    """White-noise verdicts per (N, f): variance, KS and fourth moment; covariance across f."""
    config.validate()
    model = analysis_model(config)
    e = config.build_observable(model.variance)
    const = summability_gate(config, e, model)
    C = const.C
    if not C > 0:
        raise ConfigError(f"limit constant C={C} is not positive; the CLT normalisation is undefined")
    run = run_replicas(config, threads, e, scale=1.0 / math.sqrt(C), normalization=Normalization.CLT.value)
    fs = config.build_test_functions()
    names = run.plan.f_names
    verdicts, summary = [], []
    for N in config.N_list:
        pred = predicted_covariance(config, e, model, fs, N, C)
        for i, name in enumerate(names):
            x = run.values(N, name)
            tag = f"N={N},f={name}"
            v = variance_verdict(f"variance[{tag}]", x, pred[i, i], config.k_se)
            summary += [(N, name, "variance", v.observed, v.se), (N, name, "predicted_variance", pred[i, i], 0.0)]
            if config.asserts("variance", N):
                verdicts.append(v)
            if len(x) >= 100 and pred[i, i] > 0:
                ks = ks_normal_test(x, 0.0, math.sqrt(pred[i, i]))
                summary.append((N, name, "ks_p_value", ks.p_value, 0.0))
                if config.asserts("ks", N):
                    verdicts.append(Verdict(f"ks[{tag}]", ks.p_value, config.ks_level, "min",
                                            detail={"statistic": ks.statistic}))
                fm = chaos.fourth_moment_gap(x)
                summary.append((N, name, "fourth_moment_gap", fm.gap, fm.se))
                if config.asserts("fourth_moment", N):
                    bound = max(config.fourth_moment_floor, FOURTH_MOMENT_K_SE * fm.se)
                    verdicts.append(Verdict(f"fourth_moment[{tag}]", abs(fm.gap), bound, "max",
                                            se=fm.se, detail={"m4": fm.m4}))
            for q in config.components:
                c_q = e.coeff(q)
                if c_q == 0.0:
                    continue
                xq = run.table[("q", N, name, q)]
                pv = chaos.exact_variance(q, c_q, model, fs[i], N)
                vq = variance_verdict(f"chaos_variance[{tag},q={q}]", xq, pv, config.k_se)
                summary += [(N, name, f"chaos_variance_q{q}", vq.observed, vq.se),
                            (N, name, f"predicted_chaos_variance_q{q}", pv, 0.0)]
                if config.asserts("components", N):
                    verdicts.append(vq)
        if len(names) >= 2 and config.replicas >= 3 and config.asserts("covariance", N):
            for v in covariance_verdict(run.vector(N), pred, config.k_se, names):
                v.name = f"{v.name}@N={N}"
                verdicts.append(v)
    info = {"C": C, "C_absolute": const.absolute, "hermite_rank": e.rank, "M": run.plan.M,
            "observable": e.to_dict(), "accumulators": {str(N): a.to_dict() for N, a in run.accumulators.items()}}
    return Report(config, verdicts, summary, _stats_rows(run), info)


# lattice GFF, odd powers ---------------------------------------------------------------------

@dataclass
class GffOddStudy:
    d: int
    p: int
    M: int
    c1: float
    N_list: list
    names: list
    run: ReplicaRun
    predicted: dict  # (N, i, j) -> c1^2 N^-d f^T G_box g

    def samples(self, N: int, name: str) -> np.ndarray:
        return self.run.values(N, name)

    def remainder_share(self, N: int, name: str) -> tuple[float, float]:
        """``Var(Y - L) / Var(L)`` with ``L`` the first-chaos part, and its jackknife SE."""
        y = self.run.values(N, name)
        lin = self.run.table[("lin", N, name)]
        return _variance_ratio(y - lin, lin)


def _variance_ratio(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    n = a.size
    def loo_var(x):
        s, s2 = x.sum(), np.sum(x * x)
        ls, ls2 = s - x, s2 - x * x
        return (ls2 - ls**2 / (n - 1)) / (n - 2)
    ratio = float(np.var(a, ddof=1) / np.var(b, ddof=1))
    loo = loo_var(a) / loo_var(b)
    return ratio, float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def _box_embed(w: np.ndarray, d: int, M: int, N: int) -> np.ndarray:
    """Place window weights into a zero interior array of the ``M`` box."""
    full = np.zeros((M - 1,) * d)
    idx = sampler.window_slices("zero_boundary_box", d, M, sampler.Window(N))
    full[np.ix_(*idx)] = w
    return full


def gff_odd_power_study(d: int, p: int, fs: list[TestFunction], N_list, R: int, M: int, seed: int,
                        threads: int | None = 1) -> GffOddStudy:
    """Sample the box GFF and collect ``N^-d/2 sum f(j/N) X_j^(2p+1)`` with its Green-form prediction."""
    from .covariance import discrete_green
    from .hermite import expand_power

    if d < 3:
        raise ConfigError(f"the lattice GFF needs d >= 3, got d={d}")
    if p < 1:
        raise ConfigError("odd power needs p >= 1")
    g0 = float(discrete_green(d, (0,) * d))
    e = expand_power(2 * p + 1, g0)
    c1 = g0**p * double_factorial(2 * p + 1)
    names = _names(fs)
    weights, linear, predicted = {}, {}, {}
    for N in N_list:
        idx = sampler.window_slices("zero_boundary_box", d, M, sampler.Window(N))
        site_var = _box_diagonal(d, M)[np.ix_(*idx)]
        solved = []
        for f, n in zip(fs, names):
            w = f.on_lattice(N)
            weights[(N, n)] = w
            # first-chaos part of X^(2p+1) w.r.t. each site's own box variance
            linear[(N, n)] = w * double_factorial(2 * p + 1) * site_var**p
            solved.append(sampler.box_green_solve(_box_embed(w, d, M, N)))
        for i, fi in enumerate(fs):
            for j in range(i, len(fs)):
                wj = _box_embed(weights[(N, names[j])], d, M, N)
                predicted[(N, i, j)] = c1 * c1 * float(N) ** (-d) * float(np.sum(solved[i] * wj))
    plan = Plan("box", d, M, seed, e, list(N_list), names, weights, linear=linear)
    run = execute(plan, R, threads)
    return GffOddStudy(d, p, M, c1, list(N_list), names, run, predicted)


_BOX_DIAG: dict = {}


def _box_diagonal(d: int, M: int) -> np.ndarray:
    """``G_box(j, j)`` on the whole interior via the separable eigen-sum (cached)."""
    key = (d, M)
    if key not in _BOX_DIAG:
        k = np.arange(1, M)
        x = np.arange(1, M)
        s2 = (2.0 / M) * np.sin(np.pi * np.outer(x, k) / M) ** 2  # site x mode
        inv = 1.0 / sampler.box_eigenvalues(d, M)
        out = inv
        for _ in range(d):
            out = np.tensordot(s2, out, axes=([1], [out.ndim - 1]))
        _BOX_DIAG[key] = out
    return _BOX_DIAG[key]


def _ratio_verdict(study: GffOddStudy, i: int, j: int, N: int, tolerance: float) -> Verdict:
    a, b = study.samples(N, study.names[i]), study.samples(N, study.names[j])
    cov, se = jackknife_covariance(np.stack([a, b], axis=1))
    pred = study.predicted[(N, min(i, j), max(i, j))]
    return Verdict(f"gff_ratio[N={N},{study.names[i]},{study.names[j]}]", float(cov[0, 1] / pred), 1.0,
                   "abs", tolerance, float(se[0, 1] / abs(pred)), detail={"predicted": pred, "c1": study.c1})


def gff_odd_power_verdict(d: int, p: int, f: TestFunction, g: TestFunction, N_list, R: int, M: int = 64,
                          seed: int = 0, tolerance: float = 0.15, threads: int | None = 1) -> Verdict:
    """Ratio of the empirical covariance to ``c1^2 N^-d sum f G_box g`` at the largest N.

    The per-N ratios and their least-squares drift are kept in ``detail``.
    """
    same = f == g
    study = gff_odd_power_study(d, p, [f] if same else [f, g], N_list, R, M, seed, threads)
    j = 0 if same else 1
    per_N = [_ratio_verdict(study, 0, j, N, tolerance) for N in study.N_list]
    main = per_N[int(np.argmax(study.N_list))]
    if len(per_N) > 1:
        slope = float(np.polyfit(study.N_list, [v.observed for v in per_N], 1)[0])
    else:
        slope = 0.0
    main.detail.update(ratios={str(N): v.observed for N, v in zip(study.N_list, per_N)}, drift=slope)
    return main


def remainder_verdict(study: GffOddStudy, name: str) -> tuple[Verdict, list]:
    """Remainder variance share must decrease along the N-list."""
    Ns = sorted(study.N_list)
    shares = [study.remainder_share(N, name) for N in Ns]
    steps = [shares[i + 1][0] - shares[i][0] for i in range(len(shares) - 1)]
    worst = max(steps) if steps else -math.inf
    v = Verdict(f"gff_remainder_decreasing[{name}]", worst, 0.0, "max",
                detail={"shares": {str(N): s for N, (s, _) in zip(Ns, shares)}})
    return v, shares


def run_gff(config: ExperimentConfig, threads: int | None = 1) -> Report:
    """GFF applications: odd powers against the Green form, even powers / gradients as white noise."""
    config.validate()
    if not config.is_gff or config.field == "gradient":
        return run_clt(config, threads)
    e = config.build_observable(1.0)
    p_odd = _odd_power(config)
    if p_odd is None:
        return run_clt(config, threads)
    fs = config.build_test_functions()
    study = gff_odd_power_study(config.d, p_odd, fs, config.N_list, config.replicas, config.M, config.seed, threads)
    verdicts, summary = [], []
    for N in study.N_list:
        for i, name in enumerate(study.names):
            v = _ratio_verdict(study, i, i, N, config.ratio_tolerance)
            summary.append((N, name, "gff_ratio", v.observed, v.se))
            if N == max(study.N_list):
                verdicts.append(v)
            share, se = study.remainder_share(N, name)
            summary.append((N, name, "remainder_share", share, se))
        for i in range(len(fs)):
            for j in range(i + 1, len(fs)):
                a, b = study.samples(N, study.names[i]), study.samples(N, study.names[j])
                cov, se = jackknife_covariance(np.stack([a, b], axis=1))
                if N == max(study.N_list):
                    verdicts.append(Verdict(f"gff_cov[N={N},{study.names[i]},{study.names[j]}]", float(cov[0, 1]),
                                            study.predicted[(N, i, j)], "se", config.k_se, float(se[0, 1])))
    if len(study.N_list) > 1:
        for name in study.names:
            verdicts.append(remainder_verdict(study, name)[0])
    info = {"c1": study.c1, "M": config.M, "p": p_odd, "observable": e.to_dict()}
    return Report(config, verdicts, summary, _stats_rows(study.run), info)


def _odd_power(config: ExperimentConfig) -> int | None:
    obs = config.observable
    if "power" in obs and int(obs["power"]) % 2 == 1:
        return (int(obs["power"]) - 1) // 2
    return None


# tightness -----------------------------------------------------------------------------------------

def kernel_stability(alpha: float, d: int, K_max: int, resolution: int = KERNEL_RESOLUTION) -> Verdict:
    """Relative change of the truncated kernel maximum when ``K_max`` doubles."""
    a = basis.kernel_bound(alpha, resolution, K_max, d)
    b = basis.kernel_bound(alpha, resolution, 2 * K_max, d)
    change = abs(b.value - a.value) / abs(b.value)
    return Verdict(f"kernel_stability[K={K_max}->{2 * K_max}]", change, KERNEL_TOLERANCE, "max",
                   detail={"value": a.value, "value_doubled": b.value, "tail_bound": a.tail_bound})


def tightness_survey(config: ExperimentConfig, threads: int | None = 1) -> Report:
    """``E ||Phi_N||^2_{H^-alpha}`` per N with SE, a trend verdict and a kernel-stability verdict."""
    config.validate()
    model = analysis_model(config)
    e = config.build_observable(model.variance)
    run = run_replicas(config, threads, e, sobolev=True)
    Ns, means, ses, summary = [], [], [], []
    for N in config.N_list:
        x = run.table[("sob", N)]
        mean = float(x.mean()) if x.size else math.nan
        se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
        Ns.append(N)
        means.append(mean)
        ses.append(se)
        summary.append((N, "", "sobolev_norm_sq", mean, se))
    verdicts = [trend_verdict("tightness_trend", Ns, means, ses, k_se=2.0)]
    verdicts.append(kernel_stability(float(config.alpha), config.d, config.K_max))
    info = {"M": run.plan.M, "alpha": config.alpha, "K_max": config.K_max,
            "mode_tail_bound": basis.mode_tail_sum(float(config.alpha), config.d, config.K_max)}
    return Report(config, verdicts, summary, _stats_rows(run), info)


def run_experiment(config: ExperimentConfig, threads: int | None = 1) -> Report:
    if config.experiment == "clt":
        return run_clt(config, threads)
    if config.experiment == "gff":
        return run_gff(config, threads)
    if config.experiment == "tightness":
        return tightness_survey(config, threads)
    raise ConfigError(f"unknown experiment {config.experiment!r}")
