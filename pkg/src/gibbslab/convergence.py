"""Limit experiments: sweep (T, coupling = rule/T) and compare the sides.

For each temperature in the schedule the driver builds the grand-canonical
Gibbs state at coupling rule/T, rescales its k-body marginals by k!/T^k and
measures their trace-norm distance to the classical moment matrices, plus
the free-energy offset (F_coupled - F_free)/T against -log Z_r. The
classical ensemble is sampled once (the measure does not depend on T), so
distances at different T share their Monte Carlo noise, which sharpens the
monotonicity checks on purpose.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classical, fock, semiclassics
from .kernels import BACKEND
from .metrics import hs_distance, trace_norm_distance
from .spectral import InteractionKernel, OneBodySpec, SpectralBasis, \
    build_operator, eigendecompose, interaction_elements

__all__ = [
    "KernelSpec",
    "ExperimentConfig",
    "DistanceMetric",
    "ReportRow",
    "ConvergenceResult",
    "parse_config",
    "read_config",
    "config_to_dict",
    "run_convergence",
    "evaluate_properties",
    "emit_report",
    "run_selfchecks",
    "CheckResult",
]


@dataclass(frozen=True)
class KernelSpec:
    """Symbolic kernel description from a config file; realized on a grid."""

    name: str              # delta | zero | constant | gaussian
    g: float = 0.0
    width: float = 0.0

    def realize(self, grid) -> InteractionKernel:
        if self.name == "delta":
            return InteractionKernel.delta(self.g)
        if self.name == "zero":
            return InteractionKernel.delta(0.0)
        if self.name == "constant":
            return InteractionKernel.bounded(np.full(grid.n, self.g))
        if self.name == "gaussian":
            if self.width <= 0:
                raise ValueError("gaussian kernel needs width > 0")
            d = grid.dx * np.arange(grid.n)
            return InteractionKernel.bounded(
                self.g * np.exp(-0.5 * (d / self.width) ** 2))
        raise ValueError(f"unknown kernel name {self.name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one convergence sweep needs; mirrors the config-file keys."""

    spec: OneBodySpec
    kernel: InteractionKernel | KernelSpec
    K: int
    T_schedule: tuple
    coupling_rule: float = 1.0
    k_max: int = 2
    mc_samples: int = 100_000
    seed: int = 0
    n_max_policy: float = 1e-8
    dim_budget: int = 20000
    out_dir: str = "results"
    trial_subsample: int = 512
    bl_samples: int = 4000
    n_blocks: int = 50
    threads: int = 1

    def __post_init__(self):
        sched = tuple(float(t) for t in self.T_schedule)
        if not sched or any(t <= 0 for t in sched):
            raise ValueError("T_schedule must hold positive temperatures")
        if list(sched) != sorted(sched):
            raise ValueError("T_schedule must be ascending")
        object.__setattr__(self, "T_schedule", sched)
        if self.coupling_rule < 0:
            raise ValueError("coupling_rule must be nonnegative")
        if not 1 <= self.k_max <= 3:
            raise ValueError("k_max must lie in 1..3")
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be at least 2")


_SPEC_KEYS = {"domain", "bc", "m", "a", "half_width", "grid_points"}
_KERNEL_KEYS = {"kernel", "g", "width"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key = value config format (# starts a comment)."""
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        kv[key] = val

    domain = kv.pop("domain", "interval").lower()
    if domain == "interval":
        spec = OneBodySpec.interval(bc=kv.pop("bc", "dirichlet"),
                                    m=float(kv.pop("m", 1.0)),
                                    grid_points=int(kv.pop("grid_points", 512)))
        kv.pop("a", None), kv.pop("half_width", None)
    else:
        spec = OneBodySpec.anharmonic_line(
            a=float(kv.pop("a")), half_width=float(kv.pop("half_width")),
            m=float(kv.pop("m", 0.0)),
            grid_points=int(kv.pop("grid_points", 1024)))
        kv.pop("bc", None)

    kernel = KernelSpec(name=kv.pop("kernel", "delta").lower(),
                        g=float(kv.pop("g", 1.0)),
                        width=float(kv.pop("width", 0.0)))

    sched = tuple(float(t) for t in kv.pop("T_schedule", "5,10,20,40").split(","))
    ints = {k: int(kv.pop(k)) for k in ("K", "k_max", "mc_samples", "seed",
                                        "dim_budget", "trial_subsample",
                                        "bl_samples", "n_blocks", "threads")
            if k in kv}
    floats = {k: float(kv.pop(k)) for k in ("coupling_rule", "n_max_policy")
              if k in kv}
    out_dir = kv.pop("out_dir", "results")
    if kv:
        raise ValueError(f"unknown config keys: {sorted(kv)}")
    return ExperimentConfig(spec=spec, kernel=kernel, K=ints.pop("K", 2),
                            T_schedule=sched, out_dir=out_dir,
                            **floats, **ints)


def read_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_to_dict(cfg: ExperimentConfig) -> dict:
    spec = cfg.spec
    d = {"domain": spec.domain, "m": spec.m, "grid_points": spec.grid_points}
    if spec.domain == "interval":
        d["bc"] = spec.bc
    else:
        d["a"], d["half_width"] = spec.a, spec.half_width
    if isinstance(cfg.kernel, KernelSpec):
        d.update(kernel=cfg.kernel.name, g=cfg.kernel.g, width=cfg.kernel.width)
    else:
        d.update(kernel=cfg.kernel.variant, g=cfg.kernel.g)
    d.update(K=cfg.K, T_schedule=list(cfg.T_schedule),
             coupling_rule=cfg.coupling_rule, k_max=cfg.k_max,
             mc_samples=cfg.mc_samples, seed=cfg.seed,
             n_max_policy=cfg.n_max_policy, dim_budget=cfg.dim_budget,
             out_dir=cfg.out_dir, trial_subsample=cfg.trial_subsample,
             bl_samples=cfg.bl_samples, n_blocks=cfg.n_blocks,
             threads=cfg.threads)
    return d


@dataclass(frozen=True)
class DistanceMetric:
    value: float
    stderr: float
    hs: float


@dataclass
class ReportRow:
    """Metrics of one temperature point."""

    T: float
    lam: float
    n_max: int
    tail_mass: float
    distances: dict = field(default_factory=dict)   # k -> DistanceMetric
    f_value: float = math.nan
    f_target: float = math.nan
    f_stderr: float = 0.0
    trial_gap: float | None = None
    fe_identity_defect: float | None = None
    bl: semiclassics.BLGap | None = None
    wall_s: float = 0.0
    valid: bool = True
    error: str = ""
    notes: str = ""
    block_distances: dict = field(default_factory=dict, repr=False)


@dataclass
class ConvergenceResult:
    config: ExperimentConfig
    rows: list
    z_r: float
    z_r_stderr: float
    ess: float
    eigenvalues: np.ndarray
    moments: dict
    degenerate: bool
    wall_s: float


def _resolve(config: ExperimentConfig):
    op = build_operator(config.spec)
    basis = eigendecompose(op, config.K)
    kernel = config.kernel.realize(basis.grid) \
        if isinstance(config.kernel, KernelSpec) else config.kernel
    tensor = interaction_elements(basis, kernel)
    return basis, kernel, tensor


def _classical_side(config: ExperimentConfig, basis: SpectralBasis,
                    kernel: InteractionKernel, tensor):
    """Ensemble, Z_r and moment matrices (exact ones when no interaction)."""
    degenerate = kernel.is_zero or config.coupling_rule == 0.0
    ensemble = classical.sample_free(basis, config.mc_samples, config.seed)
    ensemble = classical.reweight(ensemble, basis, kernel, tensor)
    moments, blocks = {}, {}
    for k in range(1, config.k_max + 1):
        if degenerate:
            moments[k] = classical.free_moments(basis.eigenvalues, k)
            blocks[k] = None
        else:
            moments[k] = classical.moment_matrix(ensemble, k)
            blocks[k] = classical.moment_matrix_blocks(ensemble, k,
                                                       config.n_blocks)
    if degenerate:
        z_r, z_err = 1.0, 0.0
    else:
        z_r, z_err = ensemble.z_r, ensemble.z_r_stderr
    return ensemble, z_r, z_err, moments, blocks, degenerate


def _temperature_row(config: ExperimentConfig, basis: SpectralBasis,
                     tensor, ensemble, moments, blocks, T: float,
                     row_seed: int) -> ReportRow:
    t0 = time.perf_counter()
    lam = config.coupling_rule / T
    try:
        n_max = fock.choose_n_max(basis.eigenvalues, T, tail=config.n_max_policy,
                                  dim_budget=config.dim_budget)
    except ValueError as exc:
        return ReportRow(T=T, lam=lam, n_max=-1, tail_mass=math.nan,
                         valid=False, error=str(exc),
                         wall_s=time.perf_counter() - t0)
    fb = fock.build_fock_basis(config.K, n_max, dim_budget=config.dim_budget)
    H_lam = fock.build_hamiltonian(fb, basis.eigenvalues, tensor, lam)
    H_0 = fock.build_hamiltonian(fb, basis.eigenvalues, None, 0.0)
    gibbs, log_z_lam = fock.gibbs_state(H_lam, T)
    free_state, log_z_0 = fock.gibbs_state(H_0, T)

    row = ReportRow(T=T, lam=lam, n_max=n_max, tail_mass=gibbs.tail_mass())
    for k in range(1, config.k_max + 1):
        if k > n_max:
            continue
        g_k = fock.reduced_density_matrix(gibbs, k)
        scaled = math.factorial(k) / T**k * g_k.entries
        target = moments[k].entries
        d = trace_norm_distance(scaled, target)
        hs = hs_distance(scaled, target)
        if blocks[k] is None:
            row.distances[k] = DistanceMetric(d, 0.0, hs)
            row.block_distances[k] = None
        else:
            db = np.array([trace_norm_distance(scaled, Mb) for Mb in blocks[k]])
            se = float(db.std(ddof=1) / math.sqrt(len(db)))
            row.distances[k] = DistanceMetric(d, se, hs)
            row.block_distances[k] = db
    row.f_value = log_z_0 - log_z_lam

    if config.trial_subsample > 0:
        fe_gibbs = fock.relative_free_energy(gibbs, free_state, tensor, lam, T)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", semiclassics.TailWarning)
            trial = semiclassics.trial_state(
                ensemble, T, fb, n_subsample=config.trial_subsample,
                phase_average=True)
        row.notes = "; ".join(str(w.message) for w in caught
                              if issubclass(w.category, semiclassics.TailWarning))
        fe_trial = fock.relative_free_energy(trial, free_state, tensor, lam, T)
        row.trial_gap = fe_trial - fe_gibbs
        denom = max(abs(T * (log_z_0 - log_z_lam)), 1e-12)
        row.fe_identity_defect = abs(fe_gibbs - T * (log_z_0 - log_z_lam)) / denom
    if config.bl_samples > 0:
        row.bl = semiclassics.berezin_lieb_gap(gibbs, free_state, 1.0 / T,
                                               n_samples=config.bl_samples,
                                               seed=row_seed)
    row.wall_s = time.perf_counter() - t0
    return row


def run_convergence(config: ExperimentConfig) -> ConvergenceResult:
    """Run the full sweep; rows for distinct T may run on worker threads."""
    t0 = time.perf_counter()
    basis, kernel, tensor = _resolve(config)
    ensemble, z_r, z_err, moments, blocks, degenerate = _classical_side(
        config, basis, kernel, tensor)
    row_seeds = [int(s.generate_state(1)[0] % (1 << 31))
                 for s in np.random.SeedSequence(config.seed).spawn(
                     len(config.T_schedule))]

    def job(i):
        return _temperature_row(config, basis, tensor, ensemble, moments,
                                blocks, config.T_schedule[i], row_seeds[i])

    n = len(config.T_schedule)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(job, range(n)))
    else:
        rows = [job(i) for i in range(n)]
    target = -math.log(z_r)
    for row in rows:
        row.f_target = target
        row.f_stderr = z_err / z_r
    return ConvergenceResult(config=config, rows=rows, z_r=z_r,
                             z_r_stderr=z_err, ess=ensemble.ess,
                             eigenvalues=basis.eigenvalues, moments=moments,
                             degenerate=degenerate,
                             wall_s=time.perf_counter() - t0)


def evaluate_properties(result: ConvergenceResult) -> dict:
    """Monotone-convergence verdicts with shared-noise standard errors."""
    rows = [r for r in result.rows if r.valid]
    out = {"d_monotone": {}, "f_monotone": True, "violations": []}
    for k in range(1, result.config.k_max + 1):
        ok = True
        for a, b in zip(rows[:-1], rows[1:]):
            if k not in a.distances or k not in b.distances:
                continue
            slack = 1e-12
            if a.block_distances.get(k) is not None:
                diff = b.block_distances[k] - a.block_distances[k]
                slack += 2.0 * float(diff.std(ddof=1) / math.sqrt(diff.size))
            gap = b.distances[k].value - a.distances[k].value
            if gap > slack:
                ok = False
                out["violations"].append(
                    f"d_{k} rose by {gap:.3e} (> {slack:.3e}) "
                    f"from T={a.T} to T={b.T}")
        out["d_monotone"][k] = ok
    for a, b in zip(rows[:-1], rows[1:]):
        slack = 1e-12 + 2.0 * math.sqrt(2.0) * a.f_stderr
        gap = abs(b.f_value - b.f_target) - abs(a.f_value - a.f_target)
        if gap > slack:
            out["f_monotone"] = False
            out["violations"].append(
                f"|f + log Z_r| rose by {gap:.3e} from T={a.T} to T={b.T}")
    out["all_valid"] = all(r.valid for r in result.rows)
    out["all"] = (out["all_valid"] and out["f_monotone"]
                  and all(out["d_monotone"].values()))
    return out


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.17g}"


def emit_report(result: ConvergenceResult, out_dir) -> tuple:
    """Write report.csv (one row per (T, k) metric plus one free-energy row
    per T) and summary.json; returns both paths. CSV content is a pure
    function of config + seed; wall-clock lives only in the JSON."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "report.csv")
    json_path = os.path.join(out_dir, "summary.json")
    header = "T,lambda,n_max,tail_mass,metric,k,value,stderr,hs_value,target"
    lines = [header]
    for row in result.rows:
        base = f"{_fmt(row.T)},{_fmt(row.lam)},{row.n_max},{_fmt(row.tail_mass)}"
        for k in sorted(row.distances):
            m = row.distances[k]
            lines.append(f"{base},trace_distance,{k},{_fmt(m.value)},"
                         f"{_fmt(m.stderr)},{_fmt(m.hs)},")
        lines.append(f"{base},free_energy_delta,,{_fmt(row.f_value)},"
                     f"{_fmt(row.f_stderr)},,{_fmt(row.f_target)}")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    def row_dict(row: ReportRow) -> dict:
        d = {"T": row.T, "lambda": row.lam, "n_max": row.n_max,
             "tail_mass": row.tail_mass, "valid": row.valid, "error": row.error,
             "notes": row.notes,
             "f_value": row.f_value, "f_target": row.f_target,
             "f_stderr": row.f_stderr, "trial_gap": row.trial_gap,
             "fe_identity_defect": row.fe_identity_defect,
             "wall_s": row.wall_s,
             "distances": {str(k): {"value": m.value, "stderr": m.stderr,
                                    "hs": m.hs}
                           for k, m in row.distances.items()}}
        if row.bl is not None:
            d["berezin_lieb"] = {"quantum": row.bl.quantum,
                                 "classical": row.bl.classical,
                                 "gap": row.bl.gap,
                                 "classical_stderr": row.bl.classical_stderr,
                                 "ess": row.bl.ess,
                                 "degenerate": row.bl.degenerate}
        return d

    summary = {
        "config": config_to_dict(result.config),
        "kernel_backend": BACKEND,
        "z_r": result.z_r,
        "z_r_stderr": result.z_r_stderr,
        "ess": result.ess,
        "degenerate_free_case": result.degenerate,
        "targets": {"neg_log_z_r": -math.log(result.z_r),
                    "eigenvalues": list(result.eigenvalues)},
        "rows": [row_dict(r) for r in result.rows],
        "properties": evaluate_properties(result),
        "wall_clock_s": result.wall_s,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    note: str = ""


def run_selfchecks(config: ExperimentConfig,
                   corrupt_determinism: bool = False) -> list:
    """Cross-module identity checks; `corrupt_determinism` is a test hook
    that deliberately breaks the seed-splitting contract so the determinism
    check must fail (negative control)."""
    from scipy.integrate import quad

    checks = []
    basis, kernel, tensor = _resolve(config)
    n_mc = min(config.mc_samples, 20000)

    # Gaussian moment closure at k = 1, 2 on the free ensemble
    free = classical.sample_free(basis, n_mc, config.seed)
    for k in (1, 2):
        est, se = classical.moment_matrix(free, k, with_stderr=True)
        exact = classical.free_moments(basis.eigenvalues, k)
        dev = np.abs(est.entries - exact.entries) / np.clip(se, 1e-30, None)
        worst = float(dev.max())
        checks.append(CheckResult(f"wick_k{k}", worst <= 5.0, worst, 5.0,
                                  "max |estimate - closed form| / stderr"))

    # quantum identities on a random sector-diagonal state
    fb = fock.build_fock_basis(min(config.K, 3), 6)
    state = fock.random_state(fb, config.seed)
    r_pt = fock.reduced_density_matrix(state, 2)
    r_no = fock.reduced_dm_normal_ordered(state, 2)
    diff = float(np.abs(r_pt.entries - r_no.entries).max())
    checks.append(CheckResult("partial_trace_vs_normal_ordered",
                              diff <= 1e-10, diff, 1e-10))
    g1 = fock.reduced_density_matrix(state, 1)
    n_diff = abs(g1.trace() - fock.particle_number(state))
    checks.append(CheckResult("number_identity", n_diff <= 1e-10, n_diff, 1e-10))

    lam_fb = basis.eigenvalues[:fb.K]
    if fb.K == config.K:
        tens_fb = tensor
    else:
        from .spectral import TwoBodyTensor
        tens_fb = TwoBodyTensor(np.real(tensor.entries)[:fb.K, :fb.K, :fb.K, :fb.K])
    split = fock.energy_decomposition(state, lam_fb, tens_fb, 0.7)
    rel = abs(split.total - split.one_body - split.two_body) \
        / max(abs(split.total), 1e-12)
    checks.append(CheckResult("energy_decomposition", rel <= 1e-9, rel, 1e-9))

    # free Gibbs occupancies against the closed form
    T_chk = min(config.T_schedule[0], 2.0)
    n_free = fock.choose_n_max(basis.eigenvalues, T_chk, tail=1e-12,
                               dim_budget=config.dim_budget)
    fb_free = fock.build_fock_basis(config.K, n_free,
                                    dim_budget=config.dim_budget)
    H0 = fock.build_hamiltonian(fb_free, basis.eigenvalues, None, 0.0)
    g_free, _ = fock.gibbs_state(H0, T_chk)
    occ = np.real(np.diag(fock.reduced_density_matrix(g_free, 1).entries))
    exact_occ = 1.0 / (np.exp(basis.eigenvalues / T_chk) - 1.0)
    occ_diff = float(np.abs(occ - exact_occ).max())
    checks.append(CheckResult("free_state_occupation", occ_diff <= 1e-8,
                              occ_diff, 1e-8))

    # mean interaction energy under the free measure
    mi = classical.mean_F_NL_free(basis, kernel, n_samples=n_mc,
                                  seed=config.seed, tensor=tensor)
    if kernel.is_zero:
        mi_dev = abs(mi.mc_value - mi.closed_form)
        checks.append(CheckResult("mean_fnl_identity", mi_dev <= 1e-12,
                                  mi_dev, 1e-12, "zero kernel"))
    else:
        mi_dev = abs(mi.mc_value - mi.closed_form) / max(mi.mc_stderr, 1e-30)
        checks.append(CheckResult("mean_fnl_identity", mi_dev <= 3.0,
                                  mi_dev, 3.0, "|MC - closed form| / stderr"))

    # coherent overlap law, tail-corrected
    rng = np.random.default_rng(config.seed)
    fb_c = fock.build_fock_basis(2, 30)
    worst = 0.0
    for _ in range(20):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        a, b = semiclassics.coherent(v, fb_c), semiclassics.coherent(w, fb_c)
        exact = np.exp(np.vdot(v, w) - 0.5 * np.vdot(v, v) - 0.5 * np.vdot(w, w))
        bound = 1e-8 + math.sqrt(max(a.tail_bound * b.tail_bound, 0.0)) \
            + a.tail_bound + b.tail_bound
        defect = abs(semiclassics.coherent_overlap(a, b) - exact) / bound
        worst = max(worst, defect)
    checks.append(CheckResult("coherent_overlap", worst <= 1.0, worst, 1.0,
                              "defect / tail-corrected bound"))

    # classical relative free energy decomposition
    rw = classical.reweight(free, basis, kernel, tensor)
    fe = classical.classical_relative_free_energy(rw)
    fe_dev = abs(fe.mean_interaction + fe.entropy_term - fe.value) \
        / max(3.0 * fe.stderr, 1e-14)
    checks.append(CheckResult("classical_fe_identity", fe_dev <= 1.0,
                              fe_dev, 1.0, "decomposition vs -log Z_r"))

    # single-mode closed forms: geometric log Z and the quartic Z_r
    fb1 = fock.build_fock_basis(1, 10)
    H1 = fock.build_hamiltonian(fb1, np.array([1.0]), None, 0.0)
    _, log_z1 = fock.gibbs_state(H1, 1.0)
    exact_log_z1 = math.log((1.0 - math.exp(-11.0)) / (1.0 - math.exp(-1.0)))
    z_dev = abs(log_z1 - exact_log_z1)
    checks.append(CheckResult("single_mode_log_z", z_dev <= 1e-10, z_dev, 1e-10))

    quartic, _ = quad(lambda r: math.exp(-r - r * r), 0.0, np.inf)
    lam1 = np.array([1.0])
    occs1 = np.ones((1, basis.grid.n)) / math.sqrt(basis.grid.n * basis.grid.dx)
    synth = SpectralBasis(lam1, occs1, basis.grid, basis.spec)
    i4 = float(np.sum(occs1[0] ** 4) * basis.grid.dx)
    ens1 = classical.sample_free(synth, n_mc, config.seed + 1)
    rw1 = classical.reweight(ens1, synth, InteractionKernel.delta(2.0 / i4))
    zq_dev = abs(rw1.z_r - quartic) / max(3.0 * rw1.z_r_stderr, 1e-30)
    checks.append(CheckResult("single_mode_quartic_zr", zq_dev <= 1.0,
                              zq_dev, 1.0, "|MC - quadrature| / 3 stderr"))

    # seed determinism (the corrupt hook breaks the second subseed)
    e1 = classical.sample_free(basis, 512, config.seed, n_chains=4)
    seed2 = config.seed + 1 if corrupt_determinism else config.seed
    e2 = classical.sample_free(basis, 512, seed2, n_chains=4)
    identical = bool(np.array_equal(e1.coeffs, e2.coeffs))
    checks.append(CheckResult("seed_determinism", identical,
                              0.0 if identical else 1.0, 0.0))
    return checks
