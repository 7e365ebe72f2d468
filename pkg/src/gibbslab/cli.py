"""Command-line surface.

Subcommands: spectrum, sample, quantum, converge, selfcheck, bl-gap. Every
command takes --config PATH (the key = value experiment file), with --seed,
--out and --threads overrides. Exit codes: 0 success, 2 a checked property
failed, 1 error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import classical, convergence, fock, semiclassics
from .kernels import BACKEND
from .spectral import basis_to_csv, build_operator, eigendecompose, \
    interaction_elements, schatten_trace


def _load(args) -> convergence.ExperimentConfig:
    cfg = convergence.read_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.threads is not None:
        updates["threads"] = args.threads
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _ensure_out(cfg) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    out = _ensure_out(cfg)
    basis = eigendecompose(build_operator(cfg.spec), cfg.K)
    path = os.path.join(out, "spectrum.csv")
    basis_to_csv(basis, path)
    tr = schatten_trace(basis, p=1.0)
    print(f"lowest {cfg.K} eigenvalues: "
          + ", ".join(f"{v:.6f}" for v in basis.eigenvalues))
    print(f"tr h^-1 = {tr.partial_sum:.6f} + tail {tr.tail_bound:.2e}"
          + (" (divergent)" if tr.divergent else ""))
    print(f"wrote {path}")
    return 0


def cmd_sample(args) -> int:
    cfg = _load(args)
    out = _ensure_out(cfg)
    basis, kernel, tensor = convergence._resolve(cfg)
    ens = classical.sample_free(basis, cfg.mc_samples, cfg.seed)
    ens = classical.reweight(ens, basis, kernel, tensor)
    path = os.path.join(out, "ensemble.csv")
    classical.ensemble_to_csv(ens, path)
    fe = classical.classical_relative_free_energy(ens)
    summary = {"z_r": ens.z_r, "z_r_stderr": ens.z_r_stderr, "ess": ens.ess,
               "neg_log_z_r": fe.value, "mean_interaction": fe.mean_interaction,
               "entropy_term": fe.entropy_term}
    with open(os.path.join(out, "ensemble.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    for k in range(1, cfg.k_max + 1):
        classical.moments_to_csv(classical.moment_matrix(ens, k),
                                 os.path.join(out, f"moments_k{k}.csv"))
    print(f"z_r = {ens.z_r:.6f} +- {ens.z_r_stderr:.2e} (ess {ens.ess:.0f})")
    print(f"wrote {path}")
    return 0


def cmd_quantum(args) -> int:
    cfg = _load(args)
    out = _ensure_out(cfg)
    basis, kernel, tensor = convergence._resolve(cfg)
    T = args.T if args.T is not None else cfg.T_schedule[0]
    lam = cfg.coupling_rule / T
    n_max = fock.choose_n_max(basis.eigenvalues, T, tail=cfg.n_max_policy,
                              dim_budget=cfg.dim_budget)
    fb = fock.build_fock_basis(cfg.K, n_max, dim_budget=cfg.dim_budget)
    H = fock.build_hamiltonian(fb, basis.eigenvalues, tensor, lam)
    H0 = fock.build_hamiltonian(fb, basis.eigenvalues, None, 0.0)
    gibbs, log_z = fock.gibbs_state(H, T)
    _, log_z0 = fock.gibbs_state(H0, T)
    split = fock.energy_decomposition(gibbs, basis.eigenvalues, tensor, lam)
    info = {"T": T, "lambda": lam, "n_max": n_max, "dim": fb.dim,
            "log_z": log_z, "log_z_free": log_z0,
            "tail_mass": gibbs.tail_mass(),
            "particle_number": fock.particle_number(gibbs),
            "energy": {"total": split.total, "one_body": split.one_body,
                       "two_body": split.two_body}}
    with open(os.path.join(out, "quantum.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
    for k in range(1, min(cfg.k_max, n_max) + 1):
        classical.moments_to_csv(fock.reduced_density_matrix(gibbs, k),
                                 os.path.join(out, f"quantum_k{k}.csv"))
    print(f"T={T} lambda={lam:.6g} n_max={n_max} dim={fb.dim} "
          f"<N>={info['particle_number']:.4f} tail={info['tail_mass']:.2e}")
    return 0


def cmd_converge(args) -> int:
    cfg = _load(args)
    result = convergence.run_convergence(cfg)
    csv_path, json_path = convergence.emit_report(result, cfg.out_dir)
    for row in result.rows:
        if not row.valid:
            print(f"T={row.T}: INVALID ({row.error})")
            continue
        dists = " ".join(f"d_{k}={m.value:.5f}+-{m.stderr:.1e}"
                         for k, m in sorted(row.distances.items()))
        print(f"T={row.T} n_max={row.n_max} tail={row.tail_mass:.2e} {dists} "
              f"|f+logZr|={abs(row.f_value - row.f_target):.5f} "
              f"[{row.wall_s:.1f}s]")
    props = convergence.evaluate_properties(result)
    print(f"wrote {csv_path} and {json_path}")
    if not props["all"]:
        for v in props["violations"]:
            print(f"property violation: {v}", file=sys.stderr)
        return 2
    return 0


def cmd_selfcheck(args) -> int:
    cfg = _load(args)
    checks = convergence.run_selfchecks(cfg, corrupt_determinism=args.corrupt)
    width = max(len(c.name) for c in checks)
    failed = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        failed += not c.passed
        print(f"{status} {c.name:<{width}} measured {c.measured:.3e} "
              f"(tolerance {c.tolerance:.3e}) {c.note}")
    return 2 if failed else 0


def cmd_bl_gap(args) -> int:
    cfg = _load(args)
    out = _ensure_out(cfg)
    basis, kernel, tensor = convergence._resolve(cfg)
    ens = classical.sample_free(basis, cfg.mc_samples, cfg.seed)
    ens = classical.reweight(ens, basis, kernel, tensor)
    temps = [args.T] if args.T is not None else list(cfg.T_schedule)
    rows, diagnostics = [], []
    for i, T in enumerate(temps):
        lam = cfg.coupling_rule / T
        n_max = fock.choose_n_max(basis.eigenvalues, T, tail=cfg.n_max_policy,
                                  dim_budget=cfg.dim_budget)
        fb = fock.build_fock_basis(cfg.K, n_max, dim_budget=cfg.dim_budget)
        gibbs, _ = fock.gibbs_state(
            fock.build_hamiltonian(fb, basis.eigenvalues, tensor, lam), T)
        free_state, _ = fock.gibbs_state(
            fock.build_hamiltonian(fb, basis.eigenvalues, None, 0.0), T)
        gap = semiclassics.berezin_lieb_gap(gibbs, free_state, 1.0 / T,
                                            n_samples=cfg.bl_samples,
                                            seed=cfg.seed + i)
        rows.append((T, gap))
        if gap.degenerate:
            diagnostics.append({"T": T, "warning": "low importance-sampling ess",
                                "ess": gap.ess})
        print(f"T={T}: quantum={gap.quantum:.6f} classical={gap.classical:.6f} "
              f"gap={gap.gap:.6f} (ess {gap.ess:.0f})")
    path = os.path.join(out, "bl_gap.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("T,quantum,classical,gap,classical_stderr,ess\n")
        for T, g in rows:
            fh.write(f"{T:.17g},{g.quantum:.17g},{g.classical:.17g},"
                     f"{g.gap:.17g},{g.classical_stderr:.17g},{g.ess:.17g}\n")
    with open(os.path.join(out, "bl_gap_diagnostics.json"), "w",
              encoding="utf-8") as fh:
        json.dump({"warnings": diagnostics}, fh, indent=2, sort_keys=True)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gibbslab",
        description="Grand-canonical Bose gas vs classical field measure, "
                    f"at desk scale (kernel backend: {BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="key = value file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None)

    for name, fn, extra in [
        ("spectrum", cmd_spectrum, None),
        ("sample", cmd_sample, None),
        ("quantum", cmd_quantum, "T"),
        ("converge", cmd_converge, None),
        ("selfcheck", cmd_selfcheck, "corrupt"),
        ("bl-gap", cmd_bl_gap, "T"),
    ]:
        sp = sub.add_parser(name)
        common(sp)
        if extra == "T":
            sp.add_argument("--T", type=float, default=None,
                            help="single temperature instead of the schedule")
        if extra == "corrupt":
            sp.add_argument("--corrupt", action="store_true",
                            help=argparse.SUPPRESS)  # negative-control hook
        sp.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
