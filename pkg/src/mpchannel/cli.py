"""Command-line pipeline: simulate, measure, estimate, optimize, compare, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, hamiltonian, povm, sim, sweep, tp, verify
from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("mpchannel")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3


def _angles(cfg: RunConfig, h) -> tuple[np.ndarray, float]:
    if cfg.angles == "vqe":
        return sim.vqe_optimize(h, h.n, cfg.layers, seed=cfg.vqe_seed)
    theta = np.loadtxt(cfg.angles, dtype=float, ndmin=1).ravel()
    need = sim.n_parameters(h.n, cfg.layers)
    if theta.size != need:
        raise ConfigError(f"angles file has {theta.size} values, the ansatz needs {need}")
    rho = sim.simulate(sim.build_ansatz(h.n, cfg.layers, theta))
    return theta, povm.energy_estimate(rho, h)


def _quasistate_summary(q: povm.QuasiState, h) -> dict:
    w = np.linalg.eigvalsh(q.matrix)
    return {
        "shots": q.shots,
        "trace": float(np.trace(q.matrix).real),
        "min_eigenvalue": float(w[0]),
        "negativity": float(-w[w < 0].sum()),
        "energy": povm.energy_estimate(q, h),
    }


def prepare_states(cfg: RunConfig, h, out: Path | None = None):
    """Noisy circuit output plus (train, validation) quasistates."""
    theta, e_vqe = _angles(cfg, h)
    circuit = sim.build_ansatz(h.n, cfg.layers, theta)
    noise = sim.NoiseSpec(cfg.sigma_coh, cfg.lam_low, cfg.lam_high, cfg.noise_seed)
    rho = sim.simulate(circuit, noise)
    if cfg.shots_mode == "infinite":
        q_tr = q_val = povm.QuasiState(rho.copy(), None)
    else:
        frame = povm.pauli6_povm()
        s_tr, s_val = np.random.SeedSequence(cfg.shots_seed).spawn(2)
        rec_tr = povm.sample_shots(rho, frame, cfg.shots_train, s_tr)
        rec_val = povm.sample_shots(rho, frame, cfg.shots_val, s_val)
        if out is not None and cfg.save_shots:
            rec_tr.to_csv(out / "shots_train.csv")
            rec_val.to_csv(out / "shots_val.csv")
        q_tr = povm.estimate_quasistate(rec_tr, frame)
        q_val = povm.estimate_quasistate(rec_val, frame)
    return theta, e_vqe, rho, q_tr, q_val


def run_pipeline(cfg: RunConfig, progress=None) -> dict:
    """Execute a full run, write artifacts into ``cfg.output_dir`` and return the summary."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    h = hamiltonian.load(cfg.hamiltonian)
    theta, e_vqe, rho, q_tr, q_val = prepare_states(cfg, h, out)
    np.savetxt(out / "angles.txt", theta)
    q_tr.save(out / "quasistate_train.npz")
    q_val.save(out / "quasistate_val.npz")
    e_noisy = povm.energy_estimate(rho, h)

    sc = sweep.SweepConfig(r=cfg.r, eta=cfg.eta, max_sweeps=cfg.max_sweeps, patience=cfg.patience, seed=cfg.mpc_seed)
    res = sweep.run(q_tr, q_val, h, sc, progress=progress)
    sweep.write_trajectory_csv(res.records, out / "trajectory.csv")
    res.best_mpc.save(out / "best_mpc.npz")

    summary = {
        "config": cfg.echo(),
        "config_text": cfg.source_text,
        "n_qubits": h.n,
        "e_vqe": e_vqe,
        "e_noisy": e_noisy,
        "quasistates": {"train": _quasistate_summary(q_tr, h), "val": _quasistate_summary(q_val, h)},
        "final_tp_residual": tp.global_tp_residual(res.final_mpc) if h.n <= 5 else None,
        "best_tp_residual": tp.global_tp_residual(res.best_mpc) if h.n <= 5 else None,
        **res.summary(),
    }
    if cfg.baselines:
        ref = baselines.exact_ground(h)
        e0 = ref.energy
        dmrg = {str(r): baselines.dmrg_ground(h, r).energy for r in cfg.dmrg_bonds}
        summary.update({
            "e0": e0,
            "ground_multiplicity": ref.multiplicity,
            "s_ent": ref.entropy.s_ent,
            "effective_bond": ref.entropy.effective_bond,
            "e_dmrg": dmrg,
            "errors": {
                "eps_vqe": e_vqe - e0,
                "eps_noise": e_noisy - e_vqe,
                "eps_est": res.e_est - e0,
                "eps_q+cl": res.best_val - e0,
                "eps_cl": {r: e - e0 for r, e in dmrg.items()},
            },
        })
        if str(cfg.r) in dmrg:
            summary["beats_dmrg_same_r"] = bool(res.best_val < dmrg[str(cfg.r)])
    with open(out / "summary.json", "w") as fh:
        json.dump(_plain(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# --------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg.output_dir = Path(args.output)

    def progress(rec):
        log.info("sweep %d floor %d (%s): train %.8f val %.8f tp %.1e [%s]", rec.sweep, rec.floor, rec.direction,
                 rec.e_train, rec.e_val, rec.tp_residual_norm, rec.solver_status)

    s = run_pipeline(cfg, progress)
    print(f"E_est      {s['e_est']:.8f}")
    print(f"best val   {s['best_val']:.8f} (sweep {s['best_sweep']})")
    if "e0" in s:
        print(f"E0         {s['e0']:.8f}")
    print(f"accepted   {s['accepted']}")
    print(f"artifacts  {cfg.output_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in verify.SUITES:
        print(f"unknown suite {args.suite!r}; available: {', '.join(verify.SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    rep = verify.run_suite(args.suite)
    for c in rep.checks:
        rel = "<=" if c.value <= c.threshold or not c.passed else ">"
        print(f"[{'ok' if c.passed else 'FAIL'}] {c.name}: {c.value:.3e} ({rel} {c.threshold:g})")
    for note in rep.notes:
        print(f"  {note}")
    print(f"suite {rep.suite}: {'passed' if rep.passed else 'FAILED'}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_gen_hamiltonian(args) -> int:
    if args.model == "tfim":
        h = hamiltonian.tfim(args.n, args.j, 1.0 if args.h is None else args.h)
    elif args.model == "heisenberg":
        h = hamiltonian.heisenberg(args.n, args.j, 0.0 if args.h is None else args.h)
    else:
        h = hamiltonian.z_field(args.n)
    text = hamiltonian.serialize(h)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    if cfg.shots_mode != "finite":
        raise ConfigError("sample needs [shots] mode = finite")
    out = Path(args.output) if args.output else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg.save_shots = True
    h = hamiltonian.load(cfg.hamiltonian)
    _, _, _, q_tr, q_val = prepare_states(cfg, h, out)
    print(f"wrote {out / 'shots_train.csv'} ({q_tr.shots} shots) and {out / 'shots_val.csv'} ({q_val.shots} shots)")
    return EXIT_OK


def cmd_baseline(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        path, bonds = cfg.hamiltonian, cfg.dmrg_bonds
    elif args.hamiltonian:
        path, bonds = Path(args.hamiltonian), [2]
    else:
        raise ConfigError("baseline needs a config file or --hamiltonian")
    if args.bonds:
        bonds = args.bonds
    if not Path(path).is_file():
        raise ConfigError(f"Hamiltonian file {path} does not exist")
    h = hamiltonian.load(path)
    ref = baselines.exact_ground(h)
    result = {"e0": ref.energy, "ground_multiplicity": ref.multiplicity, "s_ent": ref.entropy.s_ent,
              "entropy_cuts": ref.entropy.cuts,
              "e_dmrg": {str(r): baselines.dmrg_ground(h, r).energy for r in bonds}}
    print(json.dumps(_plain(result), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpchannel", description="Matrix-product-channel postprocessing of noisy VQE states.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every floor update")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="full pipeline from an INI config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="override [output] dir")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help=f"randomized oracle suites: {', '.join(verify.SUITES)}")
    v.add_argument("suite")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen-hamiltonian", help="write a model Hamiltonian in the Pauli-string format")
    g.add_argument("model", choices=["tfim", "heisenberg", "zfield"])
    g.add_argument("-n", type=int, required=True)
    g.add_argument("-j", type=float, default=1.0, help="coupling")
    g.add_argument("--h", type=float, help="field: tfim transverse (default 1), heisenberg longitudinal (default 0)")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_hamiltonian)

    s = sub.add_parser("sample", help="draw finite-shot measurement records only")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sample)

    b = sub.add_parser("baseline", help="exact ground energy and DMRG references only")
    b.add_argument("config", nargs="?")
    b.add_argument("--hamiltonian")
    b.add_argument("--bonds", type=int, nargs="+")
    b.set_defaults(func=cmd_baseline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, hamiltonian.HamiltonianFormatError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
