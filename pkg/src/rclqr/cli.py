"""Command-line interface: synthesize / solve / simulate / paper-uav.

Every subcommand reads a JSON config (except ``paper-uav``, which carries
its own built-in benchmark), writes a JSON report plus CSV data files into
the output directory, and renders matplotlib figures next to them.  All
outputs are deterministic given the config and seeds.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dual as dual_mod
from . import evaluation, plots, presets, sim, synthesis
from .config import load_config
from .errors import InfeasibilityError, RclqrError


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _risk_echo(problem):
    return {
        "rho": problem.rho,
        "rho_bar": problem.rho_bar,
        "m4": problem.stats.weighted_fourth,
        "m4_stderr": problem.stats.weighted_fourth_stderr,
    }


def _policy_report(problem, policy):
    report = evaluation.evaluate(policy, problem)
    h_gap = abs(report.dual_value - policy.h) / (1.0 + abs(policy.h))
    return {
        "policy": policy.to_dict(),
        "eval": report.to_dict(),
        "h_vs_dual_value_rel_gap": h_gap,
        "risk": _risk_echo(problem),
    }


def cmd_synthesize(cfg, lam, out_dir):
    problem = cfg.build_problem()
    policy = synthesis.synthesize(problem, lam)
    payload = _policy_report(problem, policy)
    payload["command"] = "synthesize"
    path = out_dir / "report.json"
    _write_json(path, payload)
    return [path]


def _solve(problem, cfg, stop_tol):
    schedule = cfg.step_schedule()
    estimated = None
    if schedule is None:  # certified kind without explicit bounds
        b, e = dual_mod.estimate_certified_constants(problem)
        schedule = dual_mod.StepSchedule.certified(b, e)
        estimated = {"b": b, "e": e}
    policy, trace = dual_mod.solve_primal_dual(
        problem, schedule,
        max_iter=cfg.solver["max_iter"],
        lambda1=cfg.solver["lambda1"],
        stop_tol=cfg.solver["stop_tol"] if stop_tol is None else stop_tol,
    )
    return schedule, estimated, policy, trace


def cmd_solve(cfg, out_dir, stop_tol=None, bisect_tol=1e-8):
    problem = cfg.build_problem()
    schedule, estimated, policy, trace = _solve(problem, cfg, stop_tol)

    lam_star = dual_mod.bisection_lambda(problem, tol=bisect_tol)
    ref_policy = synthesis.synthesize(problem, lam_star)
    j_star = evaluation.lqr_cost_closed_form(ref_policy, problem)

    trace_path = out_dir / "trace.csv"
    trace.to_csv(trace_path, j_star=j_star, rho_bar=problem.rho_bar)

    payload = _policy_report(problem, policy)
    payload["command"] = "solve"
    payload["schedule"] = schedule.describe()
    payload["iterations"] = len(trace.iterations)
    payload["lambda_bar"] = trace.lambda_bar
    payload["reference"] = {"lambda_star": lam_star, "J_star": j_star}
    last = trace.iterations[-1]
    payload["final"] = {
        "k": last.k, "lambda": last.lam, "subgradient": last.subgradient,
        "opt_gap": abs(last.J - j_star) / abs(j_star),
        "violation": (last.J_c - problem.rho_bar) / problem.rho_bar,
    }
    written = [trace_path]
    if schedule.kind == "certified":
        cert = dual_mod.rate_certificate(trace, problem, schedule.b, schedule.e)
        cert_path = out_dir / "rate.csv"
        cert.to_csv(cert_path)
        plots.save_dual_gap_figure(cert, out_dir / "rate.png")
        payload["rate_certificate"] = {
            "passed": cert.passed, "violations": cert.violations,
            "b": cert.b, "e": cert.e, "d_star": cert.d_star,
        }
        if estimated:
            payload["rate_certificate"]["estimated"] = estimated
        written += [cert_path, out_dir / "rate.png"]

    ks = [it.k for it in trace.iterations]
    gaps = [abs(it.J - j_star) / abs(j_star) for it in trace.iterations]
    viols = [(it.J_c - problem.rho_bar) / problem.rho_bar for it in trace.iterations]
    plots.save_convergence_figure(
        {schedule.describe(): {"k": ks, "opt_gap": gaps, "violation": viols}},
        out_dir / "convergence.png",
    )
    report_path = out_dir / "report.json"
    _write_json(report_path, payload)
    return [report_path, out_dir / "convergence.png"] + written


def _variance_summary(problem, policy):
    mu, Sigma = evaluation.stationary_moments(policy, problem)
    return {"mean": mu.tolist(), "variance": np.diag(Sigma).tolist()}


def cmd_simulate(cfg, out_dir, lam=None, solved=False, seed_override=None):
    problem = cfg.build_problem()
    if solved:
        _, _, policy, _ = _solve(problem, cfg, None)
    else:
        policy = synthesis.synthesize(problem, 0.0 if lam is None else lam)
    baseline = synthesis.synthesize(problem, 0.0)

    T = cfg.sim["T"]
    seeds = [seed_override] if seed_override is not None else cfg.sim["seeds"]
    burn_in = cfg.sim["burn_in"]
    if burn_in is None:
        burn_in = sim.default_burn_in(T)
    x0 = cfg.x0()
    if x0 is None:
        x0, _ = evaluation.stationary_moments(policy, problem)

    traj = sim.rollout(problem, policy, x0, T, seeds[0])
    traj_base = sim.rollout(problem, baseline, x0, T, seeds[0])
    paths = [out_dir / "trajectory_policy.csv", out_dir / "trajectory_baseline.csv"]
    traj.to_csv(paths[0])
    traj_base.to_csv(paths[1])

    J_hat, Jc_hat = sim.ensemble_costs(problem, policy, x0, T, seeds, burn_in)
    J_closed = evaluation.lqr_cost_closed_form(policy, problem)
    Jc_closed = evaluation.risk_closed_form(policy, problem)

    payload = {
        "command": "simulate",
        "lambda": policy.lam,
        "T": T,
        "seeds": list(seeds),
        "burn_in": burn_in,
        "risk": _risk_echo(problem),
        "empirical": {"J": J_hat, "J_c": Jc_hat},
        "closed_form": {"J": J_closed, "J_c": Jc_closed},
        "rel_err": {
            "J": abs(J_hat - J_closed) / abs(J_closed),
            "J_c": abs(Jc_hat - Jc_closed) / abs(Jc_closed),
        },
        "stationary": {
            "policy": _variance_summary(problem, policy),
            "baseline": _variance_summary(problem, baseline),
        },
    }
    n = problem.n
    plots.save_trajectory_figure(
        {"risk-constrained" if policy.lam > 0 else "policy": traj.states,
         "baseline (lambda=0)": traj_base.states},
        list(range(min(n, 4))), out_dir / "trajectory.png",
    )
    report_path = out_dir / "report.json"
    _write_json(report_path, payload)
    return [report_path, out_dir / "trajectory.png"] + paths


def cmd_paper_uav(out_dir, solve_iters=100, sim_steps=10_000, sim_seed=7,
                  m4_draws=None, bisect_tol=1e-8):
    """Run the built-in UAV benchmark end to end.

    Phase one solves the multiplier search at the reformulated budget
    (rho_bar = 15) under both bundled step rules and writes the
    convergence traces; phase two compares the risk-constrained and
    unconstrained trajectories at the original budget (rho = 8).
    """
    kwargs = {} if m4_draws is None else {"m4_draws": m4_draws}
    problem = presets.uav_problem(rho_bar=15.0, **kwargs)

    lam_star = dual_mod.bisection_lambda(problem, tol=bisect_tol)
    j_star = evaluation.lqr_cost_closed_form(synthesis.synthesize(problem, lam_star), problem)

    traces = {}
    trace_files = []
    for label, schedule in (
        ("constant", dual_mod.StepSchedule.constant(0.1)),
        ("diminishing", dual_mod.StepSchedule.diminishing(0.1)),
    ):
        _, trace = dual_mod.solve_primal_dual(
            problem, schedule, max_iter=solve_iters, lambda1=0.0, stop_tol=0.0,
        )
        path = out_dir / f"trace_{label}.csv"
        trace.to_csv(path, j_star=j_star, rho_bar=problem.rho_bar)
        trace_files.append(path)
        traces[label] = {
            "k": [it.k for it in trace.iterations],
            "opt_gap": [abs(it.J - j_star) / j_star for it in trace.iterations],
            "violation": [(it.J_c - problem.rho_bar) / problem.rho_bar
                          for it in trace.iterations],
        }
    plots.save_convergence_figure(traces, out_dir / "convergence.png")

    # Trajectory comparison at the original predictive-variance budget.
    problem8 = dataclasses.replace(problem, rho=8.0)
    lam8 = dual_mod.bisection_lambda(problem8, tol=bisect_tol)
    rc_policy = synthesis.synthesize(problem8, lam8)
    baseline = synthesis.synthesize(problem8, 0.0)
    mu_rc, Sigma_rc = evaluation.stationary_moments(rc_policy, problem8)
    mu_b, Sigma_b = evaluation.stationary_moments(baseline, problem8)

    traj_rc = sim.rollout(problem8, rc_policy, mu_rc, sim_steps, sim_seed)
    traj_b = sim.rollout(problem8, baseline, mu_b, sim_steps, sim_seed)
    traj_rc.to_csv(out_dir / "trajectory_constrained.csv")
    traj_b.to_csv(out_dir / "trajectory_baseline.csv")
    plots.save_trajectory_figure(
        {"risk-constrained": traj_rc.states, "baseline (lambda=0)": traj_b.states},
        [0, 2], out_dir / "positions.png",
    )

    burn = sim.default_burn_in(sim_steps)
    var_rc = traj_rc.states[burn:, 0].var()
    var_b = traj_b.states[burn:, 0].var()

    payload = {
        "command": "paper-uav",
        "budget_experiment": {
            "rho_bar": problem.rho_bar,
            "rho": problem.rho,
            "lambda_star": lam_star,
            "J_star": j_star,
            "final": {
                label: {"opt_gap": data["opt_gap"][-1], "violation": data["violation"][-1]}
                for label, data in traces.items()
            },
        },
        "trajectory_experiment": {
            "rho": problem8.rho,
            "rho_bar": problem8.rho_bar,
            "lambda_star": lam8,
            "stationary_variance": {
                "constrained": np.diag(Sigma_rc).tolist(),
                "baseline": np.diag(Sigma_b).tolist(),
            },
            "empirical_x1_variance": {"constrained": var_rc, "baseline": var_b},
        },
        "noise": _risk_echo(problem),
    }
    report_path = out_dir / "report.json"
    _write_json(report_path, payload)
    return [report_path, out_dir / "convergence.png",
            out_dir / "positions.png"] + trace_files


def _build_parser():
    # global flags live on a parent parser so they work both before and
    # after the subcommand (e.g. `rclqr paper-uav --out DIR`); SUPPRESS
    # keeps an absent flag from clobbering a value parsed earlier
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the simulation seed")
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS,
                        help="override solver stop tolerance / bisection tolerance")

    parser = argparse.ArgumentParser(
        prog="rclqr",
        description="Risk-constrained average-cost LQR synthesis and dual solver",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_syn = sub.add_parser("synthesize", parents=[common],
                           help="synthesize a policy at a fixed multiplier")
    p_syn.add_argument("--config", required=True)
    p_syn.add_argument("--lambda", dest="lam", type=float, required=True)

    p_solve = sub.add_parser("solve", parents=[common],
                             help="run the primal-dual multiplier search")
    p_solve.add_argument("--config", required=True)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="roll out a policy against the baseline")
    p_sim.add_argument("--config", required=True)
    group = p_sim.add_mutually_exclusive_group()
    group.add_argument("--lambda", dest="lam", type=float, default=None)
    group.add_argument("--solved", action="store_true",
                       help="use the primal-dual solution as the policy")

    p_uav = sub.add_parser("paper-uav", parents=[common],
                           help="run the built-in UAV benchmark bundle")
    p_uav.add_argument("--solve-iters", type=int, default=100,
                       help="iterations per step-rule trace")
    p_uav.add_argument("--sim-steps", type=int, default=10_000,
                       help="trajectory length for the comparison rollouts")
    p_uav.add_argument("--m4-draws", type=int, default=None,
                       help="Monte-Carlo draws for the mixture fourth moment")
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    args.out = getattr(args, "out", ".")
    args.seed = getattr(args, "seed", None)
    args.tol = getattr(args, "tol", None)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "synthesize":
            written = cmd_synthesize(load_config(args.config), args.lam, out_dir)
        elif args.command == "solve":
            written = cmd_solve(load_config(args.config), out_dir, stop_tol=args.tol,
                                bisect_tol=args.tol or 1e-8)
        elif args.command == "simulate":
            written = cmd_simulate(load_config(args.config), out_dir, lam=args.lam,
                                   solved=args.solved, seed_override=args.seed)
        else:
            written = cmd_paper_uav(out_dir, solve_iters=args.solve_iters,
                                    sim_steps=args.sim_steps, sim_seed=args.seed or 7,
                                    m4_draws=args.m4_draws,
                                    bisect_tol=args.tol or 1e-8)
    except (RclqrError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, InfeasibilityError) and exc.scanned:
            print("scanned multipliers (lambda -> risk):", file=sys.stderr)
            for lam, risk in exc.scanned:
                print(f"  {lam:.6g} -> {risk:.6g}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
