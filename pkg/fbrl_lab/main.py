import argparse
import logging
import sys

from .errors import ExperimentError, FbrlError

LOG_FORMAT = "[fbrl-lab] %(levelname)s %(message)s"


def configure_logging(verbose=False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, stream=sys.stderr)


def print_value_grid(env_spec, result):
    """Print V* as a grid with the goal row on top."""
    n = env_spec.size
    for y in range(n - 1, -1, -1):
        cells = [f"{result.value_of([x, y]):7.3f}" for x in range(n)]
        print("  " + " ".join(cells))


def cmd_run(args):
    from .config import load_config
    from .harness import FINAL_WINDOW, RAW_FILE, SUMMARY_FILE, run_experiment

    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.deterministic:
        config.deterministic_mode = True
    if args.trials is not None:
        config.trials = args.trials
    if args.out is not None:
        config.output_path = args.out
    config.validate()

    result = run_experiment(config, ledger_path=args.ledger, checkpoint=args.checkpoint)
    window = min(FINAL_WINDOW, config.total_episodes)
    for curve in result.curves:
        tail = curve.returns[-window:]
        print(f"trial {curve.trial} (seed {curve.seed}): final {window}-episode mean return {tail.mean():.3f}, "
              f"{curve.env_steps} env steps, {curve.imagined_transitions} imagined transitions")
    print(f"\nMean final return: {result.summary['mean_return'].tail(window).mean():.3f}")
    print(f"Wrote {result.output_dir / RAW_FILE} and {result.output_dir / SUMMARY_FILE}")
    return 0


def cmd_oracle(args):
    from .config import load_config
    from .environments import GRIDWORLD, reset
    from .oracles import bfs_shortest_path, policy_path_length, value_iteration_oracle

    config = load_config(args.config)
    env = config.environment
    result = value_iteration_oracle(env, config.agent.gamma)
    shortest = bfs_shortest_path(env)

    print(f"{env.kind} n={env.size}, gamma={config.agent.gamma}")
    print(f"States: {len(result.states)}, value iteration sweeps: {result.iterations}")
    print(f"V*(start) = {result.value_of(reset(env)):.6f}")
    if env.kind == GRIDWORLD:
        print("V* grid (top row is y = n-1):")
        print_value_grid(env, result)
    path_length = policy_path_length(env, result)
    print(f"Greedy policy path length: {path_length if path_length is not None else 'never reaches goal'}")
    if shortest is None:
        print("Shortest path: unreachable")
    else:
        print(f"Shortest path: {shortest} steps")
        print(f"Optimal return: {env.goal_reward + env.step_cost * (shortest - 1):.4f}")
    return 0


def cmd_compare(args):
    from .analysis import compare_runs, load_run_dir

    run_a = load_run_dir(args.a)
    run_b = load_run_dir(args.b)
    per_episode, summary = compare_runs(run_a, run_b, window=args.window)

    print("episode,mean_a,mean_b,difference")
    for row in per_episode.itertuples(index=False):
        print(f"{row.episode},{row.mean_return_a:.4f},{row.mean_return_b:.4f},{row.difference:.4f}")
    print(f"\nA: {run_a.path}\nB: {run_b.path}")
    print(f"Final {summary['final_window']}-episode mean: A {summary['final_mean_a']:.4f}, "
          f"B {summary['final_mean_b']:.4f}, difference {summary['final_difference']:+.4f}")
    print(f"Area under mean curve: A {summary['auc_a']:.2f}, B {summary['auc_b']:.2f}")
    if "median_first_goal_a" in summary and "median_first_goal_b" in summary:
        print(f"Median first goal episode: A {summary['median_first_goal_a']}, B {summary['median_first_goal_b']}")
    return 0


def cmd_plot(args):
    from .analysis import load_run_dir, plot_run

    out = plot_run(load_run_dir(args.input), args.out)
    print(f"Wrote {out}")
    return 0


def cmd_runs(args):
    from .run_ledger import open_ledger, query_runs

    db = open_ledger(args.db)
    rows = query_runs(db, environment=args.environment, method=args.method)
    db.close()
    if not rows:
        print("[INFO] 0 runs recorded. Check the filters or the ledger path.")
    for run_id, method, env, size, seed, trials, status, final, out in rows:
        final_text = "-" if final is None else f"{final:.3f}"
        print(f"{run_id}  {method:<4} {env} n={size} seed={seed} trials={trials} {status:<8} final={final_text} -> {out}")
    print(f"\n{len(rows)} run(s)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fbrl-lab",
        description="""
Forward-Backward Reinforcement Learning laboratory.

Trains Double DQN agents on Gridworld and Towers of Hanoi, optionally
augmented with a learned backward dynamics model that imagines rollouts
backwards from the goal, and compares both methods across seeded trials.
        """.strip(),
        epilog="""
EXAMPLES:
  # Train FBRL on a 10x10 Gridworld, 10 trials, reproducibly
  fbrl-lab run --config configs/gridworld10_fbrl.cfg --deterministic --out results/g10_fbrl

  # Same environment, DDQN baseline
  fbrl-lab run --config configs/gridworld10_ddqn.cfg --out results/g10_ddqn

  # Exact optimal values and shortest path for a config's environment
  fbrl-lab oracle --config configs/hanoi3_fbrl.cfg

  # Compare two result directories
  fbrl-lab compare --a results/g10_fbrl --b results/g10_ddqn

  # Plot a learning curve (PNG) or export gnuplot data (.dat)
  fbrl-lab plot --in results/g10_fbrl --out g10_fbrl.png

  # List recorded runs
  fbrl-lab runs --environment gridworld

OUTPUT:
  raw.csv      trial,episode,return,env_steps,epsilon,td_loss,backward_loss
  summary.csv  episode,mean_return,stderr_return,trials
  config.cfg   the resolved configuration of the run
        """,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug-level logging")

    subparsers = parser.add_subparsers(
        dest="command",
        required=False,
        title="commands",
        description="Available commands",
    )

    # ---------- run ----------
    run_p = subparsers.add_parser(
        "run",
        help="Train DDQN or FBRL over several seeded trials",
        description="""
Run every trial of an experiment config and write per-episode learning curves.
Trial i uses seed + i. In deterministic mode imagination runs inline, one
rollout per stream after each environment step, and identical seeds give
byte-identical CSV files.

CONFIG FORMAT (key = value, '#' comments):
  environment = gridworld      # or hanoi
  size = 10
  method = fbrl                # or ddqn
  trials = 10
  total_episodes = 500
        """.strip(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    run_p.add_argument("--config", required=True, metavar="FILE", help="Experiment config file")
    run_p.add_argument("--seed", type=int, default=None, metavar="N", help="Override the root seed")
    run_p.add_argument("--deterministic", action="store_true",
                       help="Force the single-threaded reproducible interleaving")
    run_p.add_argument("--out", default=None, metavar="DIR", help="Output directory (default: config output_path)")
    run_p.add_argument("--trials", type=int, default=None, metavar="N", help="Override the number of trials")
    run_p.add_argument("--checkpoint", action="store_true", help="Save final networks as FBRLNN1 files")
    run_p.add_argument("--ledger", default="runs.db", metavar="PATH", help="Run ledger database (default: runs.db)")

    # ---------- oracle ----------
    oracle_p = subparsers.add_parser(
        "oracle",
        help="Print optimal values and the shortest path for a config's environment",
        description="""
Solve the config's environment exactly: value iteration to a 1e-10 residual
and breadth-first search from the start state.

OUTPUT FORMAT (5x5 Gridworld):
  gridworld n=5, gamma=0.99
  States: 25, value iteration sweeps: ...
  V*(start) = 0.864131
  V* grid (top row is y = n-1):
  ...
  Greedy policy path length: 8
  Shortest path: 8 steps
  Optimal return: 0.9300

Optimal return is undiscounted: step_cost for each step before the last,
goal_reward for the step that enters the goal.
        """.strip(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    oracle_p.add_argument("--config", required=True, metavar="FILE", help="Experiment config file")

    # ---------- compare ----------
    compare_p = subparsers.add_parser(
        "compare",
        help="Compare the mean learning curves of two result directories",
        description="""
Print the per-episode mean-return difference (A - B) followed by a
final-window summary, areas under the mean curves and, when the run
configs are available, the median first goal-reaching episode.
        """.strip(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    compare_p.add_argument("--a", required=True, metavar="CSVDIR", help="First result directory")
    compare_p.add_argument("--b", required=True, metavar="CSVDIR", help="Second result directory")
    compare_p.add_argument("--window", type=int, default=50, metavar="N",
                           help="Final window in episodes (default: 50)")

    # ---------- plot ----------
    plot_p = subparsers.add_parser(
        "plot",
        help="Plot mean return +- stderr, or write gnuplot data",
        description="""
Plot the mean learning curve of a result directory. Targets ending in .dat or
.txt receive gnuplot-compatible columns (episode mean stderr) instead.
        """.strip(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    plot_p.add_argument("--in", dest="input", required=True, metavar="CSVDIR", help="Result directory")
    plot_p.add_argument("--out", required=True, metavar="FILE", help="Image or data file to write")

    # ---------- runs ----------
    runs_p = subparsers.add_parser(
        "runs",
        help="List experiment runs recorded in the run ledger",
        description="""
Show recorded runs with their config fingerprint, seed, status and final
mean return. Filter by environment kind and/or method.
        """.strip(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    runs_p.add_argument("--db", default="runs.db", metavar="PATH", help="Run ledger database (default: runs.db)")
    runs_p.add_argument("--environment", default=None, metavar="KIND", help="gridworld or hanoi")
    runs_p.add_argument("--method", default=None, metavar="METHOD", help="ddqn or fbrl")

    return parser


COMMANDS = {
    "run": cmd_run,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "plot": cmd_plot,
    "runs": cmd_runs,
}


def main(argv=None):
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8", errors="replace")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0

    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ExperimentError as e:
        print(f"[ERROR] {e}")
        print(f"[ERROR] aborted; no curves were averaged. Re-run with --seed {e.seed} --trials 1 to reproduce.")
        return 1
    except (FbrlError, FileNotFoundError, ValueError) as e:
        print(f"[ERROR] {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
