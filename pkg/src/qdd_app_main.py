import argparse
import json
import logging
import os
import sys
from dataclasses import replace

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir)))

from src.control import default_gain_bank
from src.errors import ConfigError
from src.harness import evaluate_scenario, measure_bandwidth, run_matrix
from src.optimizer import ZieglerNicholsTuner
from src.params import load_params
from src.plant import Static
from src.protocol import bus_budget
from src.reporting import emit_csv, emit_report, format_report_table, load_report
from src.scenarios import builtin_scenarios, load_scenario, motion_profile
from src.visualizer import TrackingVisualizer

EXIT_OK, EXIT_SCENARIO_FAILURE, EXIT_CONFIG_ERROR = 0, 1, 2

logger = logging.getLogger("qdd")


def _banner(title):
    print(f"\n{'='*50}")
    print(f"  {title}")
    print(f"{'='*50}\n")


def _apply_overrides(spec, args):
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.physics_dt is not None:
        spec = replace(spec, schedule=spec.schedule.with_physics_dt(args.physics_dt))
    return spec


def _write_artifacts(rows, out_dir, figures=True):
    viz = TrackingVisualizer()
    for row in rows:
        for i, trace in enumerate(row.traces):
            emit_csv(trace, os.path.join(out_dir, f"{row.name}_r{i + 1}.csv"))
        if figures and row.traces:
            viz.emit_svg(row.traces, os.path.join(out_dir, f"{row.name}.svg"))
    if figures and any(r.traces for r in rows):
        viz.plot_force_distribution(rows, os.path.join(out_dir, "force_distribution.svg"))


# --- Subcommands ---

def cmd_run(args, params):
    spec = _apply_overrides(load_scenario(args.scenario, params), args).validate()
    _banner(f"QDD TESTBED: SCENARIO RUN [{spec.name}]")
    row = evaluate_scenario(spec, params, keep_traces=True)
    print(format_report_table([row]))
    if not row.ok:
        return EXIT_SCENARIO_FAILURE
    _write_artifacts([row], args.out, figures=not args.no_figures)
    print(f"\nDiagnostics: {row.diagnostics}")
    print(f"Artifacts written to {args.out}/")
    return EXIT_OK


def cmd_matrix(args, params):
    if args.dir:
        files = sorted(f for f in os.listdir(args.dir) if f.endswith(('.yaml', '.yml', '.json')))
        if not files:
            raise ConfigError(f"no scenario files in {args.dir}")
        specs = [load_scenario(os.path.join(args.dir, f), params) for f in files]
    else:
        specs = builtin_scenarios(params)
    specs = [_apply_overrides(s, args).validate() for s in specs]

    _banner(f"QDD TESTBED: EXPERIMENT MATRIX ({len(specs)} scenarios)")
    rows = run_matrix(specs, parallelism=args.jobs, params=params, keep_traces=True)
    print(format_report_table(rows))

    text_path, json_path = emit_report(rows, os.path.join(args.out, "report.txt"))
    _write_artifacts([r for r in rows if r.ok], args.out, figures=not args.no_figures)
    print(f"\nReport: {text_path}\nStructured report: {json_path}")
    failed = [r.name for r in rows if not r.ok]
    if failed:
        print(f"\nFAILED scenarios: {', '.join(failed)}")
        return EXIT_SCENARIO_FAILURE
    return EXIT_OK


def cmd_report(args, params):
    rows = load_report(args.results)
    _banner(f"QDD TESTBED: REPORT [{args.results}]")
    print(format_report_table(rows))
    return EXIT_OK if all(r.ok for r in rows) else EXIT_SCENARIO_FAILURE


def cmd_tune(args, params):
    profile = Static() if args.profile == 'static' else motion_profile(args.profile, params)
    _banner(f"QDD TESTBED: ZIEGLER-NICHOLS TUNING [{args.architecture}, {args.profile}]")
    result = ZieglerNicholsTuner(args.architecture, profile, args.tissue, params).tune()
    print(json.dumps(result, indent=2))
    path = os.path.join(args.out, f"tuning_{args.architecture}_{args.profile}.json")
    with open(path, 'w') as f:
        json.dump(result, f, indent=2)
    return EXIT_OK


def cmd_bandwidth(args, params):
    _banner(f"QDD TESTBED: FORCE BANDWIDTH SWEEP [{args.architecture}]")
    bw = measure_bandwidth(args.architecture, amplitudes=args.amplitudes, params=params)
    control_rate = params['schedule']['control_rate_hz']
    codec = params['codec']
    util = bus_budget(control_rate, codec['frame_overhead_bits'], codec['frames_per_cycle'],
                      codec['bus_bitrate_bps'])
    result = {"architecture": args.architecture, "bandwidth_hz": round(bw, 4),
              "control_rate_hz": control_rate, "bus_utilization": round(util, 6)}
    print(f"  - -3 dB Force Bandwidth:  {bw:.3f} Hz")
    print(f"  - Control Loop Rate:      {control_rate:g} Hz")
    print(f"  - Bus Utilization:        {util * 100:.2f} %")
    with open(os.path.join(args.out, f"bandwidth_{args.architecture}.json"), 'w') as f:
        json.dump(result, f, indent=2)
    return EXIT_OK


def cmd_gains(args, params):
    _banner("QDD TESTBED: PID GAIN BANK")
    print(default_gain_bank().table())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(description="QDD force-control testbed: compliant end-effector vs rigid arm.")
    parser.add_argument('--seed', type=int, default=None, help="Master seed (overrides scenario and config).")
    parser.add_argument('--out', default='simulation_result', help="Output directory for traces, figures and reports.")
    parser.add_argument('--physics-dt', type=float, default=None, help="Physics step in seconds.")
    parser.add_argument('--params', default=None, help="Alternative parameters.yaml.")
    parser.add_argument('--verbose', action='store_true', help="INFO-level logging.")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('run', help="Run one scenario file.")
    p.add_argument('scenario')
    p.add_argument('--no-figures', action='store_true')

    p = sub.add_parser('matrix', help="Run a batch of scenarios.")
    src = p.add_mutually_exclusive_group()
    src.add_argument('--builtin', action='store_true', help="The builtin experiment matrix (default).")
    src.add_argument('--dir', help="Directory of scenario files.")
    p.add_argument('--jobs', type=int, default=1, help="Worker processes.")
    p.add_argument('--no-figures', action='store_true')

    p = sub.add_parser('report', help="Reprint a structured report.")
    p.add_argument('results')

    p = sub.add_parser('tune', help="Ziegler-Nichols ultimate-gain sweep.")
    p.add_argument('--architecture', choices=['end_effector', 'arm'], default='end_effector')
    p.add_argument('--profile', choices=['static', 'breathing', 'sudden'], default='static')
    p.add_argument('--tissue', default='porcine')

    p = sub.add_parser('bandwidth', help="Swept-sine -3 dB force bandwidth.")
    p.add_argument('--architecture', choices=['end_effector', 'arm'], default='end_effector')
    p.add_argument('--amplitudes', type=float, nargs='+', default=None)

    sub.add_parser('gains', help="Print the PID gain bank.")
    return parser


COMMANDS = {
    'run': cmd_run, 'matrix': cmd_matrix, 'report': cmd_report,
    'tune': cmd_tune, 'bandwidth': cmd_bandwidth, 'gains': cmd_gains,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        params = load_params(args.params)
        if args.physics_dt is not None:
            params['schedule']['physics_dt_s'] = args.physics_dt
        if args.seed is not None:
            params['harness']['default_seed'] = args.seed
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args, params)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (OSError, RuntimeError) as exc:
        logger.error("%s", exc)
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO_FAILURE


if __name__ == "__main__":
    sys.exit(main())
