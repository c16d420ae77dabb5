import json
import os
import sys
from dataclasses import replace

# Ensure src is in path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.engine import run_scenario
from src.harness import run_matrix
from src.kinematics import TransmissionGeometry, force_from_torque
from src.params import load_params
from src.plant import ActuatorModel, CarriageModel, PlantState, Static, TissueModel, step_end_effector
from src.protocol import bus_budget
from src.scenarios import builtin_scenarios
from src.stats import compute_metrics


def _verdict(ok):
    return "PASS" if ok else "FAIL"


def _backdrive_travel(force_scale, params):
    """Carriage travel (m) after 0.5 s of an external push with zero torque, probe off the tissue."""
    actuator = ActuatorModel.from_params(params)
    carriage = CarriageModel.from_params(params)
    tissue = TissueModel(surface_rest_position=-1.0)
    push = -force_scale * actuator.backdrive_friction_torque / carriage.geometry.pulley_radius
    theta0 = 0.5 * carriage.max_theta
    state = PlantState(theta=theta0, probe_position=theta0 * carriage.geometry.pulley_radius)
    dt = params['schedule']['physics_dt_s']
    for _ in range(round(0.5 / dt)):
        state = step_end_effector(state, actuator, carriage, tissue, 0.0, Static(), dt, external_force=push)
    return abs(state.theta - theta0) * carriage.geometry.pulley_radius


def verify_tracking(jobs=1):
    print("=================================================================")
    print("VERIFICATION: FORCE TRACKING CLAIMS (END-EFFECTOR vs RIGID ARM)")
    print("=================================================================\n")
    params = load_params()
    checks = {}

    print("[1] Rated force from the transmission...")
    f_max = force_from_torque(params['actuator']['rated_torque_nm'], TransmissionGeometry.from_params(params))
    checks['rated_force'] = abs(f_max - 62.2) < 0.05
    print(f"    - 3 N*m through r=48.25 mm: {f_max:.2f} N -> {_verdict(checks['rated_force'])}\n")

    print("[2] Running the builtin experiment matrix...")
    specs = builtin_scenarios(params)
    rows = {r.name: r for r in run_matrix(specs, parallelism=jobs, params=params, keep_traces=True)}
    failed = [n for n, r in rows.items() if not r.ok]
    checks['matrix_complete'] = not failed
    print(f"    - {len(rows)} scenarios, {len(failed)} failed -> {_verdict(not failed)}\n")
    if failed:
        return checks

    print("[3] Static tracking (post-transient mean within 0.1 N, RMSe <= 0.1 N)")
    ok = True
    for name, r in rows.items():
        if name.startswith('ee_static'):
            row_ok = abs(r.pooled.mean - r.target_force) <= 0.1 and r.pooled.rmse <= 0.1
            ok &= row_ok
            print(f"    {name:<28} mean={r.pooled.mean:.3f} rmse={r.pooled.rmse:.3f} {_verdict(row_ok)}")
    checks['static_tracking'] = ok

    print("\n    End-effector gain rows 1-10 after 1 s (mean within 5%, torque off the clamp)")
    ok = True
    limit = params['controllers']['end_effector']['output_limit_nm']
    for name, r in rows.items():
        if not name.startswith('ee_') or 'sudden' in name:
            continue
        means = [compute_metrics(t, r.target_force, 1.0).mean for t in r.traces]
        clamped = any(abs(t.command[t.time >= 1.0]).max() >= limit for t in r.traces)
        row_ok = all(abs(m - r.target_force) <= 0.05 * r.target_force for m in means) and not clamped
        ok &= row_ok
        print(f"    row {r.controller:>2} {name:<28} mean={min(means):.3f}..{max(means):.3f} {_verdict(row_ok)}")
    checks['gain_rows_settle'] = ok

    print("\n[4] Breathing motion: end-effector vs arm on porcine tissue")
    ee_rmse, arm_rmse, ok = [], [], True
    for target in (2.5, 5.0, 10.0, 15.0):
        ee = rows[f"ee_breathing_porcine_{target:g}N"].pooled
        arm = rows[f"arm_breathing_porcine_{target:g}N"].pooled
        ee_rmse.append(ee.rmse)
        arm_rmse.append(arm.rmse)
        ok &= ee.rmse < arm.rmse
        print(f"    {target:>5.1f} N | EE RMSe {ee.rmse:6.3f} N | Arm RMSe {arm.rmse:6.3f} N")
    ratio = (sum(arm_rmse) / len(arm_rmse)) / (sum(ee_rmse) / len(ee_rmse))
    checks['breathing_ordering'] = ok and ratio >= 2.0
    print(f"    Average arm/EE RMSe ratio: {ratio:.2f}x -> {_verdict(checks['breathing_ordering'])}")

    ok = True
    for target in (2.5, 15.0):
        ee = rows[f"ee_breathing_porcine_{target:g}N"].pooled
        ok &= abs(ee.mean - target) <= 0.05 * target
    checks['force_range'] = ok
    print(f"    2.5 N and 15 N means within 5% -> {_verdict(ok)}\n")

    print("[5] Sudden platform movement (20 mm pulse, 5 N target)")
    ee = rows['ee_sudden_porcine_5N'].diagnostics
    arm = rows['arm_sudden_porcine_5N'].diagnostics
    checks['sudden_peaks'] = (ee['peak_force_N'] < arm['peak_force_N']
                              and ee['contact_loss_s'] <= arm['contact_loss_s'])
    print(f"    EE  peak {ee['peak_force_N']:.2f} N, contact loss {ee['contact_loss_s']:.2f} s")
    print(f"    Arm peak {arm['peak_force_N']:.2f} N, contact loss {arm['contact_loss_s']:.2f} s")
    print(f"    -> {_verdict(checks['sudden_peaks'])}\n")

    print("[6] Bus budget and backdrivability")
    util = bus_budget(params['schedule']['control_rate_hz'], params['codec']['frame_overhead_bits'])
    checks['bus_budget'] = util < 0.05
    moved, crept = _backdrive_travel(1.5, params), _backdrive_travel(0.5, params)
    checks['backdrive'] = moved >= 1e-3 and crept < 5e-5
    print(f"    - Bus utilization at 100 Hz: {util * 100:.2f} % -> {_verdict(checks['bus_budget'])}")
    print(f"    - Travel under 1.5x / 0.5x threshold push: {moved * 1e3:.2f} mm / {crept * 1e3:.3f} mm"
          f" -> {_verdict(checks['backdrive'])}\n")

    print("[7] Determinism and codec in the loop (static 5 N)")
    static = next(s for s in specs if s.name == 'ee_static_porcine_5N')
    first = run_scenario(static, params=params)
    checks['determinism'] = run_scenario(static, params=params).identical_to(first)
    cut = static.window_start(params)
    plain = compute_metrics(first, static.target_force, cut).rmse
    coded = compute_metrics(run_scenario(replace(static, codec_in_loop=True), params=params),
                            static.target_force, cut).rmse
    checks['codec_in_loop'] = abs(coded - plain) < 0.01
    print(f"    - Repeat run bit-identical -> {_verdict(checks['determinism'])}")
    print(f"    - RMSe {plain:.4f} N plain vs {coded:.4f} N through the codec"
          f" -> {_verdict(checks['codec_in_loop'])}\n")

    report = {
        "checks": checks,
        "all_pass": all(checks.values()),
        "rows": [r.as_dict() for r in rows.values()],
    }
    os.makedirs('reports', exist_ok=True)
    with open(os.path.join('reports', 'tracking_report.json'), 'w') as f:
        json.dump(report, f, indent=2)
    print(f"OVERALL: {_verdict(report['all_pass'])} (report: reports/tracking_report.json)")
    return checks


if __name__ == "__main__":
    jobs = int(sys.argv[1]) if len(sys.argv) > 1 else max(1, (os.cpu_count() or 2) // 2)
    result = verify_tracking(jobs)
    sys.exit(0 if all(result.values()) else 1)
