"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the switch
(``BATCHDIST_DISABLE_NUMBA``) is read at import time. Numba compilation is
excluded from the timings by a warm-up call.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent(r"""
    import dataclasses, json, sys, timeit
    from batchdist import _jit, kernels
    from batchdist.integrator import ColumnModel, pack_state, simulate
    from batchdist.reference import reference_scenario
    from batchdist.workflow.config import load_config
    from batchdist.cli import bundled_data

    repeat = int(sys.argv[1])
    bundle = load_config(bundled_data("benchmark_scenarios.xml"),
                         bundled_data("properties_butanol_propanol_water.xml"))
    sc = bundle.scenarios[1]
    model = ColumnModel(sc.mixture, sc.plant, sc.controls, sc.integrator)
    state = simulate(dataclasses.replace(sc, horizon=0.0)).final_state
    args = model._args(model.controls(0.0), 5.0, model.conserved(state))
    z = pack_state(state)

    def best(fn, number):
        fn()  # warm-up (compilation)
        return min(timeit.repeat(fn, number=number, repeat=repeat)) / number

    ref = reference_scenario(horizon=1200.0)
    case = dataclasses.replace(sc, horizon=3600.0)
    out = dict(
        backend="numba" if _jit.USE_NUMBA else "numpy",
        step_residual=best(lambda: kernels.step_residual(z, *args), 200),
        step_jacobian=best(lambda: kernels.step_jacobian(z, *args, model.z_typ), 5),
        simulate_reference=best(lambda: simulate(ref), 1),
        simulate_case2_1h=best(lambda: simulate(case), 1),
    )
    json.dump(out, sys.stdout)
""")


def run_backend(disable, repeat):
    env = dict(os.environ)
    env.pop("BATCHDIST_DISABLE_NUMBA", None)
    if disable:
        env["BATCHDIST_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", action="store_true", help="print raw timings as JSON")
    args = p.parse_args(argv)
    fast, slow = run_backend(False, args.repeat), run_backend(True, args.repeat)
    if args.json:
        print(json.dumps({"numba": fast, "numpy": slow}, indent=2))
        return
    print(f"{'kernel':<22}{'numba':>14}{'numpy':>14}{'speed-up':>10}")
    for key in ("step_residual", "step_jacobian", "simulate_reference", "simulate_case2_1h"):
        a, b = fast[key], slow[key]
        print(f"{key:<22}{a * 1e3:>12.3f}ms{b * 1e3:>12.3f}ms{b / a:>9.1f}x")
    if fast["backend"] != "numba":
        print("note: numba unavailable, both columns used the numpy path")


if __name__ == "__main__":
    main()
