#!/usr/bin/env python3
"""Smoke test for the spirp_py extension module.

Builds the cdylib with cargo, loads it straight from the target directory,
and exercises the bound surface: generation, parsing, both solver variants,
validation, determinism, and the exact reference solve on a tiny instance.
"""

import importlib.machinery
import importlib.util
import json
import pathlib
import subprocess

ROOT = pathlib.Path(__file__).resolve().parents[1]

TINY_INSTANCE = {
    "name": "tiny-2n-2t",
    "n": 2,
    "tau": 2,
    "capacity": 550.0,
    "traveling_cost": 0.24,
    "vehicle_cost": 90.0,
    "holding_cost": 0.02,
    "purchase_cost": 2.5,
    "requirements": [420.0, 380.0],
    "accumulation": [[200.0, 180.0], [150.0, 160.0]],
    "distances": [
        [0.0, 4.0, 5.0],
        [4.0, 0.0, 3.0],
        [5.0, 3.0, 0.0],
    ],
}


def load_module():
    subprocess.run(["cargo", "build", "-p", "spirp-py"], cwd=ROOT, check=True)
    so = ROOT / "target" / "debug" / "libspirp_py.so"
    loader = importlib.machinery.ExtensionFileLoader("spirp_py", str(so))
    spec = importlib.util.spec_from_loader("spirp_py", loader)
    module = importlib.util.module_from_spec(spec)
    loader.exec_module(module)
    return module


def main():
    spirp = load_module()

    inst = spirp.Instance.generate("benchmark2", price=2.5, seed=7, n=4, r=270.0)
    assert inst.n == 4 and inst.tau == 7, repr(inst)
    assert spirp.Instance.parse(inst.to_json()).name == inst.name

    mh = spirp.solve(inst, variant="mh", time_limit=10.0)
    plus = spirp.solve(inst, variant="mh+", time_limit=10.0)
    assert plus.z <= mh.z + 1e-9, (plus.z, mh.z)
    assert plus.lower_bound <= plus.z + 1e-6, (plus.lower_bound, plus.z)
    assert spirp.validate(inst, plus.solution_json) == []

    again = spirp.solve(inst, variant="mh+", time_limit=10.0)
    assert again.report_json == plus.report_json, "reports must be byte-identical"

    corrupted = json.loads(plus.solution_json)
    corrupted["cost"]["total"] += 7.0
    problems = spirp.validate(inst, json.dumps(corrupted))
    assert any("cost mismatch" in p for p in problems), problems

    tiny = spirp.Instance.parse(json.dumps(TINY_INSTANCE))
    exact = spirp.solve_exact(tiny, time_limit=120.0)
    heur = spirp.solve(tiny, variant="mh+", time_limit=10.0)
    assert heur.lower_bound <= exact + 1e-6 <= heur.z + 2e-6, (
        heur.lower_bound,
        exact,
        heur.z,
    )

    print("smoke test passed:")
    print(f"  {inst.name}: mh z={mh.z:.2f}, mh+ z={plus.z:.2f}, gap={plus.gap:.2f}%")
    print(f"  {tiny.name}: exact={exact:.2f} in [{heur.lower_bound:.2f}, {heur.z:.2f}]")


if __name__ == "__main__":
    main()
