#!/usr/bin/env python3
"""Writes the end-to-end certify fixtures under tests/fixtures."""
import json
import math
import os
import sys

K_B = 1.380649e-23


def write_series(path, unit, ts, vs):
    with open(path, "w") as f:
        f.write("# unit=%s\n" % unit)
        f.write("t,value\n")
        for t, v in zip(ts, vs):
            f.write("%.17g,%.17g\n" % (t, v))


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def grid(t0, t1, n):
    return [t0 + (t1 - t0) * i / (n - 1) for i in range(n)]


def case_b(root):
    # Capped power growth: Idot = (1 + 0.2 t)^4 under an envelope of 2 nat/s.
    d = os.path.join(root, "case_b")
    os.makedirs(d, exist_ok=True)
    ts = grid(1.0, 20.0, 400)
    write_series(os.path.join(d, "I.csv"), "nat", ts, [(1 + 0.2 * t) ** 5 - 1 for t in ts])
    write_series(os.path.join(d, "P_use.csv"), "W", ts, [1.0] * len(ts))
    write_series(os.path.join(d, "T.csv"), "K", ts, [300.0] * len(ts))
    write_json(os.path.join(d, "envelope_params.json"), {
        "sigma_eff": 2 * K_B * 300 * math.log(2),
        "eta_elec_range": [0.9, 1.0],
        "eta_use_range": [0.9, 1.0],
        "T_range": [290.0, 310.0],
        "cop_range": [2.0, 4.0],
        "P_max": 0.0,
    })
    write_json(os.path.join(d, "certify.json"), {
        "capability": {"I": "I.csv"},
        "phi": {"kind": "power", "p": 0.8, "c": 1.0, "floor": 1.0},
        "envelope": {"enabled": True, "params": "envelope_params.json", "P_use": "P_use.csv", "T": "T.csv"},
        "estimation": {"window": 3.0, "lag": "auto", "alpha": 0.05, "seed": 7},
        "certify": {"governance_delta": 0.1},
    })


def case_a(root):
    # Hyperbolic growth I = t / (1 - t), Idot = (1 + I)^2, with capital zeta = 2.
    d = os.path.join(root, "case_a")
    os.makedirs(d, exist_ok=True)
    ts = grid(0.8, 0.995, 400)
    write_series(os.path.join(d, "I.csv"), "nat", ts, [t / (1 - t) for t in ts])
    write_series(os.path.join(d, "Idot.csv"), "nat/s", ts, [(1 - t) ** -2 for t in ts])
    write_json(os.path.join(d, "certify.json"), {
        "capability": {"I": "I.csv"},
        "Idot": "Idot.csv",
        "phi": {"kind": "power", "p": 2.0, "c": 1.0, "floor": 1.0},
        "envelope": {"enabled": False},
        "estimation": {"window": 0.01, "lag": "auto", "alpha": 0.05, "seed": 7},
        "capital": {"K0": 1.0, "r": 1.0, "zeta": 2.0},
        "region": {"capped_power": False, "logistic_data": False, "baseline_effort_floor": False},
    })


def scenarios(root):
    d = os.path.join(root, "scenarios")
    os.makedirs(d, exist_ok=True)
    write_json(os.path.join(d, "powerlaw.json"),
               {"kind": "powerlaw", "I0": 1.0, "a0": 1.0, "p": 2.0, "horizon": 2.0, "threshold": 1e12})
    write_json(os.path.join(d, "discrete.json"), {"kind": "discrete", "I0": 1.0, "a": 1.0, "p": 2.0, "threshold": 1e12})
    write_json(os.path.join(d, "control.json"), {
        "plant": {"phi": {"kind": "power", "p": 2.0, "floor": 0.1}, "I0": 1.0, "phi_svc": [1.0], "u_ref": [1.0],
                  "steps": 400},
        "control": {"I_bar": 5.0, "kappa": 2.0, "Delta": 0.01, "u_box": [[0.0], [1.0]]},
    })
    write_json(os.path.join(d, "ingest.json"), {"series": [
        {"path": "../case_b/I.csv", "unit": "nat", "name": "I"},
        {"path": "../case_b/P_use.csv", "unit": "W"},
    ]})


def main():
    root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")
    case_a(root)
    case_b(root)
    scenarios(root)


if __name__ == "__main__":
    main()
