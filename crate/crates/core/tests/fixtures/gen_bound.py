"""High-precision evaluation of the finite-sample probability and error bounds
on random parameter sets. Writes bound_cases.json next to this script."""
import json
import os
import random

import mpmath as mp

mp.mp.dps = 50


def bound(p):
    k = mp.mpf((p["t_max"] - 1) // p["ell"])
    ee = mp.mpf(p["epsilon_e"])
    eps = mp.mpf(p["epsilon"])
    union = 3 * p["n_states"] ** 2 * p["n_actions"]
    tail = mp.exp(-(ee**2 / 4) * k) + mp.exp(-(eps**2 * ee**2 / (8 * p["ell"])) * k)
    prob = min(max(1 - union * tail, mp.mpf(0)), mp.mpf(1))
    g = mp.mpf(p["gamma"])
    b = mp.mpf(p["b"])
    err = (
        g ** p["n"] * mp.mpf(p["v0_gap"])
        + mp.mpf(p["c_max"]) * eps / (b * (1 - g) ** 2)
        + (mp.mpf(p["epsilon_theta"]) / b + mp.mpf(p["epsilon_v"])) / (1 - g)
    )
    return float(prob), float(err)


def draw(rng):
    gamma = rng.uniform(0.05, 0.95)
    c_max = rng.uniform(0.1, 5.0)
    ell = rng.randint(1, 8)
    return {
        "n_states": rng.randint(1, 5),
        "n_actions": rng.randint(1, 5),
        "epsilon_e": rng.uniform(0.05, 0.95),
        "ell": ell,
        "t_max": int(10 ** rng.uniform(3, 7)),
        "epsilon": rng.uniform(0.01, 1.0),
        "b": rng.uniform(0.01, 0.95),
        "epsilon_theta": rng.uniform(0.0, 0.1),
        "epsilon_v": rng.uniform(0.0, 0.1),
        "gamma": gamma,
        "c_max": c_max,
        "n": rng.randint(0, 50),
        "v0_gap": rng.uniform(0.0, c_max / (1 - gamma)),
    }


def main():
    rng = random.Random(20240611)
    interior, other = [], []
    while len(interior) < 10 or len(other) < 10:
        p = draw(rng)
        prob, err = bound(p)
        case = {"params": p, "prob_lower_bound": prob, "error_upper_bound": err}
        if 0.0 < prob < 1.0 and len(interior) < 10:
            interior.append(case)
        elif not (0.0 < prob < 1.0) and len(other) < 10:
            other.append(case)
    reference = {
        "n_states": 4, "n_actions": 4, "epsilon_e": 0.2, "ell": 4, "t_max": 10000, "epsilon": 0.1,
        "b": 0.05, "epsilon_theta": 0.01, "epsilon_v": 0.01, "gamma": 0.3, "c_max": 1.0, "n": 20,
        "v0_gap": 10.0 / 7.0,
    }
    prob, err = bound(reference)
    ref_case = {"params": reference, "prob_lower_bound": prob, "error_upper_bound": err}
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "bound_cases.json")
    with open(path, "w") as f:
        json.dump({"cases": interior + other, "reference": ref_case}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
