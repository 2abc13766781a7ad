"""Smoke test for the kuramoto_cl_py extension.

Build and place the module next to this file first:

    cargo build -p kuramoto-cl-py --release
    cp target/release/libkuramoto_cl_py.so python/kuramoto_cl_py.so
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import kuramoto_cl_py as kc  # noqa: E402


def main():
    assert kc.solve_c_linear(kc.LINEAR_THRESHOLD - 1e-9) is None
    assert abs(kc.solve_c_linear(kc.LINEAR_THRESHOLD) - math.pi / 4) < 1e-9
    c1 = kc.solve_c_linear(1.0)
    assert abs(c1 - 0.952) < 1e-3

    root = kc.solve_c_general(1.0, 1.0, 1.0)
    assert abs(root["c"] - c1) < 1e-10 and not root["multiple_roots"]

    stable = kc.StationaryProfile(k=1.0)
    cos_int, sin_int = stable.phasor_integrals()
    assert abs(cos_int - stable.c) < 1e-9 and abs(sin_int) < 1e-9
    assert stable.stationarity_residual() < 1e-9
    flipped = kc.StationaryProfile(k=1.0, family="flipped")
    assert flipped.family == "continuous_flipped"

    sys_ = kc.KmSystem({"n": 200, "k": 1.0, "freq_mode": "iid_uniform", "seed": 1})
    u0 = [0.0] * sys_.n
    times, states = sys_.integrate(u0, 50.0, {"sample_stride": 5.0})
    assert len(times) == 11 and len(states[-1]) == 200
    r, _ = kc.order_parameter(states[-1])
    assert abs(r - c1) < 0.03, r
    final = [states[-1][i] for i in sys_.xi]
    _, dist = stable.distance(final)
    assert dist < 0.1, dist

    obs = kc.simulate({"n": 500, "k": 1.5}, t_end=60.0)
    assert obs["locked"] and abs(obs["delta_u"] - kc.delta_u_prediction(1.5)) < 0.05, obs

    theta, d = kc.align_theta([x + 0.7 for x in final], final)
    assert abs(theta - 0.7) < 1e-8 and d < 1e-8
    assert kc.circle_l2(final, final) == 0.0

    with tempfile.TemporaryDirectory() as out:
        summary = kc.run_scenario("selfconsistency", {}, out)
        assert summary["passed"], summary
        assert os.path.exists(os.path.join(out, "selfconsistency.csv"))

    try:
        kc.KmSystem({"n": 10, "bogus": 1})
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
