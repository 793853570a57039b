"""Smoke test for the freqid extension module.

Build with
    cargo build -p freqid-py --features extension-module --release
    cp target/release/libfreqid_py.so python/freqid.so
then run `python3 python/smoke_test.py`.
"""
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import freqid


def main():
    d = freqid.simulate_example("example1", 150, 10.0, 0)
    assert len(d) == 150 and d.axis == "discrete"

    k = freqid.Kernel("discrete", 0.9)
    mu0, mu1 = k.moments()
    assert mu0 > 0 and mu1 > 0
    assert abs(k(3.0, 5.0) - 0.9 ** 5) < 1e-12

    m = freqid.identify(d, k, 0.1, 1e-5, 314, omega_max=math.pi)
    t = [float(i) for i in range(100)]
    g = m.impulse_response(t)
    g0 = freqid.example_impulse_response("example1", t)
    f = freqid.fit(g, g0)
    sup, arg = m.hinf_grid_sup(math.pi, 3140)
    print(f"fit {f:.2f}%  sup|G| {sup:.6f} at {arg:.4f}  active {len(m.active_frequencies)}")
    assert f > 50.0
    assert sup < 1.01

    r = freqid.identify_ridge(d, k, 0.1)
    assert len(r.active_frequencies) == 0

    back = freqid.Model.from_json(m.to_json())
    assert back.coefficients == m.coefficients
    h = back.frequency_response([0.0, 1.0])
    assert isinstance(h[0], complex)

    try:
        freqid.Kernel("discrete", 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("decay 1.5 accepted")
    print("smoke test ok")


if __name__ == "__main__":
    main()
