"""Builds the toa_sim extension with cargo and exercises it briefly.

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build_module():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "toa-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "libtoa_sim.so")
    dest = tempfile.mkdtemp(prefix="toa_sim_")
    shutil.copy(lib, os.path.join(dest, "toa_sim.so"))
    sys.path.insert(0, dest)


def main():
    build_module()
    import toa_sim

    g = toa_sim.CESIUM_GAMMA
    laser = toa_sim.AtomLaser(5 * g, 5e-6)
    a_an = laser.absorption(100.0, backend="analytic")
    a_tm = laser.absorption(100.0, backend="transfer", slices=1)
    assert 0.0 <= a_an <= 1.0, a_an
    assert abs(a_an - a_tm) < 1e-8, (a_an, a_tm)

    r1, r2, t1, t2 = laser.amplitudes(100.0)
    assert abs(r1) ** 2 + abs(t1) ** 2 + a_an <= 1.0 + 1e-12

    tc = toa_sim.critical_temperature(5e-6)
    assert abs(tc - 4.43) < 0.01, tc

    report = laser.classify(166.2, 1e-6)
    assert report["driving"] == "strong"

    try:
        toa_sim.AtomLaser(5 * g, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative beam width accepted")

    v = 166.2
    packet = toa_sim.Packet([(v, 1e-6, -12e-6, 0.0)])
    assert abs(packet.norm() - 1.0) < 1e-12
    t, pi, survival = packet.first_photon_density(
        toa_sim.AtomLaser(104.43e6, 5e-6), 0.0, 25e-6 / v + 20 / g, 801
    )
    dt = t[1] - t[0]
    total = dt * (sum(pi) - 0.5 * (pi[0] + pi[-1]))
    assert abs(total + survival[-1] - 1.0) < 1e-3, (total, survival[-1])

    d = toa_sim.distributions(
        text="omega = 0\ncomponent = 100, 1e-6, -2e-5, 0\n",
        overrides=["t_min=0", "t_max=4e-7", "n_t=401"],
    )
    assert max(d["Pi"]) == 0.0
    dt = d["t"][1] - d["t"][0]
    flux = dt * sum(d["J"])
    assert abs(flux - 1.0) < 1e-3, flux
    assert all(math.isfinite(x) for x in d["Pi_K"])

    print("python smoke test passed")


if __name__ == "__main__":
    main()
