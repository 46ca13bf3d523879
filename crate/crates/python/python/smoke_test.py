"""Smoke test for the slowproj extension module.

Build the library and put it on the import path as ``slowproj.so``:

    cargo build -p slowproj-python --release
    cp target/release/libslowproj_py.so crates/python/python/slowproj.so
    python3 crates/python/python/smoke_test.py
"""

import json
import math

import slowproj


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    shear = slowproj.System.shear2d(5.0, 1.0)
    assert shear.dim == 2 and shear.slow_count == 1
    assert shear.spectral_abscissa < 0

    x0 = [0.4, 1.2]
    for method, expected in [("dop", 0.6), ("orth", 0.4), ("riesz", 0.7)]:
        _, projected = shear.project(x0, method)
        assert close(projected[0].real, expected), (method, projected)

    p = shear.projector("dop")
    assert close(p[0][1].real, 1 / 6)

    xi = shear.minimizer(x0)
    e = shear.error(x0, xi)
    assert close(e.e_const, 0.164) and close(e.total, 0.074), e
    q = shear.quadrature_error(x0, xi)
    assert abs(q - e.total) <= 1e-6 * max(1.0, abs(e.total)), (q, e.total)

    times, full = shear.propagate([0.4, 1.2], t_end=10.0, samples=201)
    _, dop = shear.propagate_reduced([0.4, 1.2], "dop", t_end=10.0, samples=201)
    _, orth = shear.propagate_reduced([0.4, 1.2], "orth", t_end=10.0, samples=201)
    assert len(times) == 201 and len(full) == 201

    def l2(red):
        dt = times[1] - times[0]
        return math.sqrt(sum(
            sum(abs(a - b) ** 2 for a, b in zip(x, y)) for x, y in zip(full, red)
        ) * dt)

    assert l2(dop) < l2(orth)

    grad = slowproj.System.grad3(0.1, 1.0)
    assert grad.dim == 3 and grad.slow_count == 2
    assert len(grad.slow_orthogonal()) == 3

    try:
        slowproj.System.from_matrix([[1.0, 0.0], [0.0, -1.0]])
    except slowproj.SlowprojError:
        pass
    else:
        raise AssertionError("unstable system accepted")

    report = json.loads(slowproj.validate(seed=7, trials=2))
    assert report["passed"], report

    print("smoke test passed")


if __name__ == "__main__":
    main()
