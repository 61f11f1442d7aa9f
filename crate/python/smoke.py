"""Smoke test for the pyparasphere extension module."""

import math

import pyparasphere as ps


def main():
    e = ps.Expr("i*z1^2/2", 1)
    assert e.arity == 1
    p = ps.eval_point(e, [0.5 - 0.25j])
    x, y, f = p["imm"]
    assert math.isclose(f, x * x + y * y, abs_tol=1e-14), p
    assert abs(ps.volume(e, [0.5 - 0.25j]) - 4.0) < 1e-12

    cubic = ps.Expr("z1^3/6", 1)
    jet = cubic.jet([0.3 + 0.7j])
    assert abs(jet["third"][0][0][0] - 1) < 1e-15
    b = ps.metric_bundle(cubic, [0.3 + 0.7j])
    assert b["omega_xy"] == [[0.0, 2.0], [-2.0, 0.0]]
    assert max(ps.lemma_residuals(cubic, [0.3 + 0.7j])) < 1e-12

    report = ps.verify(cubic, [-1.0, 0.2], [1.0, 1.0], grid=[7])
    assert report["pass"], report
    assert report["n_points"] == 49

    mesh = ps.build_mesh(cubic, [-1.0, -1.0], [1.0, 1.0], grid=[5])
    assert mesh["dropped_cells"] == 8 and len(mesh["faces"]) == 16

    try:
        ps.volume(ps.Expr("z1^2/2", 1), [1j])
    except ps.DegenerateError:
        pass
    else:
        raise AssertionError("expected DegenerateError")

    try:
        ps.Expr("conj(z1)", 1)
    except ValueError as err:
        assert "holomorphic" in str(err)
    else:
        raise AssertionError("expected ValueError")

    print("smoke ok:", report["checks"][0]["name"], report["checks"][0]["max_residual"])


if __name__ == "__main__":
    main()
