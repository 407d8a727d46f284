import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from misp.assembly import assemble
from misp.femcore import material_derive
from misp.mesh import build_mesh, build_uniform_quadrilateral, build_uniform_triangular
from misp.solve import recover_fields, solve
from misp.verification.helmholtz import (
    HelmholtzError,
    curl_cr,
    helmholtz_witness,
    l2_piecewise_constant,
)
from misp.verification.infsup import InfSupError, infsup_estimate
from misp.verification.manufactured import ManufacturedSolutionError, manufactured_case
from misp.verification.norms import convergence_rate, error_norms
from oracles import manufactured_oracle


def _mat(t):
    return material_derive(1.0, 0.3, 5 / 6, t)


# ---------------------------------------------------------------------------
# manufactured solution, checked against an mpmath oracle built from the
# closed-form fields independently of the symbolic pipeline
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("t", ["1", "0.1", "0.001", "1e-8"])
def test_manufactured_against_oracle(t):
    case = manufactured_case(_mat(float(t)))
    orc = manufactured_oracle(t)
    rng = np.random.default_rng(4)
    for x, y in rng.uniform(0, 1, (5, 2)):
        X, Y = mpmath.mpf(x), mpmath.mpf(y)
        assert math.isclose(case.load(x, y), float(orc["load"](X, Y)), rel_tol=1e-9)
        assert np.allclose(case.beta(x, y), [float(orc["b1"](X, Y)), float(orc["b2"](X, Y))],
                           rtol=1e-12, atol=1e-15)
        assert math.isclose(case.w(x, y), float(orc["w"](X, Y)), rel_tol=1e-12, abs_tol=1e-16)


def test_oracle_strong_residual_at_reference_point():
    res, scale = manufactured_oracle("0.1")["residual_a"](mpmath.mpf("0.37"), mpmath.mpf("0.61"))
    for r, s in zip(res, scale):
        assert abs(r) <= mpmath.mpf("1e-8") * s
    case = manufactured_case(_mat(0.1))
    ra, sa, rb, sb = case.strong_residuals(np.array([0.37]), np.array([0.61]))
    assert np.all(np.abs(ra) <= 1e-8 * sa)
    assert np.all(np.abs(rb) <= 1e-8 * sb)


def test_clamped_traces():
    case = manufactured_case(_mat(0.01))
    s = np.linspace(0, 1, 25)
    z, o = np.zeros_like(s), np.ones_like(s)
    for x, y in ((s, z), (s, o), (z, s), (o, s)):
        assert np.abs(case.w(x, y)).max() <= 1e-14
        assert np.abs(case.beta(x, y)).max() <= 1e-14


def test_quoted_load_agrees():
    case = manufactured_case(_mat(0.001))
    pts = np.random.default_rng(0).uniform(0, 1, (100, 2))
    g, q = case.load(pts[:, 0], pts[:, 1]), case.quoted_load(pts[:, 0], pts[:, 1])
    # identical as polynomials; the float gap is evaluation round-off
    assert np.max(np.abs(g - q)) <= 1e-11 * np.max(np.abs(g))
    import sympy
    assert sympy.expand(case.symbolic["g"] - case.symbolic["g_quoted"]) == 0


def test_residual_failure_is_reported(monkeypatch):
    case = manufactured_case(_mat(0.1))
    sym = dict(case.symbolic)
    sym["g"] = sym["g"] + 1
    from misp.verification import manufactured as mod
    monkeypatch.setattr(mod, "_exprs", lambda material: sym)
    with pytest.raises(ManufacturedSolutionError, match="residual"):
        mod.manufactured_case(_mat(0.1))


# ---------------------------------------------------------------------------
# norms and rates
# ---------------------------------------------------------------------------


def test_rate_examples():
    rate = convergence_rate([0.2834, 0.1679, 0.0877, 0.0443, 0.0222])
    assert math.isclose(rate, math.log2(0.2834 / 0.0222) / 4)
    assert abs(rate - 0.9182) <= 0.001
    assert convergence_rate([0.5, 0.5, 0.5]) == 0.0
    assert math.isclose(convergence_rate([1.0, 0.5, 0.25, 0.125]), 1.0)
    with pytest.raises(ValueError):
        convergence_rate([1.0])
    with pytest.raises(ValueError):
        convergence_rate([1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(e0=st.floats(1e-6, 1e3), r=st.floats(-3, 3), k=st.integers(2, 8))
def test_property_rate_of_geometric_sequence(e0, r, k):
    seq = [e0 * 2.0 ** (-r * i) for i in range(k)]
    assert math.isclose(convergence_rate(seq), r, abs_tol=1e-9)


def _row(kind, n, t, degree=None):
    mat = _mat(t)
    case = manufactured_case(mat)
    glob = assemble(build_mesh(kind, n), mat, case.load)
    return error_norms(recover_fields(solve(glob), glob), case, degree)


def test_published_cells():
    assert abs(_row("uniform-tri", 16, 0.1).err_M_l2 - 0.0015) <= 5e-5
    assert abs(_row("uniform-quad", 8, 1.0).err_beta_h1 - 0.0383) <= 0.05 * 0.0383


def test_norms_nonnegative_and_weighted():
    row = _row("uniform-quad", 4, 0.1)
    vals = [row.err_w_h1, row.err_beta_h1, row.err_M_l2, row.err_gamma_l2, row.err_gamma_weighted]
    assert all(v > 0 for v in vals)
    assert row.h == 0.25
    assert math.isclose(row.err_gamma_weighted, (0.1 + math.sqrt(2) / 4) * row.err_gamma_l2)


def test_error_degree_override_converges():
    a = _row("uniform-tri", 4, 1.0, degree=10)
    b = _row("uniform-tri", 4, 1.0, degree=16)
    assert math.isclose(a.err_w_h1, b.err_w_h1, rel_tol=1e-6)
    # the default triangle rule is the 3-point interior rule
    c = _row("uniform-tri", 4, 1.0)
    assert abs(c.err_w_h1 - a.err_w_h1) > 1e-3


# ---------------------------------------------------------------------------
# Helmholtz witness
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [4, 8])
def test_helmholtz_random(n):
    mesh = build_uniform_triangular(n)
    rng = np.random.default_rng(n)
    for _ in range(10):
        wit = helmholtz_witness(mesh, rng.standard_normal((mesh.num_elements, 9)))
        assert wit.residual <= 1e-10
        assert abs(wit.mean_q) <= 1e-12
        assert np.all(wit.s[mesh.boundary_nodes] == 0)


def test_helmholtz_constant_tensor():
    mesh = build_uniform_triangular(4)
    m = np.tile([1.0, 2.0, -0.5], (mesh.num_elements, 3))
    wit = helmholtz_witness(mesh, m)
    assert wit.residual == 0.0
    assert np.all(wit.s == 0) and np.all(wit.q == 0)


def test_helmholtz_pure_gradient():
    mesh = build_uniform_triangular(4)
    hat = np.zeros(mesh.num_nodes)
    node = mesh.interior_nodes()[4]
    hat[node] = 1.0
    xy = mesh.element_coords()
    # grad of the hat on each element, then Q = diag(g1 x, g2 y) has div Q = g
    T = np.stack([xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]], -1)
    dv = np.stack([hat[mesh.elements[:, 1]] - hat[mesh.elements[:, 0]],
                   hat[mesh.elements[:, 2]] - hat[mesh.elements[:, 0]]], -1)
    g = np.linalg.solve(np.swapaxes(T, 1, 2), dv[..., None])[..., 0]
    m = np.zeros((mesh.num_elements, 3, 3))
    m[:, :, 0] = g[:, None, 0] * xy[..., 0]
    m[:, :, 1] = g[:, None, 1] * xy[..., 1]
    wit = helmholtz_witness(mesh, m.reshape(mesh.num_elements, 9))
    assert wit.residual <= 1e-12
    assert np.allclose(wit.q, 0.0, atol=1e-12)
    assert np.allclose(wit.s, hat, atol=1e-12)


def test_helmholtz_curl_component():
    mesh = build_uniform_triangular(4)
    q = np.random.default_rng(1).standard_normal(mesh.num_edges)
    c = curl_cr(mesh, q)
    assert l2_piecewise_constant(mesh, c) > 0
    # a Q_h with div Q_h = curl_h q is recovered with q up to its mean
    xy = mesh.element_coords()
    m = np.zeros((mesh.num_elements, 3, 3))
    m[:, :, 0] = c[:, None, 0] * xy[..., 0]
    m[:, :, 1] = c[:, None, 1] * xy[..., 1]
    wit = helmholtz_witness(mesh, m.reshape(mesh.num_elements, 9))
    assert wit.residual <= 1e-10
    assert np.allclose(curl_cr(mesh, wit.q), c, atol=1e-10)


def test_helmholtz_rejects_quads():
    with pytest.raises(ValueError):
        helmholtz_witness(build_uniform_quadrilateral(2), np.zeros((4, 12)))


def test_helmholtz_error_type():
    assert issubclass(HelmholtzError, RuntimeError)


# ---------------------------------------------------------------------------
# inf-sup probe
# ---------------------------------------------------------------------------


def test_infsup_positive_small():
    rep = infsup_estimate(build_uniform_quadrilateral(2), _mat(1.0), "misp4")
    assert rep.beta > 0
    assert rep.num_free == 3


def test_infsup_uniform_in_n_thin():
    betas = [infsup_estimate(build_uniform_quadrilateral(n), _mat(1e-4)).beta for n in (2, 4, 8)]
    assert max(betas) / min(betas) <= 2


def test_infsup_no_free_dofs():
    with pytest.raises(InfSupError):
        infsup_estimate(build_uniform_triangular(1), _mat(1.0))
