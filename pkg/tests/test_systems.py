import math

import numpy as np
import pytest

from shadowkit.seqcore import (
    Window, SeqVec, norm, op_apply, identity_op, PreconditionError,
    TruncationError,
)
from shadowkit.systems import (
    DiffeoSystem, MSMapParams, s_remainder, make_weighted_shift,
    make_ms_product, make_linear_example_seq, linear_example_cert,
    conjugate, make_sin_wobble, make_system,
    LinearShiftFamily, TanhShiftFamily, SinPerturbedFamily,
    sample_interior_points, _MSProfile,
)

W = Window(-16, 16)


def shift_linear():
    return make_system("weighted_shift_linear", W)


def shift_tanh():
    return make_system("weighted_shift_tanh", W)


# --------------------------------------------------------------- oracles
# Slope ranges of the tanh family, computed straight from the formulas
# (independently of the family class) and frozen before anything else.

def test_tanh_slope_grid_oracle():
    xs = np.linspace(-10, 10, 2001)
    dneg = 2.0 + 0.1 / np.cosh(xs) ** 2
    dpos = 0.45 + 0.04 / np.cosh(xs) ** 2
    assert dneg.min() > 2.0 and dneg.max() <= 2.1
    assert dpos.min() > 0.45 and dpos.max() <= 0.49
    # and they fit the declared constants lam = 1/2, R = 5/2
    assert 1 / 0.5 <= dneg.min() and dneg.max() <= 2.5
    assert 1 / 2.5 <= dpos.min() and dpos.max() <= 0.5
    fam = TanhShiftFamily()
    ks = np.where(xs < 0, -1, 3)  # either branch, spot-check agreement
    got = fam.deriv(ks, xs)
    expect = np.where(ks < 0, 2.0 + 0.1 / np.cosh(xs) ** 2,
                      0.45 + 0.04 / np.cosh(xs) ** 2)
    assert np.max(np.abs(got - expect)) == 0.0


def test_linear_family_attains_closed_ends():
    # slopes 2 and 1/2 sit exactly on the interval ends; the validator
    # must accept them
    make_weighted_shift(LinearShiftFamily(), 0.5, 2.0, W)


def test_validator_rejects_bad_slopes():
    with pytest.raises(PreconditionError):
        make_weighted_shift(LinearShiftFamily(neg_slope=1.5), 0.5, 2.0, W)
    with pytest.raises(PreconditionError):
        make_weighted_shift(LinearShiftFamily(pos_slope=0.7), 0.5, 2.0, W)


# ----------------------------------------------------------- weighted shift

def test_shift_forward_inverse_round_trip():
    sys = shift_tanh()
    for x in sample_interior_points(sys, 10, seed=4):
        y = sys.forward(x)
        back = sys.inverse(y)
        assert norm(SeqVec(W, back.coeffs - x.coeffs, x.p)) <= 1e-10 * (1 + norm(x))


def test_shift_fixes_origin():
    for sys in (shift_linear(), shift_tanh()):
        z = SeqVec.zero(W)
        assert norm(sys.forward(z)) == 0.0


def test_shift_forward_moves_support():
    sys = shift_linear()
    x = SeqVec.basis(W, 3)
    y = sys.forward(x)
    assert y[4] == 0.5 and abs(norm(y) - 0.5) < 1e-15
    x = SeqVec.basis(W, -3)
    y = sys.forward(x)
    assert y[-2] == 2.0


def test_shift_truncation_guard():
    sys = shift_linear()
    with pytest.raises(TruncationError):
        sys.forward(SeqVec.basis(W, W.hi))
    with pytest.raises(TruncationError):
        sys.inverse(SeqVec.basis(W, W.lo))


def test_shift_dforward_matches_finite_differences():
    sys = shift_tanh()
    rng = np.random.default_rng(7)
    for x in sample_interior_points(sys, 5, seed=11):
        A = sys.dforward(x)
        h = 1e-5
        v = np.zeros(W.length)
        v[3:-3] = rng.standard_normal(W.length - 6)
        v /= np.linalg.norm(v)
        plus = sys.forward(SeqVec(W, x.coeffs + h * v, x.p))
        minus = sys.forward(SeqVec(W, x.coeffs - h * v, x.p))
        fd = (plus.coeffs - minus.coeffs) / (2 * h)
        lin = op_apply(A, SeqVec(W, v, x.p), check_loss=False)
        assert np.max(np.abs(fd - lin.coeffs)) <= 1e-4 * sys.R


def test_shift_dinverse_is_inverse_of_dforward():
    sys = shift_tanh()
    x = sample_interior_points(sys, 1, seed=3)[0]
    y = sys.forward(x)
    A = sys.dforward(x)
    B = sys.dinverse(y)
    v = SeqVec(W, np.r_[np.zeros(3), np.ones(W.length - 6), np.zeros(3)], x.p)
    round_ = op_apply(B, op_apply(A, v))
    # the round trip loses only the guarded boundary coordinate
    assert np.max(np.abs(round_.coeffs[3:-3] - v.coeffs[3:-3])) <= 1e-12


def test_s_remainder_zero_perturbation_and_linear_exactness():
    lin = shift_linear()
    tanh = shift_tanh()
    x = sample_interior_points(tanh, 1, seed=5)[0]
    z = SeqVec.zero(W)
    assert norm(s_remainder(tanh, x, z)) == 0.0
    v = sample_interior_points(tanh, 1, seed=6)[0]
    assert norm(s_remainder(lin, x, v)) <= 1e-14


def test_s_remainder_quadratic_bound_tanh():
    sys = shift_tanh()
    M = sys.meta["d2_bound"]
    rng = np.random.default_rng(8)
    for x in sample_interior_points(sys, 20, seed=9):
        scale = rng.choice([1e-3, 1e-2, 0.1, 0.5])
        c = np.zeros(W.length)
        c[4:-4] = rng.standard_normal(W.length - 8)
        v = SeqVec(W, c / np.linalg.norm(c) * scale, x.p)
        rem = s_remainder(sys, x, v)
        nv = norm(v)
        assert norm(rem) <= M * nv ** 2 * (1 + 1e-8)
        # which is the modulus bound |s| <= |v| r(|v|)
        assert norm(rem) <= nv * sys.modulus(nv) * (1 + 1e-8)


def test_s_remainder_difference_lipschitz():
    # |s(x,v1) - s(x,v2)| <= eps |v1 - v2| once both v's are small enough
    sys = shift_tanh()
    M = sys.meta["d2_bound"]
    eps = 1e-3
    d = eps / M  # linear modulus inverts in closed form
    rng = np.random.default_rng(10)
    x = sample_interior_points(sys, 1, seed=12)[0]
    for _ in range(20):
        c1, c2 = np.zeros(W.length), np.zeros(W.length)
        c1[4:-4] = rng.standard_normal(W.length - 8)
        c2[4:-4] = rng.standard_normal(W.length - 8)
        v1 = SeqVec(W, c1 / np.linalg.norm(c1) * d * 0.9, x.p)
        v2 = SeqVec(W, c2 / np.linalg.norm(c2) * d * 0.9, x.p)
        s1, s2 = s_remainder(sys, x, v1), s_remainder(sys, x, v2)
        dv = norm(SeqVec(W, v1.coeffs - v2.coeffs, x.p))
        ds = norm(SeqVec(W, s1.coeffs - s2.coeffs, x.p))
        assert ds <= 2 * eps * dv + 1e-15


# ------------------------------------------------------------- MS product

def test_ms_profile_fixed_points_and_multipliers():
    prof = _MSProfile(0.5)
    assert abs(prof.value(np.array([1.0]))[0] - 1.0) <= 5e-15
    assert abs(prof.value(np.array([-1.0]))[0] + 1.0) <= 5e-15
    assert prof.value(np.array([0.0]))[0] == 0.0
    assert abs(prof.deriv(np.array([0.0]))[0] - 2.0) <= 1e-13
    assert abs(prof.deriv(np.array([1.0]))[0] - 0.5) <= 1e-13
    assert abs(prof.deriv(np.array([-1.0]))[0] - 0.5) <= 1e-13


def test_ms_profile_integral_oracle():
    # independent quadrature: integral of a' over [0,1] must be 1, which
    # is what pins the exponent s
    prof = _MSProfile(0.5)
    xs = np.linspace(0.0, 1.0, 200001)
    val = np.trapezoid(prof.deriv(xs), xs)
    assert abs(val - 1.0) <= 1e-9


def test_ms_profile_slope_range_and_alip():
    prof = _MSProfile(0.5)
    xs = np.linspace(-6, 6, 5001)
    d = prof.deriv(xs)
    assert d.min() >= 0.5 - 1e-14 and d.max() <= 2.0 + 1e-14
    nz = xs[np.abs(xs) > 1e-9]
    vals = prof.value(nz)
    assert np.all(np.abs(vals) < np.abs(nz) / 0.5)
    inv = prof.inverse(nz)
    assert np.all(np.abs(inv) < np.abs(nz) / 0.5)


def test_ms_profile_inverse_accuracy():
    prof = _MSProfile(0.5)
    ys = np.linspace(-3, 3, 1001)
    xs = prof.inverse(ys)
    assert np.max(np.abs(prof.value(xs) - ys)) <= 1e-13


def test_ms_basin_iteration_converges_to_one():
    sys = make_system("ms_product", W)
    x = SeqVec(W, np.full(W.length, 0.9), 2.0)
    for _ in range(80):
        x = sys.forward(x)
    assert np.max(np.abs(x.coeffs - 1.0)) <= 1e-8


def test_ms_fixed_points_with_pattern_coordinates():
    sys = make_system("ms_product", W)
    c = np.zeros(W.length)
    c[5] = 1.0
    c[10] = -1.0
    x = SeqVec(W, c, 2.0)
    fx = sys.forward(x)
    assert np.max(np.abs(fx.coeffs - c)) <= 5e-15


def test_ms_unstable_fixed_point_multiplier():
    sys = make_system("ms_product", W)
    z = SeqVec.zero(W)
    A = sys.dforward(z)
    assert A.kind == "diag"
    assert np.max(np.abs(A.scalars - 2.0)) <= 1e-13


def test_ms_declared_m_bound_checked():
    with pytest.raises(PreconditionError):
        make_ms_product(MSMapParams(M=1.0), W)


def test_ms_constant_measurement_recorded():
    sys = make_system("ms_product", W)
    info = sys.cert.meta
    assert info["n0"] >= 1
    assert sys.cert.C >= info["C_emp"] >= 1.0
    assert info["C_formula_n0"] == (1 / 0.5) ** info["n0"]
    # the certificate constant should comfortably round up the measurement
    assert sys.cert.C <= 2 * info["C_formula_n0"]


# ----------------------------------------------- linear no-dichotomy sequence

def test_linear_example_ops():
    seq = make_linear_example_seq(W, range(-5, 6))
    A0 = seq.op_at(0)
    assert op_apply(A0, SeqVec.basis(W, 0)).coeffs[W.offset(0)] == 0.5
    assert op_apply(A0, SeqVec.basis(W, 1)).coeffs[W.offset(1)] == 2.0
    inv = A0.inverse()
    assert inv.scalars[W.offset(0)] == 2.0
    assert inv.scalars[W.offset(1)] == 0.5


def test_linear_example_cert_projections():
    cert = linear_example_cert(W)
    pair = cert.proj_at(2)
    pair.validate()
    assert op_apply(pair.P, SeqVec.basis(W, 2)).coeffs[W.offset(2)] == 1.0
    assert norm(op_apply(pair.P, SeqVec.basis(W, 3))) == 0.0


# ------------------------------------------------------------- conjugation

def test_conjugate_by_identity_is_f():
    base = shift_linear()
    ident = DiffeoSystem(
        "id", W, 2.0,
        lambda x: x, lambda x: x,
        lambda x: identity_op(W), lambda x: identity_op(W),
        1.0, lambda t: 0.0)
    g = conjugate(base, ident)
    for x in sample_interior_points(base, 5, seed=13):
        assert np.max(np.abs(g.forward(x).coeffs - base.forward(x).coeffs)) == 0.0


def test_conjugation_intertwines():
    base = shift_tanh()
    h = make_sin_wobble(W)
    g = conjugate(base, h)
    for x in sample_interior_points(base, 50, seed=14):
        lhs = g.forward(h.forward(x))
        rhs = h.forward(base.forward(x))
        assert norm(SeqVec(W, lhs.coeffs - rhs.coeffs, x.p)) <= 1e-10


def test_conjugate_transports_certificate_constants():
    base = shift_linear()
    h = make_sin_wobble(W)
    g = conjugate(base, h)
    R1 = h.R
    assert g.cert is not None
    assert g.cert.C == pytest.approx(R1 ** 2 * base.cert.C)
    assert g.cert.lam == base.cert.lam
    pair = g.cert.proj_at(sample_interior_points(base, 1, seed=15)[0])
    pair.validate()


def test_sin_wobble_inverse():
    h = make_sin_wobble(W)
    rng = np.random.default_rng(16)
    x = SeqVec(W, rng.standard_normal(W.length), 2.0)
    back = h.inverse(h.forward(x))
    assert np.max(np.abs(back.coeffs - x.coeffs)) <= 1e-12


def test_make_system_registry():
    sys = make_system("conjugated:weighted_shift_linear", W)
    assert sys.name == "conjugated:weighted_shift_linear"
    assert sys.cert is not None
    seq, cert = make_system("linear_no_ed", W)
    assert seq.op_at(0).kind == "diag"
    with pytest.raises(PreconditionError):
        make_system("no_such_system", W)
