import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qwrng.core import InitialState, make_initial_state
from qwrng.engines import DensityOperator, Family, WalkSpec, apply_bitflip_channel, evolve, evolve_density
from qwrng.randomness import (
    PositionDistribution,
    analytic_step1_randomness,
    analytic_step2_randomness,
    coin_distribution,
    intrinsic_randomness,
    joint_randomness,
    min_entropy,
    position_distribution,
    quantum_randomness,
    randomness_report,
    von_neumann_entropy,
)

LN2 = math.log(2)
angle = st.floats(-np.pi, np.pi, allow_nan=False)
GRID = [k * np.pi / 8 for k in range(5)]


def test_entropy_examples():
    assert intrinsic_randomness([1.0]) == 0.0
    assert intrinsic_randomness([0.25] * 4) == pytest.approx(math.log(4), abs=1e-15)
    assert intrinsic_randomness([0.25, 0.5, 0.25]) == pytest.approx(1.5 * LN2, abs=1e-15)


def test_entropy_zero_entries_no_nan():
    assert intrinsic_randomness([0.0, 1.0, 0.0]) == 0.0
    assert intrinsic_randomness([0.5, 0.0, 0.5]) == pytest.approx(LN2)


@pytest.mark.parametrize("bad", [[0.5, 0.4], [1.2, -0.2], [float("nan"), 1.0], []])
def test_entropy_rejects_invalid(bad):
    with pytest.raises(ValueError):
        intrinsic_randomness(bad)


def test_coin_distribution_examples():
    assert coin_distribution(make_initial_state(InitialState(np.pi / 4, 0))) == pytest.approx((0.5, 0.5))
    for theta in (0.0, 0.4, 1.3):
        s = evolve(WalkSpec(theta=theta, steps=1))
        assert coin_distribution(s) == pytest.approx((np.cos(theta) ** 2, np.sin(theta) ** 2), abs=1e-15)
    rho = apply_bitflip_channel(DensityOperator.from_state(make_initial_state(InitialState())), 0.5)
    assert coin_distribution(rho) == pytest.approx((0.5, 0.5))


def test_position_distribution_examples():
    d0 = position_distribution(make_initial_state(InitialState(0.6, 0.2)))
    assert d0.offset_min == 0 and list(d0.probs) == pytest.approx([1.0])
    assert intrinsic_randomness(d0) == 0.0

    d2 = position_distribution(evolve(WalkSpec(steps=2)))
    assert d2.prob(-2) == pytest.approx(0.25) and d2.prob(0) == pytest.approx(0.5)
    assert d2.prob(2) == pytest.approx(0.25) and d2.prob(1) == 0.0

    s1 = evolve(WalkSpec(theta=0.3, init=InitialState(0.5, 1.0), steps=1))
    d1 = position_distribution(s1)
    assert (d1.prob(-1), d1.prob(1)) == pytest.approx(coin_distribution(s1), abs=1e-15)


def test_position_distribution_validates():
    with pytest.raises(ValueError):
        PositionDistribution(0, np.array([0.5, 0.6]))
    d = PositionDistribution(0, np.array([-1e-15, 1.0]))
    assert d.probs[0] == 0.0


def test_joint_examples():
    assert joint_randomness(make_initial_state(InitialState(np.pi / 4, 0))) == pytest.approx(LN2)
    s = evolve(WalkSpec(theta=0.9, init=InitialState(0.3, 0.4), steps=1))
    assert joint_randomness(s) == pytest.approx(intrinsic_randomness(coin_distribution(s)), abs=1e-15)


def test_von_neumann_examples():
    assert von_neumann_entropy(DensityOperator.from_state(evolve(WalkSpec(steps=6)))) == 0.0
    assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(LN2, abs=1e-15)
    with pytest.raises(ValueError):
        von_neumann_entropy(np.diag([1.1, -0.1]))


def test_von_neumann_against_high_precision():
    rho = evolve_density(WalkSpec(steps=10, noise_p=0.1))
    e = von_neumann_entropy(rho)
    assert 0 < e < math.log(rho.dim)
    assert von_neumann_entropy(evolve_density(WalkSpec(steps=10, noise_p=0.1))) == e
    mpmath.mp.dps = 30
    m = mpmath.matrix(rho.matrix.tolist())
    ev = mpmath.eighe(m, eigvals_only=True)
    ref = -sum(l * mpmath.log(l) for l in ev if l > mpmath.mpf("1e-25"))
    assert abs(e - float(ref)) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 100), st.integers(0, 2**31))
def test_von_neumann_pure_is_zero(dim, seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    assert von_neumann_entropy(np.outer(psi, psi.conj())) <= 1e-10


def test_quantum_randomness():
    assert quantum_randomness(1.3, 0.0) == 1.3
    assert quantum_randomness(0.7, 0.7) == 0.0
    assert quantum_randomness(0.2, 0.5) == pytest.approx(-0.3)


def test_min_entropy_examples():
    assert min_entropy([1 / 16] * 16) == (4.0, 1 / 16)
    assert min_entropy([0.5, 0.25, 0.25]) == (1.0, 0.5)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40).filter(lambda v: sum(v) > 1e-6))
def test_min_entropy_bounds(weights):
    p = np.array(weights) / sum(weights)
    h, g = min_entropy(p)
    assert abs(2.0 ** -h - g) <= 1e-15 * g
    assert h <= intrinsic_randomness(p) / LN2 + 1e-12


def test_report_noiseless_qr_equals_joint():
    s = evolve(WalkSpec(steps=12, init=InitialState(0.2, 0.0)))
    rep = randomness_report(s)
    assert rep.e_vn == 0.0 and rep.qr == rep.r_joint and rep.qr_target == "joint"
    rho_rep = randomness_report(evolve_density(WalkSpec(steps=12, init=InitialState(0.2, 0.0))))
    assert rho_rep.e_vn == 0.0 and rho_rep.qr == rho_rep.r_joint
    assert rho_rep.flags == ()
    assert rep.p_guess == 2.0 ** -rep.h_min_bits


def test_report_noisy_flags():
    rep = randomness_report(evolve_density(WalkSpec(steps=20, noise_p=0.4)), target="position", noise_p=0.4)
    assert rep.e_vn > 0 and "negative-qr" in rep.flags
    assert rep.qr == rep.r_pos - rep.e_vn


# --- closed forms ----------------------------------------------------------

def test_step1_closed_form_examples():
    assert analytic_step1_randomness(0, 0, np.pi / 4) == pytest.approx((LN2, LN2), abs=1e-15)
    assert analytic_step1_randomness(0, 0.7, 0) == (0.0, 0.0)


def test_step2_closed_form_examples():
    rc, rp = analytic_step2_randomness(0, 0, np.pi / 4)
    assert rc == pytest.approx(LN2, abs=1e-15)
    assert rp == pytest.approx(1.5 * LN2, abs=1e-15)
    assert analytic_step2_randomness(0.0, 1.0, 0.0) == (0.0, 0.0)


@pytest.mark.parametrize("delta", [0.0, 0.4, np.pi / 3, np.pi / 2])
def test_ballistic_walk_keeps_initial_coin_entropy(delta):
    # theta = 0 moves up left and down right deterministically, so coin and
    # position entropies both equal the initial coin entropy
    h = oracles.shannon([np.cos(delta) ** 2, np.sin(delta) ** 2])
    for fn in (analytic_step1_randomness, analytic_step2_randomness):
        rc, rp = fn(delta, 0.8, 0.0)
        assert rc == pytest.approx(h, abs=1e-15) and rp == pytest.approx(h, abs=1e-15)


@pytest.mark.parametrize("d", GRID)
@pytest.mark.parametrize("e", GRID)
@pytest.mark.parametrize("th", GRID)
def test_closed_forms_vs_path_sum(d, e, th):
    for steps, fn in ((1, analytic_step1_randomness), (2, analytic_step2_randomness)):
        ref = oracles.dtqw(d, e, th, steps)
        coin = [sum(abs(a) ** 2 for (c, _), a in ref.items() if c == k) for k in (0, 1)]
        rc, rp = fn(d, e, th)
        assert abs(rc - oracles.shannon(coin)) <= 1e-10
        assert abs(rp - oracles.shannon(oracles.position_probs(ref).values())) <= 1e-10


@settings(max_examples=300)
@given(angle, angle, angle)
def test_step1_coin_equals_position(d, e, th):
    rc, rp = analytic_step1_randomness(d, e, th)
    assert rc == rp
    s = evolve(WalkSpec(theta=th, init=InitialState(d, e), steps=1))
    assert abs(intrinsic_randomness(coin_distribution(s)) - intrinsic_randomness(position_distribution(s))) <= 1e-12


# --- bounds over all families ---------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.sampled_from(list(Family)), angle, angle, angle, st.integers(0, 30))
def test_entropy_bounds(family, a, b, d, t):
    s = evolve(WalkSpec(family, theta=a, theta1=a, theta2=b, init=InitialState(d, 0.3), steps=t))
    r_coin = intrinsic_randomness(coin_distribution(s))
    pos = position_distribution(s)
    r_pos = intrinsic_randomness(pos)
    r_joint = joint_randomness(s)
    assert -1e-15 <= r_coin <= LN2 + 1e-12
    assert -1e-15 <= r_pos <= math.log(max(pos.support_size, 1)) + 1e-12
    assert -1e-12 <= r_joint - r_pos <= LN2 + 1e-12
