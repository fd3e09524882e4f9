import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isgraph.channel import (
    BoundedPowerLaw,
    ChannelParams,
    InvalidEdgeLength,
    UnboundedPowerLaw,
    gain,
    gain_inverse,
    model_from_name,
    msr,
    out_radius,
    r_free,
    rho_max,
    valid_edge_length,
)


def msr_direct(snr0, g, d_link, d_eve):
    """Secrecy rate written out term by term with math.log2."""
    ge = 0.0 if math.isinf(d_eve) else g(d_eve)
    return max(math.log2(1 + snr0 * g(d_link)) - math.log2(1 + snr0 * ge), 0.0)


def test_gain_values():
    assert gain(UnboundedPowerLaw(4), 2.0) == 1 / 16
    assert gain(BoundedPowerLaw(4), 0.0) == 1.0
    assert gain(UnboundedPowerLaw(4), 0.0) == math.inf
    assert gain(BoundedPowerLaw(2), math.inf) == 0.0


def test_gain_monotone(model, rng):
    r = np.sort(rng.uniform(0.01, 20, 1000))
    g = gain(model, r)
    assert np.all(np.diff(g) < 0)


def test_gain_inverse_values():
    assert gain_inverse(UnboundedPowerLaw(4), 1 / 16) == pytest.approx(2.0, rel=1e-15)
    assert gain_inverse(BoundedPowerLaw(2), 1 / 5) == pytest.approx(2.0, rel=1e-15)
    assert gain_inverse(BoundedPowerLaw(2), 1.5) == 0.0
    assert gain_inverse(BoundedPowerLaw(2), 1.0) == 0.0
    assert gain_inverse(BoundedPowerLaw(2), 0.0) == math.inf
    assert gain_inverse(UnboundedPowerLaw(3), -1.0) == math.inf


def test_gain_inverse_round_trip(rng):
    for _ in range(1000):
        model = (UnboundedPowerLaw if rng.random() < 0.5 else BoundedPowerLaw)(rng.uniform(1.5, 6))
        r = rng.uniform(0.05, 10)
        assert abs(gain_inverse(model, gain(model, r)) - r) <= 1e-9 * (1 + r)
        y = gain(model, r)
        assert gain(model, gain_inverse(model, y)) == pytest.approx(y, rel=1e-12)


def test_model_names():
    assert model_from_name("power_law", 4) == UnboundedPowerLaw(4.0)
    assert model_from_name("bounded_power_law", 3) == BoundedPowerLaw(3.0)
    with pytest.raises(ValueError):
        model_from_name("free_space", 2)
    with pytest.raises(ValueError):
        UnboundedPowerLaw(0)


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(0.0)
    with pytest.raises(ValueError):
        ChannelParams(1.0, -0.1)
    assert ChannelParams.from_db(10.0).snr0 == pytest.approx(10.0)


def test_msr_examples():
    p = ChannelParams(10.0)
    m = UnboundedPowerLaw(4)
    assert msr(p, m, 1.3, 1.3) == 0.0
    assert msr(p, m, 0.7, math.inf) == pytest.approx(math.log2(1 + 10 * 0.7**-4))
    want = math.log2(11 / 1.625)
    assert msr(p, m, 1.0, 2.0) == pytest.approx(want, rel=1e-14)
    assert msr_direct(10.0, lambda r: r**-4, 1.0, 2.0) == pytest.approx(want, rel=1e-14)


def test_msr_never_negative(rng):
    p = ChannelParams(5.0)
    v = msr(p, BoundedPowerLaw(3), rng.uniform(0, 5, 500), rng.uniform(0, 5, 500))
    assert np.all(v >= 0)


def test_rho_max():
    assert rho_max(ChannelParams(10.0), BoundedPowerLaw(3)) == pytest.approx(math.log2(11))
    assert rho_max(ChannelParams(10.0), BoundedPowerLaw(3)) == pytest.approx(3.4594316186, abs=1e-9)
    assert rho_max(ChannelParams(10.0), UnboundedPowerLaw(4)) == math.inf
    assert 0 < rho_max(ChannelParams(1e-12), BoundedPowerLaw(2)) < 1e-11


def test_out_radius_rho_zero_is_identity(model, rng):
    rho_e = np.append(rng.exponential(1.0, 200), math.inf)
    for snr0 in (0.1, 10.0, 1e4):
        np.testing.assert_array_equal(out_radius(ChannelParams(snr0, 0.0), model, rho_e), rho_e)


def test_out_radius_above_rho_max_is_zero():
    m = BoundedPowerLaw(4)
    p = ChannelParams(10.0)
    for rho in (rho_max(p, m), rho_max(p, m) + 0.1, 10.0):
        assert out_radius(p.with_rho(rho), m, 3.0) == 0.0
        assert out_radius(p.with_rho(rho), m, math.inf) == 0.0


def test_out_radius_example():
    got = out_radius(ChannelParams(10.0, 1.0), UnboundedPowerLaw(4), 1.0)
    assert got == pytest.approx(2.1 ** -0.25, rel=1e-14)
    # independent membership check on sampled links around the radius
    for d in np.linspace(0.5, 1.2, 200):
        inside = (d ** -4) > 2 * 1.0 + 0.1
        assert inside == (d < got)


def test_out_radius_positive_below_rho_max(rng):
    m = BoundedPowerLaw(3)
    p = ChannelParams(10.0)
    rmax = rho_max(p, m)
    for rho in rng.uniform(0, rmax, 200):
        assert out_radius(p.with_rho(rho), m, math.inf) > 0


def test_out_radius_monotonicity(model, rng):
    p = ChannelParams(8.0)
    rhos = np.sort(rng.uniform(0, 3, 30))
    rho_e = np.sort(rng.exponential(1.0, 30))
    for re_ in rho_e:
        r = [float(out_radius(p.with_rho(x), model, re_)) for x in rhos]
        assert all(b <= a for a, b in zip(r, r[1:]))
    for x in rhos:
        r = out_radius(p.with_rho(x), model, rho_e)
        assert np.all(np.diff(r) >= 0)


def test_msr_and_radius_are_the_same_predicate(rng):
    n = 100_000
    kinds = rng.integers(0, 2, n)
    gammas = rng.uniform(2, 5, n)
    snrs = 10 ** rng.uniform(-1, 3, n)
    rhos = rng.uniform(0, 3, n) * (rng.random(n) < 0.9)
    d_link = rng.exponential(1.0, n)
    d_eve = rng.exponential(1.0, n)
    d_eve[::50] = math.inf
    agree = 0
    for k in range(n):
        m = (UnboundedPowerLaw if kinds[k] else BoundedPowerLaw)(gammas[k])
        p = ChannelParams(snrs[k], rhos[k])
        agree += (msr(p, m, d_link[k], d_eve[k]) > rhos[k]) == (d_link[k] < out_radius(p, m, d_eve[k]))
    assert agree == n


def test_r_free_rho_zero():
    for m in (UnboundedPowerLaw(4), BoundedPowerLaw(2)):
        assert r_free(ChannelParams(10.0), m, 1.0) == math.sqrt(5)
        assert r_free(ChannelParams(3.0), m, 2.0) == 2 * math.sqrt(5)


def test_r_free_example():
    p = ChannelParams(10.0, 1.0)
    m = UnboundedPowerLaw(4)
    arg = 0.5 * (math.sqrt(5) * 0.1) ** -4 - 0.05
    got = r_free(p, m, 0.1)
    assert got == pytest.approx(arg ** -0.25, rel=1e-14)
    assert gain(m, got) == pytest.approx(arg, rel=1e-12)


def test_r_free_invalid_length():
    p = ChannelParams(10.0, 1.0)
    m = UnboundedPowerLaw(4)
    dmax = valid_edge_length(p, m)
    r_free(p, m, 0.99 * dmax)
    with pytest.raises(InvalidEdgeLength):
        r_free(p, m, 1.01 * dmax)
    with pytest.raises(InvalidEdgeLength):
        r_free(p, m, 0.0)


def test_valid_edge_length():
    assert valid_edge_length(ChannelParams(10.0), UnboundedPowerLaw(4)) == math.inf
    b = BoundedPowerLaw(3)
    p = ChannelParams(10.0)
    assert valid_edge_length(p.with_rho(rho_max(p, b)), b) == 0.0
    assert valid_edge_length(ChannelParams(10.0, 1.0), UnboundedPowerLaw(4)) == pytest.approx(
        0.1 ** -0.25 / math.sqrt(5), rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(d=st.floats(0.05, 5), snr_db=st.floats(-10, 30), rho=st.floats(0, 4), gamma=st.floats(2, 5),
       bounded=st.booleans())
def test_r_free_exceeds_diagonal_when_defined(d, snr_db, rho, gamma, bounded):
    # r_free is where an eavesdropper stops blocking the sqrt(5) d diagonal; it can't be shorter.
    # Bounded gains near g(0)=1 lose digits on inversion, hence d >= 0.05.
    m = BoundedPowerLaw(gamma) if bounded else UnboundedPowerLaw(gamma)
    p = ChannelParams.from_db(snr_db, rho)
    if d < valid_edge_length(p, m):
        rf = r_free(p, m, d)
        assert rf >= math.sqrt(5) * d * (1 - 1e-12)
        assert out_radius(p, m, rf * (1 + 1e-9)) >= math.sqrt(5) * d * (1 - 1e-9)
