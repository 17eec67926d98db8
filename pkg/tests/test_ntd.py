from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singular_traces import Geometry
from singular_traces.errors import DomainError, UsageError
from singular_traces.geometry import ModeSpec
from singular_traces.ntd import (boundary_jets, m_hat, m_tilde, ntd_exterior, ntd_interior,
                                 ntd_mode_values, schatten_decay_probe)

# Taylor coefficients (orders 0..3 in lam) of M~ and M^ at R=1, computed once
# with mpmath at 40 digits from the Bessel-function definitions.
REFERENCE = [
    (2, 0, -1.0, [0.53304467495626862, 0.26205420572494193, 0.17924493387532124, 0.13482454429563219], [2.9396776594638621, 2.2645950721565936, 2.1612261559680383, 2.1183652784738732]),
    (2, 0, -4.0, [0.25963079834597075, 0.034418104243608965, 0.0066244487818424406, 0.001379434211688126], [1.1237175927430506, 0.17384463690510113, 0.038623898873151546, 0.0091807149067857084]),
    (2, 1, -1.0, [0.34017335090486752, 0.07811914517992559, 0.029901314167075315, 0.01457339245499062], [1.394739558853554, 0.30393010204141505, 0.10658136648219407, 0.049939588526404367]),
    (2, 1, -4.0, [0.22247582632370963, 0.021200852337318442, 0.0029780273329382906, 0.00046914741852018675], [0.91626089967974064, 0.088994185676830469, 0.012245146092464403, 0.0018416882014986144]),
    (2, 7, -1.0, [0.070696672861871347, 0.00071999487528575897, 1.1664494700877337e-5, 2.3323771196339083e-7], [0.2827872778268373, 0.0028788507112030979, 4.715866059869285e-5, 9.7254037509200276e-7]),
    (2, 7, -4.0, [0.068635798141091656, 0.00065574802715715896, 9.8345372392783587e-6, 1.7736703509498681e-7], [0.27455074829716446, 0.0026197396047735424, 3.957217495550186e-5, 7.3104869750941978e-7]),
    (2, 15, -1.0, [0.033259180106166924, 7.3902658495775574e-5, 2.496066268477664e-7, 9.580378548078591e-10], [0.13303672333104273, 0.00029560486695613074, 1.0012419040337897e-6, 3.8769428744516989e-9]),
    (2, 15, -4.0, [0.03303969304205767, 7.2430462148789815e-5, 2.4119492729097936e-7, 9.1174114819086425e-10], [0.13215881654121389, 0.00028970035042367761, 9.6721580048998011e-7, 3.6865724656938936e-9]),
    (2, 30, -1.0, [0.016657404859765176, 9.2540622765726042e-6, 7.7373894860683582e-9, 7.2282787265759966e-12], [0.066629619461884724, 3.7016203547261496e-5, 3.0972204162660383e-8, 2.9001681008004311e-11]),
    (2, 30, -4.0, [0.016629712114854373, 9.2078323343509277e-6, 7.6727189011835888e-9, 7.143180515869577e-12], [0.066518848820361224, 3.6831150268461992e-5, 3.0712736641273509e-8, 2.8658654347247009e-11]),
    (2, 200, -1.0, [0.002499968749804729, 3.1249609284664826e-8, 5.8597411756752473e-13, 1.2210235976148963e-17], [0.0099998749992189551, 1.2499843706054065e-7, 2.3439355244691164e-12, 4.884436158029157e-17]),
    (2, 200, -4.0, [0.0024998750062503124, 3.1246093769606938e-8, 5.8586423987086701e-13, 1.2207030128218971e-17], [0.0099995000250018745, 1.2498437476607616e-7, 2.3434959829337846e-12, 4.8831535882089837e-17]),
    (3, 0, -1.0, [0.43233235838169365, 0.14849853757254048, 0.077540082370252188, 0.047699824903966903], [3.6945280494653251, 3.1302407046777048, 3.0627206747081762, 3.0390725773471075]),
    (3, 0, -4.0, [0.24542109027781645, 0.028388181423635284, 0.0047504203016586727, 0.00087042845549702699], [1.2638866584366875, 0.21942335757031286, 0.051076397242804422, 0.012423989205303865]),
    (3, 1, -1.0, [0.27067056647322538, 0.041341132946450768, 0.011260968205946392, 0.0042080125214299811], [1.2371507060446203, 0.19265660392419918, 0.043539179278235575, 0.012693611634457514]),
    (3, 1, -4.0, [0.19780254687491298, 0.015110137369730025, 0.0017457589653591654, 0.00023255378044006367], [0.88064816928306757, 0.075283201208449974, 0.0088332487251374646, 0.0011119418596357323]),
    (3, 7, -1.0, [0.066071858980600268, 0.00058644348735674244, 8.2208892016556209e-6, 1.4033478776037651e-7], [0.26548793409256373, 0.0023365745587125601, 3.2085518039671037e-5, 5.3738626122555775e-7]),
    (3, 7, -4.0, [0.064382945436595815, 0.00054062163766906969, 7.0965892918239209e-6, 1.1122350623172947e-7], [0.2587532986441153, 0.0021574860999122026, 2.777597801320851e-5, 4.2680663475336399e-7]),
    (3, 15, -1.0, [0.032190862790819098, 6.6989243001476786e-5, 2.1172003321749957e-7, 7.5931575900274079e-10], [0.12889813622819427, 0.00026768549624134226, 8.4192414947126337e-7, 3.0063735478771566e-9]),
    (3, 15, -4.0, [0.031991780276372203, 6.5739110915113065e-5, 2.0504209672384697e-7, 7.2502329712511122e-10], [0.12810257681744547, 0.0002627138836487058, 8.1548349581294132e-7, 2.8707304666363694e-9]),
    (3, 30, -1.0, [0.016384628966466485, 8.8065270452766423e-6, 7.1229968367260647e-9, 6.4360623943843063e-12], [0.065556152669903901, 3.5216705177753703e-5, 2.8448679656681818e-8, 2.5676486943246098e-11]),
    (3, 30, -4.0, [0.016358273319025391, 8.7639621759122333e-6, 7.065402880136604e-9, 6.3627762427489053e-12], [0.065450757901204454, 3.5046703724191712e-5, 2.8218910023262047e-8, 2.5384157194259127e-11]),
    (3, 200, -1.0, [0.0024937345690500538, 3.1016406143068155e-8, 5.7870387718872115e-13, 1.1998662022539587e-17], [0.0099750003109415262, 1.2406485314464309e-7, 2.3147339376406964e-12, 4.799172309893873e-17]),
    (3, 200, -4.0, [0.0024936415250396355, 3.1012934243740684e-8, 5.7859590333701937e-13, 1.1995527420064475e-17], [0.009974628137213402, 1.2405096603668092e-7, 2.3143020685552299e-12, 4.7979185484648224e-17]),
]


@pytest.mark.parametrize("dim,n,lam0,mt_ref,mh_ref", REFERENCE)
def test_boundary_maps_against_high_precision_reference(dim, n, lam0, mt_ref, mh_ref):
    g = Geometry(dim, 1.0)
    np.testing.assert_allclose(m_tilde(n, g, lam0, 3).coeffs, mt_ref, rtol=1e-9)
    np.testing.assert_allclose(m_hat(n, g, lam0, 3).coeffs, mh_ref, rtol=1e-9)


def test_known_values_at_mode_zero():
    g = Geometry(2, 1.0)
    v = ntd_mode_values(0, g, -1.0, 0)
    assert float(v.m_minus.coeffs[0]) == pytest.approx(2.2401937, rel=1e-7)
    assert float(v.m_plus.coeffs[0]) == pytest.approx(0.6994839, rel=1e-6)
    assert float(v.m_tilde.coeffs[0]) == pytest.approx(0.53304467495626862, rel=1e-13)
    assert float(v.m_hat.coeffs[0]) == pytest.approx(2.9396776594638621, rel=1e-13)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("lam0,order", [(-0.3, 1), (-1.0, 2), (-4.0, 2), (-25.0, 3)])
def test_closed_and_harmonic_routes_agree(dim, lam0, order):
    # coefficient k of the contour jets is good to ~eps (2 nu^2 / |lam0|)^k relative,
    # so the tightest check is limited to the orders that conditioning allows
    g = Geometry(dim, 1.0)
    n = np.arange(0, 51)
    closed = m_tilde(n, g, lam0, order, route="closed").coeffs
    harm = m_tilde(n, g, lam0, order, route="harmonic").coeffs
    np.testing.assert_allclose(closed, harm, rtol=1e-10)


def test_routes_agree_in_absolute_terms_at_high_order():
    g = Geometry(2, 1.0)
    n = np.arange(0, 51)
    closed = m_tilde(n, g, -0.3, 4, route="closed").coeffs
    harm = m_tilde(n, g, -0.3, 4, route="harmonic").coeffs
    scale = np.abs(closed[0]) / 0.15 ** np.arange(5)[:, None]
    assert np.all(np.abs(closed - harm) <= 1e-12 * scale)


@pytest.mark.parametrize("dim", [2, 3])
def test_harmonic_sum_identity_in_jet_ring(dim):
    g = Geometry(dim, 1.3)
    n = np.arange(0, 80)
    v = ntd_mode_values(n, g, -2.0, 4)
    lhs = (1.0 / v.m_tilde).coeffs
    rhs = (1.0 / v.m_plus + 1.0 / v.m_minus).coeffs
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(lhs).max())
    np.testing.assert_allclose(v.m_hat.coeffs, (v.m_plus + v.m_minus).coeffs, rtol=1e-14)


def _richardson_derivative(f, x, k, h):
    """k-th derivative from central differences, two-level Richardson."""
    def central(step):
        j = np.arange(k + 1)
        w = np.array([(-1) ** (k - i) * math.comb(k, i) for i in j], dtype=float)
        pts = x + (j - k / 2) * step
        return float(np.dot(w, [f(p) for p in pts])) / step ** k
    return (4 * central(h / 2) - central(h)) / 3


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_jet_coefficients_match_finite_differences(dim, n):
    # higher modes have coefficients ~ n^(-2k-1) below the finite-difference noise
    # floor; the high-precision table covers them
    g = Geometry(dim, 1.0)
    lam0 = -1.5
    jet = m_tilde(n, g, lam0, 3).coeffs
    f = lambda lam: float(m_tilde(n, g, lam, 0).coeffs[0])
    for k, h in ((1, 1e-2), (2, 1e-2), (3, 2e-2)):
        fd = _richardson_derivative(f, lam0, k, h) / math.factorial(k)
        assert fd == pytest.approx(jet[k], rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 400), st.floats(-30.0, -0.05), st.sampled_from([2, 3]))
def test_positivity_and_monotonicity(n, lam0, dim):
    g = Geometry(dim, 1.0)
    v = ntd_mode_values(n, g, lam0, 2)
    for jet in (v.m_minus, v.m_plus, v.m_tilde, v.m_hat):
        assert jet.coeffs[0] > 0
        assert jet.coeffs[1] > 0       # Herglotz: increasing in lam below the spectrum
    assert v.m_tilde.coeffs[0] < min(v.m_plus.coeffs[0], v.m_minus.coeffs[0])


def test_exterior_and_interior_are_sign_correct():
    g = Geometry(2, 2.0)
    assert float(ntd_interior(3, g, -1.0, 0).coeffs[0]) > 0
    assert float(ntd_exterior(3, g, -1.0, 0).coeffs[0]) > 0


def test_mode_spec_and_array_inputs_agree():
    g = Geometry(3, 1.0)
    a = m_tilde(ModeSpec(4, 9), g, -1.0, 2).coeffs
    b = m_tilde(np.array([4]), g, -1.0, 2).coeffs[:, 0]
    np.testing.assert_array_equal(a, b)


def test_large_mode_asymptotics():
    g = Geometry(2, 1.0)
    n = np.array([5000, 10000])
    mt = m_tilde(n, g, -1.0, 0).coeffs[0]
    np.testing.assert_allclose(mt, 1.0 / (2.0 * np.sqrt(n ** 2 + 1.0)), rtol=1e-10)


@pytest.mark.parametrize("bad", [dict(mode=-1, lam0=-1.0), dict(mode=1, lam0=0.0), dict(mode=1.5, lam0=-1.0)])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        boundary_jets(bad["mode"], Geometry(2, 1.0), bad["lam0"], 1)


def test_unknown_route_rejected():
    with pytest.raises(UsageError):
        m_tilde(1, Geometry(2, 1.0), -1.0, 1, route="magic")


@pytest.mark.parametrize("k,expected,tol", [(0, -1.0, 0.05), (1, -3.0, 0.1), (2, -5.0, 0.2)])
def test_decay_exponents_m_tilde(k, expected, tol):
    fit = schatten_decay_probe("m_tilde", k, Geometry(2, 1.0), -1.0, (100, 1000))
    assert abs(fit.exponent - expected) <= tol
    assert fit.points == 901


def test_decay_exponent_m_hat_and_rank_fit():
    g2 = Geometry(2, 1.0)
    assert schatten_decay_probe("m-hat", 0, g2, -1.0, (100, 1000)).exponent == pytest.approx(-1.0, abs=0.05)
    # on the sphere the l-th value has multiplicity 2l+1: s_j ~ j^(-1/2) against rank
    fit = schatten_decay_probe("m_tilde", 0, Geometry(3, 1.0), -1.0, (100, 400), against="rank")
    assert fit.exponent == pytest.approx(-0.5, abs=0.05)


def test_decay_probe_rejects_bad_ranges():
    with pytest.raises(UsageError):
        schatten_decay_probe("m_tilde", 0, Geometry(2, 1.0), -1.0, (5, 100))
    with pytest.raises(UsageError):
        schatten_decay_probe("m_bar", 0, Geometry(2, 1.0), -1.0, (100, 200))
