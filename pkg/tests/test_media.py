import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magneto_qed.couplings import random_unitary
from magneto_qed.errors import CoverageError, GridError, InvalidInputError, NonDissipativeModelError, WindowError
from magneto_qed.grid import SpectralGrid
from magneto_qed.media import (
    BandRegion,
    ClosedFormRegion,
    LorentzTerm,
    MediumModel,
    OscillatorBand,
    Placement,
    ZeemanTerm,
    apply_constitutive,
    decay_width,
    gamma_A_from_couplings,
    gamma_full,
    gamma_H_from_couplings,
    lorentz_closed_form,
    time_kernel,
)
from magneto_qed.tensors import dissipative_part

from .conftest import dm1_model, me_n1_model, stack_model

lorentz_params = st.tuples(st.floats(0.01, 2.0), st.floats(0.1, 5.0), st.floats(0.01, 1.0))


def test_lorentz_values():
    # chi(1.3) for f=0.5, w0=1, gamma=0.1, checked against an mpmath evaluation
    assert lorentz_closed_form(0.5, 1.0, 0.1, 1.3) == pytest.approx(-0.6997971602434076 + 0.13184584178498982j, rel=1e-14)
    assert lorentz_closed_form(0.5, 1.0, 0.1, 1.0) == pytest.approx(5.0j)


def test_lorentz_rejects_bad_parameters():
    with pytest.raises(NonDissipativeModelError):
        lorentz_closed_form(0.5, 1.0, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        LorentzTerm("ee", -0.1, 1.0, 0.1)
    with pytest.raises(InvalidInputError):
        LorentzTerm("xx", 0.1, 1.0, 0.1)


@given(lorentz_params, st.floats(0.01, 20.0))
def test_lorentz_reality_and_passivity(p, w):
    chi = lorentz_closed_form(*p, w)
    assert lorentz_closed_form(*p, -w) == pytest.approx(np.conj(chi))
    assert chi.imag > 0


@given(lorentz_params)
def test_lorentz_kernel_transform(p):
    term = LorentzTerm("ee", *p)
    f, w0, g = p
    dt = min(0.05, 0.2 / w0)
    t = np.arange(0, 40 / term.widths()[0], dt)
    k = term.kernel(t)[:, 0, 0]
    assert np.all(term.kernel(t)[:, 3:, 3:] == 0)
    w = 0.7 * w0
    # trapezoid transform of a kernel that starts at zero
    approx = np.sum(k * np.exp(1j * w * t)) * dt - 0.5 * dt * k[0]
    assert approx == pytest.approx(lorentz_closed_form(f, w0, g, w), rel=2e-3, abs=1e-3 * f)


def test_zeeman_reality_and_bias_reversal():
    z = ZeemanTerm(0.5, 1.0, 0.2, bias=(0.0, 0.0, 1.0), kappa=0.3)
    w = np.array([0.4, 0.9, 1.7])
    g = z.response(w)[:, :3, :3]
    assert np.allclose(z.response(-w)[:, :3, :3], np.conj(g))
    # Onsager: reversing the bias transposes the tensor
    assert np.allclose(z.reversed().response(w)[:, :3, :3], np.swapaxes(g, -1, -2))
    assert not np.allclose(g, np.swapaxes(g, -1, -2))


def test_overdamped_width_sets_the_response_time():
    assert decay_width(1.0, 0.1) == pytest.approx(0.1)
    slow = decay_width(0.25, 1.0)
    assert slow == pytest.approx(1.0 - np.sqrt(1.0 - 0.25), rel=1e-12)
    region = ClosedFormRegion("od", (LorentzTerm("ee", 1.0, 0.25, 1.0),))
    assert region.response_time() == pytest.approx(2 * np.log(1e8) / slow)


def test_zeeman_without_bias_is_lorentz():
    z = ZeemanTerm(0.5, 1.0, 0.2)
    l = LorentzTerm("ee", 0.5, 1.0, 0.2)
    w = np.linspace(0.1, 3, 7)
    assert np.allclose(z.response(w), l.response(w))
    t = np.linspace(0, 5, 11)
    assert np.allclose(z.kernel(t), l.kernel(t))


def test_zeeman_kernel_is_real_and_transforms():
    z = ZeemanTerm(0.5, 1.0, 0.4, bias=(0.0, 0.0, 1.0), kappa=0.3)
    dt = 0.01
    t = np.arange(0, 120, dt)
    k = z.kernel(t)[:, :3, :3]
    w = 0.8
    approx = np.tensordot(np.exp(1j * w * t), k, axes=(0, 0)) * dt - 0.5 * dt * k[0]
    assert np.allclose(approx, z.response(w)[:3, :3], atol=2e-4)


def test_closed_form_region_parts():
    region = dm1_model().regions[0]
    w = np.array([0.5, 1.3])
    assert np.allclose(region.gamma_A(w) + region.gamma_H(w), region.response(w))
    assert region.response_time() == pytest.approx(2 * np.log(1e8) / 0.1)
    assert ClosedFormRegion("v").is_vacuum


def test_band_profiles_and_gauge():
    u = random_unitary(np.random.default_rng(3))
    plain = OscillatorBand(0, electric=(0.5, 1.0, 0.1), magnetic=(0.2, 1.0, 0.1))
    gauged = OscillatorBand(0, electric=(0.5, 1.0, 0.1), magnetic=(0.2, 1.0, 0.1), gauge=u)
    w = np.array([0.5, 1.0, 2.0])
    assert np.allclose(gamma_A_from_couplings([plain], w), gamma_A_from_couplings([gauged], w), atol=1e-15)
    le, lm = plain.profiles(1.0)
    assert np.allclose(le[0], np.sqrt(2 * 5.0) * np.eye(3))
    assert np.allclose(lm[0], 1j * np.sqrt(2 * 2.0) * np.eye(3))
    with pytest.raises(InvalidInputError):
        OscillatorBand(0, electric=(0.5, 1.0, 0.1), gauge=2 * np.eye(3))


def test_band_gamma_A_reality():
    band = OscillatorBand(0, electric=(0.5, 1.0, 0.1), magnetic=(0.2, 1.3, 0.2), sign=-1)
    w = np.array([0.6, 1.1])
    assert np.allclose(gamma_A_from_couplings([band], -w), np.conj(gamma_A_from_couplings([band], w)))
    with pytest.raises(InvalidInputError):
        gamma_A_from_couplings([band], [0.0])


def test_band_hermitian_part_matches_lorentz():
    band = OscillatorBand(0, electric=(0.5, 1.0, 0.1))
    w = np.array([0.5, 1.0, 1.3, 2.0])
    gh = gamma_H_from_couplings([band], w)
    chi = lorentz_closed_form(0.5, 1.0, 0.1, w)
    assert np.allclose(gh[:, 0, 0], chi.real, atol=2e-5 * np.abs(chi).max())
    assert np.allclose(gh[:, 3:, 3:], 0, atol=1e-12)


def test_band_cross_term_sign():
    # a single channel gives Gamma_A^em = (i/2) L^e L^m^dagger = sign * sqrt(Im chi_e Im chi_m)
    for sign in (1, -1):
        band = OscillatorBand(0, electric=(0.5, 1.0, 0.1), magnetic=(0.2, 1.0, 0.1), sign=sign)
        ga = gamma_A_from_couplings([band], [1.0])[0]
        assert np.allclose(ga[:3, 3:], sign * np.sqrt(5.0 * 2.0) * np.eye(3))
        assert np.allclose(ga[3:, :3], -sign * np.sqrt(5.0 * 2.0) * np.eye(3))


def test_region_map_and_coverage():
    model = stack_model()
    grid = SpectralGrid.line(60.0, 60)
    idx = model.region_map(grid).ravel()
    assert np.all(idx[28:32] == 1) and np.count_nonzero(idx) == 4
    bare = MediumModel((ClosedFormRegion("a"),), (Placement("a", 0, 0.0, 0.5),))
    with pytest.raises(CoverageError):
        bare.region_map(grid)
    with pytest.raises(CoverageError):
        model.region("nope")
    with pytest.raises(InvalidInputError):
        MediumModel((ClosedFormRegion("a"), ClosedFormRegion("a")))


def test_gamma_full_block_response():
    r = gamma_full(dm1_model(), "dm1", 1.3)
    assert r.ee[0, 0] == pytest.approx(-0.6997971602434076 + 0.13184584178498982j)
    assert r.position_id == "dm1"


def _monochromatic(model, name, w, dt, extra=40.0):
    tau = model.response_time
    t = np.arange(0, tau + extra, dt)
    kern = time_kernel(model, name, np.arange(0, tau + dt, dt))
    d = np.stack([np.zeros_like(t), np.cos(w * t), np.zeros_like(t)], axis=1)
    b = np.stack([np.zeros_like(t), np.zeros_like(t), np.cos(w * t)], axis=1)
    return t, d, b, kern


def test_constitutive_convolution_closed_form():
    model = dm1_model()
    w = 1.3
    t, d, b, kern = _monochromatic(model, "dm1", w, 0.005)
    p, m, start = apply_constitutive(kern, d, b)
    chi = lorentz_closed_form(0.5, 1.0, 0.1, w)
    expect = np.real(chi * np.exp(-1j * w * t))
    assert np.max(np.abs(p[start:, 1] - expect[start:])) < 1e-5 * abs(chi)
    assert np.all(m == 0)


def test_constitutive_convolution_band_with_cross_terms():
    model = me_n1_model()
    w = 1.1
    t, d, b, kern = _monochromatic(model, "me1", w, 0.0025)
    p, m, start = apply_constitutive(kern, d, b)
    g = model.regions[0].response(np.array([w]))[0]
    expect_p = np.real(g[1, 1] * np.exp(-1j * w * t) + g[1, 5] * np.exp(-1j * w * t))
    expect_m = np.real(g[5, 1] * np.exp(-1j * w * t) + g[5, 5] * np.exp(-1j * w * t))
    scale = np.abs(g).max()
    assert np.max(np.abs(p[start:, 1] - expect_p[start:])) < 1e-5 * scale
    assert np.max(np.abs(m[start:, 2] - expect_m[start:])) < 1e-5 * scale


def test_constitutive_window_errors():
    model = dm1_model()
    dt = 0.05
    kern = time_kernel(model, "dm1", np.arange(0, model.response_time + dt, dt))
    short = np.zeros((10, 3))
    with pytest.raises(WindowError):
        apply_constitutive(kern, short, short)
    with pytest.raises(GridError):
        time_kernel(model, "dm1", np.array([0.0, 0.1, 0.3]))


def test_band_kernel_aliasing_guard():
    model = me_n1_model()
    with pytest.raises(GridError):
        model.regions[0].kernel(np.arange(0, 50, 2.5))


def test_dissipative_part_of_response_is_passive():
    for model in (dm1_model(), me_n1_model()):
        w = np.geomspace(0.05, 20, 30)
        ga = dissipative_part(model.regions[0].response(w))
        eig = np.linalg.eigvalsh(-2j * ga)
        assert eig.min() >= -1e-12 * eig.max()
