import numpy as np
import pytest

from degdiff.flux import FluxFunction


@pytest.fixture
def flux():
    return FluxFunction(rho_cr=1.0, kappa=2.0, scale=1.0)


class TestValidation:
    def test_rejects_nonpositive_rho_cr(self):
        with pytest.raises(ValueError):
            FluxFunction(rho_cr=0.0)
        with pytest.raises(ValueError):
            FluxFunction(rho_cr=-1.0)

    def test_rejects_kappa_at_most_one(self):
        with pytest.raises(ValueError):
            FluxFunction(kappa=1.0)
        with pytest.raises(ValueError):
            FluxFunction(kappa=0.5)

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            FluxFunction(scale=0.0)

    def test_rejects_negative_density(self, flux):
        with pytest.raises(ValueError):
            flux.eval(-0.1)
        with pytest.raises(ValueError):
            flux.deriv(np.array([0.5, -1e-12]))
        with pytest.raises(ValueError):
            flux.energy(-2.0)


class TestPointValues:
    def test_vanishes_below_critical(self, flux):
        s = np.linspace(0.0, 1.0, 11)
        assert np.all(flux.eval(s) == 0.0)
        assert np.all(flux.deriv(s) == 0.0)
        assert np.all(flux.energy(s) == 0.0)

    def test_supercritical_values(self, flux):
        # f(s) = (s-1)^2, f'(s) = 2(s-1), F(s) = (s-1)^3/3 for s > 1
        assert flux.eval(1.5) == pytest.approx(0.25, rel=1e-15)
        assert flux.deriv(1.5) == pytest.approx(1.0, rel=1e-15)
        assert flux.energy(2.0) == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_scale_and_kappa(self):
        f = FluxFunction(rho_cr=0.5, kappa=3.0, scale=2.0)
        assert f.eval(1.5) == pytest.approx(2.0, rel=1e-15)
        assert f.deriv(1.5) == pytest.approx(6.0, rel=1e-15)
        assert f.energy(1.5) == pytest.approx(0.5, rel=1e-15)

    def test_c1_matching_at_critical(self, flux):
        eps = 1e-8
        assert flux.deriv(1.0) == 0.0
        assert flux.deriv(1.0 + eps) < 1e-7

    def test_scalar_in_scalar_out(self, flux):
        assert isinstance(flux.eval(1.5), float)
        assert isinstance(flux.deriv(1.5), float)
        out = flux.eval(np.array([1.5, 2.0]))
        assert out.shape == (2,)


class TestRelEnergy:
    def test_zero_at_reference(self, flux):
        assert flux.rel_energy(1.5, 1.5) == 0.0
        assert flux.rel_energy(0.3, 0.3) == 0.0

    def test_nonnegative(self, flux):
        rng = np.random.default_rng(7)
        s = rng.uniform(0.0, 3.0, size=500)
        for ref in (0.3, 1.0, 1.5, 2.5):
            assert np.all(flux.rel_energy(s, ref) >= 0.0)

    def test_subcritical_reference_reduces_to_energy(self, flux):
        s = np.array([0.1, 0.9, 1.4, 2.2])
        np.testing.assert_allclose(
            flux.rel_energy(s, 0.7), flux.energy(s), rtol=1e-14
        )

    def test_matches_naive_formula_at_moderate_separation(self, flux):
        ref = 1.5
        s = np.array([1.1, 1.3, 1.8, 2.5, 0.4])
        naive = (
            flux.energy(s)
            - flux.energy(ref)
            - flux.eval(ref) * (s - ref)
        )
        np.testing.assert_allclose(flux.rel_energy(s, ref), naive, rtol=1e-12)

    def test_quadratic_behavior_near_reference(self, flux):
        # Bregman distance ~ f'(ref)/2 * (s-ref)^2 for small separation;
        # the naive formula loses all digits here, the stable one must not.
        ref = 1.5
        for d in (1e-6, 1e-9, 1e-12):
            s = ref + d
            expected = 0.5 * flux.deriv(ref) * d * d
            assert flux.rel_energy(s, ref) == pytest.approx(expected, rel=1e-5)

    def test_broadcasting(self, flux):
        s = np.full((3, 4), 1.7)
        out = flux.rel_energy(s, 1.5)
        assert out.shape == (3, 4)

    def test_subcritical_argument_supercritical_reference(self, flux):
        # s below critical: distance is -F(ref) - f(ref)(s - ref), all linear
        ref, s = 2.0, 0.5
        expected = -flux.energy(ref) - flux.eval(ref) * (s - ref)
        assert flux.rel_energy(s, ref) == pytest.approx(expected, rel=1e-14)


class TestSerialization:
    def test_roundtrip(self):
        f = FluxFunction(rho_cr=0.8, kappa=2.5, scale=3.0)
        assert FluxFunction.from_dict(f.to_dict()) == f

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            FluxFunction.from_dict({"rho_cr": 1.0, "gamma": 2.0})
