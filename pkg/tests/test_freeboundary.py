import numpy as np
import pytest

from degdiff.flux import FluxFunction
from degdiff.freeboundary import (
    NoRoot,
    advance_radial,
    composite_mass,
    composite_to_2d,
    contour_radius,
    disk_average,
    front_velocity,
    initial_state,
    r_infinity,
    run_radial,
    steady_state_radial,
)
from degdiff.grid import Grid2D, ScalarField


@pytest.fixture
def flux():
    return FluxFunction(rho_cr=1.0, kappa=2.0, scale=1.0)


def gaussian(amp, decay):
    return lambda r: amp * np.exp(-decay * np.asarray(r, dtype=float) ** 2)


class TestDiskAverage:
    def test_constant_datum(self):
        assert disk_average(lambda r: 3.0 + 0 * np.asarray(r), 0.5) == (
            pytest.approx(3.0, rel=1e-12)
        )

    def test_gaussian_closed_form(self):
        # avg over disk R of A e^{-b r^2} is A (1 - e^{-b R^2}) / (b R^2)
        amp, decay, R = 2.0, 3.0, 0.6
        expected = amp * (1 - np.exp(-decay * R**2)) / (decay * R**2)
        assert disk_average(gaussian(amp, decay), R) == pytest.approx(
            expected, rel=1e-12
        )


class TestRInfinity:
    def test_defining_residual(self):
        rho0 = gaussian(2.0, 3.0)
        r_inf = r_infinity(rho0, 1.0)
        assert abs(disk_average(rho0, r_inf) - 1.0) <= 1e-10

    def test_closed_form_root(self):
        # A (1 - e^{-b R^2}) / (b R^2) = rho_cr solved independently by
        # bisection on the closed form
        amp, decay = 2.0, 3.0

        def g(R):
            return amp * (1 - np.exp(-decay * R**2)) / (decay * R**2) - 1.0

        lo, hi = 1e-6, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
        assert r_infinity(gaussian(amp, decay), 1.0) == pytest.approx(
            0.5 * (lo + hi), abs=1e-10
        )

    def test_subcritical_center_raises(self):
        with pytest.raises(NoRoot):
            r_infinity(gaussian(0.9, 3.0), 1.0)

    def test_average_never_subcritical_raises(self):
        with pytest.raises(NoRoot):
            r_infinity(gaussian(1.5, 0.01), 1.0)


class TestInitialState:
    def test_front_at_critical_crossing(self, flux):
        rho0 = gaussian(2.0, 3.0)
        st = initial_state(rho0, 1.0, 101)
        # rho0(R0) = 1  =>  R0 = sqrt(ln 2 / 3)
        assert st.R == pytest.approx(np.sqrt(np.log(2.0) / 3.0), abs=1e-10)
        assert st.profile.values[-1] == pytest.approx(1.0, abs=1e-10)
        assert st.profile.values[0] == pytest.approx(2.0, rel=1e-12)

    def test_monotone_profile(self, flux):
        st = initial_state(gaussian(2.0, 3.0), 1.0, 101)
        assert np.all(np.diff(st.profile.values) <= 0)

    def test_subcritical_center_raises(self):
        with pytest.raises(NoRoot):
            initial_state(gaussian(0.5, 3.0), 1.0, 51)


class TestFrontMotion:
    def test_velocity_nonnegative_at_start(self, flux):
        st = initial_state(gaussian(2.0, 3.0), 1.0, 201)
        assert front_velocity(st, flux) >= 0.0

    def test_radius_nondecreasing_and_bounded(self, flux):
        rho0 = gaussian(2.0, 3.0)
        st = initial_state(rho0, 1.0, 201)
        r_inf = r_infinity(rho0, 1.0)
        st, history, _ = run_radial(st, flux, 0.2, 1e-3)
        radii = [R for _, R in history]
        assert all(b >= a for a, b in zip(radii, radii[1:]))
        assert radii[-1] > radii[0]  # the front actually moves
        assert radii[-1] <= r_inf + 1e-3

    def test_profile_stays_above_critical(self, flux):
        st = initial_state(gaussian(2.0, 3.0), 1.0, 201)
        st = advance_radial(st, 1e-3, flux)
        assert np.min(st.profile.values) >= 1.0 - 1e-9

    def test_mass_drift_first_order_small(self, flux):
        # The composite mass is conserved up to the O(h) front closure; at
        # 200 nodes the observed drift is ~5e-3 per unit time.
        rho0 = gaussian(2.0, 3.0)
        st = initial_state(rho0, 1.0, 201)
        m0 = composite_mass(st, square_domain_half=1.0)
        st, _, _ = run_radial(st, flux, 0.5, 1e-3)
        m1 = composite_mass(st, square_domain_half=1.0)
        assert abs(m1 - m0) / m0 <= 1e-2

    def test_record_times_snapshots(self, flux):
        st = initial_state(gaussian(2.0, 3.0), 1.0, 101)
        _, _, snaps = run_radial(st, flux, 0.1, 1e-3,
                                 record_times=(0.05, 0.1))
        assert set(snaps) == {0.05, 0.1}
        assert snaps[0.05].t == pytest.approx(0.05, abs=1e-10)


class TestComposites:
    def test_composite_matches_datum_at_t0(self, flux):
        rho0 = gaussian(2.0, 3.0)
        st = initial_state(rho0, 1.0, 401)
        grid = Grid2D(nx=60, ny=60)
        comp = composite_to_2d(st, grid)
        X, Y = grid.cell_centers()
        exact = rho0(np.hypot(X, Y))
        # linear interpolation of the sampled profile: O(h^2) inside
        assert float(np.max(np.abs(comp.data - exact))) < 1e-4

    def test_steady_state_structure(self, flux):
        rho0 = gaussian(2.0, 3.0)
        grid = Grid2D(nx=50, ny=50)
        steady = steady_state_radial(rho0, 1.0, grid)
        r_inf = r_infinity(rho0, 1.0)
        X, Y = grid.cell_centers()
        rr = np.hypot(X, Y)
        assert np.all(steady.data[rr < r_inf] == 1.0)
        np.testing.assert_allclose(
            steady.data[rr >= r_inf], rho0(rr[rr >= r_inf]), rtol=1e-12
        )

    def test_contour_radius_of_disk_indicator(self):
        grid = Grid2D(nx=200, ny=200)
        X, Y = grid.cell_centers()
        R = 0.55
        data = np.where(np.hypot(X, Y) < R, 2.0, 0.5)
        est = contour_radius(ScalarField(grid, data), 1.0)
        assert est == pytest.approx(R, abs=2 * grid.hx)
