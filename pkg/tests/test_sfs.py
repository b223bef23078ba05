import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from conftest import make_stable_plant
from relayosc import sfs
from relayosc.errors import RelayOscError
from relayosc.plant import parse_plant, realize


class TestSimulateSfs:
    def test_small_gain_decays(self, second_order):
        _, ss = second_order
        cfg = sfs.SfsConfig(gamma=0.1)
        sol = sfs.simulate_sfs(ss, cfg, [0.5, 0.5], 40.0)
        assert np.linalg.norm(sol.y[:, -1]) < 1e-3

    def test_origin_is_equilibrium(self, second_order):
        _, ss = second_order
        for gamma in (0.5, 50.0, 5e3):
            sol = sfs.simulate_sfs(ss, sfs.SfsConfig(gamma=gamma), [0.0, 0.0], 5.0)
            assert np.abs(sol.y).max() < 1e-10

    def test_odd_symmetry(self, second_order):
        # f(-x) = -f(x): mirrored starts give mirrored trajectories
        _, ss = second_order
        cfg = sfs.SfsConfig(gamma=30.0, rel_tol=1e-10, abs_tol=1e-13)
        x0 = np.array([0.4, -0.2])
        sol_p = sfs.simulate_sfs(ss, cfg, x0, 10.0)
        sol_m = sfs.simulate_sfs(ss, cfg, -x0, 10.0)
        ts = np.linspace(0, 10.0, 300)
        assert np.abs(sol_p.sol(ts) + sol_m.sol(ts)).max() < 1e-7

    def test_field_is_odd(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            ss = realize(make_stable_plant(rng))
            rhs = sfs.sfs_field(ss, gamma=float(rng.uniform(0.5, 100)))
            x = rng.standard_normal(ss.n)
            assert np.allclose(rhs(0.0, -x), -np.asarray(rhs(0.0, x)), atol=1e-12)

    def test_bad_inputs(self, second_order):
        _, ss = second_order
        with pytest.raises(ValueError):
            sfs.SfsConfig(gamma=-1.0)
        with pytest.raises(ValueError):
            sfs.simulate_sfs(ss, sfs.SfsConfig(gamma=1.0), [0.0, 0.0], -1.0)


class TestRootLocus:
    def test_second_order_closed_form(self, second_order):
        # char poly s^2 + (5 - g)s + (6 + g): crossing at g=5, w=sqrt(11)
        _, ss = second_order
        scan = sfs.root_locus(ss, 1e3, 400)
        hopf = [c for c in scan.crossings if c.kind == "hopf"]
        assert len(hopf) == 1
        assert hopf[0].gamma0 == pytest.approx(5.0, rel=1e-6)
        assert hopf[0].omega0 == pytest.approx(np.sqrt(11.0), rel=1e-6)
        assert hopf[0].direction == +1
        assert hopf[0].multiplicity_parity == 1

    def test_third_order_routh_closed_form(self, third_order):
        # 3(5 - g) = 6 + g gives g = 2.25, w = sqrt(2.75)
        _, ss = third_order
        scan = sfs.root_locus(ss, 100.0, 400)
        hopf = [c for c in scan.crossings if c.kind == "hopf"]
        assert hopf[0].gamma0 == pytest.approx(2.25, rel=1e-6)
        assert hopf[0].omega0 == pytest.approx(np.sqrt(2.75), rel=1e-6)

    def test_minimum_phase_no_crossing(self):
        ss = realize(parse_plant([1], [1, 2]))  # 1/(s+1)^2
        scan = sfs.root_locus(ss, 1e3, 200)
        assert scan.crossings == ()

    def test_characteristic_polynomial_identity(self):
        # eigenvalues of A - g B C are the roots of
        # lambda^n + sum (a_i + g b_i) lambda^i
        rng = np.random.default_rng(15)
        for _ in range(100):
            tf = make_stable_plant(rng)
            ss = realize(tf)
            g = float(rng.uniform(0.01, 50.0))
            lam = np.sort_complex(sfs.closed_loop_eigenvalues(ss, g))
            coeffs_desc = [1.0] + [a + g * b for a, b in
                                   zip(tf.den_coeffs[::-1], tf.num_coeffs[::-1])]
            roots = np.sort_complex(np.roots(coeffs_desc))
            scale = max(1.0, np.abs(roots).max())
            assert np.abs(lam - roots).max() <= 1e-8 * scale

    def test_eigen_tracks_satisfy_char_poly(self, second_order):
        _, ss = second_order
        scan = sfs.root_locus(ss, 100.0, 50)
        for g, lam in zip(scan.gamma_grid, scan.eigen_tracks):
            for z in lam:
                resid = z**2 + (5 - g) * z + (6 + g)
                assert abs(resid) < 1e-8 * max(1.0, abs(z) ** 2)

    def test_pitchfork_then_hopf_both_detected(self):
        # negative DC gain plant with a later complex crossing
        ss = realize(parse_plant([-2, 0.5, -1], [6, 11, 6]))
        scan = sfs.root_locus(ss, 1e3, 400)
        kinds = [c.kind for c in scan.crossings]
        assert kinds == ["real", "hopf"]
        assert scan.crossings[0].gamma0 == pytest.approx(3.0, rel=1e-6)
        g_hopf = (-12 + np.sqrt(144 + 480)) / 2  # root of g^2 + 12 g - 120
        assert scan.crossings[1].gamma0 == pytest.approx(g_hopf, rel=1e-6)


class TestHopfClassify:
    def test_supercritical_second_order(self, second_order):
        _, ss = second_order
        scan = sfs.root_locus(ss, 1e3, 400)
        rep = sfs.hopf_classify(ss, scan)
        assert rep.kind == "supercritical"
        assert rep.gamma0 == pytest.approx(5.0, rel=1e-6)
        assert rep.pitchfork_gammas == ()
        amps = [v["tail_amplitude"] for v in rep.evidence.values()]
        assert all(a < 0.5 for a in amps)
        assert amps == sorted(amps)  # amplitude grows with the offset

    def test_pitchfork_then_subcritical(self):
        ss = realize(parse_plant([-2, 0.5, -1], [6, 11, 6]))
        scan = sfs.root_locus(ss, 1e3, 400)
        rep = sfs.hopf_classify(ss, scan)
        assert rep.pitchfork_gammas[0] == pytest.approx(3.0, rel=1e-9)
        assert rep.kind in ("subcritical", "undetermined")
        assert rep.kind == "subcritical"

    def test_no_crossing_is_error(self):
        ss = realize(parse_plant([1], [1, 2]))
        scan = sfs.root_locus(ss, 1e3, 200)
        with pytest.raises(RelayOscError):
            sfs.hopf_classify(ss, scan)

    def test_hopf_frequency_matches_linearization(self, second_order):
        _, ss = second_order
        scan = sfs.root_locus(ss, 1e3, 400)
        c = scan.crossings[0]
        lam = sfs.closed_loop_eigenvalues(ss, c.gamma0)
        nearest = lam[np.argmin(np.abs(lam.real))]
        assert abs(nearest.imag) == pytest.approx(c.omega0, rel=1e-9)


class TestDescribingLocus:
    def test_theta_zero_is_minus_one(self, second_order):
        _, ss = second_order
        dl = sfs.describing_locus(ss, np.sqrt(11.0), 5.0)
        assert dl.L_values[0] == -1.0 + 0.0j

    def test_direction_linear_in_theta_squared(self, second_order):
        _, ss = second_order
        dl = sfs.describing_locus(ss, np.sqrt(11.0), 5.0, theta_max=0.5)
        th = dl.theta_grid[50]
        fd = (dl.L_values[50] - dl.L_values[0]) / th**2
        assert abs(fd - dl.locus_direction) < 1e-10 * max(1.0, abs(dl.locus_direction))

    def test_transversal_at_critical_point(self, second_order):
        _, ss = second_order
        dl = sfs.describing_locus(ss, np.sqrt(11.0), 5.0)
        assert not dl.is_tangential
        # at the critical pair, gamma0 * G(j w0) = -1
        assert dl.locus_direction.real < 0
        assert abs(dl.locus_direction.imag) < 1e-9

    def test_pole_on_axis_rejected(self):
        # (s+1)(s^2+1): poles at +/- j
        ss = realize(parse_plant([1], [1, 1, 1]))
        with pytest.raises(RelayOscError, match="pole"):
            sfs.describing_locus(ss, 1.0, 2.0)


class TestHyperbolicity:
    def test_no_crossing_plant_certified(self):
        ss = realize(parse_plant([1], [1, 2]))  # 1/(s+1)^2, double pole
        res = sfs.hyperbolicity_check(ss, 1e3, 400)
        assert res.hurwitz_everywhere
        assert res.witness_gain is None

    def test_second_order_witness_near_five(self, second_order):
        _, ss = second_order
        res = sfs.hyperbolicity_check(ss, 1e3, 400)
        assert not res.hurwitz_everywhere
        assert res.witness_gain == pytest.approx(5.0, abs=1e-3)
        assert max(z.real for z in res.witness_eigenvalues) >= 0

    def test_gain_zero_endpoint_is_open_loop(self, second_order):
        _, ss = second_order
        lam = sfs.closed_loop_eigenvalues(ss, 0.0)
        assert np.all(lam.real < 0)

    def test_coefficient_envelope(self):
        # max_z z / cosh(z)^2 = 0.4478 (1-D maximization oracle), so
        # gamma / cosh(gamma y)^2 <= 0.4478 / |y| with equality nowhere
        res = minimize_scalar(lambda z: -z / np.cosh(z) ** 2,
                              bounds=(0.01, 5.0), method="bounded",
                              options={"xatol": 1e-12})
        peak = -res.fun
        assert peak == pytest.approx(0.4478, abs=1e-4)
        rng = np.random.default_rng(23)
        for _ in range(200):
            gamma = rng.uniform(0.1, 1e4)
            y = rng.uniform(1e-4, 3.0)
            val = gamma / np.cosh(min(gamma * y, 300.0)) ** 2
            assert val <= peak / y + 1e-12
            assert gamma / np.cosh(0.0) ** 2 == gamma  # supremum at y = 0
