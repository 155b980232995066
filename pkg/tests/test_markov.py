import csv
import math

import numpy as np
import pytest

from ifsthermo import markov as M
from ifsthermo import transfer as T
from ifsthermo.grid import Grid
from ifsthermo.ifs import NormalizedIFS

from conftest import DYADIC, REFLECT, fixture_ifs, potential, weighted

CANTOR = [["x1/3"], ["x1/3 + 2/3"]]


def random_measure(rng, k=40, dim=1):
    return M.ParticleMeasure(rng.random((k, dim)), rng.random(k))


class TestParticleMeasure:
    def test_basics(self):
        mu = M.ParticleMeasure([[0.2], [0.6]], [1.0, 3.0])
        assert mu.mass == 4.0 and len(mu) == 2
        assert mu.normalized().mass == pytest.approx(1.0, abs=1e-12)
        assert mu.moment(1) == pytest.approx(0.5)
        assert mu.integrate(lambda p: p[:, 0]) == pytest.approx(2.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            M.ParticleMeasure([[0.1]], [-1.0])

    def test_csv(self, tmp_path):
        M.ParticleMeasure.dirac([0.5, 0.25]).to_csv(tmp_path / "m.csv")
        rows = list(csv.reader(open(tmp_path / "m.csv")))
        assert rows == [["x1", "x2", "weight"], ["0.5", "0.25", "1.0"]]


class TestMarkovApply:
    def test_reflection_fixed_point(self):
        ifs = weighted(REFLECT, ["1", "1"])
        out = M.markov_apply(ifs, M.ParticleMeasure.dirac([0.5]))
        assert out.mass == 2.0
        assert np.allclose(out.points, 0.5)

    def test_dyadic_from_zero(self):
        ifs = weighted(DYADIC, ["1/2", "1/2"])
        out = M.markov_apply(ifs, M.ParticleMeasure.dirac([0.0]), compaction=False)
        assert sorted(out.points[:, 0]) == [0.0, 0.5]
        assert np.allclose(out.weights, 0.5) and out.mass == 1.0

    def test_mass_identity(self, rng):
        ifs = potential(DYADIC, "exp(x1)")
        for _ in range(100):
            mu = random_measure(rng)
            lhs = M.markov_apply(ifs, mu).mass
            rhs = mu.integrate(lambda p: ifs.weights_at(p).sum(axis=0))
            assert abs(lhs - rhs) <= 1e-12 * rhs

    def test_duality_without_compaction(self, rng):
        ifs = potential(DYADIC, "exp(x1)")
        mu = random_measure(rng)
        pushed = M.markov_apply(ifs, mu, compaction=False)
        for f in M.test_dictionary(1).values():
            bf = mu.integrate(lambda p: sum(ifs.weights_at(p)[i] * f(ifs.image(p, i)) for i in range(2)))
            assert pushed.integrate(f) == pytest.approx(bf, rel=1e-12, abs=1e-14)

    def test_duality_with_compaction(self, rng):
        ifs = potential(DYADIC, "exp(x1)")
        mu = random_measure(rng, k=500)
        exact = M.markov_apply(ifs, mu, compaction=False)
        binned = M.markov_apply(ifs, mu)
        assert len(binned) <= ifs.grid.size
        h = ifs.grid.spacing
        for f in M.test_dictionary(1).values():
            # centroids keep first moments; curvature costs at most h^2 * |f''| / 2 per unit mass
            assert abs(binned.integrate(f) - exact.integrate(f)) <= 5 * h * h * exact.mass

    def test_mass_bounds_one_step(self, rng):
        ifs = potential(DYADIC, "exp(x1)")
        lo, hi = 2 * math.exp(0), 2 * math.exp(1)
        for _ in range(20):
            m = M.markov_apply(ifs, random_measure(rng).normalized()).mass
            assert lo <= m <= hi


class TestEigenMeasure:
    def test_reflection_symmetric(self):
        em = M.eigen_measure(weighted(REFLECT, ["1", "1"]))
        assert em.converged and em.rho == pytest.approx(2.0, abs=1e-12)
        assert em.residual < 1e-10
        pts = np.sort(em.measure.points[:, 0])
        assert np.allclose(pts, np.sort(1 - pts))

    def test_single_contraction(self):
        em = M.eigen_measure(weighted([["x1/2"]], ["1"]), max_iter=200, tol=1e-12)
        assert em.rho == pytest.approx(1.0)
        assert em.measure.integrate(lambda p: p[:, 0]) < 1e-3

    def test_dyadic_exp_matches_spectral_radius(self, dyadic_exp, dyadic_exp_pair):
        em = M.eigen_measure(dyadic_exp)
        assert em.converged
        assert abs(em.rho - dyadic_exp_pair.rho) / dyadic_exp_pair.rho <= 1e-4
        lo, hi = em.bounds
        assert lo <= em.rho <= hi
        assert em.rho <= dyadic_exp_pair.rho_hi + 1e-8

    def test_non_convergence_flagged(self, dyadic_exp):
        em = M.eigen_measure(dyadic_exp, max_iter=3)
        assert not em.converged and "did not settle" in em.message


class TestHutchinson:
    def test_lebesgue_moments(self):
        nifs = NormalizedIFS(Grid(1, 1025), DYADIC, ["1/2", "1/2"])
        mu = M.hutchinson_fixed_point(nifs).measure
        for k, want in ((1, 1 / 2), (2, 1 / 3), (3, 1 / 4)):
            assert abs(mu.moment(k) - want) <= 1e-3

    def test_reflection_dirac(self):
        nifs = NormalizedIFS(Grid(1, 33), REFLECT, ["1/2", "1/2"])
        res = M.hutchinson_fixed_point(nifs, start=M.ParticleMeasure.dirac([0.5]))
        assert res.converged and np.allclose(res.measure.points, 0.5) and res.measure.mass == 1.0

    def test_cantor_mean(self):
        nifs = NormalizedIFS(Grid(1, 1025), CANTOR, ["1/2", "1/2"])
        mu = M.hutchinson_fixed_point(nifs).measure
        assert abs(mu.moment(1) - 0.5) <= 1e-3
        # second moment of the Cantor measure is 3/8
        assert abs(mu.moment(2) - 0.375) <= 1e-3


class TestChaosGame:
    def test_degenerate_orbit(self):
        nifs = NormalizedIFS(Grid(1, 17), [["x1/2"]], ["1"])
        orbit = M.chaos_game(nifs, [1.0], 6)
        assert orbit.points[:, 0].tolist() == [1, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625]
        assert np.all(orbit.indices == 0)

    def test_lebesgue_mean(self):
        nifs = NormalizedIFS(Grid(1, 65), DYADIC, ["1/2", "1/2"])
        N = 200_000
        orbit = M.chaos_game(nifs, [0.3], N, seed=7)
        mean = orbit.empirical().moment(1)
        assert abs(mean - 0.5) <= 3 * math.sqrt(1 / 12 / N) * 3  # orbit correlation inflates the variance

    def test_seed_reproducible(self):
        nifs = NormalizedIFS(Grid(1, 65), DYADIC, ["x1/2 + 1/4", "3/4 - x1/2"])
        a = M.chaos_game(nifs, [0.5], 1000, seed=3)
        b = M.chaos_game(nifs, [0.5], 1000, seed=3)
        c = M.chaos_game(nifs, [0.5], 1000, seed=4)
        assert np.array_equal(a.points, b.points) and np.array_equal(a.indices, b.indices)
        assert not np.array_equal(a.indices, c.indices)

    def test_probabilities_followed(self):
        nifs = NormalizedIFS(Grid(1, 9), REFLECT, ["1/4", "3/4"])
        orbit = M.chaos_game(nifs, [0.2], 100_000, seed=1)
        assert abs(orbit.indices.mean() - 0.75) < 0.01

    def test_matches_hutchinson(self):
        nifs = NormalizedIFS(Grid(1, 1025), CANTOR, ["1/2", "1/2"])
        fixed = M.hutchinson_fixed_point(nifs).measure
        emp = M.chaos_game(nifs, [0.0], 200_000, seed=11).empirical()
        for f in M.test_dictionary(1).values():
            assert abs(emp.integrate(f) - fixed.integrate(f)) < 0.01

    def test_bad_input(self):
        nifs = NormalizedIFS(Grid(1, 9), DYADIC, ["1/2", "1/2"])
        with pytest.raises(ValueError):
            M.chaos_game(nifs, [0.5], 0)
        with pytest.raises(ValueError):
            M.chaos_game(nifs, [0.5, 0.5], 10)

    def test_csv(self, tmp_path):
        nifs = NormalizedIFS(Grid(2, 9), [["x1/2", "x2/2"], ["x1/2 + 1/2", "x2"]], ["1/2", "1/2"])
        orbit = M.chaos_game(nifs, [0.5, 0.5], 5)
        orbit.to_csv(tmp_path / "o.csv")
        rows = list(csv.reader(open(tmp_path / "o.csv")))
        assert rows[0] == ["step", "i", "x1", "x2"] and len(rows) == 6
