import csv
import math

import numpy as np
import pytest

from ifsthermo import holonomic as H
from ifsthermo import markov as M
from ifsthermo import transfer as T
from ifsthermo.grid import Grid
from ifsthermo.ifs import MapSystem, NormalizedIFS

from conftest import DYADIC, REFLECT, potential


def f_x(p):
    return p[:, 0]


class TestDiscreteDifferential:
    def test_constant(self):
        sys_ = MapSystem(Grid(1, 9), DYADIC)
        df = H.discrete_differential(sys_, lambda p: np.full(len(p), 3.0))
        assert np.all(df(np.array([[0.1], [0.7]]), np.array([0, 1])) == 0)

    def test_reflection(self):
        df = H.discrete_differential(MapSystem(Grid(1, 9), REFLECT), f_x)
        x = np.array([[0.1], [0.3]])
        assert np.allclose(df(x, [0, 0]), 0.0)
        assert np.allclose(df(x, [1, 1]), 1 - 2 * x[:, 0])

    def test_dyadic(self):
        df = H.discrete_differential(MapSystem(Grid(1, 9), DYADIC), f_x)
        x = np.array([[0.2], [0.6]])
        assert np.allclose(df(x, [0, 0]), -x[:, 0] / 2)
        assert np.allclose(df(x, [1, 1]), (1 - x[:, 0]) / 2)


class TestEmpirical:
    def test_single_atom(self):
        nifs = NormalizedIFS(Grid(1, 9), DYADIC, ["1/2", "1/2"])
        orbit = M.chaos_game(nifs, [0.8], 1, seed=0)
        emp = H.empirical_holonomic(orbit, nifs)
        i = orbit.indices[0]
        want = abs(nifs.image([[0.8]], i)[0, 0] - 0.8)
        assert H.holonomy_defect(emp, {"x": f_x}) == pytest.approx(want)

    @pytest.mark.parametrize("N", [1, 17, 5000])
    def test_defect_identity(self, N):
        nifs = NormalizedIFS(Grid(1, 33), DYADIC, ["x1/2 + 1/4", "3/4 - x1/2"])
        orbit = M.chaos_game(nifs, [0.4], N, seed=N)
        emp = H.empirical_holonomic(orbit, nifs)
        for f in M.test_dictionary(1).values():
            lhs = emp.integrate(H.discrete_differential(nifs, f))
            rhs = (f(orbit.points[-1:])[0] - f(orbit.points[:1])[0]) / N
            assert abs(lhs - rhs) <= 1e-12
            assert abs(lhs) <= 2 * M.sup_over_grid(f, nifs.grid) / N + 1e-15

    def test_conditionals_near_half(self):
        nifs = NormalizedIFS(Grid(1, 17), DYADIC, ["1/2", "1/2"])
        orbit = M.chaos_game(nifs, [0.5], 100_000, seed=5)
        d = H.empirical_holonomic(orbit, nifs).disintegration
        counts = d.mass * 100_000
        assert np.allclose(d.conditional.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.abs(d.conditional[:, 0] - 0.5) <= 4 / np.sqrt(counts))


class TestLift:
    def test_reflection_dirac(self):
        nifs = NormalizedIFS(Grid(1, 9), REFLECT, ["1/2", "1/2"])
        mu_hat = H.holonomic_lift(nifs, M.ParticleMeasure.dirac([0.5]))
        assert sorted(zip(mu_hat.indices.tolist(), mu_hat.weights.tolist())) == [(0, 0.5), (1, 0.5)]
        assert H.holonomy_defect(mu_hat) == 0.0

    def test_dyadic_lebesgue(self):
        nifs = NormalizedIFS(Grid(1, 1025), DYADIC, ["1/2", "1/2"])
        mu = M.hutchinson_fixed_point(nifs).measure
        assert H.holonomy_defect(H.holonomic_lift(nifs, mu)) <= 1e-3

    def test_degenerate(self):
        nifs = NormalizedIFS(Grid(1, 9), [["x1/2"]], ["1"])
        mu_hat = H.holonomic_lift(nifs, M.ParticleMeasure.dirac([0.0]))
        assert len(mu_hat) == 1 and H.holonomy_defect(mu_hat) == 0.0

    def test_warns_if_not_fixed(self):
        nifs = NormalizedIFS(Grid(1, 9), DYADIC, ["1/2", "1/2"])
        with pytest.warns(RuntimeWarning):
            H.holonomic_lift(nifs, M.ParticleMeasure.dirac([0.9]))

    def test_conditionals_equal_probabilities(self, dyadic_exp_state):
        st = dyadic_exp_state
        d = st.holonomic.disintegration
        p = st.normalized.weights_at(d.centroids)
        assert np.max(np.abs(d.conditional - p.T)) < 1e-3


class TestEntropies:
    def test_shannon_conventions(self):
        assert H.shannon([0.5, 0.5]) == pytest.approx(math.log(2))
        assert H.shannon([1.0, 0.0]) == 0.0
        assert H.cross_entropy([1.0, 0.0], [0.5, 0.0]) == pytest.approx(math.log(2))

    def test_uniform_conditionals(self):
        nifs = NormalizedIFS(Grid(1, 65), [["x1/3"], ["x1/3 + 1/3"], ["x1/3 + 2/3"]], ["1/3"] * 3)
        mu = M.hutchinson_fixed_point(nifs).measure
        assert H.average_entropy(H.holonomic_lift(nifs, mu)) == pytest.approx(math.log(3), abs=1e-12)

    def test_deterministic(self):
        nifs = NormalizedIFS(Grid(1, 9), [["x1/2"], ["x1/2 + 1/2"]], ["1", "0"])
        mu_hat = H.holonomic_lift(nifs, M.ParticleMeasure.dirac([0.0]))
        assert H.average_entropy(mu_hat) == 0.0

    def test_constant_biased_coin(self):
        nifs = NormalizedIFS(Grid(1, 257), DYADIC, ["0.3", "0.7"])
        mu = M.hutchinson_fixed_point(nifs).measure
        h = H.average_entropy(H.holonomic_lift(nifs, mu))
        assert h == pytest.approx(-(0.3 * math.log(0.3) + 0.7 * math.log(0.7)), abs=1e-12)
        assert h == pytest.approx(0.610864, abs=1e-6)

    def test_variational_with_one(self, dyadic_exp_state):
        assert H.variational_entropy_upper(dyadic_exp_state.holonomic, [lambda p: np.ones(len(p))]) \
            == pytest.approx(math.log(2), abs=1e-15)

    def test_variational_with_optimal(self, dyadic_exp, dyadic_exp_state):
        st = dyadic_exp_state
        g = T.optimal_function(dyadic_exp, st.pair)
        h_a, h_v = H.entropy_interval(st.holonomic, {"one": lambda p: np.ones(len(p)), "g*": g})
        assert h_a - 1e-9 <= h_v <= h_a + 1e-4

    def test_upper_never_below_h_a(self, dyadic_exp_state):
        st = dyadic_exp_state
        funcs = [lambda p: 1 + p[:, 0], lambda p: np.exp(2 * p[:, 0]), lambda p: 2 + np.sin(5 * p[:, 0])]
        assert H.variational_entropy_upper(st.holonomic, funcs) >= st.entropy - 1e-9

    def test_rejects_nonpositive(self, dyadic_exp_state):
        with pytest.raises(ValueError):
            H.variational_entropy_upper(dyadic_exp_state.holonomic, [lambda p: p[:, 0]])
        with pytest.raises(ValueError):
            H.variational_entropy_upper(dyadic_exp_state.holonomic, [])

    def test_disintegration_csv(self, tmp_path, dyadic_exp_state):
        st = dyadic_exp_state
        st.holonomic.disintegration.to_csv(tmp_path / "d.csv", st.holonomic.system.grid)
        rows = list(csv.reader(open(tmp_path / "d.csv")))
        assert rows[0] == ["cell_x1", "mass", "nu_0", "nu_1"]
        assert sum(float(r[1]) for r in rows[1:]) == pytest.approx(1.0)
