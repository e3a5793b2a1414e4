import time

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from phonon_stats.hierarchy import (
    HierarchyState,
    SingularSystem,
    SparseGenerator,
    TruncationDiverged,
    ZeroMeanPhonon,
    assemble_generator,
    auto_truncate,
    observables,
    solve_point,
    solve_steady_state,
    tail_mass,
)
from phonon_stats.model import Mode, dress

from conftest import fig1_params


def _block(gen, fam_row, fam_col):
    n1 = gen.n_max + 1
    m = gen.matrix.toarray()
    return m[(fam_row - 1) * n1 : fam_row * n1, (fam_col - 1) * n1 : fam_col * n1]


def _birth_death(n_max, kappa, nbar):
    """Thermal damped-oscillator population generator, built from transition rates."""
    up = lambda n: 2 * kappa * nbar * (n + 1)  # n -> n + 1
    down = lambda n: 2 * kappa * (1 + nbar) * n  # n -> n - 1
    q = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        if n < n_max:
            q[n + 1, n] += up(n)
            q[n, n] -= up(n)
        if n > 0:
            q[n - 1, n] += down(n)
            q[n, n] -= down(n)
    return q


def _state_from_pops(pops):
    p = np.zeros((6, len(pops)), dtype=complex)
    p[0] = pops
    return HierarchyState(len(pops) - 1, p)


class TestAssembly:
    @pytest.mark.parametrize("closure", ["fock", "hard"])
    @pytest.mark.parametrize("mode", list(Mode))
    def test_row_sparsity(self, closure, mode):
        p = fig1_params(kappa=0.3)
        gen = assemble_generator(dress(p, mode), p, 20, closure)
        assert gen.dim == 6 * 21
        nnz = np.diff(gen.matrix.indptr)
        assert nnz.max() <= 13

    def test_g0_decouples_and_gives_birth_death(self):
        p = fig1_params(g=0.0, kappa=0.7, nbar=0.3)
        gen = assemble_generator(dress(p), p, 15)
        assert np.all(_block(gen, 1, 3) == 0) and np.all(_block(gen, 1, 5) == 0)
        assert np.all(_block(gen, 3, 1) == 0) and np.all(_block(gen, 5, 1) == 0)
        np.testing.assert_allclose(_block(gen, 1, 1).real, _birth_death(15, 0.7, 0.3), atol=1e-14)
        assert np.all(_block(gen, 1, 1).imag == 0)

    def test_secular_drops_beta(self):
        p = fig1_params()
        f = dress(p, Mode.SECULAR)
        gen = assemble_generator(f, p, 12)
        # the 3 <-> 4 coupling is -i(beta(2n-1) - delta) = i delta for every n
        np.testing.assert_allclose(np.diag(_block(gen, 3, 4)), 1j * f.delta_eff * np.ones(13), rtol=1e-15)
        np.testing.assert_allclose(np.diag(_block(gen, 5, 6))[:-1], 1j * f.delta_eff * np.ones(12), rtol=1e-15)

    def test_printed_coefficients_in_bulk(self):
        # spot-check row n = 3 against the printed right-hand sides
        p = fig1_params(kappa=0.4, nbar=0.2)
        f = dress(p, Mode.BEYOND)
        gen = assemble_generator(f, p, 10, "hard")
        n, cpl = 3, 0.5 * p.g * f.sin2theta
        ka, kn = p.kappa * (1 + p.nbar), p.kappa * p.nbar
        gc = f.gamma_plus + f.gamma_minus + 4 * f.gamma_zero
        b33, b34, b35 = (_block(gen, 3, j) for j in (3, 4, 5))
        assert b33[n, n] == pytest.approx(-gc - ka * (2 * n - 1) - kn * (2 * n + 1))
        assert b33[n, n + 1] == pytest.approx(2 * ka * (n + 1))
        assert b33[n, n - 1] == pytest.approx(2 * kn * n)
        assert b35[n, n] == pytest.approx(-2 * ka)
        assert b34[n, n] == pytest.approx(-1j * (f.beta * (2 * n - 1) - f.delta_eff))
        b31, b32 = _block(gen, 3, 1), _block(gen, 3, 2)
        assert b31[n, n] == pytest.approx(1j * cpl * n) and b31[n, n - 1] == pytest.approx(-1j * cpl * n)
        assert b32[n, n] == pytest.approx(-1j * cpl * n) and b32[n, n - 1] == pytest.approx(-1j * cpl * n)
        b51, b52, b53 = (_block(gen, 5, j) for j in (1, 2, 3))
        assert b51[n, n + 1] == pytest.approx(1j * cpl * (n + 1))
        assert b52[n, n + 1] == pytest.approx(-1j * cpl * (n + 1))
        assert b53[n, n] == pytest.approx(2 * kn)
        b21 = _block(gen, 2, 1)
        assert b21[n, n] == pytest.approx(-2 * (f.gamma_plus - f.gamma_minus))

    def test_hard_closure_keeps_top_pumping_loss(self):
        p = fig1_params(kappa=1.0, nbar=0.5)
        f = dress(p)
        hard, fock = (assemble_generator(f, p, 6, c) for c in ("hard", "fock"))
        assert _block(hard, 1, 1)[6, 6] == pytest.approx(-2 * 1.5 * 6 - 2 * 0.5 * 7)
        assert _block(fock, 1, 1)[6, 6] == pytest.approx(-2 * 1.5 * 6)

    def test_fock_closure_is_trace_preserving(self, rng):
        p = fig1_params(kappa=0.2, nbar=0.3)
        gen = assemble_generator(dress(p), p, 9)
        # sum_n dP1/dt reduces to i*cpl*sum_n (P3_n - P5_n), which vanishes when P5_n = P3_{n+1}, P3_0 = P5_N = 0
        x = rng.normal(size=10) + 1j * rng.normal(size=10)
        state = np.zeros((6, 10), dtype=complex)
        state[0] = rng.normal(size=10)
        state[1] = rng.normal(size=10)
        state[2, 1:] = x[:9]
        state[4, :9] = x[:9]
        dp = gen.apply(HierarchyState(9, state)).reshape(6, 10)
        assert abs(dp[0].sum()) < 1e-12
        # general vector: the family-1 sum is exactly the coupling form
        v = rng.normal(size=(6, 10)) + 1j * rng.normal(size=(6, 10))
        dp = gen.apply(HierarchyState(9, v)).reshape(6, 10)
        cpl = dress(p).coupling
        assert dp[0].sum() == pytest.approx(1j * cpl * (v[2].sum() - v[4].sum()), abs=1e-12)

    def test_invalid_arguments(self, fig1):
        f = dress(fig1)
        with pytest.raises(ValueError):
            assemble_generator(f, fig1, 0)
        with pytest.raises(ValueError):
            assemble_generator(f, fig1, 4, "reflecting")


class TestSteadyState:
    def test_thermal_chain(self):
        p = fig1_params(g=0.0, nbar=0.04)
        state, residual = solve_steady_state(assemble_generator(dress(p), p, 30))
        n = np.arange(31)
        expected = 0.04**n / 1.04 ** (n + 1)
        np.testing.assert_allclose(state.populations, expected, atol=1e-15, rtol=1e-12)
        assert np.abs(state.p[2:]).max() < 1e-15
        f = dress(p)
        # decoupled inversion: P2 = -(g+ - g-)/(g+ + g-) P1
        ratio = -(f.gamma_plus - f.gamma_minus) / (f.gamma_plus + f.gamma_minus)
        np.testing.assert_allclose(state.family(2).real, ratio * expected, atol=1e-15)
        assert residual < 1e-14

    def test_thermal_chain_matches_independent_null_space(self):
        p = fig1_params(g=0.0, kappa=0.3, nbar=0.7)
        state, _ = solve_steady_state(assemble_generator(dress(p), p, 25))
        ns = scipy.linalg.null_space(_birth_death(25, 0.3, 0.7))
        ref = ns[:, 0] / ns[:, 0].sum()
        np.testing.assert_allclose(state.populations, ref, atol=1e-13)

    def test_overdamped_cavity_empties(self):
        p = fig1_params(kappa=1e3, nbar=0.0)
        state, _ = solve_point(dress(p), p, 16)
        assert state.populations[0] > 1 - 1e-2

    def test_normalization_and_positivity(self):
        p = fig1_params(kappa=5e-3)
        state, obs = auto_truncate(dress(p), p)
        pops = state.populations
        assert abs(pops.sum() - 1) < 1e-12
        assert np.abs(state.family(1).imag).max() < 1e-12
        assert pops.min() > -1e-10
        assert np.all(np.abs(state.family(2)) <= pops + 1e-10)

    def test_singular_system(self):
        gen = SparseGenerator(3, sp.csr_matrix((24, 24), dtype=complex))
        with pytest.raises(SingularSystem):
            solve_steady_state(gen)

    @pytest.mark.parametrize("kappa", [5e-3, 0.3, 5.0])
    def test_iterative_matches_direct(self, kappa):
        p = fig1_params(kappa=kappa)
        gen = assemble_generator(dress(p), p, 64)
        a, _ = solve_steady_state(gen)
        b, res = solve_steady_state(gen, solver="iterative")
        np.testing.assert_allclose(b.p, a.p, atol=1e-9)
        assert res < 1e-9

    def test_unknown_solver(self, fig1):
        with pytest.raises(ValueError):
            solve_steady_state(assemble_generator(dress(fig1), fig1, 4), solver="qr")


class TestObservables:
    def test_thermal(self):
        n = np.arange(400)
        obs = observables(_state_from_pops(0.04**n / 1.04 ** (n + 1)))
        assert obs.n_mean == pytest.approx(0.04, abs=1e-15)
        assert obs.g2 == pytest.approx(2.0, abs=1e-12)

    def test_fock_two(self):
        pops = np.zeros(6)
        pops[2] = 1.0
        obs = observables(_state_from_pops(pops))
        assert obs.n_mean == 2.0 and obs.g2 == 0.5

    def test_poissonian(self):
        from scipy.stats import poisson

        obs = observables(_state_from_pops(poisson.pmf(np.arange(41), 0.5)))
        assert obs.g2 == pytest.approx(1.0, abs=1e-10)
        assert obs.n_mean == pytest.approx(0.5, abs=1e-12)

    def test_zero_mean(self):
        pops = np.zeros(5)
        pops[0] = 1.0
        with pytest.raises(ZeroMeanPhonon):
            observables(_state_from_pops(pops))


class TestAutoTruncate:
    def test_thermal_converges_at_first_size(self):
        p = fig1_params(g=0.0, nbar=0.04)
        state, obs = auto_truncate(dress(p), p, tol=1e-8)
        # geometric tail (nbar/(1+nbar))^(N/2) is below 1e-8 already for N = 16
        assert (0.04 / 1.04) ** 9 < 1e-8
        assert obs.n_max_used <= 16
        assert obs.n_mean == pytest.approx(0.04, abs=1e-10)
        assert obs.g2 == pytest.approx(2.0, abs=1e-9)
        assert tail_mass(state) < 1e-8

    def test_lasing_point_needs_large_truncation(self):
        p = fig1_params(kappa=5e-3)
        f = dress(p)
        state, obs = auto_truncate(f, p)
        assert obs.n_mean > 10
        assert obs.n_max_used >= 4 * obs.n_mean
        # plateau: a larger truncation no longer moves the observables
        _, bigger = solve_point(f, p, 2 * obs.n_max_used)
        assert abs(bigger.g2 - obs.g2) / obs.g2 < 1e-8
        assert abs(bigger.n_mean - obs.n_mean) / obs.n_mean < 1e-8
        pops = state.populations
        assert pops[-1] < 1e-3 * pops.max()

    def test_tolerance_refinement_is_stable(self):
        p = fig1_params(kappa=0.3)
        f = dress(p)
        a = auto_truncate(f, p, tol=1e-8)[1]
        b = auto_truncate(f, p, tol=1e-10)[1]
        assert float(f"{a.g2:.8g}") == float(f"{b.g2:.8g}")

    def test_diverged(self):
        p = fig1_params(kappa=5e-3)
        with pytest.raises(TruncationDiverged):
            auto_truncate(dress(p), p, n_cap=32)

    def test_closures_agree_once_converged(self):
        p = fig1_params(kappa=0.05)
        f = dress(p)
        a = auto_truncate(f, p, closure="fock")[1]
        b = auto_truncate(f, p, closure="hard")[1]
        assert b.g2 == pytest.approx(a.g2, rel=1e-7)
        assert b.n_mean == pytest.approx(a.n_mean, rel=1e-7)

    def test_rejects_bad_tol(self, fig1):
        with pytest.raises(ValueError):
            auto_truncate(dress(fig1), fig1, tol=0.0)


class TestSteadyStateProperties:
    @settings(max_examples=50, deadline=None)
    @given(
        two_omega=st.floats(10, 60),
        ratio=st.floats(-1.5, 1.5),
        kappa=st.floats(1e-2, 10),
        nbar=st.floats(0, 1),
        g=st.floats(0.5, 20),
        mode=st.sampled_from(list(Mode)),
    )
    def test_reality_pattern(self, two_omega, ratio, kappa, nbar, g, mode):
        p = fig1_params(two_omega=two_omega, detuning_ratio=ratio, kappa=kappa, nbar=nbar, g=g)
        state, _ = solve_point(dress(p, mode), p, 24)
        for fam in (1, 2, 4, 6):
            assert np.abs(state.family(fam).imag).max() < 1e-9
        for fam in (3, 5):
            assert np.abs(state.family(fam).real).max() < 1e-9
        assert abs(state.populations.sum() - 1) < 1e-12
        assert state.populations.min() > -1e-10


def test_single_point_speed():
    p = fig1_params(kappa=5e-3)
    f = dress(p)
    t0 = time.perf_counter()
    solve_point(f, p, 200)
    assert time.perf_counter() - t0 < 1.0
