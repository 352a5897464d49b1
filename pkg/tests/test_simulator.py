import math

import numpy as np
import pytest
from scipy import sparse
from scipy.linalg import expm
from scipy.stats import ks_2samp

from cwmdp.errors import ConfigurationError, DomainError
from cwmdp.model import ModelParams, find_fixed_points, meanfield_flow
from cwmdp.simulator import (ChainState, ScalingRegime, exit_time_diagnostic, jump_rates,
                             sample_transient, simulate_chain, simulate_ensemble,
                             simulate_rescaled, transient_law)

CW = ModelParams.curie_weiss


def test_jump_rates_examples():
    assert jump_rates(ChainState(10, 1.0), CW(0.7))[0] == 0.0
    assert jump_rates(ChainState(10, -1.0), CW(0.7))[1] == 0.0
    up, down = jump_rates(ChainState(4, 0.5), CW(1.0))
    assert up == pytest.approx(math.exp(0.5), rel=1e-15)
    assert down == pytest.approx(3 * math.exp(-0.5), rel=1e-15)


def test_chain_state_must_be_on_grid():
    with pytest.raises(DomainError):
        ChainState(10, 0.15)
    assert ChainState(10, 0.2).index == 6


def test_single_spin_first_event():
    beta = 0.8
    firsts = []
    for r in range(4000):
        s = simulate_chain(CW(beta), 1, 1.0, 50.0, seed=9, replica=r)
        assert s.values[1] == -1.0
        firsts.append(s.times[1])
    # holding time is exponential with rate e^{-beta}
    mean = math.exp(beta)
    assert abs(np.mean(firsts) - mean) < 4 * mean / math.sqrt(len(firsts))


def test_zero_horizon():
    s = simulate_chain(CW(1.0), 10, 0.2, 0.0, seed=1)
    assert s.n_events == 0
    assert s.times.tolist() == [0.0]
    assert s.terminal == pytest.approx(0.2)


def test_grid_closure_and_jump_sizes():
    regime = ScalingRegime.mdp(0, 0.0)
    n = 1000
    s = simulate_rescaled(CW(0.5), regime, n, 0.0, 2.0, seed=4)
    step = 2 * regime.b(n) / n
    assert np.all(np.diff(s.times) > 0)
    assert np.allclose(np.abs(np.diff(s.values)), step, rtol=1e-12)
    x = s.values / regime.b(n)
    j = n * (1 + x) / 2
    assert np.allclose(j, np.round(j), atol=1e-9)
    clt = ScalingRegime.clt(1, 0.0)
    s = simulate_rescaled(CW(1.0), clt, 10_000, 0.0, 0.01, seed=4)
    assert np.allclose(np.abs(np.diff(s.values)), 2 * 10_000 ** (-3 / 4), rtol=1e-12)


def test_boundary_is_never_crossed():
    s = simulate_chain(CW(3.0), 5, 1.0, 200.0, seed=2)
    assert s.values.max() <= 1.0 and s.values.min() >= -1.0


def test_determinism_independent_of_ensemble_size():
    regime = ScalingRegime.clt(0, 0.0)
    a = simulate_ensemble(CW(0.5), regime, 500, 0.0, 1.0, 5, seed=77, record_events=True)
    b = simulate_ensemble(CW(0.5), regime, 500, 0.0, 1.0, 12, seed=77, record_events=True)
    for x, y in zip(a, b):
        assert np.array_equal(x.times, y.times)
        assert np.array_equal(x.values, y.values)
    c = simulate_rescaled(CW(0.5), regime, 500, 0.0, 1.0, seed=77, replica=3)
    assert np.array_equal(c.values, a[3].values)


def test_identity_rescaling_matches_raw_chain():
    regime = ScalingRegime(kind="mdp", k=0, m=0.0, b_exponent=0.0, b_scale=1.0, strict=False)
    a = simulate_rescaled(CW(1.2), regime, 40, 0.3, 3.0, seed=5)
    b = simulate_chain(CW(1.2), 40, 0.3, 3.0, seed=5)
    assert np.array_equal(a.times, b.times)
    assert np.allclose(a.values, b.values, atol=1e-15)


def test_initial_rounding_ties_toward_m():
    regime = ScalingRegime.clt(0, 0.0)
    # n = 4: grid spacing in rescaled units 2/sqrt(4) = 1; 0.5 is a tie
    s = simulate_rescaled(CW(0.5), regime, 4, 0.5, 0.0, seed=1)
    assert s.y0 == 0.0
    s = simulate_rescaled(CW(0.5), regime, 4, -0.5, 0.0, seed=1)
    assert s.y0 == 0.0


def test_admissibility_rejected():
    with pytest.raises(ConfigurationError):
        ScalingRegime.mdp(0, 0.0, b_exponent=0.6)
    with pytest.raises(ConfigurationError):
        ScalingRegime.mdp(0, 0.0).check(10)
    with pytest.raises(ConfigurationError):
        simulate_rescaled(CW(0.5), ScalingRegime.mdp(0, 0.0), 10, 0.0, 1.0, seed=1)
    with pytest.raises(ConfigurationError):
        ScalingRegime.mdp_temp(-1.0)


def test_temperature_rescaled_effective_beta():
    regime = ScalingRegime.clt_temp(2.0)
    p = regime.effective_params(None, 10_000)
    assert p.effective_beta == pytest.approx(1 + 2.0 / 100.0)


def test_clock_consistency_band():
    for beta in (0.5, 1.0, 2.0):
        regime = ScalingRegime.clt(0, 0.0) if beta != 2.0 else \
            ScalingRegime.clt(0, find_fixed_points(CW(2.0)).positive_root())
        s = simulate_rescaled(CW(beta), regime, 2000, 0.0, 1.0, seed=3, record_events=False)
        ratio = s.n_events / (1.0 * regime.time_dilation(2000) * 2000)
        assert 0.1 <= ratio <= 10


def test_exit_time_diagnostic_edge_cases():
    regime = ScalingRegime.clt(0, 0.0)
    ens = simulate_ensemble(CW(0.5), regime, 100, 1.0, 0.5, 100, seed=2)
    assert exit_time_diagnostic(ens, 1e9) == 0.0
    assert exit_time_diagnostic(ens, 0.0) == 1.0
    with pytest.raises(ConfigurationError):
        exit_time_diagnostic(ens[:50], 1.0)


def test_transient_law_matches_matrix_exponential():
    n, T = 30, 0.7
    p = CW(1.3)
    regime = ScalingRegime(kind="mdp", k=0, m=0.0, b_exponent=0.0, strict=False)
    y, law = transient_law(p, regime, n, 0.2, T)
    x = (2.0 * np.arange(n + 1) - n) / n
    u = 1.3 * x
    Q = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        if j < n:
            Q[j, j + 1] = (n - j) * math.exp(u[j])
        if j > 0:
            Q[j, j - 1] = j * math.exp(-u[j])
        Q[j, j] = -Q[j].sum()
    p0 = np.zeros(n + 1)
    p0[np.argmin(np.abs(x - 0.2))] = 1.0
    exact = p0 @ expm(T * Q)
    assert np.allclose(y, x)
    assert np.max(np.abs(law - exact)) < 1e-8


def test_transient_sampling_agrees_with_event_simulation():
    regime = ScalingRegime.clt(0, 0.0)
    n, T = 400, 0.5
    ev = simulate_ensemble(CW(0.8), regime, n, 0.0, T, 3000, seed=11)
    tr = sample_transient(CW(0.8), regime, n, 0.0, T, 3000, seed=12)
    assert ks_2samp([s.terminal for s in ev], tr).pvalue > 0.001


def test_mdp_path_relaxes_at_ou_rate():
    # zero-cost velocity -2(1 - beta) y: mean decays like exp(-2(1 - beta) t)
    beta = 0.5
    regime = ScalingRegime.mdp(0, 0.0)
    n = 10_000
    ens = simulate_ensemble(CW(beta), regime, n, 2.0, 1.0, 400, seed=8)
    mean = np.mean([s.terminal for s in ens])
    sd = np.std([s.terminal for s in ens]) / math.sqrt(len(ens))
    assert abs(mean - ens[0].y0 * math.exp(-2 * (1 - beta))) < 4 * sd + 0.02


def test_lln_regression():
    beta, x0, T = 0.5, 0.5, 1.0
    times = np.linspace(0, T, 51)
    ode = meanfield_flow(CW(beta), x0, T, dt=1e-3)
    ode_vals = np.interp(times, ode.times, ode.values)
    errs, bands = [], []
    for n in (1000, 10_000):
        ens = [simulate_chain(CW(beta), n, x0, T, seed=21, replica=r) for r in range(200)]
        paths = np.array([s.value_at(times) for s in ens])
        errs.append(np.max(np.abs(paths.mean(axis=0) - ode_vals)))
        bands.append(3 * np.max(paths.std(axis=0)) / math.sqrt(len(ens)))
    assert errs[1] < errs[0] + bands[1]
    assert errs[1] < bands[1] + 1e-3


def test_supercritical_clt_variance():
    beta = 1.5
    p = CW(beta)
    m = find_fixed_points(p).positive_root()
    regime = ScalingRegime.clt(0, m)
    y, law = transient_law(p, regime, 4000, 0.0, 6.0)
    var = np.sum(law * y**2) - np.sum(law * y) ** 2
    g1 = math.cosh(beta * m) - m * math.sinh(beta * m)
    g2p = beta * math.cosh(beta * m) - beta * m * math.sinh(beta * m) - math.cosh(beta * m)
    assert var == pytest.approx(-g1 / g2p, rel=0.03)


def test_generator_is_sparse_tridiagonal():
    from cwmdp.simulator import _generator
    G = _generator(CW(1.0), 20)
    assert sparse.issparse(G)
    assert np.allclose(np.asarray(G.sum(axis=0)).ravel(), 0.0, atol=1e-12)
