# -*- coding: utf-8 -*-
"""動力學測試：模態和 vs RK4、長時間電流、無跳躍演化、邊界敏感度、壽命"""
import math

import numpy as np
import pytest

from lskin.builder import bonds, build_damping
from lskin.dynamics import (StepUnderflow, absolute_initial, boundary_sensitivity, correlator,
                            effective_dynamics, evolve_modesum, evolve_ode, initial_covariance,
                            lifetime, lifetime_scan, occupation, polarization, reference_steady,
                            run_trajectory)
from lskin.exact import mode_set
from lskin.model import ChainSpec, InitialState
from lskin.steady import Covariance, SingularSylvester, covariance_solvable
from lskin.topology import obc_gap, skin_parameter

BALANCED = dict(t1=1, t2=1, g1=1.5, g2=0.5)
LOSS = dict(t1=1, t2=1, g1=0.2, e1=0.2, g2=0.8, e2=0.8)


def covariances_modesum(spec, init, times):
    Css = reference_steady(spec)
    C0 = absolute_initial(init, spec.n)
    return [c + Css for c in evolve_modesum(spec, mode_set(spec), C0 - Css, times)]


def max_diff(a, b):
    return max(float(np.max(np.abs(x.C - y.C))) for x, y in zip(a, b))


def test_initial_covariances():
    s = ChainSpec.from_rates(1, 1, g1=0.5, N=3)
    assert np.allclose(occupation(absolute_initial(InitialState.full(), s.n)), 1)

    loss = ChainSpec.from_rates(N=4, **LOSS)
    occ = occupation(absolute_initial(InitialState.single(4), loss.n))
    assert np.allclose(occ, np.eye(loss.n)[3])
    Ct = initial_covariance(InitialState.full(), loss.rates, loss.n)
    assert np.allclose(Ct.block("cd"), -2j * np.eye(loss.n))

    s = ChainSpec.from_rates(1, 0.7, g1=1.0, e1=0.5, g2=0.4, e2=0.2, boundary="OBC", N=2)
    init = InitialState.occupations([0.3, 0.7, 0.1])
    C = initial_covariance(init, s.rates, s.n) + covariance_solvable(s.rates, s.n)
    assert np.allclose(C.C, absolute_initial(init, s.n).C)
    assert np.allclose(occupation(C), [0.3, 0.7, 0.1])


def test_correlator_conventions():
    s = ChainSpec.from_rates(1, 1, g1=0.5, N=3)
    assert np.allclose(correlator(reference_steady(s)), 0.5 * np.eye(6))
    assert np.allclose(occupation(Covariance(np.zeros((6, 6), dtype=complex))), 0.5)
    Q = correlator(absolute_initial(InitialState.full(), 6))
    assert np.allclose(np.diag(Q), 1)
    assert np.allclose(Q, Q.conj().T)


def test_modesum_at_zero():
    s = ChainSpec.from_rates(1, 0.7, g1=0.3, g2=0.2, e1=0.1, N=4)
    C0 = absolute_initial(InitialState.full(), s.n) - reference_steady(s)
    C = evolve_modesum(s, mode_set(s), C0, [0.0])[0]
    assert np.max(np.abs(C.C - C0.C)) < 1e-12


@pytest.mark.parametrize("boundary", ["PBC", "OBC"])
def test_modesum_matches_rk4(boundary):
    s = ChainSpec.from_rates(1, 0.7, g1=0.3, g2=0.2, e1=0.1, boundary=boundary, N=3)
    init = InitialState.single(2)
    times = [1.0, 2.0, 4.0]                     # γt = 0.5, 1, 2
    ms = covariances_modesum(s, init, times)
    ode = evolve_ode(s, absolute_initial(init, s.n), times)
    assert max_diff(ms, ode) < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("g1,g2", [(1.5, 0.5), (0.02, 0.01)])
@pytest.mark.parametrize("boundary", ["OBC", "PBC"])
def test_modesum_matches_rk4_long(boundary, g1, g2):
    s = ChainSpec.from_rates(1, 1, g1=g1, g2=g2, boundary=boundary, N=8)
    init = InitialState.full()
    times = np.linspace(0, 20, 21) / s.rates.g
    ms = covariances_modesum(s, init, times)
    ode = evolve_ode(s, absolute_initial(init, s.n), times)
    assert max_diff(ms, ode) < 1e-6


@pytest.mark.slow
def test_modesum_matches_rk4_random():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 50:
        t1 = rng.uniform(0.6, 1.5) * rng.choice([-1.0, 1.0])
        g1, g2 = rng.uniform(0.05, 0.4, size=2)
        s = ChainSpec.from_rates(t1, rng.uniform(0.6, 1.5), g1=g1, g2=g2,
                                 e1=rng.uniform(-g1, g1), e2=rng.uniform(-g2, g2),
                                 boundary=("PBC", "OBC")[checked % 2], N=int(rng.integers(2, 9)))
        # |t₁| ≈ t₂ 的 PBC 幾乎無隙，Sylvester 病態
        if np.linalg.eigvals(build_damping(s).Xc).real.min() < 5e-3:
            continue
        init = InitialState.single(int(rng.integers(1, s.n + 1)))
        times = [5 / s.rates.g, 20 / s.rates.g]
        ms = covariances_modesum(s, init, times)
        ode = evolve_ode(s, absolute_initial(init, s.n), times)
        assert max_diff(ms, ode) < 1e-6, s
        checked += 1


def test_fixed_points():
    s = ChainSpec.from_rates(1, 0.7, g1=1.0, e1=0.5, g2=0.4, e2=0.2, boundary="OBC", N=3)
    Css = covariance_solvable(s.rates, s.n)
    for c in evolve_ode(s, Css, [5.0, 10.0, 14.0]):
        assert np.max(np.abs(c.C - Css.C)) < 1e-9

    z = ChainSpec.from_rates(1, 0.7, g1=0.3, g2=0.2, N=3)
    zero = Covariance(np.zeros((12, 12), dtype=complex))
    for c in evolve_ode(z, zero, [1.0, 3.0]):
        assert np.all(c.C == 0)


def test_step_underflow():
    s = ChainSpec.from_rates(1, 0.7, g1=0.3, g2=0.2, N=3)
    with pytest.raises(StepUnderflow):
        evolve_ode(s, absolute_initial(InitialState.full(), s.n), [1e7])
    with pytest.raises(ValueError):
        evolve_ode(s, absolute_initial(InitialState.full(), s.n), [2.0, 1.0])


def test_trajectory_basics():
    s = ChainSpec.from_rates(1, 0.7, g1=0.3, g2=0.2, e1=0.1, boundary="OBC", N=4)
    tr = run_trajectory(s, InitialState.full(), [0.0, 1.0, 5.0, 20.0])
    assert tr.current[0] == pytest.approx(0, abs=1e-12)
    assert np.allclose(tr.occupations[0], 1)
    lo, hi = tr.occupation_range()
    assert lo >= -1e-8 and hi <= 1 + 1e-8
    assert tr.polarization[0] == pytest.approx((tr.n + 1) / (2 * tr.n))

    ode = run_trajectory(s, InitialState.full(), [0.0, 1.0, 5.0], method="ode")
    assert np.max(np.abs(ode.occupations - tr.occupations[:3])) < 1e-6
    assert ode.method == "ode"


def test_ode_path_without_unique_steady_state():
    # PBC、t₁ = t₂、非可解耗散：Sylvester 奇異，RK4 仍要走得通
    s = ChainSpec(1, 1, gl1=1, gg1=0, gl2=0.3, gg2=0.3, N=4)
    with pytest.raises(SingularSylvester):
        reference_steady(s)
    times = [0.0, 0.5, 1.0]
    ref = evolve_ode(s, absolute_initial(InitialState.full(), s.n), times)
    tr = run_trajectory(s, InitialState.full(), times, method="ode")
    assert tr.method == "ode" and not tr.notes
    assert np.allclose(tr.occupations, [occupation(c) for c in ref], atol=1e-12)

    fallback = run_trajectory(s, InitialState.full(), times)
    assert fallback.method == "ode" and fallback.notes
    assert np.allclose(fallback.occupations, tr.occupations, atol=1e-12)


def test_covariance_invariants_along_trajectory():
    rng = np.random.default_rng(5)
    for boundary in ("PBC", "OBC"):
        for _ in range(3):
            s = ChainSpec.from_rates(rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4),
                                     g1=rng.uniform(0.1, 0.4), g2=rng.uniform(0.1, 0.4),
                                     e1=0.05, boundary=boundary, N=4)
            for c in covariances_modesum(s, InitialState.single(3), np.linspace(0, 20, 11)):
                assert c.antisymmetry() < 1e-9 and c.imaginarity() < 1e-9
                n = occupation(c)
                assert n.min() >= -1e-8 and n.max() <= 1 + 1e-8


def test_dissipative_current_without_hopping():
    # t₁ = t₂ = 0、η = 0：C^cd = −iW，∂ₜW = −(W·X_c + X_c·W)，Q_{a,a+1} = (i/2)·s·W_{a,a+1}
    # 鍵相位 −i 讓純耗散也長出虛的近鄰關聯，j_c = −(1/n)·Σ s·W_{a,a+1}
    sign = {1: 1.0, 2: -1.0}
    for boundary in ("PBC", "OBC"):
        s = ChainSpec.from_rates(0, 0, g1=0.5, g2=0.2, boundary=boundary, N=3)
        init = InitialState.single(2)
        times = [0.0, 1.0, 5.0]
        tr = run_trajectory(s, init, times)
        lam, V = np.linalg.eigh(build_damping(s).Xc)
        D = np.diag(2 * np.asarray(init.vector(s.n)) - 1.0)
        for t, j in zip(times, tr.current):
            E = (V * np.exp(-lam * t)) @ V.T
            W = E @ D @ E
            expected = -sum(sign[k] * W[a, b] for a, b, k in bonds(s)) / s.n
            assert j == pytest.approx(expected, abs=1e-9), (boundary, t)
        assert abs(tr.current[0]) < 1e-12
        assert abs(tr.current[1]) > 1e-3


def test_dissipative_current_initial_slope():
    # 對角 C(0)：dj/dt|₀ = (2/n)·Σ_鍵 [γ_b(n_a + n_b − 1) + η_b]
    h = 1e-5
    for boundary in ("PBC", "OBC"):
        s = ChainSpec.from_rates(0, 0, g1=0.5, g2=0.2, e1=0.3, e2=-0.1, boundary=boundary, N=3)
        r = s.rates
        for init in (InitialState.full(), InitialState.single(2)):
            v = np.asarray(init.vector(s.n))
            slope = 2 / s.n * sum((r.g1 if k == 1 else r.g2) * (v[a] + v[b] - 1)
                                  + (r.e1 if k == 1 else r.e2) for a, b, k in bonds(s))
            j = run_trajectory(s, init, [0.0, h]).current
            assert j[1] / h == pytest.approx(slope, abs=1e-3), (boundary, init)
    full = ChainSpec.from_rates(0, 0, g1=0.5, g2=0.2, e1=0.3, e2=-0.1, boundary="OBC", N=3)
    assert run_trajectory(full, InitialState.full(), [0.0, h]).current[1] / h == pytest.approx(0.72, abs=1e-3)


def test_polarization_uniform():
    assert polarization(np.full(5, 0.3))[0] == pytest.approx(6 / 10)
    assert math.isnan(polarization(np.zeros(4))[0])


@pytest.mark.parametrize("g1,g2", [(1.5, 0.5), (0.02, 0.01)])
def test_persistent_current_pbc(g1, g2):
    s = ChainSpec.from_rates(1, 1, g1=g1, g2=g2, N=12)
    t = 1e4 / s.rates.g
    j = run_trajectory(s, InitialState.full(), [t]).current[-1]
    assert abs(j - 1 / 24) < 1e-4


def test_persistent_current_independent_of_rates():
    js = [run_trajectory(ChainSpec.from_rates(1, 1, g1=g1, g2=g2, N=12), InitialState.full(),
                         [1e4 / (g1 + g2)]).current[-1]
          for g1, g2 in ((1.5, 0.5), (0.02, 0.01))]
    assert abs(js[0] - js[1]) < 1e-9


def test_obc_current_terminates():
    s = ChainSpec.from_rates(boundary="OBC", N=12, **BALANCED)
    j = run_trajectory(s, InitialState.full(), [1e4 / s.rates.g]).current[-1]
    assert abs(j) < 1e-6


@pytest.mark.parametrize("t1,N", [(-0.5, 30), (0.0, 32), (0.5, 30)])
def test_quasi_current(t1, N):
    # arccos(−t₁/t₂) 落在動量網格上，準穩態不衰減
    s = ChainSpec.from_rates(t1, 1, g1=0.3, N=N)
    j = run_trajectory(s, InitialState.full(), [1e5]).current[-1]
    assert abs(j - (t1 + 1) / (2 * N)) < 5 / N ** 2


@pytest.mark.parametrize("t1", [-0.5, 0.5])
def test_quasi_current_off_grid(t1):
    # N = 32 時 arccos(∓½) 與最近格點差 δq ≈ 0.065，最慢模態 Re β ≈ 4.9e-4
    s = ChainSpec.from_rates(t1, 1, g1=0.3, N=32)
    slowest = mode_set(s).betas.real.min()
    assert 1e-4 < slowest < 2e-3
    lead = (t1 + 1) / 64
    j = run_trajectory(s, InitialState.full(), [1e3 / 0.3, 1e5 / 0.3]).current
    assert abs(j[0]) < 0.5 * lead
    assert abs(j[1]) < 1e-8


def test_loss_only_effective_dynamics():
    s = ChainSpec.from_rates(1, 0.7, g1=0.2, e1=0.2, g2=0.8, e2=0.8, N=6)
    times = np.linspace(0, 10, 11)
    for init in (InitialState.full(), InitialState.single(6)):
        eff = effective_dynamics(s, init, times)
        full = covariances_modesum(s, init, times)
        for Qe, c in zip(eff.Q, full):
            assert np.max(np.abs(Qe - correlator(c))) < 1e-9
        assert np.allclose(eff.occupations, [occupation(c) for c in full], atol=1e-9)


def test_effective_gap_grows_with_size():
    for N in (3, 5):
        s = ChainSpec.from_rates(1, 0.7, g1=0.3, g2=0.2, boundary="OBC", N=N)
        eff = effective_dynamics(s, InitialState.full(), [0.0])
        assert np.allclose(eff.betas.real, 0.5 * s.n / 2)


def test_boundary_sensitivity():
    N = 20
    pbc = ChainSpec.from_rates(N=N, **LOSS)
    obc = pbc.with_(boundary="OBC")
    times = [0.0, 0.5, 1.0, 1.5, 1.9, 5.0, 10.0, 1e4]
    bs = boundary_sensitivity(pbc, obc, InitialState.single(N), times)
    assert np.all(bs.max_diff[:5] < 1e-8)
    assert bs.divergence_time is not None and bs.divergence_time > 1.9
    assert abs(bs.current_obc) < 1e-6
    assert abs(bs.current_pbc - 1 / N) < 1e-4
    assert bs.ballistic_estimate > 0
    with pytest.raises(ValueError):
        boundary_sensitivity(pbc, obc.with_(t1=0.5))


def test_lifetime_arguments():
    s = ChainSpec.from_rates(1, 1, g1=0.6, N=8)
    with pytest.raises(ValueError):
        lifetime(s)
    with pytest.raises(ValueError):
        lifetime(s.with_(boundary="OBC"), l=0)
    lt = lifetime(s.with_(boundary="OBC"))
    assert lt.tau > 0 and lt.site == 15


def test_lifetime_flat_before_front():
    # γ₁ = 2.5、l = 3：右端在左端波前抵達前就降到門檻，τ 與 N 無關
    s = ChainSpec.from_rates(1, 1, g1=2.5, g2=0.2, boundary="OBC")
    fit = lifetime_scan(s, [8, 10], l=3)
    assert fit.flat and fit.slope == 0
    assert fit.delta_eff == math.inf and fit.xi_fit == math.inf
    assert fit.taus[0] == pytest.approx(1.9762, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("g1", [0.4, 0.6, 0.8])
def test_lifetime_front_slope(g1):
    # t₁ = t₂ 時週期體態無隙；右端偏差等左端出發、速度 t₂ 的波前抵達後才指數衰減，τ ≈ N/t₂ + …
    s = ChainSpec.from_rates(1, 1, g1=g1, boundary="OBC")
    fit = lifetime_scan(s, range(8, 17), l=3)
    assert not fit.flat and fit.r_squared > 0.99
    assert abs(fit.slope - 1.0) < 0.1


@pytest.mark.slow
def test_lifetime_scaling():
    # γ₁ = 0.4：ln|r⁻²|/Δ^OBC ≈ 1/t₂，波前與皮膚長度兩種斜率一致
    s = ChainSpec.from_rates(1, 1, g1=0.4, boundary="OBC")
    fit = lifetime_scan(s, range(8, 17), l=3)
    assert fit.r_squared > 0.99
    xi = skin_parameter(s).xi
    assert abs(fit.xi_fit - xi) / xi < 0.1


@pytest.mark.slow
def test_effective_gap_lower_bound():
    s = ChainSpec.from_rates(1, 1, g1=2.5, g2=0.2, boundary="OBC")
    assert skin_parameter(s).abs_r2 == pytest.approx(1.5 * 0.8 / (3.5 * 1.2))
    fit = lifetime_scan(s, range(8, 15), l=5)
    assert not fit.flat and fit.slope > 0
    assert fit.delta_eff >= obc_gap(s) - 1e-6
