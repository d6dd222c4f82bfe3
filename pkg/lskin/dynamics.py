# -*- coding: utf-8 -*-
"""
動力學：共變異數的模態和（解析）與 RK4 積分（數值）、關聯函數 Q、占據數、電流、極化、壽命

    ∂ₜC = −CX − X†C + iY              C̃ = C − C_ss 滿足齊次方程
    C̃(t) = e^{−X†t}·C̃(0)·e^{−Xt}      e^{−X_c t} = ψ_R·diag(e^{−βt})·ψ_L†（逐 n×n 區塊）

Majorana 展開 a_j = (x_j c_j + y_j d_j)/2：A 位點 (x, y) = (1, −i)，B 位點 (x, y) = (i, 1)。
    Q_jk = ⟨a_j†a_k⟩ = ½δ_jk − ¼[x_j* C^cc_jk x_k + x_j* C^cd_jk y_k + y_j* C^dc_jk x_k + y_j* C^dd_jk y_k]
    n_j = (1 + i·C_{j,j+n})/2
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .builder import build_damping
from .exact import (DegenerateBasis, ModeSet, chain_modes, chain_rapidities, effective_chain,
                    mode_set, pbc_inner)
from .model import ChainSpec, DerivedRates, InitialState, PhysicsError, derive_rates, site_count
from .steady import (Covariance, SingularSylvester, covariance_solvable, pairing_block,
                     steady_covariance, steady_occupation)
from .topology import obc_gap, skin_parameter

# RK4：h·‖X‖∞ ≤ RK4_FACTOR
RK4_FACTOR = 0.01

# 單次 evolve_ode 的步數上限
MAX_STEPS = 5_000_000

# 雙正交殘差超過此值 → 模態和不可信
BIO_TOL = 1e-6

# Σñ 低於此值時 ΔP 記為 nan
POL_FLOOR = 1e-12

# 比較 PBC / OBC 占據數的門檻
DIVERGENCE_TOL = 1e-8

# 壽命搜尋的取樣點數與倍增上限
LIFETIME_SAMPLES = 2000
LIFETIME_DOUBLINGS = 60

# 各 N 的 τ 相對差距低於此值 → 視為與 N 無關（斜率記 0）
LIFETIME_FLAT_TOL = 1e-7


class DefectiveBasis(DegenerateBasis):
    def __init__(self, residual: float):
        super().__init__(f"模態和：雙正交殘差 {residual:.3g} 過大")
        self.residual = residual


class StepUnderflow(PhysicsError):
    def __init__(self, steps: int):
        super().__init__(f"RK4 需要 {steps} 步，超過上限 {MAX_STEPS}；長時間請改用模態和")
        self.steps = steps


def sublattice_xy(n: int):
    a = np.arange(n) % 2 == 0
    x = np.where(a, 1.0 + 0j, 1j)
    y = np.where(a, -1j, 1.0 + 0j)
    return x, y


def initial_covariance(init: InitialState, rates: DerivedRates, n: int) -> Covariance:
    """C̃(0) = C(0) − C_ss，cd 區塊對角 −i(2v_j − 1 + η/γ)"""
    v = np.asarray(init.vector(n))
    d = 2 * v - 1 + rates.ratio
    return Covariance(pairing_block(n, -1j * d), t=0.0)


def absolute_initial(init: InitialState, n: int) -> Covariance:
    """C(0)：cd 區塊對角 −i(2v_j − 1)"""
    v = np.asarray(init.vector(n))
    return Covariance(pairing_block(n, -1j * (2 * v - 1)), t=0.0)


def reference_steady(spec: ChainSpec) -> Covariance:
    """可解極限用解析 C_ss（即使 PBC 無隙也是固定點），否則解 Sylvester"""
    rates = derive_rates(spec)
    rates.require_open()
    if rates.solvable:
        return covariance_solvable(rates, site_count(spec))
    return steady_covariance(spec)


def _check_basis(modes: ModeSet):
    if modes.bio_residual > BIO_TOL:
        raise DefectiveBasis(modes.bio_residual)


def _propagate(P: np.ndarray, C0: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    Ph = P.conj().T
    out = np.empty_like(C0, dtype=complex)
    for r in (slice(0, n), slice(n, 2 * n)):
        for c in (slice(0, n), slice(n, 2 * n)):
            out[r, c] = Ph @ C0[r, c] @ P
    return out


def evolve_modesum(spec: ChainSpec, modes: ModeSet, C0: Covariance, times) -> list:
    """C̃(t) 的模態和；長時間點直接取 e^{−βt}，不需要步進"""
    _check_basis(modes)
    out = []
    for t in times:
        C = _propagate(modes.propagator(float(t)), C0.C)
        out.append(Covariance((C - C.T) / 2, t=float(t)))
    return out


def _rhs(C, X, Xh, iY):
    return -C @ X - Xh @ C + iY


def evolve_ode(spec: ChainSpec, C0: Covariance, times) -> list:
    """∂ₜC = −CX − X†C + iY 的固定步長 RK4，從 t = 0 的絕對 C(0) 出發"""
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])) or (times and times[0] < 0):
        raise ValueError("times 必須非負且遞增")
    d = build_damping(spec)
    X = d.X.astype(complex)
    Xh = X.conj().T
    iY = 1j * d.Y
    norm = max(float(np.max(np.sum(np.abs(X), axis=1))), 1e-300)

    total = sum(max(1, math.ceil((b - a) * norm / RK4_FACTOR))
                for a, b in zip([0.0] + times, times) if b > a)
    if total > MAX_STEPS:
        raise StepUnderflow(total)

    C = np.array(C0.C, dtype=complex)
    now, out = 0.0, []
    for t in times:
        span = t - now
        if span > 0:
            steps = max(1, math.ceil(span * norm / RK4_FACTOR))
            h = span / steps
            for _ in range(steps):
                K1 = _rhs(C, X, Xh, iY)
                K2 = _rhs(C + h / 2 * K1, X, Xh, iY)
                K3 = _rhs(C + h / 2 * K2, X, Xh, iY)
                K4 = _rhs(C + h * K3, X, Xh, iY)
                C = C + h / 6 * (K1 + 2 * K2 + 2 * K3 + K4)
                C = (C - C.T) / 2
            now = t
        out.append(Covariance(C.copy(), t=t))
    return out


def correlator(C: Covariance) -> np.ndarray:
    n = C.n
    x, y = sublattice_xy(n)
    xc, yc = x.conj(), y.conj()
    Q = 0.5 * np.eye(n, dtype=complex) - 0.25 * (
        np.outer(xc, x) * C.block("cc") + np.outer(xc, y) * C.block("cd")
        + np.outer(yc, x) * C.block("dc") + np.outer(yc, y) * C.block("dd"))
    return Q


def occupation(C: Covariance) -> np.ndarray:
    n = C.n
    return ((1 + 1j * np.diag(C.C[:n, n:])) / 2).real


def current(Q: np.ndarray, boundary: str, per_site: bool = True) -> float:
    """j = (i/n)·Σⱼ(Q_{j,j+1} − Q_{j+1,j})；PBC 含環繞鍵。per_site=False 時不除以 n"""
    n = Q.shape[0]
    a = np.arange(n - 1)
    s = np.sum(Q[a, a + 1] - Q[a + 1, a])
    if boundary == "PBC":
        s += Q[n - 1, 0] - Q[0, n - 1]
    j = (1j * s).real
    return float(j / n) if per_site else float(j)


def polarization(deviations: np.ndarray) -> np.ndarray:
    """ΔP = Σ j·ñ_j / (n·Σ ñ_j)，每列一個時間點；分母過小記為 nan"""
    dev = np.atleast_2d(np.asarray(deviations, dtype=float))
    n = dev.shape[1]
    j = np.arange(1, n + 1)
    s = dev.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (dev @ j) / (n * s)
    p[np.abs(s) < POL_FLOOR] = np.nan
    return p


@dataclass
class Trajectory:
    times: np.ndarray
    occupations: np.ndarray             # [時間, 位點]
    deviations: np.ndarray
    current: np.ndarray
    polarization: np.ndarray
    boundary: str = "PBC"
    method: str = "modesum"
    notes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.occupations.shape[1]

    def occupation_range(self):
        return float(self.occupations.min()), float(self.occupations.max())


def run_trajectory(spec: ChainSpec, init: InitialState | None = None, times=None,
                   method: str = "modesum") -> Trajectory:
    """從 init 出發演化，逐時間點收集占據數、偏差、電流與 ΔP"""
    init = init or InitialState.full()
    times = np.asarray(times if times is not None else np.linspace(0, 10, 101), dtype=float)
    rates = derive_rates(spec)
    rates.require_open()
    n = site_count(spec)
    notes = []
    C0 = absolute_initial(init, n)

    covs = None
    if method == "modesum":
        try:
            modes = mode_set(spec)
            # C_ss 只在模態和分支需要
            Css = reference_steady(spec)
            tilde = evolve_modesum(spec, modes, C0 - Css, times)
            covs = [c + Css for c in tilde]
        except (DegenerateBasis, SingularSylvester) as e:
            notes.append(f"模態和失敗（{e}），改用 RK4")
            method = "ode"
    if covs is None:
        if method != "ode":
            raise ValueError(f"未知的演化方法：{method}")
        covs = evolve_ode(spec, C0, times)

    occ = np.array([occupation(c) for c in covs])
    dev = occ - steady_occupation(rates)
    cur = np.array([current(correlator(c), spec.boundary) for c in covs])
    return Trajectory(times=times, occupations=occ, deviations=dev, current=cur,
                      polarization=polarization(dev), boundary=spec.boundary,
                      method=method, notes=notes)


def edge_profile_slope(traj: Trajectory, index: int, skip: int = 2) -> float:
    """A 子晶格上 ln|ñ_{2j−1}| 對 j 的斜率（略過兩端各 skip 個單胞）；皮膚堆積時約為 −ln|r²|"""
    a = np.abs(traj.deviations[index, 0::2])
    j = np.arange(1, len(a) + 1)
    sel = slice(skip, len(a) - skip) if len(a) > 2 * skip + 1 else slice(None)
    jj, aa = j[sel], a[sel]
    ok = aa > 0
    if ok.sum() < 2:
        raise PhysicsError("偏差全為 0，無法擬合空間斜率")
    slope, _ = np.polyfit(jj[ok], np.log(aa[ok]), 1)
    return float(slope)


@dataclass
class Lifetime:
    tau: float
    site: int                           # 1-based
    crossings: int
    oscillating: bool


def _site_deviation(modes: ModeSet, dprime: np.ndarray, site: int):
    """ñ_site(t) = ½·Σ_k d'_k·|(ψ_R·a)_k|²，a = e^{−βt} ⊙ conj(ψ_L[site, :])"""
    lrow = modes.psiL[site].conj()
    R = modes.psiR

    def f(t: float) -> float:
        col = R @ (np.exp(-modes.betas * t) * lrow)
        return float(0.5 * np.sum(dprime * np.abs(col) ** 2))
    return f


def lifetime(spec: ChainSpec, init: InitialState | None = None, l: int = 3,
             site: int | None = None) -> Lifetime:
    """|ñ_site(τ)| = e^{−l}·|ñ_site(0)|；site 預設為右端 2N−1"""
    if spec.boundary != "OBC":
        raise ValueError("lifetime 只定義在 OBC")
    if l <= 0:
        raise ValueError("l 必須為正整數")
    init = init or InitialState.full()
    rates = derive_rates(spec)
    n = site_count(spec)
    site = site or n
    modes = mode_set(spec)
    _check_basis(modes)
    dprime = 2 * np.asarray(init.vector(n)) - 1 + rates.ratio
    f = _site_deviation(modes, dprime, site - 1)
    n0 = abs(f(0.0))
    if n0 == 0:
        raise PhysicsError(f"位點 {site} 的初始偏差為 0，壽命無定義")
    thr = math.exp(-l) * n0

    T = 1.0 / max(rates.g, 1e-12)
    for _ in range(LIFETIME_DOUBLINGS):
        ts = np.linspace(0, T, LIFETIME_SAMPLES + 1)
        vals = np.abs([f(t) for t in ts])
        if np.all(vals[LIFETIME_SAMPLES // 2:] < thr):
            break
        T *= 2
    else:
        raise PhysicsError(f"t ≤ {T:g} 內 |ñ_{site}| 未降到門檻以下")

    peak = int(np.argmax(vals))
    g = vals - thr
    cross = [k for k in range(peak, len(ts) - 1) if g[k] >= 0 > g[k + 1] or g[k] < 0 <= g[k + 1]]
    down = [k for k in cross if g[k] >= 0 > g[k + 1]]
    k = down[-1]
    tau = bisect(lambda t: abs(f(t)) - thr, ts[k], ts[k + 1], xtol=1e-12 * max(1.0, T))
    return Lifetime(tau=float(tau), site=site, crossings=len(cross), oscillating=len(cross) > 1)


@dataclass
class LifetimeFit:
    l: int
    Ns: list
    taus: list
    slope: float
    intercept: float
    r_squared: float
    xi_fit: float
    delta_eff: float
    oscillating: list = field(default_factory=list)
    flat: bool = False                  # τ 與 N 無關，斜率記 0


def lifetime_scan(template: ChainSpec, Ns, l: int = 3, init: InitialState | None = None) -> LifetimeFit:
    """τ(N) = a + b·N 的線性擬合；ξ_fit = 2/(b·Δ^OBC)、Δ_eff = ln|r⁻²|/b"""
    Ns = [int(x) for x in Ns]
    if len(Ns) < 2:
        raise ValueError("至少需要兩個 N 才能擬合")
    base = template.with_(boundary="OBC")
    runs = [lifetime(base.with_(N=N), init, l) for N in Ns]
    taus = [r.tau for r in runs]
    flat = float(np.ptp(taus)) <= LIFETIME_FLAT_TOL * max(taus)
    if flat:
        b, a, r2 = 0.0, float(np.mean(taus)), math.nan
    else:
        b, a = np.polyfit(Ns, taus, 1)
        pred = a + b * np.asarray(Ns)
        ss_res = float(np.sum((np.asarray(taus) - pred) ** 2))
        ss_tot = float(np.sum((np.asarray(taus) - np.mean(taus)) ** 2))
        r2 = 1.0 - ss_res / ss_tot
    sp = skin_parameter(base)
    ln_inv = -math.log(sp.abs_r2) if 0 < sp.abs_r2 < math.inf else math.nan
    gap = obc_gap(base)
    return LifetimeFit(l=l, Ns=Ns, taus=taus, slope=float(b), intercept=float(a), r_squared=r2,
                       xi_fit=2.0 / (b * gap) if b * gap != 0 else math.inf,
                       delta_eff=ln_inv / b if b != 0 else math.inf,
                       oscillating=[r.oscillating for r in runs], flat=flat)


@dataclass
class EffectiveTrajectory:
    times: np.ndarray
    Q: list                             # 每個時間點的 n×n Q_eff
    betas: np.ndarray                   # η + iE(η) + s₀

    @property
    def occupations(self) -> np.ndarray:
        return np.array([np.diag(q).real for q in self.Q])


def effective_phase(n: int) -> np.ndarray:
    """σ_jk = 1（j+k 偶），(−1)^j·(−i)（j+k 奇），1-based"""
    j = np.arange(1, n + 1)
    odd = (j[:, None] + j[None, :]) % 2 == 1
    return np.where(odd, ((-1.0) ** j)[:, None] * (-1j), 1.0 + 0j)


def effective_dynamics(spec: ChainSpec, init: InitialState | None = None, times=None) -> EffectiveTrajectory:
    """無跳躍演化：Q_eff(t) = σ ⊙ [e^{−X_eff t}ᵀ·diag(v)·e^{−X_eff t}]"""
    init = init or InitialState.full()
    times = np.asarray(times if times is not None else np.linspace(0, 10, 101), dtype=float)
    ch = effective_chain(spec)
    modes = chain_modes(ch)
    _check_basis(modes)
    _, betas = chain_rapidities(ch)
    V = np.diag(np.asarray(init.vector(ch.n), dtype=complex))
    sigma = effective_phase(ch.n)
    Qs = []
    for t in times:
        P = modes.propagator(float(t))
        Qs.append(sigma * (P.T @ V @ P))
    return EffectiveTrajectory(times=times, Q=Qs, betas=betas)


@dataclass
class BoundarySensitivity:
    divergence_time: float | None       # None：整段時間內都沒分開
    ballistic_estimate: float
    max_diff: np.ndarray
    current_pbc: float                  # 最後時間點、所有鍵相加
    current_obc: float


def max_group_velocity(spec: ChainSpec, samples: int = 4096) -> float:
    q = np.linspace(-np.pi, np.pi, samples + 1)
    E = np.sqrt(pbc_inner(spec, q)).real
    return float(np.max(np.abs(np.gradient(E, q))))


def boundary_sensitivity(spec_pbc: ChainSpec, spec_obc: ChainSpec, init: InitialState | None = None,
                         times=None) -> BoundarySensitivity:
    if spec_pbc.with_(boundary="OBC") != spec_obc:
        raise ValueError("兩個 ChainSpec 只能在邊界條件上不同")
    N = spec_pbc.N
    init = init or InitialState.single(N)
    times = np.asarray(times if times is not None else np.linspace(0, 20, 201), dtype=float)
    tp = run_trajectory(spec_pbc, init, times)
    to = run_trajectory(spec_obc, init, times)
    m = site_count(spec_obc)
    diff = np.max(np.abs(tp.occupations[:, :m] - to.occupations), axis=1)
    hit = np.nonzero(diff > DIVERGENCE_TOL)[0]
    v = max_group_velocity(spec_pbc)
    return BoundarySensitivity(
        divergence_time=float(times[hit[0]]) if len(hit) else None,
        ballistic_estimate=((N - 1) / 2) / v if v > 0 else math.inf,
        max_diff=diff,
        current_pbc=float(tp.current[-1] * site_count(spec_pbc)),
        current_obc=float(to.current[-1] * m))

