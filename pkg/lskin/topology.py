# -*- coding: utf-8 -*-
"""
拓撲與能隙診斷：譜捲繞數、拓撲區間、例外點、皮膚參數、Liouvillian 能隙

    det H_S(q) = −h_AB(q)·h_BA(q)
    r_R = −(t₁−γ₁)/(t₂+γ₂)     r_L = −(t₁+γ₁)/(t₂−γ₂)
    r² = r_R/r_L = (t₁−γ₁)(t₂−γ₂) / [(t₁+γ₁)(t₂+γ₂)]      ξ = 2/|ln|r²||

閉式能隙是熱力學極限下的包絡；有限 N 的離散網格只會高於包絡。
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .builder import h_offdiag
from .exact import rapidities_closed_form
from .model import ChainSpec, PhysicsError, derive_rates

# 行列式低於此值視為落在相邊界上
DET_TOL = 1e-12

# 不等式「等號」的相對容差
REGIME_TOL = 1e-12

# classify_ep 預設容差
EP_CLASSIFY_TOL = 1e-9

DEFAULT_GRID = 500


class DetZero(PhysicsError):
    def __init__(self, q: float):
        super().__init__(f"det H_S(q) 在 q={q:.6g} 處為 0（位於相邊界），捲繞數無定義")
        self.q = q


class UnsupportedBranch(PhysicsError):
    def __init__(self, what: str):
        super().__init__(f"閉式不適用：{what}")


class IndeterminateRegime(PhysicsError):
    def __init__(self, what: str):
        super().__init__(f"拓撲區間判定落在邊界上：{what}")


def winding_number(spec: ChainSpec, grid: int = DEFAULT_GRID) -> int:
    """det H_S(q) 繞原點的相位累積 / 2π，q 走 −π → π 共 grid+1 點"""
    if grid < 100:
        raise ValueError(f"grid 至少 100（收到 {grid}）")
    qs = np.linspace(-np.pi, np.pi, grid + 1)
    h_ab, h_ba = h_offdiag(spec, qs)
    det = -h_ab * h_ba
    bad = np.nonzero(np.abs(det) < DET_TOL)[0]
    if len(bad):
        raise DetZero(float(qs[bad[0]]))
    dphi = np.angle(det[1:] / det[:-1])
    return int(round(float(np.sum(dphi)) / (2 * np.pi)))


@dataclass
class SkinParameters:
    rR: complex
    rL: complex
    r: complex
    r2: complex
    xi: float
    extreme: bool = False       # 例外點：r² ∈ {0, ∞}

    @property
    def abs_r2(self) -> float:
        return abs(self.r2)


def skin_parameter(spec: ChainSpec) -> SkinParameters:
    r = derive_rates(spec)
    a1, b1 = spec.t1 + r.g1, spec.t1 - r.g1
    a2, b2 = spec.t2 + r.g2, spec.t2 - r.g2
    rR = -b1 / a2 if a2 != 0 else complex(math.inf)
    rL = -a1 / b2 if b2 != 0 else complex(math.inf)
    num, den = b1 * b2, a1 * a2
    if num == 0 or den == 0:
        r2 = complex(0.0) if den != 0 else complex(math.inf)
        return SkinParameters(rR=complex(rR), rL=complex(rL), r=np.sqrt(r2), r2=r2,
                              xi=0.0, extreme=True)
    r2 = complex(num / den)
    lr = math.log(abs(r2))
    xi = math.inf if lr == 0 else 2.0 / abs(lr)
    return SkinParameters(rR=complex(rR), rL=complex(rL), r=complex(np.sqrt(r2)), r2=r2, xi=xi)


def _strict(lhs: float, rhs: float, what: str) -> bool:
    """lhs < rhs；等號（相對容差內）拋 IndeterminateRegime"""
    if abs(lhs - rhs) <= REGIME_TOL * max(1.0, abs(lhs), abs(rhs)):
        raise IndeterminateRegime(what)
    return lhs < rhs


def _sign_test(spec: ChainSpec) -> bool:
    """sgn ln|r_L| ≠ sgn ln|r_R|：零模的左右向量局域在相反的兩端"""
    sp = skin_parameter(spec)
    lr = math.log(abs(sp.rR)) if sp.rR != 0 else -math.inf
    ll = math.log(abs(sp.rL)) if sp.rL != 0 else -math.inf
    return bool(np.sign(lr) * np.sign(ll) < 0)


@dataclass
class RegimeVerdict:
    topological: bool
    sign_test: bool
    branch: str

    @property
    def agree(self) -> bool:
        return self.topological == self.sign_test


def regime_verdict(spec: ChainSpec) -> RegimeVerdict:
    r = derive_rates(spec)
    t1, t2, g1, g2 = spec.t1, spec.t2, r.g1, r.g2
    if g1 * g2 < 0:
        raise UnsupportedBranch("γ₁γ₂ < 0")
    dt, st = abs(abs(t1) - abs(t2)), abs(t1) + abs(t2)
    dg, sg = abs(g1 - g2), g1 + g2
    sign = _sign_test(spec)
    if t1 * t2 > 0:
        topo = _strict(dt, sg, "||t₁|−|t₂|| = γ₁+γ₂") and _strict(dg, st, "|γ₁−γ₂| = |t₁|+|t₂|")
        return RegimeVerdict(topo, sign, "t₁t₂>0")
    if t1 * t2 < 0:
        a = _strict(dt, dg, "||t₁|−|t₂|| = |γ₁−γ₂|")
        b = _strict(sg, st, "γ₁+γ₂ = |t₁|+|t₂|")
        return RegimeVerdict(a == b, sign, "t₁t₂<0")
    # t₁t₂ = 0：不等式組沒有涵蓋，只剩零模局域方向可判
    return RegimeVerdict(sign, sign, "t₁t₂=0")


def topological_regime(spec: ChainSpec) -> bool:
    return regime_verdict(spec).topological


def biorthogonal_polarization(spec: ChainSpec) -> float:
    """P = 1 − (1/N)·Σⱼ j·ψ_L0*(A_j)ψ_R0(A_j)；零模貼左端 → 1，貼右端 → 0"""
    sp = skin_parameter(spec)
    N = spec.N
    j = np.arange(1, N + 1)
    z = complex(np.conj(sp.rL) * sp.rR)
    if not np.isfinite(z):
        return 0.0                      # 權重全在 j = N
    if z == 0:
        return 1.0 - 1.0 / N            # 權重全在 j = 1
    # 以對數權重避免 |z|^N 溢位
    logw = j * math.log(abs(z))
    w = np.exp(logw - logw.max()) * np.exp(1j * np.angle(z) * j)
    total = np.sum(w)
    if abs(total) < 1e-300:
        raise PhysicsError("零模權重相消，雙正交極化無定義")
    return float((1.0 - np.sum(j * w) / (N * total)).real)


@dataclass
class EPInfo:
    bond: int
    sign: int                   # tᵢ = sign·γᵢ
    distance: float
    distinct_eigenvalues: int   # 同時在兩條鍵上為 1，只有一條為 3


def classify_ep(spec: ChainSpec, tol: float = EP_CLASSIFY_TOL) -> list:
    if tol <= 0:
        raise ValueError("tol 必須 > 0")
    r = derive_rates(spec)
    hits = []
    for bond, t, g in ((1, spec.t1, r.g1), (2, spec.t2, r.g2)):
        if g <= 0:
            continue
        for sign in (1, -1):
            dist = abs(t - sign * g)
            if dist <= tol:
                hits.append(EPInfo(bond, sign, dist, 0))
    count = 1 if len({h.bond for h in hits}) == 2 else 3
    for h in hits:
        h.distinct_eigenvalues = count
    return hits


def ep_distances(spec: ChainSpec) -> tuple:
    """(|t₁−γ₁|, |t₁+γ₁|, |t₂−γ₂|, |t₂+γ₂|)"""
    r = derive_rates(spec)
    return (abs(spec.t1 - r.g1), abs(spec.t1 + r.g1),
            abs(spec.t2 - r.g2), abs(spec.t2 + r.g2))


@dataclass
class GapReport:
    delta_obc: float
    delta_pbc: float            # γ₂ ≠ 0 時為 nan（閉式只推到 γ₂ = 0）
    delta_numeric: float
    tc: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"delta_obc": self.delta_obc, "delta_pbc": self.delta_pbc,
                "delta_numeric": self.delta_numeric, "tc": self.tc}


def critical_hopping(spec: ChainSpec) -> float:
    """t_c = (|t₂| + √(t₂² + 4γ₁²))/2"""
    g1 = derive_rates(spec).g1
    return (abs(spec.t2) + math.sqrt(spec.t2 ** 2 + 4 * g1 ** 2)) / 2


def obc_gap(spec: ChainSpec) -> float:
    """Δ^OBC = 2γ − Σᵢ 2√(γᵢ²−tᵢ²)·θ(γᵢ−|tᵢ|)，θ(0) = 0"""
    r = derive_rates(spec)
    gap = 2 * r.g
    for t, g in ((spec.t1, r.g1), (spec.t2, r.g2)):
        if g > abs(t):
            gap -= 2 * math.sqrt(g * g - t * t)
    return gap


def pbc_gap(spec: ChainSpec) -> float:
    """γ₂ = 0 的三段式 Δ^PBC，加上在位耗散的 2γ₀"""
    r = derive_rates(spec)
    if r.g2 != 0:
        raise UnsupportedBranch(f"Δ^PBC 只推到 γ₂ = 0（γ₂={r.g2:g}）")
    t1, t2, g1 = abs(spec.t1), abs(spec.t2), r.g1
    tc = critical_hopping(spec)
    if t1 <= t2:
        gap = 0.0
    elif t1 <= tc:
        gap = 2 * g1 - 2 * math.sqrt(max(g1 * g1 - (t1 - t2) ** 2, 0.0))
    else:
        gap = 2 * g1 - 2 * g1 * t2 / math.sqrt(t1 * t1 - g1 * g1)
    return gap + 2 * r.g0


def numeric_gap(spec: ChainSpec) -> float:
    _, betas = rapidities_closed_form(spec)
    return float(2 * np.min(betas.real))


def gap_closed_form(spec: ChainSpec) -> GapReport:
    notes = []
    try:
        dp, tc = pbc_gap(spec), critical_hopping(spec)
    except UnsupportedBranch as e:
        dp, tc = math.nan, math.nan
        notes.append(str(e))
    return GapReport(delta_obc=obc_gap(spec), delta_pbc=dp,
                     delta_numeric=numeric_gap(spec), tc=tc, notes=notes)


@dataclass
class TopologyReport:
    nu: int | None
    topological: bool | None
    rR: complex
    rL: complex
    r: complex
    r2: complex
    xi: float
    ep_distances: tuple
    extreme: bool = False
    polarization: float = math.nan
    eps: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def topology_report(spec: ChainSpec, grid: int = DEFAULT_GRID) -> TopologyReport:
    """彙整所有拓撲量；相邊界上的量以 None 表示並寫入 notes，不拋例外"""
    notes = []
    try:
        nu = winding_number(spec, grid)
    except DetZero as e:
        nu = None
        notes.append(str(e))
    try:
        v = regime_verdict(spec)
        topo = v.topological
        if not v.agree:
            notes.append(f"不等式判定 {v.topological} 與 r_L/r_R 符號判定 {v.sign_test} 不一致")
    except PhysicsError as e:
        topo = None
        notes.append(str(e))
    sp = skin_parameter(spec)
    try:
        pol = biorthogonal_polarization(spec)
    except PhysicsError as e:
        pol = math.nan
        notes.append(str(e))
    return TopologyReport(nu=nu, topological=topo, rR=sp.rR, rL=sp.rL, r=sp.r, r2=sp.r2,
                          xi=sp.xi, ep_distances=ep_distances(spec), extreme=sp.extreme,
                          polarization=pol, eps=classify_ep(spec), notes=notes)
