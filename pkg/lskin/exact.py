# -*- coding: utf-8 -*-
"""
精確解：快速度（rapidity）閉式、PBC/OBC 雙正交本徵向量，以及獨立的稠密數值本徵求解（oracle）

    β = γ + iE，E 為 H_S 的本徵值；X_c 的右/左本徵向量 = U·ψ_R、U·ψ_L

PBC：q = 2πm'/N，m' = −N/2 … N/2−1；每個 q 兩條能帶 ν = ±
OBC：n = 2N−1 為奇數，零模 β₀ = γ 加上 q = πm'/N（m' = 1 … N−1）的體態；
     體態經對角相似變換 R 化成對稱鏈（躍遷 t̄ᵢ = √(tᵢ²−γᵢ²)）後取正弦駐波

所有構造都以 BondChain（t₁, t₂, 非互易係數 c₁, c₂, 對角線）為輸入：
X_c 用 (γ₁, γ₂, γ)；有效哈密頓量的 X_eff 用 (η₁, η₂, η + s₀)。
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .builder import build_damping, build_H_eff, build_H_S, hopping_matrix, unitary_u
from .model import ChainSpec, PhysicsError, derive_rates, site_count

# 本徵向量公式的分母（E²、零模重疊 Σ(r_L*r_R)^j、φ·φ）絕對值低於此值 → 退化；
# 對 E² 而言即 |E| < 1e-5
ZERO_PIVOT_TOL = 1e-10

# EP / 能隙閉合的相對判定門檻
EP_TOL = 1e-9

# 數值本徵值分群（同一群內做雙正交化）
CLUSTER_TOL = 1e-8

# 群內 Gram 矩陣最小奇異值低於此值 → 視為缺陷（Jordan 塊）
DEFECT_TOL = 1e-8


class DegenerateBasis(PhysicsError):
    def __init__(self, where: str):
        super().__init__(f"本徵基底退化（{where}），無法建立雙正交基")
        self.where = where


class ExceptionalPoint(PhysicsError):
    def __init__(self, bond: int, t: float, g: float):
        super().__init__(f"鍵 {bond} 位於例外點附近：|t{bond}|={abs(t):g} ≈ |c{bond}|={abs(g):g}")
        self.bond = bond


class GapClosing(PhysicsError):
    def __init__(self, lhs: float, rhs: float):
        super().__init__(f"OBC 體態崩塌：|t₁²−γ₁²|={lhs:g} ≈ |t₂²−γ₂²|={rhs:g}")


@dataclass(frozen=True)
class BondChain:
    """H[a,b] = t+c、H[b,a] = t−c 的 SSH 鏈，加上 X 的對角線常數"""
    t1: float
    t2: float
    c1: float
    c2: float
    diag: float
    boundary: str
    N: int

    @property
    def n(self) -> int:
        return site_count(self)

    def hamiltonian(self) -> np.ndarray:
        return hopping_matrix(self, self.t1, self.t2, self.c1, self.c2, 0.0)

    def damping(self) -> np.ndarray:
        """diag·I + i·U·H·U⁻¹"""
        u = unitary_u(self.n)
        return self.diag * np.eye(self.n) + 1j * (u[:, None] * self.hamiltonian() * u.conj()[None, :])


def chain_of(spec: ChainSpec) -> BondChain:
    r = derive_rates(spec)
    return BondChain(spec.t1, spec.t2, r.g1, r.g2, r.g, spec.boundary, spec.N)


def effective_chain(spec: ChainSpec) -> BondChain:
    r = derive_rates(spec)
    s0 = build_H_eff(spec).s0
    return BondChain(spec.t1, spec.t2, r.e1, r.e2, r.e + s0, spec.boundary, spec.N)


@dataclass(frozen=True)
class ModeLabel:
    """zero（OBC 零模）、bulk(ν, q)、numeric(k)（數值 fallback 的第 k 個本徵值）"""
    kind: str
    nu: int = 0
    q: float = 0.0
    index: int = -1

    @classmethod
    def zero(cls) -> "ModeLabel":
        return cls("zero")

    @classmethod
    def bulk(cls, nu: int, q: float) -> "ModeLabel":
        return cls("bulk", nu=nu, q=float(q))

    def __str__(self) -> str:
        if self.kind == "zero":
            return "0"
        if self.kind == "numeric":
            return f"#{self.index}"
        return f"({'+' if self.nu > 0 else '-'};{self.q:.17g})"


@dataclass
class ModeSet:
    labels: list
    betas: np.ndarray
    psiR: np.ndarray            # 欄 = X 的右本徵向量
    psiL: np.ndarray            # 欄 = X 的左本徵向量（X†ψ_L = β*ψ_L）
    bio_residual: float = 0.0
    source: str = "exact"

    @property
    def n(self) -> int:
        return len(self.betas)

    @property
    def gap(self) -> float:
        return float(2 * np.min(self.betas.real))

    def eigen_residual(self, X: np.ndarray) -> float:
        r = X @ self.psiR - self.psiR * self.betas[None, :]
        l = X.conj().T @ self.psiL - self.psiL * self.betas.conj()[None, :]
        return float(max(np.max(np.abs(r)), np.max(np.abs(l))))

    def propagator(self, t: float) -> np.ndarray:
        """e^{−Xt} = ψ_R · diag(e^{−βt}) · ψ_L†"""
        return (self.psiR * np.exp(-self.betas * t)[None, :]) @ self.psiL.conj().T


def _biortho_residual(psiR, psiL) -> float:
    return float(np.max(np.abs(psiL.conj().T @ psiR - np.eye(psiR.shape[1]))))


def pbc_grid(N: int) -> np.ndarray:
    return 2 * np.pi * np.arange(-(N // 2), N - N // 2) / N


def obc_grid(N: int) -> np.ndarray:
    return np.pi * np.arange(1, N) / N


def _pbc_inner(ch: BondChain, q):
    q = np.asarray(q, dtype=complex)
    z = (ch.t1 ** 2 + ch.t2 ** 2 - ch.c1 ** 2 - ch.c2 ** 2
         + 2 * (ch.t1 * ch.t2 + ch.c1 * ch.c2) * np.cos(q)
         + 2j * (ch.t1 * ch.c2 + ch.t2 * ch.c1) * np.sin(q))
    # sin(±π) 的捨入殘差不能決定 √ 落在哪一葉：β₊(−π) 取 +i√
    return np.where(np.abs(z.imag) <= 1e-14 * np.maximum(1.0, np.abs(z)), z.real + 0j, z)


def pbc_inner(spec: ChainSpec, q):
    """E² = h_AB·h_BA，q 可為複數"""
    return _pbc_inner(chain_of(spec), q)


def _obc_product(ch: BondChain) -> complex:
    """√((t₁²−c₁²)(t₂²−c₂²))，主分支"""
    return np.sqrt(complex((ch.t1 ** 2 - ch.c1 ** 2) * (ch.t2 ** 2 - ch.c2 ** 2)))


def _obc_inner(ch: BondChain, q):
    base = ch.t1 ** 2 + ch.t2 ** 2 - ch.c1 ** 2 - ch.c2 ** 2
    return base + 2 * _obc_product(ch) * np.cos(np.asarray(q, dtype=float))


def chain_rapidities(ch: BondChain):
    labels, betas = [], []
    if ch.boundary == "PBC":
        qs = pbc_grid(ch.N)
        E = np.sqrt(_pbc_inner(ch, qs))
    else:
        labels.append(ModeLabel.zero())
        betas.append(complex(ch.diag))
        qs = obc_grid(ch.N)
        E = np.sqrt(_obc_inner(ch, qs).astype(complex))
    for q, e in zip(qs, E):
        for nu in (1, -1):
            labels.append(ModeLabel.bulk(nu, q))
            betas.append(ch.diag + 1j * nu * e)
    return labels, np.array(betas, dtype=complex)


def rapidities_closed_form(spec: ChainSpec):
    """回傳 (labels, betas)；PBC 依 q 排 (+, −)，OBC 先零模再依 q 排 (+, −)"""
    return chain_rapidities(chain_of(spec))


def _pbc_modes(ch: BondChain) -> ModeSet:
    N, n = ch.N, ch.n
    cells = np.arange(1, N + 1)
    u = unitary_u(n)
    labels, betas = [], []
    R = np.zeros((n, n), dtype=complex)
    L = np.zeros((n, n), dtype=complex)
    col = 0
    for q in pbc_grid(N):
        h_ab = ch.t1 + ch.c1 + (ch.t2 - ch.c2) * np.exp(-1j * q)
        h_ba = ch.t1 - ch.c1 + (ch.t2 + ch.c2) * np.exp(1j * q)
        E2 = complex(_pbc_inner(ch, q))
        if abs(E2) < ZERO_PIVOT_TOL:
            raise DegenerateBasis(f"PBC q={q:.6g} 處 E=0")
        E = np.sqrt(E2)
        phase = np.exp(1j * q * cells) / math.sqrt(N)
        for nu in (1, -1):
            e = nu * E
            # ψ_R = (h_AB/E, 1)/√2；ψ_L(q, γᵢ) = ψ_R(q, −γᵢ) = (h_BA*/E*, 1)/√2
            uR = np.array([h_ab / e, 1.0]) / math.sqrt(2)
            uL = np.array([np.conj(h_ba) / np.conj(e), 1.0]) / math.sqrt(2)
            R[0::2, col] = phase * uR[0]
            R[1::2, col] = phase * uR[1]
            L[0::2, col] = phase * uL[0]
            L[1::2, col] = phase * uL[1]
            labels.append(ModeLabel.bulk(nu, q))
            betas.append(ch.diag + 1j * e)
            col += 1
    R = u[:, None] * R
    L = u[:, None] * L
    return ModeSet(labels, np.array(betas), R, L, _biortho_residual(R, L))


def pbc_eigensystem(spec: ChainSpec) -> ModeSet:
    if spec.boundary != "PBC":
        raise ValueError("pbc_eigensystem 只接受 PBC")
    return _pbc_modes(chain_of(spec))


def _check_obc_solvable(ch: BondChain):
    for bond, t, c in ((1, ch.t1, ch.c1), (2, ch.t2, ch.c2)):
        if min(abs(t - c), abs(t + c)) <= EP_TOL * max(1.0, abs(t), abs(c)):
            raise ExceptionalPoint(bond, t, c)
    lhs, rhs = abs(ch.t1 ** 2 - ch.c1 ** 2), abs(ch.t2 ** 2 - ch.c2 ** 2)
    if abs(lhs - rhs) <= EP_TOL * max(1.0, lhs, rhs):
        raise GapClosing(lhs, rhs)


def _ladder(n: int, rho1: complex, rho2: complex) -> np.ndarray:
    # d₁ = 1，之後依序乘上 ρ₁（A→B）、ρ₂（B→A）
    d = np.ones(n, dtype=complex)
    for a in range(1, n):
        d[a] = d[a - 1] * (rho1 if a % 2 == 1 else rho2)
    return d


def similarity_transform(spec: ChainSpec) -> np.ndarray:
    """R = R₁R₂（對角），rᵢ = √((tᵢ−γᵢ)/(tᵢ+γᵢ)) 取主分支；R⁻¹·H_S·R 為對稱矩陣"""
    ch = chain_of(spec)
    for bond, t, c in ((1, ch.t1, ch.c1), (2, ch.t2, ch.c2)):
        if min(abs(t - c), abs(t + c)) <= EP_TOL * max(1.0, abs(t), abs(c)):
            raise ExceptionalPoint(bond, t, c)
    r1 = np.sqrt(complex((ch.t1 - ch.c1) / (ch.t1 + ch.c1)))
    r2 = np.sqrt(complex((ch.t2 - ch.c2) / (ch.t2 + ch.c2)))
    return np.diag(_ladder(site_count(spec), r1, r2))


def similarity_hoppings(spec: ChainSpec):
    """(t̄₁, t̄₂) = (√(t₁²−γ₁²), √(t₂²−γ₂²))"""
    r = derive_rates(spec)
    return (np.sqrt(complex(spec.t1 ** 2 - r.g1 ** 2)),
            np.sqrt(complex(spec.t2 ** 2 - r.g2 ** 2)))


def _obc_modes(ch: BondChain) -> ModeSet:
    _check_obc_solvable(ch)
    N, n = ch.N, ch.n
    a1, b1 = ch.t1 + ch.c1, ch.t1 - ch.c1
    a2, b2 = ch.t2 + ch.c2, ch.t2 - ch.c2
    u = unitary_u(n)

    # 分支要與閉式一致：t̄₁t̄₂ = √((t₁²−γ₁²)(t₂²−γ₂²))（主分支）
    rho1 = np.sqrt(complex(b1 / a1))
    tb1 = a1 * rho1
    tb2 = _obc_product(ch) / tb1
    rho2 = tb2 / a2
    d = _ladder(n, rho1, rho2)

    labels, betas, cols_R, cols_L = [], [], [], []

    # 零模：只佔 A 子晶格，ψ_R0 ∝ r_R^j、ψ_L0 ∝ r_L^j，𝒩_R = 𝒩_L* = √(𝒩_L*𝒩_R)
    rR, rL = -b1 / a2, -a1 / b2
    j = np.arange(1, N + 1)
    prod = np.sum((np.conj(rL) * rR) ** j)
    if abs(prod) < ZERO_PIVOT_TOL:
        raise DegenerateBasis("OBC 零模自我正交")
    norm = np.sqrt(1.0 / complex(prod))
    psiR0 = np.zeros(n, dtype=complex)
    psiL0 = np.zeros(n, dtype=complex)
    psiR0[0::2] = norm * complex(rR) ** j
    psiL0[0::2] = np.conj(norm) * complex(rL) ** j
    labels.append(ModeLabel.zero())
    betas.append(complex(ch.diag))
    cols_R.append(psiR0)
    cols_L.append(psiL0)

    # 體態：對稱鏈上 φ(B_j) = sin(qj)、φ(A_j) = [t̄₁ sin(qj) + t̄₂ sin(q(j−1))]/E
    for q in obc_grid(N):
        E2 = complex(_obc_inner(ch, q))
        if abs(E2) < ZERO_PIVOT_TOL:
            raise DegenerateBasis(f"OBC q={q:.6g} 處 E=0")
        E = np.sqrt(E2)
        for nu in (1, -1):
            e = nu * E
            phi = np.zeros(n, dtype=complex)
            phi[1::2] = np.sin(q * np.arange(1, N))
            phi[0::2] = (tb1 * np.sin(q * j) + tb2 * np.sin(q * (j - 1))) / e
            s = phi @ phi
            if abs(s) < ZERO_PIVOT_TOL:
                raise DegenerateBasis(f"OBC q={q:.6g} 處體態自我正交")
            phi = phi / np.sqrt(s)
            cols_R.append(d * phi)
            cols_L.append(np.conj(phi / d))
            labels.append(ModeLabel.bulk(nu, q))
            betas.append(ch.diag + 1j * e)

    R = u[:, None] * np.array(cols_R).T
    L = u[:, None] * np.array(cols_L).T
    return ModeSet(labels, np.array(betas), R, L, _biortho_residual(R, L))


def obc_eigensystem(spec: ChainSpec) -> ModeSet:
    if spec.boundary != "OBC":
        raise ValueError("obc_eigensystem 只接受 OBC")
    return _obc_modes(chain_of(spec))


@dataclass
class NumericSpectrum:
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: float            # max_i 1/|v_Lᵢ^H v_Rᵢ|（單位向量），本徵值條件數
    defective: bool
    notes: list = field(default_factory=list)


def _clusters(w: np.ndarray, tol: float):
    left = list(range(len(w)))
    out = []
    while left:
        i = left.pop(0)
        grp = [i] + [k for k in left if abs(w[k] - w[i]) <= tol]
        left = [k for k in left if k not in grp]
        out.append(grp)
    return out


def numeric_spectrum(X: np.ndarray) -> NumericSpectrum:
    """稠密非對稱本徵分解；左向量逐群雙正交化，缺陷時標記而不硬做正規化"""
    X = np.asarray(X)
    w, vl, vr = sla.eig(X, left=True, right=True)
    vr = vr / np.linalg.norm(vr, axis=0)[None, :]
    vl = vl / np.linalg.norm(vl, axis=0)[None, :]
    overlap = np.abs(np.sum(vl.conj() * vr, axis=0))
    cond = float(np.max(1.0 / np.maximum(overlap, 1e-300))) if len(w) else 1.0
    scale = max(1.0, float(np.max(np.abs(w)))) if len(w) else 1.0

    defective, notes = False, []
    for grp in _clusters(w, CLUSTER_TOL * scale):
        G = vl[:, grp].conj().T @ vr[:, grp]
        sv = np.linalg.svd(G, compute_uv=False)
        if sv[-1] < DEFECT_TOL:
            defective = True
            notes.append(f"本徵值 {w[grp[0]]:.6g} 附近（重數 {len(grp)}）基底缺陷")
            continue
        vl[:, grp] = vl[:, grp] @ np.linalg.inv(G).conj().T
    return NumericSpectrum(values=w, right=vr, left=vl, condition=cond,
                           defective=defective, notes=notes)


def numeric_modes(X: np.ndarray) -> ModeSet:
    ns = numeric_spectrum(X)
    if ns.defective:
        raise DegenerateBasis("; ".join(ns.notes) or "數值本徵基底缺陷")
    labels = [ModeLabel("numeric", index=k) for k in range(len(ns.values))]
    return ModeSet(labels, ns.values, ns.right, ns.left,
                   _biortho_residual(ns.right, ns.left), source="numeric")


def chain_modes(ch: BondChain) -> ModeSet:
    """優先用精確解；EP / 能隙閉合 / 退化時改用數值本徵分解（仍缺陷則拋 DegenerateBasis）"""
    try:
        return _pbc_modes(ch) if ch.boundary == "PBC" else _obc_modes(ch)
    except (ExceptionalPoint, GapClosing, DegenerateBasis):
        return numeric_modes(ch.damping())


def mode_set(spec: ChainSpec) -> ModeSet:
    ms = chain_modes(chain_of(spec))
    if ms.source == "numeric":
        # 以實數矩陣重算，避免 i·U·H·U⁻¹ 的捨入
        return numeric_modes(build_damping(spec).Xc)
    return ms


def match_spectra(a, b) -> float:
    """兩組複數本徵值作為多重集合的最大配對距離（指派問題）"""
    a, b = np.asarray(a), np.asarray(b)
    if len(a) != len(b):
        raise ValueError(f"本徵值數目不同：{len(a)} vs {len(b)}")
    if not len(a):
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    i, k = linear_sum_assignment(cost)
    return float(cost[i, k].max())


def spectral_identity_residual(spec: ChainSpec) -> float:
    """eig(X_c) 與 {γ + i·eig(H_S)} 的多重集合距離"""
    g = derive_rates(spec).g
    xs = sla.eigvals(build_damping(spec).Xc)
    hs = sla.eigvals(build_H_S(spec))
    return match_spectra(xs, g + 1j * hs)


def shift_relation_residual(spec: ChainSpec) -> float:
    """OBC 體態快速度 vs PBC 公式在 q − i·ln r 處的值（多重集合比較）"""
    ch = chain_of(spec.with_(boundary="OBC"))
    a1, b1 = ch.t1 + ch.c1, ch.t1 - ch.c1
    a2, b2 = ch.t2 + ch.c2, ch.t2 - ch.c2
    rr = np.sqrt(complex((b1 / a2) / (a1 / b2)))        # r = √(r_R / r_L)
    shifted = np.sqrt(_pbc_inner(ch, obc_grid(ch.N) - 1j * np.log(rr)))
    _, betas = chain_rapidities(ch)
    target = np.concatenate([ch.diag + 1j * shifted, ch.diag - 1j * shifted])
    return match_spectra(betas[1:], target)
