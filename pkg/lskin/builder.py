# -*- coding: utf-8 -*-
"""
矩陣建構：實空間 H₀ / M₁ / M₂、阻尼矩陣 X 與 Y、Bloch 區塊、NH SSH 矩陣 H_S、有效哈密頓量 H_eff

鍵的方向約定（0-based 索引）：鍵 (a, b) 一律 b = a+1，PBC 多一條 (n-1, 0) 的環繞鍵。
    a 為 A 位點 → 胞內鍵（鍵 1），號誌 s = +1
    a 為 B 位點 → 胞間鍵（鍵 2），號誌 s = −1

    −4iH₀ = T：  T[a,b] = s·t      T[b,a] = −s·t
    2M₁ = γ·I + G：G[a,b] = G[b,a] = s·γ_bond
    X_c = T + 2M₁ 為實矩陣，對角線全為 γ
    H_S[a,b] = t + γ_bond       H_S[b,a] = t − γ_bond
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChainSpec, derive_rates, site_count


@dataclass
class RealSpaceMatrices:
    H0: np.ndarray
    M1: np.ndarray
    M2: np.ndarray


@dataclass
class DampingBlocks:
    Xc: np.ndarray              # X_c = X_d = −4iH₀ + 2M₁（實）
    M2: np.ndarray
    A0: float                   # ½Tr[X] = nγ

    @property
    def n(self) -> int:
        return self.Xc.shape[0]

    @property
    def X(self) -> np.ndarray:
        """2n×2n 的 blockdiag(X_c, X_d)"""
        z = np.zeros_like(self.Xc)
        return np.block([[self.Xc, z], [z, self.Xc]])

    @property
    def Y(self) -> np.ndarray:
        """Y = 4·[[0, M₂], [−M₂, 0]]"""
        z = np.zeros_like(self.M2)
        return 4.0 * np.block([[z, self.M2], [-self.M2, z]])


@dataclass
class BlochBlocks:
    q: float
    H0q: np.ndarray
    M1q: np.ndarray
    M2q: np.ndarray
    Xq: np.ndarray
    HSq: np.ndarray


@dataclass
class EffectiveModel:
    Heff: np.ndarray
    s0: float                   # (γ−η)/2 · n

    @property
    def Xeff(self) -> np.ndarray:
        """無躍遷演化的阻尼矩陣 iU·H_effᵀ·U⁻¹ + s₀，本徵值為 η + iE(η) + s₀"""
        u = unitary_u(self.Heff.shape[0])
        return 1j * (u[:, None] * self.Heff.T * u.conj()[None, :]) + self.s0 * np.eye(len(u))


def bonds(spec: ChainSpec):
    """逐條列出 (a, b, kind)；kind = 1 胞內、2 胞間（含 PBC 環繞）"""
    n = site_count(spec)
    out = [(a, a + 1, 1 if a % 2 == 0 else 2) for a in range(n - 1)]
    if spec.boundary == "PBC":
        out.append((n - 1, 0, 2))
    return out


def unitary_u(n: int) -> np.ndarray:
    """U = diag{1, i, 1, i, …}（只回傳對角線）"""
    return np.where(np.arange(n) % 2 == 0, 1.0 + 0j, 1j)


def hopping_matrix(spec: ChainSpec, t1, t2, c1, c2, diag):
    """依鍵方向填入 [a,b] = t+c、[b,a] = t−c 的三對角（+環繞）矩陣"""
    n = site_count(spec)
    K = np.zeros((n, n), dtype=complex)
    np.fill_diagonal(K, diag)
    for a, b, kind in bonds(spec):
        t, c = (t1, c1) if kind == 1 else (t2, c2)
        K[a, b] += t + c
        K[b, a] += t - c
    return K


def build_real_space(spec: ChainSpec) -> RealSpaceMatrices:
    r = derive_rates(spec)
    n = site_count(spec)
    T = np.zeros((n, n))
    G = np.zeros((n, n))
    E = np.zeros((n, n))
    for a, b, kind in bonds(spec):
        s = 1.0 if kind == 1 else -1.0
        t = spec.t1 if kind == 1 else spec.t2
        T[a, b] += s * t
        T[b, a] -= s * t
        g = r.g1 if kind == 1 else r.g2
        e = r.e1 if kind == 1 else r.e2
        G[a, b] += s * g
        G[b, a] += s * g
        E[a, b] += s * e
        E[b, a] += s * e
    I = np.eye(n)
    return RealSpaceMatrices(
        H0=0.25j * T,
        M1=(r.g * I + G) / 2,
        M2=(r.e * I + E) / 2,
    )


def build_damping(spec: ChainSpec) -> DampingBlocks:
    rs = build_real_space(spec)
    Xc = -4j * rs.H0 + 2 * rs.M1
    # −4iH₀ 與 2M₁ 都是實矩陣，虛部只剩捨入誤差
    Xc = np.real_if_close(Xc, tol=1000).astype(float)
    n = Xc.shape[0]
    return DampingBlocks(Xc=Xc, M2=rs.M2.real.astype(float),
                         A0=float(n * derive_rates(spec).g))


def build_H_S(spec: ChainSpec) -> np.ndarray:
    r = derive_rates(spec)
    return hopping_matrix(spec, spec.t1, spec.t2, r.g1, r.g2, 0.0)


def ssh_identity_residual(spec: ChainSpec) -> float:
    """‖X_c − (γ·I + i·U·H_S·U⁻¹)‖∞"""
    d = build_damping(spec)
    u = unitary_u(d.n)
    rebuilt = derive_rates(spec).g * np.eye(d.n) + 1j * (u[:, None] * build_H_S(spec) * u.conj()[None, :])
    return float(np.max(np.abs(d.Xc - rebuilt)))


def _bloch_block(q: float, diag, ab0, ba0, ab1, ba1) -> np.ndarray:
    # (Kψ)(A_j) = K[A_j,B_j]ψ(B_j) + K[A_{j+1},B_j]ψ(B_{j−1})，ψ ∝ e^{iqj}
    return np.array([[diag, ab0 + ab1 * np.exp(-1j * q)],
                     [ba0 + ba1 * np.exp(1j * q), diag]], dtype=complex)


def build_bloch(spec: ChainSpec, q: float) -> BlochBlocks:
    if spec.boundary != "PBC":
        raise ValueError("Bloch 區塊只對 PBC 有定義")
    r = derive_rates(spec)
    t1, t2 = spec.t1, spec.t2
    T = _bloch_block(q, 0.0, t1, -t1, t2, -t2)
    M1 = _bloch_block(q, r.g / 2, r.g1 / 2, r.g1 / 2, -r.g2 / 2, -r.g2 / 2)
    M2 = _bloch_block(q, r.e / 2, r.e1 / 2, r.e1 / 2, -r.e2 / 2, -r.e2 / 2)
    HS = _bloch_block(q, 0.0, t1 + r.g1, t1 - r.g1, t2 - r.g2, t2 + r.g2)
    H0 = 0.25j * T
    return BlochBlocks(q=q, H0q=H0, M1q=M1, M2q=M2, Xq=-4j * H0 + 2 * M1, HSq=HS)


def h_offdiag(spec: ChainSpec, q):
    """H_S(q) 的兩個非對角元 (h_AB, h_BA)；q 可為複數（動量平移用）"""
    r = derive_rates(spec)
    q = np.asarray(q)
    h_ab = spec.t1 + r.g1 + (spec.t2 - r.g2) * np.exp(-1j * q)
    h_ba = spec.t1 - r.g1 + (spec.t2 + r.g2) * np.exp(1j * q)
    return h_ab, h_ba


def build_H_eff(spec: ChainSpec) -> EffectiveModel:
    r = derive_rates(spec)
    n = site_count(spec)
    # [a,b] = t − ηᵢ、[b,a] = t + ηᵢ，在位 −iη
    Heff = hopping_matrix(spec, spec.t1, spec.t2, -r.e1, -r.e2, -1j * r.e)
    return EffectiveModel(Heff=Heff, s0=(r.g - r.e) / 2 * n)
