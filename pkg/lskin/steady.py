# -*- coding: utf-8 -*-
"""
穩態：共變異數的 Sylvester 方程、可解極限的解析形式、NESS 分類、穩態占據與穩態電流

    X†C + CX = iY            X = blockdiag(X_c, X_c)，Y = 4·[[0, M₂], [−M₂, 0]]
    可解極限（M₂ ∝ M₁）：C_ss = (iη/γ)·[[0, I], [−I, 0]]
    n_ss = (γ−η)/(2γ)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .builder import build_damping
from .exact import (DegenerateBasis, ModeLabel, mode_set, numeric_spectrum, pbc_grid,
                    rapidities_closed_form)
from .model import ChainSpec, DerivedRates, PhysicsError, derive_rates
from .topology import UnsupportedBranch

# Liouvillian 能隙低於此值 → 穩態不唯一
SINGULAR_GAP = 1e-10

# Sylvester 殘差上限；本徵法超過時改用 Schur 法
SYLVESTER_TOL = 1e-10

# Kronecker 展開（n⁶）只在這個大小以下使用
KRON_MAX_N = 40

# δ_{t₁,t₂} 的相對容差
DELTA_TOL = 1e-9

# 數值判定 Re β = 0 的門檻
ZERO_RATE_TOL = 1e-9


class SingularSylvester(PhysicsError):
    def __init__(self, gap: float):
        super().__init__(f"Liouvillian 能隙 {gap:.3g} ≈ 0，Sylvester 方程奇異（穩態不唯一）")
        self.gap = gap


class NotSolvable(PhysicsError):
    def __init__(self, rates: DerivedRates):
        super().__init__(f"不在可解極限：(γ₁,η₁)=({rates.g1:g},{rates.e1:g})、"
                         f"(γ₂,η₂)=({rates.g2:g},{rates.e2:g}) 不成比例")


@dataclass
class Covariance:
    """2n×2n 的 Majorana 配對矩陣（純虛、反對稱）；t = inf 表示穩態"""
    C: np.ndarray
    t: float = math.inf

    @property
    def n(self) -> int:
        return self.C.shape[0] // 2

    def block(self, name: str) -> np.ndarray:
        n = self.n
        rows = slice(0, n) if name[0] == "c" else slice(n, 2 * n)
        cols = slice(0, n) if name[1] == "c" else slice(n, 2 * n)
        return self.C[rows, cols]

    def antisymmetry(self) -> float:
        return float(np.max(np.abs(self.C + self.C.T)))

    def imaginarity(self) -> float:
        """|Re C| 的最大值；純虛時為 0"""
        return float(np.max(np.abs(self.C.real)))

    def __add__(self, other: "Covariance") -> "Covariance":
        return Covariance(self.C + other.C, self.t)

    def __sub__(self, other: "Covariance") -> "Covariance":
        return Covariance(self.C - other.C, self.t)


def pairing_block(n: int, diag) -> np.ndarray:
    """[[0, D], [−D, 0]]，D = diag(diag)"""
    D = np.diag(np.broadcast_to(np.asarray(diag, dtype=complex), (n,)))
    z = np.zeros((n, n), dtype=complex)
    return np.block([[z, D], [-D, z]])


def sylvester_residual(X: np.ndarray, Y: np.ndarray, C: np.ndarray) -> float:
    return float(np.max(np.abs(X.conj().T @ C + C @ X - 1j * Y)))


def _gap(values: np.ndarray) -> float:
    return float(2 * np.min(values.real)) if len(values) else math.inf


def _eigen_solve(R, L, betas, rhs) -> np.ndarray:
    """X†Z + ZX = rhs，X = R·diag(β)·L†：Z = L·[R†·rhs·R / (β_m* + β_l)]·L†"""
    den = betas.conj()[:, None] + betas[None, :]
    return L @ ((R.conj().T @ rhs @ R) / den) @ L.conj().T


def _kron_solve(X, rhs) -> np.ndarray:
    m = X.shape[0]
    I = np.eye(m)
    # vec(X†Z) + vec(ZX) = (I⊗X† + Xᵀ⊗I)·vec(Z)（按欄展開）
    K = np.kron(I, X.conj().T) + np.kron(X.T, I)
    z = np.linalg.solve(K, rhs.reshape(-1, order="F"))
    return z.reshape(m, m, order="F")


def solve_sylvester(X: np.ndarray, Y: np.ndarray, method: str = "eigen") -> Covariance:
    """通用 Sylvester 求解（不限可解極限）；method = eigen | schur | kron"""
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    rhs = 1j * Y
    ns = numeric_spectrum(X)
    gap = _gap(ns.values)
    if gap < SINGULAR_GAP:
        raise SingularSylvester(gap)

    C = None
    if method == "eigen" and not ns.defective:
        C = _eigen_solve(ns.right, ns.left, ns.values, rhs)
        if sylvester_residual(X, Y, C) > SYLVESTER_TOL:
            C = None
    if C is None and method in ("eigen", "schur"):
        C = sla.solve_sylvester(X.conj().T, X, rhs)
        if sylvester_residual(X, Y, C) > SYLVESTER_TOL and X.shape[0] <= 2 * KRON_MAX_N:
            C = None
    if C is None:
        if X.shape[0] > 2 * KRON_MAX_N:
            raise ValueError(f"Kronecker 解法只支援 n ≤ {KRON_MAX_N}")
        C = _kron_solve(X, rhs)
    C = (C - C.T) / 2
    return Covariance(C)


def steady_covariance(spec: ChainSpec) -> Covariance:
    """以模態基底逐區塊求解：C_cc = C_dd = 0，C_cd = Z，C_dc = −Zᵀ，其中 X_c†Z + ZX_c = 4iM₂"""
    rates = derive_rates(spec)
    rates.require_open()
    d = build_damping(spec)
    rhs = 4j * d.M2
    try:
        ms = mode_set(spec)
    except DegenerateBasis:
        # EP 上沒有完整的本徵基底，只能走 Schur
        ms = None
    gap = ms.gap if ms is not None else _gap(sla.eigvals(d.Xc))
    if gap < SINGULAR_GAP:
        raise SingularSylvester(gap)
    Z = None
    if ms is not None:
        Z = _eigen_solve(ms.psiR, ms.psiL, ms.betas, rhs)
    if Z is None or np.max(np.abs(d.Xc.T @ Z + Z @ d.Xc - rhs)) > SYLVESTER_TOL:
        Z = sla.solve_sylvester(d.Xc.T.astype(complex), d.Xc.astype(complex), rhs)
    n = d.n
    z = np.zeros((n, n), dtype=complex)
    C = np.block([[z, Z], [-Z.T, z]])
    return Covariance((C - C.T) / 2)


def covariance_solvable(rates: DerivedRates, n: int) -> Covariance:
    if not rates.solvable:
        raise NotSolvable(rates)
    return Covariance(pairing_block(n, 1j * rates.ratio))


def steady_occupation(rates: DerivedRates) -> float:
    rates.require_open()
    return (rates.g - rates.e) / (2 * rates.g)


@dataclass
class NessClass:
    kind: str                           # Unique | Degenerate | Quasi
    modes: list = field(default_factory=list)
    frequency: float = 0.0              # Quasi：|Im β|
    source: str = "closed-form"

    def __str__(self) -> str:
        if self.kind == "Unique":
            return "Unique"
        ms = ", ".join(str(m) for m in self.modes)
        if self.kind == "Quasi":
            return f"Quasi[{ms}] ω={self.frequency:.6g}"
        return f"Degenerate[{ms}]"


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= DELTA_TOL * max(1.0, abs(a), abs(b))


def _numeric_ness(spec: ChainSpec) -> NessClass:
    labels, betas = rapidities_closed_form(spec)
    hit = [k for k, b in enumerate(betas) if abs(b.real) < ZERO_RATE_TOL]
    if not hit:
        return NessClass("Unique", source="grid")
    modes = [labels[k] for k in hit]
    freq = max(abs(betas[k].imag) for k in hit)
    if freq > ZERO_RATE_TOL:
        return NessClass("Quasi", modes, freq, source="grid")
    return NessClass("Degenerate", modes, source="grid")


def classify_ness(spec: ChainSpec) -> NessClass:
    r = derive_rates(spec)
    t1, t2 = spec.t1, spec.t2
    if r.g0 > 0:
        return NessClass("Unique")
    if spec.boundary == "OBC":
        if t1 != 0:
            return NessClass("Unique")
        return _numeric_ness(spec)
    if r.g1 > 0 and r.g2 > 0:
        if _close(t1, t2):
            return NessClass("Degenerate", [ModeLabel.bulk(1, -np.pi)])
        return _numeric_ness(spec)
    if r.g2 == 0 and r.g1 > 0:
        if _close(abs(t1), abs(t2)):
            q = -np.pi / 2 * (np.sign(t1 * t2) + 1)
            return NessClass("Degenerate", [ModeLabel.bulk(1, q)])
        if abs(t1) < abs(t2):
            qs = math.acos(-t1 / t2)
            return NessClass("Quasi", [ModeLabel.bulk(1, qs), ModeLabel.bulk(-1, -qs)],
                             math.sqrt(t2 * t2 - t1 * t1))
        return NessClass("Unique")
    return _numeric_ness(spec)


def quasi_on_grid(spec: ChainSpec) -> bool:
    """arccos(−t₁/t₂) 是否落在 PBC 動量網格上（有限 N 的準穩態才不衰減）"""
    if abs(spec.t1) >= abs(spec.t2):
        return False
    qs = math.acos(-spec.t1 / spec.t2)
    return bool(np.any(np.abs(pbc_grid(spec.N) - qs) < 1e-9))


@dataclass
class CurrentEstimate:
    value: float
    kind: str                           # zero | persistent | quasi
    correction: float = 0.0             # O(1/N²) 振盪修正（order=2）
    note: str = ""

    @property
    def total(self) -> float:
        return self.value + self.correction


def steady_current(spec: ChainSpec, order: int = 1, t: float | None = None) -> CurrentEstimate:
    """長時間電流的解析預測；order=2 且給定 t 時加上準穩態的振盪修正"""
    r = derive_rates(spec)
    r.require_open()
    if spec.boundary == "OBC":
        return CurrentEstimate(0.0, "zero", note="OBC：NESS 唯一，電流終止")
    if r.g0 > 0:
        return CurrentEstimate(0.0, "zero", note="在位耗散撐開能隙，NESS 唯一")
    N, t1, t2 = spec.N, spec.t1, spec.t2
    pref = (r.g + r.e) / r.g / (2 * N)
    if r.g1 > 0 and r.g2 > 0:
        if _close(t1, t2):
            return CurrentEstimate(pref, "persistent")
        return CurrentEstimate(0.0, "zero")
    if r.g2 == 0 and r.g1 > 0:
        if _close(t1, t2):
            return CurrentEstimate(pref, "persistent")
        if _close(t1, -t2) or abs(t1) > abs(t2):
            return CurrentEstimate(0.0, "zero")
        if t2 <= 0:
            raise UnsupportedBranch("準穩態電流公式需要 t₂ > 0")
        lead = pref * (t1 + t2) / t2
        corr = 0.0
        if order >= 2:
            if t is None:
                raise ValueError("order=2 需要時間 t")
            a = math.sqrt(1 - (t1 / t2) ** 2)
            w = 2 * t2 * a * t
            corr = (r.g + r.e) / r.g / (2 * N * N) * ((t1 + t2) / t2 * math.cos(w) + a * math.sin(w))
        note = "" if quasi_on_grid(spec) else "arccos(−t₁/t₂) 不在網格上，有限 N 下最終衰減"
        return CurrentEstimate(lead, "quasi", corr, note)
    raise UnsupportedBranch("γ₁ = 0 的穩態電流沒有閉式")
