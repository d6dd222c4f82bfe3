# -*- coding: utf-8 -*-
"""
模型參數：一條鍵耗散 SSH 鏈的所有物理輸入

位點編號（1-based）：奇數 = A 子晶格、偶數 = B 子晶格

    (1,A) (1,B) (2,A) (2,B) ... (N,A) (N,B)     PBC：n = 2N，最後一個 B 接回 (1,A)
    (1,A) (1,B) (2,A) (2,B) ... (N,A)           OBC：n = 2N-1，最後一格缺 B

耗散率以物理上的（loss, gain）成對存放，γᵢ / ηᵢ 一律由此推導，不直接設定：
    γᵢ = (γᵢˡ + γᵢᵍ)/2     總強度
    ηᵢ = (γᵢˡ − γᵢᵍ)/2     損耗與增益的差額，|ηᵢ| ≤ γᵢ
    γ  = γ₀ + γ₁ + γ₂       η = η₀ + η₁ + η₂
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

BOUNDARIES = ("PBC", "OBC")

# 可解極限的交叉相乘比對容差
SOLVABLE_TOL = 1e-12

RATE_FIELDS = ("gl1", "gg1", "gl2", "gg2", "gl0", "gg0")


class PhysicsError(ValueError):
    """所有物理上的失敗（EP、退化基底、無隙…）的共同父類別；CLI 對應 exit 2"""


class InvalidSpec(PhysicsError):
    def __init__(self, field_name: str, value, why: str):
        super().__init__(f"參數 {field_name}={value!r} 不合法：{why}")
        self.field_name, self.value = field_name, value


class ClosedSystem(PhysicsError):
    def __init__(self):
        super().__init__("γ = 0（封閉系統），穩態公式需要 γ > 0")


@dataclass(frozen=True)
class ChainSpec:
    """一個耗散 SSH 實例"""
    t1: float
    t2: float
    gl1: float = 0.0            # γ₁ˡ  鍵 1（胞內）損耗
    gg1: float = 0.0            # γ₁ᵍ  鍵 1 增益
    gl2: float = 0.0            # γ₂ˡ  鍵 2（胞間）損耗
    gg2: float = 0.0            # γ₂ᵍ  鍵 2 增益
    gl0: float = 0.0            # γ₀ˡ  在位損耗（預設 0）
    gg0: float = 0.0            # γ₀ᵍ  在位增益
    boundary: str = "PBC"
    N: int = 2

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise InvalidSpec("boundary", self.boundary, "只接受 PBC / OBC")
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 2:
            raise InvalidSpec("N", self.N, "單胞數須為 ≥ 2 的整數")
        for name in ("t1", "t2") + RATE_FIELDS:
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidSpec(name, v, "須為有限實數")
        for name in RATE_FIELDS:
            if getattr(self, name) < 0:
                raise InvalidSpec(name, getattr(self, name), "耗散率不可為負")

    @classmethod
    def from_rates(cls, t1: float, t2: float, g1: float = 0.0, g2: float = 0.0,
                   e1: float = 0.0, e2: float = 0.0, g0: float = 0.0, e0: float = 0.0,
                   boundary: str = "PBC", N: int = 2) -> "ChainSpec":
        """以 (γᵢ, ηᵢ) 建立；換算回 γᵢˡ = γᵢ+ηᵢ、γᵢᵍ = γᵢ−ηᵢ"""
        for name, g, e in (("e1", g1, e1), ("e2", g2, e2), ("e0", g0, e0)):
            if abs(e) > g + SOLVABLE_TOL:
                raise InvalidSpec(name, e, f"|η| 不可超過 γ={g}")
        return cls(t1=t1, t2=t2,
                   gl1=max(g1 + e1, 0.0), gg1=max(g1 - e1, 0.0),
                   gl2=max(g2 + e2, 0.0), gg2=max(g2 - e2, 0.0),
                   gl0=max(g0 + e0, 0.0), gg0=max(g0 - e0, 0.0),
                   boundary=boundary, N=N)

    @property
    def n(self) -> int:
        return site_count(self)

    @property
    def rates(self) -> "DerivedRates":
        return derive_rates(self)

    def with_(self, **kw) -> "ChainSpec":
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DerivedRates:
    g1: float
    g2: float
    e1: float
    e2: float
    g: float
    e: float
    solvable: bool
    g0: float = 0.0
    e0: float = 0.0

    @property
    def closed(self) -> bool:
        return self.g == 0.0

    def require_open(self):
        if self.g <= 0.0:
            raise ClosedSystem()
        return self

    @property
    def ratio(self) -> float:
        """η/γ，穩態共變異數的係數"""
        return self.require_open().e / self.g


def site_count(spec: ChainSpec) -> int:
    return 2 * spec.N if spec.boundary == "PBC" else 2 * spec.N - 1


def _proportional(g_a, e_a, g_b, e_b) -> bool:
    scale = max(1.0, abs(g_a), abs(g_b), abs(e_a), abs(e_b)) ** 2
    return abs(g_a * e_b - g_b * e_a) <= SOLVABLE_TOL * scale


def derive_rates(spec: ChainSpec) -> DerivedRates:
    g1 = (spec.gl1 + spec.gg1) / 2
    g2 = (spec.gl2 + spec.gg2) / 2
    g0 = (spec.gl0 + spec.gg0) / 2
    e1 = (spec.gl1 - spec.gg1) / 2
    e2 = (spec.gl2 - spec.gg2) / 2
    e0 = (spec.gl0 - spec.gg0) / 2

    # 可解 ⟺ M₂ ∝ M₁：各通道 (γₖ, ηₖ) 兩兩成比例。γ₀=η₀=0 時即
    # γ₁γ₂=0、或 γ₁η₂ = γ₂η₁、或 η₁=η₂=0
    pairs = [(g, e) for g, e in ((g0, e0), (g1, e1), (g2, e2)) if g > 0 or e != 0]
    solvable = all(_proportional(*pairs[a], *pairs[b])
                   for a in range(len(pairs)) for b in range(a + 1, len(pairs)))

    return DerivedRates(g1=g1, g2=g2, e1=e1, e2=e2,
                        g=g0 + g1 + g2, e=e0 + e1 + e2,
                        solvable=solvable, g0=g0, e0=e0)


@dataclass(frozen=True)
class InitialState:
    """初始占據：full（全滿）、single（單粒子於位點 site）、occ（逐點占據數）"""
    kind: str = "full"
    site: int | None = None             # 1-based
    values: tuple[float, ...] | None = None

    @classmethod
    def full(cls) -> "InitialState":
        return cls("full")

    @classmethod
    def single(cls, j: int) -> "InitialState":
        return cls("single", site=int(j))

    @classmethod
    def occupations(cls, v) -> "InitialState":
        return cls("occ", values=tuple(float(x) for x in v))

    def vector(self, n: int):
        """回傳長度 n 的占據數 v_j（list）；不合法時拋 InvalidSpec"""
        if self.kind == "full":
            return [1.0] * n
        if self.kind == "single":
            if self.site is None or not 1 <= self.site <= n:
                raise InvalidSpec("site", self.site, f"位點須在 1..{n}")
            return [1.0 if j == self.site else 0.0 for j in range(1, n + 1)]
        if self.kind == "occ":
            if self.values is None or len(self.values) != n:
                raise InvalidSpec("values", self.values, f"需要 {n} 個占據數")
            for x in self.values:
                if not 0.0 <= x <= 1.0:
                    raise InvalidSpec("values", x, "占據數須在 [0,1]")
            return list(self.values)
        raise InvalidSpec("kind", self.kind, "只接受 full / single / occ")

    def label(self) -> str:
        if self.kind == "single":
            return f"single:{self.site}"
        if self.kind == "occ":
            return "occ:" + ",".join(f"{x:g}" for x in (self.values or ()))
        return "full"
