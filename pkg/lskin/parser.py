# -*- coding: utf-8 -*-
"""
情境設定檔解析器：一行一個 `key = value`，`#` 之後為註解，一個檔案一個情境

    scenario = evolve
    t1 = 1
    t2 = 1
    gl1 = 1.5        # γ₁ˡ
    gg1 = 1.5        # γ₁ᵍ
    boundary = OBC
    N = 8
    times = 0:20:201:linear
    init = full

數值格式：
* sweep  `name:start:stop:step`（含端點；name 為 ChainSpec 欄位）
* times  `start:stop:count[:linear|log]`
* init   `full` | `single:<j>` | `single:center` | `occ:v1,v2,...`
* Ns     `8,10,12` 或 `8:16`
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .model import BOUNDARIES, RATE_FIELDS, ChainSpec, InitialState, InvalidSpec

SCENARIOS = ("spectrum", "gap", "topology", "steady", "evolve", "lifetime", "sweep")

SPEC_FIELDS = ("t1", "t2") + RATE_FIELDS + ("boundary", "N")

# sweep 情境可輸出的純量
OBSERVABLES = ("gap_obc", "gap_pbc", "gap_numeric", "winding", "topological", "abs_r2", "xi",
               "n_ss", "current", "lifetime")

LINE_RE = re.compile(r"^\s*(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*?)\s*$")

# sweep 值四捨五入的位數，避免 0.30000000000000004 之類的尾巴寫進 CSV
SWEEP_DIGITS = 12


class ParseError(ValueError):
    def __init__(self, lineno: int, line: str, why: str = "格式不符"):
        super().__init__(f"第 {lineno} 行{why}：{line[:60]!r}")
        self.lineno, self.line = lineno, line


@dataclass(frozen=True)
class Sweep:
    name: str
    start: float
    stop: float
    step: float

    def values(self) -> list:
        count = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        vals = [round(self.start + k * self.step, SWEEP_DIGITS) for k in range(count)]
        if self.name == "N":
            return [int(round(v)) for v in vals]
        return vals


@dataclass(frozen=True)
class TimeGrid:
    start: float = 0.0
    stop: float = 20.0
    count: int = 201
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class RunConfig:
    scenario: str
    params: dict                        # ChainSpec 欄位
    sweep: Sweep | None = None
    times: TimeGrid = field(default_factory=TimeGrid)
    init: str = "full"
    l: int = 3
    Ns: tuple = ()
    grid: int = 500
    method: str = "modesum"
    observable: str = "gap_numeric"
    svg: bool = False
    excel: bool = False

    @property
    def spec(self) -> ChainSpec:
        return ChainSpec(**self.params)

    def specs(self) -> list:
        """依 sweep 順序展開的 ChainSpec；沒有 sweep 時只有一個"""
        if self.sweep is None:
            return [self.spec]
        return [self.spec.with_(**{self.sweep.name: v}) for v in self.sweep.values()]

    def initial_state(self, spec: ChainSpec) -> InitialState:
        kind, _, arg = self.init.partition(":")
        if kind == "full":
            return InitialState.full()
        if kind == "single":
            return InitialState.single(spec.N if arg == "center" else int(arg))
        return InitialState.occupations(float(x) for x in arg.split(","))


def _float(s: str) -> float:
    return float(s)


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _sweep(s: str) -> Sweep:
    name, *nums = s.split(":")
    if name not in SPEC_FIELDS or name == "boundary" or len(nums) != 3:
        raise ValueError(s)
    sw = Sweep(name, *(float(x) for x in nums))
    if sw.step <= 0 or sw.stop < sw.start:
        raise ValueError(s)
    return sw


def _times(s: str) -> TimeGrid:
    parts = s.split(":")
    if len(parts) not in (3, 4):
        raise ValueError(s)
    tg = TimeGrid(float(parts[0]), float(parts[1]), int(parts[2]),
                  parts[3] if len(parts) == 4 else "linear")
    if tg.spacing not in ("linear", "log") or tg.count < 1 or tg.start < 0:
        raise ValueError(s)
    if tg.count > 1 and tg.stop <= tg.start:
        raise ValueError(s)
    if tg.spacing == "log" and tg.start <= 0:
        raise ValueError(s)
    return tg


def _init(s: str) -> str:
    kind, _, arg = s.partition(":")
    if kind == "full" and not arg:
        return s
    if kind == "single" and (arg == "center" or arg.isdigit()):
        return s
    if kind == "occ" and arg:
        [float(x) for x in arg.split(",")]
        return s
    raise ValueError(s)


def _Ns(s: str) -> tuple:
    if ":" in s:
        a, b = (int(x) for x in s.split(":"))
        if b < a:
            raise ValueError(s)
        return tuple(range(a, b + 1))
    return tuple(int(x) for x in s.split(","))


def _choice(options):
    def f(s: str) -> str:
        if s not in options:
            raise ValueError(s)
        return s
    return f


KEYS = {
    "scenario": _choice(SCENARIOS),
    "t1": _float, "t2": _float,
    **{k: _float for k in RATE_FIELDS},
    "boundary": lambda s: _choice(BOUNDARIES)(s.upper()),
    "N": int,
    "sweep": _sweep,
    "times": _times,
    "init": _init,
    "l": int,
    "Ns": _Ns,
    "grid": int,
    "method": _choice(("modesum", "ode")),
    "observable": _choice(OBSERVABLES),
    "svg": _bool,
    "excel": _bool,
}


def _decode(content: str | bytes) -> str:
    if isinstance(content, str):
        return content
    for enc in ("utf-8", "utf-8-sig", "big5", "cp950"):
        try:
            return content.decode(enc)
        except UnicodeDecodeError:
            continue
    return content.decode("utf-8", errors="replace")


def parse_config(content: str | bytes, scenario: str | None = None) -> RunConfig:
    """解析設定檔；scenario 參數（命令列子命令）優先於檔內的 scenario"""
    text = _decode(content)
    values, where = {}, {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = LINE_RE.match(line)
        if not m:
            raise ParseError(i, raw)
        key, val = m.group("key"), m.group("value")
        if key not in KEYS:
            raise ParseError(i, raw, f"未知的鍵 {key}")
        if key in values:
            raise ParseError(i, raw, f"重複的鍵 {key}")
        try:
            values[key] = KEYS[key](val)
        except ValueError:
            raise ParseError(i, raw, f"{key} 的值不合法")
        where[key] = (i, raw)

    if scenario is not None:
        values["scenario"] = _choice(SCENARIOS)(scenario)
    if "scenario" not in values:
        raise ParseError(0, text.strip()[:60], "缺少 scenario")
    for key in ("t1", "t2"):
        if key not in values:
            raise ParseError(0, text.strip()[:60], f"缺少 {key}")

    params = {k: values[k] for k in SPEC_FIELDS if k in values}
    cfg = RunConfig(scenario=values["scenario"], params=params,
                    **{k: values[k] for k in ("sweep", "times", "init", "l", "Ns", "grid",
                                              "method", "observable", "svg", "excel")
                       if k in values})
    try:
        specs = cfg.specs()
    except InvalidSpec as e:
        lineno, raw = where.get(e.field_name, where.get("sweep", (0, "")))
        raise ParseError(lineno, raw, f"參數不合法（{e}）")

    if cfg.scenario in ("evolve", "lifetime") and cfg.sweep is not None:
        raise ParseError(*where["sweep"], f"{cfg.scenario} 不支援 sweep")
    if cfg.scenario == "sweep" and cfg.sweep is None:
        raise ParseError(0, "", "sweep 情境需要 sweep = name:start:stop:step")
    if cfg.scenario == "lifetime" and len(cfg.Ns) < 2:
        raise ParseError(*where.get("Ns", (0, "")), "lifetime 需要至少兩個 Ns")
    if cfg.l <= 0:
        raise ParseError(*where["l"], "l 必須為正整數")
    if cfg.grid < 100:
        raise ParseError(*where["grid"], "grid 至少 100")
    for sp in specs:
        try:
            cfg.initial_state(sp).vector(sp.n)
        except InvalidSpec as e:
            raise ParseError(*where.get("init", (0, "")), f"初始狀態不合法（{e}）")
    return cfg
