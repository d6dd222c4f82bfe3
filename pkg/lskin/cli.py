# -*- coding: utf-8 -*-
"""
命令列情境執行：

    python -m lskin.cli spectrum --config configs/spectrum_t1.cfg --out results --svg
    python -m lskin.cli evolve --config configs/evolve_current.cfg --excel
    python -m lskin.cli --config configs/gap_vs_t1.cfg --workers 4

exit code：0 成功；1 設定檔錯誤；2 物理上的失敗（EP、缺陷基底、奇異 Sylvester…）。
進度與警告一律寫到 stderr，stdout 只有文字報表。
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

from .dynamics import edge_profile_slope, lifetime, lifetime_scan, run_trajectory
from .exact import rapidities_closed_form
from .model import ChainSpec, PhysicsError, derive_rates
from .parser import ParseError, RunConfig, parse_config
from .report import DEFAULT_PLOTS, render_svg, to_csv, to_excel, to_text
from .steady import classify_ness, steady_current, steady_occupation
from .topology import (DetZero, UnsupportedBranch, gap_closed_form, numeric_gap, obc_gap,
                       pbc_gap, regime_verdict, skin_parameter, topology_report, winding_number)

WORKERS = int(os.environ.get("LSKIN_WORKERS", "1"))
OUT_DIR = os.environ.get("LSKIN_OUT", ".")
QUIET = os.environ.get("LSKIN_QUIET", "") == "1"


def log(tag: str, msg: str, warn: bool = False):
    if QUIET and not warn:
        return
    print(f"[{tag}] {msg}", file=sys.stderr, flush=True)


@dataclass
class ScenarioResult:
    scenario: str
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _param(cfg: RunConfig) -> str:
    return cfg.sweep.name if cfg.sweep else "t1"


def _pmap(fn, items, workers: int):
    """依輸入順序回傳結果；workers ≤ 1 時不開行程池"""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---- 每個 sweep 點的計算（頂層函式，才能送進行程池） -----------------------------

def _spectrum_point(cfg: RunConfig, spec: ChainSpec):
    pv = getattr(spec, _param(cfg))
    labels, betas = rapidities_closed_form(spec)
    return [[pv, spec.boundary, str(lb), float(b.real), float(b.imag)]
            for lb, b in zip(labels, betas)], []


def _gap_point(cfg: RunConfig, spec: ChainSpec):
    g = gap_closed_form(spec)
    return [[getattr(spec, _param(cfg)), g.delta_obc, g.delta_pbc, g.delta_numeric, g.tc]], g.notes


def _topology_point(cfg: RunConfig, spec: ChainSpec):
    t = topology_report(spec, cfg.grid)
    return [[getattr(spec, _param(cfg)), "" if t.nu is None else t.nu,
             "" if t.topological is None else t.topological,
             abs(t.r2), t.xi, t.polarization, len(t.eps)]], t.notes


def _steady_point(cfg: RunConfig, spec: ChainSpec):
    rates = derive_rates(spec)
    ness = classify_ness(spec)
    warns = []
    try:
        j = steady_current(spec).value
    except UnsupportedBranch as e:
        j = math.nan
        warns.append(str(e))
    return [[getattr(spec, _param(cfg)), steady_occupation(rates), rates.solvable, ness.kind,
             ness.frequency, j, numeric_gap(spec)]], warns


def observable_value(cfg: RunConfig, spec: ChainSpec) -> float:
    name = cfg.observable
    if name == "gap_obc":
        return obc_gap(spec)
    if name == "gap_pbc":
        try:
            return pbc_gap(spec)
        except UnsupportedBranch:
            return math.nan
    if name == "gap_numeric":
        return numeric_gap(spec)
    if name == "winding":
        try:
            return float(winding_number(spec, cfg.grid))
        except DetZero:
            return math.nan
    if name == "topological":
        try:
            return float(regime_verdict(spec).topological)
        except PhysicsError:
            return math.nan
    if name == "abs_r2":
        return skin_parameter(spec).abs_r2
    if name == "xi":
        return skin_parameter(spec).xi
    if name == "n_ss":
        return steady_occupation(derive_rates(spec))
    if name == "current":
        times = cfg.times.values()
        traj = run_trajectory(spec, cfg.initial_state(spec), times[-1:], cfg.method)
        return float(traj.current[-1])
    if name == "lifetime":
        return lifetime(spec.with_(boundary="OBC"), cfg.initial_state(spec), cfg.l).tau
    raise ValueError(f"未知的 observable：{name}")


def _sweep_point(cfg: RunConfig, spec: ChainSpec):
    return [[getattr(spec, _param(cfg)), observable_value(cfg, spec)]], []


POINTS = {
    "spectrum": (_spectrum_point, ["boundary", "mode_label", "re_beta", "im_beta"]),
    "gap": (_gap_point, ["delta_obc", "delta_pbc", "delta_numeric", "tc"]),
    "topology": (_topology_point, ["nu", "topological", "abs_r2", "xi", "polarization", "eps"]),
    "steady": (_steady_point, ["n_ss", "solvable", "ness", "frequency", "j_ss", "gap"]),
    "sweep": (_sweep_point, None),
}


def _run_points(cfg: RunConfig, workers: int) -> ScenarioResult:
    fn, cols = POINTS[cfg.scenario]
    specs = cfg.specs()
    log("sweep", f"{cfg.scenario}：{len(specs)} 個參數點，workers={workers}")
    parts = _pmap(partial(fn, cfg), specs, workers)
    rows, warns = [], []
    for r, w in parts:
        rows.extend(r)
        warns.extend(x for x in w if x not in warns)
    columns = [_param(cfg)] + (cols or [cfg.observable])
    summary = {"參數點": len(specs), "N": cfg.spec.N, "boundary": cfg.spec.boundary}
    return ScenarioResult(cfg.scenario, columns, rows, summary, warns)


def _run_evolve(cfg: RunConfig) -> ScenarioResult:
    spec = cfg.spec
    times = cfg.times.values()
    init = cfg.initial_state(spec)
    traj = run_trajectory(spec, init, times, cfg.method)
    columns = ["t", "j_c"] + [f"n_{j}" for j in range(1, traj.n + 1)] + ["deltaP"]
    rows = [[float(t), float(traj.current[k])] + [float(x) for x in traj.occupations[k]]
            + [float(traj.polarization[k])] for k, t in enumerate(traj.times)]
    lo, hi = traj.occupation_range()
    summary = {"boundary": spec.boundary, "N": spec.N, "init": init.label(), "method": traj.method,
               "n_ss": steady_occupation(derive_rates(spec)),
               "j_c(最後)": float(traj.current[-1]), "n 最小": lo, "n 最大": hi}
    warns = list(traj.notes)
    if spec.boundary == "OBC" and len(times) > 2:
        try:
            summary["ln|ñ| 空間斜率（中段時間）"] = edge_profile_slope(traj, len(times) // 2)
            summary["−ln|r²|"] = -math.log(skin_parameter(spec).abs_r2)
        except (PhysicsError, ValueError) as e:
            warns.append(str(e))
    return ScenarioResult("evolve", columns, rows, summary, warns)


def _run_lifetime(cfg: RunConfig) -> ScenarioResult:
    spec = cfg.spec.with_(boundary="OBC")
    log("lifetime", f"N = {', '.join(str(n) for n in cfg.Ns)}，l = {cfg.l}")
    fit = lifetime_scan(spec, cfg.Ns, cfg.l, cfg.initial_state(spec))
    rows = [[N, tau, osc] for N, tau, osc in zip(fit.Ns, fit.taus, fit.oscillating)]
    sp = skin_parameter(spec)
    summary = {"l": fit.l, "斜率 b": fit.slope, "截距 a": fit.intercept, "R²": fit.r_squared,
               "ξ_fit": fit.xi_fit, "ξ = 2/|ln|r²||": sp.xi, "Δ_eff": fit.delta_eff,
               "Δ^OBC": obc_gap(spec)}
    warns = [f"N={N} 的尾端振盪，取最後一次穿越" for N, o in zip(fit.Ns, fit.oscillating) if o]
    if fit.flat:
        warns.append(f"τ 與 N 無關（l = {fit.l} 的門檻在遠端波前抵達前就已穿越），ξ_fit 與 Δ_eff 記為 inf")
    return ScenarioResult("lifetime", ["N", "tau", "oscillating"], rows, summary, warns)


def run(cfg: RunConfig, out_dir: str = OUT_DIR, workers: int = WORKERS,
        svg: bool = False, excel: bool = False) -> ScenarioResult:
    """執行情境並寫出 <scenario>.csv（以及 .svg / .xlsx）"""
    if cfg.scenario == "evolve":
        res = _run_evolve(cfg)
    elif cfg.scenario == "lifetime":
        res = _run_lifetime(cfg)
    else:
        res = _run_points(cfg, workers)

    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, cfg.scenario)
    csv_text = to_csv(res.columns, res.rows)
    with open(base + ".csv", "w", encoding="utf-8", newline="\n") as f:
        f.write(csv_text)
    log("lskin", f"已輸出 {base}.csv（{len(res.rows)} 列）")
    if svg or cfg.svg:
        with open(base + ".svg", "w", encoding="utf-8", newline="\n") as f:
            f.write(render_svg(csv_text, DEFAULT_PLOTS[cfg.scenario](res.columns)))
        log("lskin", f"已輸出 {base}.svg")
    if excel or cfg.excel:
        with open(base + ".xlsx", "wb") as f:
            f.write(to_excel(res))
        log("lskin", f"已輸出 {base}.xlsx")
    for w in res.warnings:
        log("warn", w, warn=True)
    return res


def main(argv=None):
    p = argparse.ArgumentParser(description="鍵耗散 SSH Lindbladian：精確解、數值驗證與圖表重現")
    p.add_argument("scenario", nargs="?", help="spectrum | gap | topology | steady | evolve | lifetime | sweep")
    p.add_argument("--config", help="情境設定檔路徑（必填）")
    p.add_argument("--out", default=OUT_DIR, help="輸出資料夾（預設 $LSKIN_OUT 或 .）")
    p.add_argument("--svg", action="store_true", help="另外輸出 SVG 圖")
    p.add_argument("--excel", action="store_true", help="另外輸出 xlsx")
    p.add_argument("--workers", type=int, default=None, help="sweep 的平行行程數（預設 $LSKIN_WORKERS）")
    args = p.parse_args(argv)

    if not args.config:
        print("[lskin] 設定檔錯誤：缺少 --config", file=sys.stderr, flush=True)
        return 1
    try:
        with open(args.config, "rb") as f:
            cfg = parse_config(f.read(), args.scenario)
    except OSError as e:
        print(f"[lskin] 讀不到設定檔：{e}", file=sys.stderr, flush=True)
        return 1
    except ParseError as e:
        print(f"[lskin] 設定檔錯誤：{e}", file=sys.stderr, flush=True)
        return 1

    workers = args.workers if args.workers is not None else WORKERS
    try:
        res = run(cfg, args.out, max(1, workers), args.svg, args.excel)
    except PhysicsError as e:
        print(f"[lskin] 物理錯誤：{e}", file=sys.stderr, flush=True)
        return 2

    print(to_text(res))
    return 0


if __name__ == "__main__":
    sys.exit(main())
