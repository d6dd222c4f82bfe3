# -*- coding: utf-8 -*-
"""情境結果輸出：CSV（schema=1）、終端機文字報表、Excel 匯出、SVG 折線/散點圖"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

SCHEMA = 1

# 浮點數一律 17 位有效數字，同一設定重跑逐位元相同
FLOAT_FMT = ".17g"


class MissingColumn(ValueError):
    def __init__(self, name: str, columns):
        super().__init__(f"CSV 沒有欄位 {name!r}（現有：{', '.join(columns)}）")
        self.name = name


def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, FLOAT_FMT)
    if hasattr(v, "dtype"):
        return fmt(v.item())
    return str(v)


def to_csv(columns, rows) -> str:
    L = [f"# schema={SCHEMA}", ",".join(columns)]
    for r in rows:
        L.append(",".join(fmt(v) for v in r))
    return "\n".join(L) + "\n"


def read_csv(text: str):
    """回傳 (columns, rows)；rows 為字串 list，略過 # 開頭的註解行"""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        return [], []
    columns = lines[0].split(",")
    return columns, [ln.split(",") for ln in lines[1:]]


def to_text(res) -> str:
    L = []
    a = L.append
    a("=" * 62)
    a(f"情境：{res.scenario}")
    a("=" * 62)
    for k, v in res.summary.items():
        a(f"  {k}：{fmt(v)}")
    a("")
    a(f"資料 {len(res.rows)} 列 × {len(res.columns)} 欄（{', '.join(res.columns[:6])}"
      f"{' …' if len(res.columns) > 6 else ''}）")
    for r in res.rows[:10]:
        a("   " + "  ".join(_short(v) for v in r[:6]))
    if len(res.rows) > 10:
        a(f"   …（其餘 {len(res.rows) - 10} 列見 CSV）")

    if res.warnings:
        a("")
        a(f"⚠️  警告 {len(res.warnings)} 則")
        for w in res.warnings[:10]:
            a(f"   {w}")
    a("=" * 62)
    return "\n".join(L)


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return fmt(v)


def to_excel(res) -> bytes:
    """需要 openpyxl。回傳 xlsx bytes。"""
    from openpyxl import Workbook
    from openpyxl.styles import Font, PatternFill

    wb = Workbook()
    head = Font(bold=True, color="FFFFFF")
    fill = PatternFill("solid", fgColor="374151")

    def sheet(title, cols, rows):
        ws = wb.create_sheet(title)
        ws.append(cols)
        for c in ws[1]:
            c.font, c.fill = head, fill
        for r in rows:
            ws.append([_cell(v) for v in r])
        for i, col in enumerate(cols, 1):
            ws.column_dimensions[ws.cell(1, i).column_letter].width = max(12, len(col) * 2.2)
        ws.freeze_panes = "A2"
        return ws

    wb.remove(wb.active)
    sheet("摘要", ["項目", "數值"], [[k, v] for k, v in res.summary.items()])
    sheet("資料", list(res.columns), res.rows)
    sheet("警告", ["訊息"], [[w] for w in res.warnings])

    buf = io.BytesIO()
    wb.save(buf)
    return buf.getvalue()


def _cell(v):
    if hasattr(v, "dtype"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return fmt(v)
    if isinstance(v, (bool, int, float, str)) or v is None:
        return v
    return str(v)


@dataclass
class PlotSpec:
    x: str
    y: list
    kind: str = "line"                  # line | scatter
    logx: bool = False
    title: str = ""
    group: str | None = None            # 依此欄分組畫多條線（例如 boundary）
    labels: dict = field(default_factory=dict)


# 各情境預設的圖
DEFAULT_PLOTS = {
    "spectrum": lambda cols: PlotSpec(x=cols[0], y=["re_beta"], kind="scatter", group="boundary",
                                      title="Re β"),
    "gap": lambda cols: PlotSpec(x=cols[0], y=["delta_obc", "delta_pbc", "delta_numeric"],
                                 title="Liouvillian gap"),
    "topology": lambda cols: PlotSpec(x=cols[0], y=["abs_r2"], title="|r²|"),
    "steady": lambda cols: PlotSpec(x=cols[0], y=["j_ss"], title="j_ss"),
    "evolve": lambda cols: PlotSpec(x="t", y=["j_c"], logx=True, title="j_c(t)"),
    "lifetime": lambda cols: PlotSpec(x="N", y=["tau"], kind="line", title="τ(N)"),
    "sweep": lambda cols: PlotSpec(x=cols[0], y=[cols[1]], title=cols[1]),
}


def _num(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        return math.nan


def render_svg(csv_text: str, plot: PlotSpec) -> str:
    """畫 CSV 的欄位成 SVG 字串；欄位不存在時拋 MissingColumn"""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    columns, rows = read_csv(csv_text)
    for name in [plot.x] + list(plot.y) + ([plot.group] if plot.group else []):
        if name not in columns:
            raise MissingColumn(name, columns)
    ix = columns.index(plot.x)
    groups = {}
    if plot.group:
        ig = columns.index(plot.group)
        for r in rows:
            groups.setdefault(r[ig], []).append(r)
    else:
        groups[""] = rows

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for gname, grows in groups.items():
        xs = [_num(r[ix]) for r in grows]
        if plot.logx:
            # log 軸不能畫 t = 0
            keep = [k for k, x in enumerate(xs) if x > 0]
        else:
            keep = list(range(len(xs)))
        for y in plot.y:
            iy = columns.index(y)
            ys = [_num(grows[k][iy]) for k in keep]
            xk = [xs[k] for k in keep]
            label = plot.labels.get(y, y) + (f" [{gname}]" if gname else "")
            if plot.kind == "scatter":
                ax.scatter(xk, ys, s=4, label=label)
            else:
                ax.plot(xk, ys, lw=1.2, label=label)
    if plot.logx:
        ax.set_xscale("log")
    ax.set_xlabel(plot.x)
    ax.set_title(plot.title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg")
    plt.close(fig)
    return buf.getvalue()
