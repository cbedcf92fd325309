from html import escape

import pandas as pd
import streamlit as st
from st_aggrid import AgGrid, GridOptionsBuilder, JsCode

PANEL = "#2A2A3A"
ACCENT = "#FF2DD1"
TEXT = "#F5F7FA"
ROW_EVEN, ROW_ODD = "#1E1E28", "#232334"
ROW_HEIGHT = 31

SEVERITY_ORDER = ("high", "warn", "info")
SEVERITY_COLOURS = {
    "high": ("#800a30", "white"),
    "warn": ("#f9a825", "black"),
    "info": (PANEL, TEXT),
}

HEADER_CSS = {
    ".ag-header-cell": {
        "background-color": f"{PANEL} !important",
        "color": "white !important",
        "font-weight": "bold !important",
        "text-align": "center",
        "border": f"1px solid {ACCENT}",
    }
}


def _style_js(body):
    return JsCode(f"function(params) {{\n{body}\n}}")


def _severity_row_style():
    cases = "\n".join(
        f"    if (sev === '{name}') return {{'background-color': '{bg}', 'color': '{fg}'}};"
        for name, (bg, fg) in SEVERITY_COLOURS.items()
    )
    return _style_js(f"    var sev = String(params.data['severity']);\n{cases}\n    return null;")


def _striped_row_style():
    return _style_js(
        f"    var bg = params.node.rowIndex % 2 === 0 ? '{ROW_EVEN}' : '{ROW_ODD}';\n"
        f"    return {{'background-color': bg, 'color': '{TEXT}'}};"
    )


def build_aggrid_table(
    df,
    col_defs=None,
    pagination=False,
    max_height=1000,
    alt_row_colours=True,
    severity=False,
):
    """
    AgGrid with the dashboard theme.

    Rows are coloured by the 'severity' column when severity=True (lint findings),
    otherwise striped. The grid is sized to its rows up to max_height.
    """
    gb = GridOptionsBuilder.from_dataframe(df)
    gb.configure_pagination(enabled=pagination)
    gb.configure_default_column(resizable=True, filter=True, sortable=True)
    grid_options = gb.build()

    if col_defs:
        grid_options["columnDefs"] = col_defs
    else:
        grid_options["autoSizeStrategy"] = {"type": "fitCellContents"}

    if severity:
        grid_options["getRowStyle"] = _severity_row_style()
    elif alt_row_colours:
        grid_options["getRowStyle"] = _striped_row_style()

    return AgGrid(
        df,
        gridOptions=grid_options,
        height=min(max_height, (1 + len(df.index)) * ROW_HEIGHT),
        allow_unsafe_jscode=True,
        custom_css=HEADER_CSS,
    )


def _banner(inner_html, padding, margin_top, margin_bottom):
    box = (
        f"padding: {padding}px; background-color: {PANEL}; border-radius: 10px; text-align: center; "
        f"margin-top: {margin_top}px; margin-bottom: {margin_bottom}px; border: 1px solid {ACCENT};"
    )
    st.markdown(f'<div style="{box}">{inner_html}</div>', unsafe_allow_html=True)


def render_title_with_bg(title_text, margin_top=0):
    font = "font-family: 'Segoe UI', Roboto, sans-serif; font-weight: 700; font-size: 24px; margin: 0; color: white;"
    _banner(f'<h2 style="{font}">{escape(title_text)}</h2>', 1, margin_top, 10)


def render_subheaders(title_text, font_size=16, margin_top=1, margin_bottom=1):
    font = f"font-family: 'Segoe UI', Roboto, sans-serif; font-size: {font_size}px; margin: 0; color: white;"
    _banner(f'<p style="{font}">{escape(title_text)}</p>', 8, margin_top, margin_bottom)


def render_divider():
    st.markdown(
        f'<hr style="height:1px; margin:0; border:none; background-color:{ACCENT};" />',
        unsafe_allow_html=True
    )


def count_by_severity(lint_df: pd.DataFrame):
    """Finding counts per severity, highest first, for st.metric cards."""
    counts = lint_df["severity"].value_counts() if not lint_df.empty else pd.Series(dtype=int)
    return {name: int(counts.get(name, 0)) for name in SEVERITY_ORDER}
