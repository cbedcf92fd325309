import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

from keyscan.benchstats import KIND_LABELS

PLOT_TEMPLATE = "plotly_dark"
KIND_COLOURS = {"Software": "#07f978", "TEE": "#288eea", "SE": "#FF2DD1"}


def _with_kind_labels(df: pd.DataFrame) -> pd.DataFrame:
    df = df.copy()
    df["Keystore"] = df["keystore_kind"].map(KIND_LABELS)
    return df


def plot_runtime_vs_payload(payload_df: pd.DataFrame, device: str, operation: str, algorithm: str) -> go.Figure:
    """Mean runtime per payload size, one line per keystore, log-scaled payload axis."""
    df = payload_df[
        (payload_df["device"] == device)
        & (payload_df["operation"] == operation)
        & (payload_df["algorithm"] == algorithm)
    ]
    df = _with_kind_labels(df).sort_values(["Keystore", "payload_bytes"])
    fig = px.line(
        df,
        x="payload_bytes",
        y="mean_seconds",
        color="Keystore",
        error_y=pd.to_numeric(df["std_seconds"], errors="coerce"),
        markers=True,
        log_x=True,
        color_discrete_map=KIND_COLOURS,
        hover_data={"mean_std": True, "n": True},
        labels={"payload_bytes": "Payload (bytes)", "mean_seconds": "Runtime (s)"},
        template=PLOT_TEMPLATE,
    )
    fig.update_layout(title=f"{device}: {operation} {algorithm}", legend_title_text="")
    return fig


def plot_runtime_vs_device_year(year_df: pd.DataFrame, operation: str, algorithm: str, payload_bytes: int) -> go.Figure:
    """Runtime by device release year, log-scaled runtime axis."""
    df = year_df[
        (year_df["operation"] == operation)
        & (year_df["algorithm"] == algorithm)
        & (year_df["payload_bytes"] == payload_bytes)
    ]
    df = _with_kind_labels(df)
    fig = px.scatter(
        df,
        x="device_year",
        y="mean_seconds",
        color="Keystore",
        symbol="Keystore",
        log_y=True,
        hover_name="device",
        hover_data={"mean_std": True},
        color_discrete_map=KIND_COLOURS,
        labels={"device_year": "Device release year", "mean_seconds": "Runtime (s)"},
        template=PLOT_TEMPLATE,
    )
    fig.update_traces(marker={"size": 11})
    fig.update_layout(title=f"{operation} {algorithm}, {payload_bytes} bytes", legend_title_text="")
    return fig


def plot_genre_usage(genre_df: pd.DataFrame) -> go.Figure:
    """Keystore and StrongBox usage share per genre."""
    long_df = genre_df.melt(
        id_vars=["genre", "apps"],
        value_vars=["keystore_pct", "strongbox_pct"],
        var_name="usage",
        value_name="percent",
    )
    long_df["usage"] = long_df["usage"].map({"keystore_pct": "Keystore", "strongbox_pct": "StrongBox"})
    fig = px.bar(
        long_df.sort_values(["genre", "usage"]),
        x="genre",
        y="percent",
        color="usage",
        barmode="group",
        hover_data={"apps": True},
        color_discrete_map={"Keystore": "#288eea", "StrongBox": "#FF2DD1"},
        labels={"genre": "", "percent": "% of apps"},
        template=PLOT_TEMPLATE,
    )
    fig.update_layout(legend_title_text="")
    return fig


def plot_auth_histogram(auth_df: pd.DataFrame) -> go.Figure:
    fig = px.bar(
        auth_df,
        x="bucket",
        y="percent",
        text="numerator",
        labels={"bucket": "Authentication validity", "percent": "% of keys"},
        template=PLOT_TEMPLATE,
    )
    fig.update_traces(marker_color="#FF2DD1")
    return fig
