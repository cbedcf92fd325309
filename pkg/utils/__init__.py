from .data_loader import (
    load_corpus_stats,
    return_headline_metrics,
    return_metrics_df,
    return_top_packages_df,
    return_genre_df,
    return_auth_histogram_df,
    return_cipher_df,
    return_lint_df,
    load_payload_series,
    load_device_year_series,
    load_comparison_table,
    load_figure_metadata
)

from .tools import (
    build_aggrid_table,
    render_title_with_bg,
    render_subheaders,
    render_divider,
    count_by_severity
)

from .plotting import (
    plot_runtime_vs_payload,
    plot_runtime_vs_device_year,
    plot_genre_usage,
    plot_auth_histogram
)


__all__ = [
    "load_corpus_stats",
    "return_headline_metrics",
    "return_metrics_df",
    "return_top_packages_df",
    "return_genre_df",
    "return_auth_histogram_df",
    "return_cipher_df",
    "return_lint_df",
    "load_payload_series",
    "load_device_year_series",
    "load_comparison_table",
    "load_figure_metadata",
    "build_aggrid_table",
    "render_title_with_bg",
    "render_subheaders",
    "render_divider",
    "count_by_severity",
    "plot_runtime_vs_payload",
    "plot_runtime_vs_device_year",
    "plot_genre_usage",
    "plot_auth_histogram"]
