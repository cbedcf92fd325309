import streamlit as st
import utils

st.set_page_config(
    page_title='Keystore Analyzer',
    layout='wide',
    initial_sidebar_state='auto'
)

st.title('Keystore Analyzer - Corpus Overview')

with st.sidebar:
    report_dir = st.text_input("Report directory", value=utils.data_loader.REPORT_DIR)
    figure_dir = st.text_input("Figure directory", value=utils.data_loader.FIGURE_DIR)
    lint_dir = st.text_input("Lint directory", value=utils.data_loader.LINT_DIR)

@st.cache_data(show_spinner=False)
def load_report_data(report_dir):
    stats = utils.load_corpus_stats(report_dir)
    metrics_df, metrics_col_defs = utils.return_metrics_df(report_dir)
    genre_df, genre_col_defs = utils.return_genre_df(report_dir)

    return {
        "stats": stats,
        "headline": utils.return_headline_metrics(stats),
        "metrics_df": metrics_df,
        "metrics_col_defs": metrics_col_defs,
        "genre_df": genre_df,
        "genre_col_defs": genre_col_defs,
    }

with st.sidebar:
    if st.button("Reload Report"):
        load_report_data.clear()
        st.rerun()

try:
    data = load_report_data(report_dir)
except RuntimeError as err:
    st.error(str(err))
    st.stop()

st.session_state["report_dir"] = report_dir
st.session_state["figure_dir"] = figure_dir
st.session_state["lint_dir"] = lint_dir

stats = data["stats"]

with st.sidebar:
    st.caption(f"{stats.counts.get('apps', 0)} apps, {stats.counts.get('init_calls', 0)} key generations")

utils.render_title_with_bg('Keystore Adoption')

headline_cols = st.columns(max(len(data["headline"]), 1))
for col, (label, value) in zip(headline_cols, data["headline"].items()):
    with col:
        st.metric(label, value, border=True)

utils.render_divider()

overview1, overview2 = st.columns([1.2, 1])

with overview1:
    utils.render_subheaders('All Metrics', margin_top=5, margin_bottom=5)
    utils.build_aggrid_table(data["metrics_df"], col_defs=data["metrics_col_defs"], max_height=600)

with overview2:
    utils.render_subheaders('Usage by Genre', margin_top=5, margin_bottom=5)
    st.plotly_chart(utils.plot_genre_usage(data["genre_df"]), use_container_width=True)
    utils.build_aggrid_table(data["genre_df"], col_defs=data["genre_col_defs"], max_height=400)
