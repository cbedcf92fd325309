import streamlit as st
import utils

st.set_page_config(
    page_title='Keystore Analyzer',
    layout='wide',
    initial_sidebar_state='auto'
)

st.title('Keystore Analyzer - Keystore Benchmarks')

figure_dir = st.session_state.get("figure_dir", utils.data_loader.FIGURE_DIR)

try:
    payload_df = utils.load_payload_series(figure_dir)
    comparison_df = utils.load_comparison_table(figure_dir)
except RuntimeError as err:
    st.error(str(err))
    st.stop()

year_df = utils.load_device_year_series(figure_dir)
metadata = utils.load_figure_metadata(figure_dir)

utils.render_title_with_bg('Runtime vs Payload Size')

pick1, pick2, pick3 = st.columns(3)
with pick1:
    device = st.selectbox('Device', sorted(payload_df["device"].unique()))
with pick2:
    operation = st.selectbox('Operation', sorted(payload_df[payload_df["device"] == device]["operation"].unique()))
with pick3:
    algorithm = st.selectbox(
        'Algorithm',
        sorted(payload_df[(payload_df["device"] == device) & (payload_df["operation"] == operation)]["algorithm"].unique()),
    )

st.plotly_chart(utils.plot_runtime_vs_payload(payload_df, device, operation, algorithm), use_container_width=True)

selected = comparison_df[
    (comparison_df["device"] == device)
    & (comparison_df["operation"] == operation)
    & (comparison_df["algorithm"] == algorithm)
]
utils.render_subheaders('TEE vs SE (seconds, mean ± std)', margin_top=5, margin_bottom=5)
utils.build_aggrid_table(selected[["MiB", "TEE", "SE"]].reset_index(drop=True))

if metadata:
    st.caption(f"± is the {metadata.get('std_estimator', 'standard deviation')}.")

utils.render_divider()

if not year_df.empty:
    utils.render_title_with_bg('Runtime by Device Year', margin_top=10)
    payload = st.selectbox('Payload (bytes)', sorted(year_df["payload_bytes"].unique()))
    st.plotly_chart(
        utils.plot_runtime_vs_device_year(year_df, operation, algorithm, payload),
        use_container_width=True,
    )
