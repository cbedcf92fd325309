import streamlit as st
import utils

st.set_page_config(
    page_title='Keystore Analyzer',
    layout='wide',
    initial_sidebar_state='auto'
)

st.title('Keystore Analyzer - Key Configurations')

report_dir = st.session_state.get("report_dir", utils.data_loader.REPORT_DIR)
lint_dir = st.session_state.get("lint_dir", utils.data_loader.LINT_DIR)

try:
    auth_df, auth_col_defs = utils.return_auth_histogram_df(report_dir)
    cipher_df, cipher_col_defs = utils.return_cipher_df(report_dir)
    lint_df, lint_col_defs = utils.return_lint_df(lint_dir)
except RuntimeError as err:
    st.error(str(err))
    st.stop()

utils.render_title_with_bg('Authentication and Ciphers')

config1, config2 = st.columns(2)

with config1:
    utils.render_subheaders('User Authentication Validity', margin_top=5, margin_bottom=5)
    st.plotly_chart(utils.plot_auth_histogram(auth_df), use_container_width=True)
    utils.build_aggrid_table(auth_df, col_defs=auth_col_defs)

with config2:
    utils.render_subheaders('Cipher Transformations', margin_top=5, margin_bottom=5)
    utils.build_aggrid_table(cipher_df, col_defs=cipher_col_defs)

utils.render_divider()
utils.render_title_with_bg('Lint Findings', margin_top=10)

severity_counts = utils.count_by_severity(lint_df)
severity_cols = st.columns(len(severity_counts))
for col, (severity, count) in zip(severity_cols, severity_counts.items()):
    with col:
        st.metric(severity.upper(), count, border=True)

rules = sorted(lint_df["rule_id"].unique()) if not lint_df.empty else []
chosen = st.multiselect('Rules', rules, default=rules)
shown = lint_df[lint_df["rule_id"].isin(chosen)] if chosen else lint_df
utils.build_aggrid_table(shown, col_defs=lint_col_defs, pagination=True, max_height=700, severity=True)
