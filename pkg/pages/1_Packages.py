import streamlit as st
import utils

st.set_page_config(
    page_title='Keystore Analyzer',
    layout='wide',
    initial_sidebar_state='auto'
)

st.title('Keystore Analyzer - Third-Party Packages')

report_dir = st.session_state.get("report_dir", utils.data_loader.REPORT_DIR)

try:
    init_df, init_col_defs = utils.return_top_packages_df(report_dir, table="init")
    strongbox_df, strongbox_col_defs = utils.return_top_packages_df(report_dir, table="strongbox")
except RuntimeError as err:
    st.error(str(err))
    st.stop()

packages1, packages2 = st.columns(2)

with packages1:
    utils.render_subheaders('Most Keys Generated', margin_top=5, margin_bottom=5)
    utils.build_aggrid_table(init_df, col_defs=init_col_defs)

with packages2:
    utils.render_subheaders('Most StrongBox Requests', margin_top=5, margin_bottom=5)
    utils.build_aggrid_table(strongbox_df, col_defs=strongbox_col_defs)
