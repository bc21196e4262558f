import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from pathlib import Path

import streamlit as st

st.set_page_config(page_title="Documentation", page_icon="📚")

st.title("📚 Documentation")

DOCS = {
    "Quick start": "QUICKSTART.md",
    "Testing": "docs/TESTING.md",
    "Report format": "docs/REPORT_SCHEMA.md",
    "Changelog": "CHANGELOG.md",
}

root = Path(__file__).parent.parent
choice = st.radio("Document", list(DOCS.keys()), horizontal=True)
doc_path = root / DOCS[choice]
if doc_path.exists():
    st.markdown(doc_path.read_text(encoding="utf-8"))
else:
    st.warning(f"{DOCS[choice]} not found")
