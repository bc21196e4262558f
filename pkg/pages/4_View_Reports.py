import sys
import os
# Add project root to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import json
from pathlib import Path

import pandas as pd
import streamlit as st

st.set_page_config(
    page_title="Saved Reports - NewHope Backdoor Lab",
    page_icon="📂",
    layout="wide"
)

try:
    from src.harness import validate_report
except ImportError as e:
    st.error("❌ Missing dependencies!")
    st.write(f"Error: {e}")
    st.code("run.sh check", language="bash")
    st.stop()

st.title("📂 Saved Reports")

RESULTS_DIR = Path(__file__).parent.parent / "results"


def load_reports():
    """All report files under results/, newest first."""
    if not RESULTS_DIR.exists():
        return []
    reports = []
    for path in sorted(RESULTS_DIR.glob("*.json"), key=lambda p: p.stat().st_mtime, reverse=True):
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        if isinstance(data, dict) and "scenario" in data:
            reports.append((path, data))
    return reports


reports = load_reports()
if not reports:
    st.info("No reports yet. Run a scenario and save it, or use `python nhlab.py ... --out results/x.json`.")
    st.stop()

overview = pd.DataFrame([
    {
        "file": path.name,
        "scenario": data["scenario"],
        "param": data.get("config", {}).get("param"),
        "trials": data.get("config", {}).get("trials"),
        "seconds": data.get("wall_clock_seconds"),
        "passed": data.get("passed"),
    }
    for path, data in reports
])
st.dataframe(overview, use_container_width=True, hide_index=True)

names = [path.name for path, _ in reports]
selected = st.selectbox("Report", names)
path, data = reports[names.index(selected)]

is_valid, error = validate_report(data)
if is_valid:
    st.success("✓ Report matches its schema")
else:
    st.warning(f"⚠️ Schema mismatch at {error}")

if data.get("aggregates"):
    st.markdown("#### Rates")
    st.dataframe(pd.DataFrame([dict(rate=name, **summary) for name, summary in sorted(data["aggregates"].items())]),
                 hide_index=True)

for claim in data.get("claims", []):
    st.write(f"{'✓' if claim['passed'] else '❌'} **{claim['claim_id']}**: {claim['detail']}")

with st.expander("Configuration"):
    st.json(data.get("config", {}))
with st.expander("Raw JSON"):
    st.json(data)

col1, col2 = st.columns(2)
with col1:
    st.download_button("📥 Download", data=path.read_text(encoding="utf-8"), file_name=path.name,
                       mime="application/json", use_container_width=True)
with col2:
    if st.button("🗑️ Delete", use_container_width=True):
        path.unlink()
        st.rerun()
