import sys
import os
# Add project root to path
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

import json

import streamlit as st
from pathlib import Path

st.set_page_config(
    page_title="NewHope Backdoor Lab",
    page_icon="🔐",
    layout="wide"
)

st.title("🔐 NewHope Backdoor Lab")
st.markdown("""
    A seeded laboratory for the NewHope Ring-LWE key exchange and the trapdoored-generator attack.

    Run honest sessions, plant a trapdoored public generator, and watch a passive observer
    recover Alice's secret and the session key from the transcript alone.
    """)

st.markdown("---")
st.subheader("✨ What You Can Run")

col1, col2, col3 = st.columns(3)

with col1:
    st.markdown("""
    ### 🤝 **Key Exchange**
    - NTT-backed ring arithmetic mod X^n + 1
    - Peikert and D4 reconciliation
    - Byte-exact Message1 / Message2 codec
    - Noise gap versus guaranteed tolerance
    """)

with col2:
    st.markdown("""
    ### 🕳️ **Trapdoored Generator**
    - a = g / f with sparse f = 1 + p·f̂
    - Worst-case bound versus q/2
    - Recovery from Message1 alone
    - Cached-a and man-in-the-middle variants
    """)

with col3:
    st.markdown("""
    ### 📏 **Verification**
    - Claim-by-claim acceptance suite
    - Wilson 95% intervals on every rate
    - D4 brute-force decoding oracle
    - Deterministic, schema-checked reports
    """)

st.markdown("---")
st.subheader("🎯 Getting Started")

col1, col2, col3 = st.columns(3)

with col1:
    st.markdown("### ▶ Run a Scenario")
    st.markdown("Configure a seeded batch and inspect the rates.")
    if st.button("▶ Run Scenario", use_container_width=True, type="primary"):
        st.switch_page("pages/2_Run_Scenario.py")

with col2:
    st.markdown("### 🔷 D4 Explorer")
    st.markdown("Decode a point to D4 and classify it against the 24-cell.")
    if st.button("🔷 Open D4 Explorer", use_container_width=True, type="secondary"):
        st.switch_page("pages/3_D4_Explorer.py")

with col3:
    st.markdown("### 📂 Saved Reports")
    st.markdown("Browse reports written under results/.")
    if st.button("📂 View Reports", use_container_width=True, type="secondary"):
        st.switch_page("pages/4_View_Reports.py")

st.markdown("---")
st.subheader("📈 Lab Overview")

try:
    from src.params_ring import PARAM_SETS

    results_dir = Path(__file__).parent / "results"
    reports = list(results_dir.glob("*.json")) if results_dir.exists() else []
    claim_runs = 0
    for path in reports:
        try:
            if json.loads(path.read_text()).get("scenario") == "verify_claims":
                claim_runs += 1
        except (OSError, json.JSONDecodeError):
            continue

    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Saved Reports", len(reports))
    with col2:
        st.metric("Claim Runs", claim_runs)
    with col3:
        st.metric("Parameter Sets", len(PARAM_SETS))

except Exception as e:
    st.info("Lab stats will be available once you run a scenario.")

st.markdown("---")
st.markdown("""
<div style='text-align: center; color: #666;'>
    <small>
        NewHope Backdoor Lab - research and teaching use only, not a production KEM<br>
        Built with Streamlit • Every run is replayable from its seed
    </small>
</div>
""", unsafe_allow_html=True)

try:
    from importlib.metadata import version
    st.caption(f"Streamlit v{version('streamlit')}")
except Exception:
    pass
