import sys
import os
# Add project root to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

# Load environment variables explicitly
from dotenv import load_dotenv
load_dotenv(os.path.join(os.path.dirname(__file__), '..', '.env'))

import streamlit as st
import pandas as pd
from datetime import datetime
from pathlib import Path

st.set_page_config(
    page_title="Run Scenario - NewHope Backdoor Lab",
    page_icon="▶",
    layout="wide"
)

# Check for dependencies
try:
    from pydantic import ValidationError
    from src.config import SEED_ENV_VAR
    from src.harness import LabHarness, Scenario, ScenarioConfig, validate_report
    from src.params_ring import PARAM_SETS, DEFAULT_PARAM_SET
    from src.sampling import random_seed, seed_to_hex
except ImportError as e:
    st.error("❌ Missing dependencies!")
    st.write(f"Error: {e}")
    st.write("")
    st.write("To check which dependencies are missing, run:")
    st.code("run.sh check", language="bash")
    st.write("To install all dependencies:")
    st.code("pip install -r requirements.txt", language="bash")
    st.stop()

st.title('▶ Run a Scenario')

RESULTS_DIR = Path(__file__).parent.parent / "results"

SCENARIO_LABELS = {
    "Honest exchange": Scenario.HONEST,
    "Trapdoored generator": Scenario.BACKDOOR,
    "Uniform control": Scenario.UNIFORM_CONTROL,
    "Cached generator": Scenario.CACHED_A,
    "Man in the middle": Scenario.MITM,
    "Parameter sweep": Scenario.SWEEP,
    "Verify claims": Scenario.VERIFY_CLAIMS,
}

if 'seed' not in st.session_state:
    st.session_state.seed = os.getenv(SEED_ENV_VAR) or seed_to_hex(random_seed())
if 'report' not in st.session_state:
    st.session_state.report = None

with st.sidebar:
    st.subheader("⚙️ Scenario Settings")
    label = st.selectbox("Scenario", list(SCENARIO_LABELS.keys()))
    scenario = SCENARIO_LABELS[label]
    names = list(PARAM_SETS.keys())
    param = st.selectbox("Parameter set", names, index=names.index("toy-n64-q257"),
                         help=f"{DEFAULT_PARAM_SET} is the production size; toy sets run in seconds")
    param_set = PARAM_SETS[param]
    st.caption(f"n={param_set.n}, q={param_set.q}, k={param_set.k_noise}, default p={param_set.p_trapdoor}")
    backend = st.radio("Reconciliation", ["peikert", "d4"], horizontal=True)
    trials = st.number_input("Trials", min_value=1, max_value=100_000, value=100, step=50)
    workers = st.number_input("Worker processes", min_value=1, max_value=os.cpu_count() or 1, value=1)

    st.subheader("🕳️ Trapdoor")
    p = st.number_input("Trapdoor prime p", min_value=3, value=param_set.p_trapdoor)
    weight = st.number_input("Weight", min_value=1, max_value=param_set.n, value=min(2, param_set.n))
    ttl = st.number_input("Cache ttl", min_value=1, value=5)
    if scenario is Scenario.SWEEP:
        weights = st.text_input("Sweep weights", "1,2,4")
        p_values = st.text_input("Sweep primes", str(param_set.p_trapdoor))
        k_values = st.text_input("Sweep noise widths", str(param_set.k_noise))

    st.subheader("🎲 Seed")
    st.code(st.session_state.seed, language=None)
    if st.button("New Seed", use_container_width=True):
        st.session_state.seed = seed_to_hex(random_seed())
        st.rerun()

values = dict(
    scenario=scenario,
    trials=int(trials),
    param=param,
    backend=backend,
    p=int(p),
    weight=int(weight),
    ttl=int(ttl),
    seed=st.session_state.seed,
    workers=int(workers),
)
if scenario is Scenario.SWEEP:
    values.update(weights=weights, p_values=p_values, k_values=k_values)

try:
    config = ScenarioConfig(**values)
except ValidationError as e:
    st.error("⚠️ Invalid settings")
    for error in e.errors():
        location = ".".join(str(part) for part in error["loc"]) or "settings"
        st.write(f"- **{location}**: {error['msg']}")
    st.stop()

if param_set.n >= 512 and trials >= 500:
    st.warning("⚠️ Full-size batches take a minute or more. Add worker processes to speed them up.")

if st.button("▶ Run", type="primary"):
    status = st.empty()
    messages = []

    def on_progress(message):
        messages.append(message)
        status.info(message)

    with st.spinner(f"Running {scenario.value}..."):
        try:
            report = LabHarness(config, progress_callback=on_progress, show_progress_bar=False).run()
        except Exception as e:
            st.error(f"❌ Run failed: {e}")
            st.stop()
    status.success(messages[-1] if messages else "✓ Done")
    st.session_state.report = report

report = st.session_state.report
if report is None:
    st.info("Choose settings in the sidebar and press Run.")
    st.stop()

st.markdown("---")
st.subheader(f"📊 {report.scenario.value} · {report.config.get('param')} · "
             f"{report.wall_clock_seconds:.2f}s")

if report.aggregates:
    rows = [
        {"rate": name, "successes": s.successes, "count": s.count, "value": s.rate,
         "ci_low": s.ci_low, "ci_high": s.ci_high}
        for name, s in sorted(report.aggregates.items())
    ]
    st.dataframe(pd.DataFrame(rows), use_container_width=True, hide_index=True)

if report.metrics:
    with st.expander("Metrics", expanded=True):
        st.json(report.metrics)

if report.windows:
    st.markdown("#### Cache windows")
    st.dataframe(pd.DataFrame([
        {"window": w.window, "trapdoored": w.trapdoored, "sessions": w.sessions, "recovery": w.recovery.rate}
        for w in report.windows
    ]), hide_index=True)

if report.sweep:
    st.markdown("#### Sweep")
    frame = pd.DataFrame([
        {"param": r.param, "k": r.k, "p": r.p, "weight": r.weight, "bound": r.worst_case_bound,
         "guaranteed": r.guaranteed, "recovery": r.recovery.rate}
        for r in report.sweep
    ])
    st.dataframe(frame, hide_index=True)

if report.claims:
    st.markdown("#### Claims")
    for claim in report.claims:
        icon = "✓" if claim.passed else "❌"
        st.write(f"{icon} **{claim.claim_id}**: {claim.detail}")
    if report.passed:
        st.success("✓ All claims passed")
    else:
        st.error("❌ At least one claim failed")
    if report.excluded_claims:
        with st.expander("Claims outside the lab"):
            for item in report.excluded_claims:
                st.write(f"- **{item.claim}**: {item.reason}")

if report.records:
    with st.expander(f"Per-trial records ({len(report.records)})"):
        st.dataframe(pd.DataFrame([r.model_dump() for r in report.records]), hide_index=True)

is_valid, error = validate_report(report.to_dict())
if not is_valid:
    st.warning(f"⚠️ Report does not match its schema: {error}")

col1, col2 = st.columns(2)
with col1:
    st.download_button(
        "📥 Download JSON",
        data=report.to_json(),
        file_name=f"{report.scenario.value}_{report.config.get('seed', '')[:8]}.json",
        mime="application/json",
        use_container_width=True,
    )
with col2:
    if st.button("💾 Save to results/", use_container_width=True):
        stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        path = report.save(str(RESULTS_DIR / f"{report.scenario.value}_{stamp}.json"))
        st.success(f"✓ Saved to {path}")
