import sys
import os
# Add project root to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import streamlit as st
import pandas as pd

st.set_page_config(
    page_title="D4 Explorer - NewHope Backdoor Lab",
    page_icon="🔷",
    layout="wide"
)

try:
    from src.errors import ParameterError
    from src.reconcile import (
        RationalPoint4,
        d4_alice,
        d4_bob,
        d4_tolerance_sweep,
        explain_d4_decode,
        voronoi_relevant_vectors,
    )
    from src.sampling import SeededRng
except ImportError as e:
    st.error("❌ Missing dependencies!")
    st.write(f"Error: {e}")
    st.code("run.sh check", language="bash")
    st.stop()

st.title("🔷 D4 Explorer")

tab_decode, tab_group, tab_sweep = st.tabs(["Nearest point", "One group", "Tolerance sweep"])

with tab_decode:
    st.markdown("Decode a point of Q⁴ to D4 = {x ∈ Z⁴ : Σx even} and place its offset against the 24-cell.")
    text = st.text_input("Point", "0.6, 0.6, 0.1, 0.1", help='Decimals or fractions, e.g. "1/2 1/2 0 0"')
    try:
        result = explain_d4_decode(RationalPoint4.parse(text))
    except ParameterError as e:
        st.error(f"⚠️ {e}")
    else:
        col1, col2, col3 = st.columns(3)
        with col1:
            st.metric("Decoded", str(result.decoded))
        with col2:
            st.metric("Distance²", str(result.squared_distance))
        with col3:
            st.metric("Offset region", result.region.value)
        if len(result.nearest) > 1:
            st.warning(f"⚠️ Tie: {len(result.nearest)} lattice points are equally near")
        st.dataframe(pd.DataFrame({"nearest": [str(p) for p in result.nearest]}), hide_index=True)

    with st.expander("The 24 relevant vectors"):
        vectors = sorted(voronoi_relevant_vectors(), key=lambda p: p.half_coords)
        st.dataframe(pd.DataFrame({"vector": [str(v) for v in vectors]}), hide_index=True)

with tab_group:
    st.markdown("Bob reconciles four coefficients into one key bit and eight help bits; "
                "Alice decodes her noisy copy with the same help.")
    col1, col2 = st.columns(2)
    with col1:
        q = st.number_input("q", min_value=17, value=12289, step=1)
        group = [st.number_input(f"v[{i}]", min_value=0, max_value=int(q) - 1, value=(i * 3001) % int(q),
                                 key=f"v{i}") for i in range(4)]
    with col2:
        deltas = [st.number_input(f"noise[{i}]", value=0, key=f"d{i}") for i in range(4)]
    help_bits, bob_bit = d4_bob(group, int(q))
    noisy = [(v + d) % int(q) for v, d in zip(group, deltas)]
    alice_bit = d4_alice(noisy, help_bits, int(q))
    st.write(f"Help bits: `{''.join(str(b) for b in help_bits.bits)}` · "
             f"quarter offsets {help_bits.d4_offsets().tolist()}")
    if alice_bit == bob_bit:
        st.success(f"✓ Both sides derive key bit {bob_bit}")
    else:
        st.error(f"❌ Bob derives {bob_bit}, Alice derives {alice_bit}")
    st.caption(f"Agreement is guaranteed while every |noise[i]| ≤ {(3 * int(q) - 1) // 32}")

with tab_sweep:
    st.markdown("Mismatch rate of random groups as the per-coefficient noise bound grows.")
    q_sweep = st.number_input("q ", min_value=17, value=12289, step=1)
    trials = st.number_input("Trials per bound", min_value=100, value=5000, step=500)
    steps = st.slider("Bounds", min_value=4, max_value=40, value=16)
    if st.button("▶ Sweep", type="primary"):
        rng = SeededRng(0)
        top = int(q_sweep) // 4
        bounds = sorted({max(1, top * i // steps) for i in range(1, steps + 1)})
        rows = []
        progress = st.progress(0.0)
        for index, bound in enumerate(bounds):
            sweep = d4_tolerance_sweep(int(q_sweep), bound, int(trials), rng.fork(index))
            rows.append({"bound": bound, "mismatch_rate": sweep.rate})
            progress.progress((index + 1) / len(bounds))
        frame = pd.DataFrame(rows)
        st.line_chart(frame.set_index("bound"))
        st.dataframe(frame, hide_index=True)
