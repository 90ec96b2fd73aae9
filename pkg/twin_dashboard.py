# twin_dashboard.py - Streamlit explorer for the bolt twins
# Run: streamlit run twin_dashboard.py  (with the twin server on PMI_DT_HOST:PMI_DT_PORT)
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
import requests
import streamlit as st

TRACKED = ["Test_Num", "Max_Load", "Max_Position", "Fracture"]


class TwinClient:
    def __init__(self, base_url: Optional[str] = None):
        host = os.environ.get("PMI_DT_HOST", "localhost")
        port = os.environ.get("PMI_DT_PORT", "8004")
        self.base_url = base_url or f"http://{host}:{port}"

    def _get(self, path: str):
        response = requests.get(f"{self.base_url}{path}", timeout=10)
        response.raise_for_status()
        return response.json()

    def status(self) -> Optional[Dict[str, Any]]:
        try:
            return self._get("/")
        except requests.RequestException:
            return None

    def twins(self) -> List[str]:
        return self._get("/twins")

    def twin(self, twin_id: str) -> Dict[str, Any]:
        return self._get(f"/twins/{twin_id}")

    def history(self, twin_id: str) -> List[Dict[str, Any]]:
        return self._get(f"/twins/{twin_id}/history")

    def predict(self, twin_id: str) -> Dict[str, Any]:
        response = requests.post(f"{self.base_url}/twins/{twin_id}/predict", timeout=30)
        return response.json()


def history_frame(events: List[Mapping[str, Any]]) -> pd.DataFrame:
    """Twin state after each event: one row per version, tracked properties carried forward."""
    state: Dict[str, Any] = {}
    rows = []
    for event in sorted(events, key=lambda e: e["version"]):
        state.update({k: v for k, v in event["changes"].items() if k in TRACKED})
        rows.append({"version": event["version"], "timestamp": event["timestamp"],
                     **{k: state.get(k) for k in TRACKED}})
    return pd.DataFrame(rows, columns=["version", "timestamp"] + TRACKED)


def history_figure(frame: pd.DataFrame) -> go.Figure:
    tests = frame.dropna(subset=["Test_Num"])
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=tests["Test_Num"], y=tests["Max_Position"], name="Max_Position (in)",
                             mode="lines+markers"))
    fig.add_trace(go.Scatter(x=tests["Test_Num"], y=tests["Max_Load"], name="Max_Load (lbf)",
                             mode="lines+markers", yaxis="y2"))
    broken = tests[tests["Fracture"] == True]  # noqa: E712
    if not broken.empty:
        fig.add_trace(go.Scatter(x=broken["Test_Num"], y=broken["Max_Position"], name="Fracture",
                                 mode="markers", marker={"symbol": "x", "size": 14, "color": "red"}))
    fig.update_layout(xaxis_title="Test", yaxis_title="Elongation (in)",
                      yaxis2={"title": "Load (lbf)", "overlaying": "y", "side": "right"})
    return fig


def importance_figure(importances: Mapping[str, float], top: int = 10) -> go.Figure:
    ranked = sorted(importances.items(), key=lambda kv: kv[1], reverse=True)[:top]
    frame = pd.DataFrame(ranked, columns=["feature", "importance"])
    fig = px.bar(frame, x="importance", y="feature", orientation="h", title="Feature importance")
    fig.update_layout(yaxis={"categoryorder": "total ascending"})
    return fig


def main():
    st.set_page_config(page_title="🔩 Bolt Twins", page_icon="🔩", layout="wide")
    st.title("🔩 Bolt Digital Twins")

    client = TwinClient(st.sidebar.text_input("Twin server", value=TwinClient().base_url))
    status = client.status()
    if status is None:
        st.error(f"❌ Cannot reach the twin server at {client.base_url}")
        return
    st.sidebar.success(f"✅ {status['twins']} twins, predictor: {status.get('predictor') or 'none'}")

    twin_ids = client.twins()
    if not twin_ids:
        st.info("No twins yet. Feed some with `python pmi_dt.py ingest data/bolt_tests.csv --store DIR`.")
        return
    twin_id = st.sidebar.selectbox("Twin", twin_ids)
    twin = client.twin(twin_id)

    left, right = st.columns([1, 2])
    with left:
        st.subheader(f"{twin_id} · v{twin['version']}")
        props = pd.DataFrame(sorted(twin["properties"].items()), columns=["property", "value"])
        st.dataframe(props.astype({"value": str}), use_container_width=True, hide_index=True)
        if st.button("Predict fracture"):
            result = client.predict(twin_id)
            if "error_code" in result:
                st.warning(f"⚠️ {result['message']}")
            else:
                st.metric("P(fracture)", f"{result['fracture_probability']:.2f}")
                if result["imputed_features"]:
                    st.caption(f"Training means used for: {', '.join(result['imputed_features'])}")
    with right:
        frame = history_frame(client.history(twin_id))
        st.plotly_chart(history_figure(frame), use_container_width=True)

    path = st.sidebar.text_input("Importances file", value="artifacts/importances_forest.json")
    if path and Path(path).exists():
        st.plotly_chart(importance_figure(json.loads(Path(path).read_text())), use_container_width=True)


if __name__ == "__main__":
    main()
