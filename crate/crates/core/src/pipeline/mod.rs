//! End-to-end orchestration: trace, evaluate, flag anomalies, and export
//! money-flow graphs.

pub mod anomaly;
pub mod eval;
pub mod flow;
pub mod trace;

pub use anomaly::{flag_anomalies, AnomalyFlag, AnomalyReport};
pub use eval::{evaluate, EvalDirection, Metrics};
pub use flow::{build_flow_graph, EdgeKind, FlowEdge, FlowGraph, FlowNode};
pub use trace::{
    trace, Models, PipelineError, TraceDirective, TraceOptions, TraceResult, TraceStatus, TxRef,
};
