//! Clustering plugin: id-sorted points cut into `c` contiguous chunks.

use lakescope_core::registry::contract::ClusterRequest;
use lakescope_core::registry::plugin::{serve_plugin, Handshake};
use lakescope_core::registry::{StrategyKind, CONTRACT_VERSION};
use lakescope::plugin_support::{contiguous_chunks, delay};

fn main() -> std::io::Result<()> {
    let handshake = Handshake {
        kind: StrategyKind::Clustering,
        contract_version: CONTRACT_VERSION,
        dim: None,
    };
    serve_plugin(handshake, |op, payload| {
        if op != "cluster" {
            return Err(format!("unsupported operation {op}"));
        }
        let req: ClusterRequest = serde_json::from_value(payload).map_err(|e| e.to_string())?;
        delay();
        serde_json::to_value(contiguous_chunks(&req)).map_err(|e| e.to_string())
    })
}
