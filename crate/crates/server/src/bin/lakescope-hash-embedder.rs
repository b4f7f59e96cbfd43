//! Embedding plugin backed by the offline hash embedder (dim 64).

use lakescope_core::embed::{Embedder, OfflineHashEmbedder};
use lakescope_core::registry::contract::{EmbedRequest, EmbedResponse};
use lakescope_core::registry::plugin::{serve_plugin, Handshake};
use lakescope_core::registry::{StrategyKind, CONTRACT_VERSION};

const DIM: usize = 64;

fn main() -> std::io::Result<()> {
    let handshake = Handshake {
        kind: StrategyKind::Embedding,
        contract_version: CONTRACT_VERSION,
        dim: Some(DIM),
    };
    let embedder = OfflineHashEmbedder::new(DIM);
    serve_plugin(handshake, |op, payload| {
        if op != "embed" {
            return Err(format!("unsupported operation {op}"));
        }
        let req: EmbedRequest = serde_json::from_value(payload).map_err(|e| e.to_string())?;
        let vectors = req
            .texts
            .iter()
            .map(|t| embedder.embed(t).map(|v| v.values().to_vec()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        serde_json::to_value(EmbedResponse { vectors }).map_err(|e| e.to_string())
    })
}
