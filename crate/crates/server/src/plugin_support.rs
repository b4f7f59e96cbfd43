//! Shared code of the bundled example plugins.

use lakescope_core::registry::contract::{ClusterRequest, ClusterResponse};

pub const DELAY_ENV: &str = "LAKESCOPE_PLUGIN_DELAY_MS";

/// Sleeps for `LAKESCOPE_PLUGIN_DELAY_MS` if set.
pub fn delay() {
    if let Some(ms) = std::env::var(DELAY_ENV).ok().and_then(|v| v.parse::<u64>().ok()) {
        std::thread::sleep(std::time::Duration::from_millis(ms));
    }
}

/// Points sorted by id and split into `c` contiguous chunks whose sizes
/// differ by at most one. `c >= n` gives singletons.
pub fn contiguous_chunks(req: &ClusterRequest) -> ClusterResponse {
    let mut ids: Vec<String> = req.points.iter().map(|p| p.id.clone()).collect();
    ids.sort();
    let n = ids.len();
    let c = req.c.clamp(1, n.max(1));
    let mut groups = Vec::with_capacity(c);
    let mut start = 0;
    for g in 0..c {
        let size = n / c + usize::from(g < n % c);
        groups.push(ids[start..start + size].to_vec());
        start += size;
    }
    groups.retain(|g| !g.is_empty());
    ClusterResponse { groups }
}
