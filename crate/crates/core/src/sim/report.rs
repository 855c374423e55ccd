use std::io::Write;

use serde::Serialize;

use crate::prefetch::PrefetchSource;

/// Prefetch counters for one layer of the stack.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LayerCounters {
    /// Addresses the layer asked for.
    pub candidates: u64,
    /// Candidates that were not resident and got inserted.
    pub issued: u64,
    /// Inserted blocks that later took a demand hit.
    pub used: u64,
}

/// Result of one simulation run. Counters are exact; ratios are derived.
///
/// Field names are stable: they are the CSV header and the JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub capacity_blocks: u64,
    pub effective_capacity_blocks: u64,
    pub metadata_charge_blocks: u64,
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub cold_misses: u64,
    pub hit_ratio: f64,
    pub max_obtainable_hit_ratio: f64,
    pub prefetch_candidates: u64,
    pub prefetches_issued: u64,
    pub prefetched_used: u64,
    pub precision: f64,
    pub mithril_candidates: u64,
    pub mithril_issued: u64,
    pub mithril_used: u64,
    pub amp_candidates: u64,
    pub amp_issued: u64,
    pub amp_used: u64,
    pub pg_candidates: u64,
    pub pg_issued: u64,
    pub pg_used: u64,
    pub evictions: u64,
    pub second_chances: u64,
    /// Peak metadata observed during the run.
    pub metadata_bytes: u64,
    pub metadata_budget_bytes: u64,
    pub mithril_associations: u64,
    pub mithril_mining_runs: u64,
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl SimulationReport {
    pub fn layer(&self, source: PrefetchSource) -> LayerCounters {
        let (candidates, issued, used) = match source {
            PrefetchSource::Mithril => (self.mithril_candidates, self.mithril_issued, self.mithril_used),
            PrefetchSource::Amp => (self.amp_candidates, self.amp_issued, self.amp_used),
            PrefetchSource::Pg => (self.pg_candidates, self.pg_issued, self.pg_used),
        };
        LayerCounters {
            candidates,
            issued,
            used,
        }
    }

    /// Precision over candidates rather than insertions.
    pub fn candidate_precision(&self) -> f64 {
        ratio(self.prefetched_used, self.prefetch_candidates)
    }

    pub fn summary_line(&self) -> String {
        format!(
            "hit_ratio={:.6} precision={:.6} metadata_bytes={}",
            self.hit_ratio, self.precision, self.metadata_bytes
        )
    }
}

/// Writes `reports` as CSV with a header row.
pub fn write_csv<W: Write>(out: W, reports: &[SimulationReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(mut out: W, reports: &[SimulationReport]) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
