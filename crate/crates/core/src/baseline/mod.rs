//! Baseline prefetchers: adaptive sequential (AMP) and probability graph (PG).

mod amp;
pub mod pg;

pub use amp::{AmpConfig, AmpPrefetcher, AmpStream};
pub use pg::{PgConfig, PgPrefetcher};
