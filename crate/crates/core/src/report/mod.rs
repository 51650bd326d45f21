//! Tables and static figures built from sweep records.

mod forest;
mod heatmap;
mod svg;
mod table;

pub use forest::emit_forest;
pub use heatmap::{color, emit_heatmap, SCALE_HI, SCALE_LO};
pub use table::{
    emit_table, fmt_num, parse_csv, parse_jsonl, TableFormat, TableRow, COLUMNS, NA,
};

use crate::error::{Error, Result};
use crate::experiments::SweepRecord;

/// First record, after checking that all records share one cohort size,
/// prevalence and model.
fn single_group(records: &[SweepRecord]) -> Result<&SweepRecord> {
    let first = records.first().ok_or(Error::Empty)?;
    if let Some(r) = records.iter().find(|r| {
        r.n_total != first.n_total || r.prevalence != first.prevalence || r.model != first.model
    }) {
        return Err(Error::Invalid(format!(
            "records mix groups: prevalence {} model {} vs prevalence {} model {}",
            first.prevalence, first.model, r.prevalence, r.model
        )));
    }
    Ok(first)
}
