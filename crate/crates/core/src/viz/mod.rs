//! Heatmaps of the ratio grid, 2-D embeddings and SOM diagnostics, and
//! summary tables. Figures are plain SVG 1.1 with fixed-precision numbers,
//! so identical inputs give identical bytes.

mod pca;
mod report;
mod som;
mod svg;
mod tsne;

pub use pca::{pca2, symmetric_eigen};
pub use report::{
    diagnostic_sample, emit_diagnostics, emit_heatmaps, emit_tables, figure_filename, summary_csv,
    DiagnosticConfig, TaggedRows, VizKind, DIAGNOSTIC_REAL, DIAGNOSTIC_SYNTHETIC,
};
pub use som::{som_fit, CellCounts, SomGrid, SomParams};
pub use svg::{colour, render_heatmap, render_scatter, render_som, HeatCell, Heatmap};
pub use tsne::{affinities, tsne2, Affinities, TsneOutput, TsneParams, TSNE_MAX_ROWS};

use serde::{Deserialize, Serialize};

/// Origin of a plotted row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Negative = 0,
    Positive = 1,
    Synthetic = 2,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::Negative, Tag::Positive, Tag::Synthetic];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Negative => "negative",
            Tag::Positive => "positive",
            Tag::Synthetic => "synthetic",
        }
    }
}

#[cfg(test)]
mod tests;
