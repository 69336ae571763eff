//! On-disk format for trained networks (JSON).
//!
//! A model file carries the full parameter set plus everything needed to
//! rebuild the governor around it: state layout, utilization bands, the
//! deadline it was trained for, and a fingerprint of the frequency table.
//! Loading against a table with a different fingerprint is refused — the
//! action space and input normalization would silently disagree.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, StateLayout};
use crate::error::{Error, Result};
use crate::power::FrequencyTable;
use crate::rl::net::QNet;

pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format_version: u16,
    layout: StateLayout,
    interval_uppers: Vec<f64>,
    deadline_s: f64,
    /// Hex fingerprint of the frequency table the network was trained on.
    table_fingerprint: String,
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Write a trained network and its encoder settings to `path`.
pub fn save(path: &Path, net: &QNet, encoder: &EncoderConfig, layout: StateLayout) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        layout,
        interval_uppers: encoder.interval_uppers.clone(),
        deadline_s: encoder.deadline_s,
        table_fingerprint: encoder.table.fingerprint(),
        layer_sizes: net.sizes.clone(),
        weights: net.weights.clone(),
        biases: net.biases.clone(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Load a model and rebuild its governor configuration against `table`.
///
/// Fails if the file was written for a different table or format version.
pub fn load(path: &Path, table: &FrequencyTable) -> Result<(QNet, EncoderConfig, StateLayout)> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::BadVersion {
            expected: FORMAT_VERSION,
            found: file.format_version,
        });
    }
    let fingerprint = table.fingerprint();
    if file.table_fingerprint != fingerprint {
        return Err(Error::ModelMismatch(format!(
            "model was trained on table {}, active table is {}",
            file.table_fingerprint, fingerprint
        )));
    }
    let encoder =
        EncoderConfig::with_intervals(table.clone(), file.interval_uppers, file.deadline_s)?;
    let expected_input = file.layout.len(encoder.n_levels(), encoder.n_intervals()) + 1;
    if file.layer_sizes.first() != Some(&expected_input) {
        return Err(Error::ModelMismatch(format!(
            "network expects {} inputs but the {} layout provides {}",
            file.layer_sizes.first().copied().unwrap_or(0),
            file.layout.as_str(),
            expected_input,
        )));
    }
    let net = QNet::from_params(file.layer_sizes, file.weights, file.biases)?;
    Ok((net, encoder, file.layout))
}
