//! Self-contained model file: network parameters, the frozen feature
//! normalization, and the window geometry used at training time.
//!
//! The file is line-oriented text with tab-separated fields. Lines starting
//! with `#` and blank lines are ignored. Keys may appear in any order but
//! each must appear exactly once (one `weights` line per layer row, one
//! `biases` line per layer):
//!
//! ```text
//! format_version   1
//! sensor_order     gc,cpg,d_yr,d_ws,d_mk,f_h,f_i,f_v
//! window_length    300
//! window_step      30
//! layer_sizes      8,5,1
//! feature_means    <8 numbers>
//! feature_stddevs  <8 numbers>
//! weights          <layer> <row> <one number per source unit>
//! biases           <layer> <one number per destination unit>
//! ```
//!
//! Layers and rows are 0-based. Numbers are written with 17 significant
//! digits, which round-trips every finite `f64` exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::{parse_err, validate_layer_sizes, Mlp, MlpError};
use crate::pipeline::NormalizationParams;
use crate::sensors::{SensorVector, SENSOR_COUNT, SENSOR_NAMES};
use crate::seqio::WindowSpec;

use super::Label;

pub const FORMAT_VERSION: u32 = 1;

/// A trained detector: network plus everything needed to scan a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub network: Mlp,
    pub normalization: NormalizationParams,
    pub window: WindowSpec,
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_nums(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join("\t")
}

impl DetectorModel {
    pub fn new(
        network: Mlp,
        normalization: NormalizationParams,
        window: WindowSpec,
    ) -> Result<Self, MlpError> {
        if network.input_dim() != SENSOR_COUNT || normalization.dim() != SENSOR_COUNT {
            return Err(MlpError::Config(format!(
                "detector needs {SENSOR_COUNT} inputs, got network {} / normalization {}",
                network.input_dim(),
                normalization.dim()
            )));
        }
        Ok(Self {
            network,
            normalization,
            window,
        })
    }

    /// Normalizes a sensor vector and classifies it.
    pub fn classify(&self, sensors: &SensorVector) -> (f64, Label) {
        let z = self.normalization.apply(sensors.as_array());
        self.network
            .classify(&z)
            .expect("detector input dimension is fixed at construction")
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let net = &self.network;
        let _ = writeln!(s, "format_version\t{FORMAT_VERSION}");
        let _ = writeln!(s, "sensor_order\t{}", SENSOR_NAMES.join(","));
        let _ = writeln!(s, "window_length\t{}", self.window.length());
        let _ = writeln!(s, "window_step\t{}", self.window.step());
        let sizes: Vec<String> = net.layer_sizes().iter().map(usize::to_string).collect();
        let _ = writeln!(s, "layer_sizes\t{}", sizes.join(","));
        let _ = writeln!(s, "feature_means\t{}", join_nums(self.normalization.means()));
        let _ = writeln!(s, "feature_stddevs\t{}", join_nums(self.normalization.stddevs()));
        for (l, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
            let src = net.layer_sizes()[l];
            for (r, row) in w.chunks_exact(src).enumerate() {
                let _ = writeln!(s, "weights\t{l}\t{r}\t{}", join_nums(row));
            }
            let _ = writeln!(s, "biases\t{l}\t{}", join_nums(b));
        }
        s
    }

    /// Short content digest of the serialized model.
    pub fn model_id(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn deserialize(text: &str) -> Result<Self, MlpError> {
        let mut scalars: BTreeMap<&str, (usize, Vec<&str>)> = BTreeMap::new();
        let mut weight_rows: BTreeMap<(usize, usize), (usize, Vec<f64>)> = BTreeMap::new();
        let mut bias_rows: BTreeMap<usize, (usize, Vec<f64>)> = BTreeMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut fields = raw.split('\t');
            let key = fields.next().unwrap_or_default();
            let rest: Vec<&str> = fields.collect();
            match key {
                "weights" => {
                    if rest.len() < 3 {
                        return Err(parse_err(line, "weights line needs layer, row and values"));
                    }
                    let l = parse_index(line, rest[0])?;
                    let r = parse_index(line, rest[1])?;
                    let vals = parse_nums(line, &rest[2..])?;
                    if weight_rows.insert((l, r), (line, vals)).is_some() {
                        return Err(parse_err(line, format!("duplicate weights row {l}/{r}")));
                    }
                }
                "biases" => {
                    if rest.len() < 2 {
                        return Err(parse_err(line, "biases line needs layer and values"));
                    }
                    let l = parse_index(line, rest[0])?;
                    let vals = parse_nums(line, &rest[1..])?;
                    if bias_rows.insert(l, (line, vals)).is_some() {
                        return Err(parse_err(line, format!("duplicate biases for layer {l}")));
                    }
                }
                "format_version" | "sensor_order" | "window_length" | "window_step"
                | "layer_sizes" | "feature_means" | "feature_stddevs" => {
                    if scalars.insert(key, (line, rest)).is_some() {
                        return Err(parse_err(line, format!("duplicate key {key}")));
                    }
                }
                other => return Err(parse_err(line, format!("unknown key {other:?}"))),
            }
        }

        let field = |key: &str| -> Result<(usize, Vec<&str>), MlpError> {
            scalars
                .get(key)
                .cloned()
                .ok_or_else(|| parse_err(0, format!("missing required key {key}")))
        };
        let single = |key: &str| -> Result<(usize, String), MlpError> {
            let (line, vals) = field(key)?;
            match vals.as_slice() {
                [v] => Ok((line, v.trim().to_string())),
                _ => Err(parse_err(line, format!("{key} takes exactly one value"))),
            }
        };

        let (line, version) = single("format_version")?;
        if version != FORMAT_VERSION.to_string() {
            return Err(parse_err(line, format!("unsupported format_version {version}")));
        }
        let (line, order) = single("sensor_order")?;
        if order != SENSOR_NAMES.join(",") {
            return Err(parse_err(line, format!("unexpected sensor_order {order}")));
        }
        let (wl_line, wl) = single("window_length")?;
        let (_, ws) = single("window_step")?;
        let window = WindowSpec::new(parse_index(wl_line, &wl)?, parse_index(wl_line, &ws)?)
            .map_err(|e| parse_err(wl_line, e.to_string()))?;

        let (line, sizes) = single("layer_sizes")?;
        let layer_sizes = sizes
            .split(',')
            .map(|v| parse_index(line, v))
            .collect::<Result<Vec<_>, _>>()?;
        validate_layer_sizes(&layer_sizes).map_err(|e| parse_err(line, e.to_string()))?;
        if layer_sizes[0] != SENSOR_COUNT {
            return Err(parse_err(line, format!("input layer must have {SENSOR_COUNT} units")));
        }

        let (m_line, means) = field("feature_means")?;
        let (s_line, stds) = field("feature_stddevs")?;
        let means = parse_nums(m_line, &means)?;
        let stds = parse_nums(s_line, &stds)?;
        if means.len() != SENSOR_COUNT || stds.len() != SENSOR_COUNT {
            return Err(parse_err(m_line, format!("normalization needs {SENSOR_COUNT} means and stddevs")));
        }
        let normalization =
            NormalizationParams::new(means, stds).map_err(|e| parse_err(s_line, e.to_string()))?;

        let n_layers = layer_sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            let (src, dst) = (pair[0], pair[1]);
            let mut w = Vec::with_capacity(src * dst);
            for r in 0..dst {
                let (line, row) = weight_rows
                    .remove(&(l, r))
                    .ok_or_else(|| parse_err(0, format!("missing weights row {l}/{r}")))?;
                if row.len() != src {
                    return Err(parse_err(line, format!("weights row {l}/{r} has {} values, expected {src}", row.len())));
                }
                w.extend(row);
            }
            let (line, b) = bias_rows
                .remove(&l)
                .ok_or_else(|| parse_err(0, format!("missing biases for layer {l}")))?;
            if b.len() != dst {
                return Err(parse_err(line, format!("biases {l} has {} values, expected {dst}", b.len())));
            }
            weights.push(w);
            biases.push(b);
        }
        if let Some((&(l, r), (line, _))) = weight_rows.iter().next() {
            return Err(parse_err(*line, format!("weights row {l}/{r} outside layer_sizes")));
        }
        if let Some((&l, (line, _))) = bias_rows.iter().next() {
            return Err(parse_err(*line, format!("biases {l} outside layer_sizes")));
        }
        let network = Mlp::from_parts(layer_sizes, weights, biases)
            .map_err(|e| parse_err(0, e.to_string()))?;
        DetectorModel::new(network, normalization, window)
    }
}

fn parse_index(line: usize, s: &str) -> Result<usize, MlpError> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("expected a non-negative integer, got {s:?}")))
}

fn parse_nums(line: usize, fields: &[&str]) -> Result<Vec<f64>, MlpError> {
    fields
        .iter()
        .map(|f| {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("bad number {f:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("non-finite number {f:?}")))
            }
        })
        .collect()
}
