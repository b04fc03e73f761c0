//! Per-layer accounting of output shape, activation memory and weight count.

use std::fmt;

use super::{ProSqnModel, CONV1_KERNEL, CONV1_STRIDE, POOL_AFTER_FIRE, POOL_KERNEL, POOL_STRIDE};
use crate::error::{Error, Result};
use crate::ndnn::{maxpool_out_dim, Scalar};

pub const EXPECTED_TOTAL_BYTES: usize = 623_260;
pub const EXPECTED_TOTAL_WEIGHTS: usize = 1_244_234;

const BYTES_PER_VALUE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRow {
    pub layer: String,
    pub output: [usize; 3],
    pub memory_bytes: usize,
    /// `None` for the input row.
    pub weights: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn total_bytes(&self) -> usize {
        self.rows.iter().map(|r| r.memory_bytes).sum()
    }

    pub fn total_weights(&self) -> usize {
        self.rows.iter().filter_map(|r| r.weights).sum()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>16} {:>12} {:>10}", "layer", "output", "memory_B", "weights")?;
        for r in &self.rows {
            let w = r.weights.map_or("N/A".to_string(), |w| w.to_string());
            let shape = format!("{}x{}x{}", r.output[0], r.output[1], r.output[2]);
            writeln!(f, "{:<8} {:>16} {:>12} {:>10}", r.layer, shape, r.memory_bytes, w)?;
        }
        write!(f, "{:<8} {:>16} {:>12} {:>10}", "Overall", "", self.total_bytes(), self.total_weights())
    }
}

type Golden = (&'static str, [usize; 3], usize, Option<usize>);

/// Reference accounting for the full-width network.
const GOLDEN: [Golden; 19] = [
    ("Input", [64, 64, 1], 16_384, None),
    ("Conv1", [30, 30, 32], 115_200, Some(1_152)),
    ("Pool", [15, 15, 32], 28_800, Some(0)),
    ("Fire2", [15, 15, 64], 72_000, Some(5_632)),
    ("Fire3", [15, 15, 128], 129_600, Some(11_264)),
    ("Pool", [7, 7, 128], 25_088, Some(0)),
    ("Fire4", [7, 7, 256], 56_448, Some(45_056)),
    ("Fire5", [7, 7, 256], 56_448, Some(49_152)),
    ("Pool", [3, 3, 256], 9_216, Some(0)),
    ("Fire6", [3, 3, 384], 15_552, Some(104_448)),
    ("Fire7", [3, 3, 384], 15_552, Some(110_592)),
    ("Fire8", [3, 3, 512], 20_736, Some(188_416)),
    ("Fire9", [3, 3, 512], 20_736, Some(196_608)),
    ("Conv10", [3, 3, 1024], 36_864, Some(524_288)),
    ("Pool", [1, 1, 1024], 4_096, Some(0)),
    ("Den1", [1, 1, 4], 16, Some(4_096)),
    ("Den2", [1, 1, 100], 400, Some(500)),
    ("Den3", [1, 1, 30], 120, Some(3_000)),
    ("Den4", [1, 1, 1], 4, Some(30)),
];

/// Layer-by-layer accounting derived from the model's own layer
/// dimensions by shape algebra (no forward pass).
pub fn layer_report<T: Scalar>(model: &ProSqnModel<T>) -> Result<AuditReport> {
    let mut rows = Vec::with_capacity(19);
    let mut push = |layer: &str, shape: [usize; 3], stored: usize, weights: Option<usize>| {
        rows.push(AuditRow {
            layer: layer.to_string(),
            output: shape,
            memory_bytes: shape[0] * shape[1] * stored * BYTES_PER_VALUE,
            weights,
        });
    };
    push("Input", [64, 64, 1], 1, None);
    let (h, w) = model.conv1.out_dims(64, 64)?;
    debug_assert_eq!((model.conv1.k_h, model.conv1.stride), (CONV1_KERNEL, CONV1_STRIDE));
    let mut shape = [h, w, model.conv1.c_out];
    push("Conv1", shape, shape[2], Some(model.conv1.weight_count()));
    let pool = |s: [usize; 3]| {
        [
            maxpool_out_dim(s[0], POOL_KERNEL, POOL_STRIDE),
            maxpool_out_dim(s[1], POOL_KERNEL, POOL_STRIDE),
            s[2],
        ]
    };
    shape = pool(shape);
    push("Pool", shape, shape[2], Some(0));
    for (i, fire) in model.fires.iter().enumerate() {
        if fire.squeeze.c_in != shape[2] {
            return Err(Error::Audit {
                layer: format!("Fire{}", i + 2),
                msg: format!("expects {} input channels, receives {}", fire.squeeze.c_in, shape[2]),
            });
        }
        shape = [shape[0], shape[1], fire.spec.out_channels()];
        // squeeze outputs are held alongside both expand outputs
        let stored = fire.spec.squeeze + fire.spec.expand1 + fire.spec.expand3;
        push(&format!("Fire{}", i + 2), shape, stored, Some(fire.weight_count()));
        if POOL_AFTER_FIRE.contains(&i) {
            shape = pool(shape);
            push("Pool", shape, shape[2], Some(0));
        }
    }
    shape = [shape[0], shape[1], model.conv10.c_out];
    push("Conv10", shape, shape[2], Some(model.conv10.weight_count()));
    shape = [1, 1, shape[2]];
    push("Pool", shape, shape[2], Some(0));
    if model.den1.n_in != shape[2] || model.den2.n_in != model.den1.n_out + 1 {
        return Err(Error::Audit {
            layer: "Den1".into(),
            msg: "dense head does not match the feature width plus one time input".into(),
        });
    }
    for (name, d) in [("Den1", &model.den1), ("Den2", &model.den2), ("Den3", &model.den3), ("Den4", &model.den4)] {
        push(name, [1, 1, d.n_out], d.n_out, Some(d.weight_count()));
    }
    Ok(AuditReport { rows })
}

/// Computes the per-layer report and, for the full-width network, checks it
/// row by row against the reference accounting.
pub fn audit_architecture<T: Scalar>(model: &ProSqnModel<T>) -> Result<AuditReport> {
    let report = layer_report(model)?;
    if model.arch.width_divisor != 1 {
        return Ok(report);
    }
    for (row, &(name, shape, bytes, weights)) in report.rows.iter().zip(GOLDEN.iter()) {
        let fail = |msg: String| Error::Audit {
            layer: name.to_string(),
            msg,
        };
        if row.layer != name {
            return Err(fail(format!("found layer {}", row.layer)));
        }
        if row.output != shape {
            return Err(fail(format!("output {:?}, expected {shape:?}", row.output)));
        }
        if row.memory_bytes != bytes {
            return Err(fail(format!("memory {} B, expected {bytes} B", row.memory_bytes)));
        }
        if row.weights != weights {
            return Err(fail(format!("weights {:?}, expected {weights:?}", row.weights)));
        }
    }
    if report.rows.len() != GOLDEN.len() {
        return Err(Error::Audit {
            layer: "Overall".into(),
            msg: format!("{} rows, expected {}", report.rows.len(), GOLDEN.len()),
        });
    }
    if report.total_bytes() != EXPECTED_TOTAL_BYTES || report.total_weights() != EXPECTED_TOTAL_WEIGHTS {
        return Err(Error::Audit {
            layer: "Overall".into(),
            msg: format!("totals {} B / {} weights", report.total_bytes(), report.total_weights()),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prosqn::{Architecture, FireSpec};

    #[test]
    fn full_model_matches_reference() {
        let model = ProSqnModel::build(Architecture::FULL, 3);
        let report = audit_architecture(&model).unwrap();
        assert_eq!(report.total_bytes(), 623_260);
        assert_eq!(report.total_weights(), 1_244_234);
        assert_eq!(model.weight_count(), 1_244_234);
        let conv1 = &report.rows[1];
        assert_eq!((conv1.memory_bytes, conv1.weights), (115_200, Some(1_152)));
        let den2 = report.rows.iter().find(|r| r.layer == "Den2").unwrap();
        assert_eq!((den2.memory_bytes, den2.weights), (400, Some(500)));
    }

    #[test]
    fn divergent_layer_is_named() {
        let mut model = ProSqnModel::build(Architecture::FULL, 3);
        model.fires[2] = crate::prosqn::FireModule::zeros(128, FireSpec::new(32, 128, 64));
        model.fires[3] = crate::prosqn::FireModule::zeros(192, FireSpec::new(32, 128, 128));
        match audit_architecture(&model) {
            Err(Error::Audit { layer, .. }) => assert_eq!(layer, "Fire4"),
            other => panic!("expected audit failure, got {other:?}"),
        }
    }
}
