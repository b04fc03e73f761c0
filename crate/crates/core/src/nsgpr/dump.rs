//! Plain-text `key=value` dump of a fitted model. Floats are written in
//! shortest round-trip form, so a reload reproduces the model exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector3;

use super::field::LengthScaleField;
use super::gp::{GprDataset, GprModel, KernelParams, LengthModel};
use crate::error::{Error, Result};

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

pub fn dump_model(model: &GprModel) -> String {
    let mut s = String::new();
    let p = &model.params;
    let kind = match p.lengths {
        LengthModel::Local(_) => "local",
        LengthModel::Universal { .. } => "se",
    };
    let _ = writeln!(s, "kind={kind}");
    let _ = writeln!(s, "sigma0={:?}", p.sigma0);
    let _ = writeln!(s, "sigmaf={:?}", p.sigmaf);
    let _ = writeln!(s, "sigmae={:?}", p.sigmae);
    match &p.lengths {
        LengthModel::Local(f) => {
            let _ = writeln!(s, "support={}", list(f.support()));
            let _ = writeln!(s, "log_lengths={}", list(f.log_lengths()));
            let _ = writeln!(s, "length2={:?}", f.length2());
            let _ = writeln!(s, "scale2={:?}", f.scale2());
        }
        LengthModel::Universal { length } => {
            let _ = writeln!(s, "length={length:?}");
        }
    }
    let _ = writeln!(s, "beta={}", list(model.beta.as_slice()));
    let d = &model.data;
    let _ = writeln!(s, "t_offset={:?}", d.t_offset);
    let _ = writeln!(s, "t_scale={:?}", d.t_scale);
    let _ = writeln!(s, "y_scale={:?}", d.y_scale);
    let _ = writeln!(s, "x={}", list(&d.x));
    let _ = writeln!(s, "y={}", list(&d.y));
    s
}

pub fn load_model(text: &str) -> Result<GprModel> {
    let mut kv = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key=value", i + 1)))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        kv.get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("missing key '{k}'")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("bad number for '{k}'")))
    };
    let nums = |k: &str| -> Result<Vec<f64>> {
        let v = get(k)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|x| x.parse().map_err(|_| Error::Format(format!("bad list entry in '{k}'"))))
            .collect()
    };
    let lengths = match get("kind")? {
        "local" => LengthModel::Local(LengthScaleField::new(
            nums("support")?,
            nums("log_lengths")?,
            num("length2")?,
            num("scale2")?,
        )?),
        "se" => LengthModel::Universal { length: num("length")? },
        other => return Err(Error::Format(format!("unknown kernel kind '{other}'"))),
    };
    let params = KernelParams {
        sigma0: num("sigma0")?,
        sigmaf: num("sigmaf")?,
        sigmae: num("sigmae")?,
        lengths,
    };
    let beta = nums("beta")?;
    if beta.len() != 3 {
        return Err(Error::Format("beta must have 3 entries".into()));
    }
    let mut data = GprDataset::from_normalized(nums("x")?, nums("y")?)?;
    data.t_offset = num("t_offset")?;
    data.t_scale = num("t_scale")?;
    data.y_scale = num("y_scale")?;
    GprModel::condition_with_beta(data, params, Vector3::new(beta[0], beta[1], beta[2]))
}
