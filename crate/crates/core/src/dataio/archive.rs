use std::path::Path;

use crate::error::{Error, Result};
use crate::nsgpr::{dump_model, load_model as parse_gpr, GprModel};
use crate::prosqn::{Architecture, ProSqnModel};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"VSPR";
pub const ARCHIVE_VERSION: u32 = 1;

/// A named f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveSection {
    pub name: String,
    pub dims: Vec<u32>,
    pub values: Vec<f32>,
}

pub fn encode_archive(sections: &[ArchiveSection]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for s in sections {
        let count: usize = s.dims.iter().map(|&d| d as usize).product();
        if count != s.values.len() || s.dims.len() > u8::MAX as usize || s.name.len() > u16::MAX as usize {
            return Err(Error::Format(format!("section {} is inconsistent with its dims", s.name)));
        }
        out.extend_from_slice(&(s.name.len() as u16).to_le_bytes());
        out.extend_from_slice(s.name.as_bytes());
        out.push(s.dims.len() as u8);
        for d in &s.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &s.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("archive truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_archive(bytes: &[u8]) -> Result<Vec<ArchiveSection>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4).ok() != Some(ARCHIVE_MAGIC.as_slice()) {
        return Err(Error::Format("not a model archive (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != ARCHIVE_VERSION {
        return Err(Error::Format(format!("unsupported archive version {version}")));
    }
    let count = c.u32()? as usize;
    let mut sections = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(c.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Format("section name is not UTF-8".into()))?
            .to_string();
        let rank = c.take(1)?[0] as usize;
        let dims = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| Error::Format(format!("section {name} is too large")))?;
        let payload = c.take(n.checked_mul(4).ok_or_else(|| Error::Format("section too large".into()))?)?;
        let values = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        sections.push(ArchiveSection { name, dims, values });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after the last section", bytes.len() - c.pos)));
    }
    Ok(sections)
}

fn scalar(name: &str, v: f32) -> ArchiveSection {
    ArchiveSection {
        name: name.into(),
        dims: vec![1],
        values: vec![v],
    }
}

pub(crate) fn model_sections(model: &ProSqnModel) -> Vec<ArchiveSection> {
    let mut out = vec![
        scalar("meta.width_divisor", model.arch.width_divisor as f32),
        scalar("meta.time_scale", model.time_scale),
        scalar("meta.rul_scale", model.rul_scale),
    ];
    for ((name, shape), values) in model
        .param_names()
        .into_iter()
        .zip(model.param_shapes())
        .zip(model.param_slices())
    {
        out.push(ArchiveSection {
            name,
            dims: shape.iter().map(|&d| d as u32).collect(),
            values: values.to_vec(),
        });
    }
    out
}

pub(crate) fn model_from_sections(sections: Vec<ArchiveSection>) -> Result<ProSqnModel> {
    let mut by_name: std::collections::HashMap<String, ArchiveSection> =
        sections.into_iter().map(|s| (s.name.clone(), s)).collect();
    let mut meta = |name: &str| -> Result<f32> {
        match by_name.remove(name) {
            Some(s) if s.values.len() == 1 => Ok(s.values[0]),
            _ => Err(Error::Format(format!("archive lacks scalar section {name}"))),
        }
    };
    let divisor = meta("meta.width_divisor")?;
    let time_scale = meta("meta.time_scale")?;
    let rul_scale = meta("meta.rul_scale")?;
    if divisor.fract() != 0.0 || divisor < 1.0 {
        return Err(Error::Format(format!("invalid width divisor {divisor}")));
    }
    let arch = Architecture::new(divisor as usize).map_err(|e| Error::Format(e.to_string()))?;
    let mut model = ProSqnModel::build(arch, 0);
    model.time_scale = time_scale;
    model.rul_scale = rul_scale;
    let names = model.param_names();
    let shapes = model.param_shapes();
    for ((name, shape), dst) in names.iter().zip(&shapes).zip(model.param_slices_mut()) {
        let s = by_name
            .remove(name)
            .ok_or_else(|| Error::Format(format!("archive lacks section {name}")))?;
        let dims: Vec<usize> = s.dims.iter().map(|&d| d as usize).collect();
        if &dims != shape {
            return Err(Error::Format(format!("section {name} has dims {dims:?}, expected {shape:?}")));
        }
        dst.copy_from_slice(&s.values);
    }
    if let Some(extra) = by_name.keys().min() {
        return Err(Error::Format(format!("unexpected section {extra}")));
    }
    Ok(model)
}

fn write_exclusive(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_model(path: &Path, model: &ProSqnModel) -> Result<()> {
    write_exclusive(path, &encode_archive(&model_sections(model))?)
}

pub fn load_model(path: &Path) -> Result<ProSqnModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_sections(decode_archive(&bytes)?)
}

pub fn save_gpr(path: &Path, model: &GprModel) -> Result<()> {
    write_exclusive(path, dump_model(model).as_bytes())
}

pub fn load_gpr(path: &Path) -> Result<GprModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gpr(&text)
}
