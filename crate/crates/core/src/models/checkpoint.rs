//! Checkpoints are a directory holding `model.rtf` (f64 parameter tensors)
//! and `model.index` (plain text):
//!
//! ```text
//! input=3,32,32
//! widths=16,32,64,128
//! recurrences=1,2,4,2
//! expansion=2
//! classes=16
//! eeg_dim=340
//! param V1.conv1.weight 16x3x3x3 V1
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::rtf::{self, NamedTensor};
use crate::error::{Error, Result};

use super::{AlignedModel, BackboneSpec, ParamSet};

pub const CHECKPOINT_TENSORS: &str = "model.rtf";
pub const CHECKPOINT_INDEX: &str = "model.index";

fn join(xs: &[usize], sep: &str) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

fn index_lines(out: &mut String, params: &ParamSet) {
    for ((name, group), t) in params
        .names()
        .iter()
        .zip(params.groups())
        .zip(params.values())
    {
        writeln!(out, "param {name} {} {group}", join(t.shape(), "x")).unwrap();
    }
}

pub fn save_checkpoint(model: &AlignedModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let spec = model.spec();
    let mut index = String::new();
    writeln!(index, "input={}", join(&spec.input, ",")).unwrap();
    writeln!(index, "widths={}", join(&spec.widths, ",")).unwrap();
    writeln!(index, "recurrences={}", join(&spec.recurrences, ",")).unwrap();
    writeln!(index, "expansion={}", spec.expansion).unwrap();
    writeln!(index, "classes={}", spec.classes).unwrap();
    writeln!(index, "eeg_dim={}", model.head.eeg_dim()).unwrap();
    index_lines(&mut index, model.backbone.params());
    index_lines(&mut index, model.head.params());

    let records: Vec<NamedTensor> = [model.backbone.params(), model.head.params()]
        .into_iter()
        .flat_map(|p| p.names().iter().zip(p.values()))
        .map(|(n, t)| NamedTensor::f64(n.clone(), t.clone()))
        .collect();
    rtf::write(dir.join(CHECKPOINT_TENSORS), &records)?;
    fs::write(dir.join(CHECKPOINT_INDEX), index)?;
    Ok(())
}

fn parse_list<const N: usize>(key: &str, v: &str) -> Result<[usize; N]> {
    let parts: Vec<usize> = v
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("checkpoint index: bad {key} '{v}': {e}")))?;
    parts.try_into().map_err(|_| {
        Error::Data(format!(
            "checkpoint index: {key} needs {N} values, got '{v}'"
        ))
    })
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<AlignedModel> {
    let dir = dir.as_ref();
    let index = fs::read_to_string(dir.join(CHECKPOINT_INDEX))?;
    let mut spec = BackboneSpec::default();
    let mut eeg_dim = None;
    for line in index.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let scalar = || {
            value
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Data(format!("checkpoint index: bad {key} '{value}': {e}")))
        };
        match key.trim() {
            "input" => spec.input = parse_list(key, value)?,
            "widths" => spec.widths = parse_list(key, value)?,
            "recurrences" => spec.recurrences = parse_list(key, value)?,
            "expansion" => spec.expansion = scalar()?,
            "classes" => spec.classes = scalar()?,
            "eeg_dim" => eeg_dim = Some(scalar()?),
            _ => {}
        }
    }
    let eeg_dim = eeg_dim.ok_or_else(|| Error::Data("checkpoint index lacks eeg_dim".into()))?;
    let mut model = AlignedModel::new(spec, eeg_dim, 0)?;
    let records = rtf::read(dir.join(CHECKPOINT_TENSORS))?;
    let lookup = |name: &str| rtf::find(&records, name).ok().cloned();
    model.backbone.params_mut().load(lookup)?;
    model.head.params_mut().load(lookup)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BackboneSpec;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = BackboneSpec::default();
        spec.recurrences = [1, 1, 3, 1];
        let m = AlignedModel::new(spec, 50, 42).unwrap();
        save_checkpoint(&m, dir.path()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.spec(), m.spec());
        assert_eq!(back.backbone.params(), m.backbone.params());
        assert_eq!(back.head.params(), m.head.params());
        let index = fs::read_to_string(dir.path().join(CHECKPOINT_INDEX)).unwrap();
        assert!(index.contains("param V1.conv1.weight 16x3x3x3 V1"));
    }

    #[test]
    fn missing_tensor_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = AlignedModel::new(BackboneSpec::default(), 20, 1).unwrap();
        save_checkpoint(&m, dir.path()).unwrap();
        rtf::write(dir.path().join(CHECKPOINT_TENSORS), &[]).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Data(_))));
    }
}
