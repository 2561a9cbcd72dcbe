//! CSV and RTF serialization of analysis outputs.
//!
//! CSV files are UTF-8 with a header row and `.` decimals. Floats are
//! printed with Rust's shortest round-trip formatting.

use std::fmt::Write as _;

use super::{Rdm, SimilarityCurve, VariabilityMatrix};
use crate::data::rtf::NamedTensor;

/// `subject,model,layer,timepoint_ms,rho`
pub fn curves_csv(curves: &[SimilarityCurve]) -> String {
    let mut out = String::from("subject,model,layer,timepoint_ms,rho\n");
    for c in curves {
        for (t, r) in c.timepoints_ms.iter().zip(&c.rho) {
            writeln!(out, "{},{},{},{t},{r}", c.subject, c.model, c.layer).unwrap();
        }
    }
    out
}

/// `tag,row,col,value`, plus a trailing `index` row per matrix.
pub fn variability_csv(matrices: &[VariabilityMatrix]) -> String {
    let mut out = String::from("tag,row,col,value\n");
    for m in matrices {
        for i in 0..m.size() {
            for j in 0..m.size() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    m.tag,
                    m.labels[i],
                    m.labels[j],
                    m.get(i, j)
                )
                .unwrap();
            }
        }
        writeln!(out, "{},index,index,{}", m.tag, m.index).unwrap();
    }
    out
}

/// One f64 record per RDM, named `source/subject/tag`.
pub fn rdm_records(rdms: &[Rdm]) -> Vec<NamedTensor> {
    rdms.iter()
        .map(|r| {
            let p = &r.provenance;
            let name = format!(
                "{}/{}/{}",
                p.source.as_str(),
                p.subject.as_deref().unwrap_or("-"),
                p.tag
            );
            NamedTensor::f64(name, r.to_tensor())
        })
        .collect()
}
