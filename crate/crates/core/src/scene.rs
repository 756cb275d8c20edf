//! Scene and plan files.
//!
//! Both are JSON with sorted keys and a trailing newline, so that diffs of
//! checked-in fixtures stay readable and repeated writes are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{validate_geometry, BraidGeometry, GeometryDiagnostic, OpAnnotation, Strand};
use crate::optimizer::{MovePlan, PLAN_FORMAT_VERSION};

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub format_version: u32,
    pub strands: Vec<Strand>,
    pub qubit_map: BTreeMap<String, (String, String)>,
    #[serde(default)]
    pub op_annotations: Vec<OpAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl SceneDocument {
    pub fn new(g: &BraidGeometry, provenance: Option<Provenance>) -> Self {
        SceneDocument {
            format_version: SCENE_FORMAT_VERSION,
            strands: g.strands.clone(),
            qubit_map: g.qubit_map.clone(),
            op_annotations: g.op_annotations.clone(),
            provenance,
        }
    }

    pub fn geometry(&self) -> BraidGeometry {
        BraidGeometry {
            strands: self.strands.clone(),
            qubit_map: self.qubit_map.clone(),
            op_annotations: self.op_annotations.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("invalid geometry:\n{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<GeometryDiagnostic>),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_sorted_json<T: Serialize>(value: &T) -> Vec<u8> {
    // serde_json's map type is ordered, so going through Value sorts keys
    let v = serde_json::to_value(value).expect("scene types serialize");
    let mut out = serde_json::to_vec_pretty(&v).expect("value serializes");
    out.push(b'\n');
    out
}

fn from_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, SceneError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SceneError::Schema { path, message: e.into_inner().to_string() }
    })
}

#[derive(Deserialize)]
struct Versioned {
    format_version: u32,
}

fn check_version(bytes: &[u8], expected: u32) -> Result<(), SceneError> {
    if let Ok(v) = serde_json::from_slice::<Versioned>(bytes) {
        if v.format_version != expected {
            return Err(SceneError::Version { found: v.format_version, expected });
        }
    }
    Ok(())
}

pub fn write_scene(g: &BraidGeometry) -> Vec<u8> {
    write_scene_document(&SceneDocument::new(g, None))
}

pub fn write_scene_document(doc: &SceneDocument) -> Vec<u8> {
    to_sorted_json(doc)
}

pub fn read_scene_document(bytes: &[u8]) -> Result<SceneDocument, SceneError> {
    check_version(bytes, SCENE_FORMAT_VERSION)?;
    let doc: SceneDocument = from_json(bytes)?;
    let diags = validate_geometry(&doc.geometry());
    if !diags.is_empty() {
        return Err(SceneError::Invalid(diags));
    }
    Ok(doc)
}

pub fn read_scene(bytes: &[u8]) -> Result<BraidGeometry, SceneError> {
    read_scene_document(bytes).map(|d| d.geometry())
}

pub fn write_plan(p: &MovePlan) -> Vec<u8> {
    to_sorted_json(p)
}

pub fn read_plan(bytes: &[u8]) -> Result<MovePlan, SceneError> {
    check_version(bytes, PLAN_FORMAT_VERSION)?;
    from_json(bytes)
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile_source, CNOT_PP_SOURCE};

    #[test]
    fn empty_round_trip() {
        let g = BraidGeometry::default();
        assert_eq!(read_scene(&write_scene(&g)).unwrap(), g);
    }

    #[test]
    fn cnot_round_trip_is_exact() {
        let g = compile_source(CNOT_PP_SOURCE).unwrap();
        let bytes = write_scene(&g);
        assert_eq!(read_scene(&bytes).unwrap(), g);
        assert_eq!(write_scene(&read_scene(&bytes).unwrap()), bytes);
    }

    #[test]
    fn truncated_is_schema_error() {
        let g = compile_source(CNOT_PP_SOURCE).unwrap();
        let bytes = write_scene(&g);
        let err = read_scene(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(matches!(err, SceneError::Schema { .. }), "{err}");
    }

    #[test]
    fn version_is_checked() {
        let err = read_scene(br#"{"format_version": 7, "strands": [], "qubit_map": {}}"#).unwrap_err();
        assert!(matches!(err, SceneError::Version { found: 7, .. }));
    }

    #[test]
    fn schema_error_names_the_field() {
        let text = br#"{"format_version": 1, "strands": [{"id": "a", "parity": "primal", "path": [[0, 0]], "ends": ["injection", "injection"]}], "qubit_map": {}}"#;
        match read_scene(text).unwrap_err() {
            SceneError::Schema { path, .. } => assert!(path.starts_with("strands[0].path"), "{path}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn keys_are_sorted() {
        let text = String::from_utf8(write_scene(&BraidGeometry::default())).unwrap();
        let f = text.find("format_version").unwrap();
        let q = text.find("qubit_map").unwrap();
        let s = text.find("strands").unwrap();
        assert!(f < q && q < s);
    }
}
