use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ManifestError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female = 0,
    Male = 1,
}

impl Gender {
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(Gender::Female),
            1 => Some(Gender::Male),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Resolved against the manifest's directory when relative.
    pub image_path: PathBuf,
    pub label: Gender,
    pub subject_id: Option<String>,
}

/// Reads a CSV manifest with header `image_path,label[,subject_id]`.
/// Line numbers in errors are 1-based and count the header.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(ManifestError::Missing(path.to_path_buf()).into());
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(format!("open {}", path.display()), std::io::Error::other(e)))?;

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ManifestError::Malformed { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let with_subject = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["image_path", "label"] => false,
        ["image_path", "label", "subject_id"] => true,
        _ => return Err(ManifestError::BadHeader { found: header }.into()),
    };
    let width = if with_subject { 3 } else { 2 };

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| ManifestError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != width {
            return Err(ManifestError::Malformed {
                line,
                message: format!("expected {width} fields, found {}", row.len()),
            }
            .into());
        }
        let raw_path = &row[0];
        if raw_path.is_empty() {
            return Err(ManifestError::Malformed { line, message: "empty image_path".into() }.into());
        }
        let label = match &row[1] {
            "0" => Gender::Female,
            "1" => Gender::Male,
            other => return Err(ManifestError::BadLabel { line, value: other.to_string() }.into()),
        };
        let subject_id = with_subject.then(|| row[2].to_string()).filter(|s| !s.is_empty());
        let p = Path::new(raw_path);
        let image_path = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        records.push(ManifestRecord { image_path, label, subject_id });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("manifest.csv");
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "image_path,label\na.png,0\nsub/b.jpg,1\n");
        let recs = load_manifest(&p).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].label, Gender::Female);
        assert_eq!(recs[1].image_path, dir.path().join("sub/b.jpg"));
        assert_eq!(recs[1].subject_id, None);
    }

    #[test]
    fn subject_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "image_path,label,subject_id\na.png,1,s001\n");
        assert_eq!(load_manifest(&p).unwrap()[0].subject_id.as_deref(), Some("s001"));
    }

    #[test]
    fn bad_label_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "image_path,label\na,0\nb,1\nc,0\nd,2\n");
        match load_manifest(&p) {
            Err(Error::Manifest(ManifestError::BadLabel { line, value })) => {
                assert_eq!((line, value.as_str()), (5, "2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_manifest(dir.path().join("nope.csv")),
            Err(Error::Manifest(ManifestError::Missing(_)))
        ));
        let p = write(dir.path(), "path,gender\na,0\n");
        assert!(matches!(load_manifest(&p), Err(Error::Manifest(ManifestError::BadHeader { .. }))));
        let p = write(dir.path(), "image_path,label\na,0,extra\n");
        assert!(matches!(
            load_manifest(&p),
            Err(Error::Manifest(ManifestError::Malformed { line: 2, .. }))
        ));
    }
}
