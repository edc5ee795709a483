use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Classification, DiffError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub category: Classification,
    pub signature: String,
    /// Copy of the first program that exhibited the defect.
    pub reproducer_path: PathBuf,
    /// Seconds since campaign start.
    pub discovered_at: f64,
    pub program_id: u64,
    /// Programs that exhibited the defect, first one included.
    pub count: u64,
}

/// Unique defects keyed by signature. When a directory is configured, the
/// first reproducer of each defect is copied to `<dir>/<key>/`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DefectRegistry {
    #[serde(skip)]
    dir: Option<PathBuf>,
    records: Vec<DefectRecord>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// Directory name for a signature: a short hash, stable across runs.
pub fn signature_key(signature: &str) -> String {
    let digest = Sha256::digest(signature.as_bytes());
    hex::encode(&digest[..8])
}

impl DefectRegistry {
    pub fn in_memory() -> Self {
        DefectRegistry::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        DefectRegistry {
            dir: Some(dir.into()),
            ..Default::default()
        }
    }

    /// Registers one defective program. Returns whether the signature was
    /// new.
    pub fn record(
        &mut self,
        category: Classification,
        signature: &str,
        program: &Path,
        program_id: u64,
        t: f64,
    ) -> Result<bool, DiffError> {
        if let Some(&i) = self.index.get(signature) {
            self.records[i].count += 1;
            return Ok(false);
        }
        let reproducer_path = match &self.dir {
            Some(dir) => {
                let target = dir.join(signature_key(signature));
                fs::create_dir_all(&target)?;
                let name = program
                    .file_name()
                    .map_or_else(|| "program.kt".into(), |n| n.to_owned());
                let dest = target.join(name);
                fs::copy(program, &dest)?;
                fs::write(target.join("signature.txt"), format!("{signature}\n"))?;
                dest
            }
            None => program.to_path_buf(),
        };
        self.index.insert(signature.to_string(), self.records.len());
        self.records.push(DefectRecord {
            category,
            signature: signature.to_string(),
            reproducer_path,
            discovered_at: t,
            program_id,
            count: 1,
        });
        Ok(true)
    }

    pub fn records(&self) -> &[DefectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, signature: &str) -> bool {
        self.index.contains_key(signature)
    }

    pub fn per_category(&self) -> BTreeMap<Classification, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.category).or_insert(0) += 1;
        }
        out
    }

    /// `(t, unique defects found by t)` at each discovery, time-ordered.
    pub fn timeline(&self) -> Vec<(f64, u64)> {
        let mut times: Vec<f64> = self.records.iter().map(|r| r.discovered_at).collect();
        times.sort_by(f64::total_cmp);
        times.into_iter().zip(1..).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }

    pub fn save(&self, path: &Path) -> Result<(), DiffError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DiffError> {
        let text = fs::read_to_string(path)?;
        let records: Vec<DefectRecord> =
            serde_json::from_str(&text).map_err(|e| DiffError::Io(std::io::Error::other(e)))?;
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.signature.clone(), i))
            .collect();
        Ok(DefectRegistry {
            dir: None,
            records,
            index,
        })
    }
}
