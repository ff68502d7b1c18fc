use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CopError, CopKind, GeneratorParams, Instance};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub seed: Option<u64>,
    pub params: Option<GeneratorParams>,
    /// Where the instances came from when they were not generated.
    pub source: Option<String>,
    /// Per-instance names, used to look up known optima. May be empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub kind: CopKind,
    pub count: usize,
    pub seed: Option<u64>,
    pub params: Option<GeneratorParams>,
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: CopKind,
    pub instances: Vec<Instance>,
    pub metadata: DatasetMetadata,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>, metadata: DatasetMetadata) -> Result<Self, CopError> {
        let kind = instances
            .first()
            .ok_or_else(|| CopError::Dataset("a dataset needs at least one instance".into()))?
            .kind();
        let ds = Dataset {
            kind,
            instances,
            metadata,
        };
        ds.check()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.metadata.names.get(index).map(String::as_str)
    }

    fn check(&self) -> Result<(), CopError> {
        if self.instances.is_empty() {
            return Err(CopError::Dataset("a dataset needs at least one instance".into()));
        }
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.kind() != self.kind {
                return Err(CopError::Dataset(format!(
                    "instance {i} is {} in a {} dataset",
                    inst.kind(),
                    self.kind
                )));
            }
            inst.check()
                .map_err(|e| CopError::Dataset(format!("instance {i}: {e}")))?;
        }
        Ok(())
    }

    /// JSON lines: a header, then one `{"kind", "payload"}` object per
    /// instance. Key order follows the struct definitions, so equal datasets
    /// serialize to equal bytes.
    pub fn to_jsonl(&self) -> Result<String, CopError> {
        let header = DatasetHeader {
            kind: self.kind,
            count: self.instances.len(),
            seed: self.metadata.seed,
            params: self.metadata.params.clone(),
            source: self.metadata.source.clone(),
            names: self.metadata.names.clone(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for inst in &self.instances {
            out.push_str(&serde_json::to_string(inst)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, CopError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: DatasetHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| CopError::Dataset("empty dataset file".into()))?,
        )?;
        let instances = lines
            .map(serde_json::from_str)
            .collect::<Result<Vec<Instance>, _>>()?;
        if instances.len() != header.count {
            return Err(CopError::Dataset(format!(
                "header declares {} instances, found {}",
                header.count,
                instances.len()
            )));
        }
        let ds = Dataset {
            kind: header.kind,
            instances,
            metadata: DatasetMetadata {
                seed: header.seed,
                params: header.params,
                source: header.source,
                names: header.names,
            },
        };
        ds.check()?;
        Ok(ds)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<String, CopError> {
        let text = self.to_jsonl()?;
        fs::write(path, &text)?;
        Ok(content_digest(text.as_bytes()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, CopError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized file.
    pub fn digest(&self) -> Result<String, CopError> {
        Ok(content_digest(self.to_jsonl()?.as_bytes()))
    }
}

pub(crate) fn content_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
