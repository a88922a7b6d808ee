//! Named-tensor container.
//!
//! Layout: the magic bytes `AMA1`, the manifest length as a little-endian
//! `u64`, a UTF-8 JSON manifest listing every tensor's name, shape and byte
//! offset (plus free-form string metadata), then the raw little-endian
//! `f32` payload. Tensors are kept sorted by name so that equal contents
//! always serialize to equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{ParamSet, Tensor};

pub const MAGIC: &[u8; 4] = b"AMA1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    meta: BTreeMap<String, String>,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub meta: BTreeMap<String, String>,
    tensors: BTreeMap<String, Tensor>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` not found")))
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("metadata key `{key}` missing")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta_str(key)?;
        raw.parse()
            .map_err(|_| Error::Checkpoint(format!("metadata `{key}` = `{raw}` is not valid")))
    }

    /// Stores every tensor of `params` under `prefix` + its name.
    pub fn put_params<P: ParamSet>(&mut self, prefix: &str, params: &P) {
        for (name, t) in params.named() {
            self.insert(format!("{prefix}{name}"), t.clone());
        }
    }

    /// Fills `params` from tensors stored by [`Container::put_params`];
    /// shapes must match exactly.
    pub fn take_params<P: ParamSet>(&self, prefix: &str, params: &mut P) -> Result<()> {
        for (name, t) in params.named_mut() {
            let key = format!("{prefix}{name}");
            let stored = self.require(&key)?;
            if stored.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{key}` has shape {:?}, expected {:?}",
                    stored.shape(),
                    t.shape()
                )));
            }
            *t = stored.clone();
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0u64;
        let entries = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let e = Entry { name: name.clone(), shape: t.shape().to_vec(), offset };
                offset += 4 * t.len() as u64;
                e
            })
            .collect();
        let manifest = Manifest { meta: self.meta.clone(), tensors: entries };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(12 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.tensors.values() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing AMA1 magic"));
        }
        let len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let json = bytes.get(12..12 + len).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(json)
            .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        let payload = &bytes[12 + len..];
        let mut tensors = BTreeMap::new();
        let mut expected_offset = 0u64;
        for e in manifest.tensors {
            if e.offset != expected_offset {
                return Err(bad("tensor offsets are not contiguous"));
            }
            let n: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let raw = payload
                .get(start..start + 4 * n)
                .ok_or_else(|| Error::Checkpoint(format!("payload truncated at `{}`", e.name)))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(e.shape, data)
                .map_err(|err| Error::Checkpoint(format!("`{}`: {err}", e.name)))?;
            expected_offset += 4 * n as u64;
            if tensors.insert(e.name.clone(), t).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor `{}`", e.name)));
            }
        }
        if expected_offset as usize != payload.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Self { meta: manifest.meta, tensors })
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("ama.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_starts_with_magic_and_manifest() {
        let mut c = Container::new();
        c.insert("w", Tensor::from_vec(vec![1.0, -2.5]));
        c.meta.insert("d_h".into(), "4".into());
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..4], b"AMA1");
        let len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let manifest: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
        assert_eq!(manifest["tensors"][0]["name"], "w");
        assert_eq!(manifest["tensors"][0]["offset"], 0);
        assert_eq!(&bytes[12 + len..12 + len + 4], &1.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let mut c = Container::new();
        c.insert("w", Tensor::from_vec(vec![1.0, 2.0]));
        let bytes = c.to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Container::from_bytes(&extra).is_err());
        assert!(Container::from_bytes(b"AMA2").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            tensors in prop::collection::btree_map(
                "[a-z/_]{1,12}",
                prop::collection::vec(any::<u32>(), 1..40),
                0..6,
            ),
        ) {
            let mut c = Container::new();
            c.meta.insert("seed".into(), "7".into());
            for (name, bits) in &tensors {
                // arbitrary bit patterns, including NaN payloads
                let data = bits.iter().map(|&b| f32::from_bits(b)).collect();
                c.insert(name.clone(), Tensor::from_vec(data));
            }
            let bytes = c.to_bytes();
            let back = Container::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
