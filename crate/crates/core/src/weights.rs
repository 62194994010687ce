//! Named tensor bundles stored as a directory of text tensors plus a manifest.
//!
//! Layout:
//!
//! ```text
//! <dir>/manifest.txt      # `key value` metadata lines, then `tensor <name>` lines
//! <dir>/<name>.tensor     # one tensor in the debug text format
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MANIFEST: &str = "manifest.txt";

/// Seed used by the `seeded` constructors of the weight types.
pub const DEFAULT_WEIGHT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl WeightBundle {
    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse {
                location: MANIFEST.into(),
                message: format!("missing key `{key}`"),
            })
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse().map_err(|_| Error::Parse {
            location: MANIFEST.into(),
            message: format!("bad value {raw:?} for `{key}`"),
        })
    }

    /// Removes and returns the named tensor.
    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        let pos = self
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Parse {
                location: MANIFEST.into(),
                message: format!("missing tensor `{name}`"),
            })?;
        Ok(self.tensors.remove(pos).1)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::new();
        for (k, v) in &self.meta {
            manifest.push_str(&format!("{k} {v}\n"));
        }
        for (name, tensor) in &self.tensors {
            manifest.push_str(&format!("tensor {name}\n"));
            let path = dir.join(format!("{name}.tensor"));
            fs::write(&path, tensor.to_text()).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(MANIFEST);
        fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut bundle = WeightBundle::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(' ').ok_or_else(|| Error::Parse {
                location: format!("{}:{}", path.display(), lineno + 1),
                message: format!("expected `key value`, got {line:?}"),
            })?;
            if key == "tensor" {
                let tpath = dir.join(format!("{value}.tensor"));
                let body = fs::read_to_string(&tpath).map_err(|e| Error::io(&tpath, e))?;
                bundle.push(value, Tensor::from_text(&body)?);
            } else {
                bundle.meta.push((key.to_string(), value.to_string()));
            }
        }
        Ok(bundle)
    }
}

/// Deterministic Gaussian initializer with standard deviation `1/sqrt(fan_in)`.
pub(crate) struct SeededInit {
    rng: ChaCha8Rng,
}

impl SeededInit {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn tensor(&mut self, shape: &[usize], fan_in: usize) -> Tensor {
        let std = 1.0 / (fan_in.max(1) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        Tensor::from_fn(shape, |_| normal.sample(&mut self.rng))
    }
}
