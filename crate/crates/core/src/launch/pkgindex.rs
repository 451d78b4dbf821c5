// Copyright 2026 The mrctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{LaunchError, Result};

/// Package name → root directory, used by `$(find pkg)`.
///
/// The on-disk form is one `name path` pair per line; `#` starts a comment
/// and relative paths are taken relative to the index file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackageIndex {
    roots: BTreeMap<String, PathBuf>,
}

impl PackageIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, root: impl Into<PathBuf>) {
        self.roots.insert(name.into(), root.into());
    }

    pub fn with(mut self, name: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        self.insert(name, root);
        self
    }

    pub fn find(&self, name: &str) -> Result<&Path> {
        self.roots
            .get(name)
            .map(PathBuf::as_path)
            .ok_or_else(|| LaunchError::UnknownPackage(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Path)> {
        self.roots.iter().map(|(k, v)| (k.as_str(), v.as_path()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let mut idx = PackageIndex::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(name), Some(path), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(format!("line {}: expected `name path`", n + 1));
            };
            let path = Path::new(path);
            idx.insert(name, if path.is_absolute() { path.to_path_buf() } else { base.join(path) });
        }
        Ok(idx)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LaunchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|message| LaunchError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, message),
        })
    }
}
