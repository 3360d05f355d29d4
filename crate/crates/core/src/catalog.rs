// SPDX-License-Identifier: Apache-2.0

//! The bundled spec catalog and directory overrides.

use std::path::{Path, PathBuf};

use crate::spec::{load_spec, parse_spec, Spec, SpecError};

/// Environment variable naming a directory that replaces the bundled
/// catalog.
pub const CATALOG_ENV: &str = "PARAMON_CATALOG";

const BUNDLED: &[(&str, &str)] = &[
    ("ArraysSortBeforeBinarySearch", include_str!("../catalog/ArraysSortBeforeBinarySearch.json")),
    ("LockReleaseBeforeReacquire", include_str!("../catalog/LockReleaseBeforeReacquire.json")),
    ("TOCTOU", include_str!("../catalog/TOCTOU.json")),
    ("TornadoNoAdditionalOutput", include_str!("../catalog/TornadoNoAdditionalOutput.json")),
    ("UnsafeDictIterator", include_str!("../catalog/UnsafeDictIterator.json")),
    ("UnsafeListIterator", include_str!("../catalog/UnsafeListIterator.json")),
    ("UselessFileOpen", include_str!("../catalog/UselessFileOpen.json")),
];

/// `(name, JSON text)` of every bundled spec.
pub fn bundled_sources() -> &'static [(&'static str, &'static str)] {
    BUNDLED
}

pub fn bundled() -> Vec<Spec> {
    BUNDLED
        .iter()
        .map(|(name, text)| parse_spec(text).unwrap_or_else(|e| panic!("bundled spec {name} is invalid: {e}")))
        .collect()
}

/// Loads every `*.json` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Spec>, SpecError> {
    let entries = std::fs::read_dir(dir).map_err(|source| SpecError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_spec(p)).collect()
}

/// The active catalog: the override directory if set, else the bundled one.
pub fn catalog() -> Result<Vec<Spec>, SpecError> {
    match std::env::var_os(CATALOG_ENV) {
        Some(dir) if !dir.is_empty() => load_dir(Path::new(&dir)),
        _ => Ok(bundled()),
    }
}

/// Resolves a spec argument: a file, a directory of specs, or a catalog
/// name.
pub fn resolve(arg: &str) -> Result<Vec<Spec>, SpecError> {
    let path = Path::new(arg);
    if path.is_dir() {
        return load_dir(path);
    }
    if path.is_file() {
        return load_spec(path).map(|s| vec![s]);
    }
    let found: Vec<Spec> = catalog()?.into_iter().filter(|s| s.name == arg).collect();
    if found.is_empty() {
        return Err(SpecError::Io {
            path: arg.to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or catalog spec"),
        });
    }
    Ok(found)
}
