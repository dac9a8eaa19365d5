//! World files: one TOML document per household world or crafting task.
//!
//! The schema is described in `docs/world-files.md`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use stateact_core::household::{generate_world, TaskKind, WorldError, WorldSpec};
use stateact_core::textcraft::{generate_task, CraftTask, RecipeBook, TaskError};

#[derive(Debug, thiserror::Error)]
pub enum WorldFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: WorldError },
    #[error("{path}: task item {item:?} is not in the recipe book")]
    UnknownItem { path: PathBuf, item: String },
    #[error("cannot serialize world: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Task(#[from] TaskError),
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<T, WorldFileError> {
    let text = fs::read_to_string(path).map_err(|source| WorldFileError::Io { path: path.into(), source })?;
    toml::from_str(&text).map_err(|source| WorldFileError::Parse { path: path.into(), source })
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String, WorldFileError> {
    Ok(toml::to_string(value)?)
}

pub fn load_household(path: &Path) -> Result<WorldSpec, WorldFileError> {
    let spec: WorldSpec = read(path)?;
    spec.validate().map_err(|source| WorldFileError::Invalid { path: path.into(), source })?;
    Ok(spec)
}

pub fn load_textcraft(path: &Path, book: &RecipeBook) -> Result<CraftTask, WorldFileError> {
    let task: CraftTask = read(path)?;
    if !book.is_known(&task.item) {
        return Err(WorldFileError::UnknownItem { path: path.into(), item: task.item });
    }
    Ok(task)
}

/// `*.toml` files of a directory in name order.
pub fn world_paths(dir: &Path) -> Result<Vec<PathBuf>, WorldFileError> {
    let io = |source| WorldFileError::Io { path: dir.into(), source };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn load_household_dir(dir: &Path) -> Result<Vec<WorldSpec>, WorldFileError> {
    world_paths(dir)?.iter().map(|p| load_household(p)).collect()
}

pub fn load_textcraft_dir(dir: &Path, book: &RecipeBook) -> Result<Vec<CraftTask>, WorldFileError> {
    world_paths(dir)?.iter().map(|p| load_textcraft(p, book)).collect()
}

/// `count` household worlds cycling through the task kinds, seeds from `seed`.
pub fn gen_household(count: usize, seed: u64) -> Vec<WorldSpec> {
    (0..count).map(|i| generate_world(seed + i as u64, TaskKind::ALL[i % TaskKind::ALL.len()])).collect()
}

/// `count` crafting tasks cycling through depths 2, 3 and 4.
pub fn gen_textcraft(book: &RecipeBook, count: usize, seed: u64) -> Result<Vec<CraftTask>, WorldFileError> {
    (0..count).map(|i| Ok(generate_task(book, 2 + (i % 3) as u32, seed + i as u64)?)).collect()
}

/// Writes `<id>.toml` for each item and returns the paths written.
pub fn write_all<T: Serialize>(
    dir: &Path,
    items: &[T],
    id: impl Fn(&T) -> &str,
) -> Result<Vec<PathBuf>, WorldFileError> {
    fs::create_dir_all(dir).map_err(|source| WorldFileError::Io { path: dir.into(), source })?;
    let mut out = Vec::new();
    for item in items {
        let path = dir.join(format!("{}.toml", id(item)));
        fs::write(&path, to_toml(item)?).map_err(|source| WorldFileError::Io { path: path.clone(), source })?;
        out.push(path);
    }
    Ok(out)
}
