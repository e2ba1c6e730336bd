//! Host-side companion to `polymlp-core`: run configuration, scene and
//! model file formats, training orchestration, evaluation reports, and the
//! `polymlp` command-line tool.

use std::path::Path;

use anyhow::{Context, Result};

pub mod config;
pub mod manifest;
pub mod model_io;
pub mod pipeline;
pub mod report;
pub mod scene_io;
pub mod timing;

/// Writes a file atomically: the content lands under a temporary name in
/// the target directory and is renamed into place, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("create directory {}", dir.display()))?;
    }
    let file_name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?
        .to_string_lossy()
        .into_owned();
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents).with_context(|| format!("write {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| {
        let _ = std::fs::remove_file(&tmp);
        format!("rename {} into {}", tmp.display(), path.display())
    })?;
    Ok(())
}
