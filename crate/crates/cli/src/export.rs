//! Writes a sequence as numbered image files (000001.png, ...) so external
//! tools can assemble a video.

use std::fs;
use std::path::{Path, PathBuf};

use reseq_core::frameset::FrameCollection;
use reseq_core::graphseq::SequenceResult;

use crate::failure::{CliResult, Failure};

/// Copies (or symlinks) the source image of every frame in `seq.order`.
/// Returns the written paths.
pub fn export_frames(seq: &SequenceResult, frames: &FrameCollection, dir: &Path, symlink: bool) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(seq.order.len());
    for (i, id) in seq.order.iter().enumerate() {
        let src = frames
            .get(id)
            .and_then(|f| f.source_path.as_ref())
            .ok_or_else(|| Failure::contract(format!("frame {id:?} has no source image to export")))?;
        let ext = src.extension().and_then(|e| e.to_str()).unwrap_or("png").to_ascii_lowercase();
        let dest = dir.join(format!("{:06}.{ext}", i + 1));
        if dest.symlink_metadata().is_ok() {
            fs::remove_file(&dest)?;
        }
        if symlink {
            link(&fs::canonicalize(src)?, &dest)?;
        } else {
            fs::copy(src, &dest)?;
        }
        written.push(dest);
    }
    Ok(written)
}

#[cfg(unix)]
fn link(src: &Path, dest: &Path) -> std::io::Result<()> {
    std::os::unix::fs::symlink(src, dest)
}

#[cfg(not(unix))]
fn link(src: &Path, dest: &Path) -> std::io::Result<()> {
    fs::copy(src, dest).map(|_| ())
}
