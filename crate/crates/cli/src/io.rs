use std::fs;
use std::io::Write;
use std::path::Path;

use semidi_core::qmat::BehaviorFile;

use crate::error::{CliError, CliResult};

/// Create the output directory up front so a bad path fails before any solve.
pub fn prepare_dir(dir: &Path) -> CliResult<()> {
    let fail = |source| CliError::Output { path: dir.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(fail)?;
    let meta = fs::metadata(dir).map_err(fail)?;
    if meta.permissions().readonly() {
        return Err(fail(std::io::Error::new(std::io::ErrorKind::PermissionDenied, "directory is read-only")));
    }
    Ok(())
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let fail = |source| CliError::Output { path: path.to_path_buf(), source };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(fail)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_behavior_file(path: &Path) -> CliResult<BehaviorFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    BehaviorFile::from_json(&text).map_err(|e| CliError::input(path, e))
}
