//! Number formatting and file output shared by the subcommands.

use std::io::Write;
use std::path::Path;

/// Scientific notation with 17 significant digits.
pub fn csv_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `text` to a temporary file beside `path`, then rename it into place.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `field,value` lines under a header row.
pub fn key_value_csv(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("field,value\n");
    for (k, v) in pairs {
        out.push_str(k);
        out.push(',');
        out.push_str(v);
        out.push('\n');
    }
    out
}
