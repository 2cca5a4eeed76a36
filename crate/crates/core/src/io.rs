//! Text formats shared by the library and the command-line tool.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Decimal scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("path", format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// CSV text with a header row and `\n` line endings.
pub fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = String::with_capacity(64);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for field in row {
            if !first {
                out.push(',');
            }
            out.push_str(&field);
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Reads a two-column CSV `<index>,<value>` with the given header, requiring
/// the indices to be `0, 1, 2, ...` in order.
pub fn read_indexed_csv(reader: impl BufRead, header: &str) -> Result<Vec<f64>> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Config(format!("empty file, expected header `{header}`")))?;
    if first.trim() != header {
        return Err(Error::Config(format!(
            "expected header `{header}`, found `{}`",
            first.trim()
        )));
    }
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = n + 2;
        let (index, value) = line
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected two fields")))?;
        let index: usize = index
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {lineno}: bad index `{index}`")))?;
        if index != values.len() {
            return Err(Error::Config(format!(
                "line {lineno}: index {index} out of order, expected {}",
                values.len()
            )));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {lineno}: bad value `{value}`")))?;
        values.push(value);
    }
    Ok(values)
}

/// `node_index,value` CSV of a grid vector.
pub fn density_csv(values: &[f64]) -> String {
    csv(
        "node_index,value",
        values
            .iter()
            .enumerate()
            .map(|(i, v)| [i.to_string(), fmt_real(*v)]),
    )
}

/// `row,col,value` CSV of a dense matrix.
pub fn matrix_csv(rows: &[Vec<f64>]) -> String {
    csv(
        "row,col,value",
        rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(move |(j, v)| [i.to_string(), j.to_string(), fmt_real(*v)])
        }),
    )
}

/// `key=value` lines.
pub fn key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (key, value) in pairs {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    }
    out
}
