//! CSV emitters. Reals are written with 17 significant digits and rows end
//! in a bare LF.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects CSV rows in memory so output files are written in one piece.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<[u8]>>(header: I) -> CliResult<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row<I: IntoIterator<Item = S>, S: AsRef<[u8]>>(&mut self, fields: I) -> CliResult<()> {
        Ok(self.writer.write_record(fields)?)
    }

    pub fn into_string(self) -> CliResult<String> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Input(format!("csv buffer: {}", e.error())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// `dir/stem<suffix>.ext` for `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_keep_seventeen_digits() {
        let x = 0.1 + 0.2;
        let s = real(x);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn rows_end_in_lf() {
        let mut t = Table::new(["a", "b"]).unwrap();
        t.row(["1", "x,y"]).unwrap();
        assert_eq!(t.into_string().unwrap(), "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/run.csv"), "_summary", "csv"), PathBuf::from("out/run_summary.csv"));
        assert_eq!(sibling(Path::new("run.csv"), "", "json"), PathBuf::from("run.json"));
    }
}
