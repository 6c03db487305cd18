use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Builds an in-memory CSV table with LF line endings.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn floats(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&x| f17(x)));
    }

    pub fn finish(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

/// Provenance record written next to file outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: &'static str,
    pub outputs: Vec<PathBuf>,
}

/// SHA-256 of the canonical JSON of the resolved inputs.
pub fn config_hash<T: Serialize>(resolved: &T) -> String {
    let bytes = serde_json::to_vec(resolved).expect("serializable");
    format!("{:x}", Sha256::digest(bytes))
}

/// Outputs of one command. Nothing touches the file system until
/// [`Artifacts::commit`], so a failing command leaves no partial files.
#[derive(Default)]
pub struct Artifacts {
    stdout: String,
    files: Vec<(PathBuf, String)>,
    manifest: Option<(PathBuf, RunManifest)>,
}

impl Artifacts {
    pub fn print(&mut self, text: impl AsRef<str>) {
        self.stdout.push_str(text.as_ref());
    }

    /// Writes `text` to `path` when given, otherwise to stdout.
    pub fn emit(&mut self, path: Option<&Path>, text: String) {
        match path {
            Some(p) => self.files.push((p.to_path_buf(), text)),
            None => self.print(text),
        }
    }

    pub fn file(&mut self, path: PathBuf, text: String) {
        self.files.push((path, text));
    }

    pub fn manifest(&mut self, path: PathBuf, command: &str, config_hash: String, seed: Option<u64>) {
        let outputs = self.files.iter().map(|(p, _)| p.clone()).collect();
        let manifest = RunManifest { command: command.to_string(), config_hash, seed, version: env!("CARGO_PKG_VERSION"), outputs };
        self.manifest = Some((path, manifest));
    }

    pub fn commit(self, out: &mut dyn Write) -> CliResult<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        let manifest = self.manifest.map(|(p, m)| (p, json(&m)));
        for (path, text) in self.files.iter().chain(manifest.iter()) {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io(dir))?;
            }
            fs::write(path, text).map_err(io(path))?;
        }
        out.write_all(self.stdout.as_bytes()).map_err(io(Path::new("<stdout>")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 0.47976447698744, 1e-300, 123456.789, -2.5] {
            let text = f17(x);
            assert_eq!(text.parse::<f64>().unwrap(), x);
            let mantissa = text.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(f17(f64::NAN), "NaN");
    }

    #[test]
    fn table_uses_lf() {
        let mut t = Table::new(&["a", "b"]);
        t.floats(&[1.0, 2.0]);
        let text = t.finish();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash(&[1, 2, 3]), config_hash(&[1, 2, 3]));
        assert_ne!(config_hash(&[1, 2, 3]), config_hash(&[1, 2, 4]));
    }
}
