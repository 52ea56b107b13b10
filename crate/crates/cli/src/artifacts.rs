//! Output directory with the config hash stamped into every file.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

pub struct Artifacts {
    root: PathBuf,
    hash: String,
}

impl Artifacts {
    pub fn create(root: &Path, hash: &str) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), hash: hash.to_string() })
    }

    fn open(&self, rel: &str) -> io::Result<BufWriter<fs::File>> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(BufWriter::new(fs::File::create(path)?))
    }

    /// Writes `value` (an object) with a `config_hash` field added.
    pub fn json(&self, rel: &str, mut value: Value) -> io::Result<()> {
        if let Value::Object(map) = &mut value {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
        }
        let mut w = self.open(rel)?;
        serde_json::to_writer_pretty(&mut w, &value)?;
        writeln!(w)?;
        w.flush()
    }

    /// Writes a `# config_hash=...` line followed by `body`.
    pub fn csv(&self, rel: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
        let mut w = self.open(rel)?;
        writeln!(w, "# config_hash={}", self.hash)?;
        body(&mut w)?;
        w.flush()
    }
}

/// Drops leading `# config_hash=` lines so artifact CSVs can be read back.
pub fn strip_hash_lines(text: &str) -> String {
    text.lines().skip_while(|l| l.starts_with("# config_hash=")).collect::<Vec<_>>().join("\n")
}

/// Finite values as numbers, the rest as `null`.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}
