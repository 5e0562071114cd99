//! Line-oriented `key: value` run manifest.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub const FILE_NAME: &str = "manifest.txt";

pub fn version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("CHEMOLAB_GIT_DESCRIBE"))
}

pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            entries: vec![
                ("command".into(), command.into()),
                ("version".into(), version()),
                ("created_unix".into(), created.to_string()),
            ],
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        // Values are single-line by construction.
        self.entries.push((key.into(), value.to_string().replace('\n', " ")));
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(dir.join(FILE_NAME))?);
        for (k, v) in &self.entries {
            writeln!(w, "{k}: {v}")?;
        }
        w.flush()
    }
}
