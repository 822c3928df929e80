use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde_json::json;
use wanderode::io::IoError;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Table,
}

/// Where a command's table goes and how it is rendered.
#[derive(Debug, Clone)]
pub struct Sink {
    pub output: Option<PathBuf>,
    pub format: Format,
}

fn create(path: &Path, stage: &'static str) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io {
            stage,
            path: path.display().to_string(),
            source: e,
        })
}

fn table_err(stage: &'static str) -> impl Fn(IoError) -> CliError {
    move |source| CliError::Table { stage, source }
}

/// Render CSV text as right-aligned columns.
pub fn align(csv_text: &str) -> String {
    let rows: Vec<Vec<&str>> = csv_text.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut width = vec![0usize; cols];
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&width)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

impl Sink {
    /// Write a table through `write` and report `summary`: to the file and
    /// stdout when an output path is set, otherwise to stdout as CSV (with
    /// the summary on stderr) or as an aligned table followed by the summary.
    pub fn deliver<F>(&self, stage: &'static str, summary: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), IoError>,
    {
        match (&self.output, self.format) {
            (Some(path), _) => {
                self.to_file(path, stage, write)?;
                println!("{summary}");
            }
            (None, Format::Csv) => {
                let stdout = io::stdout();
                let mut w = BufWriter::new(stdout.lock());
                write(&mut w).map_err(table_err(stage))?;
                w.flush().map_err(|e| CliError::Io {
                    stage,
                    path: "<stdout>".into(),
                    source: e,
                })?;
                eprintln!("{summary}");
            }
            (None, Format::Table) => {
                let mut buf = Vec::new();
                write(&mut buf).map_err(table_err(stage))?;
                print!("{}", align(&String::from_utf8_lossy(&buf)));
                println!("{summary}");
            }
        }
        Ok(())
    }

    pub fn to_file<F>(&self, path: &Path, stage: &'static str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), IoError>,
    {
        let mut w = create(path, stage)?;
        write(&mut w).map_err(table_err(stage))?;
        w.flush().map_err(|e| CliError::Io {
            stage,
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// `<output>.manifest.json` for a run.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub struct Manifest {
    started: Instant,
    started_unix_ms: u128,
}

impl Manifest {
    pub fn start() -> Self {
        Self {
            started: Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn write(
        &self,
        output: &Path,
        command: &str,
        seed: Option<i64>,
        config: serde_json::Value,
        outputs: &[PathBuf],
        summary: serde_json::Value,
    ) -> Result<(), CliError> {
        let doc = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": config,
            "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "summary": summary,
            "started_unix_ms": self.started_unix_ms as u64,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        let path = manifest_path(output);
        let text = serde_json::to_string_pretty(&doc).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io {
            stage: "writing manifest",
            path: path.display().to_string(),
            source: e,
        })
    }
}
