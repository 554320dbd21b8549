use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Plot-ready table.
#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Series {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// What a command produced. `consistent` is `None` for commands without a
/// verdict.
#[derive(Debug)]
pub struct Outcome {
    pub outputs: Value,
    pub series: Option<Series>,
    pub consistent: Option<bool>,
    pub provenance: Vec<&'static str>,
}

impl Outcome {
    pub fn new(outputs: Value) -> Self {
        Outcome {
            outputs,
            series: None,
            consistent: None,
            provenance: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub version: &'static str,
    pub inputs: Value,
    pub outputs: Value,
    pub verdict: &'static str,
    pub provenance: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
    /// SHA-256 over everything except the wall clock and the hash itself.
    pub output_hash: String,
    pub wall_clock_ms: f64,
}

impl Report {
    pub fn new(command: &'static str, inputs: Value, o: Outcome, elapsed: Duration) -> Self {
        let verdict = match o.consistent {
            None => "none",
            Some(true) => "consistent",
            Some(false) => "violated",
        };
        let hashed = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "inputs": inputs,
            "outputs": o.outputs,
            "verdict": verdict,
            "series": o.series,
        });
        let digest = Sha256::digest(serde_json::to_vec(&hashed).expect("serializable"));
        let mut output_hash = String::with_capacity(64);
        for b in digest.iter() {
            write!(output_hash, "{b:02x}").expect("writing to a string");
        }
        Report {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            outputs: o.outputs,
            verdict,
            provenance: o.provenance,
            series: o.series,
            output_hash,
            wall_clock_ms: elapsed.as_secs_f64() * 1e3,
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.verdict == "violated" {
            2
        } else {
            0
        }
    }

    pub fn write(&self, dir: &Path, csv: bool) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{}.json", self.command)), json + "\n")?;
        if csv {
            if let Some(s) = &self.series {
                std::fs::write(dir.join(format!("{}.csv", self.command)), s.to_csv())?;
            }
        }
        Ok(())
    }
}
