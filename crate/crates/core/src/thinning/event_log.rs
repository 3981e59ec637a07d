use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("expected header `time,mark`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    BadRecord { line: u64, message: String },
}

/// Run metadata written next to an event CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub horizon: f64,
    pub proposed: u64,
    pub accepted: u64,
    pub acceptance_ratio: f64,
    pub wall_time_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_hash: Option<String>,
}

impl RunMetadata {
    pub fn new(horizon: f64) -> Self {
        Self {
            seed: None,
            horizon,
            proposed: 0,
            accepted: 0,
            acceptance_ratio: 0.0,
            wall_time_seconds: 0.0,
            spec_hash: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LogError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Accepted event times and marks (1, or 1/2 for bivariate) on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub times: Vec<f64>,
    pub marks: Vec<u8>,
    pub meta: RunMetadata,
}

impl EventLog {
    pub fn empty(horizon: f64) -> Self {
        Self {
            times: Vec::new(),
            marks: Vec::new(),
            meta: RunMetadata::new(horizon),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn events(&self) -> impl Iterator<Item = (f64, u8)> + '_ {
        self.times.iter().copied().zip(self.marks.iter().copied())
    }

    /// Times of one component.
    pub fn times_of(&self, mark: u8) -> Vec<f64> {
        self.events().filter(|&(_, m)| m == mark).map(|(t, _)| t).collect()
    }

    /// Strictly increasing times and marks in `1..=components`.
    pub fn check(&self, components: usize) -> Result<(), String> {
        if self.times.len() != self.marks.len() {
            return Err("times and marks differ in length".into());
        }
        if let Some(w) = self.times.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(format!("times not strictly increasing at {} -> {}", w[0], w[1]));
        }
        if let Some(&t) = self.times.first() {
            if !(t >= 0.0) {
                return Err(format!("negative event time {t}"));
            }
        }
        if let Some(&m) = self.marks.iter().find(|&&m| m == 0 || m as usize > components) {
            return Err(format!("mark {m} outside 1..={components}"));
        }
        Ok(())
    }

    /// `time,mark` CSV with times at 15 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LogError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "mark"])?;
        for (t, m) in self.events() {
            w.write_record([format_sig15(t), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads a `time,mark` CSV; metadata is set to defaults for `horizon`.
    pub fn read_csv<R: Read>(input: R, horizon: f64) -> Result<Self, LogError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.len() != 2 || &header[0] != "time" || &header[1] != "mark" {
            return Err(LogError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
        }
        let mut log = Self::empty(horizon);
        for record in r.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| LogError::BadRecord { line, message };
            let t: f64 = record[0].trim().parse().map_err(|e| bad(format!("time: {e}")))?;
            let m: u8 = record[1].trim().parse().map_err(|e| bad(format!("mark: {e}")))?;
            log.times.push(t);
            log.marks.push(m);
        }
        Ok(log)
    }
}

/// Formats like C's `%.15g`.
pub fn format_sig15(x: f64) -> String {
    const DIGITS: i32 = 15;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
