use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Shortest `%.9g`-style rendering: 9 significant digits, trailing zeros
/// removed, exponent form outside `[1e-4, 1e9)`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A CSV document with a header row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// A value destined for a CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Shape {
                expected: self.header.len(),
                actual: row.len(),
            });
        }
        self.rows.push(row.iter().map(Cell::render).collect());
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// `key = value` lines with `#` comments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("config line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::config(format!("config line {}: empty key", lineno + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::config(format!(
                    "config line {}: duplicate key {k:?}",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(format!("config key {key:?}: cannot parse {v:?}"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::config(format!("unknown config key {k:?}"))),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        self.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Metrics of one sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub erasure_rate: f64,
    pub accuracy: f64,
    pub mse: f64,
    pub spectral_efficiency: f64,
}

pub const SWEEP_HEADER: [&str; 6] = [
    "snr_db",
    "ber",
    "erasure_rate",
    "accuracy",
    "mse",
    "spectral_efficiency",
];

/// Everything one invocation produced. Timestamps are kept apart from the
/// metrics so the CSV stays reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub config: ConfigFile,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
    pub started_unix: Option<u64>,
    pub finished_unix: Option<u64>,
}

impl RunRecord {
    pub fn new(config: ConfigFile, seed: u64) -> Self {
        Self {
            config,
            seed,
            points: Vec::new(),
            started_unix: None,
            finished_unix: None,
        }
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&SWEEP_HEADER);
        for p in &self.points {
            t.push(vec![
                p.snr_db.into(),
                p.ber.into(),
                p.erasure_rate.into(),
                p.accuracy.into(),
                p.mse.into(),
                p.spectral_efficiency.into(),
            ])
            .expect("row matches header");
        }
        t
    }

    /// Config snapshot, seed and timestamps as `key = value` text.
    pub fn metadata(&self) -> String {
        let mut meta = self.config.clone();
        meta.insert("seed", self.seed.to_string());
        if let Some(t) = self.started_unix {
            meta.insert("started_unix", t.to_string());
        }
        if let Some(t) = self.finished_unix {
            meta.insert("finished_unix", t.to_string());
        }
        meta.to_text()
    }
}
