//! CSV spectrum files.
//!
//! ```text
//! # tool = cavfb 0.1.0
//! # command = heterodyne
//! # config_sha256 = 3f1c...
//! freq_hz,S_I,sigma_S_I
//! 1e6,1.02e0,1e-2
//! ```
//!
//! The first column is always `freq_hz` and must increase strictly. A complex
//! channel `x` occupies two columns `x_re`, `x_im`; an uncertainty column for
//! channel `x` is called `sigma_x`. Numbers are written in Rust's shortest
//! round-trip exponent form, so reading and rewriting a file reproduces it
//! byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use cavfb_core::spectrum::{Channel, ChannelData, Spectrum};
use cavfb_core::units::{hz_to_rad, rad_to_hz};
use num_complex::Complex64;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = concat!("cavfb ", env!("CARGO_PKG_VERSION"));
pub const FREQ_COLUMN: &str = "freq_hz";

/// Ordered `key = value` comment lines at the top of every emitted file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &str, config_sha256: &str) -> Self {
        Metadata {
            entries: vec![
                ("tool".into(), TOOL.into()),
                ("command".into(), command.into()),
                ("config_sha256".into(), config_sha256.into()),
            ],
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.0 == key).map(|e| e.1.as_str())
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    fn write_to(&self, out: &mut String) {
        for (k, v) in &self.entries {
            if v.is_empty() {
                let _ = writeln!(out, "# {k}");
            } else {
                let _ = writeln!(out, "# {k} = {v}");
            }
        }
    }

    fn parse_line(line: &str) -> (String, String) {
        let body = line.trim_start_matches('#');
        let body = body.strip_prefix(' ').unwrap_or(body);
        match body.split_once(" = ") {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => (body.to_string(), String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFile {
    pub metadata: Metadata,
    pub freq_hz: Vec<f64>,
    pub channels: Vec<Channel>,
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

fn parse_num(s: &str, line: usize, col: &str) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| CliError::io(format!("line {line}: column {col}: {s:?} is not a number")))
}

impl SpectrumFile {
    /// Converts a spectrum on an angular grid; the grid is written in Hz.
    pub fn from_spectrum(sp: &Spectrum, metadata: Metadata) -> Self {
        SpectrumFile {
            metadata,
            freq_hz: sp.omega().iter().map(|&w| rad_to_hz(w)).collect(),
            channels: sp.channels().to_vec(),
        }
    }

    /// Same data on the angular grid used by the core library.
    pub fn to_spectrum(&self) -> CliResult<Spectrum> {
        let mut sp = Spectrum::new(self.freq_hz.iter().map(|&f| hz_to_rad(f)).collect())?;
        for c in &self.channels {
            sp.push_channel(c.clone())?;
        }
        Ok(sp)
    }

    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }

    pub fn real(&self, label: &str) -> Option<&[f64]> {
        match &self.channel(label)?.data {
            ChannelData::Real(v) => Some(v),
            ChannelData::Complex(_) => None,
        }
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec![FREQ_COLUMN.to_string()];
        for c in &self.channels {
            match c.data {
                ChannelData::Real(_) => h.push(c.label.clone()),
                ChannelData::Complex(_) => {
                    h.push(format!("{}_re", c.label));
                    h.push(format!("{}_im", c.label));
                }
            }
            if c.sigma.is_some() {
                h.push(format!("sigma_{}", c.label));
            }
        }
        h
    }

    pub fn render(&self, with_metadata: bool) -> CliResult<String> {
        for w in self.channels.windows(2) {
            if w[0].sigma.is_none() && w[1].label == format!("sigma_{}", w[0].label) {
                return Err(CliError::io(format!(
                    "channel {} right after {} would read back as its uncertainty",
                    w[1].label, w[0].label
                )));
            }
        }
        let mut out = String::new();
        if with_metadata {
            self.metadata.write_to(&mut out);
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::io(e.to_string());
        w.write_record(self.header()).map_err(csv_err)?;
        for (i, f) in self.freq_hz.iter().enumerate() {
            let mut row = vec![fmt_num(*f)];
            for c in &self.channels {
                match &c.data {
                    ChannelData::Real(v) => row.push(fmt_num(v[i])),
                    ChannelData::Complex(v) => {
                        row.push(fmt_num(v[i].re));
                        row.push(fmt_num(v[i].im));
                    }
                }
                if let Some(s) = &c.sigma {
                    row.push(fmt_num(s[i]));
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn write(&self, path: &Path, with_metadata: bool) -> CliResult<()> {
        std::fs::write(path, self.render(with_metadata)?)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let table = Table::parse(text)?;
        let cols = &table.columns;
        if cols.first().map(String::as_str) != Some(FREQ_COLUMN) {
            return Err(CliError::io(format!("first column must be {FREQ_COLUMN}")));
        }
        let freq_hz = table.column(0);
        if freq_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::io(format!("{FREQ_COLUMN} must increase strictly")));
        }

        let mut channels: Vec<Channel> = Vec::new();
        let mut j = 1;
        while j < cols.len() {
            let name = &cols[j];
            // sigma_x right after channel x is its uncertainty, anywhere else
            // it is an ordinary channel
            let owner = name
                .strip_prefix("sigma_")
                .and_then(|label| channels.last_mut().filter(|c| c.label == label && c.sigma.is_none()));
            if let Some(ch) = owner {
                ch.sigma = Some(table.column(j));
                j += 1;
                continue;
            }
            let complex_pair = name
                .strip_suffix("_re")
                .filter(|base| cols.get(j + 1).is_some_and(|next| *next == format!("{base}_im")));
            if let Some(base) = complex_pair {
                let re = table.column(j);
                let im = table.column(j + 1);
                channels.push(Channel {
                    label: base.to_string(),
                    data: ChannelData::Complex(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()),
                    sigma: None,
                });
                j += 2;
            } else {
                channels.push(Channel {
                    label: name.clone(),
                    data: ChannelData::Real(table.column(j)),
                    sigma: None,
                });
                j += 1;
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &channels {
            if !seen.insert(c.label.as_str()) {
                return Err(CliError::io(format!("channel {} appears twice", c.label)));
            }
        }
        Ok(SpectrumFile {
            metadata: table.metadata,
            freq_hz,
            channels,
        })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::new(e.kind, format!("{}: {}", path.display(), e.message)))
    }
}

/// Plain numeric table with the same comment and number conventions, used
/// for power-series inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    /// Row-major values.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(metadata: Metadata, columns: &[&str]) -> Self {
        Table {
            metadata,
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn index(&self, name: &str) -> CliResult<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::io(format!("missing column {name}")))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut metadata = Metadata::default();
        for line in text.lines() {
            if line.starts_with('#') {
                let (k, v) = Metadata::parse_line(line);
                metadata.entries.push((k, v));
            } else if !line.trim().is_empty() {
                break;
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::io(e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(CliError::io("missing header row"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::io(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let row = rec
                .iter()
                .zip(&columns)
                .map(|(s, c)| parse_num(s, line, c))
                .collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table {
            metadata,
            columns,
            rows,
        })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::new(e.kind, format!("{}: {}", path.display(), e.message)))
    }

    pub fn render(&self, with_metadata: bool) -> CliResult<String> {
        let mut out = String::new();
        if with_metadata {
            self.metadata.write_to(&mut out);
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::io(e.to_string());
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| fmt_num(*v))).map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn write(&self, path: &Path, with_metadata: bool) -> CliResult<()> {
        std::fs::write(path, self.render(with_metadata)?)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
    }
}

/// `key = value` report, one quantity per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub metadata: Metadata,
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn new(metadata: Metadata) -> Self {
        Report {
            metadata,
            entries: Vec::new(),
        }
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.push((key.into(), fmt_num(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: usize) -> &mut Self {
        self.entries.push((key.into(), v.to_string()));
        self
    }

    pub fn text(&mut self, key: &str, v: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), v.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.0 == key).map(|e| e.1.as_str())
    }

    pub fn render(&self, with_metadata: bool) -> String {
        let mut out = String::new();
        if with_metadata {
            self.metadata.write_to(&mut out);
        }
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, path: &Path, with_metadata: bool) -> CliResult<()> {
        std::fs::write(path, self.render(with_metadata))
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
    }
}
