//! On-disk formats: binary timestamp files, raw bit files with key=value
//! sidecars, histogram CSV and key=value reports.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::entropy::BinningConfig;
use crate::error::{Error, Result};
use crate::estimator::G2Histogram;
use crate::extractor::ExtractionResult;
use crate::stream::{Origin, TimestampStream};

pub const TIMESTAMP_MAGIC: &[u8; 8] = b"NVQTS001";
const HEADER_LEN: usize = 16;

/// `<path>.meta`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, data: &[u8]) -> Result<()> {
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

/// Ordered `key=value` lines; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn require<T: FromStr>(&self, kind: &'static str, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::format(kind, format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|e| Error::format(kind, format!("bad value `{raw}` for `{key}`: {e}")))
    }

    /// Parses the text, reporting the 1-based line of the first malformed entry.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config {
                    location: format!("{source}:{}", i + 1),
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config {
                    location: format!("{source}:{}", i + 1),
                    message: "empty key".into(),
                });
            }
            entries.push((k.to_owned(), v.trim().to_owned()));
        }
        Ok(Self { entries })
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub fn encode_timestamps(timestamps: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * timestamps.len());
    out.extend_from_slice(TIMESTAMP_MAGIC);
    out.extend_from_slice(&(timestamps.len() as u64).to_le_bytes());
    for t in timestamps {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

pub fn decode_timestamps(data: &[u8]) -> Result<Vec<u64>> {
    const KIND: &str = "timestamp";
    if data.len() < HEADER_LEN || &data[..8] != TIMESTAMP_MAGIC {
        return Err(Error::format(KIND, "missing NVQTS001 header"));
    }
    let count = u64::from_le_bytes(data[8..16].try_into().expect("8 bytes"));
    let body = &data[HEADER_LEN..];
    if !body.len().is_multiple_of(8) || (body.len() / 8) as u64 != count {
        return Err(Error::format(
            KIND,
            format!("header declares {count} records but body holds {} bytes", body.len()),
        ));
    }
    let ts: Vec<u64> = body
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(i) = ts.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::format(
            KIND,
            format!("record {} ({}) does not follow record {} ({})", i + 1, ts[i + 1], i, ts[i]),
        ));
    }
    Ok(ts)
}

/// Writes the timestamp file and its `.meta` sidecar (duration and origin).
pub fn write_timestamps(path: &Path, stream: &TimestampStream) -> Result<()> {
    if !stream.is_strictly_increasing() {
        return Err(Error::format("timestamp", "file records must be strictly increasing"));
    }
    write(path, &encode_timestamps(stream.timestamps()))?;
    let mut meta = KeyValues::new();
    meta.push("records", stream.len())
        .push("duration_ps", stream.duration_ps())
        .push("origin", stream.origin().as_str());
    write(&sidecar_path(path), meta.render().as_bytes())
}

/// Reads a timestamp file. Without a sidecar the duration is taken as the
/// last timestamp.
pub fn read_timestamps(path: &Path) -> Result<TimestampStream> {
    let ts = decode_timestamps(&read(path)?)?;
    let meta_path = sidecar_path(path);
    let (duration, origin) = if meta_path.exists() {
        let meta = KeyValues::parse(&read_text(&meta_path)?, &meta_path.display().to_string())?;
        (
            meta.require::<u64>("timestamp sidecar", "duration_ps")?,
            meta.require::<Origin>("timestamp sidecar", "origin")?,
        )
    } else {
        (ts.last().copied().unwrap_or(0), Origin::Merged)
    };
    TimestampStream::new(ts, duration, origin)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitFileMeta {
    pub photons_used: u64,
    pub photons_discarded_same_period: u64,
    pub duration_ps: u64,
    pub period_ps: u64,
    pub n_bins: u32,
    pub bits_per_symbol: u32,
    pub trailing_bits_dropped: u32,
    pub config_hash: String,
}

impl BitFileMeta {
    pub fn new(result: &ExtractionResult, cfg: &BinningConfig, config_hash: &str) -> Self {
        Self {
            photons_used: result.photons_used,
            photons_discarded_same_period: result.photons_discarded_same_period,
            duration_ps: result.elapsed_ps,
            period_ps: cfg.period_ps(),
            n_bins: cfg.n_bins(),
            bits_per_symbol: result.bits_per_symbol,
            trailing_bits_dropped: result.trailing_bits_dropped,
            config_hash: config_hash.to_owned(),
        }
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("photons_used", self.photons_used)
            .push("photons_discarded_same_period", self.photons_discarded_same_period)
            .push("duration_ps", self.duration_ps)
            .push("period_ps", self.period_ps)
            .push("n_bins", self.n_bins)
            .push("bits_per_symbol", self.bits_per_symbol)
            .push("trailing_bits_dropped", self.trailing_bits_dropped)
            .push("config_hash", &self.config_hash);
        kv
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        const KIND: &str = "bit sidecar";
        Ok(Self {
            photons_used: kv.require(KIND, "photons_used")?,
            photons_discarded_same_period: kv.require(KIND, "photons_discarded_same_period")?,
            duration_ps: kv.require(KIND, "duration_ps")?,
            period_ps: kv.require(KIND, "period_ps")?,
            n_bins: kv.require(KIND, "n_bins")?,
            bits_per_symbol: kv.require(KIND, "bits_per_symbol")?,
            trailing_bits_dropped: kv.require(KIND, "trailing_bits_dropped")?,
            config_hash: kv.require(KIND, "config_hash")?,
        })
    }
}

/// Raw bytes with no header, plus a `.meta` sidecar.
pub fn write_bits(path: &Path, bytes: &[u8], meta: &BitFileMeta) -> Result<()> {
    write(path, bytes)?;
    write(&sidecar_path(path), meta.to_key_values().render().as_bytes())
}

pub fn read_bits(path: &Path) -> Result<Vec<u8>> {
    read(path)
}

pub fn read_bit_meta(path: &Path) -> Result<BitFileMeta> {
    let meta_path = sidecar_path(path);
    let kv = KeyValues::parse(&read_text(&meta_path)?, &meta_path.display().to_string())?;
    BitFileMeta::from_key_values(&kv)
}

const HISTOGRAM_COLUMNS: &str = "tau_ns,g2,raw_count";

pub fn histogram_to_csv(h: &G2Histogram) -> String {
    let mut out = format!(
        "# window_ns={}\n# total_time_s={}\n# counts_det0={}\n# counts_det1={}\n{HISTOGRAM_COLUMNS}\n",
        h.window_ns, h.total_time_s, h.counts_det0, h.counts_det1
    );
    for ((t, g), c) in h.tau_centers.iter().zip(&h.g2_values).zip(&h.raw_coincidences) {
        out.push_str(&format!("{t},{g},{c}\n"));
    }
    out
}

pub fn histogram_from_csv(text: &str) -> Result<G2Histogram> {
    const KIND: &str = "histogram";
    let mut header = KeyValues::new();
    let mut tau_centers = Vec::new();
    let mut g2_values = Vec::new();
    let mut raw_coincidences = Vec::new();
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                header.push(k.trim(), v.trim());
            }
            continue;
        }
        if !seen_columns {
            if line != HISTOGRAM_COLUMNS {
                return Err(Error::format(KIND, format!("line {}: expected `{HISTOGRAM_COLUMNS}`", i + 1)));
            }
            seen_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Error::format(KIND, format!("line {}: expected three numeric fields", i + 1));
        if fields.len() != 3 {
            return Err(bad());
        }
        tau_centers.push(fields[0].parse::<f64>().map_err(|_| bad())?);
        g2_values.push(fields[1].parse::<f64>().map_err(|_| bad())?);
        raw_coincidences.push(fields[2].parse::<u64>().map_err(|_| bad())?);
    }
    Ok(G2Histogram {
        tau_centers,
        g2_values,
        raw_coincidences,
        window_ns: header.require(KIND, "window_ns")?,
        total_time_s: header.require(KIND, "total_time_s")?,
        counts_det0: header.require(KIND, "counts_det0")?,
        counts_det1: header.require(KIND, "counts_det1")?,
    })
}

pub fn write_histogram(path: &Path, h: &G2Histogram) -> Result<()> {
    write(path, histogram_to_csv(h).as_bytes())
}

pub fn read_histogram(path: &Path) -> Result<G2Histogram> {
    histogram_from_csv(&read_text(path)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text.as_bytes())
}

pub fn read_key_values(path: &Path) -> Result<KeyValues> {
    KeyValues::parse(&read_text(path)?, &path.display().to_string())
}
