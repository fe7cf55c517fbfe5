//! Per-update metrics as CSV with a fixed header.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rl::SegmentReport;

/// Column order of the metrics file.
pub const HEADER: [&str; 11] = [
    "frames",
    "segment",
    "mean_return",
    "loss_policy",
    "loss_value",
    "loss_entropy",
    "loss_elbo",
    "ess_mean",
    "grad_norm",
    "seed",
    "wall_time",
];

/// One row per gradient step. Optional columns are empty when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub frames: u64,
    pub segment: u64,
    pub mean_return: Option<f64>,
    pub loss_policy: f64,
    pub loss_value: f64,
    pub loss_entropy: f64,
    pub loss_elbo: Option<f64>,
    pub ess_mean: Option<f64>,
    pub grad_norm: f64,
    pub seed: u64,
    /// Seconds since the run started; left empty unless requested so that
    /// identical runs write identical files.
    pub wall_time: Option<f64>,
}

impl MetricsRecord {
    pub fn from_report(r: &SegmentReport, seed: u64, wall_time: Option<f64>) -> Self {
        Self {
            frames: r.frames,
            segment: r.segment,
            mean_return: r.mean_return,
            loss_policy: r.loss_policy,
            loss_value: r.loss_value,
            loss_entropy: r.loss_entropy,
            loss_elbo: r.loss_elbo,
            ess_mean: r.ess_mean,
            grad_norm: r.grad_norm,
            seed,
            wall_time,
        }
    }
}

/// Streams records; the header is written before the first one.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        inner.write_record(HEADER)?;
        Ok(Self { inner })
    }

    /// Continues an existing file without writing another header.
    pub fn append(out: W) -> Self {
        Self {
            inner: csv::WriterBuilder::new().has_headers(false).from_writer(out),
        }
    }

    pub fn write(&mut self, rec: &MetricsRecord) -> Result<()> {
        self.inner.serialize(rec)?;
        self.inner.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()).into())
    }
}

/// Parses a metrics file, checking the header exactly.
pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(crate::Error::Format(format!(
            "metrics header is `{}`, expected `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            HEADER.join(",")
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(crate::Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64) -> MetricsRecord {
        MetricsRecord {
            frames: 80 * i,
            segment: i,
            mean_return: (i > 1).then_some(-12.5 + i as f64),
            loss_policy: 0.1 / 3.0,
            loss_value: 1e-300,
            loss_entropy: -2.8379,
            loss_elbo: Some(f64::MIN_POSITIVE),
            ess_mean: None,
            grad_norm: 0.5,
            seed: u64::MAX,
            wall_time: None,
        }
    }

    #[test]
    fn round_trip() {
        let mut w = MetricsWriter::new(Vec::new()).unwrap();
        let recs: Vec<_> = (1..5).map(rec).collect();
        for r in &recs {
            w.write(r).unwrap();
        }
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("frames,segment,mean_return,loss_policy,"));
        assert_eq!(read_metrics(bytes.as_slice()).unwrap(), recs);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_metrics("frames,segment\n1,2\n".as_bytes()).is_err());
    }
}
