//! Imperceptibility bench: quality indices of stamped versus original images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cipherstream::CameraIdentity;
use crate::error::{Error, Result};
use crate::imageio::RgbImage;
use crate::quality::{de_db, ser_db, QualityReport};
use crate::tamper::BENCH_CAMERA;
use crate::verifier::{stamp, StampConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub image: String,
    pub technique: String,
    pub metrics: QualityReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechniqueSummary {
    pub technique: String,
    pub images: usize,
    pub mae: Stat,
    pub mse: Stat,
    pub psnr: Stat,
    pub ssim: Stat,
    pub uiqi: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<QualityRow>,
    pub summaries: Vec<TechniqueSummary>,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> Stat {
    let n = values.len();
    if n == 0 {
        return Stat { mean: f64::NAN, std: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 || !mean.is_finite() {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Stat { mean, std }
}

impl BenchReport {
    /// Stamp every image with every technique and measure the distortion.
    pub fn run(images: &[(String, RgbImage)], techniques: &[(String, StampConfig)]) -> Result<Self> {
        if images.is_empty() || techniques.is_empty() {
            return Err(Error::InvalidConfig("bench needs images and techniques".into()));
        }
        let cam = CameraIdentity::new(BENCH_CAMERA)?;
        let keys: Vec<(usize, usize)> = (0..images.len())
            .flat_map(|i| (0..techniques.len()).map(move |t| (i, t)))
            .collect();
        let rows = keys
            .par_iter()
            .map(|&(i, t)| {
                let (name, img) = &images[i];
                let (tech, cfg) = &techniques[t];
                let stamped = stamp(img, &cam, cfg)?;
                Ok(QualityRow {
                    image: name.clone(),
                    technique: tech.clone(),
                    metrics: QualityReport::compute(img, &stamped)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let summaries = summarize(&rows, techniques.iter().map(|(n, _)| n.as_str()));
        Ok(Self { rows, summaries })
    }

    pub fn summary(&self, technique: &str) -> Option<&TechniqueSummary> {
        self.summaries.iter().find(|s| s.technique == technique)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let enc = |e: csv::Error| Error::Encode(e.to_string());
        w.write_record(["image", "technique", "mae", "mse", "psnr", "ssim", "uiqi"]).map_err(enc)?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.image.clone(),
                r.technique.clone(),
                format!("{:.6}", m.mae),
                format!("{:.6}", m.mse),
                fmt_db(m.psnr),
                format!("{:.6}", m.ssim),
                format!("{:.6}", m.uiqi),
            ])
            .map_err(enc)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Encode(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Encode(e.to_string()))
    }
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

/// Per-technique mean and standard deviation, in the given technique order.
pub fn summarize<'a>(rows: &[QualityRow], techniques: impl IntoIterator<Item = &'a str>) -> Vec<TechniqueSummary> {
    techniques
        .into_iter()
        .map(|tech| {
            let sel: Vec<&QualityReport> = rows.iter().filter(|r| r.technique == tech).map(|r| &r.metrics).collect();
            let col = |f: fn(&QualityReport) -> f64| mean_std(&sel.iter().map(|m| f(m)).collect::<Vec<_>>());
            TechniqueSummary {
                technique: tech.to_owned(),
                images: sel.len(),
                mae: col(|m| m.mae),
                mse: col(|m| m.mse),
                psnr: col(|m| m.psnr),
                ssim: col(|m| m.ssim),
                uiqi: col(|m| m.uiqi),
            }
        })
        .collect()
}
