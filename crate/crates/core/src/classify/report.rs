use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{confidence_filter, gmm_fit, ClassifierModel, PatchSource};
use crate::metrics::relative_reduction;
use crate::simcam::LatticeGeometry;
use crate::{Error, Result};

/// Wall-clock latency of `classify_array` per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_s: f64,
    pub p50_s: f64,
    pub p99_s: f64,
    pub samples: usize,
}

impl LatencyStats {
    pub fn from_samples(mut xs: Vec<f64>) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        xs.sort_by(f64::total_cmp);
        let pick = |q: f64| xs[((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
        Some(Self {
            mean_s: xs.iter().sum::<f64>() / xs.len() as f64,
            p50_s: pick(0.5),
            p99_s: pick(0.99),
            samples: xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub method: String,
    pub source: PatchSource,
    pub per_site_infidelity: Vec<f64>,
    pub infidelity: f64,
    /// P(predicted dark | bright).
    pub bright_to_dark: f64,
    /// P(predicted bright | dark).
    pub dark_to_bright: f64,
    pub evaluations: usize,
    pub baseline: Option<String>,
    pub eta: Option<f64>,
    pub retained_fraction: Option<f64>,
    pub latency: Option<LatencyStats>,
}

impl ClassifierReport {
    /// Error rates from per-frame predictions and labels.
    pub fn from_predictions(
        method: &str,
        source: PatchSource,
        preds: &[Vec<u8>],
        labels: &[&[u8]],
    ) -> Result<Self> {
        if preds.len() != labels.len() || preds.is_empty() {
            return Err(Error::Shape(format!(
                "{} prediction rows vs {} label rows",
                preds.len(),
                labels.len()
            )));
        }
        let n_sites = labels[0].len();
        let mut wrong = vec![0usize; n_sites];
        let (mut b, mut b_err, mut d, mut d_err) = (0usize, 0usize, 0usize, 0usize);
        for (p, l) in preds.iter().zip(labels) {
            if p.len() != n_sites || l.len() != n_sites {
                return Err(Error::Shape("ragged prediction rows".into()));
            }
            for k in 0..n_sites {
                let err = p[k] != l[k];
                wrong[k] += usize::from(err);
                if l[k] == 1 {
                    b += 1;
                    b_err += usize::from(err);
                } else {
                    d += 1;
                    d_err += usize::from(err);
                }
            }
        }
        let n = preds.len() as f64;
        let total: usize = wrong.iter().sum();
        Ok(Self {
            method: method.to_string(),
            source,
            per_site_infidelity: wrong.iter().map(|&w| w as f64 / n).collect(),
            infidelity: total as f64 / (n * n_sites as f64),
            bright_to_dark: b_err as f64 / b.max(1) as f64,
            dark_to_bright: d_err as f64 / d.max(1) as f64,
            evaluations: preds.len() * n_sites,
            baseline: None,
            eta: None,
            retained_fraction: None,
            latency: None,
        })
    }

    pub fn with_baseline(mut self, baseline: &ClassifierReport) -> Self {
        self.eta = Some(relative_reduction(self.infidelity, baseline.infidelity));
        self.baseline = Some(baseline.method.clone());
        self
    }
}

/// Looks up `name` among `reports` and fills in the relative reduction.
pub fn attach_baseline(
    report: ClassifierReport,
    name: &str,
    reports: &[ClassifierReport],
) -> Result<ClassifierReport> {
    let base = reports
        .iter()
        .find(|r| r.method == name)
        .ok_or_else(|| Error::config("baseline", format!("no report named {name:?}")))?;
    Ok(report.with_baseline(base))
}

/// Scores every site of every frame, then times `classify_array` on up to
/// `latency_frames` frames.
pub fn evaluate(
    model: &ClassifierModel,
    method: &str,
    frames: &[&[f32]],
    labels: &[&[u8]],
    geometry: &LatticeGeometry,
    latency_frames: usize,
) -> Result<(ClassifierReport, Vec<Vec<f64>>)> {
    let scores = model.score_frames(frames, geometry)?;
    let preds: Vec<Vec<u8>> = scores
        .iter()
        .map(|r| r.iter().map(|&s| u8::from(s > 0.0)).collect())
        .collect();
    let mut report = ClassifierReport::from_predictions(method, model.source, &preds, labels)?;
    let mut lat = Vec::new();
    for f in frames.iter().take(latency_frames) {
        let t = Instant::now();
        std::hint::black_box(model.classify_array(f, geometry)?);
        lat.push(t.elapsed().as_secs_f64());
    }
    report.latency = LatencyStats::from_samples(lat);
    Ok((report, scores))
}

/// Outcome of confidence filtering at one `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostSelection {
    pub tau: f64,
    pub retained_fraction: f64,
    pub retained_infidelity: f64,
    pub unfiltered_infidelity: f64,
    pub retained: usize,
    pub total: usize,
}

/// Fits one mixture per site to that site's scores (or a single mixture to
/// every score when `pooled`) and keeps confident measurements. Retained
/// measurements are labelled by the mixture.
pub fn post_select(
    scores: &[Vec<f64>],
    labels: &[&[u8]],
    taus: &[f64],
    pooled: bool,
) -> Result<Vec<PostSelection>> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} score rows vs {} label rows",
            scores.len(),
            labels.len()
        )));
    }
    let n_sites = scores[0].len();
    let gmms = if pooled {
        vec![gmm_fit(&scores.concat())?; n_sites]
    } else {
        (0..n_sites)
            .map(|k| gmm_fit(&scores.iter().map(|r| r[k]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
    };
    let total = scores.len() * n_sites;
    let unfiltered = scores
        .iter()
        .zip(labels)
        .flat_map(|(r, l)| {
            r.iter()
                .zip(l.iter())
                .map(|(&s, &y)| u8::from(s > 0.0) != y)
        })
        .filter(|&e| e)
        .count() as f64
        / total as f64;
    taus.iter()
        .map(|&tau| {
            let (mut kept, mut wrong) = (0usize, 0usize);
            for (k, g) in gmms.iter().enumerate() {
                let col: Vec<f64> = scores.iter().map(|r| r[k]).collect();
                let (mask, hard) = confidence_filter(&col, g, tau)?;
                for (i, (&m, &h)) in mask.iter().zip(&hard).enumerate() {
                    if m {
                        kept += 1;
                        wrong += usize::from(h != labels[i][k]);
                    }
                }
            }
            Ok(PostSelection {
                tau,
                retained_fraction: kept as f64 / total as f64,
                retained_infidelity: if kept > 0 {
                    wrong as f64 / kept as f64
                } else {
                    0.0
                },
                unfiltered_infidelity: unfiltered,
                retained: kept,
                total,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_equal_reports() {
        let labels: Vec<Vec<u8>> = vec![vec![0, 1, 1], vec![1, 0, 0]];
        let l: Vec<&[u8]> = labels.iter().map(|v| v.as_slice()).collect();
        let perfect =
            ClassifierReport::from_predictions("a", PatchSource::Long, &labels, &l).unwrap();
        assert_eq!(perfect.infidelity, 0.0);
        let wrong = vec![vec![1, 1, 1], vec![1, 0, 0]];
        let base =
            ClassifierReport::from_predictions("base", PatchSource::Long, &wrong, &l).unwrap();
        assert!((base.infidelity - 1.0 / 6.0).abs() < 1e-12);
        assert!((base.dark_to_bright - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(base.bright_to_dark, 0.0);
        assert_eq!(perfect.clone().with_baseline(&base).eta, Some(1.0));
        assert_eq!(base.clone().with_baseline(&base).eta, Some(0.0));
        assert!(attach_baseline(perfect, "missing", &[base]).is_err());
    }

    #[test]
    fn headline_reduction_factor() {
        let labels = vec![vec![0u8; 28]];
        let l: Vec<&[u8]> = labels.iter().map(|v| v.as_slice()).collect();
        let mut b =
            ClassifierReport::from_predictions("b", PatchSource::RawShort, &labels, &l).unwrap();
        b.infidelity = 0.028;
        let mut m = b.clone();
        m.infidelity = 0.01;
        let eta = m.with_baseline(&b).eta.unwrap();
        assert!((eta - (1.0 - 1.0 / 2.8)).abs() < 1e-12);
        assert!((eta - 0.643).abs() < 1e-3);
    }

    #[test]
    fn post_selection_is_monotone_and_helps() {
        // scores: label * 4 - 2 + deterministic jitter in [-3, 3]
        let n = 600;
        let labels: Vec<Vec<u8>> = (0..n)
            .map(|i| vec![(i % 2) as u8, ((i / 2) % 2) as u8])
            .collect();
        let scores: Vec<Vec<f64>> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.iter()
                    .enumerate()
                    .map(|(k, &y)| {
                        y as f64 * 4.0 - 2.0 + (((i * 37 + k * 11) % 61) as f64 / 10.0 - 3.0)
                    })
                    .collect()
            })
            .collect();
        let l: Vec<&[u8]> = labels.iter().map(|v| v.as_slice()).collect();
        let taus = [0.5, 0.9, 0.99, 0.999];
        for pooled in [false, true] {
            let ps = post_select(&scores, &l, &taus, pooled).unwrap();
            assert_eq!(ps[0].retained_fraction, 1.0);
            for w in ps.windows(2) {
                assert!(w[1].retained_fraction <= w[0].retained_fraction);
            }
            assert!(ps[2].retained_infidelity <= ps[2].unfiltered_infidelity);
        }
    }
}
