use std::path::Path;
use std::str::FromStr;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::net::{train_net, NetArch, NetTrainConfig, NetTrainStats, SiteNet, Standardizer};
use super::{
    fit_scalar_threshold, site_pixels, Gaussian1d, LabeledPatches, MatchedFilterTemplate,
    PatchSource, SiteSamples,
};
use crate::container::Container;
use crate::nn::Parameterized;
use crate::seed;
use crate::simcam::LatticeGeometry;
use crate::{Error, Result};

pub const MODEL_KIND: &str = "site-classifier";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Threshold,
    #[serde(rename = "mf")]
    MatchedFilter,
    Fnn,
    #[serde(rename = "mfnn")]
    MfNn,
    #[serde(rename = "cnn")]
    CnnSite,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        Self::Threshold,
        Self::MatchedFilter,
        Self::Fnn,
        Self::MfNn,
        Self::CnnSite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Threshold => "threshold",
            Self::MatchedFilter => "mf",
            Self::Fnn => "fnn",
            Self::MfNn => "mfnn",
            Self::CnnSite => "cnn",
        }
    }

    pub fn is_network(self) -> bool {
        matches!(self, Self::Fnn | Self::MfNn | Self::CnnSite)
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("kind", format!("unknown classifier kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    /// One model for every site instead of one per site.
    pub shared: bool,
    pub fnn_hidden: usize,
    pub mfnn_hidden: usize,
    /// Project the matched-filter template to zero mean.
    pub zero_mean_template: bool,
    pub train: NetTrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Fnn,
            shared: false,
            fnn_hidden: 64,
            mfnn_hidden: 16,
            zero_mean_template: false,
            train: NetTrainConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn with_kind(kind: ClassifierKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fnn_hidden == 0 || self.mfnn_hidden == 0 {
            return Err(Error::config(
                "classifier.hidden",
                "hidden width must be positive",
            ));
        }
        self.train.validate()
    }
}

/// Decision rule for one site. Every rule yields a scalar score whose sign
/// is the prediction (positive = bright).
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SiteModel {
    Threshold {
        threshold: f64,
        dark: Gaussian1d,
        bright: Gaussian1d,
    },
    MatchedFilter {
        template: MatchedFilterTemplate,
        threshold: f64,
    },
    Net {
        net: SiteNet,
        standardizer: Standardizer,
        template: Option<MatchedFilterTemplate>,
        stats: NetTrainStats,
    },
}

fn net_features(template: Option<&MatchedFilterTemplate>, patches: &[Vec<f32>]) -> Vec<Vec<f64>> {
    patches
        .iter()
        .map(|p| {
            let mut f: Vec<f64> = p.iter().map(|&v| v as f64).collect();
            if let Some(t) = template {
                f.push(t.score(p));
            }
            f
        })
        .collect()
}

impl SiteModel {
    /// Scores for a batch of patches from this site.
    pub fn scores(&self, patches: &[Vec<f32>]) -> Vec<f64> {
        match self {
            SiteModel::Threshold { threshold, .. } => patches
                .iter()
                .map(|p| p.iter().map(|&v| v as f64).sum::<f64>() - threshold)
                .collect(),
            SiteModel::MatchedFilter {
                template,
                threshold,
            } => patches
                .iter()
                .map(|p| template.score(p) - threshold)
                .collect(),
            SiteModel::Net {
                net,
                standardizer,
                template,
                ..
            } => {
                if patches.is_empty() {
                    return Vec::new();
                }
                let x = standardizer.apply(&net_features(template.as_ref(), patches));
                net.infer(&x)
                    .axis_iter(Axis(0))
                    .map(|r| (r[1] - r[0]) as f64)
                    .collect()
            }
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            SiteModel::Threshold { .. } => 1,
            SiteModel::MatchedFilter { template, .. } => template.weights.len() + 1,
            SiteModel::Net { net, .. } => net.num_params(),
        }
    }
}

fn train_site(
    kind: ClassifierKind,
    train: &SiteSamples,
    val: &SiteSamples,
    cfg: &ClassifierConfig,
    patch_px: usize,
    rng_seed: u64,
) -> Result<SiteModel> {
    let (dark, bright) = train.class_counts();
    if dark == 0 || bright == 0 {
        return Err(Error::config(
            "labels",
            "only one class present in training data",
        ));
    }
    match kind {
        ClassifierKind::Threshold => {
            let sums: Vec<f64> = train
                .patches
                .iter()
                .map(|p| p.iter().map(|&v| v as f64).sum())
                .collect();
            let (threshold, dark, bright) = fit_scalar_threshold(&sums, &train.labels)?;
            Ok(SiteModel::Threshold {
                threshold,
                dark,
                bright,
            })
        }
        ClassifierKind::MatchedFilter => {
            let template = MatchedFilterTemplate::build(train, cfg.zero_mean_template)?;
            let s: Vec<f64> = train.patches.iter().map(|p| template.score(p)).collect();
            let (threshold, _, _) = fit_scalar_threshold(&s, &train.labels)?;
            Ok(SiteModel::MatchedFilter {
                template,
                threshold,
            })
        }
        _ => {
            if val.is_empty() {
                return Err(Error::EmptySplit("val".into()));
            }
            let template = match kind {
                ClassifierKind::MfNn => {
                    Some(MatchedFilterTemplate::build(train, cfg.zero_mean_template)?)
                }
                _ => None,
            };
            let feats = net_features(template.as_ref(), &train.patches);
            let (arch, standardizer) = match kind {
                ClassifierKind::Fnn => (
                    NetArch::Mlp {
                        inputs: feats[0].len(),
                        hidden: cfg.fnn_hidden,
                    },
                    Standardizer::fit(&feats),
                ),
                ClassifierKind::MfNn => (
                    NetArch::Mlp {
                        inputs: feats[0].len(),
                        hidden: cfg.mfnn_hidden,
                    },
                    Standardizer::fit(&feats),
                ),
                _ => (NetArch::Cnn { patch_px }, Standardizer::fit_global(&feats)),
            };
            let x = standardizer.apply(&feats);
            let vx = standardizer.apply(&net_features(template.as_ref(), &val.patches));
            let mut net = SiteNet::new(arch, seed::derive(rng_seed, 0));
            let tcfg = NetTrainConfig {
                seed: seed::derive(rng_seed, 1),
                ..cfg.train
            };
            let stats = train_net(&mut net, &x, &train.labels, &vx, &val.labels, &tcfg)?;
            Ok(SiteModel::Net {
                net,
                standardizer,
                template,
                stats,
            })
        }
    }
}

/// A trained classifier: one [`SiteModel`] per lattice site, or a single
/// shared one.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub source: PatchSource,
    pub shared: bool,
    pub patch_px: usize,
    pub sites: Vec<SiteModel>,
}

pub fn train_classifier(
    train: &LabeledPatches,
    val: &LabeledPatches,
    source: PatchSource,
    cfg: &ClassifierConfig,
) -> Result<ClassifierModel> {
    cfg.validate()?;
    if train.sites.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptySplit("train".into()));
    }
    let sites = if cfg.shared {
        vec![train_site(
            cfg.kind,
            &train.pooled(),
            &val.pooled(),
            cfg,
            train.patch_px,
            seed::derive(cfg.train.seed, 0),
        )?]
    } else {
        let empty = SiteSamples::default();
        (0..train.sites.len())
            .into_par_iter()
            .map(|k| {
                let v = val.sites.get(k).unwrap_or(&empty);
                train_site(
                    cfg.kind,
                    &train.sites[k],
                    v,
                    cfg,
                    train.patch_px,
                    seed::derive(cfg.train.seed, k as u64),
                )
                .map_err(|e| Error::Site {
                    row: k / train.cols,
                    col: k % train.cols,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ClassifierModel {
        kind: cfg.kind,
        source,
        shared: cfg.shared,
        patch_px: train.patch_px,
        sites,
    })
}

/// Predictions and scores for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteDecisions {
    pub predictions: Vec<u8>,
    pub scores: Vec<f64>,
}

impl ClassifierModel {
    pub fn site_model(&self, site: usize) -> Option<&SiteModel> {
        if self.shared {
            self.sites.first()
        } else {
            self.sites.get(site)
        }
    }

    fn check(&self, geometry: &LatticeGeometry) -> Result<()> {
        if geometry.patch_px != self.patch_px {
            return Err(Error::Shape(format!(
                "model patch {} vs geometry patch {}",
                self.patch_px, geometry.patch_px
            )));
        }
        if !self.shared && self.sites.len() < geometry.num_sites() {
            let (row, col) = geometry.site_coords(self.sites.len());
            return Err(Error::Site {
                row,
                col,
                message: "no model for this site".into(),
            });
        }
        Ok(())
    }

    /// Scores for many frames at once: `out[frame][site]`.
    pub fn score_frames(
        &self,
        frames: &[&[f32]],
        geometry: &LatticeGeometry,
    ) -> Result<Vec<Vec<f64>>> {
        self.check(geometry)?;
        for f in frames {
            if f.len() != geometry.num_pixels() {
                return Err(Error::Shape(format!(
                    "frame of {} pixels for a {}x{} geometry",
                    f.len(),
                    geometry.image_h,
                    geometry.image_w
                )));
            }
        }
        let n_sites = geometry.num_sites();
        let per_site: Vec<Vec<f64>> = (0..n_sites)
            .map(|k| {
                let patches: Vec<Vec<f32>> =
                    frames.iter().map(|f| site_pixels(f, geometry, k)).collect();
                self.site_model(k).unwrap().scores(&patches)
            })
            .collect();
        Ok((0..frames.len())
            .map(|i| per_site.iter().map(|s| s[i]).collect())
            .collect())
    }

    pub fn classify_array(
        &self,
        frame: &[f32],
        geometry: &LatticeGeometry,
    ) -> Result<SiteDecisions> {
        let scores = self.score_frames(&[frame], geometry)?.pop().unwrap();
        Ok(SiteDecisions {
            predictions: scores.iter().map(|&s| u8::from(s > 0.0)).collect(),
            scores,
        })
    }

    pub fn num_params(&self) -> usize {
        self.sites.iter().map(SiteModel::num_params).sum()
    }

    pub fn to_container(&self) -> Container {
        let mut blobs = Vec::new();
        let sites: Vec<serde_json::Value> = self
            .sites
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                SiteModel::Threshold { threshold, dark, bright } => {
                    json!({"rule": "threshold", "threshold": threshold, "dark": dark, "bright": bright})
                }
                SiteModel::MatchedFilter { template, threshold } => {
                    json!({"rule": "mf", "template": template, "threshold": threshold})
                }
                SiteModel::Net { net, standardizer, template, stats } => {
                    blobs.push((format!("site{k}"), net.flat_values()));
                    json!({"rule": "net", "arch": net.arch, "standardizer": standardizer, "template": template, "stats": stats})
                }
            })
            .collect();
        Container {
            kind: MODEL_KIND.into(),
            body: json!({
                "format_version": MODEL_VERSION,
                "kind": self.kind,
                "source": self.source,
                "shared": self.shared,
                "patch_px": self.patch_px,
                "sites": sites,
            }),
            blobs,
        }
    }

    pub fn from_container(c: &Container, path: &Path) -> Result<Self> {
        if c.kind != MODEL_KIND {
            return Err(Error::corrupt(
                path,
                format!("expected a {MODEL_KIND} file, found {}", c.kind),
            ));
        }
        #[derive(Deserialize)]
        struct Body {
            format_version: u32,
            kind: ClassifierKind,
            source: PatchSource,
            shared: bool,
            patch_px: usize,
            sites: Vec<SiteBody>,
        }
        #[derive(Deserialize)]
        #[serde(tag = "rule", rename_all = "kebab-case")]
        enum SiteBody {
            Threshold {
                threshold: f64,
                dark: Gaussian1d,
                bright: Gaussian1d,
            },
            Mf {
                template: MatchedFilterTemplate,
                threshold: f64,
            },
            Net {
                arch: NetArch,
                standardizer: Standardizer,
                template: Option<MatchedFilterTemplate>,
                stats: NetTrainStats,
            },
        }
        let body: Body = serde_json::from_value(c.body.clone())
            .map_err(|e| Error::corrupt(path, e.to_string()))?;
        if body.format_version != MODEL_VERSION {
            return Err(Error::Version {
                found: body.format_version,
                expected: MODEL_VERSION,
            });
        }
        let sites = body
            .sites
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                Ok(match s {
                    SiteBody::Threshold {
                        threshold,
                        dark,
                        bright,
                    } => SiteModel::Threshold {
                        threshold,
                        dark,
                        bright,
                    },
                    SiteBody::Mf {
                        template,
                        threshold,
                    } => SiteModel::MatchedFilter {
                        template,
                        threshold,
                    },
                    SiteBody::Net {
                        arch,
                        standardizer,
                        template,
                        stats,
                    } => {
                        let mut net = SiteNet::new(arch, 0);
                        let w = c.blob(&format!("site{k}")).ok_or_else(|| {
                            Error::corrupt(path, format!("missing weights for site {k}"))
                        })?;
                        net.load_flat(w).map_err(|e| Error::corrupt(path, e))?;
                        SiteModel::Net {
                            net,
                            standardizer,
                            template,
                            stats,
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: body.kind,
            source: body.source,
            shared: body.shared,
            patch_px: body.patch_px,
            sites,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?, path)
    }
}
