//! Per-site state discrimination and confidence post-selection.

mod gmm;
mod matched;
mod model;
pub mod net;
mod patch;
mod report;
mod threshold;

pub use gmm::{confidence_filter, gmm_fit, GmmModel};
pub use matched::MatchedFilterTemplate;
pub use model::{
    train_classifier, ClassifierConfig, ClassifierKind, ClassifierModel, SiteDecisions, SiteModel,
    MODEL_KIND, MODEL_VERSION,
};
pub use net::{NetTrainConfig, NetTrainStats};
pub use patch::{
    extract_patches, site_pixels, LabeledPatches, PatchSource, SitePatch, SiteSamples,
};
pub use report::{
    attach_baseline, evaluate, post_select, ClassifierReport, LatencyStats, PostSelection,
};
pub use threshold::{equal_likelihood_threshold, fit_scalar_threshold, Gaussian1d};
