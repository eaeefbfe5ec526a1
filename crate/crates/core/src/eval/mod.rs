//! Cluster readout, quality metrics and the planted-partition generator.

mod metrics;
mod synth;

pub use metrics::{assign_clusters, clustering_accuracy, nmi, Assignment, LabelVector};
pub use synth::{
    feature_block, feature_id, lexicon, synth_generate, tweet_id, user_id, SynthData, SynthSpec,
    Truth, LEXICON_SHARE, TOKENS_PER_TWEET,
};
