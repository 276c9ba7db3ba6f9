//! Visual token pruning for multimodal models.
//!
//! Given the visual and textual token embeddings that enter a language model,
//! `prunekit` keeps a small, informative subset of the visual tokens in two
//! stages:
//!
//! 1. **Alignment filtering** ([`alignment`]): score each visual token by its
//!    negated mean L2 distance to the textual tokens and keep the best `N₁`.
//! 2. **Diversity selection** ([`repmax`]): greedily pick `N₂` of the
//!    survivors that maximize the expected pairwise cosine dissimilarity.
//!
//! [`pipeline::prune`] runs both. The crate also ships an exhaustive oracle,
//! baseline selectors, a synthetic data generator ([`synth`]), a sweep and
//! timing harness ([`bench`]), and the TPK/CSV/JSON file formats
//! ([`tokenset`]).
//!
//! ```
//! use prunekit::pipeline::{prune, PruneConfig};
//! use prunekit::synth::{generate, SynthSpec};
//!
//! let (visual, textual) = generate(&SynthSpec::default()).unwrap();
//! let report = prune(&visual, &textual, &PruneConfig::new(8)).unwrap();
//! assert_eq!(report.stage2.len(), 8);
//! ```

pub mod alignment;
pub mod bench;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod ksg;
pub mod pipeline;
pub mod repmax;
pub mod synth;
pub mod tokenset;

pub use alignment::{AlignmentScores, CrossMetric};
pub use error::{FormatError, PruneError};
pub use pipeline::{prune, prune_ablation, AblationOrder, PruneConfig, PruneReport};
pub use repmax::{IntraMetric, SimilarityMatrix};
pub use tokenset::{Modality, Selection, TokenMatrix};
