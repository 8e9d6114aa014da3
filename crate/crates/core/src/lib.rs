//! Reachability simulation for interest-based discovery over friendship
//! graphs and Social-IoT device graphs.
//!
//! Pipeline: check-in traces ([`trace`]) feed interest descriptors
//! ([`interest`]) and the device layer ([`siot`]); [`protocol`] adds
//! co-interest relationships between devices; [`experiment`] runs
//! Friendships vs Enhanced-SIoT campaigns and [`metrics`] aggregates them.

pub mod error;
pub mod experiment;
pub mod geo;
pub mod human;
pub mod interest;
pub mod metrics;
pub mod pipeline;
pub mod protocol;
pub mod rng;
pub mod siot;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use experiment::{
    couple_randomness, run_campaign, run_source, DecisionDraws, ExperimentConfig, ExperimentResult, Mode,
    ModeSpec, Scenario, SourceRun, SweepPoint, SweepVar,
};
pub use geo::{haversine_m, GeoPoint};
pub use human::{
    community_of, discover, giant_component_pct, AuthorizationMap, AuthorizationPolicy, FriendshipGraph, Layers,
    ReachabilityResult, UserIx,
};
pub use interest::{cosine_similarity, InterestDescriptor, MacroCategory, MacroId, PoI, PoiCatalog};
pub use metrics::{fmt_sig, mean_hops_comparison, mean_irn_pct, Averaging, MetricSeries};
pub use protocol::{CiorEdge, OriginDevice, ProtocolParams, VuipToken};
pub use siot::{Device, DeviceIx, DeviceKind, KindSet, RelationshipKind, SiotGraph, SiotView};
pub use synth::{generate as generate_synthetic, SyntheticScenarioSpec};
pub use trace::{CheckIn, CoLocation, TraceCorpus};
