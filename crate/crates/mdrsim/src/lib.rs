//! Discrete-round simulator of randomized multipath routing in wireless
//! sensor networks under a compromised-node adversary.
//!
//! A deployment is partitioned into rectangular domains, each of which
//! elects a maximum-battery *special node*. Four per-share forwarding
//! policies are implemented: purely random propagation ([`routing::prp_step`]),
//! non-repetitive random propagation ([`routing::nrrp_step`]), and two
//! multi-domain variants ([`routing::mdron_step`], [`routing::mdrwon_step`])
//! that relay traffic between domains through the special nodes. Messages
//! are split into `n` coded shares of which any `k` reconstruct, so both
//! delivery and adversarial interception are threshold events.
//!
//! Everything is seeded: the same master seed reproduces the same metric
//! sweep byte for byte, independent of worker-thread count. Sweeps over
//! (policy, compromise fraction) cells run data-parallel with rayon when
//! the default `parallel` feature is enabled; a sequential path is always
//! available for comparison and constrained builds.

pub mod adversary;
pub mod coding;
pub mod config;
pub mod election;
pub mod engine;
pub mod error;
pub mod rng;
pub mod routing;
pub mod sweep;
pub mod topology;

pub use config::ScenarioConfig;
pub use engine::{run_simulation, simulate_run, MetricsReport, RunMetrics};
pub use error::{Error, Result};
pub use routing::RoutingPolicy;
pub use sweep::{run_sweep, run_sweep_jobs, run_sweep_sequential, SweepSpec, SweepTable};
