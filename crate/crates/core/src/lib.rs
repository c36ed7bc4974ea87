//! Inference of time-varying bipartite networks from time-varying marginals
//! and a time-aggregated network.
//!
//! The core loop is iterative proportional fitting ([`ipf::run_ipf`]). When it
//! cannot converge, [`feasibility`] certifies why and [`repair`] adds the
//! fewest or least disruptive edges that make it converge. [`stats`] holds
//! the biproportional Poisson model behind the method and [`synth`] generates
//! data from it.

pub mod error;
pub mod experiment;
pub mod feasibility;
mod flow;
pub mod io;
pub mod ipf;
pub mod knapsack;
pub mod network;
pub mod repair;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use feasibility::{check_feasibility, find_blocking_set, verify_blocking, BlockingDiagnosis, FlowDiagnostics};
pub use ipf::{run_ipf, IpfConfig, IpfResult, IpfStatus};
pub use network::{aggregate, marginals, MarginalPair, NetworkSeries, SparseNetwork};
