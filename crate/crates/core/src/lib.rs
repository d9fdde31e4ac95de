//! Learning the distribution of a stochastic linear utility from observed
//! utility-maximizing purchases.
//!
//! A customer with utility `u` facing prices `a` and budget `b` buys the
//! fractional-knapsack optimum `x*`. Only `(x*, a, b)` is observed. This crate
//! provides:
//!
//! * the forward model ([`knapsack`]) and the linear description of the
//!   utilities consistent with an observation ([`consistency`]);
//! * von Mises–Fisher machinery ([`special`], [`vmf`]);
//! * a Metropolis–Hastings posterior sampler over vMF parameters ([`posterior`]);
//! * simulated annealing for the corruption-robust counting objective ([`anneal`]);
//! * known-κ moment matching under designed prices ([`moment`]);
//! * scenario generators and scoring metrics ([`evaluation`]).
//!
//! Everything numerical is generic over [`Real`] (`f32`, `f64`). The `*64`
//! aliases below fix the scalar to `f64`, which is what the accuracy targets
//! in the module docs assume.

pub mod anneal;
pub mod consistency;
pub mod error;
pub mod evaluation;
pub mod knapsack;
pub mod moment;
pub mod posterior;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod sphere;
pub mod stats;
pub mod vmf;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Instance64 = knapsack::Instance<f64>;
pub type Bundle64 = knapsack::Bundle<f64>;
pub type SolveOutcome64 = knapsack::SolveOutcome<f64>;
pub type Observation64 = consistency::Observation<f64>;
pub type ConsistencySet64 = consistency::ConsistencySet<f64>;
pub type VmfParams64 = vmf::VmfParams<f64>;
pub type PriorBox64 = posterior::PriorBox<f64>;
pub type ChainConfig64 = posterior::ChainConfig<f64>;
pub type ChainState64 = posterior::ChainState<f64>;
pub type SaConfig64 = anneal::SaConfig<f64>;
pub type SaRun64 = anneal::SaRun<f64>;
pub type Scenario64 = evaluation::Scenario<f64>;
pub type UtilityLaw64 = evaluation::UtilityLaw<f64>;
pub type MarginalTable64 = moment::MarginalTable<f64>;

pub type Instance32 = knapsack::Instance<f32>;
pub type ConsistencySet32 = consistency::ConsistencySet<f32>;
pub type VmfParams32 = vmf::VmfParams<f32>;
