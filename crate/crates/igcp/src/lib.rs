//! Iterated generalized counting processes.
//!
//! A generalized counting process (GCP) jumps by j ∈ {1,…,k} at rate λ_j.
//! Subordinating one GCP by another gives the iterated GCP M(M₀(t)). This
//! crate evaluates its pmf, pgf, moments and related functionals exactly or
//! with certified truncation, samples it exactly, and cross-checks the
//! closed forms against independent routes.

pub mod compound;
pub mod error;
pub mod gcp;
pub mod igcp;
pub mod kernels;
pub mod mc;
pub mod multivariate;
pub mod ode;
pub mod qiter;
pub mod scalar;
pub mod timechange;
pub mod verify;

pub use error::{Error, Result};
pub use compound::JumpLaw;
pub use gcp::{CountingPath, GcpParams, GcpPath, RateSchedule};
pub use igcp::IgcpParams;
pub use multivariate::MvIgcpParams;
pub use qiter::QIterParams;
pub use kernels::{PmfVector, SeriesResult, WeightedPartition};
pub use scalar::Real;
pub use mc::{McConfig, McEstimate};
pub use timechange::{DependenceReport, StableParams, TcIgcpParams};

pub type GcpParamsF64 = GcpParams<f64>;
pub type GcpParamsF32 = GcpParams<f32>;
pub type IgcpParamsF64 = IgcpParams<f64>;
pub type IgcpParamsF32 = IgcpParams<f32>;
pub type RateScheduleF64 = RateSchedule<f64>;
pub type PmfVectorF64 = PmfVector<f64>;
pub type SeriesResultF64 = SeriesResult<f64>;
pub type JumpLawF64 = JumpLaw<f64>;
pub type MvIgcpParamsF64 = MvIgcpParams<f64>;
pub type QIterParamsF64 = QIterParams<f64>;
pub type StableParamsF64 = StableParams<f64>;
pub type TcIgcpParamsF64 = TcIgcpParams<f64>;
pub type TcIgcpParamsF32 = TcIgcpParams<f32>;
