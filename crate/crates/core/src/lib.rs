//! Optimal committed pricing for buyers with network externalities.
//!
//! Prices are stored chronologically; see [`path::PricePath`] for the
//! mapping to the rounds-remaining index used in the closed forms.

pub mod distribution;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod network;
pub mod optimizer;
pub mod output;
pub mod path;
pub mod pricing;
pub mod simulator;

pub use distribution::{TableDistribution, ValuationDistribution};
pub use equilibrium::ThresholdSchedule;
pub use error::{NetPriceError, Result};
pub use network::{BlockNetwork, NetworkMeasures, PairwiseNetwork, UniformNetwork};
pub use path::PricePath;
pub use pricing::PolicyReport;
