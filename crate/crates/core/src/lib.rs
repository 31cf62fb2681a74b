//! Predicts collective behavior of central place foraging swarms.
//!
//! The crate has two halves that share one scenario description:
//!
//! * a macroscopic population model whose rate constants are derived from
//!   scenario geometry and robot controller characteristics
//!   ([`analytic`], [`odemodel`]), and
//! * an agent-based 2D kinematic microsimulator of the same task
//!   ([`microsim`]) that serves as ground truth and as the source of the
//!   single-robot calibration quantities.
//!
//! The two remaining dimensionless characterizations (`sigma_m`, `chi_m`)
//! are estimated post hoc from calibration runs by [`fit`].

pub mod analytic;
pub mod error;
pub mod fit;
pub mod geom;
pub mod microsim;
pub mod odemodel;
pub mod quadrature;
pub mod scenario;

pub use error::{Error, Result};
pub use geom::{Rect, Vec2};
pub use scenario::{Arena, BlockCluster, DistributionKind, Scenario};
