//! Reduced-attitude (spin-axis) control of an axis-symmetric spinning rigid
//! body.
//!
//! The crate keeps the gyroscopic coupling of the spinning body inside the
//! closed loop instead of cancelling it. It provides:
//!
//! - [`geom`]: SO(3), so(3) and S² primitives
//! - [`dynamics`]: planar and full rigid-body models, first-order actuator lag,
//!   a Lie group variational integrator
//! - [`controllers`]: conventional and structure-preserving laws, actuator
//!   compensation, torque observer, gain conditions
//! - [`analysis`]: linearization about the two equilibria, Hurwitz tests,
//!   Lyapunov candidates, gyroscopic phase portraits, trajectory metrics
//! - [`sim`]: scenario documents, the closed-loop driver, comparison and
//!   output files

pub mod analysis;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod sim;

pub use controllers::{Gains, Law, RefAttitude};
pub use dynamics::{BodyParams, RigidState};
pub use error::{AnalysisError, DynamicsError, GeomError, SimError};
pub use geom::{Rotation, UnitVec3, Vec2, Vec3};
