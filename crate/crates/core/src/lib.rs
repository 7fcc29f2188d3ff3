//! Hard balls with arbitrary masses on the flat torus `T^ν`: event-driven
//! dynamics, symbolic collision sequences and their richness, neutral spaces
//! and sufficiency, tangent dynamics and Lyapunov spectra, and statistical
//! surveys over the outer parameters `(m_1, …, m_N; L)`.
//!
//! The mathematical modules are generic over the scalar type through
//! [`Real`]; the sampling and survey layer works in `f64`. The aliases at the
//! crate root name the `f64` instantiations.

// `!(x < y)` is deliberate where it also has to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod neutral;
pub mod pair;
pub mod params;
pub mod probe;
pub mod scalar;
pub mod state;
pub mod symbolic;
pub mod tangent;

pub use dynamics::{simulate, CollisionEvent, Simulator, Stop, Trajectory};
pub use error::{Error, Result};
pub use neutral::{is_sufficient, neutral_space, NeutralResult};
pub use pair::Pair;
pub use params::SystemParams;
pub use scalar::Real;
pub use state::PhaseState;
pub use symbolic::{find_witness, threshold_c, SymbolicSequence, Witness};

pub type Params = SystemParams<f64>;
pub type State = PhaseState<f64>;
pub type Traj = Trajectory<f64>;
pub type Event = CollisionEvent<f64>;
pub type Neutral = NeutralResult<f64>;
