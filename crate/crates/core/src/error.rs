use thiserror::Error;

use crate::pair::Pair;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("velocity vanishes after removing the centre-of-mass drift")]
    ZeroVelocity,

    #[error("balls {pair} are not approaching (normal relative speed {normal_speed:e})")]
    NotApproaching { pair: Pair, normal_speed: f64 },

    #[error("conservation drift at event {event}: |dE| = {energy_drift:e}, |dI| = {momentum_drift:e}")]
    ConservationDrift {
        event: usize,
        energy_drift: f64,
        momentum_drift: f64,
    },

    #[error("accumulation of collisions suspected at event {event}: gap {gap:e} below floor")]
    AccumulationSuspected { event: usize, gap: f64 },

    #[error("balls {pair} overlap after event {event} (distance deficit {deficit:e})")]
    Overlap { event: usize, pair: Pair, deficit: f64 },

    #[error("{0} simultaneous collisions; only double collisions are supported")]
    UnsupportedMultiplicity(usize),

    #[error("range [{start}, {end}] is not inside a sequence of length {len}")]
    Range { start: usize, end: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("segment contains a singular event at index {event}")]
    SingularSegment { event: usize },

    #[error("collision {index} has vanishing relative velocity; advance undetermined")]
    DegenerateCollision { index: usize },

    #[error("perturbed run realised a different collision sequence (first mismatch at {index})")]
    TopologyChange { index: usize },

    #[error("grazing collision at index {index} (normal speed {normal_speed:e})")]
    GrazingEvent { index: usize, normal_speed: f64 },

    #[error("rejection sampling gave up after {attempts} attempts (packing fraction {packing_fraction:.4})")]
    RejectionOverflow { attempts: usize, packing_fraction: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures that indicate a broken numerical invariant rather
    /// than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConservationDrift { .. }
                | Error::AccumulationSuspected { .. }
                | Error::Overlap { .. }
                | Error::UnsupportedMultiplicity(_)
                | Error::SingularSegment { .. }
                | Error::DegenerateCollision { .. }
                | Error::TopologyChange { .. }
                | Error::GrazingEvent { .. }
                | Error::RejectionOverflow { .. }
                | Error::ZeroVelocity
                | Error::NotApproaching { .. }
        )
    }
}
