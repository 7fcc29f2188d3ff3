use crate::error::{Error, Result};
use crate::geometry;
use crate::params::SystemParams;
use crate::scalar::Real;

/// Positions and velocities of all balls at one instant.
///
/// Both vectors are flat, ball-major: ball `i` occupies `[i*ν, (i+1)*ν)`.
/// Positions are absolute and wrapped into `[0, L)^ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState<T> {
    pub time: T,
    pub dim: usize,
    pub positions: Vec<T>,
    pub velocities: Vec<T>,
}

impl<T: Real> PhaseState<T> {
    pub fn new(dim: usize, positions: Vec<T>, velocities: Vec<T>) -> Result<Self> {
        if dim == 0 || !positions.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: positions.len(),
            });
        }
        if positions.len() != velocities.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                found: velocities.len(),
            });
        }
        Ok(PhaseState {
            time: T::zero(),
            dim,
            positions,
            velocities,
        })
    }

    pub fn n_balls(&self) -> usize {
        self.positions.len() / self.dim
    }

    #[inline]
    pub fn pos(&self, i: usize) -> &[T] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn vel(&self, i: usize) -> &[T] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn energy(&self, masses: &[T]) -> T {
        geometry::kinetic_energy(&self.velocities, masses, self.dim)
    }

    pub fn momentum(&self, masses: &[T]) -> Vec<T> {
        geometry::momentum(&self.velocities, masses, self.dim)
    }

    /// Largest single-ball speed.
    pub fn max_speed(&self) -> T {
        self.velocities
            .chunks(self.dim)
            .map(crate::scalar::norm)
            .fold(T::zero(), T::max)
    }

    /// Moves every ball uniformly for `tau` and wraps positions into the box.
    pub fn free_flight(&mut self, tau: T, box_len: T) {
        for (q, &v) in self.positions.iter_mut().zip(&self.velocities) {
            *q = geometry::wrap_into_box(*q + tau * v, box_len);
        }
        self.time = self.time + tau;
    }

    /// Applies both reductions: removes the centre-of-mass drift and rescales
    /// to `E = 1/2`.
    pub fn normalized(mut self, params: &SystemParams<T>) -> Result<Self> {
        self.velocities = geometry::normalize_energy(&self.velocities, &params.masses, self.dim)?;
        Ok(self)
    }

    /// Checks the dimensions against `params`.
    pub fn check_shape(&self, params: &SystemParams<T>) -> Result<()> {
        if self.dim != params.dim || self.positions.len() != params.phase_len() {
            return Err(Error::DimensionMismatch {
                expected: params.phase_len(),
                found: self.positions.len(),
            });
        }
        Ok(())
    }
}
