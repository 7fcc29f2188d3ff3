//! Outer geometric parameters of the hard-ball system and numerical tolerances.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Masses, radius and torus size of an `N`-ball system in `ν` dimensions,
/// together with the thresholds used wherever an exact statement has to be
/// decided in floating point.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams<T> {
    pub n_balls: usize,
    pub dim: usize,
    pub radius: T,
    pub box_len: T,
    pub masses: Vec<T>,
    /// Relative singular-value threshold for nullspace and rank decisions.
    pub rank_tol: T,
    /// Normal relative speed below which a collision is flagged as grazing.
    pub tangency_tol: T,
    /// Two collisions closer than this in time form a double collision.
    pub simultaneity_tol: T,
    /// Inter-collision gaps below this abort the run as a suspected accumulation.
    pub accumulation_floor: T,
    /// Event search window; `None` means `L / (2 v_max)`, recomputed per event.
    pub horizon: Option<T>,
}

impl<T: Real> SystemParams<T> {
    pub const DEFAULT_RANK_TOL: f64 = 1e-8;
    pub const DEFAULT_TANGENCY_TOL: f64 = 1e-9;
    pub const DEFAULT_SIMULTANEITY_TOL: f64 = 1e-10;
    pub const DEFAULT_ACCUMULATION_FLOOR: f64 = 1e-13;

    /// Builds and validates a parameter set with default tolerances.
    pub fn new(dim: usize, radius: T, box_len: T, masses: Vec<T>) -> Result<Self> {
        let params = SystemParams {
            n_balls: masses.len(),
            dim,
            radius,
            box_len,
            masses,
            rank_tol: T::lit(Self::DEFAULT_RANK_TOL),
            tangency_tol: T::lit(Self::DEFAULT_TANGENCY_TOL),
            simultaneity_tol: T::lit(Self::DEFAULT_SIMULTANEITY_TOL),
            accumulation_floor: T::lit(Self::DEFAULT_ACCUMULATION_FLOOR),
            horizon: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.n_balls < 2 {
            return bad("n_balls", format!("need at least 2 balls, got {}", self.n_balls));
        }
        if self.dim < 2 {
            return bad("dim", format!("need dimension at least 2, got {}", self.dim));
        }
        if self.masses.len() != self.n_balls {
            return bad(
                "masses",
                format!("{} masses given for {} balls", self.masses.len(), self.n_balls),
            );
        }
        if let Some((i, m)) = self
            .masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(**m > T::zero() && m.is_finite()))
        {
            return bad("masses", format!("masses must be positive; m_{} = {}", i + 1, m));
        }
        if !(self.radius > T::zero() && self.radius.is_finite()) {
            return bad("radius", format!("radius must be positive, got {}", self.radius));
        }
        let four_r = T::lit(4.0) * self.radius;
        if !(self.box_len > four_r && self.box_len.is_finite()) {
            return bad(
                "box",
                format!(
                    "room guard violated: need L > 4r = {}, got L = {}",
                    four_r, self.box_len
                ),
            );
        }
        for (name, tol) in [
            ("rank_tol", self.rank_tol),
            ("tangency_tol", self.tangency_tol),
            ("simultaneity_tol", self.simultaneity_tol),
            ("accumulation_floor", self.accumulation_floor),
        ] {
            if !(tol >= T::zero() && tol.is_finite()) {
                return bad(
                    name,
                    format!("tolerance must be a finite non-negative number, got {tol}"),
                );
            }
        }
        if let Some(h) = self.horizon {
            if !(h > T::zero()) {
                return bad("horizon", format!("horizon must be positive, got {h}"));
            }
        }
        Ok(())
    }

    /// Dimension `d = ν(N−1)` of the reduced configuration space.
    pub fn config_dim(&self) -> usize {
        self.dim * (self.n_balls - 1)
    }

    /// Length `νN` of a full position or velocity vector.
    pub fn phase_len(&self) -> usize {
        self.dim * self.n_balls
    }

    pub fn total_mass(&self) -> T {
        self.masses.iter().fold(T::zero(), |a, &m| a + m)
    }
}
