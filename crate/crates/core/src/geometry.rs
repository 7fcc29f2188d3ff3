//! Torus arithmetic, the mass metric and the two standard reductions.

use crate::error::{Error, Result};
use crate::pair::Pair;
use crate::params::SystemParams;
use crate::scalar::{dot, norm, Real};
use crate::state::PhaseState;

/// Minimum-image representative of a single coordinate, in `[−L/2, L/2)`.
#[inline]
pub fn wrap_centered<T: Real>(x: T, box_len: T) -> T {
    let half = T::lit(0.5);
    let mut y = x - box_len * (x / box_len + half).floor();
    // rounding can land exactly on the excluded endpoint
    if y >= box_len * half {
        y = y - box_len;
    }
    if y < -box_len * half {
        y = y + box_len;
    }
    y
}

/// Representative of a coordinate in `[0, L)`.
#[inline]
pub fn wrap_into_box<T: Real>(x: T, box_len: T) -> T {
    let y = x - box_len * (x / box_len).floor();
    if y >= box_len || y < T::zero() {
        T::zero()
    } else {
        y
    }
}

/// Minimum-image reduction of a `ν`-vector: congruent to `x` modulo `L·Z^ν`,
/// each component in `[−L/2, L/2)`.
pub fn torus_reduce<T: Real>(x: &[T], box_len: T) -> Vec<T> {
    x.iter().map(|&c| wrap_centered(c, box_len)).collect()
}

/// Distance between two points of the flat torus `R^ν / L·Z^ν`.
pub fn torus_distance<T: Real>(qa: &[T], qb: &[T], box_len: T) -> T {
    qa.iter()
        .zip(qb)
        .map(|(&a, &b)| {
            let d = wrap_centered(a - b, box_len);
            d * d
        })
        .fold(T::zero(), |s, x| s + x)
        .sqrt()
}

/// The mass metric `⟨u, w⟩ = Σ m_i ⟨u_i, w_i⟩` on `R^{νN}`.
pub fn mass_inner<T: Real>(u: &[T], w: &[T], masses: &[T], dim: usize) -> T {
    debug_assert_eq!(u.len(), masses.len() * dim);
    u.chunks(dim)
        .zip(w.chunks(dim))
        .zip(masses)
        .fold(T::zero(), |acc, ((ui, wi), &m)| acc + m * dot(ui, wi))
}

pub fn mass_norm<T: Real>(u: &[T], masses: &[T], dim: usize) -> T {
    mass_inner(u, u, masses, dim).sqrt()
}

/// Total momentum `Σ m_i v_i`.
pub fn momentum<T: Real>(v: &[T], masses: &[T], dim: usize) -> Vec<T> {
    let mut p = vec![T::zero(); dim];
    for (vi, &m) in v.chunks(dim).zip(masses) {
        for (pc, &c) in p.iter_mut().zip(vi) {
            *pc = *pc + m * c;
        }
    }
    p
}

/// Kinetic energy `½ Σ m_i ‖v_i‖²`.
pub fn kinetic_energy<T: Real>(v: &[T], masses: &[T], dim: usize) -> T {
    T::lit(0.5) * mass_inner(v, v, masses, dim)
}

/// Mass-metric orthogonal projection onto `𝒵 = {Σ m_i v_i = 0}`: subtracts the
/// centre-of-mass velocity from every ball.
pub fn project_to_z<T: Real>(v: &[T], masses: &[T], dim: usize) -> Vec<T> {
    let total = masses.iter().fold(T::zero(), |a, &m| a + m);
    let drift: Vec<T> = momentum(v, masses, dim).into_iter().map(|p| p / total).collect();
    v.chunks(dim)
        .flat_map(|vi| vi.iter().zip(&drift).map(|(&c, &d)| c - d))
        .collect()
}

/// Projects onto `𝒵` and rescales to kinetic energy exactly `½`.
pub fn normalize_energy<T: Real>(v: &[T], masses: &[T], dim: usize) -> Result<Vec<T>> {
    let mut w = project_to_z(v, masses, dim);
    let twice_e = mass_inner(&w, &w, masses, dim);
    if !(twice_e > T::zero()) || !twice_e.is_finite() {
        return Err(Error::ZeroVelocity);
    }
    let s = twice_e.sqrt().recip();
    w.iter_mut().for_each(|c| *c = *c * s);
    Ok(w)
}

/// Radius `r_{i,j} = 2r √(m_i m_j / (m_i + m_j))` of the base sphere of the
/// cylinder `C_{i,j}` in the mass metric.
pub fn base_radius<T: Real>(mi: T, mj: T, r: T) -> T {
    T::lit(2.0) * r * (mi * mj / (mi + mj)).sqrt()
}

/// True iff every pair of balls is at torus distance at least `2r`.
/// Exact contact counts as admissible.
pub fn check_admissible<T: Real>(state: &PhaseState<T>, params: &SystemParams<T>) -> bool {
    closest_pair(state, params).is_none_or(|(_, d)| d >= T::lit(2.0) * params.radius)
}

/// The pair with the smallest torus distance, and that distance.
pub fn closest_pair<T: Real>(state: &PhaseState<T>, params: &SystemParams<T>) -> Option<(Pair, T)> {
    Pair::all(state.n_balls())
        .map(|p| (p, torus_distance(state.pos(p.lo()), state.pos(p.hi()), params.box_len)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
}

/// Geometry of one hard-ball cylinder `C_{i,j}`.
///
/// The generator `A_{i,j}` is the subspace `q_i = q_j`; the base `L_{i,j}` is
/// its mass-metric orthocomplement, supported on balls `i, j` with
/// `m_i q_i + m_j q_j = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGeometry<T> {
    pub pair: Pair,
    pub base_radius: T,
    mi: T,
    mj: T,
}

impl<T: Real> PairGeometry<T> {
    pub fn new(pair: Pair, params: &SystemParams<T>) -> Self {
        let mi = params.masses[pair.lo()];
        let mj = params.masses[pair.hi()];
        PairGeometry {
            pair,
            base_radius: base_radius(mi, mj, params.radius),
            mi,
            mj,
        }
    }

    /// Mass-metric unit normal of `∂C_{i,j}` for the Euclidean contact normal
    /// `n` (pointing from ball `j` to ball `i`).
    pub fn mass_unit_normal(&self, n: &[T], n_balls: usize) -> Vec<T> {
        let dim = n.len();
        let s = (self.mi * self.mj / (self.mi + self.mj)).sqrt();
        let mut out = vec![T::zero(); dim * n_balls];
        let (i, j) = (self.pair.lo(), self.pair.hi());
        for c in 0..dim {
            out[i * dim + c] = s * n[c] / self.mi;
            out[j * dim + c] = -s * n[c] / self.mj;
        }
        out
    }

    /// Whether `w` lies in the generator subspace `A_{i,j}` (`w_i = w_j`) up to `tol`.
    pub fn in_generator(&self, w: &[T], dim: usize, tol: T) -> bool {
        let (i, j) = (self.pair.lo(), self.pair.hi());
        let diff: Vec<T> = (0..dim).map(|c| w[i * dim + c] - w[j * dim + c]).collect();
        norm(&diff) <= tol
    }
}

/// A mass-orthonormal basis of `𝒵`, `ν(N−1)` vectors of length `νN`.
pub fn z_basis<T: Real>(masses: &[T], dim: usize) -> Vec<Vec<T>> {
    let n = masses.len();
    let candidates = (0..n * dim).map(|k| {
        let mut e = vec![T::zero(); n * dim];
        e[k] = T::one();
        project_to_z(&e, masses, dim)
    });
    crate::linalg::gram_schmidt(candidates, n * dim - dim, |a, b| mass_inner(a, b, masses, dim))
}
