//! Neutral spaces, advances and sufficiency of trajectory segments.
//!
//! A configuration translation `W ∈ 𝒵` applied at the reference time is
//! neutral when every collision of the segment is merely shifted in time:
//! before collision `k` the propagated translation `W^{k−1}` satisfies
//! `W^{k−1}_i − W^{k−1}_j = α_k (v_i⁻ − v_j⁻)` for the colliding pair, and it
//! is carried through the collision as `W^k = W^{k−1} + α_k (v⁺ − v⁻)`.
//! Collisions before the reference time are handled symmetrically with the
//! post-collision velocities. The unknowns `(W, α_1, …, α_n)` form a
//! homogeneous linear system whose nullspace, read off the singular values,
//! is the neutral space.

use crate::dynamics::{self, CollisionEvent, Stop, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{self, mass_inner, z_basis};
use crate::linalg::{gram_schmidt, jacobi_svd, Mat};
use crate::params::SystemParams;
use crate::scalar::{dot, norm, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct NeutralResult<T> {
    pub dimension: usize,
    /// Mass-orthonormal basis of the neutral space, each vector in `𝒵`.
    pub basis: Vec<Vec<T>>,
    /// For each basis vector, the advance of every collision of the segment.
    pub advances: Vec<Vec<T>>,
    /// Full spectrum of the constraint matrix, descending.
    pub singular_values: Vec<T>,
    /// Largest constraint violation over the returned basis.
    pub residual: T,
    /// Number of collisions that precede the reference time.
    pub reference: usize,
}

impl<T: Real> NeutralResult<T> {
    /// Relative mass-metric distance of `w` from the span of the basis.
    pub fn distance_from_span(&self, w: &[T], masses: &[T], dim: usize) -> T {
        let mut rest = w.to_vec();
        for b in &self.basis {
            let c = mass_inner(&rest, b, masses, dim);
            rest.iter_mut().zip(b).for_each(|(x, &y)| *x = *x - c * y);
        }
        let scale = geometry::mass_norm(w, masses, dim);
        if scale == T::zero() {
            return T::zero();
        }
        geometry::mass_norm(&rest, masses, dim) / scale
    }

    /// Singular values divided by the largest one, ascending.
    pub fn relative_spectrum_ascending(&self) -> Vec<T> {
        let top = self.singular_values.first().copied().unwrap_or_else(T::zero);
        let mut rel: Vec<T> = self
            .singular_values
            .iter()
            .map(|&s| if top > T::zero() { s / top } else { T::zero() })
            .collect();
        rel.reverse();
        rel
    }

    pub fn is_sufficient(&self) -> bool {
        self.dimension == 1
    }

    /// Structured text: dimension, residual, spectrum, then one `basis` and
    /// one `advances` line per neutral vector.
    pub fn to_text(&self) -> String {
        let list = |xs: &[T]| xs.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ");
        let mut out = format!(
            "dimension {}\nreference {}\nresidual {:.16e}\nsingular_values {}\n",
            self.dimension,
            self.reference,
            self.residual,
            list(&self.singular_values)
        );
        for (w, a) in self.basis.iter().zip(&self.advances) {
            out.push_str(&format!("basis {}\nadvances {}\n", list(w), list(a)));
        }
        out
    }
}

/// Advances solved for a given translation, with the worst violation of the
/// neutrality constraints (zero for neutral `W`).
#[derive(Clone, Debug, PartialEq)]
pub struct Advances<T> {
    pub values: Vec<T>,
    pub residual: T,
}

fn check_nondegenerate<T: Real>(events: &[CollisionEvent<T>], params: &SystemParams<T>) -> Result<()> {
    for (index, e) in events.iter().enumerate() {
        if norm(&e.relative_pre()) < params.tangency_tol {
            return Err(Error::DegenerateCollision { index });
        }
    }
    Ok(())
}

/// Neutral space of the segment given by `events`, at the reference time
/// after the first `reference` collisions.
pub fn neutral_space_of<T: Real>(
    events: &[CollisionEvent<T>],
    reference: usize,
    params: &SystemParams<T>,
) -> Result<NeutralResult<T>> {
    if reference > events.len() {
        return Err(Error::Range {
            start: reference,
            end: reference,
            len: events.len(),
        });
    }
    check_nondegenerate(events, params)?;
    let dim = params.dim;
    let phase = params.phase_len();
    let d = params.config_dim();
    let n = events.len();
    let unknowns = d + n;
    let zb = z_basis(&params.masses, dim);

    let initial_coef = Mat::from_fn(phase, unknowns, |comp, u| if u < d { zb[u][comp] } else { T::zero() });
    let mut rows = Mat::zeros(dim * n, unknowns);

    let emit = |coef: &Mat<T>, k: usize, rel: &[T], rows: &mut Mat<T>| {
        let e = &events[k];
        let (i, j) = (e.pair.lo(), e.pair.hi());
        for c in 0..dim {
            let r = k * dim + c;
            for u in 0..unknowns {
                rows[(r, u)] = coef[(i * dim + c, u)] - coef[(j * dim + c, u)];
            }
            rows[(r, d + k)] = rows[(r, d + k)] - rel[c];
        }
    };

    let mut coef = initial_coef.clone();
    for k in reference..n {
        let e = &events[k];
        emit(&coef, k, &e.relative_pre(), &mut rows);
        for comp in 0..phase {
            coef[(comp, d + k)] = coef[(comp, d + k)] + (e.v_post[comp] - e.v_pre[comp]);
        }
    }
    let mut coef = initial_coef;
    for k in (0..reference).rev() {
        let e = &events[k];
        emit(&coef, k, &e.relative_post(), &mut rows);
        for comp in 0..phase {
            coef[(comp, d + k)] = coef[(comp, d + k)] - (e.v_post[comp] - e.v_pre[comp]);
        }
    }

    let svd = jacobi_svd(&rows);
    let top = svd.singular_values.first().copied().unwrap_or_else(T::zero);
    let threshold = params.rank_tol * top;
    let null: Vec<usize> = (0..unknowns)
        .filter(|&k| top == T::zero() || svd.singular_values[k] <= threshold)
        .collect();

    // restrict to the W coordinates and re-orthonormalise
    let ys = gram_schmidt(
        null.iter().map(|&k| (0..d).map(|r| svd.v[(r, k)]).collect::<Vec<T>>()),
        null.len(),
        |a: &[T], b: &[T]| dot(a, b),
    );
    let basis: Vec<Vec<T>> = ys
        .iter()
        .map(|y| {
            (0..phase)
                .map(|comp| (0..d).fold(T::zero(), |acc, b| acc + y[b] * zb[b][comp]))
                .collect()
        })
        .collect();

    let mut advances = Vec::with_capacity(basis.len());
    let mut residual = T::zero();
    for w in &basis {
        let adv = advances_of(events, reference, w, params)?;
        residual = residual.max(adv.residual);
        advances.push(adv.values);
    }

    Ok(NeutralResult {
        dimension: basis.len(),
        basis,
        advances,
        singular_values: svd.singular_values,
        residual,
        reference,
    })
}

/// Solves the advance of every collision for the translation `w` applied at
/// the reference time, collision by collision in least squares.
pub fn advances_of<T: Real>(
    events: &[CollisionEvent<T>],
    reference: usize,
    w: &[T],
    params: &SystemParams<T>,
) -> Result<Advances<T>> {
    check_nondegenerate(events, params)?;
    let dim = params.dim;
    let mut values = vec![T::zero(); events.len()];
    let mut residual = T::zero();
    let mut solve = |cur: &[T], e: &CollisionEvent<T>, rel: &[T]| {
        let dw = dynamics::relative(cur, e.pair, dim);
        let alpha = dot(&dw, rel) / dot(rel, rel);
        let miss: Vec<T> = dw.iter().zip(rel).map(|(&a, &b)| a - alpha * b).collect();
        residual = residual.max(norm(&miss));
        alpha
    };

    let mut cur = w.to_vec();
    for (k, e) in events.iter().enumerate().skip(reference) {
        let alpha = solve(&cur, e, &e.relative_pre());
        values[k] = alpha;
        for ((c, &post), &pre) in cur.iter_mut().zip(&e.v_post).zip(&e.v_pre) {
            *c = *c + alpha * (post - pre);
        }
    }
    let mut cur = w.to_vec();
    for k in (0..reference).rev() {
        let e = &events[k];
        let alpha = solve(&cur, e, &e.relative_post());
        values[k] = alpha;
        for ((c, &post), &pre) in cur.iter_mut().zip(&e.v_post).zip(&e.v_pre) {
            *c = *c - alpha * (post - pre);
        }
    }
    Ok(Advances { values, residual })
}

fn require_nonsingular<T: Real>(traj: &Trajectory<T>) -> Result<()> {
    if let Some(flag) = traj.singular_flags.first() {
        return Err(Error::SingularSegment { event: flag.event });
    }
    if traj.pending_double.is_some() {
        return Err(Error::SingularSegment {
            event: traj.events.len(),
        });
    }
    Ok(())
}

/// Neutral space of a nonsingular trajectory at its start.
pub fn neutral_space<T: Real>(traj: &Trajectory<T>, params: &SystemParams<T>) -> Result<NeutralResult<T>> {
    neutral_space_at(traj, 0, params)
}

/// Neutral space with the reference time placed after `reference` collisions.
pub fn neutral_space_at<T: Real>(
    traj: &Trajectory<T>,
    reference: usize,
    params: &SystemParams<T>,
) -> Result<NeutralResult<T>> {
    require_nonsingular(traj)?;
    neutral_space_of(&traj.events, reference, params)
}

/// Advance of collision `k` under the translation `w` applied at the start.
pub fn advance_of<T: Real>(traj: &Trajectory<T>, w: &[T], k: usize, params: &SystemParams<T>) -> Result<T> {
    if k >= traj.events.len() {
        return Err(Error::Range {
            start: k,
            end: k,
            len: traj.events.len(),
        });
    }
    Ok(advances_of(&traj.events, 0, w, params)?.values[k])
}

/// A nonsingular segment is sufficient iff its neutral space is spanned by the
/// velocity alone.
pub fn is_sufficient<T: Real>(traj: &Trajectory<T>, params: &SystemParams<T>) -> Result<(bool, NeutralResult<T>)> {
    let result = neutral_space(traj, params)?;
    Ok((result.is_sufficient(), result))
}

/// Verdict for a segment through one double collision.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchVerdict<T> {
    pub sufficient: bool,
    pub branches: Vec<NeutralResult<T>>,
}

/// Sufficiency of a trajectory that halted at a double collision: every
/// continuation is extended by `extend_events` further collisions and must be
/// sufficient on its own.
pub fn both_branches_sufficient<T: Real>(
    traj: &Trajectory<T>,
    extend_events: usize,
    params: &SystemParams<T>,
) -> Result<BranchVerdict<T>> {
    let Some(double) = &traj.pending_double else {
        return Err(Error::Domain("trajectory has no pending double collision".into()));
    };
    if double.contacts.len() != 2 {
        return Err(Error::UnsupportedMultiplicity(double.contacts.len()));
    }
    if let Some(flag) = traj.singular_flags.iter().find(|f| f.event != traj.events.len()) {
        return Err(Error::SingularSegment { event: flag.event });
    }
    let branches = dynamics::enumerate_branches(&traj.final_state, &double.contacts, params)?;
    let mut results = Vec::with_capacity(branches.len());
    for branch in branches {
        let ext = dynamics::simulate(&branch.state, Stop::Events(extend_events), params)?;
        if !ext.is_nonsingular() {
            let event = traj.events.len() + branch.events.len() + ext.events.len();
            return Err(Error::SingularSegment { event });
        }
        let mut events = traj.events.clone();
        events.extend(branch.events);
        events.extend(ext.events);
        results.push(neutral_space_of(&events, 0, params)?);
    }
    Ok(BranchVerdict {
        sufficient: results.iter().all(NeutralResult::is_sufficient),
        branches: results,
    })
}

/// Reruns the segment from `(Q + εW, V)` and returns
/// `‖V_end(perturbed) − V_end‖ / ε`, which is `O(ε)` for neutral `W`.
pub fn validate_neutral_fd<T: Real>(traj: &Trajectory<T>, w: &[T], eps: T, params: &SystemParams<T>) -> Result<T> {
    require_nonsingular(traj)?;
    let mut start = traj.initial.clone();
    for (q, &dw) in start.positions.iter_mut().zip(w) {
        *q = geometry::wrap_into_box(*q + eps * dw, params.box_len);
    }
    let rerun = dynamics::simulate(&start, Stop::Time(traj.duration()), params)?;
    if let Some(index) = first_mismatch(traj, &rerun) {
        return Err(Error::TopologyChange { index });
    }
    let dv: Vec<T> = rerun
        .final_state
        .velocities
        .iter()
        .zip(&traj.final_state.velocities)
        .map(|(&a, &b)| a - b)
        .collect();
    Ok(norm(&dv) / eps)
}

/// Index of the first collision where two runs disagree, if any.
pub(crate) fn first_mismatch<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Option<usize> {
    let la = &a.sequence.labels;
    let lb = &b.sequence.labels;
    if let Some(k) = la.iter().zip(lb).position(|(x, y)| x != y) {
        return Some(k);
    }
    if la.len() != lb.len() || !b.is_nonsingular() {
        return Some(la.len().min(lb.len()));
    }
    None
}
