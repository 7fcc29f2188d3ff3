//! Event-driven hard-ball flow on the torus.
//!
//! Free flight between collisions is exact; the only floating point work per
//! event is solving the contact quadratic and applying the mass-metric
//! reflection. Energy and momentum are never renormalised during a run.

use crate::error::{Error, Result};
use crate::geometry::{self, PairGeometry};
use crate::pair::Pair;
use crate::params::SystemParams;
use crate::scalar::{dot, norm, Real};
use crate::state::PhaseState;
use crate::symbolic::SymbolicSequence;

/// Drift in energy or momentum beyond this aborts a run.
pub const CONSERVATION_LIMIT: f64 = 1e-6;
/// Admissibility is re-checked every this many events.
const ADMISSIBILITY_INTERVAL: usize = 32;

/// First contact of one pair: time until contact, the lattice image through
/// which it happens and the Euclidean unit normal from `j` to `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contact<T> {
    pub tau: T,
    pub image: Vec<i64>,
    pub normal: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollisionEvent<T> {
    pub time: T,
    pub pair: Pair,
    pub image: Vec<i64>,
    pub normal: Vec<T>,
    pub v_pre: Vec<T>,
    pub v_post: Vec<T>,
    /// `|⟨v_i⁻ − v_j⁻, n⟩|`
    pub grazing_margin: T,
}

impl<T: Real> CollisionEvent<T> {
    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `v_i − v_j` for the colliding pair, before the collision.
    pub fn relative_pre(&self) -> Vec<T> {
        relative(&self.v_pre, self.pair, self.dim())
    }

    /// `v_i − v_j` for the colliding pair, after the collision.
    pub fn relative_post(&self) -> Vec<T> {
        relative(&self.v_post, self.pair, self.dim())
    }
}

pub(crate) fn relative<T: Real>(v: &[T], pair: Pair, dim: usize) -> Vec<T> {
    let (i, j) = (pair.lo(), pair.hi());
    (0..dim).map(|c| v[i * dim + c] - v[j * dim + c]).collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SingularKind {
    Tangential,
    Double,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SingularFlag {
    pub event: usize,
    pub kind: SingularKind,
}

/// Contacts that occur within `simultaneity_tol` of each other.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleCollision<T> {
    pub contacts: Vec<(Pair, Contact<T>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub initial: PhaseState<T>,
    pub events: Vec<CollisionEvent<T>>,
    pub sequence: SymbolicSequence,
    pub singular_flags: Vec<SingularFlag>,
    /// Smallest gap between consecutive collisions; infinite with fewer than two.
    pub min_gap: T,
    /// State at the end of the run. Runs stopped by event count end halfway to
    /// the next collision, so the segment never ends on a collision.
    pub final_state: PhaseState<T>,
    /// Set when the run halted at a multiple collision; `final_state` is then
    /// the state at that instant with pre-collision velocities.
    pub pending_double: Option<DoubleCollision<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn is_nonsingular(&self) -> bool {
        self.singular_flags.is_empty() && self.pending_double.is_none()
    }

    pub fn duration(&self) -> T {
        self.final_state.time - self.initial.time
    }

    /// Gaps between consecutive collisions.
    pub fn gaps(&self) -> Vec<T> {
        self.events.windows(2).map(|w| w[1].time - w[0].time).collect()
    }
}

/// When a run stops.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Stop<T> {
    /// After this many collisions, then halfway to the next one.
    Events(usize),
    /// After this much flow time.
    Time(T),
}

/// Smallest `t ∈ [0, horizon]` at which the pair makes entering contact
/// through any lattice image. `None` if there is no contact in the window.
pub fn next_pair_collision<T: Real>(
    state: &PhaseState<T>,
    pair: Pair,
    horizon: T,
    params: &SystemParams<T>,
) -> Option<Contact<T>> {
    let dim = state.dim;
    let (qi, qj) = (state.pos(pair.lo()), state.pos(pair.hi()));
    let dv = relative(&state.velocities, pair, dim);
    let dv2 = dot(&dv, &dv);
    if !(dv2 > T::zero()) {
        return None;
    }
    let l = params.box_len;
    let sigma = T::lit(2.0) * params.radius;
    let reach = sigma + horizon * dv2.sqrt();
    let dq: Vec<T> = qi.iter().zip(qj).map(|(&a, &b)| a - b).collect();

    let ranges: Vec<(i64, i64)> = dq
        .iter()
        .map(|&x| {
            let lo = ((x - reach) / l).ceil().to_i64().unwrap_or(0);
            let hi = ((x + reach) / l).floor().to_i64().unwrap_or(0);
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return None;
    }

    let mut best: Option<Contact<T>> = None;
    let mut image: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut d = vec![T::zero(); dim];
    loop {
        for c in 0..dim {
            d[c] = dq[c] - l * T::from_i64(image[c]).expect("small integer");
        }
        let b = dot(&d, &dv);
        if b < T::zero() {
            let gap = dot(&d, &d) - sigma * sigma;
            let disc = b * b - dv2 * gap;
            if disc > T::zero() {
                // smaller (entering) root in cancellation-free form
                let t = (gap / (-b + disc.sqrt())).max(T::zero());
                if t <= horizon && best.as_ref().is_none_or(|c| t < c.tau) {
                    let contact: Vec<T> = (0..dim).map(|c| d[c] + t * dv[c]).collect();
                    let len = norm(&contact);
                    let normal: Vec<T> = contact.iter().map(|&x| x / len).collect();
                    if dot(&normal, &dv) < T::zero() {
                        best = Some(Contact {
                            tau: t,
                            image: image.clone(),
                            normal,
                        });
                    }
                }
            }
        }
        // odometer over the image box
        let mut c = 0;
        loop {
            if c == dim {
                return best;
            }
            if image[c] < ranges[c].1 {
                image[c] += 1;
                break;
            }
            image[c] = ranges[c].0;
            c += 1;
        }
    }
}

/// The earliest collision among all pairs, plus every other pair colliding
/// within `simultaneity_tol` of it.
#[derive(Clone, Debug, PartialEq)]
pub struct EventDraft<T> {
    pub pair: Pair,
    pub contact: Contact<T>,
    pub simultaneous: Vec<(Pair, Contact<T>)>,
}

pub fn next_event<T: Real>(state: &PhaseState<T>, horizon: T, params: &SystemParams<T>) -> Option<EventDraft<T>> {
    let candidates: Vec<(Pair, Contact<T>)> = Pair::all(state.n_balls())
        .filter_map(|p| next_pair_collision(state, p, horizon, params).map(|c| (p, c)))
        .collect();
    let (first, _) = candidates
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, T)>, (k, (_, c))| match best {
            Some((_, t)) if t <= c.tau => best,
            _ => Some((k, c.tau)),
        })?;
    let t_min = candidates[first].1.tau;
    let simultaneous = candidates
        .iter()
        .enumerate()
        .filter(|&(k, (_, c))| k != first && c.tau - t_min <= params.simultaneity_tol)
        .map(|(_, pc)| pc.clone())
        .collect();
    let (pair, contact) = candidates[first].clone();
    Some(EventDraft {
        pair,
        contact,
        simultaneous,
    })
}

/// Elastic reflection of the pair's velocities in place. Returns the normal
/// relative speed `⟨v_i − v_j, n⟩` before the collision.
pub fn reflect<T: Real>(velocities: &mut [T], pair: Pair, normal: &[T], masses: &[T], dim: usize) -> Result<T> {
    let (i, j) = (pair.lo(), pair.hi());
    let u = (0..dim).fold(T::zero(), |acc, c| {
        acc + (velocities[i * dim + c] - velocities[j * dim + c]) * normal[c]
    });
    if !(u < T::zero()) {
        return Err(Error::NotApproaching {
            pair,
            normal_speed: u.as_f64(),
        });
    }
    let (mi, mj) = (masses[i], masses[j]);
    let two = T::lit(2.0);
    let ki = two * mj / (mi + mj) * u;
    let kj = two * mi / (mi + mj) * u;
    for c in 0..dim {
        velocities[i * dim + c] = velocities[i * dim + c] - ki * normal[c];
        velocities[j * dim + c] = velocities[j * dim + c] + kj * normal[c];
    }
    Ok(u)
}

/// Applies the elastic collision law to a copy of `state`:
/// `v_i' = v_i − 2m_j/(m_i+m_j)·⟨v_i−v_j, n⟩n`, `v_j' = v_j + 2m_i/(m_i+m_j)·⟨v_i−v_j, n⟩n`.
pub fn apply_collision<T: Real>(
    state: &PhaseState<T>,
    pair: Pair,
    normal: &[T],
    params: &SystemParams<T>,
) -> Result<PhaseState<T>> {
    let mut out = state.clone();
    reflect(&mut out.velocities, pair, normal, &params.masses, state.dim)?;
    Ok(out)
}

/// The same reflection written as `v − 2⟨v, n̂⟩ n̂` in the mass metric, where
/// `n̂` is the mass-metric unit normal of `∂C_{i,j}`.
pub fn mass_metric_reflection<T: Real>(velocities: &[T], pair: Pair, normal: &[T], params: &SystemParams<T>) -> Vec<T> {
    let dim = params.dim;
    let nhat = PairGeometry::new(pair, params).mass_unit_normal(normal, params.n_balls);
    let k = T::lit(2.0) * geometry::mass_inner(velocities, &nhat, &params.masses, dim);
    velocities.iter().zip(&nhat).map(|(&v, &n)| v - k * n).collect()
}

/// Time reversal: velocities negated, positions and time stamp kept.
pub fn reverse<T: Real>(state: &PhaseState<T>) -> PhaseState<T> {
    let mut out = state.clone();
    out.velocities.iter_mut().for_each(|v| *v = -*v);
    out
}

/// One continuation through a multiple collision.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch<T> {
    pub state: PhaseState<T>,
    /// The reflections applied, in order, all stamped with the collision time.
    pub events: Vec<CollisionEvent<T>>,
}

/// Continuations of a double collision, one per time-ordering of the two
/// contacts, duplicates removed.
///
/// Within an ordering the two contacts are alternated for as long as one of
/// them is still approaching, which resolves re-collisions inside the cluster.
pub fn enumerate_branches<T: Real>(
    state: &PhaseState<T>,
    contacts: &[(Pair, Contact<T>)],
    params: &SystemParams<T>,
) -> Result<Vec<Branch<T>>> {
    if contacts.len() > 2 {
        return Err(Error::UnsupportedMultiplicity(contacts.len()));
    }
    let dim = state.dim;
    let orders: &[[usize; 2]] = if contacts.len() == 2 {
        &[[0, 1], [1, 0]]
    } else {
        &[[0, 0]]
    };
    let mut branches: Vec<Branch<T>> = Vec::new();
    for order in orders {
        let mut v = state.velocities.clone();
        let mut events = Vec::new();
        let mut idle = 0;
        let mut step = 0;
        while idle < contacts.len() {
            if step > 64 {
                return Err(Error::Domain("collision cluster does not resolve".into()));
            }
            let (pair, contact) = &contacts[order[step % 2]];
            step += 1;
            let u = dot(&relative(&v, *pair, dim), &contact.normal);
            if u < T::zero() {
                let v_pre = v.clone();
                reflect(&mut v, *pair, &contact.normal, &params.masses, dim)?;
                events.push(CollisionEvent {
                    time: state.time,
                    pair: *pair,
                    image: contact.image.clone(),
                    normal: contact.normal.clone(),
                    v_pre,
                    v_post: v.clone(),
                    grazing_margin: u.abs(),
                });
                idle = 0;
            } else {
                idle += 1;
            }
        }
        let scale = T::one() + v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let duplicate = branches
            .iter()
            .any(|b| crate::scalar::max_abs_diff(&b.state.velocities, &v) <= T::lit(1e-12) * scale);
        if !duplicate {
            let mut s = state.clone();
            s.velocities = v;
            branches.push(Branch { state: s, events });
        }
    }
    Ok(branches)
}

/// What a single [`Simulator::step`] ended on.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Collision,
    /// Halted at a multiple collision; see [`Trajectory::pending_double`].
    Multiple,
    /// Reached the time limit without a collision.
    TimeLimit,
}

/// Incremental driver behind [`simulate`], for callers that decide when to
/// stop by inspecting the events (e.g. until a richness target is met).
pub struct Simulator<'p, T> {
    params: &'p SystemParams<T>,
    initial: PhaseState<T>,
    state: PhaseState<T>,
    events: Vec<CollisionEvent<T>>,
    labels: Vec<crate::pair::Pair>,
    flags: Vec<SingularFlag>,
    min_gap: T,
    pending: Option<DoubleCollision<T>>,
    energy0: T,
    momentum0: Vec<T>,
}

impl<'p, T: Real> Simulator<'p, T> {
    pub fn new(state0: PhaseState<T>, params: &'p SystemParams<T>) -> Result<Self> {
        state0.check_shape(params)?;
        let energy0 = state0.energy(&params.masses);
        let momentum0 = state0.momentum(&params.masses);
        Ok(Simulator {
            params,
            initial: state0.clone(),
            state: state0,
            events: Vec::new(),
            labels: Vec::new(),
            flags: Vec::new(),
            min_gap: T::infinity(),
            pending: None,
            energy0,
            momentum0,
        })
    }

    pub fn state(&self) -> &PhaseState<T> {
        &self.state
    }

    pub fn events(&self) -> &[CollisionEvent<T>] {
        &self.events
    }

    pub fn flags(&self) -> &[SingularFlag] {
        &self.flags
    }

    pub fn is_halted(&self) -> bool {
        self.pending.is_some()
    }

    fn horizon(&self) -> Option<T> {
        self.params.horizon.or_else(|| {
            let vmax = self.state.max_speed();
            (vmax > T::zero()).then(|| self.params.box_len / (T::lit(2.0) * vmax))
        })
    }

    /// Advances to the next collision, or to `time_limit` (absolute) if that
    /// comes first.
    pub fn step(&mut self, time_limit: Option<T>) -> Result<StepOutcome> {
        if self.pending.is_some() {
            return Ok(StepOutcome::Multiple);
        }
        loop {
            let remaining = time_limit.map(|tl| tl - self.state.time);
            if remaining.is_some_and(|r| r <= T::zero()) {
                return Ok(StepOutcome::TimeLimit);
            }
            let window = match (self.horizon(), remaining) {
                (Some(h), Some(r)) => h.min(r),
                (Some(h), None) => h,
                (None, Some(r)) => r,
                (None, None) => return Err(Error::ZeroVelocity),
            };
            match next_event(&self.state, window, self.params) {
                None => {
                    self.state.free_flight(window, self.params.box_len);
                    if remaining.is_some_and(|r| r <= window) {
                        if let Some(tl) = time_limit {
                            self.state.time = tl;
                        }
                        return Ok(StepOutcome::TimeLimit);
                    }
                }
                Some(draft) => return self.collide(draft),
            }
        }
    }

    fn collide(&mut self, draft: EventDraft<T>) -> Result<StepOutcome> {
        let params = self.params;
        self.state.free_flight(draft.contact.tau, params.box_len);
        let index = self.events.len();
        if !draft.simultaneous.is_empty() {
            let mut contacts = vec![(draft.pair, draft.contact)];
            contacts.extend(draft.simultaneous);
            self.flags.push(SingularFlag {
                event: index,
                kind: SingularKind::Double,
            });
            log::debug!(
                "multiple collision at t = {} ({} pairs)",
                self.state.time,
                contacts.len()
            );
            self.pending = Some(DoubleCollision { contacts });
            return Ok(StepOutcome::Multiple);
        }

        let v_pre = self.state.velocities.clone();
        let u = reflect(
            &mut self.state.velocities,
            draft.pair,
            &draft.contact.normal,
            &params.masses,
            params.dim,
        )?;
        let grazing_margin = u.abs();
        if grazing_margin < params.tangency_tol {
            self.flags.push(SingularFlag {
                event: index,
                kind: SingularKind::Tangential,
            });
        }
        if let Some(prev) = self.events.last() {
            let gap = self.state.time - prev.time;
            self.min_gap = self.min_gap.min(gap);
            if gap < params.accumulation_floor {
                return Err(Error::AccumulationSuspected {
                    event: index,
                    gap: gap.as_f64(),
                });
            }
        }
        self.events.push(CollisionEvent {
            time: self.state.time,
            pair: draft.pair,
            image: draft.contact.image,
            normal: draft.contact.normal,
            v_pre,
            v_post: self.state.velocities.clone(),
            grazing_margin,
        });
        self.labels.push(draft.pair);
        self.check_conservation(index)?;
        if index.is_multiple_of(ADMISSIBILITY_INTERVAL) {
            self.check_overlap(index)?;
        }
        Ok(StepOutcome::Collision)
    }

    fn check_conservation(&self, event: usize) -> Result<()> {
        let params = self.params;
        let de = (self.state.energy(&params.masses) - self.energy0).abs();
        let p = self.state.momentum(&params.masses);
        let dp: Vec<T> = p.iter().zip(&self.momentum0).map(|(&a, &b)| a - b).collect();
        let dp = norm(&dp);
        let limit = T::lit(CONSERVATION_LIMIT);
        if de > limit || dp > limit {
            return Err(Error::ConservationDrift {
                event,
                energy_drift: de.as_f64(),
                momentum_drift: dp.as_f64(),
            });
        }
        Ok(())
    }

    fn check_overlap(&self, event: usize) -> Result<()> {
        let params = self.params;
        if let Some((pair, d)) = geometry::closest_pair(&self.state, params) {
            let deficit = T::lit(2.0) * params.radius - d;
            if deficit > T::lit(1e-9) * params.box_len {
                return Err(Error::Overlap {
                    event,
                    pair,
                    deficit: deficit.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Moves the state halfway to the next collision so the run does not end
    /// on a collision instant.
    pub fn settle_between_collisions(&mut self) -> Result<()> {
        if self.pending.is_some() {
            return Ok(());
        }
        let Some(h) = self.horizon() else {
            return Ok(());
        };
        let tau = next_event(&self.state, h, self.params).map_or(h, |d| d.contact.tau);
        self.state.free_flight(tau * T::lit(0.5), self.params.box_len);
        Ok(())
    }

    pub fn into_trajectory(self) -> Trajectory<T> {
        let n_balls = self.params.n_balls;
        Trajectory {
            initial: self.initial,
            events: self.events,
            sequence: SymbolicSequence {
                n_balls,
                labels: self.labels,
            },
            singular_flags: self.flags,
            min_gap: self.min_gap,
            final_state: self.state,
            pending_double: self.pending,
        }
    }
}

/// Runs the flow from `state0` until `stop`, or until a multiple collision.
pub fn simulate<T: Real>(state0: &PhaseState<T>, stop: Stop<T>, params: &SystemParams<T>) -> Result<Trajectory<T>> {
    let mut sim = Simulator::new(state0.clone(), params)?;
    match stop {
        Stop::Events(n) => {
            while sim.events().len() < n {
                if sim.step(None)? == StepOutcome::Multiple {
                    return Ok(sim.into_trajectory());
                }
            }
            sim.settle_between_collisions()?;
        }
        Stop::Time(duration) => {
            let until = state0.time + duration;
            while sim.step(Some(until))? == StepOutcome::Collision {}
        }
    }
    Ok(sim.into_trajectory())
}
