//! Linearised flow: tangent propagation through free flights and collisions,
//! a finite-difference Jacobian oracle, the mass-weighted symplectic form and
//! Lyapunov spectra.
//!
//! Tangent vectors are pairs `(δq, δv)` of `νN`-vectors in the unfactorised
//! coordinates. Uniform translations are not quotiented out, so a Lyapunov
//! spectrum on the energy shell carries `ν + 1` zero exponents: `ν` from
//! translations and one from the flow direction.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{self, CollisionEvent, Simulator, StepOutcome, Stop, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{self, mass_inner, wrap_centered, z_basis};
use crate::linalg::{gram_schmidt, Mat};
use crate::neutral::first_mismatch;
use crate::params::SystemParams;
use crate::scalar::Real;
use crate::state::PhaseState;

/// One tangent vector `(δq, δv)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent<T> {
    pub dq: Vec<T>,
    pub dv: Vec<T>,
}

impl<T: Real> Tangent<T> {
    pub fn zeros(len: usize) -> Self {
        Tangent {
            dq: vec![T::zero(); len],
            dv: vec![T::zero(); len],
        }
    }

    /// Mass-metric inner product on both halves.
    pub fn inner(&self, other: &Tangent<T>, masses: &[T], dim: usize) -> T {
        mass_inner(&self.dq, &other.dq, masses, dim) + mass_inner(&self.dv, &other.dv, masses, dim)
    }

    fn flat(&self) -> Vec<T> {
        self.dq.iter().chain(&self.dv).copied().collect()
    }

    fn from_flat(x: Vec<T>) -> Self {
        let half = x.len() / 2;
        let mut dq = x;
        let dv = dq.split_off(half);
        Tangent { dq, dv }
    }
}

/// Tangent vectors attached to a base point of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame<T> {
    pub base: PhaseState<T>,
    pub vectors: Vec<Tangent<T>>,
}

impl<T: Real> TangentFrame<T> {
    /// Largest violation of `Σ m_i δv_i = 0` and `⟨v, δv⟩_m = 0` over the frame.
    pub fn constraint_defect(&self, params: &SystemParams<T>) -> T {
        let dim = params.dim;
        self.vectors.iter().fold(T::zero(), |acc, t| {
            let p = geometry::momentum(&t.dv, &params.masses, dim);
            let pm = p.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
            let e = mass_inner(&self.base.velocities, &t.dv, &params.masses, dim).abs();
            acc.max(pm).max(e)
        })
    }

    /// Orthonormal basis of the tangent space of `{E = ½, I = 0}` at `base`:
    /// all of `δq`, and `δv ∈ 𝒵` mass-orthogonal to `v`.
    pub fn reduced_basis(base: PhaseState<T>, params: &SystemParams<T>) -> Self {
        let dim = params.dim;
        let len = params.phase_len();
        let masses = &params.masses;
        let mut vectors = Vec::with_capacity(len + params.config_dim() - 1);
        for k in 0..len {
            let mut t = Tangent::zeros(len);
            t.dq[k] = T::one() / masses[k / dim].sqrt();
            vectors.push(t);
        }
        let inner = |a: &[T], b: &[T]| mass_inner(a, b, masses, dim);
        let mut candidates = vec![base.velocities.clone()];
        candidates.extend(z_basis(masses, dim));
        let dvs = gram_schmidt(candidates, params.config_dim(), inner);
        for dv in dvs.into_iter().skip(1) {
            vectors.push(Tangent {
                dq: vec![T::zero(); len],
                dv,
            });
        }
        TangentFrame { base, vectors }
    }
}

/// Linearised free flight: `δq ← δq + τ δv`. The base point flies too.
pub fn tangent_step_free<T: Real>(frame: &mut TangentFrame<T>, tau: T, box_len: T) {
    frame.base.free_flight(tau, box_len);
    for t in &mut frame.vectors {
        for (q, &v) in t.dq.iter_mut().zip(&t.dv) {
            *q = *q + tau * v;
        }
    }
}

/// Derivative of the collision map at `event`, applied to one tangent vector
/// given at the collision instant with pre-collision velocities.
pub fn tangent_collision_vector<T: Real>(
    t: &mut Tangent<T>,
    event: &CollisionEvent<T>,
    index: usize,
    params: &SystemParams<T>,
) -> Result<()> {
    let dim = params.dim;
    let (i, j) = (event.pair.lo(), event.pair.hi());
    let n = &event.normal;
    let two = T::lit(2.0);
    let rel = event.relative_pre();
    let u: T = (0..dim).fold(T::zero(), |a, c| a + rel[c] * n[c]);
    if u.abs() < params.tangency_tol {
        return Err(Error::GrazingEvent {
            index,
            normal_speed: u.as_f64(),
        });
    }
    let (mi, mj) = (params.masses[i], params.masses[j]);
    let mu_i = two * mj / (mi + mj);
    let mu_j = two * mi / (mi + mj);

    let dq_rel: Vec<T> = (0..dim).map(|c| t.dq[i * dim + c] - t.dq[j * dim + c]).collect();
    let dv_rel: Vec<T> = (0..dim).map(|c| t.dv[i * dim + c] - t.dv[j * dim + c]).collect();
    let dtau = -(0..dim).fold(T::zero(), |a, c| a + dq_rel[c] * n[c]) / u;
    let diameter = two * params.radius;
    let dn: Vec<T> = (0..dim).map(|c| (dq_rel[c] + dtau * rel[c]) / diameter).collect();
    let du = (0..dim).fold(T::zero(), |a, c| a + dv_rel[c] * n[c] + rel[c] * dn[c]);

    for c in 0..dim {
        let kick = du * n[c] + u * dn[c];
        t.dq[i * dim + c] = t.dq[i * dim + c] + dtau * mu_i * u * n[c];
        t.dq[j * dim + c] = t.dq[j * dim + c] - dtau * mu_j * u * n[c];
        t.dv[i * dim + c] = t.dv[i * dim + c] - mu_i * kick;
        t.dv[j * dim + c] = t.dv[j * dim + c] + mu_j * kick;
    }
    Ok(())
}

/// Propagates the frame through `event`, whose time must equal the base time.
pub fn tangent_step_collision<T: Real>(
    frame: &mut TangentFrame<T>,
    event: &CollisionEvent<T>,
    index: usize,
    params: &SystemParams<T>,
) -> Result<()> {
    for t in &mut frame.vectors {
        tangent_collision_vector(t, event, index, params)?;
    }
    frame.base.velocities.clone_from(&event.v_post);
    Ok(())
}

/// Propagates a frame along a recorded trajectory from its initial state to
/// its final state.
pub fn propagate_along<T: Real>(
    traj: &Trajectory<T>,
    vectors: Vec<Tangent<T>>,
    params: &SystemParams<T>,
) -> Result<TangentFrame<T>> {
    if let Some(flag) = traj.singular_flags.first() {
        return Err(Error::SingularSegment { event: flag.event });
    }
    let mut frame = TangentFrame {
        base: traj.initial.clone(),
        vectors,
    };
    for (k, e) in traj.events.iter().enumerate() {
        let tau = e.time - frame.base.time;
        tangent_step_free(&mut frame, tau, params.box_len);
        tangent_step_collision(&mut frame, e, k, params)?;
    }
    let tau = traj.final_state.time - frame.base.time;
    tangent_step_free(&mut frame, tau, params.box_len);
    Ok(frame)
}

/// Composed tangent map of the whole trajectory as a `2νN × 2νN` matrix in
/// the coordinates `(δq, δv)`.
pub fn tangent_jacobian<T: Real>(traj: &Trajectory<T>, params: &SystemParams<T>) -> Result<Mat<T>> {
    let len = params.phase_len();
    let unit = (0..2 * len).map(|k| {
        let mut x = vec![T::zero(); 2 * len];
        x[k] = T::one();
        Tangent::from_flat(x)
    });
    let frame = propagate_along(traj, unit.collect(), params)?;
    let cols: Vec<Vec<T>> = frame.vectors.iter().map(Tangent::flat).collect();
    Ok(Mat::from_columns(&cols))
}

/// Central-difference Jacobian of `x ↦ S^T x` in the coordinates `(q, v)`,
/// with position differences reduced on the torus.
pub fn flow_jacobian_fd<T: Real>(
    state: &PhaseState<T>,
    duration: T,
    eps: T,
    params: &SystemParams<T>,
) -> Result<Mat<T>> {
    let reference = dynamics::simulate(state, Stop::Time(duration), params)?;
    if let Some(flag) = reference.singular_flags.first() {
        return Err(Error::SingularSegment { event: flag.event });
    }
    let len = params.phase_len();
    let run = |k: usize, sign: T| -> Result<PhaseState<T>> {
        let mut s = state.clone();
        if k < len {
            s.positions[k] = geometry::wrap_into_box(s.positions[k] + sign * eps, params.box_len);
        } else {
            s.velocities[k - len] = s.velocities[k - len] + sign * eps;
        }
        let t = dynamics::simulate(&s, Stop::Time(duration), params)?;
        if let Some(index) = first_mismatch(&reference, &t) {
            return Err(Error::TopologyChange { index });
        }
        Ok(t.final_state)
    };
    let two_eps = T::lit(2.0) * eps;
    let mut cols = Vec::with_capacity(2 * len);
    for k in 0..2 * len {
        let plus = run(k, T::one())?;
        let minus = run(k, -T::one())?;
        let mut col = Vec::with_capacity(2 * len);
        col.extend(
            plus.positions
                .iter()
                .zip(&minus.positions)
                .map(|(&a, &b)| wrap_centered(a - b, params.box_len) / two_eps),
        );
        col.extend(
            plus.velocities
                .iter()
                .zip(&minus.velocities)
                .map(|(&a, &b)| (a - b) / two_eps),
        );
        cols.push(col);
    }
    Ok(Mat::from_columns(&cols))
}

/// `ω(u, w) = ⟨δq₁, δv₂⟩_m − ⟨δq₂, δv₁⟩_m`.
pub fn symplectic_form<T: Real>(u: &Tangent<T>, w: &Tangent<T>, masses: &[T], dim: usize) -> T {
    mass_inner(&u.dq, &w.dv, masses, dim) - mass_inner(&w.dq, &u.dv, masses, dim)
}

/// The two-form evaluated on the first two vectors of a frame.
pub fn symplectic_defect<T: Real>(frame: &TangentFrame<T>, params: &SystemParams<T>) -> Result<T> {
    if frame.vectors.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: frame.vectors.len(),
        });
    }
    Ok(symplectic_form(
        &frame.vectors[0],
        &frame.vectors[1],
        &params.masses,
        params.dim,
    ))
}

/// Change of `ω` across each collision of a trajectory, measured on a pair
/// of tangent vectors that is re-orthonormalised before every collision.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticDrift<T> {
    pub per_event: Vec<T>,
    pub accumulated: T,
}

pub fn symplectic_drift<T: Real>(
    traj: &Trajectory<T>,
    pair: [Tangent<T>; 2],
    params: &SystemParams<T>,
) -> Result<SymplecticDrift<T>> {
    let (masses, dim) = (&params.masses, params.dim);
    let mut frame = TangentFrame {
        base: traj.initial.clone(),
        vectors: pair.to_vec(),
    };
    let mut per_event = Vec::with_capacity(traj.events.len());
    for (k, e) in traj.events.iter().enumerate() {
        let tau = e.time - frame.base.time;
        tangent_step_free(&mut frame, tau, params.box_len);
        orthonormalise(&mut frame.vectors, masses, dim);
        let before = symplectic_defect(&frame, params)?;
        tangent_step_collision(&mut frame, e, k, params)?;
        let after = symplectic_defect(&frame, params)?;
        per_event.push((after - before).abs());
    }
    let accumulated = per_event.iter().fold(T::zero(), |a, &d| a + d);
    Ok(SymplecticDrift { per_event, accumulated })
}

/// Modified Gram–Schmidt in the mass metric; returns the norms removed.
fn orthonormalise<T: Real>(vectors: &mut [Tangent<T>], masses: &[T], dim: usize) -> Vec<T> {
    let mut norms = Vec::with_capacity(vectors.len());
    for k in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(k);
        let v = &mut rest[0];
        for b in done.iter() {
            let c = v.inner(b, masses, dim);
            v.dq.iter_mut().zip(&b.dq).for_each(|(x, &y)| *x = *x - c * y);
            v.dv.iter_mut().zip(&b.dv).for_each(|(x, &y)| *x = *x - c * y);
        }
        let len = v.inner(v, masses, dim).sqrt();
        v.dq.iter_mut().chain(v.dv.iter_mut()).for_each(|x| *x = *x / len);
        norms.push(len);
    }
    norms
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovConfig {
    pub n_events: usize,
    /// Re-orthonormalise every this many collisions.
    pub renorm_every: usize,
    pub blocks: usize,
    pub resamples: usize,
    /// Seeds the bootstrap and any singularity resampling.
    pub seed: u64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            n_events: 10_000,
            renorm_every: 1,
            blocks: 50,
            resamples: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSpectrum {
    /// Descending, per unit time.
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Percentile 95% bootstrap intervals.
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// `λ_k + λ_{K+1−k}` for `k ≤ K/2`, with bootstrap standard errors.
    pub pair_sums: Vec<f64>,
    pub pair_sum_errors: Vec<f64>,
    /// `ν` translations plus the flow direction.
    pub expected_zero_modes: usize,
    /// Exponents within three standard errors of zero.
    pub near_zero: usize,
    pub n_events: usize,
    pub duration: f64,
    pub renorm_every: usize,
    /// Restarts after a singular collision.
    pub resampled: usize,
}

impl LyapunovSpectrum {
    pub fn max_exponent(&self) -> f64 {
        self.exponents.first().copied().unwrap_or(f64::NAN)
    }

    /// Whether every `±` pair sums to zero within `k` standard errors.
    pub fn is_paired(&self, k: f64) -> bool {
        self.pair_sums
            .iter()
            .zip(&self.pair_sum_errors)
            .all(|(s, e)| s.abs() <= k * e)
    }

    /// Structured text: metadata lines, then one `exponent` line per value.
    pub fn to_text(&self, params: &SystemParams<f64>, seed: u64) -> String {
        let mut out = String::new();
        out.push_str(&format!("n_balls {}\nnu {}\n", params.n_balls, params.dim));
        out.push_str(&format!("radius {:.16e}\nbox {:.16e}\n", params.radius, params.box_len));
        let masses: Vec<String> = params.masses.iter().map(|m| format!("{m:.16e}")).collect();
        out.push_str(&format!("masses {}\n", masses.join(",")));
        out.push_str(&format!(
            "seed {seed}\nn_events {}\nrenorm_every {}\nduration {:.16e}\nresampled {}\n",
            self.n_events, self.renorm_every, self.duration, self.resampled
        ));
        out.push_str(&format!(
            "zero_modes expected {} (translations {} + flow 1) observed {}\n",
            self.expected_zero_modes,
            self.expected_zero_modes - 1,
            self.near_zero
        ));
        for (l, e) in self.exponents.iter().zip(&self.std_errors) {
            out.push_str(&format!("exponent {l:.16e} {e:.16e}\n"));
        }
        out
    }
}

/// Benettin estimate of the Lyapunov spectrum on the energy shell, with
/// block-bootstrap error bars.
///
/// A singular collision (grazing or multiple) is skipped by restarting from
/// the last regular state with a tiny random velocity rotation; restarts are
/// logged and counted.
pub fn lyapunov_spectrum(
    state0: &PhaseState<f64>,
    params: &SystemParams<f64>,
    config: &LyapunovConfig,
) -> Result<LyapunovSpectrum> {
    if config.renorm_every == 0 || config.blocks == 0 || config.n_events < config.blocks * config.renorm_every {
        return Err(Error::InvalidParameter {
            name: "lyapunov",
            reason: "need renorm_every ≥ 1 and at least one renormalisation per block".into(),
        });
    }
    let (masses, dim) = (&params.masses, params.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = state0.clone().normalized(params)?;
    let mut frame = TangentFrame::reduced_basis(start.clone(), params);
    let k_dim = frame.vectors.len();
    let mut sim = Simulator::new(start, params)?;
    let mut last_regular = frame.clone();

    // log growth and elapsed time per renormalisation
    let mut logs: Vec<Vec<f64>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut t_last = frame.base.time;
    let mut done = 0;
    let mut resampled = 0;
    let mut done_regular = 0;
    while done < config.n_events {
        let outcome = sim.step(None)?;
        let singular = match outcome {
            StepOutcome::Multiple => true,
            StepOutcome::Collision => sim
                .events()
                .last()
                .is_some_and(|e| e.grazing_margin < params.tangency_tol),
            StepOutcome::TimeLimit => false,
        };
        if singular {
            resampled += 1;
            log::warn!("lyapunov: singular collision after {done} events, restarting from a perturbed state");
            frame = last_regular.clone();
            done = done_regular;
            let mut v = frame.base.velocities.clone();
            for x in &mut v {
                *x += 1e-9 * (rng.random::<f64>() - 0.5);
            }
            let v = geometry::normalize_energy(&geometry::project_to_z(&v, masses, dim), masses, dim)?;
            frame.base.velocities = v;
            // keep the accumulated directions, re-projected onto the new shell
            for t in &mut frame.vectors {
                t.dv = project_shell(&t.dv, &frame.base.velocities, masses, dim);
            }
            orthonormalise(&mut frame.vectors, masses, dim);
            sim = Simulator::new(frame.base.clone(), params)?;
            continue;
        }
        let e = sim.events().last().expect("collision recorded").clone();
        let index = sim.events().len() - 1;
        let tau = e.time - frame.base.time;
        tangent_step_free(&mut frame, tau, params.box_len);
        tangent_step_collision(&mut frame, &e, index, params)?;
        frame.base.positions.clone_from(&sim.state().positions);
        // roundoff leaks δv off the shell; left alone, the leak outgrows the
        // most contracting direction after renormalisation
        for t in &mut frame.vectors {
            t.dv = project_shell(&t.dv, &frame.base.velocities, masses, dim);
        }
        done += 1;
        if done % config.renorm_every == 0 || done == config.n_events {
            let norms = orthonormalise(&mut frame.vectors, masses, dim);
            logs.push(norms.iter().map(|n| n.ln()).collect());
            times.push(frame.base.time - t_last);
            t_last = frame.base.time;
            last_regular = frame.clone();
            done_regular = done;
        }
    }

    let total_time: f64 = times.iter().sum();
    let n_r = logs.len();
    let blocks = config.blocks.min(n_r);
    let mut block_logs = vec![vec![0.0; k_dim]; blocks];
    let mut block_time = vec![0.0; blocks];
    for (r, (l, t)) in logs.iter().zip(&times).enumerate() {
        let b = r * blocks / n_r;
        block_time[b] += t;
        block_logs[b].iter_mut().zip(l).for_each(|(a, x)| *a += x);
    }
    let estimate = |idx: &[usize]| -> Vec<f64> {
        let time: f64 = idx.iter().map(|&b| block_time[b]).sum();
        let mut s = vec![0.0; k_dim];
        for &b in idx {
            s.iter_mut().zip(&block_logs[b]).for_each(|(a, x)| *a += x);
        }
        let mut lam: Vec<f64> = s.iter().map(|x| x / time).collect();
        lam.sort_by(|a, b| b.total_cmp(a));
        lam
    };
    let all: Vec<usize> = (0..blocks).collect();
    let exponents = estimate(&all);
    let half = k_dim / 2;
    let mut reps: Vec<Vec<f64>> = Vec::with_capacity(config.resamples);
    for _ in 0..config.resamples {
        let idx: Vec<usize> = (0..blocks).map(|_| *all.choose(&mut rng).expect("blocks")).collect();
        reps.push(estimate(&idx));
    }
    let sd = |f: &dyn Fn(&Vec<f64>) -> f64| -> f64 {
        let xs: Vec<f64> = reps.iter().map(f).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0).max(1.0)).sqrt()
    };
    let pct = |k: usize, q: f64| -> f64 {
        let mut xs: Vec<f64> = reps.iter().map(|r| r[k]).collect();
        xs.sort_by(f64::total_cmp);
        let pos = (q * (xs.len() - 1) as f64).round() as usize;
        xs[pos]
    };
    let std_errors: Vec<f64> = (0..k_dim).map(|k| sd(&|r: &Vec<f64>| r[k])).collect();
    let ci_low = (0..k_dim).map(|k| pct(k, 0.025)).collect();
    let ci_high = (0..k_dim).map(|k| pct(k, 0.975)).collect();
    let pair_sums = (0..half).map(|k| exponents[k] + exponents[k_dim - 1 - k]).collect();
    let pair_sum_errors = (0..half).map(|k| sd(&|r: &Vec<f64>| r[k] + r[k_dim - 1 - k])).collect();
    let near_zero = exponents
        .iter()
        .zip(&std_errors)
        .filter(|(l, e)| l.abs() <= 3.0 * **e)
        .count();
    Ok(LyapunovSpectrum {
        exponents,
        std_errors,
        ci_low,
        ci_high,
        pair_sums,
        pair_sum_errors,
        expected_zero_modes: dim + 1,
        near_zero,
        n_events: done,
        duration: total_time,
        renorm_every: config.renorm_every,
        resampled,
    })
}

fn project_shell(dv: &[f64], v: &[f64], masses: &[f64], dim: usize) -> Vec<f64> {
    let z = geometry::project_to_z(dv, masses, dim);
    let c = mass_inner(&z, v, masses, dim) / mass_inner(v, v, masses, dim);
    z.iter().zip(v).map(|(a, b)| a - c * b).collect()
}
