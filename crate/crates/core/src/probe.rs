//! Statistical experiments: Liouville sampling of phase points, sufficiency
//! surveys over the outer parameters, the tangential-reflection probe and
//! inter-collision statistics.
//!
//! Every sample draws from its own ChaCha stream seeded from
//! `(master seed, sample id)`, so reports do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::dynamics::{Simulator, StepOutcome, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{self, check_admissible, torus_reduce};
use crate::neutral::{neutral_space, NeutralResult};
use crate::pair::Pair;
use crate::params::SystemParams;
use crate::state::PhaseState;
use crate::symbolic::{find_witness, RichnessCounter};
use crate::tangent::{lyapunov_spectrum, LyapunovConfig};

/// Rejections tolerated before sampling gives up.
pub const MAX_REJECTIONS: usize = 100_000;

/// Uniform ranges for the outer parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRanges {
    pub mass: (f64, f64),
    pub box_len: (f64, f64),
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws i.i.d. uniform masses and a uniform box length; radius, dimension,
/// ball count and tolerances come from `template`.
pub fn sample_parameters<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &ParamRanges,
    template: &SystemParams<f64>,
) -> Result<SystemParams<f64>> {
    let (m0, m1) = ranges.mass;
    if !(m0 > 0.0 && m0 <= m1) {
        return Err(Error::InvalidParameter {
            name: "mass range",
            reason: format!("need 0 < low ≤ high, got [{m0}, {m1}]"),
        });
    }
    let (l0, l1) = ranges.box_len;
    if !(l0 > 4.0 * template.radius && l0 <= l1) {
        return Err(Error::InvalidParameter {
            name: "box range",
            reason: format!(
                "room guard: need 4r < low ≤ high, got [{l0}, {l1}] with r = {}",
                template.radius
            ),
        });
    }
    let masses: Vec<f64> = (0..template.n_balls).map(|_| uniform(rng, ranges.mass)).collect();
    let box_len = uniform(rng, ranges.box_len);
    let mut p = SystemParams::new(template.dim, template.radius, box_len, masses)?;
    p.rank_tol = template.rank_tol;
    p.tangency_tol = template.tangency_tol;
    p.simultaneity_tol = template.simultaneity_tol;
    p.accumulation_floor = template.accumulation_floor;
    p.horizon = template.horizon;
    Ok(p)
}

/// SplitMix64 mix of a master seed and a sample id.
pub fn sample_seed(master: u64, id: u64) -> u64 {
    let mut z = master ^ id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_rng(master: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sample_seed(master, id))
}

fn packing_fraction(params: &SystemParams<f64>) -> f64 {
    let nu = params.dim as f64;
    let half = nu / 2.0;
    let unit_ball = std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half + 1.0);
    params.n_balls as f64 * unit_ball * params.radius.powf(nu) / params.box_len.powf(nu)
}

fn gaussian_velocities<R: Rng + ?Sized>(params: &SystemParams<f64>, rng: &mut R) -> Vec<f64> {
    (0..params.phase_len())
        .map(|k| {
            let z: f64 = rng.sample(StandardNormal);
            z / params.masses[k / params.dim].sqrt()
        })
        .collect()
}

fn reduce_velocities(v: &[f64], params: &SystemParams<f64>) -> Result<Vec<f64>> {
    let z = geometry::project_to_z(v, &params.masses, params.dim);
    geometry::normalize_energy(&z, &params.masses, params.dim)
}

/// Rejection sampling until `accept` holds for uniformly drawn positions.
fn sample_positions<R: Rng + ?Sized>(
    params: &SystemParams<f64>,
    rng: &mut R,
    mut fill: impl FnMut(&mut R, &mut [f64]),
) -> Result<Vec<f64>> {
    let mut q = vec![0.0; params.phase_len()];
    for _ in 0..MAX_REJECTIONS {
        fill(rng, &mut q);
        let probe = PhaseState {
            time: 0.0,
            dim: params.dim,
            positions: q.clone(),
            velocities: vec![0.0; q.len()],
        };
        if check_admissible(&probe, params) {
            return Ok(q);
        }
    }
    Err(Error::RejectionOverflow {
        attempts: MAX_REJECTIONS,
        packing_fraction: packing_fraction(params),
    })
}

/// Liouville-random phase point: positions uniform over admissible
/// configurations, velocities uniform on the reduced energy sphere.
pub fn sample_phase_point<R: Rng + ?Sized>(params: &SystemParams<f64>, rng: &mut R) -> Result<PhaseState<f64>> {
    let l = params.box_len;
    let positions = sample_positions(params, rng, |rng, q| {
        q.iter_mut().for_each(|x| *x = rng.random_range(0.0..l));
    })?;
    let velocities = reduce_velocities(&gaussian_velocities(params, rng), params)?;
    PhaseState::new(params.dim, positions, velocities)
}

/// Phase point on a tangential reflection: a uniformly chosen pair touches
/// with a uniformly random contact normal and zero normal relative velocity,
/// everything else Liouville-random. The pair is separated by a relative
/// `1e−12` so the configuration is strictly admissible.
pub fn sample_tangential_point<R: Rng + ?Sized>(
    params: &SystemParams<f64>,
    rng: &mut R,
) -> Result<(PhaseState<f64>, Pair)> {
    let (n_balls, dim, l) = (params.n_balls, params.dim, params.box_len);
    let pairs: Vec<Pair> = Pair::all(n_balls).collect();
    let pair = pairs[rng.random_range(0..pairs.len())];
    let (i, j) = (pair.lo(), pair.hi());
    let distance = 2.0 * params.radius * (1.0 + 1e-12);
    let mut normal = vec![0.0; dim];
    let positions = sample_positions(params, rng, |rng, q| {
        q.iter_mut().for_each(|x| *x = rng.random_range(0.0..l));
        let len = loop {
            normal.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            let len = crate::scalar::norm(&normal);
            if len > 1e-8 {
                break len;
            }
        };
        normal.iter_mut().for_each(|x| *x /= len);
        for c in 0..dim {
            q[j * dim + c] = geometry::wrap_into_box(q[i * dim + c] - distance * normal[c], l);
        }
    })?;
    let n = contact_normal(&positions, pair, params);
    let mut v = gaussian_velocities(params, rng);
    let (mi, mj) = (params.masses[i], params.masses[j]);
    let un: f64 = (0..dim).map(|c| (v[i * dim + c] - v[j * dim + c]) * n[c]).sum();
    for c in 0..dim {
        v[i * dim + c] -= mj / (mi + mj) * un * n[c];
        v[j * dim + c] += mi / (mi + mj) * un * n[c];
    }
    let velocities = reduce_velocities(&v, params)?;
    Ok((PhaseState::new(dim, positions, velocities)?, pair))
}

fn contact_normal(positions: &[f64], pair: Pair, params: &SystemParams<f64>) -> Vec<f64> {
    let dim = params.dim;
    let (i, j) = (pair.lo(), pair.hi());
    let d: Vec<f64> = (0..dim)
        .map(|c| positions[i * dim + c] - positions[j * dim + c])
        .collect();
    let d = torus_reduce(&d, params.box_len);
    let len = crate::scalar::norm(&d);
    d.iter().map(|x| x / len).collect()
}

/// `|⟨v_i − v_j, n⟩|` for a pair, with `n` the unit vector from `j` to `i`.
pub fn grazing_margin(state: &PhaseState<f64>, pair: Pair, params: &SystemParams<f64>) -> f64 {
    let n = contact_normal(&state.positions, pair, params);
    let (i, j) = (pair.lo(), pair.hi());
    (0..params.dim)
        .map(|c| (state.vel(i)[c] - state.vel(j)[c]) * n[c])
        .sum::<f64>()
        .abs()
}

/// How long each sampled segment is run.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentPolicy {
    pub richness_target: usize,
    pub max_events: usize,
}

impl SegmentPolicy {
    /// Target `⌈C(N)⌉`, capped at `10⁴` collisions.
    pub fn for_balls(n_balls: usize) -> Result<Self> {
        let c = crate::symbolic::threshold_c(n_balls)?;
        Ok(SegmentPolicy {
            richness_target: crate::symbolic::ceil_count(&c),
            max_events: 10_000,
        })
    }
}

/// Runs from `state` until the greedy richness reaches the target, the cap is
/// hit, or a multiple collision halts the flow.
pub fn run_until_rich(
    state: &PhaseState<f64>,
    policy: &SegmentPolicy,
    params: &SystemParams<f64>,
) -> Result<Trajectory<f64>> {
    let mut sim = Simulator::new(state.clone(), params)?;
    let mut counter = RichnessCounter::new(params.n_balls);
    while counter.count() < policy.richness_target && sim.events().len() < policy.max_events {
        match sim.step(None)? {
            StepOutcome::Collision => {
                let pair = sim.events().last().expect("collision recorded").pair;
                counter.push(pair);
            }
            StepOutcome::Multiple => break,
            StepOutcome::TimeLimit => {}
        }
    }
    sim.settle_between_collisions()?;
    Ok(sim.into_trajectory())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sufficient,
    /// Not sufficient, but the rank decision sits within a factor 10 of the
    /// threshold.
    Indeterminate,
    Counterexample,
    NotRich,
    Singular,
    Failed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Sufficient => "sufficient",
            Verdict::Indeterminate => "indeterminate",
            Verdict::Counterexample => "counterexample",
            Verdict::NotRich => "not_rich",
            Verdict::Singular => "singular",
            Verdict::Failed => "failed",
        }
    }

    /// Counted in the sufficiency rate.
    pub fn is_eligible(self) -> bool {
        matches!(
            self,
            Verdict::Sufficient | Verdict::Indeterminate | Verdict::Counterexample
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub id: u64,
    pub seed: u64,
    pub masses: Vec<f64>,
    pub box_len: f64,
    pub n_events: usize,
    pub richness: usize,
    pub witness: bool,
    pub dimension: Option<usize>,
    pub verdict: Verdict,
    pub lambda_max: Option<f64>,
    pub min_gap: f64,
    pub singular_flags: usize,
    /// Second-smallest singular value relative to the largest.
    pub second_smallest: Option<f64>,
    /// Full spectrum, kept for every non-sufficient eligible sample.
    pub singular_values: Vec<f64>,
    pub error: Option<String>,
}

/// Classifies a neutral-space result.
pub fn classify(result: &NeutralResult<f64>, rank_tol: f64) -> Verdict {
    if result.is_sufficient() {
        return Verdict::Sufficient;
    }
    let rel = result.relative_spectrum_ascending();
    match rel.get(1) {
        Some(&s) if s >= rank_tol / 10.0 => Verdict::Indeterminate,
        _ => Verdict::Counterexample,
    }
}

fn evaluate(
    id: u64,
    seed: u64,
    params: &SystemParams<f64>,
    state: &PhaseState<f64>,
    policy: &SegmentPolicy,
    lyapunov_events: usize,
) -> SampleRecord {
    let mut rec = SampleRecord {
        id,
        seed,
        masses: params.masses.clone(),
        box_len: params.box_len,
        n_events: 0,
        richness: 0,
        witness: false,
        dimension: None,
        verdict: Verdict::Failed,
        lambda_max: None,
        min_gap: f64::INFINITY,
        singular_flags: 0,
        second_smallest: None,
        singular_values: Vec::new(),
        error: None,
    };
    if let Err(e) = fill_record(&mut rec, params, state, policy, lyapunov_events) {
        log::warn!("sample {id}: {e}");
        rec.verdict = Verdict::Failed;
        rec.error = Some(e.to_string());
    }
    rec
}

fn fill_record(
    rec: &mut SampleRecord,
    params: &SystemParams<f64>,
    state: &PhaseState<f64>,
    policy: &SegmentPolicy,
    lyapunov_events: usize,
) -> Result<()> {
    let traj = run_until_rich(state, policy, params)?;
    rec.n_events = traj.events.len();
    rec.richness = traj.sequence.richness();
    rec.witness = find_witness(&traj.sequence).is_some();
    rec.min_gap = traj.min_gap;
    rec.singular_flags = traj.singular_flags.len() + usize::from(traj.pending_double.is_some());
    if lyapunov_events > 0 {
        let config = LyapunovConfig {
            n_events: lyapunov_events,
            blocks: 50.min(lyapunov_events),
            seed: rec.seed,
            ..LyapunovConfig::default()
        };
        rec.lambda_max = Some(lyapunov_spectrum(state, params, &config)?.max_exponent());
    }
    rec.verdict = if !traj.is_nonsingular() {
        Verdict::Singular
    } else if rec.richness < policy.richness_target {
        Verdict::NotRich
    } else {
        let result = neutral_space(&traj, params)?;
        rec.dimension = Some(result.dimension);
        rec.second_smallest = result.relative_spectrum_ascending().get(1).copied();
        let verdict = classify(&result, params.rank_tol);
        if verdict != Verdict::Sufficient {
            rec.singular_values = result.singular_values.clone();
        }
        verdict
    };
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurveyConfig {
    pub samples: usize,
    pub master_seed: u64,
    pub ranges: ParamRanges,
    /// Supplies `N`, `ν`, `r` and tolerances.
    pub template: SystemParams<f64>,
    pub policy: SegmentPolicy,
    /// Collisions for a `λ_max` estimate per sample; zero skips it.
    pub lyapunov_events: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurveyReport {
    pub kind: String,
    pub master_seed: u64,
    pub richness_target: usize,
    pub records: Vec<SampleRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurveySummary {
    pub samples: usize,
    pub eligible: usize,
    pub sufficient: usize,
    pub indeterminate: usize,
    pub counterexample: usize,
    pub not_rich: usize,
    pub singular: usize,
    pub failed: usize,
    /// `sufficient / eligible`; NaN without eligible samples.
    pub rate: f64,
    pub ci95: (f64, f64),
}

impl SurveyReport {
    pub fn summary(&self) -> SurveySummary {
        let count = |v: Verdict| self.records.iter().filter(|r| r.verdict == v).count();
        let sufficient = count(Verdict::Sufficient);
        let indeterminate = count(Verdict::Indeterminate);
        let counterexample = count(Verdict::Counterexample);
        let eligible = sufficient + indeterminate + counterexample;
        SurveySummary {
            samples: self.records.len(),
            eligible,
            sufficient,
            indeterminate,
            counterexample,
            not_rich: count(Verdict::NotRich),
            singular: count(Verdict::Singular),
            failed: count(Verdict::Failed),
            rate: sufficient as f64 / eligible as f64,
            ci95: clopper_pearson(sufficient, eligible, 0.95),
        }
    }

    /// Comma-separated table with a commented header block. Lists are
    /// `;`-separated inside a field.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {} report, master seed {}\n", self.kind, self.master_seed));
        out.push_str(
            "# Only rich, nonsingular segments are tested; sufficiency of singular orbits \
             has no finite-sample test and is not probed.\n",
        );
        out.push_str(
            "# columns: id, per-sample seed, masses, box length, collisions simulated, greedy \
             richness, witness found, neutral dimension, verdict, largest Lyapunov exponent, \
             smallest inter-collision time, singular flags, second-smallest relative singular \
             value, full singular spectrum (non-sufficient samples only), error\n",
        );
        out.push_str(
            "id,seed,masses,box,n_events,richness,witness,dimension,verdict,lambda_max,\
             min_gap,singular_flags,second_smallest_sv,singular_values,error\n",
        );
        let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
        for r in &self.records {
            let line = [
                r.id.to_string(),
                r.seed.to_string(),
                join(&r.masses),
                fmt(r.box_len),
                r.n_events.to_string(),
                r.richness.to_string(),
                r.witness.to_string(),
                r.dimension.map(|d| d.to_string()).unwrap_or_default(),
                r.verdict.as_str().to_string(),
                opt(r.lambda_max),
                fmt(r.min_gap),
                r.singular_flags.to_string(),
                opt(r.second_smallest),
                join(&r.singular_values),
                r.error.clone().unwrap_or_default().replace([',', '\n'], " "),
            ]
            .join(",");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// `key value` lines, followed by one audit line per non-sufficient
    /// eligible sample.
    pub fn summary_text(&self) -> String {
        let s = self.summary();
        let mut out = String::new();
        out.push_str(&format!("kind {}\nmaster_seed {}\n", self.kind, self.master_seed));
        out.push_str(&format!("richness_target {}\n", self.richness_target));
        out.push_str(&format!(
            "samples {}\neligible {}\nsufficient {}\nindeterminate {}\ncounterexample {}\n",
            s.samples, s.eligible, s.sufficient, s.indeterminate, s.counterexample
        ));
        out.push_str(&format!(
            "not_rich {}\nsingular {}\nfailed {}\n",
            s.not_rich, s.singular, s.failed
        ));
        out.push_str(&format!(
            "rate {}\nci95_low {}\nci95_high {}\n",
            fmt(s.rate),
            fmt(s.ci95.0),
            fmt(s.ci95.1)
        ));
        for r in self
            .records
            .iter()
            .filter(|r| r.verdict.is_eligible() && r.verdict != Verdict::Sufficient)
        {
            out.push_str(&format!(
                "audit id={} verdict={} dimension={} second_smallest={} spectrum={}\n",
                r.id,
                r.verdict.as_str(),
                r.dimension.unwrap_or(0),
                r.second_smallest.map(fmt).unwrap_or_default(),
                join(&r.singular_values)
            ));
        }
        out
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(";")
}

/// Exact (Clopper–Pearson) binomial interval.
pub fn clopper_pearson(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .expect("positive shape")
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .expect("positive shape")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Samples `(m⃗, L)` and a phase point per sample, runs each until rich and
/// tests sufficiency. Per-sample failures are logged and recorded.
pub fn sufficiency_survey(config: &SurveyConfig) -> SurveyReport {
    let records = (0..config.samples as u64)
        .into_par_iter()
        .map(|id| {
            let seed = sample_seed(config.master_seed, id);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let drawn = sample_parameters(&mut rng, &config.ranges, &config.template)
                .and_then(|p| sample_phase_point(&p, &mut rng).map(|s| (p, s)));
            match drawn {
                Ok((p, s)) => evaluate(id, seed, &p, &s, &config.policy, config.lyapunov_events),
                Err(e) => failed_record(id, seed, &config.template, e),
            }
        })
        .collect();
    SurveyReport {
        kind: "sufficiency".into(),
        master_seed: config.master_seed,
        richness_target: config.policy.richness_target,
        records,
    }
}

fn failed_record(id: u64, seed: u64, params: &SystemParams<f64>, e: Error) -> SampleRecord {
    log::warn!("sample {id}: {e}");
    SampleRecord {
        id,
        seed,
        masses: params.masses.clone(),
        box_len: params.box_len,
        n_events: 0,
        richness: 0,
        witness: false,
        dimension: None,
        verdict: Verdict::Failed,
        lambda_max: None,
        min_gap: f64::INFINITY,
        singular_flags: 0,
        second_smallest: None,
        singular_values: Vec::new(),
        error: Some(e.to_string()),
    }
}

/// Samples tangential-reflection points for fixed parameters and tests the
/// forward orbit of each for sufficiency once it is rich.
pub fn ansatz_probe(
    params: &SystemParams<f64>,
    samples: usize,
    master_seed: u64,
    policy: &SegmentPolicy,
) -> SurveyReport {
    let records = (0..samples as u64)
        .into_par_iter()
        .map(|id| {
            let seed = sample_seed(master_seed, id);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match sample_tangential_point(params, &mut rng) {
                Ok((s, _)) => evaluate(id, seed, params, &s, policy, 0),
                Err(e) => failed_record(id, seed, params, e),
            }
        })
        .collect();
    SurveyReport {
        kind: "ansatz".into(),
        master_seed,
        richness_target: policy.richness_target,
        records,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapStatistics {
    /// Infinite with fewer than two collisions.
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub histogram: Vec<HistogramBin>,
    pub accumulation_suspected: bool,
}

/// Inter-collision times of a trajectory. Gaps equal to within `1e−9`
/// relative fall into a single bin.
pub fn min_gap_statistics(traj: &Trajectory<f64>, bins: usize, floor: f64) -> GapStatistics {
    let gaps = traj.gaps();
    if gaps.is_empty() {
        return GapStatistics {
            min: f64::INFINITY,
            max: f64::INFINITY,
            mean: f64::NAN,
            histogram: Vec::new(),
            accumulation_suspected: false,
        };
    }
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gaps.iter().copied().fold(0.0, f64::max);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let histogram = if max - min <= 1e-9 * max || bins <= 1 {
        vec![HistogramBin {
            lo: min,
            hi: max,
            count: gaps.len(),
        }]
    } else {
        let width = (max - min) / bins as f64;
        let mut h: Vec<HistogramBin> = (0..bins)
            .map(|b| HistogramBin {
                lo: min + b as f64 * width,
                hi: if b + 1 == bins {
                    max
                } else {
                    min + (b + 1) as f64 * width
                },
                count: 0,
            })
            .collect();
        for g in &gaps {
            let b = (((g - min) / width) as usize).min(bins - 1);
            h[b].count += 1;
        }
        h
    };
    GapStatistics {
        min,
        max,
        mean,
        histogram,
        accumulation_suspected: min < floor,
    }
}
