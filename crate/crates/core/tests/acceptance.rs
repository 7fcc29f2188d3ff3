//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use hardballs::dynamics::{mass_metric_reflection, reflect, reverse, StepOutcome};
use hardballs::geometry::{base_radius, normalize_energy, wrap_centered};
use hardballs::io::trajectory_to_text;
use hardballs::neutral::{advances_of, neutral_space, validate_neutral_fd};
use hardballs::probe::{
    ansatz_probe, run_until_rich, sample_parameters, sample_phase_point, sample_seed, sample_tangential_point,
    sufficiency_survey, ParamRanges, SegmentPolicy, SurveyConfig, SurveyReport, Verdict,
};
use hardballs::symbolic::{find_witness, threshold_c, SymbolicSequence};
use hardballs::tangent::{
    flow_jacobian_fd, lyapunov_spectrum, symplectic_drift, tangent_jacobian, LyapunovConfig, Tangent,
};
use hardballs::{simulate, Error, Neutral, Pair, Params, Simulator, State, Stop, Traj};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.5..=2.0)).collect()
}

/// Random nonsingular segment with exactly `events` collisions, or `None`
/// when the draw runs into a singular event.
fn segment(p: &Params, rng: &mut ChaCha8Rng, events: usize) -> Option<Traj> {
    let s = sample_phase_point(p, rng).ok()?;
    let t = simulate(&s, Stop::Events(events), p).ok()?;
    (t.is_nonsingular() && t.events.len() == events).then_some(t)
}

/// Mass-metric distance of the initial velocity from the neutral space and
/// the worst deviation of its advances from 1.
fn flow_membership(t: &Traj, res: &Neutral, p: &Params) -> (f64, f64) {
    let v = &t.initial.velocities;
    let dist = res.distance_from_span(v, &p.masses, p.dim);
    let adv = advances_of(&t.events, 0, v, p).expect("advances");
    let worst = adv.values.iter().fold(0.0f64, |m, a| m.max((a - 1.0).abs()));
    (dist, worst)
}

#[derive(Default)]
struct FlowLedger {
    checked: usize,
    worst_distance: f64,
    worst_advance: f64,
}

impl FlowLedger {
    fn record(&mut self, t: &Traj, res: &Neutral, p: &Params) {
        let (d, a) = flow_membership(t, res, p);
        self.checked += 1;
        self.worst_distance = self.worst_distance.max(d);
        self.worst_advance = self.worst_advance.max(a);
    }
}

// C1
fn conservation() -> Outcome {
    let p = Params::new(3, 0.3, 5.0, vec![1.0, 2.0, 3.0]).unwrap();
    let s = sample_phase_point(&p, &mut rng(1)).unwrap();
    let start = Instant::now();
    let mut sim = Simulator::new(s, &p).unwrap();
    let (mut de, mut dp) = (0.0f64, 0.0f64);
    while sim.events().len() < 100_000 {
        match sim.step(None) {
            Ok(StepOutcome::Multiple) => return outcome(false, "multiple collision interrupted the run".into()),
            Ok(_) => {}
            Err(e) => return outcome(false, format!("run failed: {e}")),
        }
        let st = sim.state();
        de = de.max((st.energy(&p.masses) - 0.5).abs());
        dp = dp.max(st.momentum(&p.masses).iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        de <= 1e-8 && dp <= 1e-8 && secs <= 60.0,
        format!("1e5 events: max|E-1/2| = {de:.2e}, max|I| = {dp:.2e} (tol 1e-8), {secs:.1} s (limit 60)"),
    )
}

/// Eight balls on the 2×2×2 lattice of the box with a small positional
/// jitter and random velocities reduced to `I = 0`, `E = ½`.
fn lattice_point(p: &Params, r: &mut ChaCha8Rng) -> State {
    let h = p.box_len / 2.0;
    let q = (0..8usize)
        .flat_map(|k| (0..3).map(move |c| (k, c)))
        .map(|(k, c)| h * ((k >> c) & 1) as f64 + 0.25 + r.random_range(-0.005..0.005))
        .collect();
    let v: Vec<f64> = (0..24).map(|_| r.random_range(-1.0..1.0)).collect();
    State::new(3, q, normalize_energy(&v, &p.masses, 3).unwrap()).unwrap()
}

// C2: forward, reverse, forward. Roundoff grows by the per-collision
// expansion, so the round trip is run in a caged, dense regime.
fn reversibility() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let p = Params::new(3, 0.3, 1.3, random_masses(&mut r, 8)).unwrap();
        let s = lattice_point(&p, &mut r);
        let fwd = match simulate(&s, Stop::Events(100), &p) {
            Ok(t) if t.is_nonsingular() => t,
            other => return outcome(false, format!("seed {seed}: forward run unusable: {:?}", other.err())),
        };
        let back = simulate(&reverse(&fwd.final_state), Stop::Time(fwd.duration()), &p).unwrap();
        let end = reverse(&back.final_state);
        for (a, b) in end.positions.iter().zip(&s.positions) {
            worst = worst.max(wrap_centered(a - b, p.box_len).abs());
        }
        for (a, b) in end.velocities.iter().zip(&s.velocities) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst <= 1e-6,
        format!("50 seeds x 100 events (N=8, L=1.3): worst component error {worst:.2e} (tol 1e-6)"),
    )
}

// C3
fn reflection_law() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(2..=5);
        let p = Params::new(3, 0.3, 10.0, random_masses(&mut r, n)).unwrap();
        let mut v: Vec<f64> = (0..3 * n).map(|_| r.random_range(-1.0..1.0)).collect();
        let i = r.random_range(0..n);
        let j = (i + r.random_range(1..n)) % n;
        let pair = Pair::new(i, j).unwrap();
        let mut normal: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        let len = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        normal.iter_mut().for_each(|x| *x /= len);
        let (lo, hi) = (pair.lo(), pair.hi());
        let u: f64 = (0..3).map(|c| (v[lo * 3 + c] - v[hi * 3 + c]) * normal[c]).sum();
        if u > 0.0 {
            normal.iter_mut().for_each(|x| *x = -*x);
        }
        let orth = mass_metric_reflection(&v, pair, &normal, &p);
        reflect(&mut v, pair, &normal, &p.masses, 3).unwrap();
        for (a, b) in v.iter().zip(&orth) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("1e3 collisions: worst component difference {worst:.2e} (tol 1e-12)"),
    )
}

// C4: distance from a contact configuration to the generator subspace
// {q_i = q_j}, by weighted least squares in the mass metric.
fn base_radius_formula() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(2..=4);
        let dim = 3;
        let masses = random_masses(&mut r, n);
        let radius = r.random_range(0.05..1.0);
        let i = r.random_range(0..n);
        let j = (i + r.random_range(1..n)) % n;
        // a configuration on the cylinder boundary: |q_i − q_j| = 2r
        let mut x = nalgebra::DVector::from_fn(dim * n, |_, _| r.random_range(-1.0..1.0));
        let mut dir: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|d| *d *= 2.0 * radius / len);
        for c in 0..dim {
            x[i * dim + c] = x[j * dim + c] + dir[c];
        }
        // columns spanning the generator subspace
        let mut cols = Vec::new();
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            for c in 0..dim {
                cols.push(nalgebra::DVector::from_fn(dim * n, |row, _| {
                    f64::from(u8::from(row == k * dim + c))
                }));
            }
        }
        for c in 0..dim {
            cols.push(nalgebra::DVector::from_fn(dim * n, |row, _| {
                f64::from(u8::from(row == i * dim + c || row == j * dim + c))
            }));
        }
        let b = nalgebra::DMatrix::from_columns(&cols);
        let m = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim * n, |row, _| masses[row / dim]));
        let gram = b.transpose() * &m * &b;
        let coef = gram.lu().solve(&(b.transpose() * &m * &x)).unwrap();
        let rest = &x - &b * coef;
        let dist = (rest.transpose() * &m * &rest)[(0, 0)].sqrt();
        let formula = base_radius(masses[i], masses[j], radius);
        worst = worst.max((formula - dist).abs() / dist);
    }
    outcome(
        worst <= 1e-12,
        format!("100 draws: worst relative error {worst:.2e} (tol 1e-12)"),
    )
}

// C5
fn threshold_recursion() -> Outcome {
    let q = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let expect = [(2, q(1, 1)), (3, q(9, 2)), (4, q(20, 1)), (5, q(205, 2))];
    let mut bad = Vec::new();
    for (n, want) in &expect {
        let got = threshold_c(*n).unwrap();
        if got != *want {
            bad.push(format!("C({n}) = {got}, want {want}"));
        }
    }
    let shown: Vec<String> = expect
        .iter()
        .map(|(n, _)| format!("C({n})={}", threshold_c(*n).unwrap()))
        .collect();
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            shown.join(", ")
        } else {
            bad.join("; ")
        },
    )
}

/// Whether the pairs in `block` connect all `n` balls.
fn spans(n: usize, block: &[Pair]) -> bool {
    let mut comp: Vec<usize> = (0..n).collect();
    for p in block {
        let (a, b) = (comp[p.lo()], comp[p.hi()]);
        if a != b {
            comp.iter_mut().filter(|c| **c == b).for_each(|c| *c = a);
        }
    }
    comp.iter().all(|&c| c == comp[0])
}

/// Maximum number of spanning blocks over every cut set of the sequence.
fn richness_enumerated(n: usize, labels: &[Pair]) -> usize {
    if labels.is_empty() {
        return 0;
    }
    let cuts = labels.len() - 1;
    let mut best = 0;
    for mask in 0u32..(1 << cuts) {
        let (mut start, mut count) = (0, 0);
        for k in 0..labels.len() {
            if k == cuts || mask & (1 << k) != 0 {
                count += usize::from(spans(n, &labels[start..=k]));
                start = k + 1;
            }
        }
        best = best.max(count);
    }
    best
}

/// Same maximum by dynamic programming over the last cut.
fn richness_dp(n: usize, labels: &[Pair]) -> usize {
    let mut best = vec![0usize; labels.len() + 1];
    for end in 1..=labels.len() {
        best[end] = (0..end)
            .map(|start| best[start] + usize::from(spans(n, &labels[start..end])))
            .max()
            .unwrap();
    }
    best[labels.len()]
}

fn random_sequence(r: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Pair> {
    let pairs: Vec<Pair> = Pair::all(n).collect();
    (0..len).map(|_| pairs[r.random_range(0..pairs.len())]).collect()
}

// C6
fn richness_oracle() -> Outcome {
    let start = Instant::now();
    let pairs3: Vec<Pair> = Pair::all(3).collect();
    let (mut checked, mut mismatches) = (0usize, 0usize);
    for len in 0..=10u32 {
        for code in 0..3usize.pow(len) {
            let mut c = code;
            let labels: Vec<Pair> = (0..len)
                .map(|_| {
                    let p = pairs3[c % 3];
                    c /= 3;
                    p
                })
                .collect();
            let seq = SymbolicSequence::new(3, labels.clone()).unwrap();
            checked += 1;
            mismatches += usize::from(seq.richness() != richness_enumerated(3, &labels));
        }
    }
    let mut r = rng(6);
    for _ in 0..10_000 {
        let len = r.random_range(0..=20);
        let labels = random_sequence(&mut r, 4, len);
        let seq = SymbolicSequence::new(4, labels.clone()).unwrap();
        checked += 1;
        mismatches += usize::from(seq.richness() != richness_dp(4, &labels));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs <= 120.0,
        format!("{checked} sequences (all N=3 up to length 10, 1e4 random N=4): {mismatches} mismatches, {secs:.1} s (limit 120)"),
    )
}

/// Conditions (i)–(iv) of the witness, checked from scratch.
fn witness_ok(seq: &SymbolicSequence, k0: usize, p: usize, q: usize, derived_target: usize) -> Result<(), String> {
    let l = &seq.labels;
    if !(p < q && q < l.len()) {
        return Err(format!("indices p={p}, q={q} out of order"));
    }
    if !(l[p].contains(k0) && l[q].contains(k0)) {
        return Err("(i) ball missing from an end collision".into());
    }
    if (p + 1..q).any(|j| l[j].contains(k0)) {
        return Err("(ii) ball collides in between".into());
    }
    if l[p] == l[q] && !(p + 1..q).any(|j| l[j].meets(l[p])) {
        return Err("(iii) repeated pair with no intermediate contact".into());
    }
    let shift = |x: usize| if x > k0 { x - 1 } else { x };
    let reduced: Vec<Pair> = l
        .iter()
        .filter(|e| !e.contains(k0))
        .map(|e| Pair::new(shift(e.lo()), shift(e.hi())).unwrap())
        .collect();
    let rich = richness_dp(seq.n_balls - 1, &reduced);
    if rich < derived_target {
        return Err(format!("(iv) derived richness {rich} < {derived_target}"));
    }
    Ok(())
}

// C7
fn witness_validator() -> Outcome {
    let mut r = rng(7);
    // ⌈C(N)⌉ and ⌈2C(N−1)+1⌉ for N = 3, 4
    let cases = [(3usize, 5usize, 3usize, 10..60usize), (4, 20, 10, 120..400)];
    let (mut tested, mut failures) = (0usize, Vec::new());
    for (n, target, derived, lens) in cases {
        let mut got = 0;
        while got < 500 {
            let len = r.random_range(lens.clone());
            let seq = SymbolicSequence::new(n, random_sequence(&mut r, n, len)).unwrap();
            if seq.richness() < target {
                continue;
            }
            got += 1;
            tested += 1;
            match find_witness(&seq) {
                None => failures.push(format!("N={n}: no witness for a rich sequence")),
                Some(w) => {
                    if let Err(e) = witness_ok(&seq, w.ball, w.p, w.q, derived) {
                        failures.push(format!("N={n}: {e}"));
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{tested} rich sequences (500 N=3, 500 N=4): {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

struct NeutralCase {
    traj: Traj,
    params: Params,
    result: Neutral,
}

/// 100 N=2 segments with one or two collisions at L=2.
fn base_case_segments() -> Vec<NeutralCase> {
    let mut r = rng(8);
    let mut out = Vec::new();
    while out.len() < 100 {
        let p = Params::new(3, 0.3, 2.0, random_masses(&mut r, 2)).unwrap();
        let events = r.random_range(1..=2);
        if let Some(traj) = segment(&p, &mut r, events) {
            let result = neutral_space(&traj, &p).unwrap();
            out.push(NeutralCase {
                traj,
                params: p,
                result,
            });
        }
    }
    out
}

/// 20 N=3 segments with one to five collisions at L=1.5.
fn three_ball_segments() -> Vec<NeutralCase> {
    let mut r = rng(9);
    let mut out = Vec::new();
    while out.len() < 20 {
        let p = Params::new(3, 0.3, 1.5, random_masses(&mut r, 3)).unwrap();
        let events = r.random_range(1..=5);
        if let Some(traj) = segment(&p, &mut r, events) {
            let result = neutral_space(&traj, &p).unwrap();
            out.push(NeutralCase {
                traj,
                params: p,
                result,
            });
        }
    }
    out
}

// C8
fn base_case(cases: &[NeutralCase], flow: &mut FlowLedger) -> Outcome {
    let ones = cases.iter().filter(|c| c.result.dimension == 1).count();
    for c in cases {
        flow.record(&c.traj, &c.result, &c.params);
    }
    let events: usize = cases.iter().map(|c| c.traj.events.len()).sum();
    outcome(
        ones == cases.len(),
        format!(
            "{ones}/{} N=2 segments ({events} collisions) have dimension 1",
            cases.len()
        ),
    )
}

// C9
fn neutral_fd(groups: &[&[NeutralCase]], flow: &mut FlowLedger) -> Outcome {
    let (mut vectors, mut worst6, mut worst5, mut errors) = (0usize, 0.0f64, 0.0f64, Vec::new());
    for cases in groups {
        for c in cases.iter() {
            flow.record(&c.traj, &c.result, &c.params);
            for w in &c.result.basis {
                vectors += 1;
                match (
                    validate_neutral_fd(&c.traj, w, 1e-6, &c.params),
                    validate_neutral_fd(&c.traj, w, 1e-5, &c.params),
                ) {
                    (Ok(a), Ok(b)) => {
                        worst6 = worst6.max(a);
                        worst5 = worst5.max(b / 10.0);
                    }
                    (Err(e), _) | (_, Err(e)) => errors.push(e.to_string()),
                }
            }
        }
    }
    outcome(
        errors.is_empty() && worst6 <= 1e-5 && worst5 <= 1e-5,
        format!(
            "{vectors} basis vectors: worst residual {worst6:.2e} at eps=1e-6, worst residual/(eps/1e-6) {worst5:.2e} at eps=1e-5 (tol 1e-5), {} errors",
            errors.len()
        ),
    )
}

/// The segments the survey and the ansatz probe analyse, regenerated from
/// their per-sample seeds.
fn survey_segments(config: &SurveyConfig, flow: &mut FlowLedger) {
    for id in 0..config.samples as u64 {
        let mut r = rng(sample_seed(config.master_seed, id));
        let Ok(p) = sample_parameters(&mut r, &config.ranges, &config.template) else {
            continue;
        };
        let Ok(s) = sample_phase_point(&p, &mut r) else {
            continue;
        };
        record_rich(&s, &config.policy, &p, flow);
    }
}

fn ansatz_segments(p: &Params, samples: usize, master: u64, policy: &SegmentPolicy, flow: &mut FlowLedger) {
    for id in 0..samples as u64 {
        let mut r = rng(sample_seed(master, id));
        if let Ok((s, _)) = sample_tangential_point(p, &mut r) {
            record_rich(&s, policy, p, flow);
        }
    }
}

fn record_rich(s: &State, policy: &SegmentPolicy, p: &Params, flow: &mut FlowLedger) {
    if let Ok(t) = run_until_rich(s, policy, p) {
        if t.is_nonsingular() && t.sequence.richness() >= policy.richness_target {
            if let Ok(res) = neutral_space(&t, p) {
                flow.record(&t, &res, p);
            }
        }
    }
}

// C10
fn flow_direction(flow: &FlowLedger) -> Outcome {
    outcome(
        flow.checked > 0 && flow.worst_distance <= 1e-8 && flow.worst_advance <= 1e-8,
        format!(
            "{} neutral spaces: worst distance of V from span {:.2e}, worst |advance-1| {:.2e} (tol 1e-8)",
            flow.checked, flow.worst_distance, flow.worst_advance
        ),
    )
}

fn audited(report: &SurveyReport) -> bool {
    report.records.iter().all(|r| match r.verdict {
        Verdict::Indeterminate | Verdict::Counterexample => {
            !r.singular_values.is_empty() && r.second_smallest.is_some()
        }
        _ => true,
    })
}

fn survey_config() -> SurveyConfig {
    SurveyConfig {
        samples: 200,
        master_seed: 2011,
        ranges: ParamRanges {
            mass: (0.5, 2.0),
            box_len: (4.0, 8.0),
        },
        template: Params::new(3, 0.3, 4.0, vec![1.0; 3]).unwrap(),
        policy: SegmentPolicy::for_balls(3).unwrap(),
        lyapunov_events: 0,
    }
}

// C11
fn survey(config: &SurveyConfig) -> Outcome {
    let start = Instant::now();
    let report = sufficiency_survey(config);
    let secs = start.elapsed().as_secs_f64();
    let s = report.summary();
    outcome(
        s.eligible > 0 && s.rate >= 0.99 && audited(&report) && secs <= 1800.0,
        format!(
            "{}/{} eligible sufficient (rate {:.3}, 95% CI [{:.3}, {:.3}], target 0.99); indeterminate {}, counterexample {}, not rich {}, singular {}, failed {}; {secs:.1} s",
            s.sufficient, s.eligible, s.rate, s.ci95.0, s.ci95.1, s.indeterminate, s.counterexample, s.not_rich, s.singular, s.failed
        ),
    )
}

// C12
fn tangent_map() -> Outcome {
    let mut r = rng(12);
    let (mut worst, mut redraws, mut done) = (0.0f64, 0usize, 0usize);
    let regimes = [(2usize, 2.0, 4usize), (3, 1.3, 8)];
    for (n, l, max_events) in regimes {
        let mut got = 0;
        while got < 10 {
            let p = Params::new(3, 0.3, l, random_masses(&mut r, n)).unwrap();
            let events = r.random_range(1..=max_events);
            let Some(t) = segment(&p, &mut r, events) else { continue };
            let j = tangent_jacobian(&t, &p).unwrap();
            match flow_jacobian_fd(&t.initial, t.duration(), 1e-6, &p) {
                Ok(fd) => {
                    worst = worst.max(j.sub(&fd).op_norm() / fd.op_norm());
                    got += 1;
                    done += 1;
                }
                Err(Error::TopologyChange { .. }) => redraws += 1,
                Err(e) => return outcome(false, format!("FD Jacobian failed: {e}")),
            }
        }
    }
    outcome(
        worst <= 1e-4,
        format!("{done} segments (N=2 and N=3, up to 8 collisions): worst relative operator-norm error {worst:.2e} (tol 1e-4), {redraws} redraws"),
    )
}

// C13
fn symplectic_and_lyapunov() -> Outcome {
    let p = Params::new(3, 0.3, 2.0, vec![1.0, 1.37, 1.74]).unwrap();
    let mut r = rng(13);
    let s = sample_phase_point(&p, &mut r).unwrap();
    let t = simulate(&s, Stop::Events(1000), &p).unwrap();
    let mut draw = || Tangent {
        dq: (0..9).map(|_| r.random_range(-1.0..1.0)).collect(),
        dv: (0..9).map(|_| r.random_range(-1.0..1.0)).collect(),
    };
    let pair = [draw(), draw()];
    let drift = symplectic_drift(&t, pair, &p).unwrap();
    let per_event = drift.per_event.iter().fold(0.0f64, |m, &x| m.max(x));

    let p2 = Params::new(3, 0.5, 5.0, vec![1.0, 1.0]).unwrap();
    let s2 = sample_phase_point(&p2, &mut rng(7)).unwrap();
    let config = LyapunovConfig {
        n_events: 10_000,
        seed: 7,
        ..LyapunovConfig::default()
    };
    let spectrum = lyapunov_spectrum(&s2, &p2, &config).unwrap();
    let worst_pair = spectrum
        .pair_sums
        .iter()
        .zip(&spectrum.pair_sum_errors)
        .fold(0.0f64, |m, (s, e)| m.max(s.abs() / e));
    let pass = per_event <= 1e-8 && drift.accumulated <= 1e-5 && spectrum.ci_low[0] > 0.0 && spectrum.is_paired(2.0);
    outcome(
        pass,
        format!(
            "defect per event {per_event:.2e} (tol 1e-8), over 1e3 events {:.2e} (tol 1e-5); lambda_max {:.4} CI [{:.4}, {:.4}], worst |pair sum|/SE {worst_pair:.2} (tol 2), {} events",
            drift.accumulated, spectrum.exponents[0], spectrum.ci_low[0], spectrum.ci_high[0], spectrum.n_events
        ),
    )
}

fn ansatz_params() -> Params {
    Params::new(3, 0.3, 5.0, vec![1.0, 1.5, 2.0]).unwrap()
}

// C14
fn ansatz() -> Outcome {
    let policy = SegmentPolicy::for_balls(3).unwrap();
    let report = ansatz_probe(&ansatz_params(), 100, 2014, &policy);
    let s = report.summary();
    outcome(
        s.eligible > 0 && s.rate >= 0.95 && audited(&report),
        format!(
            "{}/{} rich nonsingular continuations sufficient (rate {:.3}, target 0.95); not rich {}, singular {}, failed {}",
            s.sufficient, s.eligible, s.rate, s.not_rich, s.singular, s.failed
        ),
    )
}

// C15
fn reproducibility() -> Outcome {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let produce = |tag: &str| -> Vec<Vec<u8>> {
        let p = Params::new(3, 0.3, 5.0, vec![1.0, 2.0, 3.0]).unwrap();
        let s = sample_phase_point(&p, &mut rng(15)).unwrap();
        let t = simulate(&s, Stop::Events(2000), &p).unwrap();
        let mut config = survey_config();
        config.samples = 20;
        let report = sufficiency_survey(&config);
        let files = [
            ("trajectory", trajectory_to_text(&p, &t)),
            ("survey.csv", report.to_csv()),
            ("survey.summary", report.summary_text()),
        ];
        files
            .iter()
            .map(|(name, text)| {
                let path = dir.join(format!("{name}.{tag}"));
                std::fs::write(&path, text).unwrap();
                std::fs::read(&path).unwrap()
            })
            .collect()
    };
    let (a, b) = (produce("first"), produce("second"));
    let same = a == b;
    let bytes: usize = a.iter().map(Vec::len).sum();
    outcome(
        same,
        format!("trajectory, survey CSV and summary: {bytes} bytes, identical = {same}"),
    )
}

fn main() {
    let mut flow = FlowLedger::default();
    let base = base_case_segments();
    let three = three_ball_segments();
    let config = survey_config();

    let mut rows: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut check = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        rows.push((id, name, o, start.elapsed().as_secs_f64()));
        let (id, name, o, secs) = rows.last().unwrap();
        println!(
            "C{id:<2} {} {name}: {} [{secs:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    check(1, "conservation", &mut conservation);
    check(2, "reversibility", &mut reversibility);
    check(3, "reflection law", &mut reflection_law);
    check(4, "base radius", &mut base_radius_formula);
    check(5, "C(N) recursion", &mut threshold_recursion);
    check(6, "richness oracle", &mut richness_oracle);
    check(7, "witness validator", &mut witness_validator);
    check(8, "neutral base case", &mut || base_case(&base, &mut flow));
    check(9, "neutral FD validation", &mut || {
        neutral_fd(&[&base, &three], &mut flow)
    });
    check(11, "sufficiency survey", &mut || survey(&config));
    check(12, "tangent map vs FD", &mut tangent_map);
    check(13, "symplectic defect and Lyapunov", &mut symplectic_and_lyapunov);
    check(14, "ansatz probe", &mut ansatz);
    check(15, "reproducibility", &mut reproducibility);
    survey_segments(&config, &mut flow);
    ansatz_segments(
        &ansatz_params(),
        100,
        2014,
        &SegmentPolicy::for_balls(3).unwrap(),
        &mut flow,
    );
    check(10, "flow-direction membership", &mut || flow_direction(&flow));

    let failed: Vec<usize> = rows.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass",
        rows.len() - failed.len(),
        rows.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
