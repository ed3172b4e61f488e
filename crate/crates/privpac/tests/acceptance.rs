//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.
//!
//! Run with `cargo test -p privpac --test acceptance -- --nocapture --test-threads=1` to see
//! the lines in order.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use privpac::choosing::{choose, min_sample, ChooseParams, PointHistogram};
use privpac::domain::{
    generalization_error, Concept, ConceptClass, Database, FiniteDistribution, LabeledSample,
};
use privpac::harness::{
    build_case, gen_distribution, run_pac_experiment, summarize, wilson_interval, Config,
    DistributionSpec, LearnerKind, PacConfig, Sampler,
};
use privpac::learners::{
    learn_label_private, learn_point, plan_label_private, point_learner_sample_size, LearnerParams,
    PointFallback, RectangleKnobs,
};
use privpac::parallel::map_trials;
use privpac::privacy::{a_dist_index, exponential_mechanism_index, laplace};
use privpac::recconcave::{
    interval_quality, log_star, min_promise, rec_concave, step_quality, step_quality_at,
    QuasiConcaveProblem, StepFunction,
};
use privpac::reductions::{
    learn_from_sanitizer, BlockPlan, Census, Contract, FixedSize, LabelSanitizer, PointsSanitizer,
    Sanitized, Sanitizer,
};
use privpac::sanitizers::{
    max_point_error, max_threshold_error, san_points, san_points_min_sample, san_points_rounds,
    san_thresholds, san_thresholds_calls, san_thresholds_min_sample, SanitizerParams,
};
use privpac::{Randomness, Result};

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("[{verdict}] criterion {id:>2} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

#[test]
fn criterion_01_laplace_tail() {
    let start = Instant::now();
    let mut rng = Randomness::from_seed(101);
    let n = 1_000_000;
    let mut tail = 0u64;
    for _ in 0..n {
        tail += u64::from(laplace(1.0, &mut rng).unwrap().abs() > 3.0);
    }
    let freq = tail as f64 / n as f64;
    let secs = start.elapsed().as_secs_f64();
    let gap = (freq - (-3f64).exp()).abs();
    report(
        1,
        "laplace tail",
        gap <= 0.002 && secs < 5.0,
        format!("Pr[|Lap(1)|>3] = {freq:.5}, |diff| = {gap:.5}, {secs:.2}s"),
    );
}

#[test]
fn criterion_02_exponential_mechanism() {
    let start = Instant::now();
    let eps = 1.0;
    let mut setup = Randomness::from_seed(202);
    let mut worst = 0.0f64;
    for v in 0..20u64 {
        let h = 2 + setup.below(7) as usize;
        let scores: Vec<f64> = (0..h).map(|_| 6.0 * setup.uniform_open()).collect();
        let weights: Vec<f64> = scores.iter().map(|s| (eps * s / 2.0).exp()).collect();
        let z: f64 = weights.iter().sum();
        let chunks = map_trials(100, &Randomness::from_seed(2000 + v), |_, r| {
            let mut c = vec![0u64; h];
            for _ in 0..10_000 {
                c[exponential_mechanism_index(&scores, eps, r).unwrap()] += 1;
            }
            c
        });
        let mut counts = vec![0u64; h];
        for c in chunks {
            counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        let tv: f64 = counts
            .iter()
            .zip(&weights)
            .map(|(&c, w)| (c as f64 / 1e6 - w / z).abs())
            .sum::<f64>()
            / 2.0;
        worst = worst.max(tv);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "exponential mechanism",
        worst <= 0.01 && secs < 60.0,
        format!("worst TV over 20 vectors = {worst:.5}, {secs:.1}s"),
    );
}

#[test]
fn criterion_03_stability_selector() {
    let (eps, delta, beta): (f64, f64, f64) = (1.0, 0.05, 0.1);
    let cutoff = (1.0 / delta).ln() / eps;
    let mut worst = 0.0f64;
    let mut rng = Randomness::from_seed(303);
    let n = 100_000;
    for gap in [0.0, 5.0, 20.0] {
        let scores = [gap, 0.0];
        let bottoms = (0..n)
            .filter(|_| {
                a_dist_index(&scores, eps, delta, &mut rng)
                    .unwrap()
                    .is_none()
            })
            .count();
        let expected = laplace_cdf(cutoff - gap, 1.0 / eps);
        worst = worst.max((bottoms as f64 / n as f64 - expected).abs());
    }
    let wide = (1.0 / (beta * delta)).ln() / eps;
    let scores = [wide, 0.0, 0.0];
    let top = (0..2000)
        .filter(|_| a_dist_index(&scores, eps, delta, &mut rng).unwrap() == Some(0))
        .count();
    let top_freq = top as f64 / 2000.0;
    report(
        3,
        "stability selector",
        worst <= 0.005 && top_freq >= 1.0 - beta,
        format!(
            "worst ⊥-probability error {worst:.4}; top frequency at gap {wide:.3} = {top_freq:.3}"
        ),
    );
}

/// Counts over `2^bits` bins drawn from random weights: one to three heavy bins over a flat
/// background.
fn random_histogram(bits: u32, m: usize, rng: &mut Randomness) -> Database {
    let size = 1u64 << bits;
    let mut w: Vec<f64> = (0..size).map(|_| rng.uniform_open()).collect();
    for _ in 0..1 + rng.below(3) {
        w[rng.below(size) as usize] += size as f64 * rng.uniform_open();
    }
    let dist = FiniteDistribution::from_weights(
        bits,
        w.into_iter()
            .enumerate()
            .map(|(i, x)| (i as u64, x))
            .collect(),
    )
    .unwrap();
    Sampler::new(dist).unwrap().database(m, rng).unwrap()
}

/// An output is α-good when it scores within `αm` of the best; ⊥ is α-good exactly when every
/// solution scores at most `αm`.
fn choose_good_rate(db: &Database, params: &ChooseParams, trials: u64, seed: u64) -> f64 {
    let hist = db.histogram();
    let opt = *hist.values().max().unwrap() as f64;
    let slack = params.alpha * db.len() as f64;
    let good = map_trials(trials, &Randomness::from_seed(seed), |_, r| {
        match choose(db, &PointHistogram, params, r).unwrap().chosen() {
            Some(x) => *hist.get(&x).unwrap_or(&0) as f64 >= opt - slack,
            None => opt <= slack,
        }
    });
    good.iter().filter(|&&g| g).count() as f64 / trials as f64
}

#[test]
fn criterion_04_choosing_mechanism() {
    let start = Instant::now();
    let a = 0.1;
    let derived = min_sample(a, a, a, a, 1).unwrap();
    // 16/(αε)·ln(16k/(αβεδ)) at α=β=ε=δ=0.1, k=1
    let oracle = (1600.0 * 160_000f64.ln()).ceil() as u64;
    assert_eq!(derived, oracle);
    let mut setup = Randomness::from_seed(404);
    let mut lines = Vec::new();
    let mut pass = true;
    for (m, params, bits) in [
        (
            1917usize,
            ChooseParams::new(a, a, a, a).unwrap().unvalidated(),
            4u32,
        ),
        (derived as usize, ChooseParams::new(a, a, a, a).unwrap(), 8),
    ] {
        let mut lowest = 1.0f64;
        for i in 0..10 {
            let db = random_histogram(bits, m, &mut setup);
            lowest = lowest.min(choose_good_rate(&db, &params, 2000, 4000 + i));
        }
        pass &= lowest >= 0.9;
        lines.push(format!("m={m}: lowest α-good rate {lowest:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "choosing mechanism utility",
        pass && secs < 120.0,
        format!("{}; {secs:.1}s", lines.join("; ")),
    );
}

/// `L(j)` by scanning every window of the quality extended to the next power of two.
fn brute_l(values: &[f64]) -> Vec<f64> {
    let t = values.len() - 1;
    let tp = t.max(1).next_power_of_two();
    let mut ext = values.to_vec();
    ext.resize(tp + 1, values[t].min(0.0));
    let lg = tp.trailing_zeros() as usize;
    let mut l: Vec<f64> = (0..=lg)
        .map(|j| {
            let w = 1usize << j;
            (0..=ext.len() - w)
                .map(|a| ext[a..a + w].iter().copied().fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    l.push(l[lg].min(0.0));
    l
}

fn brute_q(l: &[f64], r: f64, alpha: f64) -> Vec<f64> {
    (0..l.len() - 1)
        .map(|j| (l[j] - (1.0 - alpha) * r).min(r - l[j + 1]))
        .collect()
}

/// Checks every `(i, ℓ, j)` triple.
fn brute_quasi_concave(v: &[f64]) -> bool {
    (0..v.len()).all(|i| (i..v.len()).all(|l| (l..v.len()).all(|j| v[l] >= v[i].min(v[j]))))
}

fn profile_agrees(values: &[f64], r: f64, alpha: f64) -> bool {
    let q = StepFunction::from_values(values).unwrap();
    let l = brute_l(values);
    let l_ok = l
        .iter()
        .enumerate()
        .all(|(j, &v)| interval_quality(&q, j as u64).unwrap() == v);
    let expect = brute_q(&l, r, alpha);
    let q_ok = expect
        .iter()
        .enumerate()
        .all(|(j, &v)| step_quality_at(&q, j as u64, r, alpha).unwrap() == v);
    l_ok && q_ok
}

fn point_counts(range: usize, entries: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; range + 1];
    for &x in entries {
        v[x] += 1.0;
    }
    v
}

fn threshold_counts(bits: u32, pairs: &[(u64, bool)]) -> Vec<f64> {
    (0..=1u64 << bits)
        .map(|j| {
            let c = Concept::threshold(bits, j).unwrap();
            pairs.iter().filter(|&&(x, y)| c.contains(x) == y).count() as f64
        })
        .collect()
}

#[test]
fn criterion_05_recursive_core() {
    let knobs = [(1.0, 0.2), (2.0, 0.5), (3.0, 0.25)];
    let mut checked = 0u64;
    let mut ok = true;
    // point-count qualities: every multiset of at most two entries over [0, T], T < 64
    for t in 1..64usize {
        let mut dbs: Vec<Vec<usize>> = vec![vec![]];
        for a in 0..=t {
            dbs.push(vec![a]);
            for b in a..=t {
                dbs.push(vec![a, b]);
            }
        }
        for db in dbs {
            let v = point_counts(t, &db);
            for &(r, alpha) in &knobs {
                ok &= profile_agrees(&v, r, alpha);
                checked += 1;
            }
        }
    }
    // agreement qualities of labeled samples: every sequence of small length
    for (bits, max_m) in [(2u32, 4usize), (3, 3), (4, 2), (6, 2)] {
        let labeled: Vec<(u64, bool)> = (0..1u64 << bits)
            .flat_map(|x| [(x, false), (x, true)])
            .collect();
        let mut frontier: Vec<Vec<(u64, bool)>> = vec![vec![]];
        for _ in 0..max_m {
            frontier = frontier
                .iter()
                .flat_map(|s| {
                    labeled.iter().map(move |&p| {
                        let mut n = s.clone();
                        n.push(p);
                        n
                    })
                })
                .collect();
            for s in &frontier {
                let v = threshold_counts(bits, s);
                ok &= profile_agrees(&v, s.len() as f64, 0.25);
                checked += 1;
            }
        }
    }
    // larger random instances
    let mut rng = Randomness::from_seed(505);
    for _ in 0..1000 {
        let t = 65 + rng.below(960) as usize;
        let m = 1 + rng.below(300) as usize;
        let v = if rng.below(2) == 0 {
            point_counts(
                t,
                &(0..m)
                    .map(|_| rng.below(t as u64 + 1) as usize)
                    .collect::<Vec<_>>(),
            )
        } else {
            (0..=t).map(|_| rng.below(12) as f64 - 3.0).collect()
        };
        ok &= profile_agrees(
            &v,
            1.0 + rng.below(8) as f64,
            0.1 + 0.4 * rng.uniform_open(),
        );
        checked += 1;
    }
    // quasi-concavity of the step quality on arbitrary inputs
    let mut concave = 0;
    for _ in 0..1000 {
        let t = 1 + rng.below(64) as usize;
        let v: Vec<f64> = (0..=t).map(|_| rng.below(14) as f64 - 4.0).collect();
        let s = step_quality(
            &StepFunction::from_values(&v).unwrap(),
            1.0 + rng.below(8) as f64,
            0.1 + 0.4 * rng.uniform_open(),
        );
        concave += usize::from(brute_quasi_concave(&s.to_dense()));
    }
    report(
        5,
        "recursive optimizer core",
        ok && concave == 1000,
        format!("{checked} profiles match brute force: {ok}; quasi-concave step qualities {concave}/1000"),
    );
}

#[test]
fn criterion_06_recursive_utility() {
    let start = Instant::now();
    let (alpha, beta, eps, delta, n) = (0.25, 0.1, 1.0, 0.01, 2);
    let t = 1u64 << 16;
    let r = min_promise(alpha, beta, eps, delta, n, t).unwrap();
    let mut setup = Randomness::from_seed(606);
    let mut lowest = 1.0f64;
    let mut deepest = 0;
    for i in 0..20u64 {
        let lo = 64 + setup.below(t - 256);
        // a flat plateau, or a plateau on a staircase that keeps the quality quasi-concave
        let q = if i % 2 == 0 {
            StepFunction::new(t, vec![0, lo, lo + 64], vec![0.0, r, 0.0]).unwrap()
        } else {
            StepFunction::new(
                t,
                vec![0, lo - 40, lo, lo + 64, lo + 100],
                vec![0.0, 0.5 * r, r, 0.3 * r, 0.0],
            )
            .unwrap()
        };
        let problem = QuasiConcaveProblem {
            quality: q.clone(),
            promise: r,
            alpha,
            budget: Some(n),
        };
        let runs = map_trials(500, &Randomness::from_seed(6000 + i), |_, rng| {
            let (j, trace) = rec_concave(&problem, eps, delta, rng).unwrap();
            (q.eval(j) >= (1.0 - alpha) * r, trace.depth())
        });
        let rate = runs.iter().filter(|x| x.0).count() as f64 / 500.0;
        lowest = lowest.min(rate);
        deepest = deepest.max(runs.iter().map(|x| x.1).max().unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "recursive optimizer utility",
        lowest >= 1.0 - beta && deepest as u32 <= log_star(t) && secs < 600.0,
        format!("promise {r:.0}; lowest success rate {lowest:.3}; deepest recursion {deepest} (log* T = {}); {secs:.1}s", log_star(t)),
    );
}

fn repo_file(rel: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn criterion_07_threshold_learner() {
    let config = Config::parse(&repo_file("configs/learn_thresholds.conf")).unwrap();
    let cfg = PacConfig::from_config(&config, 707).unwrap();
    assert_eq!((cfg.m, cfg.trials), (20_000, 200));
    let results = run_pac_experiment(&cfg).unwrap();
    let s = summarize(&results);
    let (low, _) = wilson_interval(s.successes, s.trials, 1.96);
    report(
        7,
        "threshold learner",
        s.success_rate >= 0.9 && low >= 0.85 && s.proper_rate == 1.0,
        format!(
            "success {}/{} (Wilson lower {low:.3}), proper rate {}",
            s.successes, s.trials, s.proper_rate
        ),
    );
}

#[test]
fn criterion_08_point_learner() {
    let (alpha, beta, eps, delta) = (0.2, 0.1, 1.0, 0.01);
    let m = point_learner_sample_size(alpha, beta, eps, delta);
    assert_eq!(m, (40.0 * 4000f64.ln()).ceil() as u64);
    let bits = 8;
    let target = 77u64;
    let dist = FiniteDistribution::new(
        bits,
        (0..256u64)
            .map(|x| (x, if x == target { 0.5 } else { 0.5 / 255.0 }))
            .collect(),
    )
    .unwrap();
    let concept = Concept::point(bits, target).unwrap();
    let sampler = Sampler::new(dist.clone()).unwrap();
    let params = LearnerParams::new(alpha, beta, eps, delta).unwrap();
    let good = map_trials(1000, &Randomness::from_seed(808), |_, r| {
        let s = sampler.labeled(&concept, m as usize, r).unwrap();
        let h = learn_point(&s, &params, PointFallback::RandomPoint, r)
            .unwrap()
            .hypothesis;
        generalization_error(&concept, &h, &dist).unwrap() <= alpha
    });
    let rate = good.iter().filter(|&&g| g).count() as f64 / 1000.0;
    report(
        8,
        "point learner",
        rate >= 0.9,
        format!("m = {m}; α-good rate {rate:.3}"),
    );
}

#[test]
fn criterion_09_point_sanitizer() {
    let (alpha, beta, eps, delta) = (0.3, 0.1, 1.0, 0.01);
    let m = san_points_min_sample(alpha, beta, eps, delta)
        .unwrap()
        .ceil() as usize;
    let db = Database::new(10, (0..m).map(|i| [7u64, 300][i % 2]).collect()).unwrap();
    let params = SanitizerParams::new(alpha, beta, eps, delta).unwrap();
    let rounds = san_points_rounds(alpha);
    let runs = map_trials(500, &Randomness::from_seed(909), |_, r| {
        let est = san_points(&db, &params, r).unwrap();
        (max_point_error(&db, &est) <= alpha, est.rounds.len())
    });
    let rate = runs.iter().filter(|x| x.0).count() as f64 / 500.0;
    let exact_rounds = runs.iter().all(|x| x.1 == 7);
    report(
        9,
        "point sanitizer",
        rate >= 0.9 && rounds == 7 && exact_rounds,
        format!(
            "m = {m}; accurate rate {rate:.3}; 7 selection rounds on every run: {exact_rounds}"
        ),
    );
}

#[test]
fn criterion_10_threshold_sanitizer() {
    let (alpha, beta, eps, delta) = (0.25, 0.1, 1.0, 0.01);
    let m = 5000usize;
    let bits = 16;
    let bound = san_thresholds_min_sample(alpha, beta, eps, delta, bits).unwrap();
    let gamma_c = (m as f64 - 1.0) / bound;
    let params = SanitizerParams::new(alpha, beta, eps, delta)
        .unwrap()
        .with_scale(gamma_c);
    let mixed = DistributionSpec::Blend(vec![
        (0.3, DistributionSpec::Uniform),
        (
            0.7,
            DistributionSpec::parse("mixture:100=0.5,60000=0.5").unwrap(),
        ),
    ]);
    let sampler = Sampler::new(gen_distribution(bits, &mixed).unwrap()).unwrap();
    let calls = san_thresholds_calls(alpha);
    let runs = map_trials(100, &Randomness::from_seed(1010), |_, r| {
        let db = sampler.database(m, r).unwrap();
        let (out, trace) = san_thresholds(&db, &params, r).unwrap();
        let c = trace.calls_budget as f64;
        let quiet = trace.halted_on_budget == 0
            && trace
                .laplace_noise
                .iter()
                .all(|n| n.abs() <= alpha * m as f64 / (16.0 * c));
        let weight_ok = !quiet || (out.total() - m as f64).abs() <= alpha * m as f64 / 4.0;
        (
            max_threshold_error(&db, &out) <= alpha,
            trace.calls_used <= calls && trace.calls_budget == calls,
            weight_ok,
        )
    });
    let rate = runs.iter().filter(|x| x.0).count() as f64 / 100.0;
    let budget_ok = calls == 308 && runs.iter().all(|x| x.1);
    let weight_ok = runs.iter().all(|x| x.2);
    report(
        10,
        "threshold sanitizer",
        rate >= 0.9 && budget_ok && weight_ok,
        format!("γ_c = {gamma_c:.2e}; accurate rate {rate:.2}; within 308 calls: {budget_ok}; weight within (1 ± α/4)m: {weight_ok}"),
    );
}

/// Forwards to the label sanitizer and keeps each run's mechanism census.
struct Censused<S> {
    inner: LabelSanitizer<S>,
    log: Mutex<Vec<Census>>,
}

impl<S: Sanitizer> Sanitizer for Censused<S> {
    fn contract(&self) -> Contract {
        self.inner.contract()
    }

    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized> {
        let (out, trace) = self.inner.run(db, rng)?;
        self.log.lock().unwrap().push(trace.census);
        Ok(Sanitized::Weighted(out))
    }
}

#[test]
fn criterion_11_sanitizer_to_learner() {
    // relaxed constants: base accuracy α, generalization slack γ
    let (alpha, gamma) = (0.1, 0.1);
    let bits = 6;
    let block = 500;
    let class = ConceptClass::point(bits).unwrap();
    let base = FixedSize {
        inner: PointsSanitizer {
            params: SanitizerParams::new(0.3, 0.1, 2.0, 0.05)
                .unwrap()
                .unvalidated(),
            m: block,
        },
        class: class.clone(),
        size: block,
    };
    let plan = BlockPlan::custom(block, 10 * block, 60 * block).unwrap();
    let san = Censused {
        inner: LabelSanitizer::new(base, 1.0, plan).unwrap(),
        log: Mutex::new(Vec::new()),
    };
    let target = 17u64;
    let dist = FiniteDistribution::from_weights(
        bits,
        (0..64u64)
            .map(|x| (x, if x == target { 30.0 } else { 1.0 }))
            .collect(),
    )
    .unwrap();
    let concept = Concept::point(bits, target).unwrap();
    let sampler = Sampler::new(dist.clone()).unwrap();
    let errors = map_trials(100, &Randomness::from_seed(1111), |_, r| {
        let s = sampler.labeled(&concept, plan.t, r).unwrap();
        let out = learn_from_sanitizer(&san, &class, &s, r).unwrap();
        generalization_error(&concept, &out.hypothesis, &dist).unwrap()
    });
    let tolerance = 2.0 * alpha + gamma;
    let rate = errors.iter().filter(|&&e| e <= tolerance).count() as f64 / 100.0;
    let log = san.log.lock().unwrap();
    let census_ok =
        log.len() == 100 && log.iter().all(|c| c.laplace == 2 && c.sanitizer_calls == 2);
    report(
        11,
        "sanitizer-to-learner reduction",
        rate >= 0.9 && census_ok,
        format!("error ≤ {tolerance:.2} on rate {rate:.2}; census 2 Laplace + 2 sanitizer calls on all runs: {census_ok}"),
    );
}

#[test]
fn criterion_12_label_private_learner() {
    let mut rng = Randomness::from_seed(1212);
    let audit = build_case("label_private", None, None)
        .unwrap()
        .audit(100_000, &mut rng)
        .unwrap();

    let bits = 8;
    let class = ConceptClass::point(bits).unwrap();
    let params = LearnerParams::new(0.2, 0.1, 4.0, 0.01)
        .unwrap()
        .with_scale(0.05);
    let cfg = PacConfig {
        class: class.clone(),
        learner: LearnerKind::LabelPrivate,
        distribution: DistributionSpec::Uniform,
        target: None,
        m: 4000,
        trials: 200,
        params,
        knobs: RectangleKnobs::default(),
        fallback: PointFallback::RandomPoint,
        seed: 1213,
    };
    let s = summarize(&run_pac_experiment(&cfg).unwrap());

    // label permutations inside the planning prefix leave the plan untouched
    let sampler =
        Sampler::new(gen_distribution(bits, &DistributionSpec::Uniform).unwrap()).unwrap();
    let concept = Concept::point(bits, 9).unwrap();
    let sample = sampler.labeled(&concept, 4000, &mut rng).unwrap();
    let points = sample.unlabeled();
    let plan = plan_label_private(&points, &class, &params).unwrap();
    let split = plan.split;
    let reference = serde_json::to_string(&plan).unwrap();
    let mut identical = true;
    for _ in 0..20 {
        let mut labels = sample.labels().to_vec();
        for i in (1..split).rev() {
            labels.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let permuted = LabeledSample::new(bits, points.entries().to_vec(), labels.clone()).unwrap();
        let again = plan_label_private(&permuted.unlabeled(), &class, &params).unwrap();
        identical &= serde_json::to_string(&again).unwrap() == reference;
        let seeded = |l: &[bool]| {
            learn_label_private(&points, l, &class, &params, &mut Randomness::from_seed(5))
                .unwrap()
                .diagnostics
        };
        let (a, b) = (seeded(sample.labels()), seeded(&labels));
        identical &= a.split == b.split && a.candidates == b.candidates;
    }
    report(
        12,
        "label-private learner",
        !audit.violation && s.success_rate >= 0.9 && identical,
        format!(
            "audit ε̂ = {:.3} (no violation: {}); PAC success {:.3}; plan identical under label permutation: {identical}",
            audit.epsilon_hat, !audit.violation, s.success_rate
        ),
    );
}

#[test]
fn criterion_13_audit_soundness() {
    let mut rng = Randomness::from_seed(1313);
    let flagged = build_case("laplace_misdeclared", None, None)
        .unwrap()
        .audit(1_000_000, &mut rng)
        .unwrap();
    let mut clean = BTreeMap::new();
    for name in [
        "a_dist",
        "choose",
        "san_points",
        "learn_point",
        "label_private",
    ] {
        let r = build_case(name, None, None)
            .unwrap()
            .audit(100_000, &mut rng)
            .unwrap();
        clean.insert(name, (r.violation, r.epsilon_hat));
    }
    let quiet = clean.values().all(|v| !v.0);
    report(
        13,
        "audit soundness",
        flagged.violation && quiet,
        format!(
            "mis-declared Laplace flagged: {} (ε̂ = {:.3}); correctly declared cases {:?}",
            flagged.violation, flagged.epsilon_hat, clean
        ),
    );
}
