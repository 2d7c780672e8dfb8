//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with its sub-checks. Run with `--nocapture` to see them.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{Float, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metasurrogate::harness::{
    build_surrogate, build_tasks, fit_rbfn_bank, generate_dataset, uncertainty_study, DatasetOptions, ExperimentConfig,
    Split, Suite, SurrogateSpec,
};
use metasurrogate::metrics::{
    correlations, kendall_tau_b, ptr_ntr, r2, rank_sum_exact_p, smae, tcr, wilcoxon_rank_sum, TaskErrorPair,
};
use metasurrogate::optimizer::{matde_run, MatdeConfig};
use metasurrogate::problems::{
    make_mcf_suite, manipulator_eval, BbobFunction, ManipulatorParams, McfSuite, TaskSpec, MCF_DIMS,
};
use metasurrogate::prompt::{parse_fitness, PromptTemplate, TaskMetadata};
use metasurrogate::sne::{decode_scalar, encode_scalar, encode_vector, token_budget, CodecConfig, EncodedNumber};
use metasurrogate::surrogate::{ExactSurrogate, Noise, RbfnConfig, Surrogate, SurrogateError, SurrogatePrediction};
use metasurrogate::token::decode::{beam_decode, greedy_decode, sample_from, FnSource, SamplingStrategy, TableSource};
use metasurrogate::token::{pwce_loss, pwce_weight, pwce_weights, uncertainty_scores, StepDistribution, Vocabulary};

struct Criterion {
    name: &'static str,
    start: Instant,
    limit: Duration,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(name: &'static str, limit_secs: u64) -> Self {
        Self {
            name,
            start: Instant::now(),
            limit: Duration::from_secs(limit_secs),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        self.check(
            format!("runtime {:.1}s < {}s", elapsed.as_secs_f64(), self.limit.as_secs()),
            elapsed < self.limit,
        );
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let detail: Vec<String> = self
            .checks
            .iter()
            .map(|(l, ok)| format!("{}{l}", if *ok { "" } else { "!! " }))
            .collect();
        println!("ACCEPTANCE {verdict} {}: {}", self.name, detail.join("; "));
        assert!(failed.is_empty(), "{} failed: {}", self.name, failed.join("; "));
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------- codec

/// |x - decoded| * 2 * 10^(gamma-1) <= |x|, in exact integer arithmetic on
/// the binary value of `x` and the decimal digits of the encoding.
fn exact_within_half_ulp_rel(x: f64, e: &EncodedNumber, gamma: usize) -> bool {
    let (mant, exp2, sign) = x.integer_decode();
    let digits: String = e.mantissa().iter().map(|d| char::from(b'0' + d)).collect();
    let d = BigInt::parse_bytes(digits.as_bytes(), 10).unwrap();
    let p10 = e.exponent() + 1 - gamma as i32;
    let shift2 = (-(exp2 as i32)).max(0) as u32;
    let shift10 = (-p10).max(0) as u32;
    let pow = |b: u32, n: u32| BigInt::from(b).pow(n);
    let a = BigInt::from(mant) * pow(2, (exp2 as i32 + shift2 as i32) as u32) * pow(10, shift10);
    let a = if sign < 0 { -a } else { a };
    let b = d * pow(10, (p10 + shift10 as i32) as u32) * pow(2, shift2);
    let b = if e.is_negative() { -b } else { b };
    let lhs = (a.clone() - b).abs() * 2 * pow(10, gamma as u32 - 1);
    lhs <= a.abs()
}

#[test]
fn codec_goldens() {
    let mut c = Criterion::new("codec goldens", 10);
    let g10 = CodecConfig::with_gamma(10).unwrap();
    let x = [-2.065349139, -2.570456278, -3.38108745];
    c.check(
        "x entries",
        encode_vector(&x, &g10).unwrap()
            == "[- <10^0> 2 0 6 5 3 4 9 1 3 9, - <10^0> 2 5 7 0 4 5 6 2 7 8, - <10^0> 3 3 8 1 0 8 7 4 5 0]",
    );
    c.check(
        "y encoding",
        encode_scalar(1740.050843, &g10).unwrap().to_string() == "+ <10^3> 1 7 4 0 0 5 0 8 4 3",
    );
    let e: EncodedNumber = "+ <10^3> 1 7 4 0 0 5 0 8 4 3".parse().unwrap();
    c.check(
        "1740.050843 decode",
        decode_scalar::<f64>(&e) == 1740.050843
            && parse_fitness::<f64>("[+ <10^3> 1 7 4 0 0 5 0 8 4 3]").unwrap() == 1740.050843,
    );

    let table = [(3, [53, 46, 39]), (4, [45, 39, 34]), (5, [39, 34, 29])];
    let dmax_ok = table.iter().all(|(g, row)| {
        [80, 120, 160]
            .iter()
            .zip(row)
            .all(|(&lm, &want)| token_budget(400, lm, *g).unwrap() == want)
    });
    c.check("nine D_max cells", dmax_ok);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for gamma in [3usize, 4, 5, 15] {
        let cfg = CodecConfig::with_gamma(gamma).unwrap();
        let bound = 0.5 * 10f64.powi(1 - gamma as i32);
        let mut worst = 0.0f64;
        let mut ok = true;
        for _ in 0..100_000 {
            let mag = 10f64.powf(rng.random_range(-6.0..6.0));
            let x = if rng.random::<bool>() { mag } else { -mag };
            let enc = encode_scalar(x, &cfg).unwrap();
            let back: f64 = decode_scalar(&enc);
            worst = worst.max(((back - x) / x).abs());
            if gamma == 15 {
                // Below f64 resolution the bound is checked on the exact digits.
                ok &= exact_within_half_ulp_rel(x, &enc, gamma);
            } else {
                ok &= ((back - x) / x).abs() <= bound;
            }
        }
        let how = if gamma == 15 {
            "exact digits; f64 readback worst"
        } else {
            "worst"
        };
        c.check(
            format!("gamma {gamma} roundtrip ({how} {worst:.2e} vs {bound:.1e})"),
            ok,
        );
    }
    c.finish();
}

// ---------------------------------------------------------------- PWCE

#[test]
fn pwce_goldens() {
    let mut c = Criterion::new("PWCE goldens", 1);
    let (alpha, gamma) = (10.0f64, 10usize);
    c.check(
        "positions 1..3 = 2 alpha",
        (1..=3).all(|p| pwce_weight(p, alpha, gamma) == 20.0),
    );
    c.check("position 4 = alpha", pwce_weight(4, alpha, gamma) == 10.0);
    let mut monotone = true;
    for a in [1.0, 2.0, 5.0, 10.0, 50.0] {
        for g in 1..=20 {
            let w = pwce_weights(a, g);
            monotone &= w.windows(2).all(|p| p[1] <= p[0]) && w.iter().all(|&v| v >= 1.0);
        }
    }
    c.check("monotone, floored at 1", monotone);
    let n = gamma + 2;
    let targets: Vec<usize> = (0..n).map(|i| i % 5).collect();
    let dists: Vec<StepDistribution<f64>> = targets.iter().map(|&t| StepDistribution::one_hot(8, t)).collect();
    c.check(
        "zero loss on one-hot targets",
        pwce_loss(&dists, &targets, alpha, gamma).unwrap() == 0.0,
    );
    c.finish();
}

// ---------------------------------------------------------------- decoding

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> StepDistribution<f64> {
    StepDistribution::from_weights((0..n).map(|_| rng.random::<f64>() + 1e-3).collect()).unwrap()
}

/// Deterministic prefix-dependent source over `v` tokens.
fn hashed_source(v: usize, salt: u64) -> FnSource<impl Fn(&[usize]) -> StepDistribution<f64>> {
    FnSource::new(v, move |prefix: &[usize]| {
        let mut h = salt;
        for &p in prefix {
            h = h.wrapping_mul(0x100_0000_01b3).wrapping_add(p as u64 + 1);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        random_dist(&mut rng, v)
    })
}

#[test]
fn decoding_and_uncertainty() {
    let mut c = Criterion::new("decoding/uncertainty", 60);
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut same = true;
    for i in 0..100 {
        let v = rng.random_range(2..8);
        let len = rng.random_range(1..7);
        let end = if i % 2 == 0 { Some(0) } else { None };
        let steps = (0..len).map(|_| random_dist(&mut rng, v)).collect();
        let table = TableSource::new(steps, end);
        let hashed = hashed_source(v, i);
        same &= beam_decode(&table, 1, end, len)[0].ids == greedy_decode(&table, end, len);
        same &= beam_decode(&hashed, 1, end, len)[0].ids == greedy_decode(&hashed, end, len);
    }
    c.check("beam(1) == greedy on 100 sources", same);

    let mut exhaustive = true;
    for salt in 0..20 {
        let src = hashed_source(4, 1000 + salt);
        let mut all: Vec<(Vec<usize>, f64)> = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for d in 0..4 {
                    let ids = vec![a, b, d];
                    let lp = metasurrogate::token::decode::sequence_log_prob(&src, &ids);
                    all.push((ids, lp));
                }
            }
        }
        all.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        for width in [16, 64] {
            let beams = beam_decode(&src, width, None, 3);
            exhaustive &= beams.len() == width.min(64);
            for (h, (ids, lp)) in beams.iter().zip(&all) {
                exhaustive &= &h.ids == ids && (h.log_prob - lp).abs() < 1e-12;
            }
        }
    }
    c.check("beam == exhaustive enumeration (|V|=4, len=3)", exhaustive);

    let mut uniform_ok = true;
    for v in [2usize, 4, 10, 37] {
        let dists = vec![StepDistribution::<f64>::uniform(v); 5];
        let u = uncertainty_scores(&dists, &[0, 1, 0, 1, 0], None).unwrap();
        let ln_v = (v as f64).ln();
        let eps = 1e-12;
        uniform_ok &= (u.nll - ln_v).abs() < eps
            && (u.ent - ln_v).abs() < eps
            && (u.imsp - (1.0 - 1.0 / v as f64)).abs() < eps
            && (u.itpm - 1.0).abs() < eps;
    }
    c.check("uniform scores ln|V|, 1-1/|V|, 1", uniform_ok);

    let base = StepDistribution::new(vec![0.4, 0.25, 0.15, 0.1, 0.06, 0.04]).unwrap();
    let strategies = [
        ("top_k(6)", SamplingStrategy::TopK(6)),
        ("top_k(3)", SamplingStrategy::TopK(3)),
        ("top_p(0.8)", SamplingStrategy::TopP(0.8)),
        ("temperature(0.7)", SamplingStrategy::Temperature(0.7)),
        ("temperature(1.5)", SamplingStrategy::Temperature(1.5)),
    ];
    for (label, s) in strategies {
        let target = s.transform(&base);
        let n = 100_000usize;
        let mut counts = vec![0usize; base.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..n {
            counts[sample_from(&target, &mut rng)] += 1;
        }
        let ok = counts.iter().zip(target.probs()).all(|(&k, &p)| {
            let mu = n as f64 * p;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            (k as f64 - mu).abs() <= 3.0 * sd
        });
        c.check(format!("{label} frequencies within 3 sigma"), ok);
    }
    c.finish();
}

// ---------------------------------------------------------------- metrics

fn brute_exact_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = metasurrogate::metrics::average_ranks(&pooled);
    let n = a.len();
    let nn = pooled.len();
    let centre = n as f64 * (nn as f64 + 1.0) / 2.0;
    let observed: f64 = ranks[..n].iter().sum();
    let d_obs = (observed - centre).abs();
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u64..(1 << nn) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let s: f64 = (0..nn).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (s - centre).abs() >= d_obs - 1e-9 {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

fn brute_kendall(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum() * if x[i] == x[j] { 0.0 } else { 1.0 };
            let dy = (y[i] - y[j]).signum() * if y[i] == y[j] { 0.0 } else { 1.0 };
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if dx == dy {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    (conc - disc) as f64 / (((conc + disc + tx) * (conc + disc + ty)) as f64).sqrt()
}

#[test]
fn metrics_oracles() {
    let mut c = Criterion::new("metrics oracles", 30);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    c.check(
        "sMAE([0,10],[1,9]) = 0.1",
        close(smae(&[0.0, 10.0], &[1.0, 9.0]).unwrap(), 0.1),
    );
    c.check(
        "sMAE perfect = 0",
        smae(&[1.0, 2.0, 5.0], &[1.0, 2.0, 5.0]).unwrap() == 0.0,
    );
    c.check(
        "R2([1,2,3],[1,2,4]) = 0.5",
        close(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5),
    );
    c.check("R2 perfect = 1, mean predictor = 0", {
        let y = [1.0, 4.0, 2.0, 9.0];
        r2(&y, &y).unwrap() == 1.0 && close(r2(&y, &[4.0; 4]).unwrap(), 0.0)
    });
    c.check(
        "TCR equal errors = 0, PTR/NTR",
        tcr(TaskErrorPair {
            err_single: 0.3,
            err_multi: 0.3,
        })
        .unwrap()
            == 0.0
            && ptr_ntr(&[0.1, 0.5, 0.7]).unwrap() == (1.0, 0.0),
    );
    let t = tcr(TaskErrorPair {
        err_single: 0.129,
        err_multi: 0.075,
    })
    .unwrap()
        * 100.0;
    c.check(
        format!("TCR(0.129, 0.075) = {t:.2}% vs +41.6% within 0.2 pp"),
        (t - 41.6).abs() <= 0.2,
    );

    let a = [1.0, 2.0, 3.0];
    let b = [10.0, 11.0, 12.0];
    let w = wilcoxon_rank_sum(&a, &b, 0.05).unwrap();
    c.check(
        format!("Wilcoxon [1,2,3] vs [10,11,12] p = {} (2/20)", w.p),
        w.exact && close(w.p, 0.1),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agree = true;
    for _ in 0..40 {
        let n = rng.random_range(3..8);
        let m = rng.random_range(3..8);
        // Coarse values force ties.
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(1..8) as f64).collect();
        agree &= (rank_sum_exact_p(&a, &b) - brute_exact_p(&a, &b)).abs() < 1e-12;
    }
    c.check("Wilcoxon exact == enumeration (40 tied cases)", agree);

    let mut kendall_ok = true;
    for case in 0..50 {
        let n = rng.random_range(5..40);
        let coarse = case % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if coarse {
                rng.random_range(0..5) as f64
            } else {
                rng.random::<f64>()
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        match kendall_tau_b(&x, &y) {
            Ok(t) => kendall_ok &= (t - brute_kendall(&x, &y)).abs() < 1e-12,
            Err(_) => kendall_ok &= x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]),
        }
    }
    c.check("Kendall tau-b == O(n^2) oracle (50 cases)", kendall_ok);
    let e = [0.3, 1.2, 0.7, 2.5, 1.9];
    let pos = correlations(&e, &e).unwrap();
    let neg = correlations(&e.map(|v| -v), &e).unwrap();
    c.check(
        "u = e gives 1, u = -e gives -1",
        close(pos.pearson, 1.0)
            && close(pos.spearman, 1.0)
            && close(pos.kendall, 1.0)
            && close(neg.pearson, -1.0)
            && close(neg.spearman, -1.0)
            && close(neg.kendall, -1.0),
    );
    c.finish();
}

// ---------------------------------------------------------------- problems

fn fk_oracle(length: f64, phi_max: f64, v: &[f64]) -> f64 {
    let d = v.len() as f64;
    let (mut x, mut y, mut heading) = (0.0, 0.0, 0.0);
    for &vi in v {
        heading += vi.clamp(0.0, 1.0) * phi_max / d;
        x += length / d * heading.cos();
        y += length / d * heading.sin();
    }
    ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt()
}

#[test]
fn problems() {
    let mut c = Criterion::new("problems", 60);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in [
        "Sphere",
        "Ellipsoidal",
        "Bent_Cigar",
        "Discus",
        "Sharp_Ridge",
        "Different_Powers",
    ] {
        let mut ok = true;
        for dim in [5usize, 20] {
            let f = BbobFunction::<f64>::new(name, 0, dim).unwrap();
            let at_shift = f.evaluate(f.shift()).unwrap();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
                ok &= at_shift <= f.evaluate(&x).unwrap();
            }
        }
        c.check(format!("{name} minimal at shift"), ok);
    }

    let table: [(McfSuite, [&str; 6]); 3] = [
        (
            McfSuite::Mcf1,
            [
                "Buche_Rastrigin",
                "Rosenbrock_rotated",
                "Step_Ellipsoidal",
                "Bent_Cigar",
                "Rosenbrock_original",
                "Rastrigin_F15",
            ],
        ),
        (
            McfSuite::Mcf2,
            [
                "Sharp_Ridge",
                "Buche_Rastrigin",
                "Different_Powers",
                "Sharp_Ridge",
                "Schaffers",
                "Gallagher_21Peaks",
            ],
        ),
        (
            McfSuite::Mcf3,
            [
                "Step_Ellipsoidal",
                "Composite_Grie_rosen",
                "Different_Powers",
                "Schwefel",
                "Gallagher_101Peaks",
                "Lunacek_bi_Rastrigin",
            ],
        ),
    ];
    for (suite, names) in table {
        let tasks = make_mcf_suite(suite);
        let mut ok = tasks.len() == 24;
        for (i, t) in tasks.iter().enumerate() {
            ok &= t.metadata.function_name == names[i / 4]
                && t.dim() == MCF_DIMS[i % 4]
                && t.metadata.instance == 0
                && t.lo.iter().all(|&l| l == -5.0)
                && t.hi.iter().all(|&h| h == 5.0);
        }
        c.check(format!("{suite} structure"), ok);
    }

    let mut worst = 0.0f64;
    for d in [2usize, 20] {
        for _ in 0..1000 {
            let length = rng.random_range(0.5..1.5);
            let phi_max = rng.random_range(0.5..7.0);
            let p = ManipulatorParams::new(length, phi_max, d).unwrap();
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-0.1..1.1)).collect();
            worst = worst.max((manipulator_eval(&p, &v).unwrap() - fk_oracle(length, phi_max, &v)).abs());
        }
    }
    c.check(format!("manipulator vs oracle (max diff {worst:.1e})"), worst <= 1e-12);
    c.finish();
}

// ---------------------------------------------------------------- optimizer

fn dataset_options(seed: u64) -> DatasetOptions {
    DatasetOptions {
        suite: "mcf1".into(),
        samples_per_task: 500,
        train_ratio: (5, 3),
        gamma: 15,
        template: PromptTemplate::Small,
        seed,
    }
}

struct Counting<S> {
    inner: S,
    calls: AtomicUsize,
}

impl<S: Surrogate> Surrogate for Counting<S> {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict(meta, x)
    }

    fn predict_batch(&self, meta: &TaskMetadata, xs: &[Vec<f64>]) -> Result<Vec<SurrogatePrediction>, SurrogateError> {
        self.calls.fetch_add(xs.len(), Ordering::Relaxed);
        self.inner.predict_batch(meta, xs)
    }

    fn name(&self) -> String {
        self.inner.name()
    }
}

#[test]
fn optimizer() {
    let mut c = Criterion::new("optimizer", 15 * 60);

    let sphere = vec![TaskSpec::bbob("Sphere", 0, 5).unwrap()];
    let exact = ExactSurrogate::new(&sphere);
    let ratios: Vec<f64> = (0..10)
        .map(|seed| {
            let cfg = MatdeConfig {
                seed,
                pop_size: 50,
                generations: 100,
                ..Default::default()
            };
            let r = &matde_run(&sphere, &exact, &cfg).unwrap().results[0];
            r.best_pseudo_y / r.initial_best_pseudo_y
        })
        .collect();
    let med = median(ratios);
    c.check(format!("5-D Sphere best/initial median {med:.2e} <= 1e-2"), med <= 0.01);

    let tasks: Vec<TaskSpec> = ["Sphere", "Rastrigin", "Discus"]
        .iter()
        .zip([2usize, 5, 3])
        .map(|(n, d)| TaskSpec::bbob(n, 0, d).unwrap())
        .collect();
    let counting = Counting {
        inner: ExactSurrogate::new(&tasks),
        calls: AtomicUsize::new(0),
    };
    let cfg = MatdeConfig {
        seed: 3,
        pop_size: 12,
        generations: 17,
        im: 0.5,
        ..Default::default()
    };
    let out = matde_run(&tasks, &counting, &cfg).unwrap();
    let expected = 3 * 17 * 12;
    let traced: usize = (0..3)
        .map(|t| {
            out.trace
                .iter()
                .filter(|r| r.task == t)
                .map(|r| r.surrogate_calls)
                .max()
                .unwrap()
        })
        .sum();
    c.check(
        format!("call accounting {expected}"),
        counting.calls.load(Ordering::Relaxed) == expected && out.surrogate_calls == expected && traced == expected,
    );

    // 500 LHS samples per task split 5:3; the RBFN sees the train part and
    // the reference is the best train fitness.
    let suite = make_mcf_suite(McfSuite::Mcf1);
    let fractions: Vec<f64> = (0..10u64)
        .map(|seed| {
            let ds = generate_dataset(&suite, &dataset_options(seed)).unwrap();
            let bank = fit_rbfn_bank(
                &ds,
                &RbfnConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let out = matde_run(
                &suite,
                &bank,
                &MatdeConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let wins = out
                .results
                .iter()
                .filter(|r| {
                    let best = ds
                        .task_split(r.task, Split::Train)
                        .1
                        .into_iter()
                        .fold(f64::INFINITY, f64::min);
                    r.true_y_of_best < best
                })
                .count();
            wins as f64 / suite.len() as f64
        })
        .collect();
    let med = median(fractions.clone());
    c.check(
        format!(
            "MCF1 + RBFN beats best training sample on median {:.1}% of tasks >= 60% (wins per seed {:?})",
            med * 100.0,
            fractions
                .iter()
                .map(|f| (f * 24.0).round() as usize)
                .collect::<Vec<_>>()
        ),
        med >= 0.6,
    );
    c.finish();
}

// ---------------------------------------------------------------- end to end

#[test]
fn end_to_end_hermetic() {
    let mut c = Criterion::new("end-to-end hermetic", 5 * 60);
    let cfg = ExperimentConfig {
        suite: Suite::Mcf1,
        surrogate: SurrogateSpec::Mock {
            noise: Noise::Gaussian { sigma_rel: 0.1 },
        },
        return_probs: true,
        ..Default::default()
    };
    let tasks = build_tasks(&cfg);
    let ds = generate_dataset(&tasks, &dataset_options(cfg.seed)).unwrap();
    let surrogate = build_surrogate(&cfg, &tasks, Some(&ds)).unwrap();
    let vocab = Vocabulary::for_codec(&CodecConfig::with_gamma(cfg.gamma).unwrap());
    let study = uncertainty_study(&ds, surrogate.as_ref(), &vocab, Some(2000), 0).unwrap();
    c.check(format!("{} queries", study.queries), study.queries == 2000);
    c.check("five criteria reported", study.rows.len() == 5);
    let row = study.row("U_ENT").unwrap();
    let rho = row.spearman.unwrap_or(f64::NAN);
    let pooled = row.pooled.map_or(f64::NAN, |c| c.spearman);
    c.check(
        format!(
            "Spearman(U_ENT, |err|) averaged over {} tasks = {rho:.3} > 0.5 (pooled {pooled:.3})",
            row.tasks
        ),
        rho > 0.5,
    );
    c.finish();
}
