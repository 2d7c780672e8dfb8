use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metasurrogate::optimizer::{
    de_step, matde_run, select_transfer_task, transfer_probabilities, Individual, MatdeConfig, TaskState,
};
use metasurrogate::problems::TaskSpec;
use metasurrogate::prompt::TaskMetadata;
use metasurrogate::surrogate::{ExactSurrogate, Surrogate, SurrogateError, SurrogatePrediction};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn archive_and_rewards() {
    let tasks: Vec<TaskSpec> = ["Sphere", "Rastrigin", "Ellipsoidal"]
        .iter()
        .map(|n| TaskSpec::bbob(n, 0, 4).unwrap())
        .collect();
    let s = ExactSurrogate::new(&tasks);
    let cfg = MatdeConfig {
        pop_size: 20,
        generations: 60,
        archive_capacity: 100,
        seed: 5,
        ..Default::default()
    };
    let out = matde_run(&tasks, &s, &cfg).unwrap();
    let mut inserted = 0;
    for r in &out.results {
        assert!(r.archive_len <= cfg.archive_capacity);
        assert_eq!(r.archive_len, cfg.archive_capacity);
        inserted += r.archive_inserts;
        assert!(
            r.reward_row.iter().all(|&w| w > 0.0 && w.is_finite()),
            "{:?}",
            r.reward_row
        );
    }
    // Binomial: 3 tasks * 59 generations * 20 individuals trials at p = aUp.
    let n = (3 * 59 * 20) as f64;
    let (mean, sd) = (n * cfg.a_up, (n * cfg.a_up * (1.0 - cfg.a_up)).sqrt());
    assert!((inserted as f64 - mean).abs() < 4.0 * sd, "{inserted} vs {mean}");
}

#[test]
fn rewards_stay_positive_with_aggressive_shrink() {
    let tasks: Vec<TaskSpec> = (0..3).map(|_| TaskSpec::bbob("Rastrigin", 0, 2).unwrap()).collect();
    let s = ExactSurrogate::new(&tasks);
    let cfg = MatdeConfig {
        im: 1.0,
        shk: 0.01,
        pop_size: 8,
        generations: 200,
        ..Default::default()
    };
    let out = matde_run(&tasks, &s, &cfg).unwrap();
    for r in &out.results {
        assert!(r.reward_row.iter().all(|&w| w > 0.0 && w.is_finite()));
    }
}

#[test]
fn identical_tasks_end_alike() {
    let task = TaskSpec::bbob("Rastrigin", 0, 10).unwrap();
    let tasks = vec![task.clone(), task];
    let s = ExactSurrogate::new(&tasks);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let cfg = MatdeConfig {
            seed,
            im: 0.5,
            ..Default::default()
        };
        let out = matde_run(&tasks, &s, &cfg).unwrap();
        a.push(out.results[0].best_pseudo_y);
        b.push(out.results[1].best_pseudo_y);
    }
    let (ma, mb) = (median(a), median(b));
    assert!((ma - mb).abs() <= 0.1 * ma.max(mb), "{ma} vs {mb}");
}

/// Straight transcription of DE/rand/1/bin with the documented draw order.
fn de_oracle(
    pop: &[Vec<f64>],
    fr: (f64, f64),
    crr: (f64, f64),
    lo: &[f64],
    hi: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = pop.len();
    let mut out = Vec::new();
    for i in 0..n {
        let f = fr.0 + (fr.1 - fr.0) * rng.random::<f64>();
        let cr = crr.0 + (crr.1 - crr.0) * rng.random::<f64>();
        let mut r = Vec::new();
        while r.len() < 3 {
            let c = rng.random_range(0..n);
            if c != i && !r.contains(&c) {
                r.push(c);
            }
        }
        let jr = rng.random_range(0..lo.len());
        let mut child = pop[i].clone();
        for j in 0..lo.len() {
            let u: f64 = rng.random();
            if u < cr || j == jr {
                let mut v = pop[r[0]][j] + f * (pop[r[1]][j] - pop[r[2]][j]);
                let w = hi[j] - lo[j];
                while v < lo[j] || v > hi[j] {
                    v = if v < lo[j] { 2.0 * lo[j] - v } else { 2.0 * hi[j] - v };
                }
                assert!(w > 0.0);
                child[j] = v;
            }
        }
        out.push(child);
    }
    out
}

#[test]
fn de_step_matches_oracle() {
    let (lo, hi) = (vec![-1.0, -1.0], vec![1.0, 1.0]);
    for seed in 0..200 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let pop: Vec<Vec<f64>> = (0..4)
            .map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
            .collect();
        let mut r1 = ChaCha8Rng::seed_from_u64(seed + 1000);
        let mut r2 = r1.clone();
        let got = de_step(&pop, (0.1, 1.0), (0.1, 0.9), &lo, &hi, &mut r1);
        let want = de_oracle(&pop, (0.1, 1.0), (0.1, 0.9), &lo, &hi, &mut r2);
        for (g, w) in got.iter().zip(&want) {
            for (a, b) in g.iter().zip(w) {
                assert!((a - b).abs() <= 1e-12, "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn de_step_degenerate_and_bounded() {
    let (lo, hi) = (vec![-5.0; 3], vec![5.0; 3]);
    let same = vec![vec![1.0, -2.0, 3.0]; 6];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(de_step(&same, (0.0, 0.0), (0.0, 0.0), &lo, &hi, &mut rng), same);

    let mut pop: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    for _ in 0..100_000 / 6 {
        pop = de_step(&pop, (0.1, 2.0), (0.1, 0.9), &lo, &hi, &mut rng);
        assert!(pop.iter().flatten().all(|v| (-5.0..=5.0).contains(v)));
    }
}

fn state(center: f64, rewards: Vec<f64>, rng: &mut ChaCha8Rng) -> TaskState {
    let population: Vec<Individual> = (0..30)
        .map(|_| Individual {
            x: vec![
                center + rng.random_range(-0.5..0.5),
                center + rng.random_range(-0.5..0.5),
            ],
            y: 0.0,
        })
        .collect();
    TaskState {
        best: population[0].clone(),
        archive: Vec::new(),
        population,
        reward_row: rewards,
        lo: vec![-5.0; 2],
        hi: vec![5.0; 2],
    }
}

#[test]
fn uniform_transfer_choice_passes_chi_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = state(0.0, vec![1.0; 5], &mut rng);
    // Same population everywhere: equal similarity.
    let states: Vec<TaskState> = (0..5).map(|_| base.clone()).collect();
    let p = transfer_probabilities(0, &states);
    assert_eq!(p[0], 0.0);
    assert!(p[1..].iter().all(|&v| (v - 0.25).abs() < 1e-12));
    let mut counts = [0usize; 5];
    let draws = 10_000;
    for _ in 0..draws {
        counts[select_transfer_task(0, &states, &mut rng)] += 1;
    }
    assert_eq!(counts[0], 0);
    let e = draws as f64 / 4.0;
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 3 degrees of freedom, alpha = 0.001.
    assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn high_reward_peer_dominates_and_two_tasks_pick_other() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = state(0.0, vec![1.0, 1.0, 50.0, 1.0], &mut rng);
    let states: Vec<TaskState> = (0..4).map(|_| base.clone()).collect();
    let mut counts = [0usize; 4];
    for _ in 0..5000 {
        counts[select_transfer_task(0, &states, &mut rng)] += 1;
    }
    assert!(counts[2] > counts[1] && counts[2] > counts[3]);

    let pair = vec![state(0.0, vec![1.0; 2], &mut rng), state(3.0, vec![1.0; 2], &mut rng)];
    for _ in 0..200 {
        assert_eq!(select_transfer_task(0, &pair, &mut rng), 1);
        assert_eq!(select_transfer_task(1, &pair, &mut rng), 0);
    }
}

struct Flaky {
    inner: ExactSurrogate,
    left: AtomicUsize,
}

impl Surrogate for Flaky {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError> {
        if self
            .left
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_err()
        {
            return Err(SurrogateError::RemoteUnavailable("gone".into()));
        }
        self.inner.predict(meta, x)
    }

    fn name(&self) -> String {
        "flaky".into()
    }
}

#[test]
fn failing_surrogate_gives_partial_outcome() {
    let tasks = vec![
        TaskSpec::bbob("Sphere", 0, 3).unwrap(),
        TaskSpec::bbob("Discus", 0, 3).unwrap(),
    ];
    let cfg = MatdeConfig {
        pop_size: 10,
        generations: 50,
        ..Default::default()
    };
    let s = Flaky {
        inner: ExactSurrogate::new(&tasks),
        left: AtomicUsize::new(2 * 10 * 7 + 5),
    };
    let out = matde_run(&tasks, &s, &cfg).unwrap();
    assert!(out.partial);
    assert!(out.error.as_deref().unwrap().contains("gone"));
    assert_eq!(out.generations_completed, 7);
    assert_eq!(out.results.len(), 2);
    assert!(out.results.iter().all(|r| r.best_pseudo_y.is_finite()));

    // Failure during initialisation is an error, not a partial run.
    let dead = Flaky {
        inner: ExactSurrogate::new(&tasks),
        left: AtomicUsize::new(3),
    };
    assert!(matde_run(&tasks, &dead, &cfg).is_err());
}

#[test]
fn sphere_converges_with_exact_oracle() {
    let tasks = vec![TaskSpec::bbob("Sphere", 0, 5).unwrap()];
    let s = ExactSurrogate::new(&tasks);
    let ratios: Vec<f64> = (0..10)
        .map(|seed| {
            let out = matde_run(
                &tasks,
                &s,
                &MatdeConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let r = &out.results[0];
            let ys: Vec<f64> = out.trace.iter().map(|t| t.best_pseudo_y).collect();
            assert!(ys.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(out.surrogate_calls, 100 * 50);
            r.best_pseudo_y / r.initial_best_pseudo_y
        })
        .collect();
    assert!(median(ratios) <= 0.01);
}
