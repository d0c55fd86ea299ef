//! Acceptance criteria 1 to 10. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegame::features::{optimize_weights, ScoreTable};
use scenegame::gmm;
use scenegame::harness::{run_experiment, RunConfig, REPORT_HEADER};
use scenegame::image::{DisplacementLabelSet, Image, LabelField};
use scenegame::linalg::Matrix;
use scenegame::mrf::{
    best_response_sweep, build_registration_game, ellipticity_check, energy_of, exhaustive_oracle, initial_labeling,
    nash_check, smoothness_residual, solve_anneal, solve_icm, DataCosts, EnergyModel, GameConfig, Prior,
    SmoothnessField, SweepOrder, TraceRow,
};
use scenegame::net::{grad_check, LossWeights, NetSpec, Triplet};
use scenegame::preprocess::equalize;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

const MASTER_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
    /// Serialized outputs, compared byte-for-byte by the determinism criterion.
    digest: String,
}

fn random_model(seed: u64) -> EnergyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = DataCosts::from_fn(9, 2, |_, _| rng.gen_range(0.0..1.0)).unwrap();
    let beta = rng.gen_range(0.0..1.0);
    EnergyModel::new(3, 3, data, beta, Prior::Potts).unwrap()
}

fn random_init(seed: u64) -> LabelField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    LabelField::new(3, 3, 2, (0..9).map(|_| rng.gen_range(0..2)).collect()).unwrap()
}

fn icm_traces_descend(trace: &[TraceRow]) -> bool {
    trace.windows(2).all(|w| w[1].energy <= w[0].energy)
}

/// Criterion 1, also collecting the ICM traces for criterion 2.
fn nash_oracle(seed: u64, traces: &mut Vec<Vec<TraceRow>>) -> Outcome {
    let mut nash = 0;
    let mut optimal = 0;
    let mut digest = String::new();
    for case in 0..100u64 {
        let s = seed.wrapping_mul(1000).wrapping_add(case);
        let model = random_model(s);
        let init = random_init(s);
        let icm = solve_icm(&model, &init, &GameConfig::default()).unwrap();
        nash += nash_check(&model, &icm.labels).unwrap().is_nash as usize;
        let cfg = GameConfig { seed: s, ..GameConfig::default() };
        let anneal = solve_anneal(&model, &init, &cfg).unwrap();
        let (_, best) = exhaustive_oracle(&model).unwrap();
        optimal += (anneal.energy() == best) as usize;
        writeln!(digest, "{:?} {:?} {:x}", icm.labels.labels(), anneal.labels.labels(), anneal.energy().to_bits()).unwrap();
        traces.push(icm.trace);
    }
    Outcome {
        pass: nash == 100 && optimal >= 95,
        detail: format!("icm Nash {nash}/100, anneal at oracle minimum {optimal}/100"),
        digest,
    }
}

/// Criterion 2: every ICM trace from the suite plus single sweeps in both
/// orders on the 3×3 models and larger 4-label models.
fn descent(traces: &[Vec<TraceRow>], max_sweeps: usize) -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for t in traces {
        checked += t.len().saturating_sub(1);
        violations += (!icm_traces_descend(t)) as usize;
    }
    let mut unterminated = 0;
    for case in 0..100u64 {
        let model = random_model(case);
        let init = random_init(case);
        for order in [SweepOrder::Raster, SweepOrder::Checkerboard] {
            let cfg = GameConfig { order, max_sweeps, ..GameConfig::default() };
            let out = solve_icm(&model, &init, &cfg).unwrap();
            unterminated += (!out.converged) as usize;
            violations += (!icm_traces_descend(&out.trace)) as usize;
            checked += out.trace.len() - 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..20 {
        let data = DataCosts::from_fn(144, 4, |_, _| rng.gen_range(0.0..1.0)).unwrap();
        let prior = if case % 2 == 0 { Prior::Potts } else { Prior::Quadratic };
        let model = EnergyModel::new(12, 12, data, 0.4, prior).unwrap();
        let mut labels = LabelField::new(12, 12, 4, (0..144).map(|_| rng.gen_range(0..4)).collect()).unwrap();
        for sweep in 0..10 {
            let order = if sweep % 2 == 0 { SweepOrder::Raster } else { SweepOrder::Checkerboard };
            let before = energy_of(&model, &labels).unwrap();
            let (next, _) = best_response_sweep(&model, &labels, order).unwrap();
            let after = energy_of(&model, &next).unwrap();
            violations += (after > before) as usize;
            checked += 1;
            labels = next;
        }
    }
    Outcome {
        pass: violations == 0 && unterminated == 0,
        detail: format!("{checked} sweeps checked, {violations} increases, {unterminated} runs past max_sweeps"),
        digest: String::new(),
    }
}

/// Criterion 3.
fn em_monotone(seed: u64) -> Outcome {
    let mut worst_drop = 0.0f64;
    let mut digest = String::new();
    for case in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ case.wrapping_mul(0x9E37));
        let centers: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let data: Vec<f64> = (0..200).map(|_| centers[rng.gen_range(0..3)] + rng.gen_range(-0.08..0.08)).collect();
        let m = 1 + (case % 3) as usize;
        let (params, trace) = gmm::fit(&data, m, 1e-9, 300, seed + case).unwrap();
        for w in trace.loglik_per_iter.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        let bits: Vec<String> = trace.loglik_per_iter.iter().map(|v| format!("{:x}", v.to_bits())).collect();
        writeln!(digest, "{} {:?}", bits.join(","), params.means()).unwrap();
    }
    let data = [-0.1, 0.0, 0.1, 9.9, 10.0, 10.1];
    let (params, _) = gmm::fit(&data, 2, 1e-9, 300, seed).unwrap();
    let mut means = params.means().to_vec();
    means.sort_by(f64::total_cmp);
    let recovered = (means[0] - 0.0).abs() < 0.1 && (means[1] - 10.0).abs() < 0.1;
    Outcome {
        pass: worst_drop <= 1e-9 && recovered,
        detail: format!("largest log-likelihood drop {worst_drop:.2e}, separable means {means:.4?}"),
        digest,
    }
}

/// Criterion 4.
fn gradient_fidelity() -> Outcome {
    let net = NetSpec::default_architecture(20, MASTER_SEED).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let inputs: Vec<Vec<f64>> = (0..6).map(|_| (0..400).map(|_| rng.gen()).collect()).collect();
    let labels = [0, 0, 1, 1, 2, 3];
    let triplets = [
        Triplet { anchor: 0, positive: 1, negative: 2 },
        Triplet { anchor: 2, positive: 3, negative: 4 },
        Triplet { anchor: 1, positive: 0, negative: 5 },
    ];
    // a wide margin keeps every hinge active so the triplet path is exercised
    let report =
        grad_check(&net, &inputs, &labels, &triplets, 5.0, &LossWeights::default(), 60, 1e-4, MASTER_SEED).unwrap();
    Outcome {
        pass: report.checked >= 50 && report.max_relative_error < 1e-3,
        detail: format!(
            "max relative error {:.2e} over {} parameters ({} skipped at kinks, {} total)",
            report.max_relative_error,
            report.checked,
            report.skipped_at_kinks,
            net.param_count()
        ),
        digest: String::new(),
    }
}

fn texture(size: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..size * size).map(|_| rng.gen_range(0.0..255.0)).collect();
    Image::from_fn(size, size, |x, y| {
        let mut s = 0.0;
        let mut n = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                if xx >= 0 && yy >= 0 && (xx as usize) < size && (yy as usize) < size {
                    s += noise[yy as usize * size + xx as usize];
                    n += 1.0;
                }
            }
        }
        (0.5 * s / n + 0.5 * noise[y * size + x]).round() as u8
    })
    .unwrap()
}

/// Criterion 5: `moving(x + dx, y + dy) = fixed(x, y)` on the whole frame,
/// both cut from one larger texture so no clamping is involved.
fn registration(seed: u64) -> Outcome {
    let (size, pad, radius) = (32usize, 4usize, 2u32);
    let big = texture(size + 2 * pad, seed);
    let fixed = big.crop(pad, pad, size, size);
    let set = DisplacementLabelSet::square(radius);
    let field = SmoothnessField::identity(size, size, 0.5).unwrap();
    let mut parts = Vec::new();
    let mut digest = String::new();
    let mut pass = true;
    for (dx, dy) in [(1i32, 0i32), (2, -1)] {
        let moving = big.crop((pad as i32 - dx) as usize, (pad as i32 - dy) as usize, size, size);
        let model = build_registration_game(&fixed, &moving, &set, 0.5, &field).unwrap();
        let init = initial_labeling(&model, Some(set.zero_index())).unwrap();
        let out = solve_icm(&model, &init, &GameConfig::default()).unwrap();
        let truth = set.index_of((dx, dy)).unwrap();
        let r = radius as usize;
        let (mut hit, mut total) = (0, 0);
        for y in r..size - r {
            for x in r..size - r {
                total += 1;
                hit += (out.labels.get(y * size + x) == truth) as usize;
            }
        }
        let frac = hit as f64 / total as f64;
        pass &= frac >= 0.9;
        parts.push(format!("({dx},{dy}) {:.1}%", 100.0 * frac));
        writeln!(digest, "{:?}", out.labels.labels()).unwrap();
    }
    Outcome { pass, detail: format!("interior recovery {}", parts.join(", ")), digest }
}

/// Criterion 6.
fn equalization() -> Outcome {
    let cases: [(usize, usize, Vec<u8>, Vec<u8>); 3] = [
        (2, 2, vec![128; 4], vec![128; 4]),
        (2, 1, vec![0, 255], vec![0, 255]),
        (4, 1, vec![10, 10, 20, 30], vec![0, 0, 127, 255]),
    ];
    let exact = cases
        .iter()
        .filter(|(w, h, input, want)| {
            equalize(&Image::gray(*w, *h, input.clone()).unwrap()).unwrap().pixels() == want.as_slice()
        })
        .count();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut ordered = 0;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
        let hi = rng.gen_range(1..=255u8);
        let img = Image::gray(w, h, (0..w * h).map(|_| rng.gen_range(0..=hi)).collect()).unwrap();
        let out = equalize(&img).unwrap();
        let mut pairs: Vec<(u8, u8)> = img.pixels().iter().copied().zip(out.pixels().iter().copied()).collect();
        pairs.sort_unstable();
        ordered += pairs.windows(2).all(|p| p[0].1 <= p[1].1) as usize;
    }
    Outcome {
        pass: exact == 3 && ordered == 100,
        detail: format!("{exact}/3 examples bit-exact, rank order kept on {ordered}/100 random images"),
        digest: String::new(),
    }
}

/// Criterion 7.
fn weights_vs_grid() -> Outcome {
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + case);
        let n = rng.gen_range(3..30);
        let scores: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(0.0..10.0)).collect();
        let table = ScoreTable::new(Matrix::from_vec(n, 2, scores).unwrap()).unwrap();
        let (_, got) = optimize_weights(&table);
        let grid = (0..=100)
            .map(|k| {
                let w = k as f64 / 100.0;
                table.objective(&[w, 1.0 - w])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(grid - got);
    }
    Outcome {
        pass: worst <= 1e-3,
        detail: format!("largest shortfall against the 0.01 grid {worst:.2e}"),
        digest: String::new(),
    }
}

/// Criterion 8.
fn ellipticity_and_smoothness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut agree = 0;
    for _ in 0..1000 {
        let c: [f64; 3] = [rng.gen_range(-1.0..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..3.0)];
        let eps = rng.gen_range(0.01..1.0);
        let (tr, det) = (c[0] + c[2], c[0] * c[2] - c[1] * c[1]);
        let lambda_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
        let field = SmoothnessField::uniform(2, 2, c, eps).unwrap();
        agree += (ellipticity_check(&field) == (lambda_min >= eps)) as usize;
    }
    let (w, h) = (9, 7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let varying: Vec<[f64; 3]> = (0..w * h)
            .map(|_| {
                let a12 = rng.gen_range(-0.5..0.5);
                [rng.gen_range(1.0..3.0), a12, rng.gen_range(1.0..3.0)]
            })
            .collect();
        let field = SmoothnessField::new(w, h, varying, 0.1).unwrap();
        let k = rng.gen_range(-50.0..50.0);
        worst = worst.max(smoothness_residual(&field, &vec![k; w * h]).unwrap().iter().fold(0.0, |m, r| m.max(r.abs())));
        let a12 = rng.gen_range(-0.5..0.5);
        let uniform = SmoothnessField::uniform(w, h, [rng.gen_range(1.0..3.0), a12, rng.gen_range(1.0..3.0)], 0.1).unwrap();
        let (a, b, c0) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let u: Vec<f64> = (0..w * h).map(|i| a * (i % w) as f64 + b * (i / w) as f64 + c0).collect();
        let r = smoothness_residual(&uniform, &u).unwrap();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                worst = worst.max(r[y * w + x].abs());
            }
        }
    }
    Outcome {
        pass: agree == 1000 && worst <= 1e-9,
        detail: format!("ellipticity agrees on {agree}/1000, largest interior residual {worst:.2e}"),
        digest: String::new(),
    }
}

fn schema_ok(csv: &str) -> bool {
    let mut lines = csv.lines();
    if lines.next() != Some(REPORT_HEADER) || !csv.ends_with('\n') {
        return false;
    }
    let two_dp = |s: &str| {
        let b = s.as_bytes();
        b.len() == 4 && b[0].is_ascii_digit() && b[1] == b'.' && b[2].is_ascii_digit() && b[3].is_ascii_digit()
    };
    let mut rows = 0;
    for line in lines {
        rows += 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return false;
        }
        let size_ok = cells[1].split_once('*').is_some_and(|(a, b)| a == b && a.parse::<usize>().is_ok());
        let rob_ok = cells[5].split_once('±').is_some_and(|(m, h)| two_dp(m) && two_dp(h));
        let acc_ok = two_dp(cells[4]) && cells[4].parse::<f64>().is_ok_and(|a| (0.0..=1.0).contains(&a));
        if !(matches!(cells[0], "1" | "2" | "3" | "4" | "5")
            && size_ok
            && cells[2] == "1"
            && matches!(cells[3], "1" | "2" | "3")
            && acc_ok
            && rob_ok)
        {
            return false;
        }
    }
    rows > 0
}

/// Criterion 9.
fn end_to_end(seed: u64) -> Outcome {
    let cfg = RunConfig { seed, sizes: vec![20], noise_levels: vec![1], images_per_class: 200, ..RunConfig::default() };
    let report = run_experiment(&cfg).unwrap();
    let csv = report.to_csv();
    let accuracy = report.rows[0].accuracy.clone().unwrap_or(f64::NAN);
    Outcome {
        pass: accuracy >= 0.85 && schema_ok(&csv),
        detail: format!("held-out accuracy {accuracy:.4}, report schema {}", if schema_ok(&csv) { "ok" } else { "BAD" }),
        digest: csv,
    }
}

struct Gate {
    failures: usize,
}

impl Gate {
    fn report(&mut self, id: u32, name: &str, outcome: &Outcome, elapsed: Duration, budget: Duration) {
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() {
    let mut gate = Gate { failures: 0 };
    let secs = Duration::from_secs;
    let mut traces = Vec::new();

    let (c1, t) = timed(|| nash_oracle(MASTER_SEED, &mut traces));
    gate.report(1, "Nash/oracle equivalence", &c1, t, secs(10));
    let (c2, t) = timed(|| descent(&traces, GameConfig::default().max_sweeps));
    gate.report(2, "potential-game descent", &c2, t, secs(60));
    let (c3, t) = timed(|| em_monotone(MASTER_SEED));
    gate.report(3, "EM monotonicity", &c3, t, secs(60));
    let (c4, t) = timed(gradient_fidelity);
    gate.report(4, "gradient fidelity", &c4, t, secs(60));
    let (c5, t) = timed(|| registration(MASTER_SEED));
    gate.report(5, "registration recovery", &c5, t, secs(30));
    let (c6, t) = timed(equalization);
    gate.report(6, "equalization contract", &c6, t, secs(60));
    let (c7, t) = timed(weights_vs_grid);
    gate.report(7, "weight optimizer vs grid", &c7, t, secs(60));
    let (c8, t) = timed(ellipticity_and_smoothness);
    gate.report(8, "ellipticity and smoothness", &c8, t, secs(60));
    let (c9, t) = timed(|| end_to_end(MASTER_SEED));
    gate.report(9, "end-to-end experiment", &c9, t, secs(600));

    let (c10, t) = timed(|| {
        let mut scratch = Vec::new();
        let again = [
            nash_oracle(MASTER_SEED, &mut scratch).digest,
            em_monotone(MASTER_SEED).digest,
            registration(MASTER_SEED).digest,
            end_to_end(MASTER_SEED).digest,
        ];
        let first = [&c1.digest, &c3.digest, &c5.digest, &c9.digest];
        let same = first.iter().zip(&again).filter(|(a, b)| **a == *b).count();
        Outcome {
            pass: same == 4,
            detail: format!("{same}/4 repeated runs byte-identical"),
            digest: String::new(),
        }
    });
    gate.report(10, "determinism", &c10, t, secs(900));

    println!("acceptance: {} of 10 criteria passed", 10 - gate.failures);
    if gate.failures > 0 {
        std::process::exit(1);
    }
}
