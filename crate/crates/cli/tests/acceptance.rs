//! Release gate. Each criterion prints one PASS/FAIL line with the
//! measured numbers; the test panics at the end if any line failed, so a
//! red run always shows the full scoreboard.
//!
//! Tolerances and budgets are pinned here, not in the library, so a
//! change to either is visible in review.

use std::process::Command;
use std::time::Instant;

use rand::distributions::Uniform;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

use biosketch::analysis::{
    eer, gs_curve, linkability_from_scores, log2_binomial, privacy_leakage, retrieval_metrics,
    zero_leakage_boundary, zero_leakage_boundary_code_aligned, Compromise, GsConfig, Scenario,
    ScoreSet,
};
use biosketch::deephash::{
    default_candidates, gradient_check, grid_search, toy_dataset, train_two_step, FusionMode,
    LossWeights, NetShape, ToyNetwork, TrainConfig,
};
use biosketch::feature::synth_population;
use biosketch::pipeline::{
    authenticate, derive_sketch, enroll_with_retry, issue_key, select_bits, PipelineError,
    SketchPolicy,
};
use biosketch::{BitChannelModel, FeatureVector, Gf256, RsCode, RsCodeParams, TemplateStore};

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, criterion: usize, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {criterion}: {verdict} ({detail})");
        if !pass {
            self.failures.push(format!("criterion {criterion}: {detail}"));
        }
    }
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate { failures: Vec::new() };

    let (pass, detail) = bounded_distance_decoding();
    gate.check(1, pass, detail);
    let (pass, detail) = pipeline_matches_sketch_equality();
    gate.check(2, pass, detail);
    let (pass, detail) = leakage_formulas();
    gate.check(3, pass, detail);
    let (pass, detail) = gar_security_tradeoff();
    gate.check(4, pass, detail);
    let (pass, detail) = eer_against_binomial_oracle();
    gate.check(5, pass, detail);
    let (pass, detail) = unlinkability_calibration();
    gate.check(6, pass, detail);
    let (pass, detail) = toy_trainer();
    gate.check(7, pass, detail);
    let (pass, detail) = retrieval_oracles();
    gate.check(8, pass, detail);
    let (pass, detail) = eval_reruns_are_byte_identical();
    gate.check(9, pass, detail);

    assert!(
        gate.failures.is_empty(),
        "{} criterion(s) failed:\n{}",
        gate.failures.len(),
        gate.failures.join("\n")
    );
}

/// 10,000 codewords per shape, each hit in exactly t symbols, must all
/// decode back to their message. Budget 30 s for all three shapes.
fn bounded_distance_decoding() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let mut ok: u64 = 0;
    let mut total: u64 = 0;
    for (n, k) in [(32usize, 7usize), (64, 13), (96, 13)] {
        let code = RsCode::new(RsCodeParams::new(n, k)).expect("valid shape");
        let t = code.t();
        let mut positions: Vec<usize> = (0..n).collect();
        for _ in 0..10_000 {
            let msg: Vec<Gf256> = (0..k).map(|_| Gf256(rng.gen())).collect();
            let mut word = code.encode(&msg).expect("encode");
            positions.shuffle(&mut rng);
            for &p in positions.iter().take(t) {
                word[p].0 ^= rng.gen_range(1..=255u8);
            }
            total += 1;
            if code.decode(&word).ok().as_deref() == Some(&msg[..]) {
                ok += 1;
            }
        }
    }
    let dt = start.elapsed().as_secs_f64();
    (
        ok == total && dt < 30.0,
        format!("{ok}/{total} t-error decodes exact in {dt:.1}s, budget 30s"),
    )
}

/// authenticate must equal direct sketch-digest comparison on every one
/// of 10,000 random (feature, key) cases, across both sketch policies.
fn pipeline_matches_sketch_equality() -> (bool, String) {
    let j = 512;
    let channel = BitChannelModel::uniform(j, 0.05, 0.5).expect("channel");
    let reliability = channel.reliability();
    let population = synth_population(2, channel, 0xACC2).expect("population");
    let code = RsCode::new(RsCodeParams::new(32, 7)).expect("code");
    let g = code.params().template_bits();
    let mut store = TemplateStore::new(code.params());
    let reference = population.references()[0].clone();
    let (enrolled_key, record) = enroll_with_retry(
        &reference,
        &reliability,
        g,
        &code,
        &mut store,
        "s0000",
        7,
        SketchPolicy::SystematicFallback,
    )
    .expect("enroll");
    let stored = record.digest;

    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2_0001);
    let mut agree: u64 = 0;
    let mut grants: u64 = 0;
    let total: u64 = 10_000;
    for case in 0..total {
        let policy = if case % 2 == 0 {
            SketchPolicy::SystematicFallback
        } else {
            SketchPolicy::Strict
        };
        let probe = if case % 4 < 2 {
            population
                .sample_genuine("s0000", 1, 1_000 + case)
                .expect("probe")
                .pop()
                .expect("one probe")
        } else {
            FeatureVector::new("sx", (0..j).map(|_| rng.gen_range(0..=1u8)).collect())
        };
        let key = if case % 3 == 0 {
            enrolled_key.clone()
        } else {
            issue_key(&reliability, g, rng.gen()).expect("key")
        };

        let decision = authenticate(&probe, &key, &code, &store, "s0000", policy).expect("auth");
        let template = select_bits(&probe, &key).expect("select");
        let direct = match derive_sketch(&template, &code, policy) {
            Ok((sketch, _)) => sketch.digest() == stored,
            Err(PipelineError::DecodeFailure) => false,
            Err(e) => panic!("unexpected sketch error: {e}"),
        };
        if decision.granted() == direct {
            agree += 1;
        }
        if decision.granted() {
            grants += 1;
        }
    }
    (
        agree == total && grants > 0,
        format!("{agree}/{total} decisions equal digest comparison, {grants} grants exercised"),
    )
}

/// Closed-form leakage: key only leaks nothing, key+sketch leaks exactly
/// the sketch length, sketch-only is discounted by the position-set
/// entropy with exact binomials. The zero-leakage boundary at J=1024 is
/// 789 unconstrained; the published figure 792 is the boundary on the
/// byte-aligned code grid (multiples of 8 with k <= n-8), which the
/// aligned search reproduces exactly. Budget 5 s.
fn leakage_formulas() -> (bool, String) {
    let start = Instant::now();
    let key_only = privacy_leakage(1024, 768, 104, Compromise::KeyOnly).expect("leak");
    let both = privacy_leakage(1024, 768, 104, Compromise::SketchAndKey).expect("leak");
    let lb768 = log2_binomial(1024, 768);
    let lb512 = log2_binomial(1024, 512);
    let sketch_leak = privacy_leakage(1024, 800, 792, Compromise::SketchOnly).expect("leak");
    let clamped = privacy_leakage(1024, 792, 784, Compromise::SketchOnly).expect("leak");
    let boundary = zero_leakage_boundary(1024);
    let aligned = zero_leakage_boundary_code_aligned(1024);
    let dt = start.elapsed().as_secs_f64();
    let pass = key_only == 0.0
        && both == 104.0
        && (lb768 - 825.630061).abs() < 1e-5
        && (lb512 - 1018.673900).abs() < 1e-5
        && (sketch_leak - 20.984378).abs() < 1e-5
        && clamped == 0.0
        && boundary == 789
        && aligned == 792
        && dt < 5.0;
    (
        pass,
        format!(
            "key 0.0, key+sketch {both}, sketch-only {sketch_leak:.6}; boundary {boundary} \
             unconstrained vs published 792 (documented exact-arithmetic gap), {aligned} on the \
             byte-aligned grid; {dt:.2}s, budget 5s"
        ),
    )
}

/// More exposed sketch bits must not raise the genuine accept rate, and
/// a longer template must beat a shorter one at the same sketch size.
/// The per-bit error ramp (mean 0.05) keeps bit stability heterogeneous;
/// a constant 0.05 channel makes the n comparison flat by construction.
/// Budget 5 min.
fn gar_security_tradeoff() -> (bool, String) {
    let start = Instant::now();
    let channel = BitChannelModel::ramp(1024, 0.05, 0.5).expect("channel");
    let population = synth_population(50, channel, 0xACC4).expect("population");
    let base = GsConfig {
        code_n: 96,
        code_k_list: vec![7, 10, 13],
        scenario: Scenario::StolenKey,
        genuine_probes_per_subject: 20,
        impostor_probes: 500,
        policy: SketchPolicy::SystematicFallback,
        seed: 0xACC4_0001,
    };
    let wide = gs_curve(&population, &base).expect("sweep");
    let narrow = gs_curve(
        &population,
        &GsConfig {
            code_n: 32,
            code_k_list: vec![13],
            ..base
        },
    )
    .expect("sweep");

    let gars: Vec<f64> = wide.points.iter().map(|p| p.gar).collect();
    let non_increasing = gars.windows(2).all(|w| w[1] <= w[0]);
    let wide_104 = wide
        .points
        .iter()
        .find(|p| p.k_bits == 104)
        .expect("k=104 point")
        .gar;
    let narrow_104 = narrow.points[0].gar;
    let dt = start.elapsed().as_secs_f64();
    (
        non_increasing && wide_104 > narrow_104 && dt < 300.0,
        format!(
            "GAR at n=768: k=56 {:.3}, k=80 {:.3}, k=104 {:.3} (non-increasing {}); \
             k=104 n=768 {:.3} > n=256 {:.3}; {dt:.1}s, budget 300s",
            gars[0], gars[1], gars[2], non_increasing, wide_104, narrow_104
        ),
    )
}

/// Well-separated binomial score distributions must give essentially
/// zero EER (the Hoeffding bound at the midpoint threshold is ~1e-45),
/// and identical distributions must give EER 1/2 up to sampling noise.
fn eer_against_binomial_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let genuine_dist = Binomial::new(1024, 0.05).expect("dist");
    let impostor_dist = Binomial::new(1024, 0.5).expect("dist");
    let draw = |dist: &Binomial, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..10_000).map(|_| dist.sample(rng) as f64 / 1024.0).collect()
    };

    let separated = ScoreSet::new(draw(&genuine_dist, &mut rng), draw(&impostor_dist, &mut rng))
        .expect("scores");
    let (eer_sep, _) = eer(&separated).expect("eer");
    // P(Bin(1024,.05)/1024 >= .275) and P(Bin(1024,.5)/1024 <= .275) are
    // both at most exp(-2*1024*0.225^2).
    let oracle_bound = (-2.0 * 1024.0 * 0.225_f64 * 0.225).exp();

    let same = ScoreSet::new(draw(&impostor_dist, &mut rng), draw(&impostor_dist, &mut rng))
        .expect("scores");
    let (eer_same, _) = eer(&same).expect("eer");

    let pass = eer_sep < 1e-3 && oracle_bound < 1e-3 && (eer_same - 0.5).abs() <= 0.02;
    (
        pass,
        format!(
            "separated EER {eer_sep:.6} < 1e-3 (oracle bound {oracle_bound:.1e}), \
             identical-distribution EER {eer_same:.4} within 0.5 +/- 0.02"
        ),
    )
}

/// The linkability score must sit at the noise floor when mated and
/// non-mated scores share a distribution and near 1 when they are
/// disjoint. 10^4 scores per family, budget 10 s.
fn unlinkability_calibration() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let draw = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let dist = Uniform::new(lo, hi);
        (0..10_000).map(|_| dist.sample(rng)).collect()
    };

    let same = linkability_from_scores(
        &draw(0.0, 1.0, &mut rng),
        &draw(0.0, 1.0, &mut rng),
        50,
        1.0,
    )
    .expect("link");
    let disjoint = linkability_from_scores(
        &draw(0.0, 0.3, &mut rng),
        &draw(0.7, 1.0, &mut rng),
        50,
        1.0,
    )
    .expect("link");
    let dt = start.elapsed().as_secs_f64();
    (
        same.d_sys < 0.05 && disjoint.d_sys > 0.95 && dt < 10.0,
        format!(
            "same-distribution D_sys {:.4} < 0.05, disjoint D_sys {:.4} > 0.95; {dt:.2}s, \
             budget 10s",
            same.d_sys, disjoint.d_sys
        ),
    )
}

/// Analytic gradients against central differences on 100 random
/// configurations, the continuation schedule on the pinned dataset, and
/// the coordinate-descent grid search on a separable objective.
fn toy_trainer() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC7);
    let mut worst_rel: f64 = 0.0;
    for case in 0..100 {
        let fusion = if case % 2 == 0 { FusionMode::Fca } else { FusionMode::Bla };
        let shape = NetShape {
            d_in_face: rng.gen_range(2..5),
            d_in_iris: rng.gen_range(2..5),
            d_face: rng.gen_range(2..5),
            d_iris: rng.gen_range(2..5),
            d_joint: rng.gen_range(2..6),
            hash_bits: rng.gen_range(2..6),
            classes: rng.gen_range(2..5),
            fusion,
        };
        let mut net = ToyNetwork::init(shape, rng.gen()).expect("net");
        net.beta_bw = *[1.0, 4.0, 16.0].choose(&mut rng).expect("bandwidth");
        let data = toy_dataset(
            shape.classes,
            2,
            shape.d_in_face,
            shape.d_in_iris,
            0.4,
            rng.gen(),
        )
        .expect("dataset");
        let weights = LossWeights {
            alpha: rng.gen_range(0.5..8.0),
            beta: rng.gen_range(0.0..4.0),
            gamma: rng.gen_range(0.0..4.0),
            lambda: rng.gen_range(0.0..0.1),
        };
        let rel = gradient_check(&net, &data, &weights, 1e-5).expect("gradient check");
        worst_rel = worst_rel.max(rel);
    }
    let gradients_ok = worst_rel <= 1e-4;

    let data = toy_dataset(4, 16, 8, 8, 0.25, 100).expect("dataset");
    let shape = NetShape {
        d_in_face: 8,
        d_in_iris: 8,
        d_face: 8,
        d_iris: 8,
        d_joint: 16,
        hash_bits: 16,
        classes: 4,
        fusion: FusionMode::Fca,
    };
    let mut net = ToyNetwork::init(shape, 101).expect("net");
    let weights = LossWeights { alpha: 8.0, beta: 2.0, gamma: 2.0, lambda: 1e-3 };
    let report =
        train_two_step(&mut net, &data, &weights, &TrainConfig::default()).expect("training");
    let trained_ok = report.final_mean_abs_activation >= 0.95 && report.final_balance <= 0.1;

    let grid = grid_search(
        &default_candidates(),
        |a, b, g| -((a - 8.0).powi(2) + (b - 2.0).powi(2) + (g - 2.0).powi(2)),
        10,
    )
    .expect("grid search");
    let grid_ok = (grid.alpha, grid.beta, grid.gamma) == (8.0, 2.0, 2.0);

    (
        gradients_ok && trained_ok && grid_ok,
        format!(
            "worst gradient error {worst_rel:.2e} over 100 configs (tol 1e-4); schedule \
             (1,2,4,8,16) gives mean |activation| {:.4} >= 0.95, balance {:.4} <= 0.1; grid \
             search returned ({}, {}, {})",
            report.final_mean_abs_activation, report.final_balance, grid.alpha, grid.beta,
            grid.gamma
        ),
    )
}

/// Degenerate identical-code input must give MAP exactly 1; random codes
/// over balanced classes must score at the class prior.
fn retrieval_oracles() -> (bool, String) {
    let one_code: Vec<u8> = vec![1, 0, 1, 1, 0, 1, 0, 0];
    let db: Vec<Vec<u8>> = vec![one_code.clone(); 40];
    let db_labels = vec![0usize; 40];
    let queries: Vec<Vec<u8>> = vec![one_code; 10];
    let query_labels = vec![0usize; 10];
    let identical =
        retrieval_metrics(&db, &db_labels, &queries, &query_labels, 40, 2, &[1, 5])
            .expect("metrics");
    let exact = identical.map_at_r == 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(0xACC8);
    let mut random_codes = |count: usize| -> Vec<Vec<u8>> {
        (0..count)
            .map(|_| (0..64).map(|_| rng.gen_range(0..=1u8)).collect())
            .collect()
    };
    let db = random_codes(1000);
    let db_labels: Vec<usize> = (0..1000).map(|i| i % 10).collect();
    let queries = random_codes(200);
    let query_labels: Vec<usize> = (0..200).map(|i| i % 10).collect();
    let random = retrieval_metrics(&db, &db_labels, &queries, &query_labels, 1000, 2, &[1, 10])
        .expect("metrics");
    let near_prior = (random.map_at_r - 0.1).abs() <= 0.02;

    (
        exact && near_prior,
        format!(
            "identical codes MAP {} (exact 1.0 required); random 64-bit codes over 10 classes \
             MAP {:.4} within 0.1 +/- 0.02",
            identical.map_at_r, random.map_at_r
        ),
    )
}

const RERUN_CONFIG: &str = r#"
[experiment]
name = "acceptance-rerun"
seed = 11

[population]
subjects = 12
samples_per_subject = 6
j = 256
p_genuine = 0.05
p_impostor = 0.5
channel = "ramp"

[code]
n = 16
k = 5
k_sweep = [3, 5, 7]

[eval]
analyses = ["distributions", "eer", "roc", "gs", "privacy", "unlink", "retrieval"]
trials = 80
gs_probes_per_subject = 4
gs_impostor_probes = 100

[unlink]
databases = 2
bins = 30
max_non_mated = 300

[retrieval]
r_cutoff = 200
radius = 2
k_points = [1, 5]
queries_per_subject = 2
"#;

/// The eval command run twice with one config, plus once more pinned to
/// a single worker, must produce byte-identical files.
fn eval_reruns_are_byte_identical() -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_biosketch");
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("eval.toml");
    std::fs::write(&config, RERUN_CONFIG).expect("write config");

    let mut dirs = Vec::new();
    for (name, jobs) in [("r1", None), ("r2", None), ("r3", Some("1"))] {
        let out = dir.path().join(name);
        let mut cmd = Command::new(bin);
        cmd.arg("eval")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out);
        if let Some(j) = jobs {
            cmd.arg("--jobs").arg(j);
        }
        let output = cmd.output().expect("run eval");
        if !output.status.success() {
            return (
                false,
                format!(
                    "eval run {name} exited {:?}: {}",
                    output.status.code(),
                    String::from_utf8_lossy(&output.stderr)
                ),
            );
        }
        dirs.push(out);
    }

    let list = |d: &std::path::Path| -> Vec<String> {
        let mut names: Vec<String> = std::fs::read_dir(d)
            .expect("read out dir")
            .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    };
    let names = list(&dirs[0]);
    if names.is_empty() {
        return (false, "eval produced no output files".into());
    }
    for other in &dirs[1..] {
        if list(other) != names {
            return (false, "output file sets differ between runs".into());
        }
    }
    let mut compared = 0;
    for name in &names {
        let first = std::fs::read(dirs[0].join(name)).expect("read file");
        for other in &dirs[1..] {
            let bytes = std::fs::read(other.join(name)).expect("read file");
            if bytes != first {
                return (false, format!("{name} differs between reruns"));
            }
            compared += 1;
        }
    }
    (
        true,
        format!(
            "{} files byte-identical across 3 runs ({compared} comparisons), including a \
             single-worker run",
            names.len()
        ),
    )
}
