use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reseq_core::frameset::{FeatureArchive, FrameCollection, FrameRecord, LayerSpec, Raster, SourceKind};
use reseq_core::metrics::{
    compute_distance_matrix, fit_calibration, judge, lpips_distance, CalibrationConfig, CalibrationParams,
    CalibrationProblem, CalibrationWeights, JudgeParams, JudgmentTriple, Metric, MetricSource,
};

fn random_archive(rng: &mut ChaCha8Rng, frames: usize) -> FeatureArchive {
    let layers: Vec<LayerSpec> = (0..rng.random_range(1..=3))
        .map(|l| LayerSpec::new(format!("l{l}"), rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4)))
        .collect();
    let per_frame: usize = layers.iter().map(LayerSpec::numel).sum();
    let data = (0..frames * per_frame).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let ids = (0..frames).map(|i| format!("f{i}")).collect();
    FeatureArchive::new(ids, layers, data, false).unwrap().channel_unit_normalize().unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, archive: &FeatureArchive) -> CalibrationWeights {
    CalibrationWeights::new(
        archive.layers().iter().map(|l| (0..l.c).map(|_| rng.random_range(0.0..2.0)).collect()).collect(),
    )
    .unwrap()
}

/// Straight transcription of the weighted distance, one index at a time.
fn naive_lpips(archive: &FeatureArchive, i: usize, j: usize, w: &CalibrationWeights) -> f64 {
    let mut total = 0.0;
    for (l, spec) in archive.layers().iter().enumerate() {
        let (a, b) = (archive.tensor(i, l), archive.tensor(j, l));
        let mut layer = 0.0;
        for c in 0..spec.c {
            for h in 0..spec.h {
                for x in 0..spec.w {
                    let k = (c * spec.h + h) * spec.w + x;
                    let d = w.layers()[l][c] * (a[k] as f64 - b[k] as f64);
                    layer += d * d;
                }
            }
        }
        total += layer / (spec.h * spec.w) as f64;
    }
    total
}

fn unweighted(archive: &FeatureArchive, i: usize, j: usize) -> f64 {
    archive
        .layers()
        .iter()
        .enumerate()
        .map(|(l, spec)| {
            let (a, b) = (archive.tensor(i, l), archive.tensor(j, l));
            a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>() / spec.spatial() as f64
        })
        .sum()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn lpips_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let archive = random_archive(&mut rng, 3);
        let w = random_weights(&mut rng, &archive);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let got = lpips_distance(&archive, i, j, &w).unwrap();
            let want = naive_lpips(&archive, i, j, &w);
            assert!(rel_close(got, want, 1e-5), "{got} vs {want}");
        }
    }
}

#[test]
fn unit_weights_give_the_unweighted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..100 {
        let archive = random_archive(&mut rng, 2);
        let w = CalibrationWeights::uniform(&archive);
        let got = lpips_distance(&archive, 0, 1, &w).unwrap();
        assert!(rel_close(got, unweighted(&archive, 0, 1), 1e-5));
    }
}

fn random_judgments(rng: &mut ChaCha8Rng, frames: usize, count: usize) -> Vec<JudgmentTriple> {
    (0..count)
        .map(|_| JudgmentTriple {
            reference: format!("f{}", rng.random_range(0..frames)),
            distorted0: format!("f{}", rng.random_range(0..frames)),
            distorted1: format!("f{}", rng.random_range(0..frames)),
            h: rng.random_range(0.0..=1.0),
        })
        .collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let step = 1e-4;
    for _ in 0..20 {
        let archive = random_archive(&mut rng, 6);
        let problem = CalibrationProblem::new(&archive, &random_judgments(&mut rng, 6, 12)).unwrap();
        let base = CalibrationParams {
            weights: random_weights(&mut rng, &archive),
            judge: JudgeParams {
                a: rng.random_range(-3.0..3.0),
                b: rng.random_range(-1.0..1.0),
            },
        };
        let analytic = problem.gradient(&base);
        let flat = base.to_flat();
        for k in 0..flat.len() {
            let shifted = |delta: f64| {
                let mut f = flat.clone();
                f[k] += delta;
                problem.loss(&base.from_flat(&f))
            };
            let numeric = (shifted(step) - shifted(-step)) / (2.0 * step);
            // absolute floor for components that vanish
            let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
            assert!((analytic[k] - numeric).abs() <= 1e-3 * scale, "component {k}: {} vs {numeric}", analytic[k]);
        }
    }
}

/// Frames along a line: frame `i` is `i/(n-1)` of the way between two unit vectors.
fn line_archive(n: usize) -> FeatureArchive {
    let data = (0..n)
        .flat_map(|i| {
            let t = i as f32 / (n - 1) as f32 * std::f32::consts::FRAC_PI_2;
            [t.cos(), t.sin()]
        })
        .collect();
    let ids = (0..n).map(|i| format!("f{i}")).collect();
    FeatureArchive::new(ids, vec![LayerSpec::new("l", 2, 1, 1)], data, true).unwrap()
}

#[test]
fn separable_judgments_are_learned() {
    let archive = line_archive(8);
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let mut judgments = Vec::new();
    while judgments.len() < 30 {
        let mut t: Vec<usize> = (0..8).collect();
        rand::seq::SliceRandom::shuffle(t.as_mut_slice(), &mut rng);
        let (r, x0, x1) = (t[0], t[1], t[2]);
        // h = 1 means x1 is the closer one
        let (x0, x1) = if r.abs_diff(x1) < r.abs_diff(x0) { (x0, x1) } else { (x1, x0) };
        judgments.push(JudgmentTriple {
            reference: format!("f{r}"),
            distorted0: format!("f{x0}"),
            distorted1: format!("f{x1}"),
            h: 1.0,
        });
    }
    let fit = fit_calibration(&archive, &judgments, &CalibrationConfig::default()).unwrap();
    assert!(fit.final_loss <= fit.initial_loss);
    let problem = CalibrationProblem::new(&archive, &judgments).unwrap();
    for t in 0..judgments.len() {
        let (d0, d1) = problem.distances(t, &fit.weights);
        assert!(judge(fit.judge, d0, d1) > 0.5, "triple {t}");
    }
}

#[test]
fn balanced_judgment_loss_is_bounded_by_ln_two() {
    let archive = line_archive(3);
    let judgments = vec![JudgmentTriple {
        reference: "f1".into(),
        distorted0: "f0".into(),
        distorted1: "f2".into(),
        h: 0.5,
    }];
    let fit = fit_calibration(&archive, &judgments, &CalibrationConfig::default()).unwrap();
    assert!(fit.final_loss >= 2f64.ln() - 1e-12);
    assert!((fit.initial_loss - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn calibration_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let archive = random_archive(&mut rng, 6);
    let judgments = random_judgments(&mut rng, 6, 20);
    let config = CalibrationConfig {
        batch_size: Some(4),
        seed: 9,
        ..CalibrationConfig::default()
    };
    let a = fit_calibration(&archive, &judgments, &config).unwrap();
    let b = fit_calibration(&archive, &judgments, &config).unwrap();
    assert_eq!(a, b);
    assert!(a.weights.layers().iter().flatten().all(|w| *w >= 0.0));
}

fn random_frames(rng: &mut ChaCha8Rng, n: usize) -> FrameCollection {
    let frames = (0..n)
        .map(|i| {
            let data = (0..4 * 3 * 3).map(|_| rng.random_range(0.0f32..1.0)).collect();
            FrameRecord::with_pixels(format!("p{i}"), Raster::new(4, 3, data).unwrap())
        })
        .collect();
    FrameCollection::new(frames, SourceKind::Images).unwrap()
}

#[test]
fn matrices_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let archive = random_archive(&mut rng, 24);
    let frames = random_frames(&mut rng, 24);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut out: Vec<Vec<u8>> = [Metric::Lpips, Metric::Cosine, Metric::L2Feature]
                .into_iter()
                .map(|m| compute_distance_matrix(MetricSource::Features(&archive), m, None).unwrap().to_bytes())
                .collect();
            out.push(compute_distance_matrix(MetricSource::Frames(&frames), Metric::L2Image, None).unwrap().to_bytes());
            out
        })
    };
    assert_eq!(run(1), run(7));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metrics_are_symmetric_nonnegative_and_zero_on_the_diagonal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let archive = random_archive(&mut rng, 5);
        let w = random_weights(&mut rng, &archive);
        let frames = random_frames(&mut rng, 5);
        let matrices = [
            compute_distance_matrix(MetricSource::Features(&archive), Metric::Lpips, Some(&w)).unwrap(),
            compute_distance_matrix(MetricSource::Features(&archive), Metric::L2Feature, None).unwrap(),
            compute_distance_matrix(MetricSource::Frames(&frames), Metric::L2Image, None).unwrap(),
        ];
        for m in &matrices {
            for i in 0..5 {
                prop_assert_eq!(m.get(i, i), 0.0);
                for j in 0..5 {
                    prop_assert!(m.get(i, j) >= 0.0);
                    prop_assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
                }
            }
        }
    }
}
