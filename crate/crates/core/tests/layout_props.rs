use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reseq_core::frameset::{DistanceMatrix, FrameCollection, FrameRecord, Raster, SourceKind};
use reseq_core::graphseq::{build_graph, minimum_spanning_tree, SequenceConstraints, SequenceKind, SequenceResult};
use reseq_core::layout::{compose, embed_2d, embed_mst_2d, plan_layout, EmbeddingSource, LayoutOptions, LayoutStyle};

fn random_matrix(seed: u64, n: usize) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..n).map(|i| format!("v{i}")).collect();
    DistanceMatrix::from_upper(ids, "t", |_, _| rng.random_range(0.1..3.0)).unwrap()
}

/// Solid frames of distinct colours and assorted sizes.
fn swatches(k: usize, seed: u64) -> (FrameCollection, Vec<[u8; 3]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut colours = Vec::new();
    let frames = (0..k)
        .map(|i| {
            let c = [(20 * i + 10) as u8, rng.random_range(0..200), 255 - (20 * i) as u8];
            colours.push(c);
            let rgb = c.map(|v| v as f32 / 255.0);
            let (w, h) = (rng.random_range(12..30), rng.random_range(12..30));
            FrameRecord::with_pixels(format!("s{i}"), Raster::filled(w, h, rgb).unwrap())
        })
        .collect();
    (FrameCollection::new(frames, SourceKind::Images).unwrap(), colours)
}

fn sequence(order: Vec<String>) -> SequenceResult {
    SequenceResult {
        kind: SequenceKind::Path,
        order,
        total_cost: 0.0,
        solver: "manual".into(),
        seed: None,
        constraints: SequenceConstraints::default(),
    }
}

#[test]
fn linear_sheet_reads_back_in_order() {
    let (frames, colours) = swatches(7, 1);
    let seq = sequence(["s3", "s0", "s6", "s1", "s5", "s2", "s4"].map(String::from).to_vec());
    let options = LayoutOptions::default();
    let sheet = plan_layout(&seq, &frames, LayoutStyle::Linear, &options).unwrap();
    let canvas = compose(&sheet, &seq, &frames, &options).unwrap();

    // scan the middle row left to right, collecting colour runs
    let y = sheet.height / 2;
    let mut seen: Vec<[u8; 3]> = Vec::new();
    for x in 0..sheet.width {
        let px = canvas.get_pixel(x, y).0;
        if px != options.background && seen.last() != Some(&px) {
            seen.push(px);
        }
    }
    let expected: Vec<[u8; 3]> = seq.order.iter().map(|id| colours[id[1..].parse::<usize>().unwrap()]).collect();
    assert_eq!(seen, expected);
}

#[test]
fn radial_sheet_reads_back_counterclockwise() {
    let (frames, colours) = swatches(9, 2);
    let seq = sequence((0..9).rev().map(|i| format!("s{i}")).collect());
    let options = LayoutOptions::default();
    let sheet = plan_layout(&seq, &frames, LayoutStyle::Radial, &options).unwrap();
    let canvas = compose(&sheet, &seq, &frames, &options).unwrap();
    let c = sheet.width as f64 / 2.0;

    let mut found: Vec<(f64, [u8; 3])> = sheet
        .placements
        .iter()
        .map(|p| {
            let px = canvas.get_pixel(p.center[0] as u32, p.center[1] as u32).0;
            let angle = (c - p.center[1]).atan2(p.center[0] - c).rem_euclid(std::f64::consts::TAU);
            (angle, px)
        })
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let expected: Vec<[u8; 3]> = seq.order.iter().map(|id| colours[id[1..].parse::<usize>().unwrap()]).collect();
    assert_eq!(found.into_iter().map(|f| f.1).collect::<Vec<_>>(), expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embeddings_are_exactly_reproducible(seed in any::<u64>(), n in 2usize..20) {
        let m = random_matrix(seed, n);
        let t = minimum_spanning_tree(&build_graph(&m).unwrap());
        for source in [EmbeddingSource::TreeGeodesic, EmbeddingSource::RawMatrix] {
            let a = embed_2d(&t, &m, source).unwrap();
            let b = embed_2d(&minimum_spanning_tree(&build_graph(&m).unwrap()), &m, source).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.coords.len(), n);
            prop_assert!(a.coords.iter().flatten().all(|v| v.is_finite()));
            prop_assert!(a.stress.is_finite() && a.stress >= 0.0);
        }
    }

    #[test]
    fn largest_coordinate_on_each_axis_is_positive(seed in any::<u64>(), n in 3usize..20) {
        let m = random_matrix(seed, n);
        let e = embed_mst_2d(&minimum_spanning_tree(&build_graph(&m).unwrap()), &m).unwrap();
        for axis in 0..2 {
            let peak = e.coords.iter().map(|c| c[axis]).fold(0.0f64, |acc, v| if v.abs() > acc.abs() + 1e-9 { v } else { acc });
            prop_assert!(peak >= 0.0);
        }
    }
}
