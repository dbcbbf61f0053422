mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spf_core::evaluate::{detection_metrics, match_detections};
use spf_core::imagecore::{median_filter, Dims, Volume4D, Voxels};
use spf_core::mrftree::{build_mst, choose_root, CellTree};
use spf_core::track::{track_all, track_all_pf, TrackConfig};
use spf_core::Point;

fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)))
        .collect()
}

#[test]
fn prufer_decoding_yields_spanning_trees() {
    // Cayley: 5^3 distinct trees on 5 labelled nodes.
    let mut seen = std::collections::BTreeSet::new();
    for code in 0..125 {
        let seq = [code % 5, code / 5 % 5, code / 25];
        let mut e = prufer_edges(&seq, 5);
        e.sort_unstable();
        assert_eq!(e.len(), 4);
        seen.insert(e);
    }
    assert_eq!(seen.len(), 125);
}

#[test]
fn mst_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let n = rng.gen_range(1..=6);
        let pts = random_points(&mut rng, n, 50.0);
        let (w, edges) = exhaustive_mst(&pts);
        let tree = CellTree::build(pts).unwrap();
        assert_eq!(sorted_pairs(&tree.edges), edges);
        assert!((tree.total_weight() - w).abs() < 1e-9);
    }
}

#[test]
fn root_is_hop_center() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let pts = random_points(&mut rng, n, 30.0);
        let edges = build_mst(&pts).unwrap();
        let root = choose_root(n, &edges);
        assert_eq!(root, eccentricity_center(n, &sorted_pairs(&edges)));
    }
}

#[test]
fn median_matches_sorting() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let dims = Dims::new(2, 3, 5, 5);
        let data: Vec<u16> = (0..dims.len()).map(|_| rng.gen_range(0..1000)).collect();
        let w = [0; 3].map(|_| [1, 3, 5][rng.gen_range(0..3)]);
        let v = Volume4D::new(dims, Voxels::U16(data.clone())).unwrap();
        let out = median_filter(&v, w).unwrap();
        let Voxels::U16(got) = out.voxels() else { panic!() };
        let n = dims.frame_len();
        for t in 0..2 {
            let expect = brute_median(&data[t * n..(t + 1) * n], dims.frame_shape(), w);
            assert_eq!(&got[t * n..(t + 1) * n], &expect[..]);
        }
    }
}

#[test]
fn matching_is_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let n_det = rng.gen_range(0..=7);
        let det = random_points(&mut rng, n_det, 15.0);
        let n_ann = rng.gen_range(0..=7);
        let ann = random_points(&mut rng, n_ann, 15.0);
        let pairs = match_detections(&det, &ann, 5.0);
        assert!(is_valid_matching(&pairs, &det, &ann, 5.0));
        assert_eq!(pairs.len(), brute_max_matching(&det, &ann, 5.0));
    }
}

#[test]
fn eight_hits_two_spurious() {
    let ann: Vec<Point> = (0..10).map(|i| Point::new(20.0 * i as f64, 0.0, 0.0)).collect();
    let mut det: Vec<Point> = ann[..8].iter().map(|p| p + Point::new(1.0, 2.0, 0.5)).collect();
    det.push(Point::new(0.0, 50.0, 0.0));
    det.push(Point::new(90.0, -40.0, 0.0));
    let m = detection_metrics(&det, &ann, 5.0);
    assert_eq!((m.tp, m.fn_, m.fp), (8, 2, 2));
    assert!((m.tpr - 0.8).abs() < 1e-12 && (m.fdr - 0.2).abs() < 1e-12);
    assert_eq!(m.tp, brute_max_matching(&det, &ann, 5.0));
}

#[test]
fn single_cell_spf_equals_pf() {
    let dims = Dims::new(4, 4, 12, 12);
    let mut data = vec![0u8; dims.len()];
    for t in 0..4 {
        for dy in 0..3 {
            for dx in 0..3 {
                data[t * dims.frame_len() + 2 * 144 + (4 + dy) * 12 + 4 + dx + t % 2] = 200;
            }
        }
    }
    let v = Volume4D::new(dims, Voxels::U8(data)).unwrap();
    let c = vec![Point::new(5.0, 5.0, 6.0)];
    let cfg = TrackConfig {
        particles: 200,
        seed: 5,
        ..TrackConfig::default()
    };
    let spf = track_all(&v, &CellTree::build(c.clone()).unwrap(), &cfg).unwrap();
    let pf = track_all_pf(&v, &c, &cfg).unwrap();
    assert_eq!(spf.estimates, pf.estimates);
    assert_eq!(spf.status, pf.status);
}
