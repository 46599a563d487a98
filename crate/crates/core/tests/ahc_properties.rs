mod common;

use common::*;
use egosocial::reid::{ahc_average_linkage, cluster_ahc, AhcParams, DistanceMatrix, Metric};
use egosocial::Execution;
use proptest::prelude::*;

fn params(cut: f64) -> AhcParams {
    AhcParams {
        metric: Metric::Euclidean,
        cut_threshold: cut,
        normalize_descriptors: false,
    }
}

fn run(d: &[Vec<f64>], cut: f64) -> Vec<Vec<usize>> {
    let dm = DistanceMatrix::from_condensed(d.len(), condensed(d), Metric::Euclidean).unwrap();
    partition_of(&ahc_average_linkage(&dm, &params(cut)).unwrap())
}

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4).prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(0.0f64..10.0, dim), 1..24))
}

/// Every group of `fine` sits inside one group of `coarse`.
fn refines(fine: &[Vec<usize>], coarse: &[Vec<usize>]) -> bool {
    fine.iter()
        .all(|g| coarse.iter().any(|c| g.iter().all(|x| c.contains(x))))
}

proptest! {
    #[test]
    fn matches_reference(pts in points(), cut in 0.1f64..12.0) {
        let d = euclidean_matrix(&pts);
        prop_assert_eq!(run(&d, cut), naive_average_linkage(&d, cut));
    }

    #[test]
    fn permutation_invariant(pts in points(), cut in 0.1f64..12.0, seed in any::<u64>()) {
        let n = pts.len();
        let mut perm: Vec<usize> = (0..n).collect();
        // cheap deterministic shuffle
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            perm.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let back = run(&euclidean_matrix(&permuted), cut)
            .into_iter()
            .map(|g| g.into_iter().map(|k| perm[k]).collect())
            .collect();
        prop_assert_eq!(canonical(back), run(&euclidean_matrix(&pts), cut));
    }

    #[test]
    fn scaling_distances_and_cut_together(pts in points(), cut in 0.1f64..12.0) {
        let d = euclidean_matrix(&pts);
        let scaled: Vec<Vec<f64>> = d.iter().map(|r| r.iter().map(|v| v * 4.0).collect()).collect();
        prop_assert_eq!(run(&scaled, cut * 4.0), run(&d, cut));
    }

    #[test]
    fn raising_the_cut_only_merges(pts in points(), lo in 0.1f64..6.0, extra in 0.0f64..6.0) {
        let d = euclidean_matrix(&pts);
        prop_assert!(refines(&run(&d, lo), &run(&d, lo + extra)));
    }

    #[test]
    fn translation_invariant_on_raw_descriptors(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 128), 2..12),
        shift in -3.0f64..3.0,
    ) {
        let mk = |rows: &[Vec<f64>]| -> Vec<egosocial::ingest::FaceObservation> {
            let t0 = ts("2016-03-07T10:00:00+01:00");
            rows.iter()
                .enumerate()
                .map(|(i, r)| obs_at("w", t0 + chrono::Duration::seconds(30 * i as i64), i, r.clone()))
                .collect()
        };
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let a = cluster_ahc(&mk(&rows), &params(6.0), Execution::Sequential).unwrap();
        let b = cluster_ahc(&mk(&shifted), &params(6.0), Execution::Parallel).unwrap();
        prop_assert_eq!(partition_of(&a), partition_of(&b));
    }
}
