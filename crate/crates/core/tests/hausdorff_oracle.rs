//! The Hausdorff implementation against a naive triple-loop oracle, plus the
//! metric axioms of the l2 ground on random sets.

use ltae_core::metrics::{ground_distance, hausdorff, pairwise_distances, GroundMetric, ImageSet};
use ltae_core::nn::{DenseMatrix, Rng};

/// Naive sup-inf oracle: explicit loops, no blocking, no argmin bookkeeping.
fn brute_force_hausdorff(u: &ImageSet, v: &ImageSet, ground: GroundMetric) -> f64 {
    let directed = |a: &ImageSet, b: &ImageSet| {
        let mut sup = f64::NEG_INFINITY;
        for i in 0..a.len() {
            let mut inf = f64::INFINITY;
            for j in 0..b.len() {
                let d = ground_distance(a.image(i), b.image(j), ground).unwrap();
                if d < inf {
                    inf = d;
                }
            }
            if inf > sup {
                sup = inf;
            }
        }
        sup
    };
    directed(u, v).max(directed(v, u))
}

fn random_set(rng: &mut Rng, max_points: usize, dim: usize) -> ImageSet {
    let n = 1 + rng.below(max_points);
    ImageSet::new(DenseMatrix::from_vec(n, dim, rng.uniform_vec(0.0, 1.0, n * dim)).unwrap())
}

#[test]
fn matches_brute_force_oracle_exactly() {
    let mut rng = Rng::new(1001);
    for trial in 0..500 {
        let dim = 1 + rng.below(10);
        let u = random_set(&mut rng, 20, dim);
        let v = random_set(&mut rng, 20, dim);
        let ground = if trial % 2 == 0 {
            GroundMetric::L2
        } else {
            GroundMetric::cross_entropy()
        };
        let report = hausdorff(&u, &v, ground).unwrap();
        let oracle = brute_force_hausdorff(&u, &v, ground);
        assert_eq!(
            report.distance, oracle,
            "trial {trial}: {} vs oracle {oracle}",
            report.distance
        );
        // The reported directed terms and argpairs must be consistent.
        assert_eq!(report.distance, report.forward.max(report.backward));
        let (fi, fj) = report.argpairs.forward;
        let refwd = ground_distance(u.image(fi), v.image(fj), ground).unwrap();
        assert_eq!(refwd, report.forward);
    }
}

#[test]
fn pairwise_matches_scalar_loop_oracle() {
    let mut rng = Rng::new(7007);
    for _ in 0..20 {
        let dim = 1 + rng.below(8);
        let u = random_set(&mut rng, 7, dim);
        let v = random_set(&mut rng, 5, dim);
        for ground in [GroundMetric::L2, GroundMetric::cross_entropy()] {
            let m = pairwise_distances(&u, &v, ground).unwrap();
            for i in 0..u.len() {
                for j in 0..v.len() {
                    assert_eq!(
                        m.get(i, j),
                        ground_distance(u.image(i), v.image(j), ground).unwrap()
                    );
                }
            }
        }
    }
}

/// Exercises the column-block streaming path with sets larger than one block.
#[test]
fn blockwise_path_agrees_with_oracle_on_large_sets() {
    let mut rng = Rng::new(5005);
    let u = ImageSet::new(DenseMatrix::from_vec(30, 4, rng.uniform_vec(0.0, 1.0, 120)).unwrap());
    let v = ImageSet::new(DenseMatrix::from_vec(600, 4, rng.uniform_vec(0.0, 1.0, 2400)).unwrap());
    for ground in [GroundMetric::L2, GroundMetric::cross_entropy()] {
        let report = hausdorff(&u, &v, ground).unwrap();
        assert_eq!(report.distance, brute_force_hausdorff(&u, &v, ground));
    }
}

#[test]
fn l2_hausdorff_satisfies_metric_axioms() {
    let mut rng = Rng::new(2002);
    for trial in 0..1000 {
        let dim = 1 + rng.below(6);
        let u = random_set(&mut rng, 8, dim);
        let v = random_set(&mut rng, 8, dim);
        let w = random_set(&mut rng, 8, dim);
        let d = |a: &ImageSet, b: &ImageSet| hausdorff(a, b, GroundMetric::L2).unwrap().distance;
        // identity
        assert_eq!(d(&u, &u), 0.0, "trial {trial}");
        // symmetry
        let uv = d(&u, &v);
        let vu = d(&v, &u);
        assert!((uv - vu).abs() <= 1e-12, "trial {trial}: {uv} vs {vu}");
        // triangle inequality
        let uw = d(&u, &w);
        let vw = d(&v, &w);
        assert!(
            uw <= uv + vw + 1e-12,
            "trial {trial}: d(u,w)={uw} > d(u,v)+d(v,w)={}",
            uv + vw
        );
    }
}

/// The cross-entropy ground is documented as a non-metric; make sure the
/// code does not accidentally symmetrize it.
#[test]
fn cross_entropy_ground_is_asymmetric() {
    let u = vec![0.2, 0.9];
    let v = vec![0.7, 0.4];
    let g = GroundMetric::cross_entropy();
    let uv = ground_distance(&u, &v, g).unwrap();
    let vu = ground_distance(&v, &u, g).unwrap();
    assert!((uv - vu).abs() > 1e-6, "{uv} vs {vu}");
}
