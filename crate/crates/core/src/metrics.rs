//! Set-similarity evaluation: ground distances, all-pairs distances, directed
//! and symmetric Hausdorff distance, diameter, and multi-replicate reporting.
//!
//! The symmetric distance is `max(forward, backward)` where `forward` is the
//! sup over the first set of the inf over the second. The cross-entropy
//! ground is not a metric (asymmetric, nonzero self-distance); whenever it is
//! used, the first argument of the ground distance is the target and only the
//! second is clamped, and the report records which ground produced it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

/// Column-block width used to stream large pairwise computations.
const BLOCK: usize = 256;

/// A set of images, one flattened image per row, pixels nominally in [0, 1].
/// Corrupted sets may carry values outside that range; the cross-entropy
/// ground clamps only its second argument.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSet {
    pixels: DenseMatrix,
}

impl ImageSet {
    pub fn new(pixels: DenseMatrix) -> ImageSet {
        ImageSet { pixels }
    }

    pub fn len(&self) -> usize {
        self.pixels.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.pixels.cols()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        self.pixels.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.pixels
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.pixels
    }

    /// Copy out a subset by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> ImageSet {
        let mut out = DenseMatrix::zeros(indices.len(), self.dim());
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.pixels.row(i));
        }
        ImageSet::new(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundMetric {
    L2,
    CrossEntropy { clamp_delta: f64 },
}

impl GroundMetric {
    pub fn cross_entropy() -> GroundMetric {
        GroundMetric::CrossEntropy { clamp_delta: 1e-7 }
    }

    pub fn cross_entropy_with_delta(clamp_delta: f64) -> Result<GroundMetric> {
        if !(clamp_delta > 0.0 && clamp_delta < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "clamp_delta must lie in (0, 0.5), got {clamp_delta}"
            )));
        }
        Ok(GroundMetric::CrossEntropy { clamp_delta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GroundMetric::L2 => "l2",
            GroundMetric::CrossEntropy { .. } => "cross_entropy",
        }
    }
}

/// Distance between two individual images under the chosen ground.
pub fn ground_distance(u: &[f64], v: &[f64], ground: GroundMetric) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape(
            "ground_distance",
            format!("{}", u.len()),
            format!("{}", v.len()),
        ));
    }
    Ok(match ground {
        GroundMetric::L2 => l2_distance(u, v),
        GroundMetric::CrossEntropy { clamp_delta } => {
            let mut ln_v = vec![0.0; v.len()];
            let mut ln_1mv = vec![0.0; v.len()];
            clamped_logs(v, clamp_delta, &mut ln_v, &mut ln_1mv);
            cross_entropy_from_logs(u, &ln_v, &ln_1mv)
        }
    })
}

#[inline]
fn l2_distance(u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..u.len() {
        let d = u[k] - v[k];
        acc += d * d;
    }
    acc.sqrt()
}

#[inline]
fn clamped_logs(v: &[f64], delta: f64, ln_v: &mut [f64], ln_1mv: &mut [f64]) {
    for k in 0..v.len() {
        let c = v[k].clamp(delta, 1.0 - delta);
        ln_v[k] = c.ln();
        ln_1mv[k] = (1.0 - c).ln();
    }
}

#[inline]
fn cross_entropy_from_logs(target: &[f64], ln_v: &[f64], ln_1mv: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..target.len() {
        acc += target[k] * ln_v[k] + (1.0 - target[k]) * ln_1mv[k];
    }
    -acc
}

fn check_dims(u: &ImageSet, v: &ImageSet, context: &'static str) -> Result<()> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::Empty(context));
    }
    if u.dim() != v.dim() {
        return Err(Error::shape(
            context,
            format!("image dim {}", u.dim()),
            format!("{}", v.dim()),
        ));
    }
    Ok(())
}

/// Full matrix of ground distances, entry `(i, j) = d(U_i, V_j)`.
///
/// Computed in column blocks so memory stays bounded while rows are filled
/// in parallel; every entry is produced by the same scalar accumulation as
/// `ground_distance`, so results are identical at any thread count.
pub fn pairwise_distances(u: &ImageSet, v: &ImageSet, ground: GroundMetric) -> Result<DenseMatrix> {
    check_dims(u, v, "pairwise_distances")?;
    let (n_u, n_v) = (u.len(), v.len());
    let mut out = DenseMatrix::zeros(n_u, n_v);

    for block_start in (0..n_v).step_by(BLOCK) {
        let block_end = (block_start + BLOCK).min(n_v);
        let logs = match ground {
            GroundMetric::CrossEntropy { clamp_delta } => {
                Some(block_logs(v, block_start, block_end, clamp_delta))
            }
            GroundMetric::L2 => None,
        };
        // Rows are independent; each entry accumulates sequentially over pixels.
        let rows: Vec<(usize, Vec<f64>)> = (0..n_u)
            .into_par_iter()
            .map(|i| {
                let ui = u.image(i);
                let mut row = vec![0.0; block_end - block_start];
                for (o, j) in (block_start..block_end).enumerate() {
                    row[o] = match (&ground, &logs) {
                        (GroundMetric::L2, _) => l2_distance(ui, v.image(j)),
                        (GroundMetric::CrossEntropy { .. }, Some((ln_v, ln_1mv))) => {
                            let off = o * u.dim();
                            cross_entropy_from_logs(
                                ui,
                                &ln_v[off..off + u.dim()],
                                &ln_1mv[off..off + u.dim()],
                            )
                        }
                        _ => unreachable!(),
                    };
                }
                (i, row)
            })
            .collect();
        for (i, row) in rows {
            out.row_mut(i)[block_start..block_end].copy_from_slice(&row);
        }
    }
    Ok(out)
}

fn block_logs(v: &ImageSet, start: usize, end: usize, delta: f64) -> (Vec<f64>, Vec<f64>) {
    let dim = v.dim();
    let mut ln_v = vec![0.0; (end - start) * dim];
    let mut ln_1mv = vec![0.0; (end - start) * dim];
    for (o, j) in (start..end).enumerate() {
        clamped_logs(
            v.image(j),
            delta,
            &mut ln_v[o * dim..(o + 1) * dim],
            &mut ln_1mv[o * dim..(o + 1) * dim],
        );
    }
    (ln_v, ln_1mv)
}

/// One directed Hausdorff term: `max_i min_j d(A_i, B_j)` with `A_i` as the
/// ground-distance target. Ties break toward the lowest index.
/// Returns (value, index in A, index in B).
fn directed(a: &ImageSet, b: &ImageSet, ground: GroundMetric) -> (f64, usize, usize) {
    let n_a = a.len();
    let n_b = b.len();
    let mut mins = vec![(f64::INFINITY, 0usize); n_a];

    for block_start in (0..n_b).step_by(BLOCK) {
        let block_end = (block_start + BLOCK).min(n_b);
        let logs = match ground {
            GroundMetric::CrossEntropy { clamp_delta } => {
                Some(block_logs(b, block_start, block_end, clamp_delta))
            }
            GroundMetric::L2 => None,
        };
        mins.par_iter_mut().enumerate().for_each(|(i, entry)| {
            let ai = a.image(i);
            for (o, j) in (block_start..block_end).enumerate() {
                let d = match (&ground, &logs) {
                    (GroundMetric::L2, _) => l2_distance(ai, b.image(j)),
                    (GroundMetric::CrossEntropy { .. }, Some((ln_v, ln_1mv))) => {
                        let off = o * a.dim();
                        cross_entropy_from_logs(
                            ai,
                            &ln_v[off..off + a.dim()],
                            &ln_1mv[off..off + a.dim()],
                        )
                    }
                    _ => unreachable!(),
                };
                if d < entry.0 {
                    *entry = (d, j);
                }
            }
        });
    }

    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for (i, &(d, j)) in mins.iter().enumerate() {
        if d > best.0 {
            best = (d, i, j);
        }
    }
    best
}

/// Index pairs attaining the two directed suprema, `(index in U, index in V)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgPairs {
    pub forward: (usize, usize),
    pub backward: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffReport {
    pub ground: String,
    pub clamp_delta: Option<f64>,
    pub forward: f64,
    pub backward: f64,
    pub distance: f64,
    pub n_u: usize,
    pub n_v: usize,
    pub argpairs: ArgPairs,
}

impl HausdorffReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Hausdorff distance between two nonempty image sets.
///
/// `forward` takes each image of `u` to its nearest image of `v`; `backward`
/// the reverse, with the `v` image as the ground-distance target.
pub fn hausdorff(u: &ImageSet, v: &ImageSet, ground: GroundMetric) -> Result<HausdorffReport> {
    check_dims(u, v, "hausdorff")?;
    let (fwd, fu, fv) = directed(u, v, ground);
    let (bwd, bv, bu) = directed(v, u, ground);
    let clamp_delta = match ground {
        GroundMetric::CrossEntropy { clamp_delta } => Some(clamp_delta),
        GroundMetric::L2 => None,
    };
    Ok(HausdorffReport {
        ground: ground.name().to_string(),
        clamp_delta,
        forward: fwd,
        backward: bwd,
        distance: fwd.max(bwd),
        n_u: u.len(),
        n_v: v.len(),
        argpairs: ArgPairs {
            forward: (fu, fv),
            backward: (bu, bv),
        },
    })
}

/// Diameter of a set: the largest pairwise distance. L2 ground only.
pub fn diameter(u: &ImageSet, ground: GroundMetric) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::Empty("diameter"));
    }
    if !matches!(ground, GroundMetric::L2) {
        return Err(Error::InvalidConfig(
            "diameter requires the l2 ground metric".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for i in 0..u.len() {
        for j in (i + 1)..u.len() {
            let d = l2_distance(u.image(i), u.image(j));
            if d > best {
                best = d;
            }
        }
    }
    Ok(best)
}

/// Hausdorff distances of several replicate sets against a reference set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub ground: String,
    pub distances: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl ReplicateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per replicate: `replicate,distance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,distance\n");
        for (i, d) in self.distances.iter().enumerate() {
            out.push_str(&format!("{i},{d}\n"));
        }
        out
    }
}

/// Evaluate `hausdorff(train, replicate)` per replicate and report the mean
/// and sample standard deviation (zero for a single replicate).
pub fn replicate_report(
    train: &ImageSet,
    replicates: &[ImageSet],
    ground: GroundMetric,
) -> Result<ReplicateReport> {
    if replicates.is_empty() {
        return Err(Error::Empty("replicate_report"));
    }
    let mut distances = Vec::with_capacity(replicates.len());
    for rep in replicates {
        distances.push(hausdorff(train, rep, ground)?.distance);
    }
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let std = if distances.len() > 1 {
        (distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ReplicateReport {
        ground: ground.name().to_string(),
        distances,
        mean,
        std,
    })
}
