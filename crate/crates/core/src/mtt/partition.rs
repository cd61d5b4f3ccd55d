use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use super::{MarginalGrad, MarginalTable, PotentialGrad, PotentialTable};
use crate::error::{Error, Result};

/// Largest accepted 1-norm condition estimate of the root-augmented Laplacian.
pub const CONDITION_LIMIT: f64 = 1e12;

/// The factored root-augmented Laplacian of a compacted table.
struct Laplacian {
    /// Stabilized arc weights `exp(f_ij - shift)`, zero on the diagonal.
    weights: Array2<f64>,
    /// Stabilized root weights `exp(f_i^r - shift)`.
    root_weights: Array1<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
    shift: f64,
}

impl Laplacian {
    fn build(table: &PotentialTable) -> Result<Self> {
        debug_assert!(table.is_fully_valid());
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "matrix-tree computation needs at least one unmasked node".into(),
            ));
        }

        let arc = table.arc();
        let root = table.root();

        let mut shift = root.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    shift = shift.max(arc[[i, j]]);
                }
            }
        }

        let weights =
            Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { (arc[[i, j]] - shift).exp() });
        let root_weights = root.mapv(|r| (r - shift).exp());

        // Row 0 holds root weights; every other row is the ordinary
        // Laplacian row with incoming weight sums on the diagonal.
        let incoming = weights.sum_axis(ndarray::Axis(0));
        let lap = DMatrix::from_fn(n, n, |h, m| {
            if h == 0 {
                root_weights[m]
            } else if h == m {
                incoming[m]
            } else {
                -weights[[h, m]]
            }
        });

        let lu = lap.clone().lu();
        let mut log_det = 0.0;
        let mut sign = lu.p().determinant::<f64>();
        let u = lu.u();
        for k in 0..n {
            let pivot = u[(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Numerical(format!(
                    "Laplacian of {} nodes is singular (pivot {} is {})",
                    n, k, pivot
                )));
            }
            sign *= pivot.signum();
            log_det += pivot.abs().ln();
        }
        if sign <= 0.0 {
            return Err(Error::Numerical(format!(
                "Laplacian of {} nodes has non-positive determinant",
                n
            )));
        }

        let inverse = lu.try_inverse().ok_or_else(|| {
            Error::Numerical(format!("Laplacian of {} nodes could not be inverted", n))
        })?;

        let condition = one_norm(&lap) * one_norm(&inverse);
        if !condition.is_finite() || condition > CONDITION_LIMIT {
            return Err(Error::Numerical(format!(
                "Laplacian of {} nodes is ill-conditioned (estimate {:.3e} > {:.0e})",
                n, condition, CONDITION_LIMIT
            )));
        }

        Ok(Laplacian {
            weights,
            root_weights,
            inverse,
            log_det,
            shift,
        })
    }

    fn n(&self) -> usize {
        self.root_weights.len()
    }

    fn log_partition(&self) -> f64 {
        // Every tree has exactly n edges counting the ROOT edge.
        self.log_det + self.n() as f64 * self.shift
    }

    fn marginals(&self) -> (Array2<f64>, Array1<f64>) {
        let n = self.n();
        let inv = &self.inverse;
        let mut arc = Array2::zeros((n, n));
        for h in 0..n {
            for m in 0..n {
                if h == m {
                    continue;
                }
                let mut factor = 0.0;
                if m != 0 {
                    factor += inv[(m, m)];
                }
                if h != 0 {
                    factor -= inv[(m, h)];
                }
                arc[[h, m]] = clamp_unit(self.weights[[h, m]] * factor);
            }
        }
        let root = Array1::from_shape_fn(n, |m| clamp_unit(self.root_weights[m] * inv[(m, 0)]));
        (arc, root)
    }

    /// Reverse-mode pass through `marginals` and `log_partition`.
    fn backward(&self, upstream: &MarginalGrad) -> (Array2<f64>, Array1<f64>) {
        let n = self.n();
        let inv = &self.inverse;
        let w = &self.weights;
        let r = &self.root_weights;

        let mut weights_bar = Array2::<f64>::zeros((n, n));
        let mut root_bar = Array1::<f64>::zeros(n);
        let mut inv_bar = DMatrix::<f64>::zeros(n, n);

        for h in 0..n {
            for m in 0..n {
                if h == m {
                    continue;
                }
                let g = upstream.arc[[h, m]];
                if g == 0.0 {
                    continue;
                }
                let mut factor = 0.0;
                if m != 0 {
                    factor += inv[(m, m)];
                    inv_bar[(m, m)] += g * w[[h, m]];
                }
                if h != 0 {
                    factor -= inv[(m, h)];
                    inv_bar[(m, h)] -= g * w[[h, m]];
                }
                weights_bar[[h, m]] += g * factor;
            }
        }
        for m in 0..n {
            let g = upstream.root[m];
            root_bar[m] += g * inv[(m, 0)];
            inv_bar[(m, 0)] += g * r[m];
        }

        // d(inv) = -inv dL inv, so dL = -inv^T d(inv) inv^T; the log-det
        // term contributes inv^T directly.
        let inv_t = inv.transpose();
        let mut lap_bar = -(&inv_t * &inv_bar * &inv_t);
        if upstream.log_z != 0.0 {
            lap_bar += &inv_t * upstream.log_z;
        }

        for m in 0..n {
            root_bar[m] += lap_bar[(0, m)];
        }
        for h in 0..n {
            for m in 0..n {
                if h == m {
                    continue;
                }
                if m != 0 {
                    weights_bar[[h, m]] += lap_bar[(m, m)];
                }
                if h != 0 {
                    weights_bar[[h, m]] -= lap_bar[(h, m)];
                }
            }
        }

        // Weights are exp(score - shift). The shift can be held constant:
        // marginals sum to n over all edges, cancelling its n * shift term.
        let mut arc_grad = weights_bar * w;
        for i in 0..n {
            arc_grad[[i, i]] = 0.0;
        }
        let root_grad = root_bar * r;
        (arc_grad, root_grad)
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn clamp_unit(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Log of the total weight of all single-root spanning arborescences.
pub fn log_partition(table: &PotentialTable) -> Result<f64> {
    let compact = table.compact();
    Ok(Laplacian::build(&compact)?.log_partition())
}

/// Arc and root marginals, with masked rows and columns set to zero.
pub fn marginals(table: &PotentialTable) -> Result<MarginalTable> {
    let valid = table.valid_positions();
    let lap = Laplacian::build(&table.compact())?;
    let (arc_c, root_c) = lap.marginals();

    let n = table.len();
    let mut arc = Array2::zeros((n, n));
    let mut root = Array1::zeros(n);
    for (a, &i) in valid.iter().enumerate() {
        root[i] = root_c[a];
        for (b, &j) in valid.iter().enumerate() {
            arc[[i, j]] = arc_c[[a, b]];
        }
    }

    Ok(MarginalTable {
        arc,
        root,
        log_z: lap.log_partition(),
    })
}

/// Gradient of `<upstream, marginals(table)>` with respect to the scores.
///
/// Gradients at masked positions and on the diagonal are exactly zero.
pub fn marginals_backward(table: &PotentialTable, upstream: &MarginalGrad) -> Result<PotentialGrad> {
    let n = table.len();
    if upstream.arc.dim() != (n, n) || upstream.root.len() != n {
        return Err(Error::InvalidInput(format!(
            "upstream gradient shape {:?}/{} does not match table of {} nodes",
            upstream.arc.dim(),
            upstream.root.len(),
            n
        )));
    }

    let valid = table.valid_positions();
    let lap = Laplacian::build(&table.compact())?;

    let m = valid.len();
    let compact_upstream = MarginalGrad {
        arc: Array2::from_shape_fn((m, m), |(a, b)| upstream.arc[[valid[a], valid[b]]]),
        root: Array1::from_shape_fn(m, |a| upstream.root[valid[a]]),
        log_z: upstream.log_z,
    };
    let (arc_c, root_c) = lap.backward(&compact_upstream);

    let mut arc = Array2::zeros((n, n));
    let mut root = Array1::zeros(n);
    for (a, &i) in valid.iter().enumerate() {
        root[i] = root_c[a];
        for (b, &j) in valid.iter().enumerate() {
            arc[[i, j]] = arc_c[[a, b]];
        }
    }
    Ok(PotentialGrad { arc, root })
}
