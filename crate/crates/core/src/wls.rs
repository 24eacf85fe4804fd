//! Weighted least squares via a column-pivoted Householder QR of the
//! √w-scaled design.
//!
//! Standard errors are the classical homoskedastic ones:
//! `s² = Σ wᵢ rᵢ² / (n − rank)` and `Cov(β̂) = s² (XᵀWX)⁻¹`. Rescaling all
//! weights by `c > 0` multiplies the weighted RSS by `c` and `(XᵀWX)⁻¹` by
//! `1/c`, so coefficients, standard errors and t statistics are all
//! invariant to the weight scale.

use nalgebra::DMatrix;

use crate::design::{DesignMatrix, TermBlock};
use crate::error::{Error, Result};

/// Default relative tolerance on `|R_kk| / |R_00|` for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Column-pivoted Householder QR. `R` is stored in the upper triangle of
/// `factors`; the reflectors are kept separately.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    factors: DMatrix<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
    /// `permutation[k]` is the original index of the k-th pivoted column.
    pub permutation: Vec<usize>,
}

impl PivotedQr {
    /// Factorizes `a` in place. Pivoting picks the remaining column with the
    /// largest trailing norm; ties go to the lowest index.
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (n, p) = a.shape();
        let steps = n.min(p);
        let mut permutation: Vec<usize> = (0..p).collect();
        let mut reflectors = Vec::with_capacity(steps);

        for k in 0..steps {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..p {
                let norm: f64 = a.column(j).rows(k, n - k).iter().map(|x| x * x).sum();
                if norm > best_norm {
                    best_norm = norm;
                    best = j;
                }
            }
            if best != k {
                a.swap_columns(k, best);
                permutation.swap(k, best);
            }
            let norm = best_norm.sqrt();
            if norm == 0.0 {
                reflectors.push((Vec::new(), 0.0));
                continue;
            }
            let x0 = a[(k, k)];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = a.column(k).rows(k, n - k).iter().copied().collect();
            v[0] -= alpha;
            let vtv: f64 = v.iter().map(|x| x * x).sum();
            let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
            for j in (k + 1)..p {
                let mut col = a.column_mut(j);
                let mut slice = col.rows_mut(k, n - k);
                let dot: f64 = v.iter().zip(slice.iter()).map(|(vi, xi)| vi * xi).sum();
                let scale = beta * dot;
                for (xi, vi) in slice.iter_mut().zip(&v) {
                    *xi -= scale * vi;
                }
            }
            a[(k, k)] = alpha;
            for i in (k + 1)..n {
                a[(i, k)] = 0.0;
            }
            reflectors.push((v, beta));
        }
        PivotedQr {
            factors: a,
            reflectors,
            permutation,
        }
    }

    pub fn ncols(&self) -> usize {
        self.factors.ncols()
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.factors[(i, j)]
    }

    /// Magnitudes of the diagonal of `R`, in pivot order (non-increasing up
    /// to rounding).
    pub fn diagonal_magnitudes(&self) -> Vec<f64> {
        let steps = self.factors.nrows().min(self.factors.ncols());
        (0..steps).map(|k| self.factors[(k, k)].abs()).collect()
    }

    pub fn rank(&self, tol: f64) -> usize {
        let diag = self.diagonal_magnitudes();
        let Some(&lead) = diag.first() else { return 0 };
        if lead == 0.0 {
            return 0;
        }
        diag.iter().take_while(|d| **d > tol * lead).count()
    }

    /// Applies `Qᵀ` to `b`.
    pub fn apply_qt(&self, b: &mut [f64]) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let tail = &mut b[k..];
            let dot: f64 = v.iter().zip(tail.iter()).map(|(vi, bi)| vi * bi).sum();
            let scale = beta * dot;
            for (bi, vi) in tail.iter_mut().zip(v) {
                *bi -= scale * vi;
            }
        }
    }

    /// Solves the leading `r × r` upper-triangular system `R z = rhs`.
    pub fn solve_upper(&self, rhs: &[f64], r: usize) -> Vec<f64> {
        let mut z = rhs[..r].to_vec();
        for i in (0..r).rev() {
            let mut acc = z[i];
            for j in (i + 1)..r {
                acc -= self.factors[(i, j)] * z[j];
            }
            z[i] = acc / self.factors[(i, i)];
        }
        z
    }

    /// `R⁻¹` for the leading full-rank block.
    fn r_inverse(&self, r: usize) -> DMatrix<f64> {
        let mut inv = DMatrix::zeros(r, r);
        for col in 0..r {
            let mut e = vec![0.0; r];
            e[col] = 1.0;
            let z = self.solve_upper(&e, r);
            for (i, zi) in z.into_iter().enumerate() {
                inv[(i, col)] = zi;
            }
        }
        inv
    }
}

/// A column that is (numerically) a linear combination of earlier pivots.
#[derive(Debug, Clone, PartialEq)]
pub struct DependentColumn {
    pub label: String,
    /// Basis columns with a nonzero weight in the combination.
    pub combination: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub columns: usize,
    pub diagonal: Vec<f64>,
    pub dependent: Vec<DependentColumn>,
}

impl RankReport {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.columns
    }

    /// Union of every dependent column and the basis columns it loads on,
    /// in design order of first appearance.
    pub fn suspects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for dep in &self.dependent {
            for label in std::iter::once(&dep.label).chain(dep.combination.iter().map(|(l, _)| l)) {
                if !out.contains(label) {
                    out.push(label.clone());
                }
            }
        }
        out
    }
}

fn scaled_design(design: &DesignMatrix) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if let Some(w) = design.row_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidWeights(format!("weight {w} is not positive and finite")));
    }
    let sqrt_w: Vec<f64> = design.row_weights.iter().map(|w| w.sqrt()).collect();
    let mut a = design.values.clone();
    for mut col in a.column_iter_mut() {
        for (x, s) in col.iter_mut().zip(&sqrt_w) {
            *x *= s;
        }
    }
    Ok((a, sqrt_w))
}

fn rank_report(qr: &PivotedQr, labels: &[String], tol: f64) -> RankReport {
    let rank = qr.rank(tol);
    let p = qr.ncols();
    let mut dependent = Vec::new();
    for k in rank..p {
        let rhs: Vec<f64> = (0..rank).map(|i| qr.r(i, k)).collect();
        let z = qr.solve_upper(&rhs, rank);
        let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let combination = z
            .iter()
            .enumerate()
            .filter(|(_, c)| scale > 0.0 && c.abs() > 1e-7 * scale)
            .map(|(i, c)| (labels[qr.permutation[i]].clone(), *c))
            .collect();
        dependent.push(DependentColumn {
            label: labels[qr.permutation[k]].clone(),
            combination,
        });
    }
    RankReport {
        rank,
        columns: p,
        diagonal: qr.diagonal_magnitudes(),
        dependent,
    }
}

/// Numerical rank of the weighted design with a suspect set for each
/// dependent column.
pub fn rank_check(design: &DesignMatrix, tol: f64) -> Result<RankReport> {
    let (a, _) = scaled_design(design)?;
    let qr = PivotedQr::new(a);
    Ok(rank_report(&qr, &design.column_labels, tol))
}

/// One labeled estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub coefficient: f64,
    pub std_error: f64,
    /// |coefficient| / std_error.
    pub t_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub n_obs: usize,
    pub rank: usize,
    pub dof: usize,
    pub weighted_rss: f64,
    pub converged_rank_ok: bool,
    /// Weighted column means of the design (level shares for indicators).
    pub column_means: Vec<f64>,
    /// Weighted mean of the fitted values.
    pub mean_fitted: f64,
    pub blocks: Vec<TermBlock>,
}

impl FitResult {
    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.index(label).map(|i| self.coefficients[i])
    }

    pub fn estimate(&self, label: &str) -> Result<Estimate> {
        let i = self
            .index(label)
            .ok_or_else(|| Error::MissingCoefficient(label.to_string()))?;
        Ok(Estimate {
            coefficient: self.coefficients[i],
            std_error: self.std_errors[i],
            t_abs: self.t_stats[i],
        })
    }

    pub fn residual_variance(&self) -> f64 {
        self.weighted_rss / self.dof as f64
    }
}

/// Fits `design` by weighted least squares.
pub fn fit_wls(design: &DesignMatrix) -> Result<FitResult> {
    let (a, sqrt_w) = scaled_design(design)?;
    let (n, p) = a.shape();
    let qr = PivotedQr::new(a);
    let report = rank_report(&qr, &design.column_labels, RANK_TOLERANCE);
    if !report.is_full_rank() {
        return Err(Error::RankDeficient {
            rank: report.rank,
            columns: p,
            dependent: report.suspects(),
        });
    }
    if n <= p {
        return Err(Error::NoResidualDof { n, rank: p });
    }

    let mut qtb: Vec<f64> = design.response.iter().zip(&sqrt_w).map(|(y, s)| y * s).collect();
    qr.apply_qt(&mut qtb);
    let z = qr.solve_upper(&qtb, p);
    let mut coefficients = vec![0.0; p];
    for (k, zk) in z.into_iter().enumerate() {
        coefficients[qr.permutation[k]] = zk;
    }

    let fitted: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| design.values[(i, j)] * coefficients[j]).sum())
        .collect();
    let weighted_rss: f64 = design
        .response
        .iter()
        .zip(&fitted)
        .zip(&design.row_weights)
        .map(|((y, f), w)| w * (y - f).powi(2))
        .sum();
    let total_w: f64 = design.row_weights.iter().sum();
    let mean_fitted = fitted.iter().zip(&design.row_weights).map(|(f, w)| f * w).sum::<f64>() / total_w;

    let dof = n - p;
    let s2 = weighted_rss / dof as f64;
    let rinv = qr.r_inverse(p);
    let pivoted_cov = &rinv * rinv.transpose();
    let mut covariance = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            covariance[(qr.permutation[a], qr.permutation[b])] = s2 * pivoted_cov[(a, b)];
        }
    }
    // exact symmetry
    for a in 0..p {
        for b in (a + 1)..p {
            let m = 0.5 * (covariance[(a, b)] + covariance[(b, a)]);
            covariance[(a, b)] = m;
            covariance[(b, a)] = m;
        }
    }
    let std_errors: Vec<f64> = (0..p).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    let t_stats = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| if *se > 0.0 { b.abs() / se } else { f64::INFINITY })
        .collect();

    Ok(FitResult {
        labels: design.column_labels.clone(),
        coefficients,
        std_errors,
        t_stats,
        covariance,
        n_obs: n,
        rank: p,
        dof,
        weighted_rss,
        converged_rank_ok: true,
        column_means: design.weighted_column_means(),
        mean_fitted,
        blocks: design.blocks.clone(),
    })
}
