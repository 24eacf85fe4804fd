#![allow(dead_code)]

use agecurve::design::DesignMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Solves `X'WX b = X'Wy` by Gaussian elimination with partial pivoting.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let p = x.len();
    let n = y.len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = (0..n).map(|r| w[r] * x[i][r] * x[j][r]).sum();
        }
        a[i][p] = (0..n).map(|r| w[r] * x[i][r] * y[r]).sum();
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| a[i][k] * b[k]).sum();
        b[i] = (a[i][p] - s) / a[i][i];
    }
    Some(b)
}

/// Largest over smallest singular value of `√W X`.
pub fn condition(x: &[Vec<f64>], w: &[f64]) -> f64 {
    let n = w.len();
    let m = nalgebra::DMatrix::from_fn(n, x.len(), |r, c| x[c][r] * w[r].sqrt());
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    num / den
}

/// A random well-conditioned weighted regression problem.
pub struct Instance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng, max_n: usize, max_p: usize, integer_weights: bool) -> Instance {
        loop {
            let p = rng.random_range(1..=max_p);
            let n = rng.random_range(p + 2..=max_n);
            let mut x = vec![vec![1.0; n]];
            for _ in 1..p {
                let scale = 10f64.powi(rng.random_range(-1..=2));
                x.push((0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect());
            }
            let w: Vec<f64> = (0..n)
                .map(|_| {
                    if integer_weights {
                        rng.random_range(1..=4) as f64
                    } else {
                        rng.random_range(0.2..3.0)
                    }
                })
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|r| {
                    let signal: f64 = x.iter().enumerate().map(|(j, c)| c[r] * (j as f64 - 1.5)).sum();
                    signal + Distribution::<f64>::sample(&StandardNormal, rng)
                })
                .collect();
            if condition(&x, &w) < 1e6 {
                return Instance { x, y, w };
            }
        }
    }

    pub fn design(&self) -> DesignMatrix {
        let labels = (0..self.x.len()).map(|j| format!("x{j}")).collect();
        DesignMatrix::from_columns(labels, self.x.clone(), self.y.clone(), self.w.clone()).unwrap()
    }

    /// Each row repeated `w` times with unit weight.
    pub fn replicated(&self) -> Instance {
        let mut x = vec![Vec::new(); self.x.len()];
        let mut y = Vec::new();
        for r in 0..self.y.len() {
            for _ in 0..self.w[r] as usize {
                for (j, col) in x.iter_mut().enumerate() {
                    col.push(self.x[j][r]);
                }
                y.push(self.y[r]);
            }
        }
        let w = vec![1.0; y.len()];
        Instance { x, y, w }
    }
}
