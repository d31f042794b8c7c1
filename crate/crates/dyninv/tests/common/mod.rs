//! Independent oracles shared by the integration tests. Everything here
//! deliberately avoids the library's own closed forms: projections go through
//! a dense KKT solve, estimator oracles are naive full-memory loops.

#![allow(dead_code)]

use dyninv::setmem::Norm;

/// Gaussian elimination with partial pivoting on a dense system.
pub fn solve_dense(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|i, j| a[*i][col].abs().partial_cmp(&a[*j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Brute-force quadratic program: minimize ||a - z||_2^2 subject to
/// lo <= k'z <= hi, by enumerating the KKT active sets and solving each
/// equality-constrained candidate with a dense linear solve.
pub fn qp_project(a: &[f64], k: &[f64], lo: f64, hi: f64) -> Option<Vec<f64>> {
    if lo > hi {
        return None;
    }
    let d = a.len();
    let value = |z: &[f64]| -> f64 { z.iter().zip(k).map(|(zi, ki)| zi * ki).sum() };
    let objective =
        |z: &[f64]| -> f64 { z.iter().zip(a).map(|(zi, ai)| (zi - ai) * (zi - ai)).sum() };

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    // Inactive constraints: the unconstrained minimizer.
    candidates.push(a.to_vec());
    // One face active: [2I  k; k' 0] [z; lambda] = [2a; face]
    for face in [lo, hi] {
        let n = d + 1;
        let mut m = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..d {
            m[i][i] = 2.0;
            m[i][d] = k[i];
            m[d][i] = k[i];
            rhs[i] = 2.0 * a[i];
        }
        rhs[d] = face;
        if let Some(sol) = solve_dense(&mut m, &mut rhs) {
            candidates.push(sol[..d].to_vec());
        }
    }

    let tol = 1e-9;
    candidates
        .into_iter()
        .filter(|z| {
            let v = value(z);
            v >= lo - tol && v <= hi + tol
        })
        .min_by(|x, y| objective(x).partial_cmp(&objective(y)).unwrap())
}

/// Naive full-memory noise-bound pass: for each point, half the largest output
/// spread among all earlier inputs within rho; running maximum over time.
/// Returns the estimate after every step.
pub fn batch_noise_path(points: &[(Vec<f64>, Vec<f64>)], rho: f64, norm: Norm) -> Vec<f64> {
    let mut path = Vec::with_capacity(points.len());
    let mut eps = 0.0_f64;
    for t in 0..points.len() {
        let mut ez = 0.0_f64;
        for k in 0..t {
            if norm.distance(&points[t].0, &points[k].0) <= rho {
                ez = ez.max(0.5 * norm.distance(&points[t].1, &points[k].1));
            }
        }
        eps = eps.max(ez);
        path.push(eps);
    }
    path
}

/// Naive full-memory Lipschitz pass following the three-step recursion
/// literally: fresh pair slopes from the current noise estimate, downward
/// correction of stored slopes when the estimate grows, and a carried maximum.
/// Returns the estimate after every step.
pub fn batch_lipschitz_path(
    points: &[(Vec<f64>, Vec<f64>)],
    eps_path: &[f64],
    norm: Norm,
) -> Vec<f64> {
    let n = points.len();
    let mut table: Vec<Vec<(f64, f64)>> = Vec::new(); // table[j][i], i < j: (gamma, delta)
    let mut gamma_current = 0.0_f64;
    let mut delta_current = 0.0_f64;
    let mut out = Vec::with_capacity(n);
    let mut eps_prev = 0.0_f64;
    for t in 0..n {
        let eps_t = eps_path[t];
        // Corrections first.
        let corr = 2.0 * (eps_t - eps_prev);
        if corr > 0.0 {
            for col in table.iter_mut() {
                for cell in col.iter_mut() {
                    if cell.1 != 0.0 {
                        cell.0 -= corr / cell.1;
                    }
                }
            }
            if delta_current != 0.0 {
                gamma_current -= corr / delta_current;
            }
        }
        // New pairs against every earlier point.
        let mut col = Vec::with_capacity(t);
        for k in 0..t {
            let delta = norm.distance(&points[k].0, &points[t].0);
            let spread = norm.distance(&points[k].1, &points[t].1);
            let gamma = if delta == 0.0 {
                0.0
            } else if spread > 2.0 * eps_t {
                (spread - 2.0 * eps_t) / delta
            } else {
                0.0
            };
            col.push((gamma, delta));
        }
        table.push(col);
        // Maximum over the table, first attaining pair in index order.
        let mut best: Option<(f64, f64)> = None;
        for col in &table {
            for cell in col {
                if best.map_or(true, |(g, _)| cell.0 > g) {
                    best = Some(*cell);
                }
            }
        }
        let gamma_hat = match best {
            Some((g, dlt)) if g >= gamma_current && g >= 0.0 => {
                delta_current = dlt;
                g
            }
            _ => gamma_current.max(0.0),
        };
        gamma_current = gamma_hat;
        out.push(gamma_hat);
        eps_prev = eps_t;
    }
    out
}

/// Dual norm of a linear functional's coefficient vector: the exact Lipschitz
/// constant of x -> w'x under the given norm.
pub fn dual_norm(norm: Norm, w: &[f64]) -> f64 {
    match norm {
        Norm::L2 => w.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Norm::Linf => w.iter().map(|v| v.abs()).sum(),
    }
}

/// Test functions with exactly known Lipschitz constants under a given norm.
#[derive(Debug, Clone)]
pub enum TestFn {
    /// amp * sin(freq'x + phase); constant amp * dual(freq).
    Sine {
        amp: f64,
        freq: Vec<f64>,
        phase: f64,
    },
    /// offset + scale * min_i ||x - p_i||; constant |scale|.
    DistMin {
        scale: f64,
        anchors: Vec<Vec<f64>>,
        offset: f64,
    },
    /// w'x + b; constant dual(w).
    Affine { w: Vec<f64>, b: f64 },
}

impl TestFn {
    pub fn eval(&self, norm: Norm, x: &[f64]) -> f64 {
        match self {
            TestFn::Sine { amp, freq, phase } => {
                let dot: f64 = freq.iter().zip(x).map(|(f, xi)| f * xi).sum();
                amp * (dot + phase).sin()
            }
            TestFn::DistMin {
                scale,
                anchors,
                offset,
            } => {
                let d = anchors
                    .iter()
                    .map(|p| norm.distance(p, x))
                    .fold(f64::INFINITY, f64::min);
                offset + scale * d
            }
            TestFn::Affine { w, b } => {
                let dot: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
                dot + b
            }
        }
    }

    pub fn lipschitz(&self, norm: Norm) -> f64 {
        match self {
            TestFn::Sine { amp, freq, .. } => amp.abs() * dual_norm(norm, freq),
            TestFn::DistMin { scale, .. } => scale.abs(),
            TestFn::Affine { w, .. } => dual_norm(norm, w),
        }
    }
}
