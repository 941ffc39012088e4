//! Compressed sparse rows and the Krylov solvers used above the dense limit.

use nalgebra::DMatrix;

use crate::error::ExactError;

/// Square sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Csr { n, row_ptr, cols, vals };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0; self.n + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Csr {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Csr::from_triplets(self.n, t)
    }

    /// `alpha · self + beta · other`.
    pub fn combine(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        let mut t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (r, c, alpha * v)).collect();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, beta * v)));
        Csr::from_triplets(self.n, t)
    }

    /// `λ I − self`.
    pub fn shifted_negative(&self, lambda: f64) -> Csr {
        let mut t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (r, c, -v)).collect();
        t.extend((0..self.n).map(|i| (i, i, lambda)));
        Csr::from_triplets(self.n, t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinate-triple text dump: a `n nnz` header line, then one
    /// `row col value` line per stored entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.nnz());
        for (r, c, v) in self.triplets() {
            out.push_str(&format!("{r} {c} {v:.17e}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Option<Csr> {
        let mut lines = text.lines();
        let mut head = lines.next()?.split_whitespace();
        let n: usize = head.next()?.parse().ok()?;
        let nnz: usize = head.next()?.parse().ok()?;
        let mut t = Vec::with_capacity(nnz);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut it = line.split_whitespace();
            let r = it.next()?.parse().ok()?;
            let c = it.next()?.parse().ok()?;
            let v = it.next()?.parse().ok()?;
            t.push((r, c, v));
        }
        (t.len() == nnz).then(|| Csr::from_triplets(n, t))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solution of a linear solve with its certified residual
/// `‖b − M x‖∞ / max(1, ‖b‖∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Solve {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn residual(m: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let mx = m.matvec(x);
    let scale = b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    mx.iter().zip(b).fold(0.0f64, |r, (a, b)| r.max((a - b).abs())) / scale
}

/// Conjugate gradients for a symmetric positive definite `m`.
pub fn conjugate_gradient(m: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<Solve, ExactError> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * norm(b).max(f64::MIN_POSITIVE);
    let mut it = 0;
    while rr.sqrt() > target && it < max_iter {
        let mp = m.matvec(&p);
        let alpha = rr / dot(&p, &mp);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    finish(m, x, b, tol, it)
}

/// BiCGSTAB for a general nonsingular `m`.
pub fn bicgstab(m: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<Solve, ExactError> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let target = tol * norm(b).max(f64::MIN_POSITIVE);
    let mut it = 0;
    while norm(&r) > target && it < max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = m.matvec(&p);
        alpha = rho_new / dot(&r_hat, &v);
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        let t = m.matvec(&s);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        it += 1;
        if omega == 0.0 {
            break;
        }
    }
    finish(m, x, b, tol, it)
}

fn finish(m: &Csr, x: Vec<f64>, b: &[f64], tol: f64, iterations: usize) -> Result<Solve, ExactError> {
    let residual = residual(m, &x, b);
    // The relative 2-norm target can be looser than the ∞-norm report by √n.
    if residual > tol * (b.len() as f64).sqrt().max(1.0) * 10.0 || !residual.is_finite() {
        return Err(ExactError::SolverFailure { residual, iterations });
    }
    Ok(Solve { x, residual, iterations })
}

/// Dense LU solve with the same residual report.
pub fn dense_solve(m: &Csr, b: &[f64]) -> Result<Solve, ExactError> {
    let dense = m.to_dense();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = dense
        .lu()
        .solve(&rhs)
        .ok_or(ExactError::SolverFailure { residual: f64::INFINITY, iterations: 0 })?;
    let x: Vec<f64> = x.iter().copied().collect();
    let residual = residual(m, &x, b);
    Ok(Solve { x, residual, iterations: 1 })
}
