//! Dense symmetric linear algebra used by the Gaussian toolkit and the
//! lower-bound experiment.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry above which a matrix is rejected instead of repaired.
pub const ASYMMETRY_LIMIT: f64 = 1e-9;
/// Relative off-diagonal norm at which Jacobi iteration stops.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Returns `(A + Aᵀ)/2`, or an error when `A` is not square or its relative
/// asymmetry exceeds [`ASYMMETRY_LIMIT`].
pub fn symmetrize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid(format!(
            "matrix must be square, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let scale = a.amax();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { 0.0 };
    if rel > ASYMMETRY_LIMIT {
        return Err(Error::Asymmetric(rel));
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
#[derive(Clone, Debug)]
pub struct JacobiEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(jacobi(a, false)?.values)
}

pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<JacobiEigen> {
    jacobi(a, true)
}

fn jacobi(a: &DMatrix<f64>, want_vectors: bool) -> Result<JacobiEigen> {
    let sym = symmetrize(a)?;
    let n = sym.nrows();
    // Row-major working copy; the matrix stays symmetric so layout is moot.
    let mut m: Vec<f64> = sym.iter().copied().collect();
    let mut v = if want_vectors {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        id
    } else {
        Vec::new()
    };

    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * frob || off == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let new_kp = akp - s * (akq + tau * akp);
                    let new_kq = akq + s * (akp - tau * akq);
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + q] = new_kq;
                    m[q * n + k] = new_kq;
                }
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp - s * (vkq + tau * vkp);
                        v[k * n + q] = vkq + s * (vkp - tau * vkq);
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = if want_vectors {
        DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]])
    } else {
        DMatrix::zeros(0, 0)
    };
    Ok(JacobiEigen {
        values,
        vectors,
        sweeps,
    })
}

/// Eigenvalues of `XXᵀ`, ascending, by one-sided Jacobi on the rows of `X`.
///
/// Row pairs are rotated until mutually orthogonal; the squared row norms are
/// then the Gram eigenvalues. Equivalent to two-sided Jacobi on `XXᵀ` without
/// forming it, and the small eigenvalues keep full relative accuracy.
pub fn gram_eigenvalues(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let (n, m) = (x.nrows(), x.ncols());
    let mut rows: Vec<f64> = Vec::with_capacity(n * m);
    for i in 0..n {
        rows.extend(x.row(i).iter());
    }
    let sq_norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    for _ in 0..JACOBI_MAX_SWEEPS {
        // Squared row norms, refreshed every sweep and updated per rotation.
        let mut norms: Vec<f64> = rows.chunks(m.max(1)).take(n).map(sq_norm).collect();
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (head, tail) = rows.split_at_mut(q * m);
                let rp = &mut head[p * m..(p + 1) * m];
                let rq = &mut tail[..m];
                let gamma = dot_unrolled(rp, rq);
                let (alpha, beta) = (norms[p], norms[q]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (zeta * zeta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = c * t;
                for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
                    let (u, v) = (*a, *b);
                    *a = c * u - s * v;
                    *b = s * u + c * v;
                }
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        if !rotated {
            break;
        }
    }
    let mut values: Vec<f64> = rows
        .chunks(m.max(1))
        .take(n)
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Dot product with eight independent accumulators.
fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Spectral norm of the inverse of a positive-definite matrix, `1/λ_min`.
pub fn inverse_spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let vals = symmetric_eigenvalues(a)?;
    let min = vals.first().copied().unwrap_or(0.0);
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            index: 0,
            pivot: min,
        });
    }
    Ok(1.0 / min)
}

/// Lower-triangular `L` with `L Lᵀ = A` for a positive-semidefinite `A`.
///
/// Pivots below `1e-12 · max diag` are treated as zero; the remainder of such
/// a column must then vanish too, otherwise `A` is not PSD.
pub fn psd_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a = symmetrize(a)?;
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -eps {
            return Err(Error::NotPsd { index: j, pivot: d });
        }
        if d <= eps {
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > (eps * scale).sqrt() {
                    return Err(Error::NotPsd { index: j, pivot: d });
                }
            }
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Cholesky factor of a positive-definite matrix.
#[derive(Clone, Debug)]
pub struct PdFactor {
    l: DMatrix<f64>,
}

impl PdFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let a = symmetrize(a)?;
        let n = a.nrows();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `bᵀ A⁻¹ b`, computed as `‖L⁻¹ b‖²`.
    pub fn quad_form_inv(&self, b: &[f64]) -> f64 {
        self.forward(b).iter().map(|y| y * y).sum()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            inv.set_column(j, &DVector::from_vec(col));
        }
        inv
    }
}
