//! Householder QR with column pivoting for complex column sets.

use num_complex::Complex64;

pub(crate) struct PivotedQr {
    /// Column-major factor storage; `r[c][row]` for `row <= c` holds R.
    r: Vec<Vec<Complex64>>,
    /// `perm[j]` is the original index of the j-th pivot column.
    pub perm: Vec<usize>,
    /// Number of pivots accepted before the tolerance stopped the sweep.
    pub rank: usize,
    /// `Q^H b` for the right-hand side passed to `factor`.
    qtb: Vec<Complex64>,
}

impl PivotedQr {
    /// Factors `columns` (all of equal length) and applies the same
    /// reflections to `rhs`. Pivoting stops once the largest remaining column
    /// norm falls to `rel_tol` times the first pivot.
    pub fn factor(columns: &[Vec<Complex64>], rhs: &[Complex64], rel_tol: f64) -> Self {
        let p = columns.len();
        let m = rhs.len();
        let mut a: Vec<Vec<Complex64>> = columns.to_vec();
        let mut b = rhs.to_vec();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut first = 0.0;
        let mut rank = 0;

        for j in 0..p.min(m) {
            let norms: Vec<f64> = (j..p).map(|c| a[c][j..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
            let mut best = 0;
            for (i, &nrm) in norms.iter().enumerate() {
                if nrm > norms[best] {
                    best = i;
                }
            }
            let pivot_norm = norms[best];
            if j == 0 {
                first = pivot_norm;
            }
            if pivot_norm == 0.0 || pivot_norm <= rel_tol * first {
                break;
            }
            a.swap(j, j + best);
            perm.swap(j, j + best);

            let x0 = a[j][j];
            let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
            let alpha = -phase * pivot_norm;
            let mut v: Vec<Complex64> = a[j][j..].to_vec();
            v[0] -= alpha;
            let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if vnorm > 0.0 {
                for z in v.iter_mut() {
                    *z /= vnorm;
                }
                let reflect = |y: &mut [Complex64]| {
                    let dot: Complex64 = v.iter().zip(y.iter()).map(|(vi, yi)| vi.conj() * yi).sum();
                    for (yi, vi) in y.iter_mut().zip(&v) {
                        *yi -= vi * dot * 2.0;
                    }
                };
                for col in a.iter_mut().skip(j + 1) {
                    reflect(&mut col[j..]);
                }
                reflect(&mut b[j..]);
            }
            a[j][j] = alpha;
            for z in a[j][j + 1..].iter_mut() {
                *z = Complex64::new(0.0, 0.0);
            }
            rank += 1;
        }
        PivotedQr { r: a, perm, rank, qtb: b }
    }

    pub fn diag(&self, j: usize) -> Complex64 {
        self.r[j][j]
    }

    /// Least-squares coefficients of the first `rank` pivot columns, in pivot order.
    pub fn solve(&self) -> Vec<Complex64> {
        let k = self.rank;
        let mut x = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = self.qtb[i];
            for (c, xc) in x.iter().enumerate().take(k).skip(i + 1) {
                acc -= self.r[c][i] * xc;
            }
            x[i] = acc / self.r[i][i];
        }
        x
    }
}
