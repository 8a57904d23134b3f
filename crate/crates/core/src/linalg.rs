//! Householder QR with column pivoting for small dense least-squares
//! problems (tall matrices with a few dozen columns).

/// Column-pivoted QR factorization `A P = Q R` of an `m × n` matrix.
///
/// The factorization stops at the numerical rank: the first column whose
/// remaining norm falls to `rel_tol × (largest original column norm)` or
/// below is treated as dependent, along with every column after it.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    // column-major; R above the diagonal, Householder vectors below
    a: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factor a column-major `rows × cols` matrix.
    pub fn factor(rows: usize, cols: usize, mut a: Vec<f64>, rel_tol: f64) -> Self {
        assert_eq!(a.len(), rows * cols, "matrix storage size mismatch");
        let mut perm: Vec<usize> = (0..cols).collect();
        let steps = rows.min(cols);
        let mut tau = Vec::with_capacity(steps);

        let col_norm = |a: &[f64], c: usize, from: usize| -> f64 {
            a[c * rows + from..(c + 1) * rows]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        };
        let max_norm = (0..cols).map(|c| col_norm(&a, c, 0)).fold(0.0, f64::max);
        let threshold = rel_tol * max_norm;

        let mut rank = 0;
        for i in 0..steps {
            // Remaining norms are recomputed rather than downdated; with few
            // columns this costs the same order as the factorization itself.
            let (pivot, pivot_norm) = (i..cols)
                .map(|c| (c, col_norm(&a, c, i)))
                .fold((i, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_norm <= threshold || pivot_norm == 0.0 {
                break;
            }
            if pivot != i {
                for r in 0..rows {
                    a.swap(i * rows + r, pivot * rows + r);
                }
                perm.swap(i, pivot);
            }

            let col = &mut a[i * rows..(i + 1) * rows];
            let x0 = col[i];
            let beta = if x0 >= 0.0 { -pivot_norm } else { pivot_norm };
            let scale = 1.0 / (x0 - beta);
            for v in &mut col[i + 1..] {
                *v *= scale;
            }
            col[i] = beta;
            let t = (beta - x0) / beta;
            tau.push(t);

            let (head, tail) = a.split_at_mut((i + 1) * rows);
            let v = &head[i * rows..(i + 1) * rows];
            for c in 0..cols - i - 1 {
                let target = &mut tail[c * rows..(c + 1) * rows];
                reflect(v, t, i, target);
            }
            rank += 1;
        }
        tau.truncate(rank);
        Self {
            rows,
            cols,
            a,
            tau,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column permutation: position `j` of `A P` holds original column `perm[j]`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn reflector(&self, i: usize) -> &[f64] {
        &self.a[i * self.rows..(i + 1) * self.rows]
    }

    /// Overwrite `b` with `Qᵀ b` (first `rank` reflectors).
    pub fn apply_qt(&self, b: &mut [f64]) {
        for i in 0..self.rank {
            reflect(self.reflector(i), self.tau[i], i, b);
        }
    }

    /// Overwrite `b` with `Q b`.
    pub fn apply_q(&self, b: &mut [f64]) {
        for i in (0..self.rank).rev() {
            reflect(self.reflector(i), self.tau[i], i, b);
        }
    }

    /// Least-squares residual `b - A x̂` (projection onto the orthogonal
    /// complement of the numerically independent columns).
    pub fn residual(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.rows);
        let mut r = b.to_vec();
        self.apply_qt(&mut r);
        r[..self.rank].iter_mut().for_each(|v| *v = 0.0);
        self.apply_q(&mut r);
        r
    }

    /// Basic least-squares solution: coefficients of dependent columns are 0.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.rows);
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut z = vec![0.0; self.rank];
        for i in (0..self.rank).rev() {
            let mut s = qtb[i];
            for (j, zj) in z.iter().enumerate().skip(i + 1) {
                s -= self.a[j * self.rows + i] * zj;
            }
            z[i] = s / self.a[i * self.rows + i];
        }
        let mut x = vec![0.0; self.cols];
        for (j, zj) in z.into_iter().enumerate() {
            x[self.perm[j]] = zj;
        }
        x
    }
}

// Apply H = I - tau v vᵀ, where v = (0,..,0, 1, a[i+1..]) is stored in `v`.
#[inline]
fn reflect(v: &[f64], tau: f64, i: usize, x: &mut [f64]) {
    let mut s = x[i];
    for (vr, xr) in v[i + 1..].iter().zip(&x[i + 1..]) {
        s += vr * xr;
    }
    s *= tau;
    x[i] -= s;
    for (vr, xr) in v[i + 1..].iter().zip(&mut x[i + 1..]) {
        *xr -= s * vr;
    }
}
