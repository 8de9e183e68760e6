//! Covariance-update coordinate descent over row blocks.
//!
//! Rows are stored block-contiguous (one block per CV fold, or a single block
//! for a plain fit). Per-block sums are computed once; cross-products of a
//! variable with every other variable are computed per block the first time
//! that variable enters a model and shared by all fits that follow. A "view"
//! is any union of blocks, and every fit only touches sufficient statistics.

/// Working data: globally centered columns laid out block by block.
pub(crate) struct Problem {
    x: Vec<Vec<f64>>,
    bounds: Vec<(usize, usize)>,
    sum_x: Vec<Vec<f64>>,
    sum_xx: Vec<Vec<f64>>,
    sum_xy: Vec<Vec<f64>>,
    sum_y: Vec<f64>,
    sum_yy: Vec<f64>,
    /// cross[j][block][l] = sum over the block of x_j x_l.
    cross: Vec<Option<Vec<Vec<f64>>>>,
}

/// Dot product with eight independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(u, v)| u * v)
        .sum();
    acc.iter().sum::<f64>() + tail
}

impl Problem {
    /// `x` and `y` must already be row-permuted so that each block is the
    /// contiguous range given by `bounds`.
    pub fn new(x: Vec<Vec<f64>>, y: &[f64], bounds: Vec<(usize, usize)>) -> Self {
        let per_block = |f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
            bounds.iter().map(|&(s, e)| f(s, e)).collect()
        };
        let sum_y = per_block(&|s, e| y[s..e].iter().sum());
        let sum_yy = per_block(&|s, e| dot(&y[s..e], &y[s..e]));
        let block_major = |f: &dyn Fn(&[f64], usize, usize) -> f64| -> Vec<Vec<f64>> {
            bounds
                .iter()
                .map(|&(s, e)| x.iter().map(|col| f(col, s, e)).collect())
                .collect()
        };
        let sum_x = block_major(&|c, s, e| c[s..e].iter().sum());
        let sum_xx = block_major(&|c, s, e| dot(&c[s..e], &c[s..e]));
        let sum_xy = block_major(&|c, s, e| dot(&c[s..e], &y[s..e]));
        let nvar = x.len();
        Problem {
            x,
            bounds,
            sum_x,
            sum_xx,
            sum_xy,
            sum_y,
            sum_yy,
            cross: vec![None; nvar],
        }
    }

    pub fn nvar(&self) -> usize {
        self.x.len()
    }

    pub fn block_len(&self, b: usize) -> usize {
        let (s, e) = self.bounds[b];
        e - s
    }

    fn cross(&mut self, j: usize) -> &[Vec<f64>] {
        if self.cross[j].is_none() {
            let xj = &self.x[j];
            let blocks = self
                .bounds
                .iter()
                .map(|&(s, e)| self.x.iter().map(|xl| dot(&xl[s..e], &xj[s..e])).collect())
                .collect();
            self.cross[j] = Some(blocks);
        }
        self.cross[j].as_deref().expect("filled above")
    }

    /// Sum of squared residuals of `y - a0 - sum_j coef_j x_j` over block `b`,
    /// in working coordinates. Every nonzero coefficient must have its
    /// cross-products cached.
    pub fn block_rss(&self, b: usize, a0: f64, coef: &[f64]) -> f64 {
        let nb = self.block_len(b) as f64;
        let nz: Vec<usize> = (0..coef.len()).filter(|&j| coef[j] != 0.0).collect();
        let mut quad = 0.0;
        for &j in &nz {
            let cj = &self.cross[j]
                .as_ref()
                .expect("nonzero coefficients are cached")[b];
            for &l in &nz {
                quad += coef[j] * coef[l] * cj[l];
            }
        }
        let lin_xy: f64 = nz.iter().map(|&j| coef[j] * self.sum_xy[b][j]).sum();
        let lin_x: f64 = nz.iter().map(|&j| coef[j] * self.sum_x[b][j]).sum();
        let rss = self.sum_yy[b] - 2.0 * a0 * self.sum_y[b] - 2.0 * lin_xy
            + nb * a0 * a0
            + 2.0 * a0 * lin_x
            + quad;
        rss.max(0.0)
    }
}

/// Moments of one union of blocks.
pub(crate) struct View {
    blocks: Vec<usize>,
    pub n: f64,
    pub mean: Vec<f64>,
    pub mean_y: f64,
    /// Standard deviations with divisor n; 0 marks a variable skipped in this view.
    pub scale: Vec<f64>,
    /// z_j' y_c / n for standardized z_j.
    c: Vec<f64>,
}

impl View {
    pub fn new(p: &Problem, blocks: Vec<usize>) -> View {
        let nvar = p.nvar();
        let n: f64 = blocks.iter().map(|&b| p.block_len(b) as f64).sum();
        let total = |rows: &[Vec<f64>], j: usize| blocks.iter().map(|&b| rows[b][j]).sum::<f64>();
        let mean_y = blocks.iter().map(|&b| p.sum_y[b]).sum::<f64>() / n;
        let mut mean = vec![0.0; nvar];
        let mut scale = vec![0.0; nvar];
        let mut c = vec![0.0; nvar];
        for j in 0..nvar {
            let m = total(&p.sum_x, j) / n;
            let var = (total(&p.sum_xx, j) / n - m * m).max(0.0);
            mean[j] = m;
            if var > f64::MIN_POSITIVE && var.is_finite() {
                let s = var.sqrt();
                scale[j] = s;
                c[j] = (total(&p.sum_xy, j) - n * m * mean_y) / (n * s);
            }
        }
        View {
            blocks,
            n,
            mean,
            mean_y,
            scale,
            c,
        }
    }

    /// Column j of the standardized Gram matrix z' z / n.
    fn q_column(&self, p: &mut Problem, j: usize) -> Vec<f64> {
        let (n, sj, mj) = (self.n, self.scale[j], self.mean[j]);
        let blocks = &self.blocks;
        let cross = p.cross(j);
        (0..self.mean.len())
            .map(|l| {
                let sl = self.scale[l];
                if sl == 0.0 {
                    return 0.0;
                }
                let s: f64 = blocks.iter().map(|&b| cross[b][l]).sum();
                (s - n * self.mean[l] * mj) / (n * sl * sj)
            })
            .collect()
    }

    /// Maps standardized coefficients to working-coordinate slopes and intercept.
    pub fn unstandardize(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let coef: Vec<f64> = b
            .iter()
            .zip(&self.scale)
            .map(|(&bj, &s)| if s == 0.0 { 0.0 } else { bj / s })
            .collect();
        let a0 = self.mean_y - coef.iter().zip(&self.mean).map(|(a, m)| a * m).sum::<f64>();
        (coef, a0)
    }
}

/// sign(z) max(|z| - gamma, 0).
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Coordinate-descent state for one view, warm-started along a path.
pub(crate) struct Solver<'a> {
    view: &'a View,
    pf: &'a [f64],
    pub b: Vec<f64>,
    /// g_j = z_j' r / n with r the current standardized-scale residual.
    pub g: Vec<f64>,
    q: Vec<Option<Vec<f64>>>,
    active: Vec<usize>,
    in_active: Vec<bool>,
}

/// Active-set cycles before an exact solve on the current support is tried.
const NEWTON_AFTER: usize = 4;
/// Above this support size a dense solve costs more than the cycles it saves.
const NEWTON_MAX_ACTIVE: usize = 120;
/// Relative margin a zero coefficient's score must clear before it activates.
const ACTIVATION_MARGIN: f64 = 1e-12;

impl<'a> Solver<'a> {
    pub fn new(view: &'a View, pf: &'a [f64]) -> Self {
        let nvar = pf.len();
        Solver {
            view,
            pf,
            b: vec![0.0; nvar],
            g: view.c.clone(),
            q: vec![None; nvar],
            active: Vec::new(),
            in_active: vec![false; nvar],
        }
    }

    fn update(&mut self, p: &mut Problem, j: usize, lambda: f64) -> f64 {
        if self.view.scale[j] == 0.0 {
            return 0.0;
        }
        // standardized columns have unit diagonal, so the Gram column is
        // only needed once the coefficient moves
        let old = self.b[j];
        let (z, gamma) = (self.g[j] + old, lambda * self.pf[j]);
        if old == 0.0 && z.abs() <= gamma * (1.0 + ACTIVATION_MARGIN) {
            return 0.0;
        }
        let new = soft_threshold(z, gamma);
        let delta = new - old;
        if delta == 0.0 {
            return 0.0;
        }
        if self.q[j].is_none() {
            self.q[j] = Some(self.view.q_column(p, j));
        }
        let qj = self.q[j].as_ref().expect("filled above");
        for (g, q) in self.g.iter_mut().zip(qj) {
            *g -= delta * q;
        }
        self.b[j] = new;
        if new != 0.0 && !self.in_active[j] {
            self.in_active[j] = true;
            let pos = self.active.partition_point(|&a| a < j);
            self.active.insert(pos, j);
        }
        delta.abs()
    }

    fn pass(&mut self, p: &mut Problem, lambda: f64, only: Option<&[usize]>) -> f64 {
        let mut max_delta = 0.0f64;
        match only {
            Some(set) => {
                for &j in set {
                    max_delta = max_delta.max(self.update(p, j, lambda));
                }
            }
            None => {
                for j in 0..self.b.len() {
                    max_delta = max_delta.max(self.update(p, j, lambda));
                }
            }
        }
        max_delta
    }

    /// Penalized objective restricted to `support` (inactive coefficients are
    /// zero), up to a constant: b'Qb/2 - c'b + lambda sum pf |b|.
    fn objective(&self, support: &[usize], b: &[f64], lambda: f64) -> f64 {
        let mut f = 0.0;
        for (k, &j) in support.iter().enumerate() {
            let qj = self.q[j].as_ref().expect("support columns are cached");
            let quad: f64 = support.iter().zip(b).map(|(&l, &bl)| qj[l] * bl).sum();
            f += 0.5 * b[k] * quad - self.view.c[j] * b[k] + lambda * self.pf[j] * b[k].abs();
        }
        f
    }

    /// Solves the stationarity equations on the current support with the
    /// current signs. The result is kept only if every sign is preserved and
    /// the objective does not increase; the caller's full cycle then checks
    /// optimality as usual.
    fn exact_step(&mut self, lambda: f64) -> bool {
        let support: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&j| self.b[j] != 0.0)
            .collect();
        let a = support.len();
        if a == 0 || a > NEWTON_MAX_ACTIVE {
            return false;
        }
        let qaa = nalgebra::DMatrix::from_fn(a, a, |r, c| {
            self.q[support[c]]
                .as_ref()
                .expect("support columns are cached")[support[r]]
        });
        let rhs = nalgebra::DVector::from_fn(a, |r, _| {
            let j = support[r];
            self.view.c[j] - lambda * self.pf[j] * self.b[j].signum()
        });
        let Some(chol) = qaa.cholesky() else {
            return false;
        };
        let sol = chol.solve(&rhs);
        let signs_kept = support
            .iter()
            .zip(sol.iter())
            .all(|(&j, &v)| self.pf[j] == 0.0 || (v != 0.0 && v.signum() == self.b[j].signum()));
        if !signs_kept || sol.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let old: Vec<f64> = support.iter().map(|&j| self.b[j]).collect();
        let new: Vec<f64> = sol.iter().copied().collect();
        if self.objective(&support, &new, lambda) > self.objective(&support, &old, lambda) {
            return false;
        }
        for (k, &j) in support.iter().enumerate() {
            let delta = new[k] - old[k];
            if delta != 0.0 {
                let qj = self.q[j].as_ref().expect("support columns are cached");
                for (g, q) in self.g.iter_mut().zip(qj) {
                    *g -= delta * q;
                }
            }
            self.b[j] = new[k];
        }
        true
    }

    /// Minimizes at `lambda` starting from the current coefficients. Returns
    /// false if `max_iter` cycles were spent without convergence.
    pub fn solve(&mut self, p: &mut Problem, lambda: f64, tol: f64, max_iter: usize) -> bool {
        let mut cycles = 0;
        loop {
            let d = self.pass(p, lambda, None);
            cycles += 1;
            if d < tol {
                return true;
            }
            let mut inner = 0;
            loop {
                if cycles >= max_iter {
                    return false;
                }
                let set = self.active.clone();
                let d = self.pass(p, lambda, Some(&set));
                cycles += 1;
                inner += 1;
                if d < tol || (inner == NEWTON_AFTER && self.exact_step(lambda)) {
                    break;
                }
            }
        }
    }

    /// Fits the unpenalized variables with every penalized one at zero:
    /// exactly through their Gram block, or by cycling if it is singular.
    pub fn fit_unpenalized(&mut self, p: &mut Problem, tol: f64, max_iter: usize) -> bool {
        let free: Vec<usize> = (0..self.pf.len())
            .filter(|&j| self.pf[j] == 0.0 && self.view.scale[j] > 0.0)
            .collect();
        if free.is_empty() {
            return true;
        }
        for &j in &free {
            if self.q[j].is_none() {
                self.q[j] = Some(self.view.q_column(p, j));
            }
        }
        let k = free.len();
        let qff = nalgebra::DMatrix::from_fn(k, k, |r, c| {
            self.q[free[c]].as_ref().expect("cached above")[free[r]]
        });
        let rhs = nalgebra::DVector::from_fn(k, |r, _| self.view.c[free[r]]);
        if let Some(sol) = qff.cholesky().map(|chol| chol.solve(&rhs)) {
            if sol.iter().all(|v| v.is_finite()) {
                for (&j, &v) in free.iter().zip(sol.iter()) {
                    let delta = v - self.b[j];
                    let qj = self.q[j].as_ref().expect("cached above");
                    for (g, q) in self.g.iter_mut().zip(qj) {
                        *g -= delta * q;
                    }
                    self.b[j] = v;
                    if !self.in_active[j] {
                        self.in_active[j] = true;
                        let pos = self.active.partition_point(|&a| a < j);
                        self.active.insert(pos, j);
                    }
                }
                return true;
            }
        }
        for _ in 0..max_iter {
            if self.pass(p, 0.0, Some(&free)) < tol {
                return true;
            }
        }
        false
    }

    /// Smallest penalty at which every penalized coefficient stays at zero.
    pub fn lambda_max(&self) -> f64 {
        (0..self.pf.len())
            .filter(|&j| self.pf[j] > 0.0 && self.view.scale[j] > 0.0)
            .map(|j| self.g[j].abs() / self.pf[j])
            .fold(0.0, f64::max)
    }
}
