//! Independent reference implementations used only by the tests.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use siglab::graph::{CausalGraph, NodeId};

// ---------------------------------------------------------------------------
// d-separation by exhaustive path enumeration

fn descendants_of(n: usize, edges: &[(usize, usize)], v: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![v];
    seen[v] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            if a == u && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen
}

/// True iff every simple undirected path between `a` and `b` is blocked.
pub fn dsep_by_paths(
    n: usize,
    edges: &[(usize, usize)],
    a: usize,
    b: usize,
    cond: &[bool],
) -> bool {
    let has = |x: usize, y: usize| edges.contains(&(x, y));
    let desc: Vec<Vec<bool>> = (0..n).map(|v| descendants_of(n, edges, v)).collect();
    let collider_open = |v: usize| (0..n).any(|d| desc[v][d] && cond[d]);

    let mut path = vec![a];
    let mut on_path = vec![false; n];
    on_path[a] = true;

    fn walk(
        n: usize,
        b: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        blocked: &dyn Fn(&[usize]) -> bool,
        adjacent: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if last == b {
            return !blocked(path);
        }
        for next in 0..n {
            if on_path[next] || !adjacent(last, next) {
                continue;
            }
            path.push(next);
            on_path[next] = true;
            let open = walk(n, b, path, on_path, blocked, adjacent);
            on_path[next] = false;
            path.pop();
            if open {
                return true;
            }
        }
        false
    }

    let blocked = |p: &[usize]| {
        p.windows(3).any(|w| {
            let (x, v, y) = (w[0], w[1], w[2]);
            if has(x, v) && has(y, v) {
                !collider_open(v)
            } else {
                cond[v]
            }
        })
    };
    let adjacent = |x: usize, y: usize| has(x, y) || has(y, x);
    !walk(n, b, &mut path, &mut on_path, &blocked, &adjacent)
}

/// All subsets of `pool` with at most `k` elements.
pub fn subsets_up_to(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &x in pool {
        let extra: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < k)
            .map(|s| {
                let mut t = s.clone();
                t.push(x);
                t
            })
            .collect();
        out.extend(extra);
    }
    out
}

pub fn graph_edges(g: &CausalGraph) -> Vec<(usize, usize)> {
    g.edges()
        .iter()
        .map(|e| (e.from.index(), e.to.index()))
        .collect()
}

pub fn labels(g: &CausalGraph, ids: impl IntoIterator<Item = NodeId>) -> Vec<String> {
    ids.into_iter().map(|id| g.label(id).to_string()).collect()
}

// ---------------------------------------------------------------------------
// Two-sided Student t tail by adaptive Gauss-Kronrod quadrature

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WK[7] * fc;
    let mut gauss = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[i] * s;
        if i % 2 == 1 {
            gauss += GK_WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Bisects until each panel's error estimate is below `density` times its
/// width or at the roundoff level of its value.
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, density: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= density * (b - a) || err <= 1e-14 * val.abs() || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, density, depth - 1) + adaptive(f, m, b, density, depth - 1)
}

/// Integral of the unnormalized kernel `(1 + x^2/df)^(-(df+1)/2)` over `[a, inf)`.
fn kernel_tail(a: f64, df: f64) -> f64 {
    let f = move |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let x = a + u / (1.0 - u);
        (-(df + 1.0) / 2.0 * (x * x / df).ln_1p()).exp() / ((1.0 - u) * (1.0 - u))
    };
    adaptive(&f, 0.0, 1.0, 1e-15, 30)
}

/// `P(|T| >= |t|)` for `T ~ t(df)`, with the normalizing constant also
/// obtained by quadrature so no gamma function is involved.
pub fn t_two_sided_quad(t: f64, df: f64) -> f64 {
    kernel_tail(t.abs(), df) / kernel_tail(0.0, df)
}

// ---------------------------------------------------------------------------
// Exact least squares over the rationals

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Solves `a x = b` exactly by Gauss-Jordan elimination.
fn solve_exact(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = BigRational::one() / a[col][col].clone();
        for c in col..k {
            a[col][c] = &a[col][c] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..k {
                    let d = &factor * &a[col][c];
                    a[r][c] -= d;
                }
                let d = &factor * &b[col];
                b[r] -= d;
            }
        }
    }
    Some(b)
}

pub struct ExactOls {
    /// Intercept first, then one entry per column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_variance: f64,
}

/// OLS with intercept of `y` on `columns`, computed exactly.
pub fn exact_ols(y: &[f64], columns: &[Vec<f64>]) -> Option<ExactOls> {
    let n = y.len();
    let k = columns.len() + 1;
    let design: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            std::iter::once(BigRational::one())
                .chain(columns.iter().map(|c| rat(c[i])))
                .collect()
        })
        .collect();
    let yr: Vec<BigRational> = y.iter().map(|&v| rat(v)).collect();
    let mut xtx = vec![vec![BigRational::zero(); k]; k];
    let mut xty = vec![BigRational::zero(); k];
    for i in 0..n {
        for r in 0..k {
            xty[r] += &design[i][r] * &yr[i];
            for c in 0..k {
                xtx[r][c] += &design[i][r] * &design[i][c];
            }
        }
    }
    let beta = solve_exact(xtx.clone(), xty)?;
    let mut rss = BigRational::zero();
    for i in 0..n {
        let fitted: BigRational = (0..k).map(|r| &design[i][r] * &beta[r]).sum();
        let res = &yr[i] - fitted;
        rss += &res * &res;
    }
    let df = BigRational::from_integer(BigInt::from(n - k));
    let sigma2 = rss / df;
    let std_errors = (0..k)
        .map(|j| {
            let mut e = vec![BigRational::zero(); k];
            e[j] = BigRational::one();
            let col = solve_exact(xtx.clone(), e).expect("invertible");
            (&sigma2 * &col[j]).to_f64().unwrap().sqrt()
        })
        .collect();
    Some(ExactOls {
        coefficients: beta.iter().map(|b| b.to_f64().unwrap()).collect(),
        std_errors,
        residual_variance: sigma2.abs().to_f64().unwrap(),
    })
}

// ---------------------------------------------------------------------------
// Benjamini-Hochberg by direct scan

/// Indices rejected by the step-up rule: find the largest rank k with
/// p_(k) <= k q / m and reject every p value not exceeding p_(k).
pub fn bh_scan(p: &[f64], q: f64) -> Vec<usize> {
    let m = p.len();
    let mut sorted: Vec<f64> = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cutoff = None;
    for k in (1..=m).rev() {
        if sorted[k - 1] <= k as f64 * q / m as f64 {
            cutoff = Some(sorted[k - 1]);
            break;
        }
    }
    match cutoff {
        None => vec![],
        Some(c) => (0..m).filter(|&i| p[i] <= c).collect(),
    }
}

// ---------------------------------------------------------------------------
// Lasso objective and an accelerated projected-gradient reference solver

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population (1/n) standard deviation.
pub fn sd_n(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

pub struct LassoProblem {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub pf: Vec<f64>,
}

impl LassoProblem {
    pub fn random<R: Rng>(rng: &mut R, n: usize, p: usize, d: usize) -> Self {
        let mut col = |scale: f64| -> Vec<f64> {
            (0..n)
                .map(|_| scale * (rng.random::<f64>() - 0.5) + rng.random::<f64>())
                .collect()
        };
        let x: Vec<Vec<f64>> = (0..p).map(|j| col(0.5 + j as f64 % 3.0)).collect();
        let w: Vec<Vec<f64>> = (0..d).map(|_| col(1.0)).collect();
        let beta: Vec<f64> = (0..p)
            .map(|j| {
                if j % 3 == 0 {
                    rng.random_range(-2.0..2.0)
                } else {
                    0.0
                }
            })
            .collect();
        let y = (0..n)
            .map(|i| {
                let mut v = rng.random_range(-1.0..1.0);
                for j in 0..p {
                    v += beta[j] * x[j][i];
                }
                for c in &w {
                    v += 0.7 * c[i];
                }
                v
            })
            .collect();
        LassoProblem {
            y,
            x,
            w,
            pf: vec![1.0; p],
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.x.iter().map(|c| c.as_slice()).collect()
    }

    pub fn confounders(&self) -> Vec<&[f64]> {
        self.w.iter().map(|c| c.as_slice()).collect()
    }

    pub fn residuals(&self, a0: f64, alpha: &[f64], theta: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let mut f = a0;
                for (j, c) in self.x.iter().enumerate() {
                    f += alpha[j] * c[i];
                }
                for (j, c) in self.w.iter().enumerate() {
                    f += theta[j] * c[i];
                }
                self.y[i] - f
            })
            .collect()
    }

    /// `(1/2n) RSS + lambda sum_j pf_j sd_j |alpha_j|` on the original scale.
    pub fn objective(&self, lambda: f64, a0: f64, alpha: &[f64], theta: &[f64]) -> f64 {
        let r = self.residuals(a0, alpha, theta);
        let rss: f64 = r.iter().map(|v| v * v).sum();
        let pen: f64 = (0..self.x.len())
            .map(|j| self.pf[j] * sd_n(&self.x[j]) * alpha[j].abs())
            .sum();
        rss / (2.0 * self.n() as f64) + lambda * pen
    }

    /// Largest absolute violation of the stationarity conditions on the
    /// standardized scale.
    pub fn kkt_violation(&self, lambda: f64, a0: f64, alpha: &[f64], theta: &[f64]) -> f64 {
        let n = self.n() as f64;
        let r = self.residuals(a0, alpha, theta);
        let grad = |c: &[f64]| -> f64 {
            let m = mean(c);
            let s = sd_n(c);
            c.iter()
                .zip(&r)
                .map(|(x, ri)| (x - m) / s * ri)
                .sum::<f64>()
                / n
        };
        let mut worst = mean(&r).abs();
        for (j, c) in self.x.iter().enumerate() {
            let g = grad(c);
            let bound = lambda * self.pf[j];
            let v = if alpha[j] == 0.0 {
                (g.abs() - bound).max(0.0)
            } else {
                (g - bound * alpha[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        for c in &self.w {
            worst = worst.max(grad(c).abs());
        }
        worst
    }

    /// Minimum objective value by accelerated projected gradient on the
    /// split `b = u - v`, `u, v >= 0`, over standardized penalized columns.
    pub fn reference_minimum(&self, lambda: f64, iters: usize) -> f64 {
        let n = self.n();
        let p = self.x.len();
        let d = self.w.len();
        let k = p + d;
        let cols: Vec<Vec<f64>> = self
            .x
            .iter()
            .map(|c| {
                let (m, s) = (mean(c), sd_n(c));
                c.iter().map(|v| (v - m) / s).collect()
            })
            .chain(self.w.iter().map(|c| {
                let m = mean(c);
                c.iter().map(|v| v - m).collect()
            }))
            .collect();
        let ym = mean(&self.y);
        let yc: Vec<f64> = self.y.iter().map(|v| v - ym).collect();
        let z = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
        let h = z.transpose() * &z / n as f64;
        let zy = z.transpose() * DMatrix::from_column_slice(n, 1, &yc) / n as f64;
        let lip = 2.0 * h.clone().symmetric_eigen().eigenvalues.max();
        let step = 1.0 / lip;

        // state: u (p), v (p), theta (d)
        let dim = 2 * p + d;
        let combine = |s: &[f64]| -> Vec<f64> {
            (0..k)
                .map(|j| {
                    if j < p {
                        s[j] - s[p + j]
                    } else {
                        s[2 * p + (j - p)]
                    }
                })
                .collect()
        };
        let smooth_grad = |s: &[f64]| -> Vec<f64> {
            let b = combine(s);
            let hb: Vec<f64> = (0..k)
                .map(|r| (0..k).map(|c| h[(r, c)] * b[c]).sum())
                .collect();
            let gb: Vec<f64> = (0..k).map(|j| hb[j] - zy[j]).collect();
            let mut g = vec![0.0; dim];
            for j in 0..p {
                g[j] = gb[j] + lambda * self.pf[j];
                g[p + j] = -gb[j] + lambda * self.pf[j];
            }
            for j in 0..d {
                g[2 * p + j] = gb[p + j];
            }
            g
        };
        let value = |s: &[f64]| -> f64 {
            let b = combine(s);
            let mut q = 0.0;
            for r in 0..k {
                for c in 0..k {
                    q += b[r] * h[(r, c)] * b[c];
                }
            }
            let lin: f64 = (0..k).map(|j| zy[j] * b[j]).sum();
            let pen: f64 = (0..p).map(|j| self.pf[j] * (s[j] + s[p + j])).sum();
            0.5 * q - lin + lambda * pen
        };
        let project = |s: &mut [f64]| {
            for v in s.iter_mut().take(2 * p) {
                *v = v.max(0.0);
            }
        };

        let mut x = vec![0.0; dim];
        let mut yk = x.clone();
        let mut t = 1.0f64;
        let mut fx = value(&x);
        for _ in 0..iters {
            let g = smooth_grad(&yk);
            let mut next: Vec<f64> = yk.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            project(&mut next);
            let fnext = value(&next);
            if fnext > fx {
                // restart momentum
                t = 1.0;
                yk = x.clone();
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_next;
            yk = next
                .iter()
                .zip(&x)
                .map(|(a, b)| a + mom * (a - b))
                .collect();
            x = next;
            fx = fnext;
            t = t_next;
        }
        let yy: f64 = yc.iter().map(|v| v * v).sum::<f64>() / (2.0 * n as f64);
        fx + yy
    }
}

// ---------------------------------------------------------------------------
// Implied covariance by explicit matrix inversion

/// `(I - B)^-1 Omega (I - B)^-T` with `B[child, parent] = weight`.
pub fn covariance_by_inversion(g: &CausalGraph) -> DMatrix<f64> {
    let m = g.len();
    let mut b = DMatrix::<f64>::zeros(m, m);
    for e in g.edges() {
        b[(e.to.index(), e.from.index())] = e.weight;
    }
    let a = (DMatrix::<f64>::identity(m, m) - b)
        .try_inverse()
        .expect("acyclic graphs give an invertible I - B");
    let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        m,
        g.nodes().iter().map(|v| v.noise_variance),
    ));
    &a * omega * a.transpose()
}
