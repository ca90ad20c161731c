//! The two-branch objective
//! `F(α, β) = α²A² + β²B² + γ²C² + 2γC(αx + βy)`, `γ = √(1 − α² − β²)`,
//! its critical points, and the extraction of its parameters from the norm
//! vector of `B_{N-1,K}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigen, norm2, DenseMatrix};
use crate::spectral::level::{apply_level, level_eigen};
use crate::spectral::{dense_norm, two_branch_level_matrix};
use crate::truncation::two_branch;

/// Parameters of `F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FParams {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub x: f64,
    pub y: f64,
}

impl FParams {
    fn c(&self) -> f64 {
        self.c2.max(0.0).sqrt()
    }

    /// `F = v^T Q v` for `v = (α, β, γ)`.
    pub fn quadratic_form(&self) -> DenseMatrix {
        let c = self.c();
        DenseMatrix::from_row_major(
            3,
            3,
            vec![
                self.a2,
                0.0,
                c * self.x,
                0.0,
                self.b2,
                c * self.y,
                c * self.x,
                c * self.y,
                self.c2,
            ],
        )
        .expect("3x3")
    }

    /// Maximum of `F` over the unit sphere, the top eigenvalue of
    /// [`FParams::quadratic_form`], with its eigenvector.
    pub fn max_value(&self) -> Result<(f64, [f64; 3])> {
        let (vals, vecs) = jacobi_eigen(&self.quadratic_form())?;
        let mut v = [vecs[(0, 0)], vecs[(1, 0)], vecs[(2, 0)]];
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        Ok((vals[0], v))
    }
}

fn gamma_of(alpha: f64, beta: f64) -> Result<f64> {
    let s = alpha * alpha + beta * beta;
    if s > 1.0 + 1e-15 {
        return Err(Error::OutsideDomain(s));
    }
    Ok((1.0 - s).max(0.0).sqrt())
}

pub fn eval_f(p: &FParams, alpha: f64, beta: f64) -> Result<f64> {
    let (f2, f1) = split_f(p, alpha, beta)?;
    Ok(f2 + f1)
}

/// `(F_2, F_1)`: the quadratic terms and the cross term `2γC(αx + βy)`.
pub fn split_f(p: &FParams, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let g = gamma_of(alpha, beta)?;
    let f2 = alpha * alpha * p.a2 + beta * beta * p.b2 + g * g * p.c2;
    let f1 = 2.0 * g * p.c() * (alpha * p.x + beta * p.y);
    Ok((f2, f1))
}

/// `(∂F/∂α, ∂F/∂β)` in the interior of the quarter disk.
pub fn gradient(p: &FParams, alpha: f64, beta: f64) -> Result<[f64; 2]> {
    let g = gamma_of(alpha, beta)?;
    let c = p.c();
    let s = alpha * p.x + beta * p.y;
    Ok([
        2.0 * alpha * (p.a2 - p.c2) + 2.0 * g * c * p.x - 2.0 * c * (alpha / g) * s,
        2.0 * beta * (p.b2 - p.c2) + 2.0 * g * c * p.y - 2.0 * c * (beta / g) * s,
    ])
}

/// Second derivatives `[[F_αα, F_αβ], [F_αβ, F_ββ]]`.
pub fn hessian(p: &FParams, alpha: f64, beta: f64) -> Result<[[f64; 2]; 2]> {
    let g = gamma_of(alpha, beta)?;
    let c = p.c();
    let s = alpha * p.x + beta * p.y;
    let g3 = g * g * g;
    let faa = 2.0 * (p.a2 - p.c2)
        - 2.0 * c * p.x * alpha / g
        - 2.0 * c * (s / g + alpha * p.x / g + alpha * alpha * s / g3);
    let fbb = 2.0 * (p.b2 - p.c2)
        - 2.0 * c * p.y * beta / g
        - 2.0 * c * (s / g + beta * p.y / g + beta * beta * s / g3);
    let fab = -2.0 * c * p.x * beta / g - 2.0 * c * alpha * (p.y / g + s * beta / g3);
    Ok([[faa, fab], [fab, fbb]])
}

/// Predicted maximizer of the cross term alone for `r = y/x < 1`:
/// `β ≈ αr/(1 − r²)`, `γ ≈ α/√(1 − r²)`, scaled to the unit sphere.
pub fn f1_predictor(p: &FParams) -> Option<(f64, f64, f64)> {
    if p.x <= 0.0 {
        return None;
    }
    let r = p.y / p.x;
    if !(0.0..1.0).contains(&r) {
        return None;
    }
    let (a, b, g) = (1.0, r / (1.0 - r * r), 1.0 / (1.0 - r * r).sqrt());
    let n = (a * a + b * b + g * g).sqrt();
    Some((a / n, b / n, g / n))
}

/// A critical point of `F` together with both sides of the identity
/// `F = A² + Cxγ/α = B² + Cyγ/β`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalReport {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub f_value: f64,
    pub lhs_identity: f64,
    pub rhs_identity: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// False when the ascent ran into the boundary of the quarter disk.
    pub interior: bool,
    pub converged: bool,
}

const BOUNDARY: f64 = 1e-9;

fn project(alpha: f64, beta: f64) -> (f64, f64) {
    let (a, b) = (alpha.max(0.0), beta.max(0.0));
    let r = (a * a + b * b).sqrt();
    let limit = 1.0 - BOUNDARY;
    if r > limit {
        (a * limit / r, b * limit / r)
    } else {
        (a, b)
    }
}

/// Projected ascent with backtracking, taking Newton steps where the Hessian
/// is negative definite. Stops when `‖∇F‖ ≤ 1e-10`.
pub fn find_critical(p: &FParams, start: (f64, f64)) -> Result<CriticalReport> {
    const TOL: f64 = 1e-10;
    const MAX_ITER: usize = 10_000;
    let (mut a, mut b) = start;
    if a <= 0.0 || b <= 0.0 || a * a + b * b >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "start ({a}, {b}) is not interior to the quarter disk"
        )));
    }
    let mut f = eval_f(p, a, b)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        let g = gradient(p, a, b)?;
        if norm2(&g) <= TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let h = hessian(p, a, b)?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
        let dir = if h[0][0] < 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[0][1] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            g
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-20 {
            let (na, nb) = project(a + t * dir[0], b + t * dir[1]);
            let nf = eval_f(p, na, nb)?;
            let gain = g[0] * (na - a) + g[1] * (nb - b);
            if nf >= f + 1e-4 * gain - 4.0 * f64::EPSILON * f.abs() {
                moved = (na, nb) != (a, b);
                a = na;
                b = nb;
                f = nf;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let g = gradient(p, a, b)?;
    let gamma = gamma_of(a, b)?;
    let c = p.c();
    let interior = a > BOUNDARY && b > BOUNDARY && gamma > BOUNDARY.sqrt();
    Ok(CriticalReport {
        alpha: a,
        beta: b,
        gamma,
        f_value: f,
        lhs_identity: p.a2 + c * p.x * gamma / a,
        rhs_identity: p.b2 + c * p.y * gamma / b,
        gradient_norm: norm2(&g),
        iterations,
        interior,
        converged: converged || norm2(&g) <= TOL,
    })
}

/// [`find_critical`] from five seeded starts; returns the converged interior
/// point with the largest `F`, or the best boundary point if none is
/// interior.
pub fn find_critical_multistart(p: &FParams, seed: u64) -> Result<CriticalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<CriticalReport> = None;
    for _ in 0..5 {
        let r: f64 = rng.gen_range(0.2..0.95);
        let t: f64 = rng.gen_range(0.1..1.47);
        let report = find_critical(p, (r * t.cos(), r * t.sin()))?;
        let good = report.converged && report.interior;
        let better = match &best {
            None => true,
            Some(b) => {
                let b_good = b.converged && b.interior;
                (good && !b_good) || (good == b_good && report.f_value > b.f_value)
            }
        };
        if better {
            best = Some(report);
        }
    }
    Ok(best.expect("five starts"))
}

/// The parameters of `F` read off the norm vector of `B_{N-1,K}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub level: u32,
    pub secondary: Option<u32>,
    pub norm: f64,
    pub alpha: f64,
    /// `None` when there is no secondary branch.
    pub beta: Option<f64>,
    pub gamma: f64,
    pub a2: f64,
    pub b2: Option<f64>,
    pub c2: f64,
    pub x: f64,
    pub y: Option<f64>,
    /// `F` at `(α, β)` with these parameters; equals `‖B‖²`.
    pub f_value: f64,
    /// `A² + Cxγ/α`.
    pub f_lhs: f64,
    /// `B² + Cyγ/β`.
    pub f_rhs: Option<f64>,
    /// Unit level coordinates of the primary block (levels of `W_{N-1}^opt`).
    pub primary_levels: Vec<f64>,
    /// Unit level coordinates of the secondary block (levels of `W_K^opt`).
    pub secondary_levels: Option<Vec<f64>>,
    /// `‖y‖₁ / ‖x‖₁` of the unnormalized blocks of the norm vector.
    pub l1_ratio: Option<f64>,
}

impl Extraction {
    pub fn params(&self) -> FParams {
        FParams {
            a2: self.a2,
            b2: self.b2.unwrap_or(0.0),
            c2: self.c2,
            x: self.x,
            y: self.y.unwrap_or(0.0),
        }
    }

    /// `‖M_{N-1} x‖` for the unit primary level vector (that is, `A`).
    pub fn primary_image_norm(&self) -> f64 {
        self.a2.sqrt()
    }
}

fn group_size(level: usize) -> f64 {
    if level == 0 {
        1.0
    } else {
        (1u64 << (level - 1)) as f64
    }
}

/// `2^{-N/2}‖·‖₁` of the block-constant vector with unit level coordinates `c`.
fn scaled_l1(level: u32, c: &[f64]) -> f64 {
    let s: f64 = c
        .iter()
        .enumerate()
        .map(|(j, v)| group_size(j).sqrt() * v)
        .sum();
    (-(level as f64) / 2.0).exp2() * s
}

fn unit(v: &[f64]) -> (f64, Vec<f64>) {
    let n = norm2(v);
    if n == 0.0 {
        (0.0, v.to_vec())
    } else {
        (n, v.iter().map(|x| x / n).collect())
    }
}

fn image_norm2(level: u32, c: &[f64]) -> f64 {
    let m = apply_level(level, c);
    dot(&m, &m)
}

/// Extract `(α, β, γ, A², B², C², x, y)` from the norm vector of
/// `B_{N-1,K}` through the level reductions.
///
/// `K = N − 1` has two orthogonal copies of `W_{N-1}^opt` and a degenerate
/// norm vector; the report takes the primary copy (`α = 1`, `β = γ = 0`).
pub fn extract_params(level: u32, secondary: Option<u32>) -> Result<Extraction> {
    if level < 2 {
        return Err(Error::InvalidLevel(level));
    }
    let n = level as usize;
    match secondary {
        None => {
            let v = level_eigen(level)?;
            let (alpha, xc) = unit(&v.c[..n]);
            let gamma = v.c[n];
            let a2 = image_norm2(level - 1, &xc);
            let x = scaled_l1(level, &xc);
            let c2 = 0.5;
            let p = FParams {
                a2,
                b2: 0.0,
                c2,
                x,
                y: 0.0,
            };
            Ok(Extraction {
                level,
                secondary,
                norm: v.lambda,
                alpha,
                beta: None,
                gamma,
                a2,
                b2: None,
                c2,
                x,
                y: None,
                f_value: eval_f(&p, alpha, 0.0)?,
                f_lhs: a2 + c2.sqrt() * x * gamma / alpha,
                f_rhs: None,
                primary_levels: xc,
                secondary_levels: None,
                l1_ratio: None,
            })
        }
        Some(k) if k + 1 == level => {
            let v = level_eigen(level - 1)?;
            let a2 = image_norm2(level - 1, &v.c);
            let x = scaled_l1(level, &v.c);
            let p = FParams {
                a2,
                b2: a2,
                c2: 0.0,
                x,
                y: x,
            };
            Ok(Extraction {
                level,
                secondary,
                norm: v.lambda,
                alpha: 1.0,
                beta: Some(0.0),
                gamma: 0.0,
                a2,
                b2: Some(a2),
                c2: 0.0,
                x,
                y: Some(x),
                f_value: eval_f(&p, 1.0, 0.0)?,
                f_lhs: a2,
                f_rhs: Some(a2),
                primary_levels: v.c.clone(),
                secondary_levels: Some(v.c),
                l1_ratio: Some(0.0),
            })
        }
        Some(k) => {
            let l = two_branch_level_matrix(level, k)?;
            let (norm, v) = l.norm_vector()?;
            let blocks = l.blocks(&v);
            let (alpha, xc) = unit(&blocks.primary);
            let (beta, yc) = unit(&blocks.secondary);
            let gamma = blocks.minimal;
            let a2 = image_norm2(level - 1, &xc);
            let b2 = image_norm2(k, &yc);
            let c2 = 0.5 - (k as f64 - level as f64).exp2();
            let x = scaled_l1(level, &xc);
            let y = scaled_l1(level, &yc);
            let c = c2.sqrt();
            let p = FParams { a2, b2, c2, x, y };
            Ok(Extraction {
                level,
                secondary,
                norm,
                alpha,
                beta: Some(beta),
                gamma,
                a2,
                b2: Some(b2),
                c2,
                x,
                y: Some(y),
                f_value: eval_f(&p, alpha, beta)?,
                f_lhs: a2 + c * x * gamma / alpha,
                f_rhs: Some(b2 + c * y * gamma / beta),
                primary_levels: xc,
                secondary_levels: Some(yc),
                l1_ratio: Some(beta * y / (alpha * x)),
            })
        }
    }
}

/// The same extraction from the dense norm vector of `B_{N-1,K}`, for
/// cross-checking at small `N`. Also returns the spread of the minimal
/// block (which must be constant).
pub fn extract_params_dense(level: u32, secondary: u32) -> Result<(Extraction, f64)> {
    if level < 2 || secondary >= level {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= N and K < N, got N={level}, K={secondary}"
        )));
    }
    let b = two_branch(level, Some(secondary))?;
    let d = b.to_dense(level)?;
    let r = dense_norm(&d)?;
    let size = b.size();
    let half = size / 2;
    let sec_end = half + (1 << secondary);
    let mut u = r.vector.clone();
    if u[..half].iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    let part = |lo: usize, hi: usize| -> Vec<f64> {
        let mut v = vec![0.0; size];
        v[lo..hi].copy_from_slice(&u[lo..hi]);
        v
    };
    let (alpha, xv) = unit(&part(0, half));
    let (beta, yv) = unit(&part(half, sec_end));
    let zv = part(sec_end, size);
    let gamma = norm2(&zv);
    let spread = if sec_end < size {
        let z = &u[sec_end..];
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    } else {
        0.0
    };
    let img = |v: &[f64]| {
        let y = b.apply(v);
        dot(&y, &y)
    };
    let a2 = img(&xv);
    let b2 = if beta > 0.0 { img(&yv) } else { 0.0 };
    let c2 = 0.5 - (secondary as f64 - level as f64).exp2();
    let s = (-(level as f64) / 2.0).exp2();
    let x = s * xv.iter().sum::<f64>();
    let y = s * yv.iter().sum::<f64>();
    let c = c2.sqrt();
    let p = FParams { a2, b2, c2, x, y };
    Ok((
        Extraction {
            level,
            secondary: Some(secondary),
            norm: r.norm,
            alpha,
            beta: Some(beta),
            gamma,
            a2,
            b2: Some(b2),
            c2,
            x,
            y: Some(y),
            f_value: eval_f(&p, alpha, beta)?,
            f_lhs: if alpha > 0.0 { a2 + c * x * gamma / alpha } else { f64::NAN },
            f_rhs: (beta > 0.0).then(|| b2 + c * y * gamma / beta),
            primary_levels: Vec::new(),
            secondary_levels: None,
            l1_ratio: (alpha > 0.0 && x != 0.0).then(|| beta * y / (alpha * x)),
        },
        spread,
    ))
}

/// Result of sweeping `K = null, 0, …, N − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub level: u32,
    pub rows: Vec<Extraction>,
    /// `K` values (as `-1` for null) where `‖B_{N-1,K}‖` failed to decrease.
    pub norm_violations: Vec<i64>,
    /// `K` values where `A² + Cxγ/α` failed to decrease.
    pub lhs_violations: Vec<i64>,
}

pub const SWEEP_HEADER: &str = "K,norm,A2,B2,C2,x,y,alpha,beta,gamma,F_lhs";

fn k_label(k: Option<u32>) -> i64 {
    k.map_or(-1, i64::from)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |x| format!("{x:?}"))
}

impl SweepReport {
    pub fn to_csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{:?},{:?},{},{:?},{:?},{},{:?},{},{:?},{:?}",
                    k_label(r.secondary),
                    r.norm,
                    r.a2,
                    opt(r.b2),
                    r.c2,
                    r.x,
                    opt(r.y),
                    r.alpha,
                    opt(r.beta),
                    r.gamma,
                    r.f_lhs
                )
            })
            .collect()
    }
}

/// Extract parameters for every `K` and flag non-monotone norms and
/// left-hand identities. Cells run in parallel and are merged in `K` order.
pub fn k_sweep(level: u32) -> Result<SweepReport> {
    if level < 2 {
        return Err(Error::InvalidLevel(level));
    }
    let ks: Vec<Option<u32>> = std::iter::once(None).chain((0..level).map(Some)).collect();
    let rows = crate::par::map_indexed(ks.len(), |i| extract_params(level, ks[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut norm_violations = Vec::new();
    let mut lhs_violations = Vec::new();
    for w in rows.windows(2) {
        if w[1].norm >= w[0].norm {
            norm_violations.push(k_label(w[1].secondary));
        }
        if w[1].f_lhs >= w[0].f_lhs {
            lhs_violations.push(k_label(w[1].secondary));
        }
    }
    Ok(SweepReport {
        level,
        rows,
        norm_violations,
        lhs_violations,
    })
}
