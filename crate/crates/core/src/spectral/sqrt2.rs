//! Exact arithmetic in `Q[√2]` and the coefficient polynomials of the
//! level-vector recursion.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `a + b√2` with arbitrary-precision rational `a`, `b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sqrt2Number {
    pub a: BigRational,
    pub b: BigRational,
}

impl Sqrt2Number {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        Self { a, b }
    }

    pub fn from_integers(a: i64, b: i64) -> Self {
        Self::new(BigRational::from_integer(a.into()), BigRational::from_integer(b.into()))
    }

    pub fn zero() -> Self {
        Self::from_integers(0, 0)
    }

    pub fn one() -> Self {
        Self::from_integers(1, 0)
    }

    pub fn sqrt2() -> Self {
        Self::from_integers(0, 1)
    }

    /// `1/√2 = √2/2`.
    pub fn frac_1_sqrt2() -> Self {
        Self::new(BigRational::zero(), BigRational::new(BigInt::one(), BigInt::from(2)))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Algebraic conjugate `a − b√2`.
    pub fn conjugate(&self) -> Self {
        Self::new(self.a.clone(), -self.b.clone())
    }

    /// Field norm `a² − 2b²`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(2.into()) * &self.b * &self.b
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm();
        let c = self.conjugate();
        Some(Self::new(c.a / &n, c.b / n))
    }

    /// Sign of `a + b√2`: compare `a²` with `2b²` when the signs differ.
    pub fn signum(&self) -> i32 {
        let sa = sign_of(&self.a);
        let sb = sign_of(&self.b);
        if sa == 0 || sb == 0 || sa == sb {
            return if sa != 0 { sa } else { sb };
        }
        // opposite signs: the term with the larger square wins
        match sign_of(&self.norm()) {
            1 => sa,
            -1 => sb,
            _ => 0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        a + b * std::f64::consts::SQRT_2
    }
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

impl fmt::Display for Sqrt2Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}*sqrt(2)", self.a, self.b)
    }
}

impl PartialOrd for Sqrt2Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Sqrt2Number {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl Add for &Sqrt2Number {
    type Output = Sqrt2Number;
    fn add(self, o: &Sqrt2Number) -> Sqrt2Number {
        Sqrt2Number::new(&self.a + &o.a, &self.b + &o.b)
    }
}

impl Sub for &Sqrt2Number {
    type Output = Sqrt2Number;
    fn sub(self, o: &Sqrt2Number) -> Sqrt2Number {
        Sqrt2Number::new(&self.a - &o.a, &self.b - &o.b)
    }
}

impl Mul for &Sqrt2Number {
    type Output = Sqrt2Number;
    fn mul(self, o: &Sqrt2Number) -> Sqrt2Number {
        let two = BigRational::from_integer(2.into());
        Sqrt2Number::new(
            &self.a * &o.a + two * &self.b * &o.b,
            &self.a * &o.b + &self.b * &o.a,
        )
    }
}

impl Neg for &Sqrt2Number {
    type Output = Sqrt2Number;
    fn neg(self) -> Sqrt2Number {
        Sqrt2Number::new(-self.a.clone(), -self.b.clone())
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Sqrt2Number {
            type Output = Sqrt2Number;
            fn $m(self, o: Sqrt2Number) -> Sqrt2Number {
                (&self).$m(&o)
            }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);

impl Neg for Sqrt2Number {
    type Output = Sqrt2Number;
    fn neg(self) -> Sqrt2Number {
        -&self
    }
}

/// Exact coefficients of `c_k(μ) = Σ_ℓ c_{k,ℓ} μ^{2ℓ}` and
/// `c_{N-k}(μ) = Σ_ℓ d_{k,ℓ} μ^{2ℓ+1}` (both in units of `c_0`).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub level: u32,
    /// `c[k][ℓ]`
    pub c: Vec<Vec<Sqrt2Number>>,
    /// `d[k][ℓ]`
    pub d: Vec<Vec<Sqrt2Number>>,
}

fn eval_poly(coeffs: &[Sqrt2Number], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.to_f64())
}

impl CoefficientTable {
    /// `c_k(μ)` with `c_0 = 1`.
    pub fn eval_c(&self, k: usize, mu: f64) -> f64 {
        eval_poly(&self.c[k], mu * mu)
    }

    /// `c_{N-k}(μ)` with `c_0 = 1`.
    pub fn eval_d(&self, k: usize, mu: f64) -> f64 {
        mu * eval_poly(&self.d[k], mu * mu)
    }

    /// The unnormalized level vector `[c_0, …, c_N]` at `μ`, reading each
    /// coordinate from the polynomial that the alternating recursion uses for
    /// it. Requires the table to reach `k = N/2`.
    pub fn level_vector(&self, mu: f64) -> Vec<f64> {
        let n = self.level as usize;
        let mut out = vec![0.0; n + 1];
        for (i, v) in out.iter_mut().enumerate() {
            *v = if 2 * i <= n {
                self.eval_c(i, mu)
            } else {
                self.eval_d(n - i, mu)
            };
        }
        out
    }
}

/// Coefficient polynomials up to `k_max ≤ N`:
/// `c_{0,0} = d_{0,0} = 1`, `c_{1,ℓ} = c_{0,ℓ} − d_{0,ℓ-1}`,
/// `c_{k+1,ℓ} = √2 c_{k,ℓ} − d_{k,ℓ-1}` for `k ≥ 1` and
/// `d_{k+1,ℓ} = 2^{-1/2}(d_{k,ℓ} + c_{k+1,ℓ})`.
pub fn coefficient_polynomials(level: u32, k_max: usize) -> Result<CoefficientTable> {
    if k_max > level as usize {
        return Err(Error::InvalidArgument(format!(
            "k_max {k_max} exceeds the level {level}"
        )));
    }
    let r2 = Sqrt2Number::sqrt2();
    let h = Sqrt2Number::frac_1_sqrt2();
    let mut c = vec![vec![Sqrt2Number::one()]];
    let mut d = vec![vec![Sqrt2Number::one()]];
    for k in 0..k_max {
        let ck = &c[k];
        let dk = &d[k];
        let len = ck.len().max(dk.len() + 1);
        let next_c: Vec<Sqrt2Number> = (0..len)
            .map(|l| {
                let base = ck.get(l).cloned().unwrap_or_else(Sqrt2Number::zero);
                let base = if k == 0 { base } else { &r2 * &base };
                match l.checked_sub(1).and_then(|m| dk.get(m)) {
                    Some(prev) => &base - prev,
                    None => base,
                }
            })
            .collect();
        let len_d = dk.len().max(next_c.len());
        let next_d: Vec<Sqrt2Number> = (0..len_d)
            .map(|l| {
                let a = dk.get(l).cloned().unwrap_or_else(Sqrt2Number::zero);
                let b = next_c.get(l).cloned().unwrap_or_else(Sqrt2Number::zero);
                &h * &(&a + &b)
            })
            .collect();
        c.push(next_c);
        d.push(next_d);
    }
    Ok(CoefficientTable { level, c, d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::level::{level_eigen, recursion_unnormalized};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    #[test]
    fn field_operations() {
        let x = Sqrt2Number::from_integers(3, -2);
        let y = x.recip().unwrap();
        assert_eq!(&x * &y, Sqrt2Number::one());
        assert_eq!(&Sqrt2Number::sqrt2() * &Sqrt2Number::frac_1_sqrt2(), Sqrt2Number::one());
        assert_eq!(x.signum(), 1);
        assert_eq!(Sqrt2Number::from_integers(2, -2).signum(), -1);
        assert_eq!(Sqrt2Number::from_integers(-1, 1).signum(), 1);
        assert!(Sqrt2Number::from_integers(1, 1) > Sqrt2Number::from_integers(2, 0));
        assert_abs_diff_eq!(x.to_f64(), 3.0 - 2.0 * SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn first_polynomials() {
        let t = coefficient_polynomials(10, 2).unwrap();
        assert_eq!(t.c[1], vec![Sqrt2Number::one(), Sqrt2Number::from_integers(-1, 0)]);
        // c_2 = √2(1 − μ²) − 2^{-1/2} μ² (2 − μ²)
        let mu: f64 = 0.43;
        let m2 = mu * mu;
        let expect = SQRT_2 * (1.0 - m2) - m2 * (2.0 - m2) / SQRT_2;
        assert_abs_diff_eq!(t.eval_c(2, mu), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(t.eval_d(1, mu), mu * (2.0 - m2) / SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn polynomials_reproduce_recursion() {
        for level in 2..=20u32 {
            let lambda = level_eigen(level).unwrap().lambda;
            let mu = 1.0 / (SQRT_2 * lambda);
            let t = coefficient_polynomials(level, level as usize / 2 + 1).unwrap();
            let exact = t.level_vector(mu);
            let rec = recursion_unnormalized(level, lambda);
            for (a, b) in exact.iter().zip(&rec) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }
}
