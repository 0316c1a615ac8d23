//! Closed forms at N = 3: the maximal singlet's Q^± from terminating hypergeometric series,
//! the same polynomials from an exact linear solve, and the groundstate checks.

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::polynomials::CPoly;
use crate::qcontext::RootContext;
use crate::spectra::{
    fusion_eigenvalue, poly_distance, sector_records, stable_kernel_dimension, Probes, RecordKind, SpectraOptions,
};
use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// (x)_k = x(x+1)⋯(x+k−1).
pub fn pochhammer(x: &Rational, k: usize) -> Rational {
    (0..k).fold(Rational::one(), |acc, j| acc * (x + Rational::from_integer(BigInt::from(j))))
}

fn nonpositive_integer(x: &Rational) -> Option<usize> {
    (x.is_integer() && !x.is_positive()).then(|| (-x.to_integer()).to_usize().unwrap_or(usize::MAX))
}

fn to_cpoly(c: &[Rational]) -> CPoly {
    CPoly::new(c.iter().map(|x| C64::new(x.to_f64().unwrap_or(f64::NAN), 0.0)).collect())
}

/// Σ_k (a)_k(b)_k / [(c)_k k!] z^{power·k}, exactly. One of a, b must be a nonpositive integer.
pub fn hypergeometric_2f1_terminating(a: &Rational, b: &Rational, c: &Rational, power: usize) -> Result<Vec<Rational>> {
    let terms = match (nonpositive_integer(a), nonpositive_integer(b)) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => return Err(Error::InvalidArgument(format!("2F1({a}, {b}; {c}) does not terminate"))),
    };
    if let Some(k) = nonpositive_integer(c) {
        if k < terms {
            return Err(Error::InvalidArgument(format!("2F1 lower parameter {c} hits a pole")));
        }
    }
    let power = power.max(1);
    let mut out = vec![Rational::zero(); power * terms + 1];
    let mut term = Rational::one();
    for k in 0..=terms {
        out[power * k] = term.clone();
        let kk = Rational::from_integer(BigInt::from(k));
        term = term * (a + &kk) * (b + &kk) / ((c + &kk) * (&kk + Rational::one()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperSide {
    /// Q⁺ with m roots, difference equation at S^z = 1/2.
    Plus,
    /// 𝒬⁻ with m + 1 roots, difference equation at S^z = −1/2.
    Minus,
}

impl HyperSide {
    /// Residue class of the vanishing coefficients.
    fn vanishing_class(self) -> usize {
        match self {
            HyperSide::Plus => 2,
            HyperSide::Minus => 1,
        }
    }
    fn degree(self, m: usize) -> usize {
        match self {
            HyperSide::Plus => 3 * m + 1,
            HyperSide::Minus => 3 * m + 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HyperSolution {
    pub m: usize,
    pub side: HyperSide,
    /// Exact coefficients of (1−z)^M Q(zq²).
    pub coefficients: Vec<Rational>,
    pub product_poly: CPoly,
    /// Q(z) with Q(0) = 1.
    pub q_poly: CPoly,
    /// (1−z)^M divides the product exactly.
    pub exact_deflation: bool,
}

impl HyperSolution {
    pub fn sites(&self) -> usize {
        2 * self.m + 1
    }
}

fn expect_three(ctx: &RootContext) -> Result<()> {
    if ctx.order() != 3 {
        return Err(Error::InvalidArgument(format!("closed forms are for N = 3, got N = {}", ctx.order())));
    }
    Ok(())
}

/// Divide by (1 − z) `times` times in exact arithmetic; None when a remainder is nonzero.
fn deflate_at_one(c: &[Rational], times: usize) -> Option<Vec<Rational>> {
    let mut p = c.to_vec();
    for _ in 0..times {
        // p(z) = (1 − z) r(z): r_0 = p_0, r_k = p_k + r_{k−1}, and p(1) must vanish.
        let total: Rational = p.iter().fold(Rational::zero(), |a, x| a + x);
        if !total.is_zero() || p.len() < 2 {
            return None;
        }
        let mut r = Vec::with_capacity(p.len() - 1);
        let mut acc = Rational::zero();
        for x in &p[..p.len() - 1] {
            acc += x;
            r.push(acc.clone());
        }
        p = r;
    }
    Some(p)
}

fn from_product(ctx: &RootContext, m: usize, side: HyperSide, coefficients: Vec<Rational>) -> HyperSolution {
    let sites = 2 * m + 1;
    let deflated = deflate_at_one(&coefficients, sites);
    let exact_deflation = deflated.is_some();
    // Q(zq²) = Σ d_k z^k, hence Q(z) = Σ d_k q^{−2k} z^k.
    let q_poly = match &deflated {
        Some(d) => {
            CPoly::new(d.iter().enumerate().map(|(k, x)| ctx.q_pow(-2 * k as i64) * x.to_f64().unwrap_or(f64::NAN)).collect())
        }
        None => CPoly::zero(),
    };
    HyperSolution { m, side, product_poly: to_cpoly(&coefficients), coefficients, q_poly, exact_deflation }
}

fn hyper_product(m: usize, side: HyperSide) -> Result<Vec<Rational>> {
    let mm = rat(-(m as i64), 1);
    let (first, ratio, second, shift) = match side {
        HyperSide::Plus => (
            hypergeometric_2f1_terminating(&mm, &(&mm - rat(1, 3)), &rat(2, 3), 3)?,
            pochhammer(&rat(4, 3), m) / pochhammer(&rat(2, 3), m),
            hypergeometric_2f1_terminating(&(rat(1, 3) + &mm), &mm, &rat(4, 3), 3)?,
            1,
        ),
        HyperSide::Minus => (
            hypergeometric_2f1_terminating(&mm, &(&mm - rat(2, 3)), &rat(1, 3), 3)?,
            pochhammer(&rat(5, 3), m) / pochhammer(&rat(1, 3), m),
            hypergeometric_2f1_terminating(&(rat(2, 3) + &mm), &mm, &rat(5, 3), 3)?,
            2,
        ),
    };
    let mut out = vec![Rational::zero(); side.degree(m) + 1];
    for (k, x) in first.iter().enumerate() {
        out[k] += x;
    }
    for (k, x) in second.iter().enumerate() {
        out[k + shift] -= &ratio * x;
    }
    Ok(out)
}

/// (1−z)^M Q⁺(zq²) = ₂F₁(−m, −m−1/3; 2/3; z³) − (4/3)_m/(2/3)_m z ₂F₁(1/3−m, −m; 4/3; z³).
pub fn stroganov_plus(m: usize, ctx: &RootContext) -> Result<HyperSolution> {
    expect_three(ctx)?;
    Ok(from_product(ctx, m, HyperSide::Plus, hyper_product(m, HyperSide::Plus)?))
}

/// (1−z)^M 𝒬⁻(zq²) = ₂F₁(−m, −m−2/3; 1/3; z³) − (5/3)_m/(1/3)_m z² ₂F₁(2/3−m, −m; 5/3; z³).
pub fn stroganov_minus(m: usize, ctx: &RootContext) -> Result<HyperSolution> {
    expect_three(ctx)?;
    Ok(from_product(ctx, m, HyperSide::Minus, hyper_product(m, HyperSide::Minus)?))
}

/// Exact row reduction; returns a basis of the nullspace of `rows` (each of length `cols`).
fn nullspace(mut rows: Vec<Vec<Rational>>, cols: usize) -> Vec<Vec<Rational>> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = Rational::one() / &rows[r][c];
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, p) in row.iter_mut().zip(&pivot).take(cols) {
                    *x -= &f * p;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); cols];
            v[f] = Rational::one();
            for (i, &p) in pivots.iter().enumerate() {
                v[p] = -rows[i][f].clone();
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub solution: HyperSolution,
    /// Dimension of the nullspace of the homogeneous constraints (1 means unique up to scale).
    pub nullity: usize,
}

/// Solve for the coefficients of (1−z)^M Q(zq²): zero in the side's residue class mod 3,
/// an M-fold zero at z = 1, and constant term 1. Exact rational elimination.
pub fn solve_difference_linear(sites: usize, side: HyperSide, ctx: &RootContext) -> Result<LinearSolution> {
    expect_three(ctx)?;
    if sites.is_multiple_of(2) {
        return Err(Error::InvalidArgument("the difference equation needs odd M".into()));
    }
    let m = (sites - 1) / 2;
    let cols = side.degree(m) + 1;
    let mut rows = Vec::new();
    for n in (0..cols).filter(|n| n % 3 == side.vanishing_class()) {
        let mut row = vec![Rational::zero(); cols];
        row[n] = Rational::one();
        rows.push(row);
    }
    // j-th derivative at z = 1 vanishes: Σ_n binom(n, j) c_n = 0.
    for j in 0..sites {
        let row = (0..cols)
            .map(|n| Rational::from_integer(num_integer_binom(n, j)))
            .collect();
        rows.push(row);
    }
    let basis = nullspace(rows, cols);
    let nullity = basis.len();
    if nullity != 1 {
        return Err(Error::Factorization(format!("difference equation nullspace has dimension {nullity}")));
    }
    let v = &basis[0];
    if v[0].is_zero() {
        return Err(Error::Factorization("solution vanishes at the origin".into()));
    }
    let c0 = v[0].clone();
    let coefficients = v.iter().map(|x| x / &c0).collect();
    Ok(LinearSolution { solution: from_product(ctx, m, side, coefficients), nullity })
}

fn num_integer_binom(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    (0..k).fold(BigInt::one(), |acc, j| acc * BigInt::from(n - j) / BigInt::from(j + 1))
}

/// The displayed coefficient ratios c_{3n+3}/c_{3n} and c_{3n+4}/c_{3n+1} (plus side) or their
/// analogues c′_{3n+3}/c′_{3n} and c′_{3n+5}/c′_{3n+2} (minus side), checked exactly.
/// Returns the number of ratios checked, or the first failing index.
pub fn check_ratio_recursions(sol: &HyperSolution) -> std::result::Result<usize, usize> {
    let m = sol.m as i64;
    let c = &sol.coefficients;
    let (a0, b0, a1, b1, off1) = match sol.side {
        HyperSide::Plus => (rat(-1, 3), rat(2, 3), rat(1, 3), rat(4, 3), 1),
        HyperSide::Minus => (rat(-2, 3), rat(1, 3), rat(2, 3), rat(5, 3), 2),
    };
    let mut checked = 0;
    for n in 0..m {
        let nn = rat(n, 1);
        let mm = rat(m, 1);
        // first family: (n−m)(n−m+a0)/((n+1)(n+b0)) with a0 = −1/3 or −2/3
        let r0 = (&nn - &mm) * (&nn - &mm + &a0) / ((&nn + rat(1, 1)) * (&nn + &b0));
        let r1 = (&nn - &mm) * (&nn + &a1 - &mm) / ((&nn + rat(1, 1)) * (&nn + &b1));
        for (lo, r) in [(3 * n as usize, r0), (3 * n as usize + off1, r1)] {
            let hi = lo + 3;
            if hi < c.len() && !c[lo].is_zero() {
                if &c[hi] / &c[lo] != r {
                    return Err(lo);
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Residual of (1−z)^M Q(zq²) + q^{∓1}(1−zq²)^M Q(zq⁻²) + q^{∓2}(1−zq⁻²)^M Q(z) = 0,
/// coefficientwise relative to the largest term.
pub fn difference_residual(sol: &HyperSolution, ctx: &RootContext) -> f64 {
    let sites = sol.sites();
    let q2 = ctx.q_pow(2);
    let e = match sol.side {
        HyperSide::Plus => -1,
        HyperSide::Minus => 1,
    };
    let q = &sol.q_poly;
    let one = C64::new(1.0, 0.0);
    let t0 = &CPoly::linear_power(-one, one, sites) * &q.scale_arg(q2);
    let t1 = (&CPoly::linear_power(-q2, one, sites) * &q.scale_arg(1.0 / q2)).scale(ctx.q_pow(e));
    let t2 = (&CPoly::linear_power(-1.0 / q2, one, sites) * q).scale(ctx.q_pow(2 * e));
    let sum = &(&t0 + &t1) + &t2;
    sum.max_abs() / t0.max_abs().max(t1.max_abs()).max(t2.max_abs())
}

/// q^{±1/2}(z−1)^M Q(zq²) + q^{∓1/2}(zq²−1)^M Q(zq⁻²) − (zq⁻²−1)^M Q(z), relative.
pub fn eigenvalue_relation_residual(sol: &HyperSolution, ctx: &RootContext) -> f64 {
    let sites = sol.sites();
    let q2 = ctx.q_pow(2);
    let h = match sol.side {
        HyperSide::Plus => ctx.qh_pow(1),
        HyperSide::Minus => ctx.qh_pow(-1),
    };
    let q = &sol.q_poly;
    let one = C64::new(1.0, 0.0);
    let a = (&CPoly::linear_power(one, -one, sites) * &q.scale_arg(q2)).scale(h);
    let b = (&CPoly::linear_power(q2, -one, sites) * &q.scale_arg(1.0 / q2)).scale(1.0 / h);
    let c = &CPoly::linear_power(1.0 / q2, -one, sites) * q;
    let r = &(&a + &b) - &c;
    r.max_abs() / a.max_abs().max(b.max_abs()).max(c.max_abs())
}

#[derive(Debug, Clone)]
pub struct GroundstateReport {
    pub sites: usize,
    /// Lowest Hamiltonian eigenvalue in the S^z = 1/2 sector.
    pub lowest_energy: f64,
    /// Energy of the kernel record.
    pub kernel_energy: f64,
    /// Kernel records in the sector and the kernel dimension of Q_μ.
    pub kernel_records: usize,
    pub kernel_dimension: usize,
    /// Largest singular-value ratio σ/threshold among kernel directions (below 1 passes).
    pub kernel_margin: f64,
    /// Coefficientwise distance of the kernel record's T eigenvalue from (zq⁻²−1)^M.
    pub transfer_error: f64,
    /// Distance of the kernel record's Q⁺ (and normalized 𝒬⁻) from the closed forms.
    pub q_plus_error: f64,
    pub q_minus_error: f64,
    pub difference_plus: f64,
    pub difference_minus: f64,
    pub relation_plus: f64,
    pub relation_minus: f64,
}

impl GroundstateReport {
    pub fn energy_error(&self) -> f64 {
        (self.lowest_energy + self.sites as f64).abs().max((self.kernel_energy + self.sites as f64).abs())
    }
}

/// Matrix-level checks of the N = 3 maximal singlet at M = 2m+1.
pub fn groundstate_check(m: usize, ctx: &RootContext, opts: &SpectraOptions) -> Result<GroundstateReport> {
    expect_three(ctx)?;
    let sites = 2 * m + 1;
    let lat = Lattice::new(*ctx, sites)?;
    let sector = lat.sector(1)?;
    let h = lat.hamiltonian(&sector);
    let eig = h.clone().symmetric_eigen();
    let lowest_energy = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let (_, records) = sector_records(&lat, sector.clone(), &Probes::new(ctx), opts)?;
    let kernel: Vec<_> = records.iter().filter(|r| r.kind == RecordKind::Kernel).collect();
    let plus = stroganov_plus(m, ctx)?;
    let minus = stroganov_minus(m, ctx)?;
    let kd = stable_kernel_dimension(&lat, &sector, 3, opts.seed)?;
    let kernel_margin = kd.singular_values.iter().filter(|&&s| s < kd.threshold).fold(0.0, |a: f64, &s| a.max(s / kd.threshold));
    let (kernel_energy, transfer_error, q_plus_error, q_minus_error) = match kernel.first() {
        Some(r) => {
            let v = &r.vector;
            let e = v.dotc(&(&h * v)).re;
            let target = CPoly::linear_power(ctx.q_pow(-2), C64::new(-1.0, 0.0), sites);
            let t = fusion_eigenvalue(&lat, r, 2)?.poly.scale_arg(ctx.q_pow(-2));
            let terr = poly_distance(&r.t_poly, &target).max(poly_distance(&t, &target));
            let qm = r.q_minus.scale(1.0 / r.q_minus.coeff(0));
            (e, terr, poly_distance(&r.q_plus, &plus.q_poly), poly_distance(&qm, &minus.q_poly))
        }
        None => (f64::NAN, f64::INFINITY, f64::INFINITY, f64::INFINITY),
    };
    Ok(GroundstateReport {
        sites,
        lowest_energy,
        kernel_energy,
        kernel_records: kernel.len(),
        kernel_dimension: kd.dimension,
        kernel_margin,
        transfer_error,
        q_plus_error,
        q_minus_error,
        difference_plus: difference_residual(&plus, ctx),
        difference_minus: difference_residual(&minus, ctx),
        relation_plus: eigenvalue_relation_residual(&plus, ctx),
        relation_minus: eigenvalue_relation_residual(&minus, ctx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx3() -> RootContext {
        RootContext::new(3, 1).unwrap()
    }

    #[test]
    fn single_term_series() {
        let p = hypergeometric_2f1_terminating(&rat(-1, 1), &rat(-4, 3), &rat(2, 3), 3).unwrap();
        assert_eq!(p, vec![rat(1, 1), rat(0, 1), rat(0, 1), rat(2, 1)]);
        let p = hypergeometric_2f1_terminating(&rat(-2, 3), &rat(-1, 1), &rat(4, 3), 3).unwrap();
        assert_eq!(p[3], rat(1, 2));
        let p = hypergeometric_2f1_terminating(&rat(0, 1), &rat(5, 7), &rat(1, 3), 3).unwrap();
        assert_eq!(p, vec![rat(1, 1)]);
        assert!(hypergeometric_2f1_terminating(&rat(1, 3), &rat(1, 2), &rat(1, 3), 3).is_err());
    }

    #[test]
    fn three_site_product() {
        let s = stroganov_plus(1, &ctx3()).unwrap();
        let want: Vec<Rational> = [1, -2, 0, 2, -1].iter().map(|&x| rat(x, 1)).collect();
        assert_eq!(s.coefficients, want);
        assert!(s.exact_deflation);
        let q = ctx3().q();
        assert!(s.q_poly.rel_distance(&CPoly::new(vec![C64::new(1.0, 0.0), q])) < 1e-14);
    }

    #[test]
    fn smallest_case_is_constant() {
        let s = stroganov_plus(0, &ctx3()).unwrap();
        assert_eq!(s.coefficients, vec![rat(1, 1), rat(-1, 1)]);
        assert_eq!(s.q_poly.degree(), 0);
    }

    #[test]
    fn minus_side_vanishing_pattern() {
        let s = stroganov_minus(1, &ctx3()).unwrap();
        assert!(s.coefficients[1].is_zero() && s.coefficients[4].is_zero());
        assert_eq!(s.q_poly.degree(), 2);
        assert_eq!(s.coefficients[2], -(pochhammer(&rat(5, 3), 1) / pochhammer(&rat(1, 3), 1)));
    }

    #[test]
    fn linear_solve_is_unique() {
        let l = solve_difference_linear(3, HyperSide::Plus, &ctx3()).unwrap();
        assert_eq!(l.nullity, 1);
        assert_eq!(l.solution.coefficients[1], rat(-2, 1));
    }

    #[test]
    fn rejects_other_orders() {
        assert!(stroganov_plus(1, &RootContext::new(5, 1).unwrap()).is_err());
    }
}
