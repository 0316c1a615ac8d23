//! Bethe equations, the quadratic sum-rule system for elementary symmetric polynomials of the
//! inverse Bethe roots, the odd-N maximal-state sum rules and Table-style maximal-state counts.

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::polynomials::{roots, CPoly};
use crate::qcontext::RootContext;
use crate::spectra::{
    is_maximal, poly_distance, sector_records, stable_kernel_dimension, Probes, RecordKind, SpectraOptions,
    SpectralRecord,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Q⁺ and the equations (1−zq²)^M q^{−s}Q⁺(zq⁻²) + (1−z)^M q^s Q⁺(zq²) = 0.
    Above,
    /// Q⁻ with the phase inverted.
    Below,
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Per-root residual of the Bethe equations, normalized by the larger of the two terms evaluated
/// without cancellation (|1−zq²|^M → (1+|z|)^M, Q → Σ|c_k||z|^k). Singular root pairs such as
/// {1, q⁻²}, where both terms vanish exactly, then count as satisfied.
pub fn bae_residual(roots: &[C64], s_phase: C64, sites: usize, ctx: &RootContext, side: Side) -> Vec<f64> {
    let q2 = ctx.q_pow(2);
    let poly = CPoly::from_roots_normalized(roots);
    let x = match side {
        Side::Above => s_phase,
        Side::Below => 1.0 / s_phase,
    };
    roots
        .iter()
        .map(|&z| {
            let a = (1.0 - z * q2).powu(sites as u32) * poly.eval(z / q2) / x;
            let b = (1.0 - z).powu(sites as u32) * poly.eval(z * q2) * x;
            let bound = (1.0 + z.norm()).powi(sites as i32);
            let scale = bound * poly.eval_abs(z / q2).max(poly.eval_abs(z * q2));
            (a + b).norm() / scale.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// e_k of the inverse roots read off a polynomial normalized to 1 at zero:
/// Π(1 − z/z_i) = Σ (−1)^k e_k z^k.
pub fn symmetric_from_poly(p: &CPoly) -> Vec<C64> {
    let c0 = p.coeff(0);
    (0..=p.degree().max(0) as usize)
        .map(|k| if k % 2 == 0 { p.coeff(k) / c0 } else { -p.coeff(k) / c0 })
        .collect()
}

/// Π(1 − z/z_i) from e_0 = 1, e_1, ….
pub fn poly_from_symmetric(e: &[C64]) -> CPoly {
    CPoly::new(e.iter().enumerate().map(|(k, &c)| if k % 2 == 0 { c } else { -c }).collect())
}

#[derive(Debug, Clone)]
pub struct BetheSolution {
    pub two_sz: i64,
    pub n_plus: usize,
    pub roots_plus: Vec<C64>,
    pub roots_minus: Vec<C64>,
    /// e_0^+ = 1, …, e_{n_+}^+.
    pub e_plus: Vec<C64>,
    pub e_minus: Vec<C64>,
    /// Largest residual of the sum rules, each divided by binom(M, m).
    pub wronskian_residual: f64,
    pub bae_plus: Vec<f64>,
    pub bae_minus: Vec<f64>,
}

impl BetheSolution {
    pub fn q_plus(&self) -> CPoly {
        poly_from_symmetric(&self.e_plus)
    }
    pub fn q_minus(&self) -> CPoly {
        poly_from_symmetric(&self.e_minus)
    }
    pub fn max_bae(&self) -> f64 {
        self.bae_plus.iter().chain(&self.bae_minus).fold(0.0, |a, &b| a.max(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Damped Newton from random starts.
    Newton,
    /// Total-degree homotopy from x_i² = 1, one path per start solution.
    Homotopy,
}

#[derive(Debug, Clone)]
pub struct WronskianOptions {
    pub backend: Backend,
    /// Newton starts per site.
    pub starts_per_site: usize,
    pub seed: u64,
    /// Normalized distance below which two solutions are the same.
    pub dedup_tol: f64,
    /// Required residual of a polished solution.
    pub residual_tol: f64,
}

impl Default for WronskianOptions {
    fn default() -> Self {
        WronskianOptions { backend: Backend::Homotopy, starts_per_site: 200, seed: 7, dedup_tol: 1e-6, residual_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct WronskianRun {
    pub solutions: Vec<BetheSolution>,
    pub attempts: usize,
    pub converged: usize,
    /// Solutions first found within the last quarter of the attempts.
    pub late_discoveries: usize,
    pub coverage_warning: bool,
}

/// The sum rules binom(M,m) = Σ_{k+ℓ=m} [q^{S−2ℓ} − q^{−S−2k}] e_k^+ e_ℓ^− / (q^S − q^{−S}),
/// m = 1..M, in scaled unknowns u_k = e_k / binom(n, k). Equation m is divided by binom(M, m).
struct SumRules {
    sites: usize,
    n_plus: usize,
    n_minus: usize,
    /// coef[k][l] = [q^{S−2l} − q^{−S−2k}] / (q^S − q^{−S}) · binom(n_+,k) binom(n_−,l) / binom(M,k+l).
    coef: Vec<Vec<C64>>,
}

impl SumRules {
    fn new(ctx: &RootContext, sites: usize, two_sz: i64) -> Result<Self> {
        if two_sz.rem_euclid(2) != (sites as i64).rem_euclid(2) || two_sz.abs() > sites as i64 {
            return Err(Error::InvalidArgument(format!("2S^z = {two_sz} is not a sector of M = {sites}")));
        }
        let den = ctx.qh_pow(two_sz) - ctx.qh_pow(-two_sz);
        if den.norm() < 1e-12 {
            return Err(Error::InvalidArgument("q^{S^z} − q^{−S^z} vanishes".into()));
        }
        let n_plus = ((sites as i64 - two_sz) / 2) as usize;
        let n_minus = sites - n_plus;
        let coef = (0..=n_plus)
            .map(|k| {
                (0..=n_minus)
                    .map(|l| {
                        let num = ctx.qh_pow(two_sz - 4 * l as i64) - ctx.qh_pow(-two_sz - 4 * k as i64);
                        num / den * (binom(n_plus, k) * binom(n_minus, l) / binom(sites, k + l))
                    })
                    .collect()
            })
            .collect();
        Ok(SumRules { sites, n_plus, n_minus, coef })
    }

    fn unknowns(&self) -> usize {
        self.n_plus + self.n_minus
    }

    fn split<'a>(&self, x: &'a DVector<C64>) -> (impl Fn(usize) -> C64 + 'a, impl Fn(usize) -> C64 + 'a) {
        let np = self.n_plus;
        let up = move |k: usize| if k == 0 { C64::new(1.0, 0.0) } else { x[k - 1] };
        let um = move |l: usize| if l == 0 { C64::new(1.0, 0.0) } else { x[np + l - 1] };
        (up, um)
    }

    fn eval(&self, x: &DVector<C64>) -> DVector<C64> {
        let (up, um) = self.split(x);
        DVector::from_fn(self.sites, |i, _| {
            let m = i + 1;
            let mut acc = C64::new(-1.0, 0.0);
            for k in m.saturating_sub(self.n_minus)..=m.min(self.n_plus) {
                acc += self.coef[k][m - k] * up(k) * um(m - k);
            }
            acc
        })
    }

    fn jacobian(&self, x: &DVector<C64>) -> DMatrix<C64> {
        let (up, um) = self.split(x);
        let mut j = DMatrix::zeros(self.sites, self.unknowns());
        for i in 0..self.sites {
            let m = i + 1;
            for k in m.saturating_sub(self.n_minus)..=m.min(self.n_plus) {
                let l = m - k;
                if k > 0 {
                    j[(i, k - 1)] += self.coef[k][l] * um(l);
                }
                if l > 0 {
                    j[(i, self.n_plus + l - 1)] += self.coef[k][l] * up(k);
                }
            }
        }
        j
    }

    fn to_symmetric(&self, x: &DVector<C64>) -> (Vec<C64>, Vec<C64>) {
        let (up, um) = self.split(x);
        let ep = (0..=self.n_plus).map(|k| up(k) * binom(self.n_plus, k)).collect();
        let em = (0..=self.n_minus).map(|l| um(l) * binom(self.n_minus, l)).collect();
        (ep, em)
    }
}

/// Plain Newton steps while the residual keeps dropping: brings a converged point to rounding level.
fn polish(sys: &SumRules, mut x: DVector<C64>) -> DVector<C64> {
    let mut r = sys.eval(&x).norm();
    for _ in 0..6 {
        let Some(step) = sys.jacobian(&x).lu().solve(&(-sys.eval(&x))) else { break };
        let y = &x + step;
        let ry = sys.eval(&y).norm();
        if ry.is_nan() || ry >= r {
            break;
        }
        x = y;
        r = ry;
    }
    x
}

fn newton(sys: &SumRules, mut x: DVector<C64>, tol: f64, max_iter: usize) -> Option<(DVector<C64>, f64)> {
    let mut f = sys.eval(&x);
    let mut fn_ = f.norm();
    for _ in 0..max_iter {
        if fn_ < tol {
            return Some((x, fn_));
        }
        let jac = sys.jacobian(&x);
        let step = jac.lu().solve(&(-&f))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let trial = &x + &step * C64::new(lambda, 0.0);
            let ft = sys.eval(&trial);
            let nt = ft.norm();
            if nt.is_finite() && nt < fn_ * (1.0 - 1e-4 * lambda) {
                x = trial;
                f = ft;
                fn_ = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted || x.norm() > 1e8 {
            return None;
        }
    }
    (fn_ < tol).then_some((x, fn_))
}

/// Track one path of H(x,t) = (1−t)γ(x_i² − 1) + t F(x) from t = 0 to t = 1.
fn track(sys: &SumRules, start: DVector<C64>, gamma: C64) -> Option<DVector<C64>> {
    let n = sys.unknowns();
    let h = |x: &DVector<C64>, t: f64| -> DVector<C64> {
        let g = x.map(|v| v * v - 1.0) * gamma;
        g * C64::new(1.0 - t, 0.0) + sys.eval(x) * C64::new(t, 0.0)
    };
    let hx = |x: &DVector<C64>, t: f64| -> DMatrix<C64> {
        let mut j = sys.jacobian(x) * C64::new(t, 0.0);
        for i in 0..n {
            j[(i, i)] += gamma * 2.0 * x[i] * (1.0 - t);
        }
        j
    };
    let ht = |x: &DVector<C64>| -> DVector<C64> { sys.eval(x) - x.map(|v| v * v - 1.0) * gamma };
    let tangent = |x: &DVector<C64>, t: f64| -> Option<DVector<C64>> { hx(x, t).lu().solve(&(-ht(x))) };
    let mut x = start;
    let mut t = 0.0;
    let mut dt: f64 = 0.02;
    let mut steps = 0;
    while t < 1.0 {
        steps += 1;
        if steps > 20_000 || dt < 1e-13 || x.norm() > 1e7 {
            return None;
        }
        let step = dt.min(1.0 - t);
        // Fourth-order Runge–Kutta predictor.
        let k1 = tangent(&x, t)?;
        let k2 = tangent(&(&x + &k1 * C64::new(step / 2.0, 0.0)), t + step / 2.0)?;
        let k3 = tangent(&(&x + &k2 * C64::new(step / 2.0, 0.0)), t + step / 2.0)?;
        let k4 = tangent(&(&x + &k3 * C64::new(step, 0.0)), t + step)?;
        let mut y = &x + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(step / 6.0, 0.0);
        let t1 = t + step;
        let mut ok = false;
        let scale = 1.0 + y.norm();
        for _ in 0..4 {
            let d = match hx(&y, t1).lu().solve(&(-h(&y, t1))) {
                Some(d) => d,
                None => break,
            };
            y += &d;
            if d.norm() < 1e-9 * scale {
                ok = true;
                break;
            }
        }
        if ok && (&y - &x).norm() < 0.3 * (1.0 + x.norm()) {
            x = y;
            t = t1;
            dt = (dt * 1.5).min(0.05);
        } else {
            dt *= 0.5;
        }
    }
    Some(x)
}

fn normalized_distance(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

/// Solve the sum-rule system in the sector 2S^z and deduplicate.
pub fn solve_wronskian_system(
    ctx: &RootContext,
    sites: usize,
    two_sz: i64,
    opts: &WronskianOptions,
) -> Result<WronskianRun> {
    let sys = SumRules::new(ctx, sites, two_sz)?;
    let n = sys.unknowns();
    let candidates: Vec<Option<DVector<C64>>> = match opts.backend {
        Backend::Newton => {
            let count = opts.starts_per_site * sites;
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64);
                    // Unknowns are already scaled by binom(n, k): draw moduli log-uniformly around 1.
                    let x = DVector::from_fn(n, |_, _| {
                        let r = 10f64.powf(rng.random_range(-0.7..0.7));
                        C64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
                    });
                    newton(&sys, x, opts.residual_tol, 80).map(|(x, _)| x)
                })
                .collect()
        }
        Backend::Homotopy => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let gamma = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            (0..1usize << n)
                .into_par_iter()
                .map(|mask| {
                    let start = DVector::from_fn(n, |i, _| C64::new(if mask >> i & 1 == 1 { -1.0 } else { 1.0 }, 0.0));
                    let end = track(&sys, start, gamma)?;
                    newton(&sys, end, opts.residual_tol, 20).map(|(x, _)| x)
                })
                .collect()
        }
    };
    let attempts = candidates.len();
    let late_from = attempts - attempts / 4;
    let mut found: Vec<DVector<C64>> = Vec::new();
    let mut late = 0;
    let mut converged = 0;
    for (i, c) in candidates.into_iter().enumerate() {
        let Some(x) = c else { continue };
        let x = polish(&sys, x);
        converged += 1;
        if found.iter().all(|y| normalized_distance(&x, y) > opts.dedup_tol) {
            if i >= late_from {
                late += 1;
            }
            found.push(x);
        }
    }
    let mut solutions = Vec::with_capacity(found.len());
    for x in &found {
        let (e_plus, e_minus) = sys.to_symmetric(x);
        let qp = poly_from_symmetric(&e_plus);
        let qm = poly_from_symmetric(&e_minus);
        let roots_plus = roots(&qp)?.flatten();
        let roots_minus = roots(&qm)?.flatten();
        let s = ctx.qh_pow(two_sz);
        solutions.push(BetheSolution {
            two_sz,
            n_plus: sys.n_plus,
            bae_plus: bae_residual(&roots_plus, s, sites, ctx, Side::Above),
            bae_minus: bae_residual(&roots_minus, s, sites, ctx, Side::Below),
            roots_plus,
            roots_minus,
            wronskian_residual: sys.eval(x).iter().fold(0.0, |a, c| a.max(c.norm())),
            e_plus,
            e_minus,
        });
    }
    // Stable order: by the real parts of e_1^+ then e_1^-.
    solutions.sort_by(|a, b| {
        let key = |s: &BetheSolution| (s.e_plus.get(1).map_or(0.0, |c| c.re), s.e_minus.get(1).map_or(0.0, |c| c.re));
        key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
    });
    let coverage_warning = opts.backend == Backend::Newton && late > 0;
    Ok(WronskianRun { solutions, attempts, converged, late_discoveries: late, coverage_warning })
}

/// Pairs every solution with the spectral record whose Q⁺ and normalized Q⁻ coincide with it.
#[derive(Debug, Clone)]
pub struct SolutionMatch {
    pub solution: usize,
    pub record: Option<usize>,
    pub distance: f64,
}

pub fn match_solutions(solutions: &[BetheSolution], records: &[SpectralRecord], tol: f64) -> Vec<SolutionMatch> {
    let mut taken = vec![false; records.len()];
    solutions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let qp = s.q_plus();
            let qm = s.q_minus();
            let mut best: Option<(usize, f64)> = None;
            for (j, r) in records.iter().enumerate() {
                if taken[j] || r.two_sz != s.two_sz || r.q_minus.is_zero() {
                    continue;
                }
                let rm = r.q_minus.scale(1.0 / r.q_minus.coeff(0));
                let d = poly_distance(&qp, &r.q_plus).max(poly_distance(&qm, &rm));
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            match best {
                Some((j, d)) if d < tol => {
                    taken[j] = true;
                    SolutionMatch { solution: i, record: Some(j), distance: d }
                }
                Some((_, d)) => SolutionMatch { solution: i, record: None, distance: d },
                None => SolutionMatch { solution: i, record: None, distance: f64::INFINITY },
            }
        })
        .collect()
}

/// Residuals (n, |c_n| / Σ|terms|) of the odd-N sum rules c_n = 0 on
/// f(z) = (1−z)^M Π_{j=1}^{N−2} Q(zq^{2j}), for n ≡ (N±1)/2 mod N up to deg f.
/// `e` are the e_k of the inverse roots of Q (e_0 = 1); `side` selects the residue class.
pub fn sum_rule_residual_odd_n(e: &[C64], sites: usize, ctx: &RootContext, side: Side) -> Result<Vec<(usize, f64)>> {
    let n = ctx.order() as usize;
    if n.is_multiple_of(2) {
        return Err(Error::InvalidArgument("sum rules need an odd root of unity".into()));
    }
    let q = poly_from_symmetric(e);
    let mut f = CPoly::linear_power(C64::new(1.0, 0.0), C64::new(-1.0, 0.0), sites);
    let mut f_abs = CPoly::new(f.coeffs().iter().map(|c| C64::new(c.norm(), 0.0)).collect());
    let q_abs = CPoly::new(q.coeffs().iter().map(|c| C64::new(c.norm(), 0.0)).collect());
    for j in 1..=(n as i64 - 2) {
        f = &f * &q.scale_arg(ctx.q_pow(2 * j));
        f_abs = &f_abs * &q_abs;
    }
    let class = match side {
        Side::Above => n.div_ceil(2),
        Side::Below => (n - 1) / 2,
    };
    let deg = f.coeffs().len().saturating_sub(1);
    Ok((1..=deg)
        .filter(|k| k % n == class)
        .map(|k| (k, f.coeff(k).norm() / f_abs.coeff(k).re.max(f64::MIN_POSITIVE)))
        .collect())
}

/// Maximal states in the S^z = 1/2 sector counted two ways.
#[derive(Debug, Clone)]
pub struct MaximalCount {
    pub sites: usize,
    pub order: u32,
    pub sector_dim: usize,
    /// Records with n_+ = (M−1)/2 Bethe roots, n_∞ = n_S = 0.
    pub from_records: usize,
    /// Kernel dimension of Q_μ(z) on the sector.
    pub kernel: usize,
    /// Kernel-kind records (Q_μ vanishes on the vector).
    pub kernel_records: usize,
    pub flagged: usize,
    pub kernel_gap_warning: bool,
}

impl MaximalCount {
    pub fn routes_agree(&self) -> bool {
        self.from_records == self.kernel && self.flagged == 0
    }
}

pub fn count_maximal_states(lat: &Lattice, opts: &SpectraOptions) -> Result<MaximalCount> {
    let m = lat.sites();
    if m.is_multiple_of(2) {
        return Err(Error::InvalidArgument("maximal-state counts need odd M".into()));
    }
    let sector = lat.sector(1)?;
    let probes = Probes::new(lat.ctx());
    let (_, records) = sector_records(lat, sector.clone(), &probes, opts)?;
    let kernel = stable_kernel_dimension(lat, &sector, 3, opts.seed)?;
    Ok(MaximalCount {
        sites: m,
        order: lat.ctx().order(),
        sector_dim: sector.dim(),
        from_records: records.iter().filter(|r| is_maximal(r, m)).count(),
        kernel: kernel.dimension,
        kernel_records: records.iter().filter(|r| r.kind == RecordKind::Kernel).count(),
        flagged: records.iter().filter(|r| r.flagged()).count(),
        kernel_gap_warning: kernel.gap_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_roundtrip() {
        let roots = [C64::new(2.0, 1.0), C64::new(-0.5, 0.3)];
        let p = CPoly::from_roots_normalized(&roots);
        let e = symmetric_from_poly(&p);
        let inv: Vec<C64> = roots.iter().map(|r| 1.0 / r).collect();
        assert!((e[1] - (inv[0] + inv[1])).norm() < 1e-14);
        assert!((e[2] - inv[0] * inv[1]).norm() < 1e-14);
        assert!(poly_from_symmetric(&e).rel_distance(&p) < 1e-14);
    }

    #[test]
    fn empty_root_list_is_vacuous() {
        let ctx = RootContext::new(3, 1).unwrap();
        assert!(bae_residual(&[], ctx.qh_pow(1), 3, &ctx, Side::Above).is_empty());
    }

    #[test]
    fn single_root_at_three_sites() {
        // Q⁺(z) = 1 + zq at N = 3, M = 3 with phase q^{1/2}.
        let ctx = RootContext::new(3, 1).unwrap();
        let r = bae_residual(&[-ctx.q_pow(2)], ctx.qh_pow(1), 3, &ctx, Side::Above);
        assert!(r[0] < 1e-12, "{r:?}");
    }

    #[test]
    fn sum_rule_normalization_row_holds() {
        let ctx = RootContext::new(6, 1).unwrap();
        let sys = SumRules::new(&ctx, 3, 1).unwrap();
        // Row m = 0 is the identity 1 = 1 and is not part of the system; check the shape.
        assert_eq!(sys.unknowns(), 3);
        assert_eq!(sys.coef[0][0], C64::new(1.0, 0.0));
    }
}
