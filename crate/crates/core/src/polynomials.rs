//! Complex polynomials: arithmetic, interpolation from samples, roots and q²-string splitting.

use crate::error::{Error, Result};
use crate::qcontext::RootContext;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Neg, Sub};

pub const DEFAULT_NODE_RADIUS: f64 = 0.7310;
pub const DEFAULT_NODE_PHASE: f64 = 0.3;
pub const DEFAULT_ROOT_TOL: f64 = 1e-8;

/// Polynomial Σ c_k z^k with ascending coefficients. The zero polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CPoly {
    coeffs: Vec<C64>,
}

impl CPoly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        CPoly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        CPoly::new(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zero() -> Self {
        CPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        CPoly::new(vec![c])
    }

    pub fn monomial(c: C64, k: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); k + 1];
        v[k] = c;
        CPoly::new(v)
    }

    /// (a z + b)^n expanded.
    pub fn linear_power(a: C64, b: C64, n: usize) -> Self {
        let lin = CPoly::new(vec![b, a]);
        let mut out = CPoly::constant(C64::new(1.0, 0.0));
        for _ in 0..n {
            out = &out * &lin;
        }
        out
    }

    /// Π (1 − z/r) over the roots; every root must be nonzero.
    pub fn from_roots_normalized(roots: &[C64]) -> Self {
        let mut out = CPoly::constant(C64::new(1.0, 0.0));
        for r in roots {
            out = &out * &CPoly::new(vec![C64::new(1.0, 0.0), -1.0 / r]);
        }
        out
    }

    /// lead · Π (z − r).
    pub fn from_roots_monic(roots: &[C64], lead: C64) -> Self {
        let mut out = CPoly::constant(lead);
        for r in roots {
            out = &out * &CPoly::new(vec![-r, C64::new(1.0, 0.0)]);
        }
        out
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    /// Degree, −1 for the zero polynomial.
    pub fn degree(&self) -> isize {
        self.coeffs.len() as isize - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Zero every coefficient with |c| ≤ abs_tol, then drop trailing zeros.
    pub fn trimmed(&self, abs_tol: f64) -> Self {
        CPoly::new(
            self.coeffs
                .iter()
                .map(|c| if c.norm() <= abs_tol { C64::new(0.0, 0.0) } else { *c })
                .collect(),
        )
    }

    /// Index of the first nonzero coefficient (order of vanishing at 0).
    pub fn order_at_zero(&self) -> usize {
        self.coeffs.iter().position(|c| *c != C64::new(0.0, 0.0)).unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Σ |c_k| |z|^k, the cancellation-free size of p(z).
    pub fn eval_abs(&self, z: C64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        CPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        CPoly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// p(c·z).
    pub fn scale_arg(&self, c: C64) -> Self {
        let mut pw = C64::new(1.0, 0.0);
        let mut out = Vec::with_capacity(self.coeffs.len());
        for a in &self.coeffs {
            out.push(a * pw);
            pw *= c;
        }
        CPoly::new(out)
    }

    /// z^k p(z).
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return CPoly::zero();
        }
        let mut v = vec![C64::new(0.0, 0.0); k];
        v.extend_from_slice(&self.coeffs);
        CPoly::new(v)
    }

    /// p(z)/z^k, dropping the k lowest coefficients.
    pub fn shift_down(&self, k: usize) -> Self {
        CPoly::new(self.coeffs.iter().skip(k).copied().collect())
    }

    /// p(z^k).
    pub fn substitute_power(&self, k: usize) -> Self {
        if self.is_zero() {
            return CPoly::zero();
        }
        let mut v = vec![C64::new(0.0, 0.0); (self.coeffs.len() - 1) * k + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            v[i * k] = *c;
        }
        CPoly::new(v)
    }

    /// Long division; returns (quotient, remainder).
    pub fn div_rem(&self, d: &CPoly) -> Result<(CPoly, CPoly)> {
        if d.is_zero() {
            return Err(Error::InvalidArgument("division by the zero polynomial".into()));
        }
        let dd = d.coeffs.len() - 1;
        if self.coeffs.len() <= dd {
            return Ok((CPoly::zero(), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let lead = d.coeffs[dd];
        let mut quot = vec![C64::new(0.0, 0.0); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = rem[k + dd] / lead;
            quot[k] = c;
            for (j, dj) in d.coeffs.iter().enumerate() {
                rem[k + j] -= c * dj;
            }
        }
        rem.truncate(dd);
        Ok((CPoly::new(quot), CPoly::new(rem)))
    }

    /// Quotient of a division expected to be exact, by least squares on the convolution system
    /// (stable whatever the root moduli of `d`). Returns the quotient and the relative residual
    /// ‖d·quot − self‖ / ‖self‖.
    pub fn div_exact(&self, d: &CPoly) -> Result<(CPoly, f64)> {
        if d.is_zero() {
            return Err(Error::InvalidArgument("division by the zero polynomial".into()));
        }
        if self.is_zero() {
            return Ok((CPoly::zero(), 0.0));
        }
        let dd = d.coeffs.len() - 1;
        if self.coeffs.len() <= dd {
            return Ok((CPoly::zero(), 1.0));
        }
        let rows = self.coeffs.len();
        let cols = rows - dd;
        let a = DMatrix::from_fn(rows, cols, |i, j| if i >= j && i - j <= dd { d.coeffs[i - j] } else { C64::new(0.0, 0.0) });
        let b = DVector::from_column_slice(&self.coeffs);
        // The convolution matrix of a nonzero divisor has full column rank: Householder QR.
        let qr = a.clone().qr();
        let rhs = qr.q().adjoint() * &b;
        let x = qr.r().solve_upper_triangular(&rhs).ok_or_else(|| Error::LinearSystem("singular convolution matrix".into()))?;
        let res = (&a * &x - &b).norm() / b.norm();
        Ok((CPoly::new(x.iter().copied().collect()), res))
    }

    /// Divide by (z − r) once; returns quotient and remainder p(r).
    pub fn deflate(&self, r: C64) -> (CPoly, C64) {
        if self.is_zero() {
            return (CPoly::zero(), C64::new(0.0, 0.0));
        }
        let n = self.coeffs.len() - 1;
        let mut q = vec![C64::new(0.0, 0.0); n];
        let mut acc = C64::new(0.0, 0.0);
        for k in (0..=n).rev() {
            acc = acc * r + self.coeffs[k];
            if k > 0 {
                q[k - 1] = acc;
            }
        }
        (CPoly::new(q), acc)
    }

    /// Largest coefficientwise difference, relative to the larger coefficient vector.
    pub fn rel_distance(&self, other: &CPoly) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut num: f64 = 0.0;
        for k in 0..n {
            num = num.max((self.coeff(k) - other.coeff(k)).norm());
        }
        let den = self.max_abs().max(other.max_abs());
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

impl Add for &CPoly {
    type Output = CPoly;
    fn add(self, o: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &CPoly {
    type Output = CPoly;
    fn sub(self, o: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Mul for &CPoly {
    type Output = CPoly;
    fn mul(self, o: &CPoly) -> CPoly {
        if self.is_zero() || o.is_zero() {
            return CPoly::zero();
        }
        let mut v = vec![C64::new(0.0, 0.0); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        CPoly::new(v)
    }
}

impl Neg for &CPoly {
    type Output = CPoly;
    fn neg(self) -> CPoly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

/// `count` points on the circle |z| = radius, equally spaced, rotated by `phase`.
pub fn circle_nodes(count: usize, radius: f64, phase: f64) -> Vec<C64> {
    (0..count)
        .map(|k| C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / count as f64 + phase))
        .collect()
}

/// Default node set for reconstructing polynomials of degree ≤ `max_degree`,
/// including one spare consistency node.
pub fn default_nodes(max_degree: usize) -> Vec<C64> {
    circle_nodes(max_degree + 2, DEFAULT_NODE_RADIUS, DEFAULT_NODE_PHASE)
}

/// Least-squares polynomial of degree ≤ max_degree through the nodes, plus the
/// largest residual at the nodes.
pub fn interpolate_with_residual(nodes: &[(C64, C64)], max_degree: usize) -> Result<(CPoly, f64)> {
    let cols = max_degree + 1;
    if nodes.len() < cols {
        return Err(Error::Interpolation(format!(
            "{} nodes cannot determine a polynomial of degree {}",
            nodes.len(),
            max_degree
        )));
    }
    for (i, (a, _)) in nodes.iter().enumerate() {
        if !(a.norm() > 1e-12 && a.norm() < 1e12) {
            return Err(Error::Interpolation(format!("node {a} has modulus near 0 or infinity")));
        }
        if nodes[..i].iter().any(|(b, _)| (a - b).norm() <= 1e-12 * a.norm()) {
            return Err(Error::Interpolation(format!("repeated node {a}")));
        }
    }
    let v = DMatrix::from_fn(nodes.len(), cols, |i, k| nodes[i].0.powu(k as u32));
    let rhs = DVector::from_iterator(nodes.len(), nodes.iter().map(|(_, f)| *f));
    let svd = v.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(Error::Interpolation(format!("node set is ill conditioned (cond ≈ {:.3e})", smax / smin)));
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Interpolation(e.to_string()))?;
    let resid = (&v * &sol - &rhs).iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok((CPoly::new(sol.iter().copied().collect()), resid))
}

/// Polynomial of degree ≤ max_degree through the nodes; errors if the data is not
/// represented to 1e-12 relative accuracy.
pub fn interpolate(nodes: &[(C64, C64)], max_degree: usize) -> Result<CPoly> {
    let (p, resid) = interpolate_with_residual(nodes, max_degree)?;
    let scale = nodes.iter().map(|(_, f)| f.norm()).fold(0.0, f64::max);
    if resid > 1e-12 * scale.max(1e-300) && nodes.len() > max_degree + 1 {
        return Err(Error::Interpolation(format!(
            "data is not a polynomial of degree ≤ {max_degree}: residual {resid:.3e} at scale {scale:.3e}"
        )));
    }
    Ok(p)
}

/// Roots with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct RootMultiset {
    pub roots: Vec<(C64, usize)>,
    pub tolerance: f64,
}

impl RootMultiset {
    pub fn total(&self) -> usize {
        self.roots.iter().map(|(_, k)| k).sum()
    }

    pub fn flatten(&self) -> Vec<C64> {
        self.roots
            .iter()
            .flat_map(|(r, k)| std::iter::repeat_n(*r, *k))
            .collect()
    }

    pub fn multiplicity_of(&self, z: C64) -> usize {
        self.roots
            .iter()
            .filter(|(r, _)| (r - z).norm() <= self.tolerance * (1.0 + z.norm()))
            .map(|(_, k)| k)
            .sum()
    }
}

fn aberth(p: &CPoly, max_iter: usize) -> Result<Vec<C64>> {
    let n = p.degree() as usize;
    let c = p.coeffs();
    let lead = c[n];
    let bound = 1.0
        + c[..n]
            .iter()
            .map(|a| (a / lead).norm())
            .fold(0.0, f64::max);
    let low = c[0].norm() / (c[0].norm() + c[1..].iter().map(|a| a.norm()).fold(0.0, f64::max));
    let radius = (bound * low.max(1e-3)).sqrt().clamp(1e-3, bound);
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();
    let dp = p.derivative();
    let eps = f64::EPSILON;
    let mut done = vec![false; n];
    for _ in 0..max_iter {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let pz = p.eval(z[i]);
            let err_bound = 8.0 * n as f64 * eps * p.eval_abs(z[i]);
            if pz.norm() <= err_bound {
                done[i] = true;
                continue;
            }
            let ratio = pz / dp.eval(z[i]);
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let w = ratio / (1.0 - ratio * s);
            if !w.re.is_finite() || !w.im.is_finite() {
                continue;
            }
            z[i] -= w;
            if w.norm() <= 4.0 * eps * (1.0 + z[i].norm()) {
                done[i] = true;
            }
        }
        if done.iter().all(|d| *d) {
            return Ok(z);
        }
    }
    let found = done.iter().filter(|d| **d).count();
    Err(Error::RootsNotConverged { iterations: max_iter, found, degree: n })
}

fn newton_polish(p: &CPoly, mut z: C64, steps: usize) -> C64 {
    let dp = p.derivative();
    for _ in 0..steps {
        let d = dp.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = p.eval(z) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        let cand = z - step;
        if p.eval(cand).norm() > p.eval(z).norm() {
            break;
        }
        z = cand;
    }
    z
}

/// All roots of p with multiplicities, assuming coefficients exact to machine precision.
pub fn roots(p: &CPoly) -> Result<RootMultiset> {
    roots_with_noise(p, f64::EPSILON, DEFAULT_ROOT_TOL)
}

/// Roots of p whose coefficients carry relative noise `noise`. Clusters of k computed roots
/// whose spread is compatible with noise^{1/k} are merged into one root of multiplicity k and
/// refined by Newton iteration on p^{(k−1)}. `tol` is the relative root-equality tolerance
/// recorded in the result.
pub fn roots_with_noise(p: &CPoly, noise: f64, tol: f64) -> Result<RootMultiset> {
    if p.degree() < 0 {
        return Err(Error::InvalidArgument("roots of the zero polynomial".into()));
    }
    let mut out = Vec::new();
    let nz = p.order_at_zero();
    if nz > 0 {
        out.push((C64::new(0.0, 0.0), nz));
    }
    let core = p.shift_down(nz);
    let n = core.degree();
    if n <= 0 {
        return Ok(RootMultiset { roots: out, tolerance: tol });
    }
    if n == 1 {
        out.push((-core.coeff(0) / core.coeff(1), 1));
        return Ok(RootMultiset { roots: out, tolerance: tol });
    }
    let raw = aberth(&core, 2000)?;
    let n = raw.len();
    // Union clusters at a loose radius, then accept or split each one.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    let noise = noise.max(f64::EPSILON);
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0 + raw[i].norm().max(raw[j].norm());
            if (raw[i] - raw[j]).norm() < 1e-2 * scale {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    for members in groups.values() {
        let k = members.len();
        if k == 1 {
            out.push((newton_polish(&core, raw[members[0]], 4), 1));
            continue;
        }
        let centroid: C64 = members.iter().map(|&i| raw[i]).sum::<C64>() / k as f64;
        let spread = members.iter().map(|&i| (raw[i] - centroid).norm()).fold(0.0, f64::max);
        let allowed = 20.0 * noise.powf(1.0 / k as f64) * (1.0 + centroid.norm());
        if spread <= allowed.max(tol * (1.0 + centroid.norm())) {
            let mut d = core.clone();
            for _ in 0..(k - 1) {
                d = d.derivative();
            }
            out.push((newton_polish(&d, centroid, 4), k));
        } else {
            for &i in members {
                out.push((newton_polish(&core, raw[i], 4), 1));
            }
        }
    }
    out.sort_by(|a, b| {
        a.0.norm()
            .partial_cmp(&b.0.norm())
            .unwrap()
            .then(a.0.arg().partial_cmp(&b.0.arg()).unwrap())
    });
    Ok(RootMultiset { roots: out, tolerance: tol })
}

/// A complete q²-orbit {a q^{2ℓ}}, ℓ = 0..N′−1; `power` is a^{N′}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringRoot {
    pub rep: C64,
    pub power: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringSplit {
    pub bethe_roots: Vec<C64>,
    pub strings: Vec<StringRoot>,
    /// Some root nearly, but not within tolerance, completes an orbit.
    pub ambiguous: bool,
}

/// Split a root multiset into the maximal number of complete q²-strings and the rest.
///
/// Roots are grouped into q²-orbits; inside one orbit the number of complete strings is the
/// smallest occupation count over the N′ orbit positions, which is the maximum achievable.
pub fn classify_strings(rm: &RootMultiset, ctx: &RootContext) -> StringSplit {
    let np = ctx.n_prime() as usize;
    let tol = rm.tolerance;
    let all = rm.flatten();
    let mut used = vec![false; all.len()];
    let mut bethe = Vec::new();
    let mut strings = Vec::new();
    let mut ambiguous = false;
    let q2: Vec<C64> = (0..np).map(|l| ctx.q_pow(2 * l as i64)).collect();
    for i in 0..all.len() {
        if used[i] {
            continue;
        }
        let a = all[i];
        used[i] = true;
        if a.norm() == 0.0 {
            bethe.push(a);
            continue;
        }
        let mut slots: Vec<Vec<C64>> = vec![Vec::new(); np];
        let mut near = vec![0usize; np];
        slots[0].push(a);
        for j in (i + 1)..all.len() {
            if used[j] {
                continue;
            }
            let r = all[j];
            for (l, w) in q2.iter().enumerate() {
                let d = (r - a * w).norm() / a.norm();
                if d <= tol {
                    slots[l].push(r);
                    used[j] = true;
                    break;
                } else if d <= 100.0 * tol {
                    near[l] += 1;
                }
            }
        }
        let complete = slots.iter().map(|s| s.len()).min().unwrap_or(0);
        let loose = slots.iter().zip(&near).map(|(s, n)| s.len() + n).min().unwrap_or(0);
        if np > 1 && loose > complete {
            // A looser tolerance would complete another string.
            ambiguous = true;
        }
        if np == 1 {
            bethe.extend(slots[0].iter().copied());
            continue;
        }
        for _ in 0..complete {
            let power: C64 = slots.iter().map(|s| s[0].powu(np as u32)).sum::<C64>() / np as f64;
            strings.push(StringRoot { rep: slots[0][0], power });
            for s in slots.iter_mut() {
                s.remove(0);
            }
        }
        for s in slots {
            bethe.extend(s);
        }
    }
    StringSplit { bethe_roots: bethe, strings, ambiguous }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn interpolates_cube() {
        let ctx = RootContext::new(3, 1).unwrap();
        let q2 = ctx.q_pow(2);
        let p = CPoly::linear_power(q2, c(-1.0, 0.0), 3);
        let nodes: Vec<_> = circle_nodes(5, 0.731, 0.3).into_iter().map(|z| (z, p.eval(z))).collect();
        let f = interpolate(&nodes, 4).unwrap().trimmed(1e-13);
        assert_eq!(f.degree(), 3);
        assert!(f.rel_distance(&p) < 1e-13);
    }

    #[test]
    fn too_few_nodes() {
        let nodes = vec![(c(0.5, 0.0), c(1.0, 0.0)), (c(0.7, 0.1), c(2.0, 0.0))];
        assert!(matches!(interpolate(&nodes, 3), Err(Error::Interpolation(_))));
    }

    #[test]
    fn non_polynomial_data_rejected() {
        let nodes: Vec<_> = circle_nodes(6, 0.731, 0.3).into_iter().map(|z| (z, z.exp())).collect();
        assert!(interpolate(&nodes, 2).is_err());
    }

    #[test]
    fn triple_root_quartic() {
        let p = CPoly::from_real(&[1.0, -2.0, 0.0, 2.0, -1.0]);
        let rm = roots(&p).unwrap();
        assert_eq!(rm.total(), 4);
        assert_eq!(rm.multiplicity_of(c(1.0, 0.0)), 3);
        assert_eq!(rm.multiplicity_of(c(-1.0, 0.0)), 1);
        let rebuilt = CPoly::from_roots_monic(&rm.flatten(), p.coeff(4));
        assert!(rebuilt.rel_distance(&p) < 1e-10);
    }

    #[test]
    fn trivial_roots() {
        assert_eq!(roots(&CPoly::constant(c(2.0, 0.0))).unwrap().total(), 0);
        let rm = roots(&CPoly::monomial(c(1.0, 0.0), 2)).unwrap();
        assert_eq!(rm.roots, vec![(c(0.0, 0.0), 2)]);
    }

    #[test]
    fn division_roundtrip() {
        let a = CPoly::new(vec![c(1.0, 2.0), c(0.5, -1.0), c(3.0, 0.0)]);
        let b = CPoly::new(vec![c(-0.2, 0.1), c(1.0, 1.0)]);
        let prod = &a * &b;
        let (q, r) = prod.div_rem(&b).unwrap();
        assert!(q.rel_distance(&a) < 1e-14);
        assert!(r.max_abs() < 1e-13);
    }

    #[test]
    fn strings_at_cube_root() {
        let ctx = RootContext::new(3, 1).unwrap();
        let a = c(0.8, 0.3);
        let orbit = vec![(a, 1), (a * ctx.q_pow(2), 1), (a * ctx.q_pow(4), 1)];
        let split = classify_strings(&RootMultiset { roots: orbit.clone(), tolerance: 1e-8 }, &ctx);
        assert_eq!(split.strings.len(), 1);
        assert!(split.bethe_roots.is_empty());
        assert!((split.strings[0].power - a.powu(3)).norm() < 1e-12);

        let single = RootMultiset { roots: vec![(c(0.4, -1.1), 1)], tolerance: 1e-8 };
        let split = classify_strings(&single, &ctx);
        assert_eq!((split.strings.len(), split.bethe_roots.len()), (0, 1));

        let mut extra = orbit;
        extra.push((a, 1));
        let split = classify_strings(&RootMultiset { roots: extra, tolerance: 1e-8 }, &ctx);
        assert_eq!(split.strings.len(), 1);
        assert_eq!(split.bethe_roots.len(), 1);
        assert!((split.bethe_roots[0] - a).norm() < 1e-14);
    }
}
