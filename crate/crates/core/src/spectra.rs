//! Joint eigenbasis of the commuting family, eigenvalue polynomials of Q_μ and T,
//! their factorization into Bethe, μ-scaling and string parts, and the derived
//! quantities (phase q^s, normalization, Q^± parts, degeneracy classes).

use crate::error::{Error, Result};
use crate::lattice::{CMat, Lattice, Sector};
use crate::polynomials::{
    classify_strings, default_nodes, interpolate_with_residual, roots_with_noise, CPoly, RootMultiset,
    StringRoot, DEFAULT_NODE_RADIUS,
};
use crate::qcontext::RootContext;
use crate::reps::Mu;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub type CVec = DVector<C64>;

/// Generic perturbation used to build the classification samples from the reference μ.
pub const PROBE_PERTURBATION: C64 = C64::new(1.173, 0.316);

#[derive(Debug, Clone, Copy)]
pub struct SpectraOptions {
    /// Relative tolerance for matching roots across μ samples and inside q²-orbits.
    pub root_tol: f64,
    /// Coefficientwise relative tolerance for grouping transfer eigenvalues.
    pub group_tol: f64,
    /// Coefficients below trim_rel·scale/r^k are treated as exact zeros.
    pub trim_rel: f64,
    /// Rayleigh residual bound for accepting a joint eigenvector.
    pub eig_tol: f64,
    pub seed: u64,
}

impl Default for SpectraOptions {
    fn default() -> Self {
        SpectraOptions { root_tol: 1e-7, group_tol: 1e-7, trim_rel: 1e-9, eig_tol: 1e-9, seed: 1 }
    }
}

/// The μ values at which eigenvalues are sampled: the reference point q^{−N′} and two generic
/// points μ₁ = μ_ref·ρ², μ₂ = μ_ref·ρ⁴ with ρ² the generic perturbation.
#[derive(Debug, Clone, Copy)]
pub struct Probes {
    pub reference: Mu,
    pub first: Mu,
    pub second: Mu,
    /// ρ = √(perturbation); roots scaling like μ² move by ρ⁴ from first to second.
    pub rho: C64,
}

impl Probes {
    pub fn new(ctx: &RootContext) -> Self {
        let np = ctx.n_prime() as i64;
        let sref = ctx.qh_pow(-np);
        let rho = PROBE_PERTURBATION.sqrt();
        let mk = |s: C64| Mu::from_sqrt(s).expect("nonzero");
        Probes { reference: mk(sref), first: mk(sref * rho), second: mk(sref * rho * rho), rho }
    }

    /// Factor by which μ²-scaling roots move from the first to the second sample.
    pub fn scaling_ratio(&self) -> C64 {
        self.rho.powu(4)
    }
}

/// One operator family sampled on the interpolation nodes, with modulus contractions.
#[derive(Debug, Clone)]
pub struct Family {
    pub samples: Vec<CMat>,
    pub abs: Vec<CMat>,
}

/// All samples needed to build spectral records on one sector.
#[derive(Debug, Clone)]
pub struct SectorData {
    pub sector: Arc<Sector>,
    pub nodes: Vec<C64>,
    pub q_first: Family,
    pub q_second: Family,
    pub q_up: Family,
    pub q_down: Family,
    pub q_ref: Family,
    pub transfer: Family,
}

fn q_family(lat: &Lattice, mu: Mu, nodes: &[C64], sector: &Sector) -> Result<Family> {
    let samples = nodes.iter().map(|&z| lat.q_op(mu, z, sector)).collect::<Result<_>>()?;
    let abs = nodes.iter().map(|&z| lat.q_abs(mu, z, sector)).collect::<Result<_>>()?;
    Ok(Family { samples, abs })
}

pub fn sample_sector(lat: &Lattice, sector: Arc<Sector>, probes: &Probes) -> Result<SectorData> {
    let ctx = *lat.ctx();
    let nodes = default_nodes(lat.sites());
    let t_samples = nodes.iter().map(|&z| lat.transfer(z, &sector)).collect::<Result<_>>()?;
    let t_abs = nodes.iter().map(|&z| lat.transfer_abs(z, &sector)).collect::<Result<_>>()?;
    Ok(SectorData {
        q_first: q_family(lat, probes.first, &nodes, &sector)?,
        q_second: q_family(lat, probes.second, &nodes, &sector)?,
        q_up: q_family(lat, probes.first.times_q(1, &ctx), &nodes, &sector)?,
        q_down: q_family(lat, probes.first.times_q(-1, &ctx), &nodes, &sector)?,
        q_ref: q_family(lat, probes.reference, &nodes, &sector)?,
        transfer: Family { samples: t_samples, abs: t_abs },
        nodes,
        sector,
    })
}

#[derive(Debug, Clone)]
pub struct JointEigenbasis {
    pub sector: Arc<Sector>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMat,
    /// Vectors that share all probe eigenvalues with another vector.
    pub jointly_degenerate: Vec<bool>,
    /// Largest relative Rayleigh residual over all probes and vectors.
    pub max_residual: f64,
    /// Number of random probe combinations used (1 = no refinement needed).
    pub refinements: usize,
}

/// Random real mix of the Hermitian and anti-Hermitian parts of `a`, scaled by the
/// cancellation-free size `scale` so that a block which vanishes up to rounding stays negligible.
fn normalized_parts(a: &CMat, scale: f64, rng: &mut ChaCha8Rng) -> Option<CMat> {
    if scale < 1e-300 {
        return None;
    }
    let herm = (a + a.adjoint()) / C64::new(scale, 0.0);
    let anti = (a - a.adjoint()) * C64::new(0.0, 1.0 / scale);
    let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Some(herm * C64::new(x, 0.0) + anti * C64::new(y, 0.0))
}

/// Relative Rayleigh residual ‖Av − (v†Av)v‖ / (|v|ᵀ|A||v|).
pub fn rayleigh_residual(a: &CMat, a_abs: &CMat, v: &CVec) -> f64 {
    let av = a * v;
    let lam = v.dotc(&av);
    let r = (av - v * lam).norm();
    let vabs = v.map(|c| C64::new(c.norm(), 0.0));
    let scale = vabs.dotc(&(a_abs * &vabs)).re;
    r / scale.max(crate::funceq::SCALE_FLOOR)
}

/// Relative gap of the combination eigenvalues below which vectors are treated as a cluster.
const CLUSTER_GAP: f64 = 1e-4;

/// Diagonalize a random Hermitian combination of the probe operators; clusters of nearly equal
/// combination eigenvalues are re-diagonalized with fresh combinations until every vector is a
/// joint eigenvector of all probes or the cluster is certified as an exact joint degeneracy.
pub fn joint_diagonalize(data: &SectorData, opts: &SpectraOptions) -> Result<JointEigenbasis> {
    let dim = data.sector.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (data.sector.n_down() as u64 * 0x9e37_79b9));
    let probes: Vec<(&CMat, &CMat)> = [
        (&data.q_first, 1usize),
        (&data.q_second, 2),
        (&data.transfer, 0),
        (&data.q_first, 3),
        (&data.transfer, 4),
    ]
    .iter()
    .map(|(f, k)| (&f.samples[*k % f.samples.len()], &f.abs[*k % f.abs.len()]))
    .collect();
    let combine = |rng: &mut ChaCha8Rng| -> CMat {
        let mut h = CMat::zeros(dim, dim);
        for (a, aa) in &probes {
            if let Some(p) = normalized_parts(a, aa.norm(), rng) {
                h += p;
            }
        }
        h
    };
    let eig = combine(&mut rng).symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mut vectors = CMat::zeros(dim, dim);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let spread = vals.iter().map(|v| v.abs()).fold(1e-300, f64::max);
    let residual_of = |v: &CVec| probes.iter().map(|(a, aa)| rayleigh_residual(a, aa, v)).fold(0.0, f64::max);
    let mut jointly = vec![false; dim];
    let mut refinements = 1;
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && vals[end] - vals[end - 1] < CLUSTER_GAP * spread {
            end += 1;
        }
        if end - start > 1 {
            // Eigenvector error scales like rounding/gap, so even moderately close clusters are
            // re-diagonalized; keep the fresh combination with the smallest joint residual.
            let base = vectors.columns(start, end - start).into_owned();
            let worst = |m: &CMat| (0..m.ncols()).map(|c| residual_of(&m.column(c).into_owned())).fold(0.0, f64::max);
            let mut best_res = worst(&base);
            let mut sub = base.clone();
            for _ in 0..6 {
                if best_res < 1e-3 * opts.eig_tol {
                    break;
                }
                refinements += 1;
                let h = combine(&mut rng);
                let e = (base.adjoint() * &h * &base).symmetric_eigen();
                let cand = &base * e.eigenvectors;
                let r = worst(&cand);
                if r < best_res {
                    best_res = r;
                    sub = cand;
                }
            }
            // Separated vectors may still coincide in every probe eigenvalue.
            for c in 0..sub.ncols() {
                vectors.set_column(start + c, &sub.column(c));
            }
            let ev = |c: usize, k: usize| {
                let v = sub.column(c).into_owned();
                v.dotc(&(probes[k].0 * &v))
            };
            for c in 0..sub.ncols() {
                for d in 0..sub.ncols() {
                    if c != d
                        && (0..probes.len()).all(|k| {
                            let s = probes[k].1.norm().max(1e-300);
                            (ev(c, k) - ev(d, k)).norm() < 1e-8 * s
                        })
                    {
                        jointly[start + c] = true;
                    }
                }
            }
        }
        start = end;
    }
    let max_residual = (0..dim).map(|c| residual_of(&vectors.column(c).into_owned())).fold(0.0, f64::max);
    Ok(JointEigenbasis { sector: data.sector.clone(), vectors, jointly_degenerate: jointly, max_residual, refinements })
}

/// Eigenvalue polynomial of one vector within a sampled family.
#[derive(Debug, Clone)]
pub struct EigenPoly {
    pub poly: CPoly,
    /// Largest |v|ᵀ|A(z_k)||v| over nodes: the cancellation-free size of the eigenvalue.
    pub scale: f64,
    /// Interpolation mismatch at the spare node, relative to scale.
    pub consistency: f64,
    /// Largest relative residual of A(z_k)v = λ_k v over nodes.
    pub eig_residual: f64,
}

pub fn eigenvalue_polynomial(fam: &Family, nodes: &[C64], v: &CVec, trim_rel: f64) -> Result<EigenPoly> {
    let vabs = v.map(|c| C64::new(c.norm(), 0.0));
    let mut pts = Vec::with_capacity(nodes.len());
    let mut scale: f64 = 0.0;
    let mut eig_residual: f64 = 0.0;
    for (k, &z) in nodes.iter().enumerate() {
        let av = &fam.samples[k] * v;
        let lam = v.dotc(&av);
        let s = vabs.dotc(&(&fam.abs[k] * &vabs)).re;
        scale = scale.max(s);
        eig_residual = eig_residual.max((av - v * lam).norm() / s.max(crate::funceq::SCALE_FLOOR));
        pts.push((z, lam));
    }
    let max_degree = nodes.len() - 2;
    let (p, resid) = interpolate_with_residual(&pts, max_degree)?;
    let r = nodes[0].norm();
    let trimmed: Vec<C64> = p
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, &c)| if c.norm() < trim_rel * scale / r.powi(k as i32) { C64::new(0.0, 0.0) } else { c })
        .collect();
    Ok(EigenPoly {
        poly: CPoly::new(trimmed),
        scale,
        consistency: resid / scale.max(crate::funceq::SCALE_FLOOR),
        eig_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// Q_μ has a nonvanishing eigenvalue on the vector.
    Regular,
    /// The vector lies in the common kernel of Q_μ(z); Q^± are recovered from T.
    Kernel,
}

/// Closed-form value of Q_μ(0) on sector S^z and the specialised regime formula, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationCheck {
    pub measured: C64,
    pub general: C64,
    /// Name ("N1", "N2", "N3") and value of the regime formula applying to this sector.
    pub regime: Option<(&'static str, C64)>,
    pub rel_error: f64,
    pub degree: isize,
    /// deg Q = M exactly when the closed form is nonzero.
    pub degree_law: bool,
}

#[derive(Debug, Clone)]
pub struct SpectralRecord {
    pub two_sz: i64,
    pub index: usize,
    pub vector: CVec,
    pub kind: RecordKind,
    pub t_poly: CPoly,
    /// Q_μ eigenvalues at the two generic samples and at the reference point.
    pub q_first: EigenPoly,
    pub q_second: EigenPoly,
    pub q_ref: EigenPoly,
    pub n_inf: usize,
    pub p_b: CPoly,
    /// μ-scaling factor at the first sample and at the reference point.
    pub p_mu_first: CPoly,
    pub p_mu: CPoly,
    /// String factor at the reference point, a polynomial in z^{N′}.
    pub p_s: CPoly,
    pub strings: Vec<StringRoot>,
    /// true: the string position a_i scales like μ^{2N′}; false: it is μ-independent.
    pub string_mu_flags: Vec<bool>,
    pub norm_first: C64,
    pub norm_const: C64,
    pub s_phase: C64,
    /// |N_{μq}/N_μ − N_μ/N_{μq⁻¹}| relative.
    pub s_ratio_mismatch: f64,
    pub q_plus: CPoly,
    /// Q⁻ = Q_{μ_ref}/Q⁺ (unnormalised; carries N_{μ_ref}).
    pub q_minus: CPoly,
    /// Relative residual of the exact division Q_{μ_ref} = Q⁺·Q⁻.
    pub q_minus_remainder: f64,
    /// Coefficientwise relative error of N z^{n∞} P_B P_μ P_S against the sampled polynomial.
    pub reassembly_error: f64,
    pub normalization: NormalizationCheck,
    /// Residual of the T·Q relation used for kernel records.
    pub tq_residual: f64,
    pub flags: Vec<String>,
    /// Informational notes that do not invalidate the record.
    pub warnings: Vec<String>,
    /// Size of the group of records sharing this transfer eigenvalue.
    pub degeneracy: usize,
    pub group: usize,
    /// ±1: the transfer eigenvalue equals this sign times the group representative's.
    pub group_sign: f64,
}

impl SpectralRecord {
    pub fn sz(&self) -> f64 {
        self.two_sz as f64 / 2.0
    }
    pub fn n_plus(&self) -> usize {
        self.q_plus.degree().max(0) as usize
    }
    pub fn n_strings(&self) -> usize {
        self.strings.len()
    }
    pub fn flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// (−1)^M (μq)^{S^z} Σ_{ℓ=0}^{N′−1} q^{2ℓS^z}, with (μq)^{S^z} = (√μ q^{1/2})^{2S^z}.
pub fn q_at_zero_closed_form(ctx: &RootContext, sites: usize, mu: Mu, two_sz: i64) -> C64 {
    let np = ctx.n_prime() as i64;
    let sign = if sites.is_multiple_of(2) { 1.0 } else { -1.0 };
    let base = (mu.sqrt() * ctx.qh_pow(1)).powi(two_sz as i32);
    let sum: C64 = (0..np).map(|l| ctx.q_pow(l * two_sz)).sum();
    base * sum * sign
}

/// The regime formula for Q_μ(0), when the sector falls in one of the three special cases.
pub fn q_at_zero_regime(ctx: &RootContext, sites: usize, mu: Mu, two_sz: i64) -> Option<(&'static str, C64)> {
    let n = ctx.order() as i64;
    let np = ctx.n_prime() as i64;
    let mu_s = mu.sqrt().powi(two_sz as i32);
    let q_s = ctx.qh_pow(two_sz);
    let sign = if sites.is_multiple_of(2) { 1.0 } else { -1.0 };
    let commensurate = two_sz.rem_euclid(n) == 0;
    if np == n && commensurate {
        Some(("N1", q_s * mu_s * sign * n as f64))
    } else if np != n && sites.is_multiple_of(2) && commensurate {
        Some(("N2", q_s * mu_s * np as f64))
    } else if np != n && sites % 2 == 1 {
        let qns = ctx.qh_pow(np * two_sz);
        let num = qns - 1.0 / qns;
        let den = q_s - 1.0 / q_s;
        Some(("N3", -qns * mu_s * num / den))
    } else {
        None
    }
}

fn coeff_rel_error(a: &CPoly, b: &CPoly) -> f64 {
    let n = a.coeffs().len().max(b.coeffs().len());
    let scale = a.max_abs().max(b.max_abs()).max(1e-300);
    (0..n).map(|k| (a.coeff(k) - b.coeff(k)).norm()).fold(0.0, f64::max) / scale
}

/// Relative coefficientwise distance of two polynomials (max-norm).
pub fn poly_distance(a: &CPoly, b: &CPoly) -> f64 {
    coeff_rel_error(a, b)
}

fn match_root(r: C64, pool: &[C64], used: &mut [bool], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &w) in pool.iter().enumerate() {
        if used[i] {
            continue;
        }
        let d = (w - r).norm() / r.norm().max(1e-300);
        if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    if let Some((i, _)) = best {
        used[i] = true;
    }
    best.map(|(i, _)| i)
}

/// Solve t(z)Q(z) = x(z−1)^M Q(zq²) + x⁻¹(zq²−1)^M Q(zq⁻²) for Q of the given degree with
/// Q(0) = 1. Returns the solution and its relative residual.
pub fn solve_tq(ctx: &RootContext, sites: usize, t: &CPoly, degree: usize, x: C64) -> Result<(CPoly, f64)> {
    let m = sites;
    let q2 = ctx.q_pow(2);
    let a = CPoly::linear_power(C64::new(1.0, 0.0), C64::new(-1.0, 0.0), m);
    let b = CPoly::linear_power(q2, C64::new(-1.0, 0.0), m);
    let column = |j: usize| -> CPoly {
        let mono = CPoly::monomial(C64::new(1.0, 0.0), j);
        let lhs = t * &mono;
        let r1 = a.scale(x * ctx.q_pow(2 * j as i64)).shift_up(j);
        let r2 = b.scale(ctx.q_pow(-2 * j as i64) / x).shift_up(j);
        &(&lhs - &r1) - &r2
    };
    let rows = m + degree + 1;
    let cols: Vec<CPoly> = (0..=degree).map(column).collect();
    let scale = cols.iter().map(|c| c.max_abs()).fold(1e-300, f64::max);
    if degree == 0 {
        let r = cols[0].max_abs() / scale.max(t.max_abs());
        return Ok((CPoly::constant(C64::new(1.0, 0.0)), r));
    }
    let amat = DMatrix::from_fn(rows, degree, |i, j| cols[j + 1].coeff(i));
    let rhs = DVector::from_fn(rows, |i, _| -cols[0].coeff(i));
    let svd = amat.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-14).map_err(|e| Error::LinearSystem(e.to_string()))?;
    let res = (&amat * &sol - &rhs).norm() / (rhs.norm().max(scale));
    let mut c = vec![C64::new(1.0, 0.0)];
    c.extend(sol.iter().copied());
    Ok((CPoly::new(c), res))
}

/// Best phase x = (q^{1/2})^k and the TQ solution of the given degree.
pub fn solve_tq_any_phase(ctx: &RootContext, sites: usize, t: &CPoly, degree: usize) -> Result<(CPoly, C64, f64)> {
    let mut best: Option<(CPoly, C64, f64)> = None;
    for k in 0..(2 * ctx.order() as i64) {
        let x = ctx.qh_pow(k);
        let (p, r) = solve_tq(ctx, sites, t, degree, x)?;
        if best.as_ref().is_none_or(|b| r < b.2) {
            best = Some((p, x, r));
        }
    }
    best.ok_or_else(|| Error::LinearSystem("no phase candidates".into()))
}

struct Builder<'a> {
    lat: &'a Lattice,
    probes: &'a Probes,
    opts: &'a SpectraOptions,
}

impl Builder<'_> {
    fn build(&self, data: &SectorData, index: usize, v: CVec, zero_sample: &(CMat, CMat)) -> Result<SpectralRecord> {
        let ctx = *self.lat.ctx();
        let m = self.lat.sites();
        let np = ctx.n_prime() as usize;
        let two_sz = data.sector.two_sz();
        let nodes = &data.nodes;
        let trim = self.opts.trim_rel;
        let q_first = eigenvalue_polynomial(&data.q_first, nodes, &v, trim)?;
        let q_second = eigenvalue_polynomial(&data.q_second, nodes, &v, trim)?;
        let q_ref = eigenvalue_polynomial(&data.q_ref, nodes, &v, trim)?;
        let q_up = eigenvalue_polynomial(&data.q_up, nodes, &v, trim)?;
        let q_down = eigenvalue_polynomial(&data.q_down, nodes, &v, trim)?;
        let t = eigenvalue_polynomial(&data.transfer, nodes, &v, trim)?;
        let mut flags = Vec::new();
        for (name, e) in [("Q1", &q_first), ("Q2", &q_second), ("Qref", &q_ref), ("T", &t)] {
            if e.eig_residual > 1e-8 {
                flags.push(format!("{name} eigen residual {:.1e}", e.eig_residual));
            }
            if e.consistency > 1e-8 {
                flags.push(format!("{name} interpolation consistency {:.1e}", e.consistency));
            }
        }

        // Q_μ(0) measured directly from the z = 0 operator.
        let vabs = v.map(|c| C64::new(c.norm(), 0.0));
        let measured = v.dotc(&(&zero_sample.0 * &v));
        let measured_scale = vabs.dotc(&(&zero_sample.1 * &vabs)).re;
        let general = q_at_zero_closed_form(&ctx, m, self.probes.first, two_sz);
        let regime = q_at_zero_regime(&ctx, m, self.probes.first, two_sz);
        let target = regime.map(|r| r.1).unwrap_or(general);
        let rel_error = (measured - target).norm() / measured_scale.max(target.norm()).max(1e-300);
        let degree = q_first.poly.degree();
        let closed_nonzero = general.norm() > 1e-9 * measured_scale.max(1.0);
        let normalization = NormalizationCheck {
            measured,
            general,
            regime,
            rel_error,
            degree,
            degree_law: (degree == m as isize) == closed_nonzero,
        };

        let empty = CPoly::constant(C64::new(1.0, 0.0));
        let mut rec = SpectralRecord {
            two_sz,
            index,
            vector: v,
            kind: RecordKind::Regular,
            t_poly: t.poly.clone(),
            q_first: q_first.clone(),
            q_second: q_second.clone(),
            q_ref: q_ref.clone(),
            n_inf: 0,
            p_b: empty.clone(),
            p_mu_first: empty.clone(),
            p_mu: empty.clone(),
            p_s: empty.clone(),
            strings: Vec::new(),
            string_mu_flags: Vec::new(),
            norm_first: C64::new(0.0, 0.0),
            norm_const: C64::new(0.0, 0.0),
            s_phase: C64::new(0.0, 0.0),
            s_ratio_mismatch: 0.0,
            q_plus: empty.clone(),
            q_minus: CPoly::zero(),
            q_minus_remainder: 0.0,
            reassembly_error: 0.0,
            normalization,
            tq_residual: 0.0,
            flags,
            warnings: Vec::new(),
            degeneracy: 1,
            group: 0,
            group_sign: 1.0,
        };

        if q_first.poly.is_zero() {
            self.fill_kernel(&mut rec)?;
            return Ok(rec);
        }

        let p1 = &q_first.poly;
        let p2 = &q_second.poly;
        let n_inf = p1.order_at_zero();
        if p2.order_at_zero() != n_inf {
            rec.flags.push("order at zero differs between μ samples".into());
        }
        let noise = 1e-12;
        let tol = self.opts.root_tol;
        let core1 = p1.shift_down(n_inf);
        let core2 = p2.shift_down(p2.order_at_zero());
        let r1 = roots_with_noise(&core1, noise, tol)?.flatten();
        let r2 = roots_with_noise(&core2, noise, tol)?.flatten();
        let ratio = self.probes.scaling_ratio();
        let mut used = vec![false; r2.len()];
        let mut invariant = Vec::new();
        let mut scaling = Vec::new();
        // Match invariant roots first, then μ²-scaling ones; leftovers are ambiguous.
        let mut pending = Vec::new();
        for &r in &r1 {
            if match_root(r, &r2, &mut used, tol).is_some() {
                invariant.push(r);
            } else {
                pending.push(r);
            }
        }
        for &r in &pending {
            if match_root(r * ratio, &r2, &mut used, tol).is_some() {
                scaling.push(r);
            } else {
                rec.flags.push(format!("root {r:.6} neither μ-invariant nor μ²-scaling"));
            }
        }
        let inv_split = classify_strings(&RootMultiset { roots: invariant.iter().map(|&r| (r, 1)).collect(), tolerance: tol }, &ctx);
        let sca_split = classify_strings(&RootMultiset { roots: scaling.iter().map(|&r| (r, 1)).collect(), tolerance: tol }, &ctx);
        if inv_split.ambiguous || sca_split.ambiguous {
            rec.warnings.push("string partition ambiguous at tolerance".into());
        }
        let mu_ratio_ref = self.probes.rho.powu(4).inv(); // (μ_ref/μ₁)²
        let p_b = CPoly::from_roots_normalized(&inv_split.bethe_roots);
        let p_mu_first = CPoly::from_roots_normalized(&sca_split.bethe_roots);
        let mu_ref_roots: Vec<C64> = sca_split.bethe_roots.iter().map(|&r| r * mu_ratio_ref).collect();
        let p_mu = CPoly::from_roots_normalized(&mu_ref_roots);
        let mut strings = Vec::new();
        let mut string_flags = Vec::new();
        for s in &inv_split.strings {
            strings.push(*s);
            string_flags.push(false);
        }
        for s in &sca_split.strings {
            strings.push(*s);
            string_flags.push(true);
        }
        let string_factor = |scale_np: C64| -> CPoly {
            let mut acc = CPoly::constant(C64::new(1.0, 0.0));
            for (s, &fl) in strings.iter().zip(&string_flags) {
                let a = if fl { s.power * scale_np } else { s.power };
                let f = CPoly::new({
                    let mut c = vec![C64::new(0.0, 0.0); np + 1];
                    c[0] = C64::new(1.0, 0.0);
                    c[np] = -1.0 / a;
                    c
                });
                acc = &acc * &f;
            }
            acc
        };
        let p_s_first = string_factor(C64::new(1.0, 0.0));
        let p_s = string_factor(mu_ratio_ref.powu(np as u32));
        let norm_first = p1.coeff(n_inf);
        let norm_const = q_ref.poly.coeff(n_inf);
        let rebuild = |n: C64, pm: &CPoly, ps: &CPoly| (&(&p_b * pm) * ps).scale(n).shift_up(n_inf);
        let err_first = coeff_rel_error(&rebuild(norm_first, &p_mu_first, &p_s_first), p1);
        let err_ref = if q_ref.poly.is_zero() {
            if norm_const.norm() > 0.0 { 1.0 } else { 0.0 }
        } else {
            coeff_rel_error(&rebuild(norm_const, &p_mu, &p_s), &q_ref.poly)
        };
        rec.reassembly_error = err_first.max(err_ref);
        if rec.reassembly_error > 1e-6 {
            rec.flags.push(format!("reassembly error {:.1e}", rec.reassembly_error));
        }

        // Phase q^s from the normalization ratio and its consistency.
        let n_up = q_up.poly.coeff(n_inf);
        let n_down = q_down.poly.coeff(n_inf);
        let r_up = n_up / norm_first;
        let r_down = norm_first / n_down;
        rec.s_ratio_mismatch = (r_up - r_down).norm() / r_up.norm().max(1e-300);
        rec.s_phase = r_up * ctx.q_pow(2 * n_inf as i64);

        let (qm, rem) = q_ref.poly.div_exact(&p_b)?;
        rec.q_minus_remainder = rem;
        rec.q_minus = qm;
        rec.q_plus = p_b.clone();
        rec.n_inf = n_inf;
        rec.p_b = p_b;
        rec.p_mu_first = p_mu_first;
        rec.p_mu = p_mu;
        rec.p_s = p_s;
        rec.strings = strings;
        rec.string_mu_flags = string_flags;
        rec.norm_first = norm_first;
        rec.norm_const = norm_const;
        Ok(rec)
    }

    /// Kernel vectors carry no Q_μ data; recover Q⁺ of degree (M−1)/2 and Q⁻ of degree
    /// (M+1)/2 from the transfer eigenvalue through the TQ relation.
    fn fill_kernel(&self, rec: &mut SpectralRecord) -> Result<()> {
        let ctx = *self.lat.ctx();
        let m = self.lat.sites();
        rec.kind = RecordKind::Kernel;
        // Below the equator the reversed state carries the same transfer eigenvalue.
        let n_plus = ((m as i64 - rec.two_sz.abs()) / 2) as usize;
        let n_minus = m - n_plus;
        let (qp, x, res_p) = solve_tq_any_phase(&ctx, m, &rec.t_poly, n_plus)?;
        let (qm, res_m) = solve_tq(&ctx, m, &rec.t_poly, n_minus, 1.0 / x)?;
        rec.tq_residual = res_p.max(res_m);
        if rec.tq_residual > 1e-8 {
            rec.flags.push(format!("kernel TQ residual {:.1e}", rec.tq_residual));
        }
        let qp_roots = roots_with_noise(&qp, 1e-12, self.opts.root_tol)?;
        let split = classify_strings(&qp_roots, &ctx);
        rec.strings = split.strings;
        rec.string_mu_flags = vec![false; rec.strings.len()];
        rec.p_b = qp.clone();
        rec.q_plus = qp;
        rec.q_minus = qm;
        rec.s_phase = x;
        Ok(())
    }
}

/// Records for every joint eigenvector of one sector.
pub fn sector_records(
    lat: &Lattice,
    sector: Arc<Sector>,
    probes: &Probes,
    opts: &SpectraOptions,
) -> Result<(JointEigenbasis, Vec<SpectralRecord>)> {
    let data = sample_sector(lat, sector.clone(), probes)?;
    let basis = joint_diagonalize(&data, opts)?;
    let zero = C64::new(0.0, 0.0);
    let zero_sample = (lat.q_op(probes.first, zero, &sector)?, lat.q_abs(probes.first, zero, &sector)?);
    let b = Builder { lat, probes, opts };
    let mut out = Vec::with_capacity(sector.dim());
    for c in 0..sector.dim() {
        let mut rec = b.build(&data, c, basis.vectors.column(c).into_owned(), &zero_sample)?;
        if basis.jointly_degenerate[c] {
            rec.flags.push("jointly degenerate with another vector".into());
        }
        out.push(rec);
    }
    Ok((basis, out))
}

/// Full spectrum over all sectors with transfer-eigenvalue grouping applied.
pub fn spectrum(lat: &Lattice, opts: &SpectraOptions) -> Result<Vec<SpectralRecord>> {
    let probes = Probes::new(lat.ctx());
    let mut all = Vec::new();
    for sec in lat.sectors()? {
        all.extend(sector_records(lat, sec, &probes, opts)?.1);
    }
    group_by_transfer(&mut all, opts.group_tol, lat.ctx());
    Ok(all)
}

/// Assign `group`, `group_sign` and `degeneracy`.
///
/// Two records are linked when their transfer eigenvalues agree coefficientwise, or when their
/// S^z differ by a multiple kN′ and the eigenvalues differ exactly by (q^{N′})^k: at q^{N′} = −1
/// the loop-algebra lowering by N′ units of S^z flips the sign of the transfer eigenvalue.
/// Groups are the connected components; `degeneracy` is the group size.
pub fn group_by_transfer(records: &mut [SpectralRecord], tol: f64, ctx: &RootContext) {
    let n = records.len();
    let np = ctx.n_prime() as i64;
    let flip = ctx.q_n_prime_sign() < 0.0;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    let linked = |a: &SpectralRecord, b: &SpectralRecord| -> Option<f64> {
        if coeff_rel_error(&a.t_poly, &b.t_poly) < tol {
            return Some(1.0);
        }
        let ds = (a.two_sz - b.two_sz) / 2;
        if flip && ds % np == 0 && (ds / np) % 2 != 0 {
            let neg = b.t_poly.scale(C64::new(-1.0, 0.0));
            if coeff_rel_error(&a.t_poly, &neg) < tol {
                return Some(-1.0);
            }
        }
        None
    };
    for i in 0..n {
        for j in (i + 1)..n {
            if linked(&records[i], &records[j]).is_some() {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut ids: Vec<usize> = Vec::new();
    let mut group_of = vec![0usize; n];
    for (i, slot) in group_of.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        *slot = match ids.iter().position(|&x| x == r) {
            Some(g) => g,
            None => {
                ids.push(r);
                ids.len() - 1
            }
        };
    }
    let mut sizes = vec![0usize; ids.len()];
    let mut first = vec![usize::MAX; ids.len()];
    for (i, &g) in group_of.iter().enumerate() {
        sizes[g] += 1;
        if first[g] == usize::MAX {
            first[g] = i;
        }
    }
    let signs: Vec<f64> = (0..n)
        .map(|i| {
            let r = &records[first[group_of[i]]];
            if coeff_rel_error(&r.t_poly, &records[i].t_poly) < tol { 1.0 } else { -1.0 }
        })
        .collect();
    for (i, r) in records.iter_mut().enumerate() {
        r.group = group_of[i];
        r.group_sign = signs[i];
        r.degeneracy = sizes[group_of[i]];
    }
}

/// Singular values of Q_μ(z) on a sector and the number below threshold·(modulus-contraction norm).
#[derive(Debug, Clone)]
pub struct KernelReport {
    pub dimension: usize,
    pub sector_dim: usize,
    pub threshold: f64,
    /// A singular value lies within a factor 100 above the threshold.
    pub gap_warning: bool,
    pub singular_values: Vec<f64>,
}

pub const KERNEL_THRESHOLD: f64 = 1e-9;

pub fn kernel_dimension(lat: &Lattice, mu: Mu, z: C64, sector: &Sector) -> Result<KernelReport> {
    let s = lat.q_sample(mu, z, sector)?;
    let threshold = KERNEL_THRESHOLD * s.abs_norm.max(crate::funceq::SCALE_FLOOR);
    let sv: Vec<f64> = s.matrix.singular_values().iter().copied().collect();
    let dimension = sv.iter().filter(|&&x| x < threshold).count();
    let gap_warning = sv.iter().any(|&x| x >= threshold && x < 100.0 * threshold);
    Ok(KernelReport { dimension, sector_dim: sector.dim(), threshold, gap_warning, singular_values: sv })
}

/// Kernel dimension at several generic (μ, z) probes; errors if they disagree.
pub fn stable_kernel_dimension(lat: &Lattice, sector: &Sector, probes: usize, seed: u64) -> Result<KernelReport> {
    let mut sampler = crate::sampling::ArgSampler::new(seed);
    let mut first: Option<KernelReport> = None;
    for _ in 0..probes.max(1) {
        let mu = Mu::from_sqrt(sampler.mu_sqrt())?;
        let z = sampler.spectral();
        let r = kernel_dimension(lat, mu, z, sector)?;
        match &mut first {
            None => first = Some(r),
            Some(f) => {
                if f.dimension != r.dimension {
                    return Err(Error::Factorization(format!(
                        "kernel dimension unstable across probes: {} vs {}",
                        f.dimension, r.dimension
                    )));
                }
                f.gap_warning |= r.gap_warning;
            }
        }
    }
    Ok(first.expect("at least one probe"))
}

/// A record is maximal when it has n_+ = M/2 − S^z Bethe roots, no vanishing roots and no strings.
pub fn is_maximal(rec: &SpectralRecord, sites: usize) -> bool {
    let expected = ((sites as i64 - rec.two_sz) / 2) as isize;
    !rec.flagged()
        && rec.n_inf == 0
        && rec.strings.is_empty()
        && rec.q_plus.degree() == expected
        && (rec.kind == RecordKind::Regular || rec.q_minus.degree() == sites as isize - expected)
}

/// Multiplet structure inside one transfer-eigenvalue group (M even).
#[derive(Debug, Clone)]
pub struct DegeneracyGroup {
    pub group: usize,
    pub multiplicity: usize,
    /// Records per class, with the class's common n_S.
    pub classes: Vec<(Vec<usize>, usize)>,
    /// Every class has 2^{n_S} members.
    pub law_holds: bool,
}

/// Split each transfer group into loop-algebra multiplets and compare their sizes with 2^{n_S}.
///
/// A record with S^z, f μ-independent strings and transfer sign ε relative to its group lies in
/// the multiplet keyed by (S^z + N′f, ε·(q^{N′})^f): toggling a string flag moves S^z by N′ and
/// multiplies the transfer eigenvalue by q^{N′}. Spin reversal pairs at most two multiplets.
pub fn degeneracy_groups(records: &[SpectralRecord], ctx: &RootContext) -> Vec<DegeneracyGroup> {
    let np = ctx.n_prime() as i64;
    let qnp = ctx.q_n_prime_sign();
    let n_groups = records.iter().map(|r| r.group + 1).max().unwrap_or(0);
    let mut members_of: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (i, r) in records.iter().enumerate() {
        members_of[r.group].push(i);
    }
    let mut out = Vec::new();
    for (g, members) in members_of.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut classes: Vec<((i64, i8), Vec<usize>)> = Vec::new();
        for &i in &members {
            let r = &records[i];
            let fixed = r.string_mu_flags.iter().filter(|f| !**f).count() as i64;
            let twist = r.group_sign * qnp.powi(fixed as i32);
            let key = (r.two_sz + 2 * np * fixed, if twist > 0.0 { 1 } else { -1 });
            match classes.iter_mut().find(|c| c.0 == key) {
                Some(c) => c.1.push(i),
                None => classes.push((key, vec![i])),
            }
        }
        let classes: Vec<(Vec<usize>, usize)> = classes
            .into_iter()
            .map(|(_, idx)| {
                let ns = records[idx[0]].n_strings();
                (idx, ns)
            })
            .collect();
        let law_holds = classes.len() <= 2
            && classes.iter().all(|(idx, ns)| {
                idx.len() == 1usize << ns && idx.iter().all(|&i| records[i].n_strings() == *ns)
            });
        out.push(DegeneracyGroup { group: g, multiplicity: members.len(), classes, law_holds });
    }
    out
}

/// P_μ(z) = P_B(zμ⁻²) at the first sample, coefficientwise relative distance.
pub fn p_mu_scaling_error(rec: &SpectralRecord, probes: &Probes) -> f64 {
    let mu = probes.first.value();
    let expected = rec.p_b.scale_arg(1.0 / (mu * mu));
    coeff_rel_error(&rec.p_mu_first, &expected)
}

/// Eigenvalue polynomial of T⁽ⁿ⁾(z) on the record's vector.
pub fn fusion_eigenvalue(lat: &Lattice, rec: &SpectralRecord, n: usize) -> Result<EigenPoly> {
    let sector = lat.sector(rec.two_sz)?;
    let nodes = default_nodes(lat.sites());
    let mut samples = Vec::with_capacity(nodes.len());
    for &z in &nodes {
        samples.push(lat.fusion(n, z, &sector)?);
    }
    let abs = samples.iter().map(|a| a.map(|c| C64::new(c.norm(), 0.0))).collect();
    eigenvalue_polynomial(&Family { samples, abs }, &nodes, &rec.vector, 1e-13)
}

/// Unit-disk-radius helper used by reports.
pub fn node_radius() -> f64 {
    DEFAULT_NODE_RADIUS
}
