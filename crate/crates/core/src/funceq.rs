//! Residual checks of the operator and eigenvalue functional relations.

use crate::error::Result;
use crate::lattice::{
    build_symmetries, contract_full, fusion_recursion, reverse_conjugate, CMat, Lattice, MatPoly, Sector,
};
use crate::qcontext::RootContext;
use crate::polynomials::CPoly;
use crate::reps::{build_fusion_l, build_q_l, Mu};
use crate::spectra::{fusion_eigenvalue, RecordKind, SpectralRecord};
use crate::sampling::ArgSampler;
use num_complex::Complex64 as C64;

/// Floor for residual scales so that identically vanishing operands do not divide by zero.
pub const SCALE_FLOOR: f64 = 1e-30;
pub const OPERATOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub identity: String,
    pub sites: usize,
    pub order: u32,
    pub args: Vec<(String, C64)>,
    pub abs_residual: f64,
    pub scale: f64,
    pub rel_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub seed: Option<u64>,
}

impl ResidualReport {
    pub fn new(identity: &str, lat: &Lattice, args: Vec<(String, C64)>, abs: f64, scale: f64, tol: f64) -> Self {
        let rel = abs / scale.max(SCALE_FLOOR);
        ResidualReport {
            identity: identity.to_string(),
            sites: lat.sites(),
            order: lat.ctx().order(),
            args,
            abs_residual: abs,
            scale,
            rel_residual: rel,
            tol,
            pass: rel.is_finite() && rel < tol,
            seed: None,
        }
    }
}

/// Accumulates Frobenius norms of residuals and scales over sectors.
#[derive(Default)]
struct Acc {
    res2: f64,
    scale2: f64,
}

impl Acc {
    fn add(&mut self, residual: &CMat, scale: f64) {
        self.res2 += residual.norm_squared();
        self.scale2 += scale * scale;
    }
    fn finish(self) -> (f64, f64) {
        (self.res2.sqrt(), self.scale2.sqrt())
    }
}

fn abs_q(ctx: &RootContext, mu: Mu, z: C64, sector: &Sector) -> Result<f64> {
    Ok(crate::lattice::contract_sector(&build_q_l(mu, z / mu.value(), ctx)?.abs(), sector).norm())
}

fn abs_t(lat: &Lattice, z: C64, sector: &Sector) -> Result<f64> {
    Ok(crate::lattice::contract_sector(&build_fusion_l(1, z, lat.ctx())?.abs(), sector).norm())
}

fn args(pairs: &[(&str, C64)]) -> Vec<(String, C64)> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// T(z)Q_μ(z) = (z−1)^M Q_{μq}(zq²) + (zq²−1)^M Q_{μq⁻¹}(zq⁻²).
pub fn check_tq(lat: &Lattice, z: C64, mu: Mu, tol: f64) -> Result<ResidualReport> {
    let ctx = *lat.ctx();
    let m = lat.sites() as u32;
    let (q2, qm2) = (ctx.q_pow(2), ctx.q_pow(-2));
    let (mup, mum) = (mu.times_q(1, &ctx), mu.times_q(-1, &ctx));
    let (c1, c2) = ((z - 1.0).powu(m), (z * q2 - 1.0).powu(m));
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let t = lat.transfer_sample(z, &sec)?;
        let q = lat.q_sample(mu, z, &sec)?;
        let a = lat.q_sample(mup, z * q2, &sec)?;
        let b = lat.q_sample(mum, z * qm2, &sec)?;
        let r = &t.matrix * &q.matrix - &a.matrix * c1 - &b.matrix * c2;
        acc.add(&r, t.abs_norm * q.abs_norm + c1.norm() * a.abs_norm + c2.norm() * b.abs_norm);
    }
    let (res, scale) = acc.finish();
    Ok(ResidualReport::new("TQ", lat, args(&[("z", z), ("sqrt_mu", mu.sqrt())]), res, scale, tol))
}

/// Negative control: the TQ residual with Q_μ(z) on the left assembled at the conjugate root.
/// Must fail; used to confirm that the verification pipeline detects a broken operator.
pub fn check_tq_corrupted(lat: &Lattice, z: C64, mu: Mu, tol: f64) -> Result<ResidualReport> {
    let ctx = *lat.ctx();
    let bad = ctx.inverted();
    let m = lat.sites() as u32;
    let (q2, qm2) = (ctx.q_pow(2), ctx.q_pow(-2));
    let (mup, mum) = (mu.times_q(1, &ctx), mu.times_q(-1, &ctx));
    let (c1, c2) = ((z - 1.0).powu(m), (z * q2 - 1.0).powu(m));
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let t = lat.transfer_sample(z, &sec)?;
        let q = lat.q_op_in(&bad, mu, z, &sec)?;
        let a = lat.q_sample(mup, z * q2, &sec)?;
        let b = lat.q_sample(mum, z * qm2, &sec)?;
        let r = &t.matrix * &q - &a.matrix * c1 - &b.matrix * c2;
        acc.add(&r, t.abs_norm * abs_q(&bad, mu, z, &sec)? + c1.norm() * a.abs_norm + c2.norm() * b.abs_norm);
    }
    let (res, scale) = acc.finish();
    Ok(ResidualReport::new("TQ (corrupted Q)", lat, args(&[("z", z), ("sqrt_mu", mu.sqrt())]), res, scale, tol))
}

/// T(z)Q_μ(zμ²) = (z−1)^M Q_{μq⁻¹}(zμ²) + (zq²−1)^M Q_{μq}(zμ²).
pub fn check_tq_beyond(lat: &Lattice, z: C64, mu: Mu, tol: f64) -> Result<ResidualReport> {
    let ctx = *lat.ctx();
    let m = lat.sites() as u32;
    let zz = z * mu.value() * mu.value();
    let (mup, mum) = (mu.times_q(1, &ctx), mu.times_q(-1, &ctx));
    let (c1, c2) = ((z - 1.0).powu(m), (z * ctx.q_pow(2) - 1.0).powu(m));
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let t = lat.transfer_sample(z, &sec)?;
        let q = lat.q_sample(mu, zz, &sec)?;
        let a = lat.q_sample(mum, zz, &sec)?;
        let b = lat.q_sample(mup, zz, &sec)?;
        let r = &t.matrix * &q.matrix - &a.matrix * c1 - &b.matrix * c2;
        acc.add(&r, t.abs_norm * q.abs_norm + c1.norm() * a.abs_norm + c2.norm() * b.abs_norm);
    }
    let (res, scale) = acc.finish();
    Ok(ResidualReport::new("TQ-beyond", lat, args(&[("z", z), ("sqrt_mu", mu.sqrt())]), res, scale, tol))
}

fn fusion_scale(lat: &Lattice, n: usize, z: C64, sec: &Sector) -> Result<f64> {
    // Norm bound propagated through the recursion with moduli.
    let ctx = *lat.ctx();
    let m = lat.sites() as i32;
    if n == 0 {
        return Ok(0.0);
    }
    let q2 = ctx.q_pow(2);
    let root_dim = (sec.dim() as f64).sqrt();
    let mut prev = 0.0;
    let mut cur = (z * ctx.q_pow(2 * n as i64) - 1.0).norm().powi(m) * root_dim;
    for k in 1..n {
        let x = z * ctx.q_pow(2 * (n - k - 1) as i64);
        let t = abs_t(lat, x * q2, sec)?;
        let next = (cur * t + prev * (x * q2 - 1.0).norm().powi(m)) / (x * q2 * q2 - 1.0).norm().powi(m);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Q_μ(zμ²q²)Q_ν(z) = (zq²−1)^M Q_{μνq}(zμ²q²) + q^{N′M} Q_{μνq^{1−N′}}(zμ²q²) T^{(N′−1)}(zq²).
pub fn check_qqq(lat: &Lattice, z: C64, mu: Mu, nu: Mu, tol: f64) -> Result<ResidualReport> {
    let ctx = *lat.ctx();
    let np = ctx.n_prime() as i64;
    let m = lat.sites() as u32;
    let q2 = ctx.q_pow(2);
    let zz = z * mu.value() * mu.value() * q2;
    let mn = mu.times(&nu);
    let (a_mu, b_mu) = (mn.times_q(1, &ctx), mn.times_q(1 - np, &ctx));
    let c1 = (z * q2 - 1.0).powu(m);
    let c2 = ctx.q_pow(np * m as i64);
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let x = lat.q_sample(mu, zz, &sec)?;
        let y = lat.q_sample(nu, z, &sec)?;
        let a = lat.q_sample(a_mu, zz, &sec)?;
        let b = lat.q_sample(b_mu, zz, &sec)?;
        let f = lat.fusion((np - 1) as usize, z * q2, &sec)?;
        let fs = fusion_scale(lat, (np - 1) as usize, z * q2, &sec)?.max(f.norm());
        let r = &x.matrix * &y.matrix - &a.matrix * c1 - (&b.matrix * &f) * c2;
        acc.add(&r, x.abs_norm * y.abs_norm + c1.norm() * a.abs_norm + b.abs_norm * fs);
    }
    let (res, scale) = acc.finish();
    Ok(ResidualReport::new(
        "QQQ",
        lat,
        args(&[("z", z), ("sqrt_mu", mu.sqrt()), ("sqrt_nu", nu.sqrt())]),
        res,
        scale,
        tol,
    ))
}

fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// [T^{(m)}(z), T^{(n)}(w)] = 0 on every sector.
pub fn check_fusion_commute(lat: &Lattice, m: usize, n: usize, z: C64, w: C64, tol: f64) -> Result<ResidualReport> {
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let a = lat.fusion(m, z, &sec)?;
        let b = lat.fusion(n, w, &sec)?;
        let sa = fusion_scale(lat, m, z, &sec)?.max(a.norm());
        let sb = fusion_scale(lat, n, w, &sec)?.max(b.norm());
        acc.add(&commutator(&a, &b), 2.0 * sa * sb);
    }
    let (res, scale) = acc.finish();
    let name = format!("[T{m},T{n}]");
    Ok(ResidualReport::new(&name, lat, args(&[("z", z), ("w", w)]), res, scale, tol))
}

/// [Q_μ(z), T^{(n)}(w)] = 0.
pub fn check_q_fusion_commute(lat: &Lattice, mu: Mu, z: C64, n: usize, w: C64, tol: f64) -> Result<ResidualReport> {
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let a = lat.q_sample(mu, z, &sec)?;
        let b = lat.fusion(n, w, &sec)?;
        let sb = fusion_scale(lat, n, w, &sec)?.max(b.norm());
        acc.add(&commutator(&a.matrix, &b), 2.0 * a.abs_norm * sb);
    }
    let (res, scale) = acc.finish();
    let name = format!("[Q,T{n}]");
    Ok(ResidualReport::new(&name, lat, args(&[("z", z), ("sqrt_mu", mu.sqrt()), ("w", w)]), res, scale, tol))
}

/// [Q_μ(z), Q_ν(w)] = 0.
pub fn check_q_commute(lat: &Lattice, mu: Mu, z: C64, nu: Mu, w: C64, tol: f64) -> Result<ResidualReport> {
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let a = lat.q_sample(mu, z, &sec)?;
        let b = lat.q_sample(nu, w, &sec)?;
        acc.add(&commutator(&a.matrix, &b.matrix), 2.0 * a.abs_norm * b.abs_norm);
    }
    let (res, scale) = acc.finish();
    Ok(ResidualReport::new(
        "[Q,Q]",
        lat,
        args(&[("z", z), ("sqrt_mu", mu.sqrt()), ("w", w), ("sqrt_nu", nu.sqrt())]),
        res,
        scale,
        tol,
    ))
}

/// Commutation of T^{(n)}(z) and Q_μ(z) with S^z, 𝔰 and (for T only) 𝔯, on the full space.
pub fn check_symmetries(lat: &Lattice, n: usize, z: C64, mu: Mu, tol: f64) -> Result<Vec<ResidualReport>> {
    let ctx = *lat.ctx();
    let m = lat.sites();
    let sym = build_symmetries(m);
    let dim = 1usize << m;
    // Direct fused L-operator: no division, so the commutators are free of recursion cancellation.
    let (tn, tn_abs) = if n >= 2 {
        let l = build_fusion_l(n - 1, z * ctx.q_pow(n as i64), &ctx)?;
        (contract_full(&l, m), contract_full(&l.abs(), m).norm())
    } else {
        let t_full = |x: C64| -> Result<CMat> { Ok(contract_full(&build_fusion_l(1, x, &ctx)?, m)) };
        let t = fusion_recursion(&ctx, m, n, z, dim, t_full)?;
        let norm = t.norm();
        (t, norm)
    };
    let ql = build_q_l(mu, z / mu.value(), &ctx)?;
    let q = contract_full(&ql, m);
    let q_abs = contract_full(&ql.abs(), m).norm();
    let tn_scale = tn_abs.max(SCALE_FLOOR);
    let sz = sym.sz_matrix();
    let par = sym.parity_matrix();
    let rev = sym.reversal_matrix();
    let a = args(&[("z", z), ("sqrt_mu", mu.sqrt())]);
    let sz_norm = sz.norm();
    let mk = |name: String, r: CMat, s: f64| ResidualReport::new(&name, lat, a.clone(), r.norm(), s, tol);
    Ok(vec![
        mk(format!("[T{n},Sz]"), commutator(&tn, &sz), 2.0 * tn_scale * sz_norm),
        mk(format!("[T{n},R]"), commutator(&tn, &rev), 2.0 * tn_scale * rev.norm()),
        mk(format!("[T{n},S]"), commutator(&tn, &par), 2.0 * tn_scale * par.norm()),
        mk("[Q,Sz]".into(), commutator(&q, &sz), 2.0 * q_abs * sz_norm),
        mk("[Q,S]".into(), commutator(&q, &par), 2.0 * q_abs * par.norm()),
    ])
}

/// Spin reversal: 𝔯Q_μ(z)𝔯 = Q_{μ⁻¹}(zμ⁻²) = Q_{μ⁻¹}(zq²μ⁻², q⁻¹)^t = (−zq/μ)^M Q_μ(z⁻¹q⁻²μ²)^t.
///
/// Branches: √(μ⁻¹) = q^{N′}/√μ in the q context; in the q⁻¹ context (principal half power
/// −conj(q^{1/2})) the matching branch is −1/√μ.
pub fn check_spin_reversal(lat: &Lattice, z: C64, mu: Mu, tol: f64) -> Result<Vec<ResidualReport>> {
    let ctx = *lat.ctx();
    let inv_ctx = ctx.inverted();
    let m = lat.sites() as u32;
    let muv = mu.value();
    let mu_inv = mu.inverse(&ctx);
    let mu_inv_other = Mu::from_sqrt(-1.0 / mu.sqrt())?;
    let pref = (-z * ctx.q() / muv).powu(m);
    let mut accs: [Acc; 3] = Default::default();
    for sec in lat.sectors()? {
        let q = lat.q_sample(mu, z, &sec)?;
        let (rsec, rqr) = reverse_conjugate(&q.matrix, &sec);
        let f1 = lat.q_sample(mu_inv, z / (muv * muv), &rsec)?;
        let z2 = z * ctx.q_pow(2) / (muv * muv);
        let f2 = lat.q_op_in(&inv_ctx, mu_inv_other, z2, &rsec)?.transpose();
        let f2_abs = abs_q(&inv_ctx, mu_inv_other, z2, &rsec)?;
        let z3 = muv * muv * ctx.q_pow(-2) / z;
        let f3 = lat.q_sample(mu, z3, &rsec)?;
        let f3m = f3.matrix.transpose() * pref;
        accs[0].add(&(&rqr - &f1.matrix), q.abs_norm + f1.abs_norm);
        accs[1].add(&(&f1.matrix - &f2), f1.abs_norm + f2_abs);
        accs[2].add(&(&f1.matrix - &f3m), f1.abs_norm + pref.norm() * f3.abs_norm);
    }
    let a = args(&[("z", z), ("sqrt_mu", mu.sqrt())]);
    let names = ["RQR=Q(1/mu)", "Q(1/mu)=Q(q^-1)^t", "Q(1/mu)=(-zq/mu)^M Q^t"];
    Ok(accs
        .into_iter()
        .zip(names)
        .map(|(acc, name)| {
            let (r, s) = acc.finish();
            ResidualReport::new(name, lat, a.clone(), r, s, tol)
        })
        .collect())
}

/// Hermitian conjugate: Q_μ(z,q)* = Q_{μ̄}(z̄, q⁻¹)^t = Q_{μ̄}(z̄q⁻², q), with √μ̄ = −conj(√μ)
/// in the q⁻¹ context and q^{N′}·conj(√μ) in the q context.
pub fn check_adjoint(lat: &Lattice, z: C64, mu: Mu, tol: f64) -> Result<Vec<ResidualReport>> {
    let ctx = *lat.ctx();
    let inv_ctx = ctx.inverted();
    let mu_bar = mu.conj(&ctx);
    let mu_bar_inv_ctx = Mu::from_sqrt(-mu.sqrt().conj())?;
    let mut accs: [Acc; 2] = Default::default();
    for sec in lat.sectors()? {
        let q = lat.q_sample(mu, z, &sec)?;
        let adj = q.matrix.adjoint();
        let f1 = lat.q_op_in(&inv_ctx, mu_bar_inv_ctx, z.conj(), &sec)?.transpose();
        let f1_abs = abs_q(&inv_ctx, mu_bar_inv_ctx, z.conj(), &sec)?;
        let f2 = lat.q_sample(mu_bar, z.conj() * ctx.q_pow(-2), &sec)?;
        accs[0].add(&(&adj - &f1), q.abs_norm + f1_abs);
        accs[1].add(&(&adj - &f2.matrix), q.abs_norm + f2.abs_norm);
    }
    let a = args(&[("z", z), ("sqrt_mu", mu.sqrt())]);
    let names = ["Q*=Q(q^-1)^t", "Q*=Q(zbar q^-2)"];
    Ok(accs
        .into_iter()
        .zip(names)
        .map(|(acc, name)| {
            let (r, s) = acc.finish();
            ResidualReport::new(name, lat, a.clone(), r, s, tol)
        })
        .collect())
}

/// The recursion-built T^{(n)} against the direct trace over spin (n−1)/2, and polynomiality
/// of its entries (degree ≤ M, checked at a spare node).
pub fn check_fusion(lat: &Lattice, n: usize, z: C64, tol: f64) -> Result<Vec<ResidualReport>> {
    let mut direct = Acc::default();
    let mut poly = Acc::default();
    let ctx = *lat.ctx();
    for sec in lat.sectors()? {
        let rec = lat.fusion(n, z, &sec)?;
        let dir = lat.fusion_direct(n, z, &sec)?;
        let l = build_fusion_l(n - 1, z * ctx.q_pow(n as i64), &ctx)?;
        let dir_abs = crate::lattice::contract_sector(&l.abs(), &sec).norm();
        let s = fusion_scale(lat, n, z, &sec)?.max(dir_abs);
        direct.add(&(&rec - &dir), s);
        let mp = MatPoly::from_fn(lat.sites(), |y| lat.fusion(n, y, &sec))?;
        let zero = CMat::zeros(1, 1);
        let r = CMat::from_element(1, 1, C64::new(mp.consistency, 0.0));
        poly.add(&(&r - &zero), fusion_scale(lat, n, crate::polynomials::default_nodes(0)[0], &sec)?);
    }
    let a = args(&[("z", z)]);
    let (r1, s1) = direct.finish();
    let (r2, s2) = poly.finish();
    Ok(vec![
        ResidualReport::new(&format!("fus T{n} recursion=direct"), lat, a.clone(), r1, s1, tol),
        ResidualReport::new(&format!("fus T{n} polynomial"), lat, a, r2, s2, tol),
    ])
}

/// T^{(n)}(zq²)T^{(n)}(z) − T^{(n+1)}(z)T^{(n−1)}(zq²) = φ(z)φ(zq^{2n}).
pub fn check_liouville(lat: &Lattice, n: usize, z: C64, tol: f64) -> Result<ResidualReport> {
    let ctx = *lat.ctx();
    let q2 = ctx.q_pow(2);
    let rhs = lat.phi(z) * lat.phi(z * ctx.q_pow(2 * n as i64));
    let mut acc = Acc::default();
    for sec in lat.sectors()? {
        let a = lat.fusion(n, z * q2, &sec)?;
        let b = lat.fusion(n, z, &sec)?;
        let c = lat.fusion(n + 1, z, &sec)?;
        let d = lat.fusion(n - 1, z * q2, &sec)?;
        let dim = sec.dim();
        let r = &a * &b - &c * &d - CMat::identity(dim, dim) * rhs;
        let s = fusion_scale(lat, n, z * q2, &sec)? * fusion_scale(lat, n, z, &sec)?
            + fusion_scale(lat, n + 1, z, &sec)? * fusion_scale(lat, n - 1, z * q2, &sec)?;
        acc.add(&r, s);
    }
    let (res, scale) = acc.finish();
    Ok(ResidualReport::new(&format!("Liouville n={n}"), lat, args(&[("z", z)]), res, scale, tol))
}

/// Names accepted by the identity filter of [`operator_suite`].
pub const OPERATOR_IDENTITIES: &[&str] =
    &["symm", "QT0", "QSS", "assumption", "RQR", "Qad", "TQ", "TQm", "fus", "Liouv", "QQQ"];

/// All operator identities at one (M, N) cell over `tuples` seeded random argument tuples.
/// `filter` restricts to one identity family by name (see [`OPERATOR_IDENTITIES`]).
pub fn operator_suite(
    lat: &Lattice,
    tuples: usize,
    seed: u64,
    tol: f64,
    filter: Option<&str>,
) -> Result<Vec<ResidualReport>> {
    let want = |name: &str| filter.is_none_or(|f| f == name);
    let mut sampler = ArgSampler::new(seed ^ ((lat.sites() as u64) << 32) ^ lat.ctx().order() as u64);
    let np = lat.ctx().n_prime() as usize;
    let mut out = Vec::new();
    for _ in 0..tuples {
        let z = sampler.spectral();
        let w = sampler.spectral();
        let mu = Mu::from_sqrt(sampler.mu_sqrt())?;
        let nu = Mu::from_sqrt(sampler.mu_sqrt())?;
        let n_hi = np.clamp(3, 4);
        if want("symm") {
            out.push(check_fusion_commute(lat, 2, 2, z, w, tol)?);
            out.push(check_fusion_commute(lat, 2, n_hi, z, w, tol)?);
            if lat.sites() <= 8 {
                let s = check_symmetries(lat, n_hi, z, mu, tol)?;
                out.extend(s.into_iter().filter(|r| r.identity.starts_with("[T")));
            }
        }
        if want("QSS") && lat.sites() <= 8 {
            let s = check_symmetries(lat, 2, z, mu, tol)?;
            out.extend(s.into_iter().filter(|r| r.identity.starts_with("[Q")));
        }
        if want("QT0") {
            out.push(check_q_fusion_commute(lat, mu, z, 2, w, tol)?);
            out.push(check_q_fusion_commute(lat, mu, z, n_hi, w, tol)?);
        }
        if want("assumption") {
            out.push(check_q_commute(lat, mu, z, nu, w, tol)?);
        }
        if want("RQR") {
            out.extend(check_spin_reversal(lat, z, mu, tol)?);
        }
        if want("Qad") {
            out.extend(check_adjoint(lat, z, mu, tol)?);
        }
        if want("TQ") {
            out.push(check_tq(lat, z, mu, tol)?);
        }
        if want("TQm") {
            out.push(check_tq_beyond(lat, z, mu, tol)?);
        }
        if want("fus") {
            out.extend(check_fusion(lat, 3, z, tol)?);
        }
        if want("Liouv") {
            out.push(check_liouville(lat, 2, z, tol)?);
        }
        if want("QQQ") {
            out.push(check_qqq(lat, z, mu, nu, tol)?);
        }
    }
    for r in &mut out {
        r.seed = Some(seed);
    }
    Ok(out)
}

// Eigenvalue-level relations. These act on the polynomials carried by a spectral record.

/// Points on the pointwise grid of the eigenvalue checks.
pub const GRID_POINTS: usize = 50;
const GRID_RADIUS: f64 = 0.83;
const GRID_PHASE: f64 = 0.1234;

/// `count` points on a circle, each nudged along the circle while `avoid` rejects it.
pub fn check_grid(count: usize, avoid: impl Fn(C64) -> bool) -> Vec<C64> {
    let step = std::f64::consts::TAU / count as f64;
    (0..count)
        .map(|k| {
            let mut theta = GRID_PHASE + step * k as f64;
            let mut z = C64::from_polar(GRID_RADIUS, theta);
            for _ in 0..16 {
                if !avoid(z) {
                    break;
                }
                theta += step / 17.0;
                z = C64::from_polar(GRID_RADIUS, theta);
            }
            z
        })
        .collect()
}

/// True when z q^{2ℓ}, ℓ = 0..=terms, comes close to a zero of `p`.
fn near_zero(ctx: &RootContext, p: &CPoly, z: C64, terms: usize) -> bool {
    (0..=terms as i64).any(|l| {
        let x = z * ctx.q_pow(2 * l);
        p.eval(x).norm() < 1e-6 * p.eval_abs(x).max(SCALE_FLOOR)
    })
}

/// Σ_{ℓ=1}^{terms} ω^ℓ (zq^{2ℓ}−1)^M / [Q(zq^{2ℓ})Q(zq^{2ℓ−2})] and the sum of term moduli.
fn orbit_sum(ctx: &RootContext, sites: usize, q: &CPoly, z: C64, omega: C64, terms: usize) -> (C64, f64) {
    let mut val = C64::new(0.0, 0.0);
    let mut abs = 0.0;
    for l in 1..=terms as i64 {
        let x = z * ctx.q_pow(2 * l);
        let t = omega.powi(l as i32) * (x - 1.0).powu(sites as u32) / (q.eval(x) * q.eval(z * ctx.q_pow(2 * l - 2)));
        val += t;
        abs += t.norm();
    }
    (val, abs)
}

/// The Q⁻ of the decomposition including its normalization constant: zero on kernel records.
fn normalized_q_minus(rec: &SpectralRecord) -> CPoly {
    match rec.kind {
        RecordKind::Kernel => CPoly::zero(),
        RecordKind::Regular => rec.q_minus.clone(),
    }
}

fn grid_report(name: &str, lat: &Lattice, grid: &[C64], f: impl Fn(C64) -> (C64, f64), tol: f64) -> ResidualReport {
    let mut res: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &z in grid {
        let (r, s) = f(z);
        res = res.max(r.norm());
        scale = scale.max(s);
    }
    ResidualReport::new(name, lat, Vec::new(), res, scale, tol)
}

/// Inversion formula in the forward orientation
/// Q⁻(z) = q^{(N′+1)s} Q⁺(z) Σ_{ℓ=1}^{N′} q^{−2ℓs}(zq^{2ℓ}−1)^M / [Q⁺(zq^{2ℓ})Q⁺(zq^{2ℓ−2})],
/// and, when Q⁻ does not vanish, the reverse orientation
/// Q⁺(z) = q^{−(N′+1)s} Q⁻(z) Σ_{ℓ=1}^{N′} q^{2ℓs}(zq^{2ℓ}−1)^M / [Q⁻(zq^{2ℓ})Q⁻(zq^{2ℓ−2})].
pub fn check_inversion(lat: &Lattice, rec: &SpectralRecord, tol: f64) -> Vec<ResidualReport> {
    let ctx = *lat.ctx();
    let m = lat.sites();
    let np = ctx.n_prime() as usize;
    let qs = rec.s_phase;
    let qp = &rec.q_plus;
    let qm = normalized_q_minus(rec);
    let grid = check_grid(GRID_POINTS, |z| near_zero(&ctx, qp, z, np) || (!qm.is_zero() && near_zero(&ctx, &qm, z, np)));
    let pref = qs.powi(np as i32 + 1);
    let forward = grid_report(
        "inversion Q+ -> Q-",
        lat,
        &grid,
        |z| {
            let (sum, abs) = orbit_sum(&ctx, m, qp, z, qs.powi(-2), np);
            let rhs = pref * qp.eval(z) * sum;
            let lhs = qm.eval(z);
            (lhs - rhs, lhs.norm().max(pref.norm() * qp.eval(z).norm() * abs))
        },
        tol,
    );
    let mut out = vec![forward];
    if !qm.is_zero() {
        out.push(grid_report(
            "inversion Q- -> Q+",
            lat,
            &grid,
            |z| {
                let (sum, abs) = orbit_sum(&ctx, m, &qm, z, qs.powi(2), np);
                let rhs = qm.eval(z) * sum / pref;
                let lhs = qp.eval(z);
                (lhs - rhs, lhs.norm().max(qm.eval(z).norm() * abs / pref.norm()))
            },
            tol,
        ));
    }
    out
}

/// Σ_{ℓ=1}^{N} q^{−2ℓS^z}(zq^{2ℓ}−1)^M / [Q⁺(zq^{2ℓ})Q⁺(zq^{2ℓ−2})] = 0 on the grid, with the
/// sum of term moduli as scale. For records below the equator the phase uses |S^z|.
pub fn check_zero_orbit_sum(lat: &Lattice, rec: &SpectralRecord, tol: f64) -> ResidualReport {
    let ctx = *lat.ctx();
    let n = ctx.order() as usize;
    let qp = &rec.q_plus;
    let grid = check_grid(GRID_POINTS, |z| near_zero(&ctx, qp, z, n));
    // Q⁺ of a record below the equator is that of its spin-reversal partner.
    let omega = ctx.q_pow(-rec.two_sz.abs());
    grid_report("vanishing orbit sum", lat, &grid, |z| orbit_sum(&ctx, lat.sites(), qp, z, omega, n), tol)
}

/// q^{ns}Q⁺(zq^{2n})Q⁻(z) − q^{−ns}Q⁺(z)Q⁻(zq^{2n}) = (q^{N′s} − q^{−N′s}) T⁽ⁿ⁾(z), coefficientwise.
/// `t_n` is the T⁽ⁿ⁾ eigenvalue on the record; its factor (q^{N′s} − q^{−N′s}) is reported as
/// the argument "rhs factor".
pub fn check_wronskian(lat: &Lattice, rec: &SpectralRecord, n: usize, t_n: &CPoly, tol: f64) -> ResidualReport {
    let ctx = *lat.ctx();
    let np = ctx.n_prime() as i32;
    let qs = rec.s_phase;
    let shift = ctx.q_pow(2 * n as i64);
    let qp = &rec.q_plus;
    let qm = normalized_q_minus(rec);
    let a = (&qp.scale_arg(shift) * &qm).scale(qs.powi(n as i32));
    let b = (qp * &qm.scale_arg(shift)).scale(qs.powi(-(n as i32)));
    let factor = qs.powi(np) - qs.powi(-np);
    let rhs = t_n.scale(factor);
    let diff = &(&a - &b) - &rhs;
    let rhs_scale = t_n.max_abs() * (qs.powi(np).norm() + qs.powi(-np).norm());
    let scale = a.max_abs().max(b.max_abs()).max(rhs_scale);
    ResidualReport::new(
        &format!("Wronskian n={n}"),
        lat,
        vec![("rhs factor".into(), factor)],
        diff.max_abs(),
        scale,
        tol,
    )
}

/// T⁽ⁿ⁾(z) = q^{±(n+1)s}Q^±(z)Q^±(zq^{2n}) Σ_{ℓ=1}^n q^{∓2ℓs}(zq^{2ℓ}−1)^M / [Q^±(zq^{2ℓ})Q^±(zq^{2ℓ−2})]
/// pointwise on the grid; `above` selects Q⁺, otherwise Q⁻.
pub fn check_fusion_eigenvalue(
    lat: &Lattice,
    rec: &SpectralRecord,
    n: usize,
    t_n: &CPoly,
    above: bool,
    tol: f64,
) -> ResidualReport {
    let ctx = *lat.ctx();
    let (q, sign, name) = if above {
        (rec.q_plus.clone(), 1, format!("fusion via Q+ n={n}"))
    } else {
        (rec.q_minus.clone(), -1, format!("fusion via Q- n={n}"))
    };
    let qs = rec.s_phase;
    let pref = qs.powi(sign * (n as i32 + 1));
    let shift = ctx.q_pow(2 * n as i64);
    let grid = check_grid(GRID_POINTS, |z| near_zero(&ctx, &q, z, n));
    grid_report(
        &name,
        lat,
        &grid,
        |z| {
            let (sum, abs) = orbit_sum(&ctx, lat.sites(), &q, z, qs.powi(-2 * sign), n);
            let outer = pref * q.eval(z) * q.eval(z * shift);
            let lhs = t_n.eval(z);
            (lhs - outer * sum, lhs.norm().max(outer.norm() * abs))
        },
        tol,
    )
}

/// Coefficientwise tolerance of the eigenvalue-level polynomial identities.
pub const EIGEN_COEFF_TOL: f64 = 1e-8;
/// Pointwise tolerance on the evaluation grid.
pub const EIGEN_GRID_TOL: f64 = 1e-7;

/// Every eigenvalue-level relation on one record: both inversion orientations, the Wronskian
/// for n = 1, 2, N′, the fusion eigenvalues through Q⁺ and Q⁻ for n = 2, N′, and the orbit sum
/// on kernel records.
pub fn eigenvalue_suite(lat: &Lattice, rec: &SpectralRecord) -> Result<Vec<ResidualReport>> {
    let np = lat.ctx().n_prime() as usize;
    let mut out = check_inversion(lat, rec, EIGEN_GRID_TOL);
    let mut orders = vec![1, 2, np.max(2)];
    orders.dedup();
    for n in orders {
        let t = fusion_eigenvalue(lat, rec, n)?.poly;
        out.push(check_wronskian(lat, rec, n, &t, EIGEN_COEFF_TOL));
        if n >= 2 {
            out.push(check_fusion_eigenvalue(lat, rec, n, &t, true, EIGEN_GRID_TOL));
            out.push(check_fusion_eigenvalue(lat, rec, n, &t, false, EIGEN_GRID_TOL));
        }
    }
    if rec.kind == RecordKind::Kernel {
        out.push(check_zero_orbit_sum(lat, rec, EIGEN_COEFF_TOL));
    }
    Ok(out)
}
