//! Evaluation representations and site L-operators.

use crate::error::{Error, Result};
use crate::qcontext::RootContext;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

type CMat = DMatrix<C64>;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Spectral parameter μ carried through its square root σ, so that every half power
/// appearing in the construction (μ^{1/2}, (μq)^{1/2}, …) is fixed without branch cuts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mu {
    sigma: C64,
}

impl Mu {
    /// μ = σ².
    pub fn from_sqrt(sigma: C64) -> Result<Self> {
        if sigma.norm() == 0.0 || !sigma.re.is_finite() || !sigma.im.is_finite() {
            return Err(Error::InvalidArgument("mu must be a nonzero finite number".into()));
        }
        Ok(Mu { sigma })
    }

    /// μ with the principal square root.
    pub fn principal(mu: C64) -> Result<Self> {
        Mu::from_sqrt(mu.sqrt())
    }

    pub fn sqrt(&self) -> C64 {
        self.sigma
    }
    pub fn value(&self) -> C64 {
        self.sigma * self.sigma
    }

    /// μ q^k with square root σ (q^{1/2})^k.
    pub fn times_q(&self, k: i64, ctx: &RootContext) -> Mu {
        Mu { sigma: self.sigma * ctx.qh_pow(k) }
    }

    /// μν, square roots multiplied.
    pub fn times(&self, other: &Mu) -> Mu {
        Mu { sigma: self.sigma * other.sigma }
    }

    /// σ times an arbitrary unit factor, e.g. to select the other branch.
    pub fn with_sqrt_factor(&self, f: C64) -> Mu {
        Mu { sigma: self.sigma * f }
    }

    /// μ⁻¹ on the branch q^{N′}/σ, the one under which spin reversal maps Q_μ onto Q_{μ⁻¹}.
    pub fn inverse(&self, ctx: &RootContext) -> Mu {
        Mu { sigma: ctx.q_n_prime_sign() / self.sigma }
    }

    /// μ̄ on the branch q^{N′}·σ̄ matching Hermitian conjugation of Q_μ.
    pub fn conj(&self, ctx: &RootContext) -> Mu {
        Mu { sigma: ctx.q_n_prime_sign() * self.sigma.conj() }
    }
}

/// Spin n/2 evaluation representation π_z^{(n)}; basis |m⟩, m = 0..n.
#[derive(Debug, Clone)]
pub struct SpinRep {
    pub n: usize,
    pub z: C64,
    pub e1: CMat,
    pub f1: CMat,
    pub e0: CMat,
    pub f0: CMat,
    pub qh1: CMat,
    pub qh0: CMat,
    /// q^{h₁/2} on the branch (q^{1/2})^{n−2m}.
    pub half_qh1: CMat,
}

pub fn build_spin_rep(n: usize, z: C64, ctx: &RootContext) -> Result<SpinRep> {
    if z.norm() == 0.0 {
        return Err(Error::InvalidArgument("evaluation parameter z must be nonzero".into()));
    }
    let d = n + 1;
    let mut e1 = CMat::zeros(d, d);
    let mut f1 = CMat::zeros(d, d);
    for m in 0..d {
        if m > 0 {
            e1[(m - 1, m)] = ctx.q_number((n - m + 1) as i64)?;
        }
        if m < n {
            f1[(m + 1, m)] = ctx.q_number((m + 1) as i64)?;
        }
    }
    let qh1 = CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |m, _| ctx.q_pow(n as i64 - 2 * m as i64)));
    let qh0 = CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |m, _| ctx.q_pow(2 * m as i64 - n as i64)));
    let half_qh1 =
        CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |m, _| ctx.qh_pow(n as i64 - 2 * m as i64)));
    Ok(SpinRep { n, z, f0: e1.map(|c| c / z), e0: f1.map(|c| c * z), e1, f1, qh1, qh0, half_qh1 })
}

/// N′-dimensional nilpotent representation π^μ_w.
#[derive(Debug, Clone)]
pub struct NilpotentRep {
    pub mu: Mu,
    pub w: C64,
    pub e1: CMat,
    pub f1: CMat,
    pub e0: CMat,
    pub f0: CMat,
    pub qh1: CMat,
    pub qh0: CMat,
    /// q^{h₁/2} = diag(σ⁻¹ q^{−1/2} q^{−n}), a single branch for the whole representation.
    pub half_qh1: CMat,
}

/// Coefficient of |n−1⟩ in π^μ(e₁)|n⟩.
pub fn nilpotent_e_coeff(n: usize, mu: C64, ctx: &RootContext) -> C64 {
    let k = n as i64;
    let num = mu + 1.0 / mu - mu * ctx.q_pow(2 * k) - ctx.q_pow(-2 * k) / mu;
    let d = ctx.q_minus_qinv();
    num / (d * d)
}

pub fn build_nilpotent_rep(mu: Mu, w: C64, ctx: &RootContext) -> Result<NilpotentRep> {
    if w.norm() == 0.0 {
        return Err(Error::InvalidArgument("evaluation parameter w must be nonzero".into()));
    }
    let d = ctx.n_prime() as usize;
    let muv = mu.value();
    let mut e1 = CMat::zeros(d, d);
    let mut f1 = CMat::zeros(d, d);
    for k in 0..d {
        if k + 1 < d {
            f1[(k + 1, k)] = C64::new(1.0, 0.0);
        }
        if k > 0 {
            e1[(k - 1, k)] = nilpotent_e_coeff(k, muv, ctx);
        }
    }
    let half = |k: usize| ctx.qh_pow(-1 - 2 * k as i64) / mu.sqrt();
    let half_qh1 = CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| half(k)));
    let qh1 = CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| ctx.q_pow(-2 * k as i64 - 1) / muv));
    let qh0 = CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| ctx.q_pow(2 * k as i64 + 1) * muv));
    Ok(NilpotentRep { mu, w, f0: e1.map(|c| c / w), e0: f1.map(|c| c * w), e1, f1, qh1, qh0, half_qh1 })
}

/// One nonzero entry of a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub val: C64,
}

/// Site L-operator L = Σ_{ij} ⟨i|L|j⟩ ⊗ |i⟩⟨j| over the quantum spin (0 = up, 1 = down):
/// ⟨0|L|0⟩ = α, ⟨0|L|1⟩ = β, ⟨1|L|0⟩ = γ, ⟨1|L|1⟩ = δ, each an aux_dim × aux_dim matrix.
#[derive(Debug, Clone)]
pub struct LOperator {
    pub aux_dim: usize,
    pub alpha: CMat,
    pub beta: CMat,
    pub gamma: CMat,
    pub delta: CMat,
}

impl LOperator {
    /// Block ⟨i|L|j⟩.
    pub fn block(&self, i: usize, j: usize) -> &CMat {
        match (i, j) {
            (0, 0) => &self.alpha,
            (0, 1) => &self.beta,
            (1, 0) => &self.gamma,
            _ => &self.delta,
        }
    }

    /// Nonzero entries of each block, indexed by 2i + j.
    pub fn sparse_blocks(&self) -> [Vec<Entry>; 4] {
        let sp = |m: &CMat| {
            let mut v = Vec::new();
            for c in 0..m.ncols() {
                for r in 0..m.nrows() {
                    if m[(r, c)] != zero() {
                        v.push(Entry { row: r, col: c, val: m[(r, c)] });
                    }
                }
            }
            v
        };
        [sp(&self.alpha), sp(&self.beta), sp(&self.gamma), sp(&self.delta)]
    }

    /// Entrywise modulus; contracting it bounds every term of the true contraction.
    pub fn abs(&self) -> LOperator {
        let a = |m: &CMat| m.map(|c| C64::new(c.norm(), 0.0));
        LOperator {
            aux_dim: self.aux_dim,
            alpha: a(&self.alpha),
            beta: a(&self.beta),
            gamma: a(&self.gamma),
            delta: a(&self.delta),
        }
    }

    /// Full 2·aux × 2·aux matrix with the quantum index as the slow index.
    pub fn dense(&self) -> CMat {
        let d = self.aux_dim;
        let mut m = CMat::zeros(2 * d, 2 * d);
        for i in 0..2 {
            for j in 0..2 {
                m.view_mut((i * d, j * d), (d, d)).copy_from(self.block(i, j));
            }
        }
        m
    }
}

fn assemble(w: C64, half: &CMat, f1: &CMat, e1: &CMat, ctx: &RootContext) -> LOperator {
    let q = ctx.q();
    let dq = ctx.q_minus_qinv();
    let half_inv = CMat::from_diagonal(&half.diagonal().map(|c| 1.0 / c));
    LOperator {
        aux_dim: half.nrows(),
        alpha: half.map(|c| w * q * c) - &half_inv,
        beta: (half * f1).map(|c| w * q * dq * c),
        gamma: (e1 * &half_inv).map(|c| dq * c),
        delta: half_inv.map(|c| w * q * c) - half,
    }
}

/// L^{(n+1)}(w) with the spin n/2 representation in the auxiliary space.
pub fn build_fusion_l(n: usize, w: C64, ctx: &RootContext) -> Result<LOperator> {
    if n < 1 {
        return Err(Error::InvalidArgument("fusion L needs n ≥ 1".into()));
    }
    let rep = build_spin_rep(n, C64::new(1.0, 0.0), ctx)?;
    Ok(assemble(w, &rep.half_qh1, &rep.f1, &rep.e1, ctx))
}

/// L^μ(w) with the nilpotent representation in the auxiliary space.
pub fn build_q_l(mu: Mu, w: C64, ctx: &RootContext) -> Result<LOperator> {
    let rep = build_nilpotent_rep(mu, C64::new(1.0, 0.0), ctx)?;
    Ok(assemble(w, &rep.half_qh1, &rep.f1, &rep.e1, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(n: u32) -> RootContext {
        RootContext::new(n, 1).unwrap()
    }
    fn close(a: &CMat, b: &CMat) -> bool {
        (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-13
    }

    #[test]
    fn spin_half_generators() {
        let c = ctx(5);
        let r = build_spin_rep(1, C64::new(0.3, 0.2), &c).unwrap();
        assert!((r.e1[(0, 1)] - 1.0).norm() < 1e-15);
        assert!((r.f1[(1, 0)] - 1.0).norm() < 1e-15);
        assert_eq!(r.e1[(1, 0)], zero());
    }

    #[test]
    fn spin_one_lowering() {
        let c = ctx(7);
        let r = build_spin_rep(2, C64::new(1.0, 0.0), &c).unwrap();
        assert!((r.f1[(2, 1)] - c.q_number(2).unwrap()).norm() < 1e-15);
        assert!((r.e1[(0, 1)] - c.q_number(2).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn cartan_parts_invert() {
        let c = ctx(8);
        for n in 1..5 {
            let r = build_spin_rep(n, C64::new(0.4, -0.9), &c).unwrap();
            assert!(close(&(&r.qh1 * &r.qh0), &CMat::identity(n + 1, n + 1)));
            assert!(close(&(&r.half_qh1 * &r.half_qh1), &r.qh1));
            // f₀ = z⁻¹ e₁ and e₀ = z f₁
            assert!(close(&r.f0.map(|x| x * r.z), &r.e1));
            assert!(close(&r.e0, &r.f1.map(|x| x * r.z)));
        }
    }

    #[test]
    fn nilpotent_structure() {
        for n in [3u32, 5, 6, 8] {
            let c = ctx(n);
            let mu = Mu::from_sqrt(C64::new(0.9, 0.4)).unwrap();
            let r = build_nilpotent_rep(mu, C64::new(0.7, 0.1), &c).unwrap();
            let d = c.n_prime() as usize;
            let mut p = CMat::identity(d, d);
            for _ in 0..d {
                p = &p * &r.f1;
            }
            assert!(p.iter().all(|x| x.norm() == 0.0));
            assert!(close(&(&r.half_qh1 * &r.half_qh1), &r.qh1));
            assert!(nilpotent_e_coeff(0, mu.value(), &c).norm() < 1e-15);
            if d > 1 {
                let q = c.q();
                let m = mu.value();
                let expect = (m + 1.0 / m - m * q * q - 1.0 / (m * q * q)) / ((q - 1.0 / q) * (q - 1.0 / q));
                assert!((r.e1[(0, 1)] - expect).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn six_vertex_weights() {
        let c = ctx(5);
        let w = C64::new(0.6, 0.25);
        let l = build_fusion_l(1, w, &c).unwrap();
        let q = c.q();
        let qh = c.qh_pow(1);
        assert!((l.alpha[(0, 0)] - (w * q * qh - 1.0 / qh)).norm() < 1e-15);
        assert!((l.alpha[(1, 1)] - (w * q / qh - qh)).norm() < 1e-15);
        // β carries f₁, which annihilates the top state |n⟩
        assert!(l.beta.column(1).iter().all(|x| x.norm() == 0.0));
        let l2 = build_fusion_l(1, w * 3.0, &c).unwrap();
        assert!(close(&l.gamma, &l2.gamma));
    }

    #[test]
    fn q_l_at_origin() {
        let c = ctx(7);
        let mu = Mu::from_sqrt(C64::new(1.1, -0.3)).unwrap();
        let l = build_q_l(mu, C64::new(0.0, 0.0), &c).unwrap();
        let rep = build_nilpotent_rep(mu, C64::new(1.0, 0.0), &c).unwrap();
        assert!(close(&l.alpha, &rep.half_qh1.map(|x| -1.0 / x)));
        assert!(close(&l.delta, &rep.half_qh1.map(|x| -x)));
        assert!(l.beta.iter().all(|x| x.norm() == 0.0));
        let lw = build_q_l(mu, C64::new(0.3, 0.8), &c).unwrap();
        assert!(lw.delta.iter().enumerate().all(|(k, x)| k % (c.n_prime() as usize + 1) == 0 || x.norm() == 0.0));
    }
}
