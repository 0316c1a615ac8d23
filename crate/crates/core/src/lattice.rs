//! Global operators on the 2^M quantum space, assembled sector by sector in S^z.

use crate::cache::{BlockKey, SectorCache};
use crate::error::{Error, Result};
use crate::polynomials::{default_nodes, CPoly};
use crate::qcontext::{ChainConfig, RootContext};
use crate::reps::{build_fusion_l, build_q_l, Entry, LOperator, Mu};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::sync::Arc;

pub type CMat = DMatrix<C64>;

/// Basis states with a fixed number of down spins. Site k is bit k; a set bit is spin down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sector {
    sites: usize,
    n_down: usize,
    states: Vec<u32>,
    index: Vec<u32>,
}

impl Sector {
    pub fn new(sites: usize, n_down: usize) -> Result<Self> {
        ChainConfig::new(sites)?;
        if n_down > sites {
            return Err(Error::InvalidArgument(format!("{n_down} down spins on {sites} sites")));
        }
        let full = 1usize << sites;
        let states: Vec<u32> = (0..full as u32).filter(|s| s.count_ones() as usize == n_down).collect();
        let mut index = vec![u32::MAX; full];
        for (i, s) in states.iter().enumerate() {
            index[*s as usize] = i as u32;
        }
        Ok(Sector { sites, n_down, states, index })
    }

    /// Sector with 2S^z = two_sz.
    pub fn from_two_sz(sites: usize, two_sz: i64) -> Result<Self> {
        let nd = sites as i64 - two_sz;
        if nd < 0 || nd % 2 != 0 || nd / 2 > sites as i64 {
            return Err(Error::InvalidArgument(format!("2S^z = {two_sz} impossible for M = {sites}")));
        }
        Sector::new(sites, (nd / 2) as usize)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }
    pub fn n_down(&self) -> usize {
        self.n_down
    }
    /// 2S^z = M − 2·n_down.
    pub fn two_sz(&self) -> i64 {
        self.sites as i64 - 2 * self.n_down as i64
    }
    pub fn sz(&self) -> f64 {
        self.two_sz() as f64 / 2.0
    }
    pub fn dim(&self) -> usize {
        self.states.len()
    }
    pub fn states(&self) -> &[u32] {
        &self.states
    }
    pub fn index_of(&self, state: u32) -> Option<usize> {
        match self.index.get(state as usize) {
            Some(&i) if i != u32::MAX => Some(i as usize),
            _ => None,
        }
    }
    /// Spin-reversed sector.
    pub fn reversed(&self) -> Sector {
        Sector::new(self.sites, self.sites - self.n_down).expect("valid")
    }
}

/// All sectors, from S^z = M/2 down to −M/2.
pub fn all_sectors(sites: usize) -> Result<Vec<Arc<Sector>>> {
    (0..=sites).map(|d| Sector::new(sites, d).map(Arc::new)).collect()
}

/// Matrix of an operator restricted to one S^z sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub sector: Arc<Sector>,
    pub matrix: CMat,
}

impl SectorOperator {
    pub fn dim(&self) -> usize {
        self.sector.dim()
    }
}

fn mul_sparse(entries: &[Entry], p: &[C64], d: usize, out: &mut [C64]) {
    out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
    for e in entries {
        let src = &p[e.col * d..(e.col + 1) * d];
        let dst = &mut out[e.row * d..(e.row + 1) * d];
        for (o, s) in dst.iter_mut().zip(src) {
            *o += e.val * s;
        }
    }
}

fn trace(p: &[C64], d: usize) -> C64 {
    (0..d).map(|a| p[a * d + a]).sum()
}

/// ⟨s′|X|s⟩ = Tr_aux[L^{s′_M s_M} ⋯ L^{s′_1 s_1}] for all s, s′ in the sector, built column
/// by column with an aux-matrix accumulator per row prefix.
pub fn contract_sector(l: &LOperator, sector: &Sector) -> CMat {
    let d = l.aux_dim;
    let blocks = l.sparse_blocks();
    let m = sector.sites;
    let nd = sector.n_down;
    let dim = sector.dim();
    let cols: Vec<Vec<(usize, C64)>> = sector
        .states
        .par_iter()
        .map(|&s| {
            let mut id = vec![C64::new(0.0, 0.0); d * d];
            for a in 0..d {
                id[a * d + a] = C64::new(1.0, 0.0);
            }
            let mut layer: Vec<(u32, usize, Vec<C64>)> = vec![(0, 0, id)];
            for k in 0..m {
                let j = ((s >> k) & 1) as usize;
                let remaining = m - k - 1;
                let mut next = Vec::with_capacity(layer.len() * 2);
                for (bits, downs, p) in &layer {
                    for i in 0..2usize {
                        let nd2 = downs + i;
                        if nd2 > nd || nd2 + remaining < nd {
                            continue;
                        }
                        let blk = &blocks[2 * i + j];
                        if blk.is_empty() {
                            continue;
                        }
                        let mut out = vec![C64::new(0.0, 0.0); d * d];
                        mul_sparse(blk, p, d, &mut out);
                        next.push((bits | ((i as u32) << k), nd2, out));
                    }
                }
                layer = next;
            }
            layer
                .into_iter()
                .map(|(bits, _, p)| (sector.index_of(bits).expect("row in sector"), trace(&p, d)))
                .collect()
        })
        .collect();
    let mut out = CMat::zeros(dim, dim);
    for (c, col) in cols.into_iter().enumerate() {
        for (r, v) in col {
            out[(r, c)] = v;
        }
    }
    out
}

/// Same contraction over the full 2^M space, without assuming S^z conservation.
pub fn contract_full(l: &LOperator, sites: usize) -> CMat {
    let d = l.aux_dim;
    let blocks = l.sparse_blocks();
    let dim = 1usize << sites;
    let cols: Vec<Vec<(usize, C64)>> = (0..dim as u32)
        .into_par_iter()
        .map(|s| {
            let mut id = vec![C64::new(0.0, 0.0); d * d];
            for a in 0..d {
                id[a * d + a] = C64::new(1.0, 0.0);
            }
            let mut layer: Vec<(u32, Vec<C64>)> = vec![(0, id)];
            for k in 0..sites {
                let j = ((s >> k) & 1) as usize;
                let mut next = Vec::with_capacity(layer.len() * 2);
                for (bits, p) in &layer {
                    for i in 0..2usize {
                        let blk = &blocks[2 * i + j];
                        if blk.is_empty() {
                            continue;
                        }
                        let mut out = vec![C64::new(0.0, 0.0); d * d];
                        mul_sparse(blk, p, d, &mut out);
                        next.push((bits | ((i as u32) << k), out));
                    }
                }
                layer = next;
            }
            layer.into_iter().map(|(bits, p)| (bits as usize, trace(&p, d))).collect()
        })
        .collect();
    let mut out = CMat::zeros(dim, dim);
    for (c, col) in cols.into_iter().enumerate() {
        for (r, v) in col {
            out[(r, c)] += v;
        }
    }
    out
}

/// Operator sample together with a cancellation-free size: the Frobenius norm of the same
/// contraction performed with entrywise moduli of the local blocks.
#[derive(Debug, Clone)]
pub struct Sample {
    pub matrix: CMat,
    pub abs_norm: f64,
}

/// Matrix-valued polynomial Σ_k C_k z^k.
#[derive(Debug, Clone)]
pub struct MatPoly {
    pub coeffs: Vec<CMat>,
    /// Largest entry mismatch at the spare consistency node.
    pub consistency: f64,
}

impl MatPoly {
    pub fn eval(&self, z: C64) -> CMat {
        let mut acc = self.coeffs.last().cloned().expect("nonempty");
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc * z + c;
        }
        acc
    }

    /// Entry (r, c) as a scalar polynomial.
    pub fn entry(&self, r: usize, c: usize) -> CPoly {
        CPoly::new(self.coeffs.iter().map(|m| m[(r, c)]).collect())
    }

    /// Reconstruct a polynomial of degree ≤ max_degree from samples on the default nodes;
    /// the last node is held back as a consistency check.
    pub fn from_fn(max_degree: usize, mut f: impl FnMut(C64) -> Result<CMat>) -> Result<Self> {
        let nodes = default_nodes(max_degree);
        let mats: Vec<CMat> = nodes.iter().map(|&z| f(z)).collect::<Result<_>>()?;
        let n = max_degree + 1;
        let v = DMatrix::from_fn(n, n, |i, k| nodes[i].powu(k as u32));
        let vinv = v.try_inverse().ok_or_else(|| Error::Interpolation("singular node matrix".into()))?;
        let coeffs: Vec<CMat> = (0..n)
            .map(|k| {
                let mut acc = CMat::zeros(mats[0].nrows(), mats[0].ncols());
                for (j, m) in mats.iter().take(n).enumerate() {
                    acc += m * vinv[(k, j)];
                }
                acc
            })
            .collect();
        let p = MatPoly { coeffs, consistency: 0.0 };
        let check = &p.eval(nodes[n]) - &mats[n];
        let consistency = check.iter().map(|c| c.norm()).fold(0.0, f64::max);
        Ok(MatPoly { consistency, ..p })
    }
}

/// Operator builder for a fixed chain and root of unity, optionally backed by a block cache.
#[derive(Debug, Clone)]
pub struct Lattice {
    ctx: RootContext,
    sites: usize,
    cache: Option<SectorCache>,
}

impl Lattice {
    pub fn new(ctx: RootContext, sites: usize) -> Result<Self> {
        ChainConfig::new(sites)?;
        Ok(Lattice { ctx, sites, cache: None })
    }

    pub fn with_cache(mut self, cache: SectorCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn ctx(&self) -> &RootContext {
        &self.ctx
    }
    pub fn sites(&self) -> usize {
        self.sites
    }

    fn cached(
        &self,
        op: &str,
        args: &[C64],
        sector: &Sector,
        build: impl FnOnce() -> Result<CMat>,
    ) -> Result<CMat> {
        match &self.cache {
            None => build(),
            Some(c) => {
                let key = BlockKey {
                    sites: self.sites,
                    order: self.ctx.order(),
                    root_index: self.ctx.root_index(),
                    operator: op.to_string(),
                    args: args.to_vec(),
                    n_down: sector.n_down(),
                };
                c.get_or_build(&key, build)
            }
        }
    }

    pub fn sector(&self, two_sz: i64) -> Result<Arc<Sector>> {
        Sector::from_two_sz(self.sites, two_sz).map(Arc::new)
    }

    pub fn sectors(&self) -> Result<Vec<Arc<Sector>>> {
        all_sectors(self.sites)
    }

    /// T(z) = Tr Π L^{(2)}(z).
    pub fn transfer(&self, z: C64, sector: &Sector) -> Result<CMat> {
        self.cached("T", &[z], sector, || Ok(contract_sector(&build_fusion_l(1, z, &self.ctx)?, sector)))
    }

    pub fn transfer_sample(&self, z: C64, sector: &Sector) -> Result<Sample> {
        let l = build_fusion_l(1, z, &self.ctx)?;
        Ok(Sample { matrix: self.transfer(z, sector)?, abs_norm: contract_sector(&l.abs(), sector).norm() })
    }

    /// Q_μ(z) = Tr Π L^μ(z/μ).
    pub fn q_op(&self, mu: Mu, z: C64, sector: &Sector) -> Result<CMat> {
        self.cached("Q", &[mu.sqrt(), z], sector, || {
            Ok(contract_sector(&build_q_l(mu, z / mu.value(), &self.ctx)?, sector))
        })
    }

    pub fn q_sample(&self, mu: Mu, z: C64, sector: &Sector) -> Result<Sample> {
        let l = build_q_l(mu, z / mu.value(), &self.ctx)?;
        Ok(Sample { matrix: self.q_op(mu, z, sector)?, abs_norm: contract_sector(&l.abs(), sector).norm() })
    }

    /// Contraction of T(z) with entrywise-modulus local blocks; bounds every matrix element.
    pub fn transfer_abs(&self, z: C64, sector: &Sector) -> Result<CMat> {
        Ok(contract_sector(&build_fusion_l(1, z, &self.ctx)?.abs(), sector))
    }

    /// Contraction of Q_μ(z) with entrywise-modulus local blocks.
    pub fn q_abs(&self, mu: Mu, z: C64, sector: &Sector) -> Result<CMat> {
        Ok(contract_sector(&build_q_l(mu, z / mu.value(), &self.ctx)?.abs(), sector))
    }

    /// Q_μ(z) built in another root context (e.g. q⁻¹) for the same chain.
    pub fn q_op_in(&self, ctx: &RootContext, mu: Mu, z: C64, sector: &Sector) -> Result<CMat> {
        Ok(contract_sector(&build_q_l(mu, z / mu.value(), ctx)?, sector))
    }

    /// φ(z) = (zq² − 1)^M, the quantum determinant T^{(1)}.
    pub fn phi(&self, z: C64) -> C64 {
        (z * self.ctx.q_pow(2) - 1.0).powu(self.sites as u32)
    }

    /// T^{(n)}(z) from the fusion recursion seeded by T^{(0)} = 0, T^{(1)} = φ.
    pub fn fusion(&self, n: usize, z: C64, sector: &Sector) -> Result<CMat> {
        if !fusion_nodes_safe(&self.ctx, n, z) {
            // Evaluate through the polynomial reconstruction on safe nodes instead.
            let p = MatPoly::from_fn(self.sites, |y| self.fusion(n, y, sector))?;
            return Ok(p.eval(z));
        }
        fusion_recursion(&self.ctx, self.sites, n, z, sector.dim(), |x| self.transfer(x, sector))
    }

    /// T^{(n)}(z) as a trace over the spin (n−1)/2 auxiliary space, Tr Π L^{(n)}(z qⁿ).
    pub fn fusion_direct(&self, n: usize, z: C64, sector: &Sector) -> Result<CMat> {
        if n < 2 {
            return Err(Error::InvalidArgument("direct fusion construction needs n ≥ 2".into()));
        }
        let l = build_fusion_l(n - 1, z * self.ctx.q_pow(n as i64), &self.ctx)?;
        Ok(contract_sector(&l, sector))
    }

    /// XXZ Hamiltonian −½ Σ [σˣσˣ + σʸσʸ + Δ(σᶻσᶻ − 1)] with periodic boundary.
    pub fn hamiltonian(&self, sector: &Sector) -> CMat {
        let m = self.sites;
        let delta = self.ctx.delta();
        let dim = sector.dim();
        let mut h = CMat::zeros(dim, dim);
        for (c, &s) in sector.states().iter().enumerate() {
            for k in 0..m {
                let k2 = (k + 1) % m;
                let a = (s >> k) & 1;
                let b = (s >> k2) & 1;
                // σᶻσᶻ − 1 vanishes on parallel pairs
                if a != b {
                    let t = s ^ (1 << k) ^ (1 << k2);
                    let r = sector.index_of(t).expect("flip conserves S^z");
                    h[(r, c)] -= C64::new(1.0, 0.0);
                    h[(c, c)] += C64::new(delta, 0.0);
                }
            }
        }
        h
    }

    /// −(q − q⁻¹) z d/dz log[T(z)/φ(z)] at z = 1 by a central difference of step h.
    pub fn hamiltonian_from_transfer(&self, sector: &Sector, h: f64) -> Result<CMat> {
        let one = C64::new(1.0, 0.0);
        let t1 = self.transfer(one, sector)?;
        let dt = (self.transfer(one + h, sector)? - self.transfer(one - h, sector)?) / C64::new(2.0 * h, 0.0);
        let lu = t1.lu();
        let deriv = lu.solve(&dt).ok_or_else(|| Error::LinearSystem("T(1) is singular".into()))?;
        let q2 = self.ctx.q_pow(2);
        let dim = sector.dim();
        let shift = CMat::identity(dim, dim) * (self.sites as f64 * q2 / (q2 - 1.0));
        Ok((deriv - shift) * (-self.ctx.q_minus_qinv()))
    }
}

/// False when the recursion for T^{(n)}(z) would divide by a (near) zero of (xq⁴ − 1)^M.
pub fn fusion_nodes_safe(ctx: &RootContext, n: usize, z: C64) -> bool {
    let q4 = ctx.q_pow(4);
    (1..n).all(|k| (z * ctx.q_pow(2 * (n - k - 1) as i64) * q4 - 1.0).norm() >= 1e-6)
}

/// Fusion recursion for T^{(n)}(z) on any representation of the transfer matrix `t`:
/// with A_k = T^{(k)}(z q^{2(n−k)}) and x = z q^{2(n−k−1)},
/// A_{k+1} = [A_k T(xq²) − (xq² − 1)^M A_{k−1}] / (xq⁴ − 1)^M.
pub fn fusion_recursion(
    ctx: &RootContext,
    sites: usize,
    n: usize,
    z: C64,
    dim: usize,
    mut t: impl FnMut(C64) -> Result<CMat>,
) -> Result<CMat> {
    if n == 0 {
        return Ok(CMat::zeros(dim, dim));
    }
    let q2 = ctx.q_pow(2);
    let m = sites as u32;
    let mut prev = CMat::zeros(dim, dim);
    let mut cur = CMat::identity(dim, dim) * (z * ctx.q_pow(2 * n as i64) - 1.0).powu(m);
    for k in 1..n {
        let x = z * ctx.q_pow(2 * (n - k - 1) as i64);
        let tk = t(x * q2)?;
        let next = (&cur * &tk - &prev * (x * q2 - 1.0).powu(m)) / (x * q2 * q2 - 1.0).powu(m);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// S^z, spin reversal 𝔯 = Πσˣ and 𝔰 = Πσᶻ on the full space.
#[derive(Debug, Clone)]
pub struct Symmetries {
    pub sz: Vec<f64>,
    pub reversal: Vec<usize>,
    pub parity: Vec<f64>,
}

impl Symmetries {
    pub fn sz_matrix(&self) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.sz.len(),
            self.sz.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }
    pub fn parity_matrix(&self) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.parity.len(),
            self.parity.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }
    pub fn reversal_matrix(&self) -> CMat {
        let n = self.reversal.len();
        let mut m = CMat::zeros(n, n);
        for (s, &t) in self.reversal.iter().enumerate() {
            m[(t, s)] = C64::new(1.0, 0.0);
        }
        m
    }
}

pub fn build_symmetries(sites: usize) -> Symmetries {
    let dim = 1usize << sites;
    let mask = (dim - 1) as u32;
    let sz = (0..dim as u32).map(|s| sites as f64 / 2.0 - s.count_ones() as f64).collect();
    let reversal = (0..dim as u32).map(|s| (s ^ mask) as usize).collect();
    let parity = (0..dim as u32).map(|s| if s.count_ones() % 2 == 0 { 1.0 } else { -1.0 }).collect();
    Symmetries { sz, reversal, parity }
}

/// 𝔯 X 𝔯 for X given on `sector`; the result lives on the reversed sector.
pub fn reverse_conjugate(x: &CMat, sector: &Sector) -> (Sector, CMat) {
    let rev = sector.reversed();
    let mask = ((1usize << sector.sites()) - 1) as u32;
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    for (c, &s) in sector.states().iter().enumerate() {
        let c2 = rev.index_of(s ^ mask).expect("reversed state");
        for (r, &t) in sector.states().iter().enumerate() {
            let r2 = rev.index_of(t ^ mask).expect("reversed state");
            out[(r2, c2)] = x[(r, c)];
        }
    }
    (rev, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn sector_bookkeeping() {
        let s = Sector::from_two_sz(6, 0).unwrap();
        assert_eq!(s.dim(), 20);
        assert_eq!(s.n_down(), 3);
        assert!(Sector::from_two_sz(5, 0).is_err());
        assert_eq!(Sector::from_two_sz(5, 1).unwrap().dim(), 10);
        assert_eq!(all_sectors(4).unwrap().iter().map(|s| s.dim()).sum::<usize>(), 16);
    }

    #[test]
    fn two_site_ferromagnet() {
        // Hand contraction: only α blocks contribute on |↑↑⟩.
        let ctx = RootContext::new(5, 1).unwrap();
        let lat = Lattice::new(ctx, 2).unwrap();
        let z = c(0.4, 0.3);
        let s = lat.sector(2).unwrap();
        let t = lat.transfer(z, &s).unwrap();
        let q = ctx.q();
        let qh = ctx.qh_pow(1);
        let a0 = z * q * qh - 1.0 / qh;
        let a1 = z * q / qh - qh;
        assert!((t[(0, 0)] - (a0 * a0 + a1 * a1)).norm() < 1e-14);
    }

    #[test]
    fn sector_matches_full_space() {
        let ctx = RootContext::new(5, 2).unwrap();
        let mu = Mu::from_sqrt(c(0.8, 0.5)).unwrap();
        let l = build_q_l(mu, c(0.3, -0.7), &ctx).unwrap();
        let full = contract_full(&l, 4);
        for sec in all_sectors(4).unwrap() {
            let blk = contract_sector(&l, &sec);
            for (i, &a) in sec.states().iter().enumerate() {
                for (j, &b) in sec.states().iter().enumerate() {
                    assert!((blk[(i, j)] - full[(a as usize, b as usize)]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn quantum_determinant_seed() {
        let ctx = RootContext::new(4, 1).unwrap();
        let lat = Lattice::new(ctx, 3).unwrap();
        let s = lat.sector(1).unwrap();
        let z = c(0.2, 0.9);
        let t1 = lat.fusion(1, z, &s).unwrap();
        assert!((t1[(1, 1)] - lat.phi(z)).norm() < 1e-14);
        let t2 = lat.fusion(2, z, &s).unwrap();
        let t = lat.transfer(z * ctx.q_pow(2), &s).unwrap();
        assert!((t2 - t).norm() < 1e-12);
    }

    #[test]
    fn reversal_is_involution() {
        let sym = build_symmetries(5);
        let r = sym.reversal_matrix();
        let p = sym.parity_matrix();
        let id = CMat::identity(32, 32);
        assert!((&r * &r - &id).norm() == 0.0);
        assert!((&p * &p - &id).norm() == 0.0);
    }

    #[test]
    fn hamiltonian_two_forms() {
        let ctx = RootContext::new(3, 1).unwrap();
        let lat = Lattice::new(ctx, 4).unwrap();
        for sec in lat.sectors().unwrap() {
            let h = lat.hamiltonian(&sec);
            let hd = lat.hamiltonian_from_transfer(&sec, 1e-5).unwrap();
            assert!((h - hd).iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-6);
        }
    }
}
