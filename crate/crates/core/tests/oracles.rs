//! Brute-force cross-checks. The oracle builds every site operator L_{0k} as a dense matrix on
//! aux ⊗ (C²)^{⊗M}, multiplies them in the order L_{0M}⋯L_{01}, and takes the partial trace.
//! Local weights are written out here from their defining formulas, not taken from the library.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use sixvertex::lattice::{Lattice, MatPoly};
use sixvertex::qcontext::RootContext;
use sixvertex::reps::Mu;

type M = DMatrix<C64>;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Blocks ⟨i|L|j⟩ (quantum indices, 0 = up) as aux matrices, from q^{±h/2}, f, e.
fn blocks(w: C64, half: &[C64], f: &M, e: &M, ctx: &RootContext) -> [M; 4] {
    let d = half.len();
    let q = ctx.q();
    let dq = q - 1.0 / q;
    let h = M::from_fn(d, d, |i, j| if i == j { half[i] } else { c(0.0) });
    let hi = M::from_fn(d, d, |i, j| if i == j { 1.0 / half[i] } else { c(0.0) });
    [&h * (w * q) - &hi, (&h * f) * (w * q * dq), (e * &hi) * dq, &hi * (w * q) - &h]
}

fn spin_half(w: C64, ctx: &RootContext) -> [M; 4] {
    let f = M::from_row_slice(2, 2, &[c(0.0), c(0.0), c(1.0), c(0.0)]);
    let e = f.transpose();
    blocks(w, &[ctx.qh_pow(1), ctx.qh_pow(-1)], &f, &e, ctx)
}

fn nilpotent(mu: Mu, w: C64, ctx: &RootContext) -> [M; 4] {
    let d = ctx.n_prime() as usize;
    let m = mu.value();
    let half: Vec<C64> = (0..d).map(|k| ctx.qh_pow(-1 - 2 * k as i64) / mu.sqrt()).collect();
    let f = M::from_fn(d, d, |i, j| if i == j + 1 { c(1.0) } else { c(0.0) });
    let dq = ctx.q() - 1.0 / ctx.q();
    let e = M::from_fn(d, d, |i, j| {
        if j == i + 1 {
            let k = j as i64;
            (m + 1.0 / m - m * ctx.q_pow(2 * k) - ctx.q_pow(-2 * k) / m) / (dq * dq)
        } else {
            c(0.0)
        }
    });
    blocks(w, &half, &f, &e, ctx)
}

/// L_{0k} on aux ⊗ quantum, index a·2^M + s, site k ↔ bit k−1.
fn embed(b: &[M; 4], k: usize, sites: usize) -> M {
    let d = b[0].nrows();
    let q = 1usize << sites;
    let mut out = M::zeros(d * q, d * q);
    for s in 0..q {
        let j = (s >> k) & 1;
        for i in 0..2 {
            let s2 = (s & !(1 << k)) | (i << k);
            let blk = &b[2 * i + j];
            for a2 in 0..d {
                for a in 0..d {
                    out[(a2 * q + s2, a * q + s)] += blk[(a2, a)];
                }
            }
        }
    }
    out
}

fn oracle(b: &[M; 4], sites: usize) -> M {
    let d = b[0].nrows();
    let q = 1usize << sites;
    let mut mono = M::identity(d * q, d * q);
    for k in 0..sites {
        mono = embed(b, k, sites) * mono;
    }
    M::from_fn(q, q, |r, col| (0..d).map(|a| mono[(a * q + r, a * q + col)]).sum())
}

fn restrict(full: &M, states: &[u32]) -> M {
    M::from_fn(states.len(), states.len(), |i, j| full[(states[i] as usize, states[j] as usize)])
}

fn max_diff(a: &M, b: &M) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn transfer_and_q_match_dense_assembly() {
    let z = C64::new(0.37, -0.81);
    let mu = Mu::from_sqrt(C64::new(1.13, 0.29)).unwrap();
    for (n, m) in [(3, 1), (4, 1), (5, 2), (8, 3)] {
        let ctx = RootContext::new(n, m).unwrap();
        for sites in 2..=5 {
            let lat = Lattice::new(ctx, sites).unwrap();
            let t_full = oracle(&spin_half(z, &ctx), sites);
            let q_full = oracle(&nilpotent(mu, z / mu.value(), &ctx), sites);
            let scale = t_full.norm().max(q_full.norm());
            for sector in lat.sectors().unwrap() {
                let t = lat.transfer(z, &sector).unwrap();
                let qm = lat.q_op(mu, z, &sector).unwrap();
                assert!(max_diff(&t, &restrict(&t_full, sector.states())) < 1e-12 * scale);
                assert!(max_diff(&qm, &restrict(&q_full, sector.states())) < 1e-12 * scale);
            }
            // Nothing leaks between sectors.
            for r in 0..1usize << sites {
                for col in 0..1usize << sites {
                    if r.count_ones() != col.count_ones() {
                        assert!(t_full[(r, col)].norm() < 1e-13 * scale && q_full[(r, col)].norm() < 1e-13 * scale);
                    }
                }
            }
        }
    }
}

#[test]
fn two_site_ferromagnetic_weight() {
    // ⟨↑↑|T(z)|↑↑⟩ = (zq·q^{1/2} − q^{−1/2})² + (zq·q^{−1/2} − q^{1/2})².
    let ctx = RootContext::new(5, 2).unwrap();
    let lat = Lattice::new(ctx, 2).unwrap();
    let z = C64::new(-0.6, 0.45);
    let a = z * ctx.q() * ctx.qh_pow(1) - ctx.qh_pow(-1);
    let d = z * ctx.q() * ctx.qh_pow(-1) - ctx.qh_pow(1);
    let t = lat.transfer(z, &lat.sector(2).unwrap()).unwrap();
    assert_eq!(t.shape(), (1, 1));
    assert!((t[(0, 0)] - (a * a + d * d)).norm() < 1e-14);
}

#[test]
fn q_at_origin_on_six_site_singlets() {
    // Expected 3·Identity on S^z = 0 at N = 3; the dense oracle and the library agree.
    let ctx = RootContext::new(3, 1).unwrap();
    let lat = Lattice::new(ctx, 6).unwrap();
    let mu = Mu::from_sqrt(C64::new(0.8, 0.5)).unwrap();
    let sector = lat.sector(0).unwrap();
    let zero = c(0.0);
    let dense = restrict(&oracle(&nilpotent(mu, zero, &ctx), 6), sector.states());
    let lib = lat.q_op(mu, zero, &sector).unwrap();
    let three = M::identity(sector.dim(), sector.dim()) * c(3.0);
    assert!(max_diff(&dense, &three) < 1e-12);
    assert!(max_diff(&lib, &three) < 1e-12);
}

#[test]
fn two_site_singlet_sector_has_no_kernel() {
    let ctx = RootContext::new(3, 1).unwrap();
    let mu = Mu::from_sqrt(C64::new(0.9, -0.3)).unwrap();
    for z in [C64::new(0.4, 0.2), C64::new(-1.3, 0.7)] {
        let full = oracle(&nilpotent(mu, z / mu.value(), &ctx), 2);
        let block = restrict(&full, &[0b01, 0b10]);
        let sv = block.singular_values();
        assert!(sv.min() > 1e-3 * sv.max(), "singular values {sv}");
    }
}

/// Coefficient matrices of the oracle as a polynomial in z, from the affine dependence
/// L(w) = L(0) + w·(L(1) − L(0)) accumulated symbolically.
fn oracle_coefficients(at: impl Fn(C64) -> [M; 4], sites: usize) -> Vec<M> {
    let l0 = at(c(0.0));
    let l1 = at(c(1.0));
    let slope: [M; 4] = std::array::from_fn(|i| &l1[i] - &l0[i]);
    let d = l0[0].nrows();
    let q = 1usize << sites;
    let mut poly: Vec<M> = vec![M::identity(d * q, d * q)];
    for k in 0..sites {
        let a = embed(&l0, k, sites);
        let b = embed(&slope, k, sites);
        let mut next = vec![M::zeros(d * q, d * q); poly.len() + 1];
        for (p, coeff) in poly.iter().enumerate() {
            next[p] += &a * coeff;
            next[p + 1] += &b * coeff;
        }
        poly = next;
    }
    poly.iter().map(|mono| M::from_fn(q, q, |r, col| (0..d).map(|a| mono[(a * q + r, a * q + col)]).sum())).collect()
}

#[test]
fn sampled_q_polynomial_matches_symbolic_expansion() {
    let ctx = RootContext::new(4, 1).unwrap();
    let sites = 4;
    let lat = Lattice::new(ctx, sites).unwrap();
    let mu = Mu::from_sqrt(C64::new(1.07, 0.41)).unwrap();
    // Q_μ(z) = Tr Π L^μ(z/μ): the coefficient of z^k carries μ^{−k}.
    let exact: Vec<M> = oracle_coefficients(|w| nilpotent(mu, w, &ctx), sites)
        .into_iter()
        .enumerate()
        .map(|(k, m)| m / mu.value().powi(k as i32))
        .collect();
    assert_eq!(exact.len(), sites + 1);
    let scale = exact.iter().map(|m| m.norm()).fold(0.0, f64::max);
    for sector in lat.sectors().unwrap() {
        let sampled = MatPoly::from_fn(sites, |z| lat.q_op(mu, z, &sector)).unwrap();
        for (k, coeff) in sampled.coeffs.iter().enumerate() {
            assert!(max_diff(coeff, &restrict(&exact[k], sector.states())) < 1e-10 * scale, "z^{k}");
        }
    }
    // The top coefficient is nonzero, so generic entries reach degree M.
    assert!(exact[sites].norm() > 1e-3 * scale);
}
