//! Root-of-unity context: q = exp(2πi m/N) with exact exponent bookkeeping.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Primitive N-th root of unity together with its half power q^{1/2} = exp(iπ m/N).
///
/// Powers are reduced modulo N (or 2N for half powers) before touching floating point,
/// so long products of q-factors carry no accumulated phase error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootContext {
    n: u32,
    m: u32,
    n_prime: u32,
    q: C64,
    delta: f64,
}

impl RootContext {
    pub fn new(n: u32, m: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidRoot { n, m, reason: "N must be at least 2" });
        }
        if n == 2 {
            return Err(Error::InvalidRoot { n, m, reason: "q = -1 makes q - 1/q vanish" });
        }
        if m == 0 || m >= n {
            return Err(Error::InvalidRoot { n, m, reason: "need 0 < m < N" });
        }
        if gcd(m, n) != 1 {
            return Err(Error::InvalidRoot { n, m, reason: "gcd(m, N) != 1, root is not primitive" });
        }
        let n_prime = if n % 2 == 1 { n } else { n / 2 };
        let q = C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64);
        Ok(RootContext { n, m, n_prime, q, delta: q.re })
    }

    pub fn order(&self) -> u32 {
        self.n
    }
    pub fn root_index(&self) -> u32 {
        self.m
    }
    /// N' = N for odd N, N/2 for even N; the order of q².
    pub fn n_prime(&self) -> u32 {
        self.n_prime
    }
    pub fn q(&self) -> C64 {
        self.q
    }
    /// Anisotropy Δ = (q + 1/q)/2.
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn odd(&self) -> bool {
        self.n % 2 == 1
    }

    /// q^k.
    pub fn q_pow(&self, k: i64) -> C64 {
        self.qh_pow(2 * k)
    }

    /// (q^{1/2})^k with q^{1/2} = exp(iπ m/N).
    pub fn qh_pow(&self, k: i64) -> C64 {
        let two_n = 2 * self.n as i64;
        let e = (self.m as i64 * k).rem_euclid(two_n);
        match e {
            0 => C64::new(1.0, 0.0),
            _ if 2 * e == two_n => C64::new(-1.0, 0.0),
            _ => C64::from_polar(1.0, PI * e as f64 / self.n as f64),
        }
    }

    /// q^{N'} = ±1.
    pub fn q_n_prime_sign(&self) -> f64 {
        if self.odd() {
            1.0
        } else {
            -1.0
        }
    }

    /// q − q⁻¹.
    pub fn q_minus_qinv(&self) -> C64 {
        self.q_pow(1) - self.q_pow(-1)
    }

    /// Context of q⁻¹ (root index N − m) with its own principal half power.
    pub fn inverted(&self) -> RootContext {
        RootContext::new(self.n, self.n - self.m).expect("inverse of a primitive root is primitive")
    }

    /// The q-number [n] = (qⁿ − q⁻ⁿ)/(q − q⁻¹).
    pub fn q_number(&self, n: i64) -> Result<C64> {
        let den = self.q_minus_qinv();
        if den.norm() < 1e-300 {
            return Err(Error::DegenerateQ);
        }
        Ok((self.q_pow(n) - self.q_pow(-n)) / den)
    }
}

/// Chain length with derived parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub sites: usize,
}

impl ChainConfig {
    pub fn new(sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidArgument(format!("chain length M={sites} must be at least 2")));
        }
        if sites > 30 {
            return Err(Error::InvalidArgument(format!("chain length M={sites} exceeds 30")));
        }
        Ok(ChainConfig { sites })
    }
    pub fn even(&self) -> bool {
        self.sites.is_multiple_of(2)
    }
    pub fn dimension(&self) -> usize {
        1usize << self.sites
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let c = RootContext::new(3, 1).unwrap();
        assert_eq!(c.n_prime(), 3);
        assert!((c.delta() + 0.5).abs() < 1e-15);
        assert!((c.q() - C64::from_polar(1.0, 2.0 * PI / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn free_fermion_point() {
        let c = RootContext::new(4, 1).unwrap();
        assert_eq!(c.n_prime(), 2);
        assert!((c.q() - C64::i()).norm() < 1e-15);
        assert!(c.delta().abs() < 1e-15);
    }

    #[test]
    fn even_root_sign() {
        let c = RootContext::new(6, 1).unwrap();
        assert_eq!(c.n_prime(), 3);
        assert_eq!(c.q_pow(3), C64::new(-1.0, 0.0));
        assert_eq!(c.q_n_prime_sign(), -1.0);
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(RootContext::new(2, 1).is_err());
        assert!(RootContext::new(1, 1).is_err());
        assert!(RootContext::new(6, 2).is_err());
        assert!(RootContext::new(5, 0).is_err());
        assert!(RootContext::new(5, 5).is_err());
    }

    #[test]
    fn small_q_numbers() {
        let c = RootContext::new(3, 1).unwrap();
        assert!(c.q_number(0).unwrap().norm() < 1e-15);
        assert!((c.q_number(1).unwrap() - 1.0).norm() < 1e-15);
        assert!((c.q_number(2).unwrap() + 1.0).norm() < 1e-15);
        assert!(c.q_number(3).unwrap().norm() < 1e-15);
    }

    #[test]
    fn half_power_squares() {
        let c = RootContext::new(8, 3).unwrap();
        for k in -20..20 {
            assert!((c.qh_pow(k) * c.qh_pow(k) - c.q_pow(k)).norm() < 1e-14);
        }
        let inv = c.inverted();
        assert!((inv.q() * c.q() - 1.0).norm() < 1e-15);
        assert!((inv.qh_pow(1) + c.qh_pow(1).conj()).norm() < 1e-15);
    }
}
