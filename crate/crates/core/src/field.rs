//! Scalar arithmetic in `F_q` and the direct-evaluation transform oracles.
//!
//! Everything in here is deliberately naive: the bit-sliced engine is checked
//! against these functions, so they share no code with it beyond the
//! parameter set.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The prime modulus, `2^23 - 2^13 + 1`.
pub const Q: u32 = 8_380_417;
/// Ring degree.
pub const N: usize = 256;
/// `log2(N)`.
pub const LOG_N: u32 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("expected {N} coefficients, got {0}")]
    Length(usize),
    #[error("coefficient {index} = {value} is not below q = {Q}")]
    OutOfRange { index: usize, value: u64 },
    #[error("malformed polynomial: {0}")]
    Malformed(String),
}

/// Ring constants shared by every transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldParams {
    pub q: u32,
    pub n: usize,
    pub log_n: u32,
    /// Primitive 2n-th root of unity.
    pub psi: u32,
    /// Primitive n-th root of unity, `psi^2`.
    pub omega: u32,
    pub n_inv: u32,
    pub psi_inv: u32,
    pub omega_inv: u32,
}

impl FieldParams {
    /// The parameter set, derived once and cached.
    pub fn get() -> &'static FieldParams {
        static PARAMS: OnceLock<FieldParams> = OnceLock::new();
        PARAMS.get_or_init(FieldParams::derive)
    }

    /// Searches for the smallest `g` with `g^n = -1` and derives the rest.
    pub fn derive() -> FieldParams {
        let psi =
            (2..Q).find(|&g| fq_pow(g, N as u64) == Q - 1).expect("q = 1 mod 2n guarantees a 2n-th root of unity");
        let omega = fq_mul(psi, psi);
        let params = FieldParams {
            q: Q,
            n: N,
            log_n: LOG_N,
            psi,
            omega,
            n_inv: fq_inv(N as u32),
            psi_inv: fq_inv(psi),
            omega_inv: fq_inv(omega),
        };
        debug_assert!(params.check().is_ok());
        params
    }

    /// Verifies the defining congruences, returning the first one that fails.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.q != (1 << 23) - (1 << 13) + 1 {
            return Err("q != 2^23 - 2^13 + 1");
        }
        if fq_pow(self.psi, N as u64) != Q - 1 || fq_pow(self.psi, 2 * N as u64) != 1 {
            return Err("psi is not a primitive 2n-th root of unity");
        }
        if fq_pow(self.omega, N as u64) != 1 || fq_pow(self.omega, N as u64 / 2) == 1 {
            return Err("omega is not a primitive n-th root of unity");
        }
        if fq_mul(N as u32, self.n_inv) != 1 {
            return Err("n * n_inv != 1");
        }
        if fq_mul(self.psi, self.psi_inv) != 1 || fq_mul(self.omega, self.omega_inv) != 1 {
            return Err("root inverse mismatch");
        }
        Ok(())
    }
}

#[inline]
pub fn fq_add(a: u32, b: u32) -> u32 {
    let s = a + b;
    if s >= Q {
        s - Q
    } else {
        s
    }
}

#[inline]
pub fn fq_sub(a: u32, b: u32) -> u32 {
    if a >= b {
        a - b
    } else {
        a + Q - b
    }
}

#[inline]
pub fn fq_mul(a: u32, b: u32) -> u32 {
    ((a as u64 * b as u64) % Q as u64) as u32
}

pub fn fq_pow(base: u32, mut exp: u64) -> u32 {
    let mut acc = 1u32;
    let mut b = base % Q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = fq_mul(acc, b);
        }
        b = fq_mul(b, b);
        exp >>= 1;
    }
    acc
}

/// Multiplicative inverse by the extended Euclidean algorithm.
///
/// Panics on zero.
pub fn fq_inv(a: u32) -> u32 {
    assert!(!a.is_multiple_of(Q), "zero has no inverse");
    let (mut r0, mut r1) = (Q as i64, (a % Q) as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let quot = r0 / r1;
        (r0, r1) = (r1, r0 - quot * r1);
        (t0, t1) = (t1, t0 - quot * t1);
    }
    debug_assert_eq!(r0, 1);
    t0.rem_euclid(Q as i64) as u32
}

/// A ring element with canonical coefficients in `[0, q)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly([u32; N]);

impl Poly {
    pub fn zero() -> Poly {
        Poly([0; N])
    }

    /// `x^k` (with `k < n`).
    pub fn monomial(k: usize) -> Poly {
        let mut p = Poly::zero();
        p.0[k] = 1;
        p
    }

    pub fn constant(c: u32) -> Poly {
        let mut p = Poly::zero();
        p.0[0] = c % Q;
        p
    }

    pub fn splat(c: u32) -> Poly {
        Poly([c % Q; N])
    }

    pub fn from_coeffs(coeffs: &[u32]) -> Result<Poly, PolyError> {
        if coeffs.len() != N {
            return Err(PolyError::Length(coeffs.len()));
        }
        let mut out = [0u32; N];
        for (i, (&c, slot)) in coeffs.iter().zip(out.iter_mut()).enumerate() {
            if c >= Q {
                return Err(PolyError::OutOfRange { index: i, value: c as u64 });
            }
            *slot = c;
        }
        Ok(Poly(out))
    }

    /// Reduces arbitrary words into range; used by samplers.
    pub fn from_fn(mut f: impl FnMut(usize) -> u32) -> Poly {
        Poly(std::array::from_fn(|i| f(i) % Q))
    }

    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Poly {
        Poly(std::array::from_fn(|_| rng.gen_range(0..Q)))
    }

    pub fn coeffs(&self) -> &[u32; N] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        Poly(std::array::from_fn(|i| fq_add(self.0[i], other.0[i])))
    }

    /// Coefficient-wise product.
    pub fn pointwise(&self, other: &Poly) -> Poly {
        Poly(std::array::from_fn(|i| fq_mul(self.0[i], other.0[i])))
    }

    /// Compact JSON array, no whitespace and no trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.0[..]).expect("u32 slices always serialize")
    }

    pub fn from_json(text: &str) -> Result<Poly, PolyError> {
        let values: Vec<u64> = serde_json::from_str(text.trim()).map_err(|e| PolyError::Malformed(e.to_string()))?;
        if values.len() != N {
            return Err(PolyError::Length(values.len()));
        }
        let mut out = [0u32; N];
        for (i, &v) in values.iter().enumerate() {
            if v >= Q as u64 {
                return Err(PolyError::OutOfRange { index: i, value: v });
            }
            out[i] = v as u32;
        }
        Ok(Poly(out))
    }

    /// 256 little-endian 32-bit words.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|c| c.to_le_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Poly, PolyError> {
        if bytes.len() != 4 * N {
            return Err(PolyError::Malformed(format!("binary form must be {} bytes, got {}", 4 * N, bytes.len())));
        }
        let words: Vec<u32> = bytes.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Poly::from_coeffs(&words)
    }

    /// Accepts either serialized form: JSON if the payload starts with `[`
    /// (after whitespace), binary otherwise. A 1024-byte payload that only
    /// looks like JSON is read as binary.
    pub fn parse_any(bytes: &[u8]) -> Result<Poly, PolyError> {
        let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
        if first != Some(&b'[') {
            return Poly::from_bytes(bytes);
        }
        let json =
            std::str::from_utf8(bytes).map_err(|e| PolyError::Malformed(e.to_string())).and_then(Poly::from_json);
        match json {
            Err(_) if bytes.len() == 4 * N => Poly::from_bytes(bytes),
            other => other,
        }
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly[{}, {}, {}, .., {}]", self.0[0], self.0[1], self.0[2], self.0[N - 1])
    }
}

impl Serialize for Poly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0[..].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Poly, D::Error> {
        let v: Vec<u32> = Vec::deserialize(d)?;
        Poly::from_coeffs(&v).map_err(serde::de::Error::custom)
    }
}

/// `â[i] = Σ_j ω^{ij} ψ^j a[j]`, by direct O(n²) summation.
pub fn ntt_ref(a: &Poly) -> Poly {
    let p = FieldParams::get();
    let weighted: Vec<u64> = (0..N).map(|j| fq_mul(fq_pow(p.psi, j as u64), a.0[j]) as u64).collect();
    Poly(std::array::from_fn(|i| direct_sum(&weighted, fq_pow(p.omega, i as u64))))
}

/// `a[i] = ψ^{-i} n^{-1} Σ_j ω^{-ij} â[j]`, by direct O(n²) summation.
pub fn intt_ref(a_hat: &Poly) -> Poly {
    let p = FieldParams::get();
    let coeffs: Vec<u64> = a_hat.0.iter().map(|&c| c as u64).collect();
    Poly(std::array::from_fn(|i| {
        let s = direct_sum(&coeffs, fq_pow(p.omega_inv, i as u64));
        fq_mul(fq_mul(s, p.n_inv), fq_pow(p.psi_inv, i as u64))
    }))
}

// Σ_j root^j · v[j] mod q, with a running power.
fn direct_sum(v: &[u64], root: u32) -> u32 {
    let mut acc = 0u64;
    let mut pow = 1u64;
    for &x in v {
        acc = (acc + pow * x) % Q as u64;
        pow = pow * root as u64 % Q as u64;
    }
    acc as u32
}

/// Schoolbook product in `Z_q[x]/(x^n + 1)`.
pub fn negacyclic_mul_ref(a: &Poly, b: &Poly) -> Poly {
    let mut acc = [0i128; N];
    for i in 0..N {
        for j in 0..N {
            let term = a.0[i] as i128 * b.0[j] as i128;
            if i + j < N {
                acc[i + j] += term;
            } else {
                acc[i + j - N] -= term;
            }
        }
    }
    Poly(std::array::from_fn(|i| acc[i].rem_euclid(Q as i128) as u32))
}
