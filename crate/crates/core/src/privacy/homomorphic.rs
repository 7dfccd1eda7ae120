//! Additively homomorphic encryption behind a small keypair enum.
//!
//! Two backends satisfy the same contract — `Dec(Enc(a) ⊕ Enc(b)) =
//! a + b` and `Dec(c ⊗ Enc(a)) = c·a` over the plaintext modulus:
//!
//! - [`HomomorphicKeypair::plain`]: an insecure identity backend over
//!   a fixed 127-bit prime modulus, for fast deterministic tests;
//! - [`HomomorphicKeypair::generate_paillier`]: textbook Paillier at
//!   desk-scale key sizes (512–1024 bit modulus by default range).
//!
//! Neither backend is hardened; key sizes and parameters target
//! simulation, not production.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// An opaque ciphertext of whichever backend produced it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ciphertext(pub(crate) BigUint);

/// 2^127 − 1 (Mersenne prime): plaintext modulus of the plain backend.
fn plain_modulus() -> BigUint {
    (BigUint::one() << 127u32) - BigUint::one()
}

#[derive(Clone, Debug)]
pub struct PaillierKeypair {
    /// Public modulus n = p·q; the plaintext space is Z_n.
    n: BigUint,
    n_squared: BigUint,
    /// λ = lcm(p−1, q−1).
    lambda: BigUint,
    /// μ = λ⁻¹ mod n (valid for generator g = n+1).
    mu: BigUint,
}

/// Miller–Rabin with `rounds` random bases.
fn is_probable_prime<R: Rng>(candidate: &BigUint, rounds: u32, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if candidate < &two {
        return false;
    }
    // small-prime sieve
    for p in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let p = BigUint::from(p);
        if candidate == &p {
            return true;
        }
        if (candidate % &p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = candidate - &one;
    let trailing = n_minus_1.trailing_zeros().unwrap_or(0);
    let odd_part = &n_minus_1 >> trailing;
    'witness: for _ in 0..rounds {
        let base = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = base.modpow(&odd_part, candidate);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..trailing {
            x = x.modpow(&two, candidate);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn random_prime<R: Rng>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, 32, rng) {
            return candidate;
        }
    }
}

impl PaillierKeypair {
    pub fn generate<R: Rng>(modulus_bits: u64, rng: &mut R) -> Result<Self> {
        if !(128..=4096).contains(&modulus_bits) {
            return Err(Error::Config(format!(
                "paillier modulus size {modulus_bits} outside [128, 4096] bits"
            )));
        }
        let half = modulus_bits / 2;
        let p = random_prime(half, rng);
        let q = loop {
            let q = random_prime(modulus_bits - half, rng);
            if q != p {
                break q;
            }
        };
        let one = BigUint::one();
        let n = &p * &q;
        let lambda = (&p - &one).lcm(&(&q - &one));
        let mu = lambda
            .modinv(&n)
            .ok_or_else(|| Error::Encoding("lambda not invertible mod n".into()))?;
        Ok(PaillierKeypair {
            n_squared: &n * &n,
            n,
            lambda,
            mu,
        })
    }

    fn encrypt<R: Rng>(&self, m: &BigUint, rng: &mut R) -> Ciphertext {
        let m = m % &self.n;
        // g = n+1: g^m = 1 + m·n (mod n²)
        let g_m = (BigUint::one() + &m * &self.n) % &self.n_squared;
        let r = loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                break r;
            }
        };
        Ciphertext((g_m * r.modpow(&self.n, &self.n_squared)) % &self.n_squared)
    }

    fn decrypt(&self, ct: &Ciphertext) -> BigUint {
        let x = ct.0.modpow(&self.lambda, &self.n_squared);
        let l = (x - BigUint::one()) / &self.n;
        (l * &self.mu) % &self.n
    }
}

/// Public/secret key material for one additively homomorphic session.
#[derive(Clone, Debug)]
pub enum HomomorphicKeypair {
    /// Identity "encryption" modulo a fixed prime. Insecure; test use.
    Plain { modulus: BigUint },
    Paillier(PaillierKeypair),
}

impl HomomorphicKeypair {
    pub fn plain() -> Self {
        HomomorphicKeypair::Plain {
            modulus: plain_modulus(),
        }
    }

    pub fn generate_paillier<R: Rng>(modulus_bits: u64, rng: &mut R) -> Result<Self> {
        Ok(HomomorphicKeypair::Paillier(PaillierKeypair::generate(
            modulus_bits,
            rng,
        )?))
    }

    pub fn plaintext_modulus(&self) -> BigUint {
        match self {
            HomomorphicKeypair::Plain { modulus } => modulus.clone(),
            HomomorphicKeypair::Paillier(kp) => kp.n.clone(),
        }
    }

    pub fn encrypt<R: Rng>(&self, m: &BigUint, rng: &mut R) -> Ciphertext {
        match self {
            HomomorphicKeypair::Plain { modulus } => Ciphertext(m % modulus),
            HomomorphicKeypair::Paillier(kp) => kp.encrypt(m, rng),
        }
    }

    pub fn decrypt(&self, ct: &Ciphertext) -> BigUint {
        match self {
            HomomorphicKeypair::Plain { modulus } => &ct.0 % modulus,
            HomomorphicKeypair::Paillier(kp) => kp.decrypt(ct),
        }
    }

    /// Ciphertext addition: `Dec(add(Enc(a), Enc(b))) = a + b`.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        match self {
            HomomorphicKeypair::Plain { modulus } => Ciphertext((&a.0 + &b.0) % modulus),
            HomomorphicKeypair::Paillier(kp) => Ciphertext((&a.0 * &b.0) % &kp.n_squared),
        }
    }

    /// Plaintext-scalar multiplication: `Dec(mul(Enc(a), c)) = c·a`.
    pub fn mul_scalar(&self, ct: &Ciphertext, scalar: &BigUint) -> Ciphertext {
        match self {
            HomomorphicKeypair::Plain { modulus } => {
                Ciphertext((&ct.0 * (scalar % modulus)) % modulus)
            }
            HomomorphicKeypair::Paillier(kp) => {
                Ciphertext(ct.0.modpow(scalar, &kp.n_squared))
            }
        }
    }
}
