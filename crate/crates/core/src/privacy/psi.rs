//! Private set-intersection cardinality over an additively
//! homomorphic cryptosystem, plus the blinded-noisy variant whose
//! revealed count is differentially private.
//!
//! Core protocol (two parties): A encodes its set as the roots of a
//! polynomial, encrypts the coefficients and ships them. B evaluates
//! the polynomial homomorphically at each of its own elements `y`,
//! blinds the result as `Enc(r_y·P(y) + 0⁺)` with a fresh nonzero
//! scalar per element (the `0⁺` term is an encryption of zero, which
//! also re-randomizes the ciphertext), shuffles and returns. A
//! decrypts and counts zero markers: matches decrypt to zero,
//! everything else to a blinded value that passes the marker check
//! with probability ≈ 2⁻⁶⁴ per element.
//!
//! BN-PSI-CA pads both directions to a bucket-derived size so set
//! sizes are not revealed, and the evaluating party additionally
//! injects a noise-drawn number of agreed dummy roots; the count the
//! polynomial owner learns is the true cardinality plus that party's
//! retained noise.
//!
//! Ledger convention: `ciphertext_operations` counts message-level
//! units — one per coefficient encryption, one per polynomial
//! evaluation at a point, one per zero-encryption and one per
//! decryption — so a run is linear in the padded set sizes. The
//! scalar additions/multiplications inside a single evaluation are
//! bundled into its unit.

use std::collections::BTreeSet;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::RecordId;
use crate::error::{Error, Result};
use crate::protocols::CostLedger;

use super::homomorphic::{Ciphertext, HomomorphicKeypair};
use super::{laplace_sample, NoisyCount, PrivacyParams};

/// Number of trailing 64-bit limbs that must be zero for a decrypted
/// value to count as the zero marker. One limb keeps the false
/// positive probability per element at 2⁻⁶⁴ < 2⁻⁴⁰.
pub const ZERO_MARKER_LIMBS: usize = 1;

/// Plaintext encodings keep the element kinds of the protocol in
/// disjoint tag ranges, so padding can never collide with real ids.
#[derive(Clone, Copy)]
enum ElementKind {
    Real,
    MatchDummy,
    RootPadding,
    PointPadding,
}

fn encode(kind: ElementKind, value: u64) -> BigUint {
    let tag: u8 = match kind {
        ElementKind::Real => 1,
        ElementKind::MatchDummy => 2,
        ElementKind::RootPadding => 3,
        ElementKind::PointPadding => 4,
    };
    (BigUint::from(tag) << 64u32) + BigUint::from(value)
}

fn check_plaintext_space(scheme: &HomomorphicKeypair) -> Result<()> {
    // encodings occupy up to 67 bits; leave headroom for blinding
    if scheme.plaintext_modulus().bits() < 96 {
        return Err(Error::Encoding(
            "plaintext modulus too small for the id encoding".into(),
        ));
    }
    Ok(())
}

fn is_zero_marker(plaintext: &BigUint) -> bool {
    if plaintext.is_zero() {
        return true;
    }
    let mask = (BigUint::one() << (64 * ZERO_MARKER_LIMBS)) - BigUint::one();
    (plaintext & mask).is_zero()
}

/// Encrypted coefficients of `P(x) = ∏ (x − root)` over the plaintext
/// modulus, lowest degree first. The degree equals the (padded) root
/// multiset size and the leading coefficient encrypts one.
pub struct EncryptedPolynomial {
    coeffs: Vec<Ciphertext>,
}

impl EncryptedPolynomial {
    /// Builds and encrypts the polynomial; one ciphertext operation
    /// per coefficient.
    pub fn from_roots<R: Rng>(
        roots: &[BigUint],
        scheme: &HomomorphicKeypair,
        rng: &mut R,
        ledger: &mut CostLedger,
    ) -> Self {
        let modulus = scheme.plaintext_modulus();
        // plaintext convolution: coeffs of ∏ (x − ρ_i) mod modulus
        let mut plain: Vec<BigUint> = vec![BigUint::one()];
        for root in roots {
            let neg_root = (&modulus - (root % &modulus)) % &modulus;
            let mut next = vec![BigUint::zero(); plain.len() + 1];
            for (power, coeff) in plain.iter().enumerate() {
                next[power + 1] = (&next[power + 1] + coeff) % &modulus;
                next[power] = (&next[power] + coeff * &neg_root) % &modulus;
            }
            plain = next;
        }
        let coeffs: Vec<Ciphertext> = plain
            .iter()
            .map(|c| {
                ledger.ciphertext_operations += 1;
                scheme.encrypt(c, rng)
            })
            .collect();
        EncryptedPolynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Homomorphic Horner evaluation at a plaintext point; one
    /// ciphertext operation.
    pub fn eval_at(
        &self,
        point: &BigUint,
        scheme: &HomomorphicKeypair,
        ledger: &mut CostLedger,
    ) -> Ciphertext {
        ledger.ciphertext_operations += 1;
        let mut acc = self.coeffs[self.coeffs.len() - 1].clone();
        for coeff in self.coeffs.iter().rev().skip(1) {
            acc = scheme.add(&scheme.mul_scalar(&acc, point), coeff);
        }
        acc
    }
}

/// Shared core: the owner of the first root set holds the keypair;
/// the last party evaluates every polynomial at its points, blinds,
/// shuffles and returns; the owner counts zero markers.
///
/// With more than one root set this is the from-scratch multi-way
/// re-intersection: a point must be a root of every polynomial for
/// the weighted sum `Σ r_i·P_i(y)` to stay zero.
fn blinded_marker_count<R: Rng>(
    root_sets: &[Vec<BigUint>],
    points: &[BigUint],
    scheme: &HomomorphicKeypair,
    relay: bool,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<u64> {
    check_plaintext_space(scheme)?;
    let modulus = scheme.plaintext_modulus();
    let hops: u64 = if relay { 2 } else { 1 };

    let polynomials: Vec<EncryptedPolynomial> = root_sets
        .iter()
        .map(|roots| {
            let poly = EncryptedPolynomial::from_roots(roots, scheme, rng, ledger);
            ledger.messages += hops;
            ledger.records_transferred += poly.coeffs.len() as u64;
            poly
        })
        .collect();

    let mut blinded: Vec<Ciphertext> = Vec::with_capacity(points.len());
    for point in points {
        let mut acc: Option<Ciphertext> = None;
        for poly in &polynomials {
            let eval = poly.eval_at(point, scheme, ledger);
            let blind = rng.gen_biguint_range(&BigUint::one(), &modulus);
            let term = scheme.mul_scalar(&eval, &blind);
            acc = Some(match acc {
                None => term,
                Some(total) => scheme.add(&total, &term),
            });
        }
        // "+ 0⁺": add a fresh encryption of zero, which doubles as
        // re-randomization of the returned ciphertext
        ledger.ciphertext_operations += 1;
        let zero = scheme.encrypt(&BigUint::zero(), rng);
        blinded.push(scheme.add(&acc.expect("at least one polynomial"), &zero));
    }
    blinded.shuffle(rng);
    ledger.messages += hops;
    ledger.records_transferred += blinded.len() as u64;

    let mut matches = 0u64;
    for ct in &blinded {
        ledger.ciphertext_operations += 1;
        if is_zero_marker(&scheme.decrypt(ct)) {
            matches += 1;
        }
    }
    Ok(matches)
}

/// Plain PSI-CA between two parties: returns `|set_a ∩ set_b|`; party
/// A (the polynomial owner) learns only that count, B learns nothing.
pub fn psi_ca<R: Rng>(
    set_a: &BTreeSet<RecordId>,
    set_b: &BTreeSet<RecordId>,
    scheme: &HomomorphicKeypair,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<u64> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::Domain("psi-ca requires nonempty sets".into()));
    }
    let roots: Vec<BigUint> = set_a
        .iter()
        .map(|&id| encode(ElementKind::Real, id))
        .collect();
    let points: Vec<BigUint> = set_b
        .iter()
        .map(|&id| encode(ElementKind::Real, id))
        .collect();
    blinded_marker_count(&[roots], &points, scheme, false, rng, ledger)
}

/// The noise B retains after a BN-PSI-CA run: subtracting
/// [`DummyNoiseRecord::net`] from A's noisy count reconstructs the
/// exact cardinality (an in-simulation bookkeeping identity; the
/// parties never combine them).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DummyNoiseRecord {
    pub dummies_added: u64,
    pub shift: u64,
}

impl DummyNoiseRecord {
    pub fn net(&self) -> i64 {
        self.dummies_added as i64 - self.shift as i64
    }
}

/// Draws the dummy count: a discrete two-sided Laplace of scale 1/ε
/// centred on `max_dummies/2`, clipped into `[0, max_dummies]`.
fn draw_dummy_count<R: Rng>(params: &PrivacyParams, rng: &mut R) -> Result<(u64, u64)> {
    let shift = params.max_dummies / 2;
    if params.epsilon.is_infinite() {
        return Ok((shift, shift));
    }
    let noise = laplace_sample(1.0 / params.epsilon, rng)?.round();
    let dummies = (shift as f64 + noise).clamp(0.0, params.max_dummies as f64) as u64;
    Ok((dummies, shift))
}

fn padded_roots<R: Rng>(
    ids: &BTreeSet<RecordId>,
    pad_to: u64,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<Vec<BigUint>> {
    if ids.len() as u64 > pad_to {
        return Err(Error::Capacity(format!(
            "root set of {} exceeds the padding target {pad_to}",
            ids.len()
        )));
    }
    let capacity = pad_to + params.max_dummies;
    let mut roots: Vec<BigUint> = ids
        .iter()
        .map(|&id| encode(ElementKind::Real, id))
        .collect();
    // the full agreed dummy block: every dummy the evaluator may
    // inject must be a root
    roots.extend((0..params.max_dummies).map(|i| encode(ElementKind::MatchDummy, i)));
    while (roots.len() as u64) < capacity {
        roots.push(encode(ElementKind::RootPadding, rng.gen()));
    }
    Ok(roots)
}

fn padded_points<R: Rng>(
    ids: &BTreeSet<RecordId>,
    pad_to: u64,
    dummies: u64,
    max_dummies: u64,
    rng: &mut R,
) -> Result<Vec<BigUint>> {
    if ids.len() as u64 > pad_to {
        return Err(Error::Capacity(format!(
            "evaluation set of {} exceeds the padding target {pad_to}",
            ids.len()
        )));
    }
    let capacity = pad_to + max_dummies;
    let mut points: Vec<BigUint> = ids
        .iter()
        .map(|&id| encode(ElementKind::Real, id))
        .collect();
    points.extend((0..dummies).map(|i| encode(ElementKind::MatchDummy, i)));
    while (points.len() as u64) < capacity {
        points.push(encode(ElementKind::PointPadding, rng.gen()));
    }
    Ok(points)
}

/// Multi-set BN-PSI-CA: all sets but the last become polynomials
/// (encrypted under the owner's key), the last party evaluates,
/// injects its dummy noise and returns the blinded results. Used both
/// for the two-party operation and for the heuristic's from-scratch
/// re-intersections, where the client relays every transfer.
pub(crate) fn bn_psi_ca_multi<R: Rng>(
    sets: &[&BTreeSet<RecordId>],
    params: &PrivacyParams,
    pad_to: u64,
    scheme: &HomomorphicKeypair,
    relay: bool,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<(NoisyCount, DummyNoiseRecord)> {
    if sets.len() < 2 {
        return Err(Error::Domain("bn-psi-ca needs at least two sets".into()));
    }
    params.validate()?;
    if pad_to == 0 {
        return Err(Error::Capacity("padding target must be positive".into()));
    }

    if params.epsilon.is_infinite() {
        // no-noise degeneration: zero dummies, no padding
        let roots: Vec<Vec<BigUint>> = sets[..sets.len() - 1]
            .iter()
            .map(|ids| ids.iter().map(|&id| encode(ElementKind::Real, id)).collect())
            .collect();
        let points: Vec<BigUint> = sets[sets.len() - 1]
            .iter()
            .map(|&id| encode(ElementKind::Real, id))
            .collect();
        let raw = blinded_marker_count(&roots, &points, scheme, relay, rng, ledger)?;
        return Ok((
            NoisyCount {
                value: raw,
                epsilon_spent: params.epsilon,
            },
            DummyNoiseRecord {
                dummies_added: 0,
                shift: 0,
            },
        ));
    }

    let (dummies, shift) = draw_dummy_count(params, rng)?;
    let roots: Vec<Vec<BigUint>> = sets[..sets.len() - 1]
        .iter()
        .map(|ids| padded_roots(ids, pad_to, params, rng))
        .collect::<Result<_>>()?;
    let points = padded_points(
        sets[sets.len() - 1],
        pad_to,
        dummies,
        params.max_dummies,
        rng,
    )?;
    let raw = blinded_marker_count(&roots, &points, scheme, relay, rng, ledger)?;
    Ok((
        NoisyCount {
            value: raw.saturating_sub(shift),
            epsilon_spent: params.epsilon,
        },
        DummyNoiseRecord {
            dummies_added: dummies,
            shift,
        },
    ))
}

/// Two-party BN-PSI-CA: A learns the noisy cardinality (dummy count
/// minus the public shift added to the truth, floored at zero), B
/// retains the dummy-count record.
pub fn bn_psi_ca<R: Rng>(
    set_a: &BTreeSet<RecordId>,
    set_b: &BTreeSet<RecordId>,
    params: &PrivacyParams,
    pad_to: u64,
    scheme: &HomomorphicKeypair,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<(NoisyCount, DummyNoiseRecord)> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::Domain("bn-psi-ca requires nonempty sets".into()));
    }
    bn_psi_ca_multi(&[set_a, set_b], params, pad_to, scheme, false, rng, ledger)
}
