//! Commutative (Pohlig–Hellman style) encryption over a fixed
//! prime-order group, and the round-robin multi-provider exact
//! intersection built on it.
//!
//! Record ids are hashed into the order-q subgroup of quadratic
//! residues modulo a published 512-bit safe prime; each provider's key
//! is a secret exponent, so `E_a(E_b(x)) = x^{ab} = E_b(E_a(x))` and a
//! value encrypted by every provider compares equal regardless of the
//! encryption order. Desk-scale parameters; not hardened.

use std::collections::BTreeSet;

use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::data::RecordId;
use crate::error::{Error, Result};
use crate::protocols::CostLedger;

/// 512-bit safe prime p = 2q + 1.
const GROUP_P_HEX: &str = "999b7451d573deaa3958f388b16f662ce18be09c2ae39a8d544e192a8d4e664579121c2a9d57d66b46b2d87e502b35f0a80b4e1a397d5181ff9787781219302f";
const GROUP_Q_HEX: &str = "4ccdba28eab9ef551cac79c458b7b31670c5f04e1571cd46aa270c9546a73322bc890e154eabeb35a3596c3f28159af85405a70d1cbea8c0ffcbc3bc090c9817";

const HASH_DOMAIN: &[u8] = b"xsect-commutative-v1";
const MAX_EMBED_ATTEMPTS: u32 = 64;

/// The published group parameters shared by all providers.
#[derive(Clone, Debug)]
pub struct CommutativeGroup {
    p: BigUint,
    q: BigUint,
}

impl Default for CommutativeGroup {
    fn default() -> Self {
        let p = BigUint::parse_bytes(GROUP_P_HEX.as_bytes(), 16).expect("fixed constant");
        let q = BigUint::parse_bytes(GROUP_Q_HEX.as_bytes(), 16).expect("fixed constant");
        CommutativeGroup { p, q }
    }
}

impl CommutativeGroup {
    /// Hashes a record id into the quadratic-residue subgroup,
    /// rejecting degenerate elements (0, 1, p−1).
    pub fn hash_to_group(&self, id: RecordId) -> Result<BigUint> {
        let one = BigUint::one();
        let p_minus_1 = &self.p - &one;
        for counter in 0..MAX_EMBED_ATTEMPTS {
            let mut hasher = Sha256::new();
            hasher.update(HASH_DOMAIN);
            hasher.update(id.to_le_bytes());
            hasher.update(counter.to_le_bytes());
            let digest = hasher.finalize();
            let h = BigUint::from_bytes_be(&digest) % &self.p;
            let x = (&h * &h) % &self.p; // land in the QR subgroup
            if !x.is_one() && x != BigUint::ZERO && x != p_minus_1 {
                return Ok(x);
            }
        }
        Err(Error::Encoding(format!(
            "record id {id} could not be embedded into the group"
        )))
    }
}

/// One provider's secret exponent.
#[derive(Clone, Debug)]
pub struct CommutativeKey {
    exponent: BigUint,
}

impl CommutativeKey {
    pub fn generate<R: Rng>(group: &CommutativeGroup, rng: &mut R) -> Self {
        // exponent in [2, q); q is prime, so any such value is
        // invertible and encryption is a bijection of the subgroup
        let exponent = rng.gen_biguint_range(&BigUint::from(2u8), &group.q);
        CommutativeKey { exponent }
    }

    pub fn encrypt(&self, group: &CommutativeGroup, element: &BigUint) -> BigUint {
        element.modpow(&self.exponent, &group.p)
    }
}

/// Round-robin exact intersection cardinality on encrypted ids.
///
/// Every provider hashes and encrypts its own set, then the ciphertext
/// sets circulate until each has been encrypted under every key (sets
/// are re-sorted at each hop, standing in for a shuffle). The client
/// counts the fully encrypted values common to all sets; plaintext ids
/// never leave their provider.
pub fn commutative_intersection_size(
    id_sets: &[BTreeSet<RecordId>],
    keys: &[CommutativeKey],
    ledger: &mut CostLedger,
) -> Result<u64> {
    if id_sets.len() < 2 {
        return Err(Error::Domain(
            "commutative intersection needs at least two providers".into(),
        ));
    }
    if keys.len() != id_sets.len() {
        return Err(Error::Domain(format!(
            "{} key(s) for {} provider(s)",
            keys.len(),
            id_sets.len()
        )));
    }
    let group = CommutativeGroup::default();
    let provider_count = id_sets.len();

    // local pass: each provider embeds and encrypts its own ids
    let mut circulating: Vec<Vec<BigUint>> = Vec::with_capacity(provider_count);
    for (owner, ids) in id_sets.iter().enumerate() {
        let mut set = Vec::with_capacity(ids.len());
        for &id in ids {
            let element = group.hash_to_group(id)?;
            set.push(keys[owner].encrypt(&group, &element));
            ledger.ciphertext_operations += 1;
        }
        set.sort_unstable();
        circulating.push(set);
    }

    // k−1 forwarding hops: set i visits provider (i + hop) % k
    for hop in 1..provider_count {
        for (origin, set) in circulating.iter_mut().enumerate() {
            let holder = (origin + hop) % provider_count;
            ledger.messages += 1;
            ledger.records_transferred += set.len() as u64;
            for element in set.iter_mut() {
                *element = keys[holder].encrypt(&group, element);
                ledger.ciphertext_operations += 1;
            }
            set.sort_unstable();
        }
    }

    // final transfer of every fully encrypted set to the client
    for set in &circulating {
        ledger.messages += 1;
        ledger.records_transferred += set.len() as u64;
    }

    let mut common: BTreeSet<BigUint> = circulating[0].iter().cloned().collect();
    for set in &circulating[1..] {
        let other: BTreeSet<BigUint> = set.iter().cloned().collect();
        common = common.intersection(&other).cloned().collect();
    }
    Ok(common.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::exact_intersection;
    use crate::seeded_rng;
    use rand::Rng;

    #[test]
    fn encryption_commutes() {
        let group = CommutativeGroup::default();
        let mut rng = seeded_rng(50, 0);
        for _ in 0..100 {
            let a = CommutativeKey::generate(&group, &mut rng);
            let b = CommutativeKey::generate(&group, &mut rng);
            let x = group.hash_to_group(rng.gen::<u64>()).unwrap();
            let ab = b.encrypt(&group, &a.encrypt(&group, &x));
            let ba = a.encrypt(&group, &b.encrypt(&group, &x));
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn hash_to_group_is_deterministic_and_nondegenerate() {
        let group = CommutativeGroup::default();
        for id in 0..200u64 {
            let x = group.hash_to_group(id).unwrap();
            assert_eq!(x, group.hash_to_group(id).unwrap());
            assert!(!x.is_one());
            assert_ne!(x, BigUint::ZERO);
        }
    }

    #[test]
    fn intersection_matches_the_plaintext_oracle() {
        let group = CommutativeGroup::default();
        let mut rng = seeded_rng(51, 1);
        let sets: Vec<BTreeSet<RecordId>> = (0..3)
            .map(|_| (0..100).map(|_| rng.gen_range(0..300u64)).collect())
            .collect();
        let keys: Vec<CommutativeKey> = (0..3)
            .map(|_| CommutativeKey::generate(&group, &mut rng))
            .collect();
        let mut ledger = CostLedger::new();
        let size = commutative_intersection_size(&sets, &keys, &mut ledger).unwrap();
        assert_eq!(size, exact_intersection(&sets).unwrap().len() as u64);
        assert!(ledger.ciphertext_operations > 0);
    }

    #[test]
    fn small_known_intersection() {
        let group = CommutativeGroup::default();
        let mut rng = seeded_rng(52, 2);
        let sets = vec![
            BTreeSet::from([1u64, 2, 3]),
            BTreeSet::from([2u64, 3, 4]),
        ];
        let keys: Vec<CommutativeKey> = (0..2)
            .map(|_| CommutativeKey::generate(&group, &mut rng))
            .collect();
        let mut ledger = CostLedger::new();
        assert_eq!(
            commutative_intersection_size(&sets, &keys, &mut ledger).unwrap(),
            2
        );
    }

    #[test]
    fn mismatched_keys_are_rejected() {
        let group = CommutativeGroup::default();
        let mut rng = seeded_rng(53, 3);
        let keys = vec![CommutativeKey::generate(&group, &mut rng)];
        let sets = vec![BTreeSet::from([1u64]), BTreeSet::from([1u64])];
        let mut ledger = CostLedger::new();
        assert!(commutative_intersection_size(&sets, &keys, &mut ledger).is_err());
        assert!(commutative_intersection_size(&sets[..1], &keys, &mut ledger).is_err());
    }
}
