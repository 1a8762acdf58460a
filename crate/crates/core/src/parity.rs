//! Parity functions mapping detection patterns to bit strings, probability
//! coarse-graining, closed-form pre-image counts and surjectivity checks.
//!
//! `℘_j` sends a pattern `n` to the bit string `b_i = (n_i mod 2) ⊕ j`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{binomial_signed, binomial_u128, enumerate_basis, DetectionPattern};
use crate::interferometer::PatternDistribution;
use crate::lattice::catalan_basis;

/// Fixed-length bit string of at most 128 bits; bit `i` belongs to mode `i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    len: u8,
    word: u128,
}

impl BitString {
    pub const MAX_LEN: usize = 128;

    pub fn zeros(len: usize) -> Result<Self> {
        Self::from_word(len, 0)
    }

    /// Bit string whose bit `i` is bit `i` of `word`.
    pub fn from_word(len: usize, word: u128) -> Result<Self> {
        if len > Self::MAX_LEN {
            return Err(Error::Domain(format!("bit strings are limited to {} bits", Self::MAX_LEN)));
        }
        let mask = if len == 128 { u128::MAX } else { (1u128 << len) - 1 };
        Ok(BitString { len: len as u8, word: word & mask })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut word = 0u128;
        if bits.len() > Self::MAX_LEN {
            return Err(Error::Domain(format!("bit strings are limited to {} bits", Self::MAX_LEN)));
        }
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => word |= 1u128 << i,
                _ => return Err(Error::Domain(format!("bit value {b} is not 0 or 1"))),
            }
        }
        Self::from_word(bits.len(), word)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn word(&self) -> u128 {
        self.word
    }

    pub fn get(&self, i: usize) -> u8 {
        ((self.word >> i) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.word.count_ones()
    }

    /// Every bit flipped.
    pub fn complement(&self) -> Self {
        BitString::from_word(self.len(), !self.word).expect("length already valid")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", self.get(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(Error::Data(format!("invalid bit character {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        BitString::from_bits(&bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Output of `℘_j` together with the variant `j` that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParityBitString {
    pub bits: BitString,
    pub j: u8,
}

/// `℘_j(p)`: per-mode parity, flipped when `j = 1`.
pub fn parity_map(p: &DetectionPattern, j: u8) -> Result<ParityBitString> {
    if j > 1 {
        return Err(Error::Domain(format!("parity variant must be 0 or 1, got {j}")));
    }
    Ok(ParityBitString { bits: parity_bits(p.counts(), j)?, j })
}

/// Bit string of `℘_j` applied to raw counts.
pub fn parity_bits(counts: &[u8], j: u8) -> Result<BitString> {
    if counts.len() > BitString::MAX_LEN {
        return Err(Error::Domain(format!("bit strings are limited to {} bits", BitString::MAX_LEN)));
    }
    let mut word = 0u128;
    for (i, &c) in counts.iter().enumerate() {
        if ((c & 1) ^ (j & 1)) == 1 {
            word |= 1u128 << i;
        }
    }
    BitString::from_word(counts.len(), word)
}

/// Probability masses over bit strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitStringDistribution {
    pub modes: usize,
    pub masses: BTreeMap<BitString, f64>,
}

impl BitStringDistribution {
    pub fn point(b: BitString) -> Self {
        let mut masses = BTreeMap::new();
        masses.insert(b, 1.0);
        BitStringDistribution { modes: b.len(), masses }
    }

    /// Empirical frequencies of a sample.
    pub fn from_samples(modes: usize, samples: &[BitString]) -> Self {
        let mut counts: BTreeMap<BitString, u64> = BTreeMap::new();
        for b in samples {
            *counts.entry(*b).or_insert(0) += 1;
        }
        let total = samples.len().max(1) as f64;
        BitStringDistribution { modes, masses: counts.into_iter().map(|(b, c)| (b, c as f64 / total)).collect() }
    }

    pub fn total(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn mass(&self, b: &BitString) -> f64 {
        self.masses.get(b).copied().unwrap_or(0.0)
    }

    /// Bit strings with mass above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<BitString> {
        self.masses.iter().filter(|(_, &w)| w > threshold).map(|(b, _)| *b).collect()
    }
}

/// `β_b = Σ_{℘_j(n) = b} p_n`.
pub fn coarse_grain(dist: &PatternDistribution, j: u8) -> Result<BitStringDistribution> {
    let mut masses = BTreeMap::new();
    for (p, w) in &dist.entries {
        let b = parity_map(p, j)?.bits;
        *masses.entry(b).or_insert(0.0) += *w;
    }
    Ok(BitStringDistribution { modes: dist.modes, masses })
}

fn check_admissible(m_modes: usize, n: usize, m: usize) -> Result<()> {
    if m > m_modes {
        return Err(Error::Domain(format!("m = {m} exceeds M = {m_modes}")));
    }
    if (n + m_modes + m) % 2 != 0 {
        return Err(Error::Domain(format!("inadmissible parity: (M={m_modes}, n={n}, m={m}) needs n - M + m even")));
    }
    Ok(())
}

/// Number of patterns of the `(M, n)` sector whose first `m` entries are even
/// and last `M − m` odd, i.e. the `℘_0` pre-images of `0^m 1^{M−m}`:
/// `C((n+M+m)/2 − 1, (n−M+m)/2)`, zero when the lower index is negative.
pub fn upsilon0(m_modes: usize, n: usize, m: usize) -> Result<u64> {
    check_admissible(m_modes, n, m)?;
    let upper = (n + m_modes + m) as i64 / 2 - 1;
    let lower = (n as i64 - m_modes as i64 + m as i64) / 2;
    binomial_signed(upper, lower).ok_or_else(|| Error::Refused("multiplicity overflows 64 bits".into()))
}

/// Pre-images of `0^m 1^{M−m}` under `℘_1`: `C((n+2M−m)/2 − 1, (n−m)/2)`,
/// equal to `upsilon0(M, n, M − m)`.
pub fn upsilon0_prime(m_modes: usize, n: usize, m: usize) -> Result<u64> {
    if m > m_modes {
        return Err(Error::Domain(format!("m = {m} exceeds M = {m_modes}")));
    }
    check_admissible(m_modes, n, m_modes - m)?;
    let upper = (n + 2 * m_modes - m) as i64 / 2 - 1;
    let lower = (n as i64 - m as i64) / 2;
    binomial_signed(upper, lower).ok_or_else(|| Error::Refused("multiplicity overflows 64 bits".into()))
}

/// Enumerative count of sector patterns whose `℘_j` image is `bits`.
pub fn count_preimages(n: usize, bits: &BitString, j: u8) -> Result<u64> {
    let basis = enumerate_basis(bits.len(), n)?;
    let mut count = 0;
    for counts in basis.iter() {
        if parity_bits(counts, j)? == *bits {
            count += 1;
        }
    }
    Ok(count)
}

/// Checks `Σ_{s=0}^{r} C(p+s, s) C(q−s, r−s) = C(p+q+1, r)`.
pub fn binom_identity_check(p: u64, q: u64, r: u64) -> bool {
    if r > q {
        return false;
    }
    let mut lhs: u128 = 0;
    for s in 0..=r {
        let a = binomial_u128(p + s, s).unwrap_or(u128::MAX);
        let b = binomial_u128(q - s, r - s).unwrap_or(u128::MAX);
        lhs = lhs.saturating_add(a.saturating_mul(b));
    }
    binomial_u128(p + q + 1, r) == Some(lhs)
}

/// Union of parity images of Catalan bases, with pre-image counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    #[serde(rename = "M")]
    pub modes: usize,
    pub depth: usize,
    pub sectors: Vec<usize>,
    pub parities: Vec<u8>,
    pub covered: Vec<String>,
    pub missing: Vec<String>,
    pub multiplicities: BTreeMap<String, u64>,
    pub is_complete: bool,
}

/// Images of `℘_j` over `catalan_basis(M, n, depth)` for the requested sectors
/// and parity variants.
pub fn verify_surjectivity(
    m: usize,
    depth: usize,
    photon_numbers: &[usize],
    parities: &[u8],
) -> Result<CoverageReport> {
    if photon_numbers.is_empty() || parities.is_empty() {
        return Err(Error::Config("photon numbers and parities must be non-empty".into()));
    }
    if m < 2 {
        return Err(Error::Domain("surjectivity checks need M >= 2".into()));
    }
    if m > 24 {
        return Err(Error::Refused("surjectivity enumeration is limited to M <= 24".into()));
    }
    let sectors: Vec<usize> = photon_numbers.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let parity_list: Vec<u8> = parities.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if let Some(j) = parity_list.iter().find(|&&j| j > 1) {
        return Err(Error::Domain(format!("parity variant must be 0 or 1, got {j}")));
    }
    let mut counts: BTreeMap<BitString, u64> = BTreeMap::new();
    for &n in &sectors {
        let basis = catalan_basis(m, n, depth)?;
        for p in &basis {
            for &j in &parity_list {
                *counts.entry(parity_bits(p.counts(), j)?).or_insert(0) += 1;
            }
        }
    }
    let mut covered: Vec<String> = counts.keys().map(|b| b.to_string()).collect();
    covered.sort();
    let mut missing = Vec::new();
    for w in 0..(1u128 << m) {
        let b = BitString::from_word(m, w)?;
        if !counts.contains_key(&b) {
            missing.push(b.to_string());
        }
    }
    missing.sort();
    let multiplicities = counts.iter().map(|(b, c)| (b.to_string(), *c)).collect();
    Ok(CoverageReport {
        modes: m,
        depth,
        sectors,
        parities: parity_list,
        is_complete: missing.is_empty(),
        covered,
        missing,
        multiplicities,
    })
}

/// Outcome of the full-depth parity case analysis for one `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseAnalysis {
    #[serde(rename = "M")]
    pub modes: usize,
    /// The two (sector, parity) images that are compared.
    pub images: [(usize, u8); 2],
    pub disjoint: bool,
    pub union_complete: bool,
}

/// Full-mesh case analysis: for even `M` the `℘_0` images of sectors `M` and
/// `M − 1`, for odd `M` the `℘_0` and `℘_1` images of sector `M − 1`, must be
/// disjoint and together cover all `2^M` strings.
pub fn full_depth_case_analysis(m: usize) -> Result<CaseAnalysis> {
    if !(2..=24).contains(&m) {
        return Err(Error::Domain("case analysis needs 2 <= M <= 24".into()));
    }
    let images = if m % 2 == 0 { [(m, 0u8), (m - 1, 0u8)] } else { [(m - 1, 0u8), (m - 1, 1u8)] };
    let mut sets: Vec<BTreeSet<BitString>> = Vec::new();
    for &(n, j) in &images {
        let basis = catalan_basis(m, n, m - 1)?;
        let mut s = BTreeSet::new();
        for p in &basis {
            s.insert(parity_bits(p.counts(), j)?);
        }
        sets.push(s);
    }
    let disjoint = sets[0].is_disjoint(&sets[1]);
    let union = sets[0].len() + sets[1].len() - sets[0].intersection(&sets[1]).count();
    Ok(CaseAnalysis { modes: m, images, disjoint, union_complete: union as u128 == 1u128 << m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(v: &[u8]) -> DetectionPattern {
        DetectionPattern::new(v.to_vec()).unwrap()
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_map(&pat(&[3, 0, 1, 0]), 0).unwrap().bits.to_string(), "1010");
        assert_eq!(parity_map(&pat(&[1, 2, 1, 0]), 0).unwrap().bits.to_string(), "1010");
        assert_eq!(parity_map(&pat(&[0, 0, 0, 0, 0]), 1).unwrap().bits.to_string(), "11111");
        assert!(parity_map(&pat(&[1]), 2).is_err());
    }

    #[test]
    fn bitstring_round_trips() {
        let b: BitString = "0110".parse().unwrap();
        assert_eq!(b.bits(), vec![0, 1, 1, 0]);
        assert_eq!(b.complement().to_string(), "1001");
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"0110\"");
        assert!("012".parse::<BitString>().is_err());
    }

    #[test]
    fn upsilon_examples() {
        assert_eq!(upsilon0(4, 4, 2).unwrap(), 4);
        assert_eq!(upsilon0(4, 4, 4).unwrap(), 10);
        assert_eq!(upsilon0(5, 0, 5).unwrap(), 1);
        assert_eq!(upsilon0_prime(4, 4, 2).unwrap(), 4);
        assert_eq!(upsilon0_prime(4, 4, 0).unwrap(), upsilon0(4, 4, 4).unwrap());
        assert!(upsilon0_prime(3, 3, 0).is_err());
        assert!(upsilon0(4, 4, 1).is_err());
        assert!(upsilon0(4, 4, 5).is_err());
        // Fewer photons than odd modes: no pattern.
        assert_eq!(upsilon0(5, 1, 0).unwrap(), 0);
    }

    #[test]
    fn upsilon_matches_enumeration() {
        for mm in 1..=6 {
            for n in 0..=7 {
                for m in 0..=mm {
                    let mut bits = vec![0u8; mm];
                    bits[m..].iter_mut().for_each(|b| *b = 1);
                    let b = BitString::from_bits(&bits).unwrap();
                    if (n + mm + m) % 2 == 0 {
                        assert_eq!(upsilon0(mm, n, m).unwrap(), count_preimages(n, &b, 0).unwrap());
                    } else {
                        assert_eq!(count_preimages(n, &b, 0).unwrap(), 0);
                    }
                    if (n + m) % 2 == 0 {
                        assert_eq!(upsilon0_prime(mm, n, m).unwrap(), count_preimages(n, &b, 1).unwrap());
                    } else {
                        assert_eq!(count_preimages(n, &b, 1).unwrap(), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn binomial_identity() {
        assert!(binom_identity_check(0, 0, 0));
        assert!(binom_identity_check(2, 5, 3));
        for p in 0..=12 {
            for q in 0..=12 {
                for r in 0..=q {
                    assert!(binom_identity_check(p, q, r));
                }
            }
        }
    }

    #[test]
    fn coarse_grain_uniform_sector() {
        let basis = enumerate_basis(4, 4).unwrap();
        let w = 1.0 / basis.len() as f64;
        let dist = PatternDistribution {
            modes: 4,
            photons: 4,
            entries: basis.patterns().into_iter().map(|p| (p, w)).collect(),
        };
        let beta = coarse_grain(&dist, 0).unwrap();
        let zero = BitString::zeros(4).unwrap();
        assert!((beta.mass(&zero) - upsilon0(4, 4, 4).unwrap() as f64 / 35.0).abs() < 1e-15);
        assert!((beta.total() - dist.total()).abs() < 1e-15);
        let point = coarse_grain(&PatternDistribution::point(pat(&[2, 1])), 1).unwrap();
        assert_eq!(point.masses.len(), 1);
        assert_eq!(point.mass(&"10".parse().unwrap()), 1.0);
    }

    #[test]
    fn surjectivity_examples() {
        let r = verify_surjectivity(4, 1, &[3, 4], &[0, 1]).unwrap();
        assert!(r.is_complete);
        assert_eq!(r.covered.len(), 16);
        assert!(verify_surjectivity(5, 4, &[4], &[0, 1]).unwrap().is_complete);
        let even = verify_surjectivity(4, 3, &[4], &[0]).unwrap();
        assert_eq!(even.covered.len(), 8);
        assert!(even.covered.iter().all(|s| s.matches('1').count() % 2 == 0));
        assert!(verify_surjectivity(4, 1, &[], &[0]).is_err());
    }

    #[test]
    fn case_analysis_small() {
        for m in 2..=6 {
            let c = full_depth_case_analysis(m).unwrap();
            assert!(c.disjoint && c.union_complete, "M={m}");
        }
    }
}
