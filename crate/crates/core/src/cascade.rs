//! Depth-1 circuits as a carry-driven Markov chain.
//!
//! The first slice applies `(0,1), (1,2), ..., (M−2, M−1)` in order, so after
//! gate `(k, k+1)` mode `k` is never touched again. Each outcome has a single
//! history: with carry `c` in mode `k` and `x_{k+1}` input photons in mode
//! `k+1`, the gate leaves `a` photons in mode `k` and carries
//! `c + x_{k+1} − a` forward. The Born probabilities therefore factor into
//! two-mode transition laws, which allows exact sampling at any `M`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::{sector_size, DetectionPattern};
use crate::interferometer::{amplitude_with, ln_factorials, CircuitSpec, PatternDistribution, C64, DENSE_LIMIT};
use crate::parity::{BitString, BitStringDistribution};

/// Largest `M` for which [`CascadeSampler::bit_distribution`] runs.
pub const MAX_BIT_DP_MODES: usize = 18;

/// Exact sampler for depth-1 circuits with lazily built transition tables.
#[derive(Debug)]
pub struct CascadeSampler {
    modes: usize,
    photons: usize,
    input: Vec<u8>,
    coeffs: Vec<[C64; 4]>,
    lf: Vec<f64>,
    /// Cumulative transition laws indexed by `k * (n + 1) + carry`.
    tables: Vec<OnceLock<Vec<f64>>>,
}

impl CascadeSampler {
    /// Binds `params` to a depth-1 circuit.
    pub fn new(circuit: &CircuitSpec, params: &[f64]) -> Result<Self> {
        if circuit.depth != 1 {
            return Err(Error::Domain(format!("the cascade sampler needs depth 1, got {}", circuit.depth)));
        }
        circuit.validate()?;
        let bound = circuit.bind(params)?;
        let n = circuit.photons();
        let m = circuit.modes;
        let coeffs = bound.gates.iter().map(|g| g.coefficients()).collect();
        let tables = (0..(m - 1) * (n + 1)).map(|_| OnceLock::new()).collect();
        Ok(CascadeSampler {
            modes: m,
            photons: n,
            input: circuit.input.counts().to_vec(),
            coeffs,
            lf: ln_factorials(n),
            tables,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    /// Law of the photons left in mode `k` by gate `k` given `carry`,
    /// normalized, indexed by that photon count.
    pub fn transition_probabilities(&self, k: usize, carry: usize) -> Result<Vec<f64>> {
        if k + 1 >= self.modes || carry > self.photons {
            return Err(Error::Domain(format!("no transition for gate {k} with carry {carry}")));
        }
        Ok(self.raw_transition(k, carry))
    }

    fn raw_transition(&self, k: usize, carry: usize) -> Vec<f64> {
        let q = self.input[k + 1] as usize;
        let mut probs: Vec<f64> =
            (0..=carry + q).map(|a| amplitude_with(&self.coeffs[k], &self.lf, carry, q, a).norm_sqr()).collect();
        let total: f64 = probs.iter().sum();
        if total > 0.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        probs
    }

    fn cumulative(&self, k: usize, carry: usize) -> &[f64] {
        self.tables[k * (self.photons + 1) + carry].get_or_init(|| {
            let mut acc = 0.0;
            self.raw_transition(k, carry)
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect()
        })
    }

    /// One detection pattern drawn from the output law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let mut out = vec![0u8; self.modes];
        let mut carry = self.input[0] as usize;
        for k in 0..self.modes - 1 {
            let cdf = self.cumulative(k, carry);
            let u = rng.gen::<f64>() * cdf.last().copied().unwrap_or(1.0);
            let a = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            out[k] = a as u8;
            carry = carry + self.input[k + 1] as usize - a;
        }
        out[self.modes - 1] = carry as u8;
        out
    }

    /// Exact `℘_j` bit-string law by dynamic programming over (carry, prefix).
    pub fn bit_distribution(&self, j: u8) -> Result<BitStringDistribution> {
        if j > 1 {
            return Err(Error::Domain(format!("parity variant must be 0 or 1, got {j}")));
        }
        if self.modes > MAX_BIT_DP_MODES {
            return Err(Error::Refused(format!(
                "exact bit laws are limited to M <= {MAX_BIT_DP_MODES}, got {}",
                self.modes
            )));
        }
        let width = self.photons + 1;
        let mut mass = vec![0.0f64; width];
        mass[self.input[0] as usize] = 1.0;
        for k in 0..self.modes - 1 {
            let prefixes = 1usize << k;
            let mut next = vec![0.0f64; 2 * prefixes * width];
            for prefix in 0..prefixes {
                for carry in 0..width {
                    let w = mass[prefix * width + carry];
                    if w == 0.0 {
                        continue;
                    }
                    let law = self.raw_transition(k, carry);
                    let q = self.input[k + 1] as usize;
                    for (a, p) in law.into_iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        let bit = ((a as u8 & 1) ^ j) as usize;
                        let np = prefix | (bit << k);
                        next[np * width + carry + q - a] += w * p;
                    }
                }
            }
            mass = next;
        }
        let last = self.modes - 1;
        let mut masses = BTreeMap::new();
        for prefix in 0..(1usize << last) {
            for carry in 0..width {
                let w = mass[prefix * width + carry];
                if w > 0.0 {
                    let bit = ((carry as u8 & 1) ^ j) as u128;
                    let word = prefix as u128 | (bit << last);
                    *masses.entry(BitString::from_word(self.modes, word)?).or_insert(0.0) += w;
                }
            }
        }
        Ok(BitStringDistribution { modes: self.modes, masses })
    }

    /// Full pattern law by enumerating histories, in canonical order.
    pub fn pattern_distribution(&self) -> Result<PatternDistribution> {
        let size = sector_size(self.modes, self.photons).unwrap_or(u64::MAX);
        if size > DENSE_LIMIT {
            return Err(Error::Refused(format!("sector of size {size} is too large to enumerate")));
        }
        let mut entries = Vec::new();
        let mut prefix = vec![0u8; self.modes];
        self.histories(0, self.input[0] as usize, 1.0, &mut prefix, &mut entries)?;
        entries.sort_by(|a: &(DetectionPattern, f64), b| b.0.cmp(&a.0));
        Ok(PatternDistribution { modes: self.modes, photons: self.photons, entries })
    }

    fn histories(
        &self,
        k: usize,
        carry: usize,
        w: f64,
        prefix: &mut Vec<u8>,
        out: &mut Vec<(DetectionPattern, f64)>,
    ) -> Result<()> {
        if k + 1 == self.modes {
            prefix[k] = carry as u8;
            out.push((DetectionPattern::new(prefix.clone())?, w));
            return Ok(());
        }
        let q = self.input[k + 1] as usize;
        for (a, p) in self.raw_transition(k, carry).into_iter().enumerate() {
            if p > 0.0 {
                prefix[k] = a as u8;
                self.histories(k + 1, carry + q - a, w * p, prefix, out)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{evolve, exact_distribution};
    use crate::parity::coarse_grain;
    use crate::rng::stream;

    fn params(k: usize, seed: u64) -> Vec<f64> {
        let mut r = stream(seed, &[]);
        (0..k).map(|_| r.gen::<f64>() * std::f64::consts::TAU).collect()
    }

    #[test]
    fn matches_dense_simulation() {
        for (m, n) in [(2, 2), (3, 2), (4, 4), (5, 4), (6, 6)] {
            let c = CircuitSpec::standard(m, n, 1).unwrap();
            let p = params(2 * (m - 1), m as u64);
            let dense = exact_distribution(&evolve(&c, &p).unwrap()).unwrap();
            let cascade = CascadeSampler::new(&c, &p).unwrap();
            let law = cascade.pattern_distribution().unwrap();
            let dense_nonzero: Vec<_> = dense.entries.iter().filter(|(_, w)| *w > 1e-14).collect();
            let law_nonzero: Vec<_> = law.entries.iter().filter(|(_, w)| *w > 1e-14).collect();
            assert_eq!(dense_nonzero.len(), law_nonzero.len());
            for ((pa, wa), (pb, wb)) in dense_nonzero.iter().zip(&law_nonzero) {
                assert_eq!(pa, pb);
                assert!((wa - wb).abs() < 1e-10);
            }
            for j in 0..2 {
                let a = coarse_grain(&dense, j).unwrap();
                let b = cascade.bit_distribution(j).unwrap();
                for (bits, w) in &a.masses {
                    assert!((w - b.mass(bits)).abs() < 1e-10);
                }
                assert!((b.total() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn empirical_frequencies_converge() {
        let c = CircuitSpec::standard(4, 3, 1).unwrap();
        let p = params(3, 11);
        let cascade = CascadeSampler::new(&c, &p).unwrap();
        let exact = cascade.bit_distribution(0).unwrap();
        let mut r = stream(5, &[1]);
        let draws = 40_000;
        let mut counts: BTreeMap<BitString, f64> = BTreeMap::new();
        for _ in 0..draws {
            let s = cascade.sample(&mut r);
            assert_eq!(s.iter().map(|&x| x as usize).sum::<usize>(), 3);
            let b = crate::parity::parity_bits(&s, 0).unwrap();
            *counts.entry(b).or_insert(0.0) += 1.0 / draws as f64;
        }
        for (b, w) in &exact.masses {
            let f = counts.get(b).copied().unwrap_or(0.0);
            assert!((f - w).abs() < 0.01, "{b}: {f} vs {w}");
        }
    }

    #[test]
    fn rejects_deeper_circuits() {
        let c = CircuitSpec::standard(4, 4, 2).unwrap();
        assert!(CascadeSampler::new(&c, &[0.0; 5]).is_err());
    }

    #[test]
    fn large_mode_counts_sample() {
        let c = CircuitSpec::standard(70, 70, 1).unwrap();
        let cascade = CascadeSampler::new(&c, &params(69, 3)).unwrap();
        let mut r = stream(1, &[]);
        for _ in 0..100 {
            let s = cascade.sample(&mut r);
            assert_eq!(s.iter().map(|&x| x as usize).sum::<usize>(), 70);
        }
    }
}
