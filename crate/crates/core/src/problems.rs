//! Problem encodings: QUBO, Ising, the Möbius ladder and binary-weight
//! portfolios, with loaders and exhaustive oracles.
//!
//! Bit `i` of a [`BitString`] is variable `x_i`; spins are `s_i = 2x_i − 1`.

use std::cmp::Ordering;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::binomial_u128;
use crate::parity::BitString;
use crate::rng::stream;

/// Largest dimension accepted by [`brute_force_min`].
pub const MAX_BRUTE_FORCE_BITS: usize = 26;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-9;

/// `min xᵀQx` over bit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboProblem {
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
}

impl QuboProblem {
    /// Square finite matrix, symmetrized as `(Q + Qᵀ)/2` when needed.
    pub fn new(q: Vec<Vec<f64>>) -> Result<Self> {
        let n = q.len();
        if n == 0 {
            return Err(Error::InvalidDimension("QUBO matrix is empty".into()));
        }
        if n > BitString::MAX_LEN {
            return Err(Error::InvalidDimension(format!("QUBO dimension {n} exceeds {}", BitString::MAX_LEN)));
        }
        for (r, row) in q.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidDimension(format!("row {r} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("row {r} has a non-finite entry")));
            }
        }
        let mut q = q;
        for i in 0..n {
            for j in i + 1..n {
                if (q[i][j] - q[j][i]).abs() > SYMMETRY_TOLERANCE {
                    let avg = 0.5 * (q[i][j] + q[j][i]);
                    q[i][j] = avg;
                    q[j][i] = avg;
                }
            }
        }
        Ok(QuboProblem { q })
    }

    pub fn dimension(&self) -> usize {
        self.q.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// `xᵀQx`.
    pub fn energy(&self, x: &BitString) -> Result<f64> {
        check_len(x.len(), self.dimension())?;
        Ok(self.energy_word(x.word()))
    }

    pub(crate) fn energy_word(&self, word: u128) -> f64 {
        let set: Vec<usize> = (0..self.q.len()).filter(|&i| word >> i & 1 == 1).collect();
        let mut e = 0.0;
        for &i in &set {
            let row = &self.q[i];
            e += row[i];
            for &j in &set {
                if j > i {
                    e += 2.0 * row[j];
                }
            }
        }
        e
    }

    /// Dense header-free CSV; errors name the file and row.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn from_csv_reader(reader: impl Read, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Data(format!("{source}: row {}: {e}", r + 1)))?;
            let row = record
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Data(format!("{source}: row {}: cannot parse {s:?}", r + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::new(rows).map_err(|e| Error::Data(format!("{source}: {e}")))
    }

    /// JSON array of rows, or an object with a `Q` field.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            Rows(Vec<Vec<f64>>),
            Object {
                #[serde(rename = "Q")]
                q: Vec<Vec<f64>>,
            },
        }
        let rows = match serde_json::from_str::<Doc>(text)? {
            Doc::Rows(r) => r,
            Doc::Object { q } => q,
        };
        Self::new(rows)
    }

    /// Loads CSV or JSON by file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
                Self::from_json(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
            }
            _ => Self::from_csv_path(path),
        }
    }

    /// The 6×6 instance used for the circuit-depth comparison.
    pub fn reference_6x6() -> Self {
        Self::from_csv_reader(REFERENCE_Q6.as_bytes(), "reference_q6.csv").expect("embedded matrix parses")
    }

    /// The 11×11 random instance.
    pub fn reference_11x11() -> Self {
        Self::from_csv_reader(REFERENCE_Q11.as_bytes(), "reference_q11.csv").expect("embedded matrix parses")
    }
}

/// Raw text of the shipped 6×6 matrix.
pub const REFERENCE_Q6: &str = include_str!("../data/reference_q6.csv");
/// Raw text of the shipped 11×11 matrix.
pub const REFERENCE_Q11: &str = include_str!("../data/reference_q11.csv");

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Domain(format!("bit string has length {got}, expected {want}")));
    }
    Ok(())
}

/// `E(s) = Σ_{i<j} J_ij s_i s_j + Σ_i h_i s_i + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingProblem {
    pub n: usize,
    /// `(i, j, J_ij)` with `i < j`.
    pub couplings: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    pub constant: f64,
}

impl IsingProblem {
    pub fn new(n: usize, couplings: Vec<(usize, usize, f64)>, fields: Vec<f64>, constant: f64) -> Result<Self> {
        if n == 0 || n > BitString::MAX_LEN {
            return Err(Error::InvalidDimension(format!("Ising size {n} out of range")));
        }
        if fields.len() != n {
            return Err(Error::InvalidDimension(format!("{} fields for {n} spins", fields.len())));
        }
        for &(i, j, _) in &couplings {
            if i >= j || j >= n {
                return Err(Error::Domain(format!("coupling ({i}, {j}) needs i < j < {n}")));
            }
        }
        Ok(IsingProblem { n, couplings, fields, constant })
    }

    /// Energy at spins `±1`.
    pub fn energy_spins(&self, s: &[i8]) -> Result<f64> {
        check_len(s.len(), self.n)?;
        if s.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Domain("spins must be ±1".into()));
        }
        let mut e = self.constant;
        for &(i, j, v) in &self.couplings {
            e += v * (s[i] * s[j]) as f64;
        }
        for (h, &si) in self.fields.iter().zip(s) {
            e += h * si as f64;
        }
        Ok(e)
    }

    /// Energy at `s = 2x − 1`.
    pub fn energy(&self, x: &BitString) -> Result<f64> {
        check_len(x.len(), self.n)?;
        Ok(self.energy_word(x.word()))
    }

    pub(crate) fn energy_word(&self, word: u128) -> f64 {
        let spin = |i: usize| if word >> i & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = self.constant;
        for &(i, j, v) in &self.couplings {
            e += v * spin(i) * spin(j);
        }
        for (i, h) in self.fields.iter().enumerate() {
            e += h * spin(i);
        }
        e
    }
}

/// Ising form with equal energies under `s = 2x − 1`:
/// `J_ij = Q_ij / 2`, `h_i = (Σ_j Q_ij) / 2`, `constant = (Σ_ij Q_ij + tr Q) / 4`.
pub fn qubo_to_ising(q: &QuboProblem) -> IsingProblem {
    let m = q.matrix();
    let n = m.len();
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if m[i][j] != 0.0 {
                couplings.push((i, j, m[i][j] / 2.0));
            }
        }
    }
    let fields = m.iter().map(|row| row.iter().sum::<f64>() / 2.0).collect();
    let total: f64 = m.iter().flatten().sum();
    let trace: f64 = (0..n).map(|i| m[i][i]).sum();
    IsingProblem { n, couplings, fields, constant: (total + trace) / 4.0 }
}

/// Twisted ladder `−J_a Σ s_i s_{i+1} − J_b Σ_{i<n/2} s_i s_{i+n/2}` on a ring of `n` spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusProblem {
    pub n: usize,
    #[serde(rename = "J_a")]
    pub ja: f64,
    #[serde(rename = "J_b")]
    pub jb: f64,
}

impl MobiusProblem {
    pub fn new(n: usize, ja: f64, jb: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Domain(format!("Möbius ladders need an even n >= 4, got {n}")));
        }
        if n > BitString::MAX_LEN {
            return Err(Error::InvalidDimension(format!("n = {n} exceeds {}", BitString::MAX_LEN)));
        }
        if !ja.is_finite() || !jb.is_finite() {
            return Err(Error::Domain("couplings must be finite".into()));
        }
        Ok(MobiusProblem { n, ja, jb })
    }

    pub fn energy_spins(&self, s: &[i8]) -> Result<f64> {
        check_len(s.len(), self.n)?;
        if s.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Domain("spins must be ±1".into()));
        }
        Ok(self.energy_with(|i| s[i] as f64))
    }

    pub fn energy(&self, x: &BitString) -> Result<f64> {
        check_len(x.len(), self.n)?;
        Ok(self.energy_word(x.word()))
    }

    pub(crate) fn energy_word(&self, word: u128) -> f64 {
        self.energy_with(|i| if word >> i & 1 == 1 { 1.0 } else { -1.0 })
    }

    fn energy_with(&self, s: impl Fn(usize) -> f64) -> f64 {
        let n = self.n;
        let ring: f64 = (0..n).map(|i| s(i) * s((i + 1) % n)).sum();
        let rungs: f64 = (0..n / 2).map(|i| s(i) * s(i + n / 2)).sum();
        -self.ja * ring - self.jb * rungs
    }

    /// `min(−nJ_a − nJ_b/2, (4 − n)J_a + nJ_b/2)`, valid for `J_a > 0`.
    pub fn analytic_min(&self) -> Result<f64> {
        if self.ja <= 0.0 {
            return Err(Error::OutOfValidity(format!("the closed-form minimum needs J_a > 0, got {}", self.ja)));
        }
        let n = self.n as f64;
        Ok((-n * self.ja - n * self.jb / 2.0).min((4.0 - n) * self.ja + n * self.jb / 2.0))
    }
}

/// Closed-form Möbius minimum.
pub fn mobius_min(p: &MobiusProblem) -> Result<f64> {
    p.analytic_min()
}

/// How portfolio allocations are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PortfolioApproach {
    /// `−ωᵀμ + γωᵀΣω + B(Σω − 1)²`.
    PenaltyQubo,
    /// `−ωᵀμ/Σω + γωᵀΣω/(Σω)²`, with `E_pen` for the empty allocation.
    Normalized,
}

/// Mean-variance portfolio over binary-encoded weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioProblem {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub gamma: f64,
    #[serde(rename = "N_q")]
    pub n_q: usize,
    pub approach: PortfolioApproach,
    /// Penalty weight `B` of the QUBO approach.
    pub penalty: f64,
    /// Energy assigned to the empty allocation in the normalized approach.
    pub e_pen: f64,
    #[serde(default)]
    pub assets: Vec<String>,
}

impl PortfolioProblem {
    /// Validates the inputs; `B` and `E_pen` default to `10³ · max|entry|` of `(μ, Σ)`.
    pub fn new(
        mu: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        gamma: f64,
        n_q: usize,
        approach: PortfolioApproach,
    ) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidDimension("portfolio has no assets".into()));
        }
        if sigma.len() != n || sigma.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidDimension(format!("Σ must be {n}×{n}")));
        }
        if mu.iter().chain(sigma.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("μ and Σ must be finite".into()));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("γ must be a finite non-negative number, got {gamma}")));
        }
        if n_q == 0 || n * n_q > BitString::MAX_LEN || n_q > 32 {
            return Err(Error::Domain(format!("N_q = {n_q} out of range for {n} assets")));
        }
        for i in 0..n {
            for j in i + 1..n {
                if (sigma[i][j] - sigma[j][i]).abs() > PSD_TOLERANCE {
                    return Err(Error::Domain(format!("Σ is not symmetric at ({i}, {j})")));
                }
            }
        }
        if !is_psd(&sigma, PSD_TOLERANCE) {
            return Err(Error::Domain("Σ is not positive semidefinite".into()));
        }
        let scale = mu.iter().chain(sigma.iter().flatten()).fold(0.0f64, |a, v| a.max(v.abs()));
        let default_penalty = 1e3 * if scale > 0.0 { scale } else { 1.0 };
        Ok(PortfolioProblem {
            mu,
            sigma,
            gamma,
            n_q,
            approach,
            penalty: default_penalty,
            e_pen: default_penalty,
            assets: Vec::new(),
        })
    }

    pub fn with_penalties(mut self, penalty: f64, e_pen: f64) -> Self {
        self.penalty = penalty;
        self.e_pen = e_pen;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_assets(mut self, assets: Vec<String>) -> Self {
        self.assets = assets;
        self
    }

    pub fn asset_count(&self) -> usize {
        self.mu.len()
    }

    /// Number of bits `N · N_q`.
    pub fn dimension(&self) -> usize {
        self.mu.len() * self.n_q
    }

    /// `ωᵀμ`.
    pub fn portfolio_return(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.mu).map(|(a, b)| a * b).sum()
    }

    /// `ωᵀΣω`.
    pub fn portfolio_variance(&self, w: &[f64]) -> f64 {
        let mut v = 0.0;
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            for (j, wj) in w.iter().enumerate() {
                v += wi * self.sigma[i][j] * wj;
            }
        }
        v
    }

    /// `σ_p = √(ωᵀΣω)`.
    pub fn portfolio_risk(&self, w: &[f64]) -> f64 {
        self.portfolio_variance(w).max(0.0).sqrt()
    }

    /// `−ωᵀμ + γωᵀΣω`.
    pub fn markowitz_energy(&self, w: &[f64]) -> f64 {
        -self.portfolio_return(w) + self.gamma * self.portfolio_variance(w)
    }

    pub fn energy_penalty(&self, w: &[f64]) -> f64 {
        let s: f64 = w.iter().sum();
        self.markowitz_energy(w) + self.penalty * (s - 1.0).powi(2)
    }

    pub fn energy_normalized(&self, w: &[f64]) -> f64 {
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            return self.e_pen;
        }
        -self.portfolio_return(w) / s + self.gamma * self.portfolio_variance(w) / (s * s)
    }

    /// Energy of the configured approach.
    pub fn energy_weights(&self, w: &[f64]) -> f64 {
        match self.approach {
            PortfolioApproach::PenaltyQubo => self.energy_penalty(w),
            PortfolioApproach::Normalized => self.energy_normalized(w),
        }
    }

    pub fn weights(&self, x: &BitString) -> Result<Vec<f64>> {
        binary_encode_weights(x, self.n_q, self.asset_count())
    }

    pub fn energy(&self, x: &BitString) -> Result<f64> {
        Ok(self.energy_weights(&self.weights(x)?))
    }

    /// Weights `ω / Σω` (zero vector for the empty allocation).
    pub fn normalized_weights(&self, x: &BitString) -> Result<Vec<f64>> {
        let w = self.weights(x)?;
        let s: f64 = w.iter().sum();
        Ok(if s > 0.0 { w.iter().map(|v| v / s).collect() } else { w })
    }

    /// Random instance with a one-factor covariance, returns in `[0.02, 0.30]`
    /// and volatilities in `[0.10, 0.45]`.
    pub fn synthetic(n_assets: usize, seed: u64, gamma: f64, n_q: usize, approach: PortfolioApproach) -> Result<Self> {
        let mut r = stream(seed, &[0x5041_5254]);
        let mu: Vec<f64> = (0..n_assets).map(|_| r.gen_range(0.02..0.30)).collect();
        let vol: Vec<f64> = (0..n_assets).map(|_| r.gen_range(0.10..0.45)).collect();
        let beta: Vec<f64> = (0..n_assets).map(|_| r.gen_range(0.2..0.8)).collect();
        let sigma = (0..n_assets)
            .map(|i| {
                (0..n_assets)
                    .map(|j| {
                        let common = beta[i] * beta[j] * vol[i] * vol[j];
                        if i == j {
                            vol[i] * vol[i]
                        } else {
                            common
                        }
                    })
                    .collect()
            })
            .collect();
        let assets = (0..n_assets).map(|i| format!("A{i:02}")).collect();
        Ok(Self::new(mu, sigma, gamma, n_q, approach)?.with_assets(assets))
    }
}

/// Cholesky of `Σ + tol·I` succeeds.
fn is_psd(a: &[Vec<f64>], tol: f64) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j] + if i == j { tol } else { 0.0 };
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// `ω_i = Σ_q 2^q x_{i,q} / (2^{N_q} − 1)`, with asset `i` owning bits
/// `i·N_q .. (i+1)·N_q` and bit `q` of the group weighing `2^q`.
pub fn binary_encode_weights(x: &BitString, n_q: usize, n_assets: usize) -> Result<Vec<f64>> {
    check_len(x.len(), n_q * n_assets)?;
    Ok(weights_from_word(x.word(), n_q, n_assets))
}

fn weights_from_word(word: u128, n_q: usize, n_assets: usize) -> Vec<f64> {
    let full = ((1u64 << n_q) - 1) as f64;
    let mask = (1u128 << n_q) - 1;
    (0..n_assets).map(|i| ((word >> (i * n_q)) & mask) as f64 / full).collect()
}

/// Allocations with `Σω = 1`: solutions of `Σ q_i = 2^{N_q} − 1` in integers
/// `0 <= q_i <= 2^{N_q} − 1`, i.e. `C(N + K − 1, K)` with `K = 2^{N_q} − 1`.
pub fn normalized_subspace_count(n_assets: usize, n_q: usize) -> Result<u128> {
    if n_assets == 0 || n_q == 0 || n_q > 32 {
        return Err(Error::Domain("need at least one asset and 1 <= N_q <= 32".into()));
    }
    let k = (1u64 << n_q) - 1;
    binomial_u128(n_assets as u64 + k - 1, k).ok_or_else(|| Error::Refused("count overflows 128 bits".into()))
}

/// Annualized log-return statistics from a price table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStatistics {
    pub assets: Vec<String>,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

/// Trading days per year.
pub const ANNUALIZATION: f64 = 250.0;

/// Daily log-returns `ln(S_t / S_{t−1})`; `μ` is their mean and `Σ` their
/// unbiased covariance, both scaled by 250.
pub fn portfolio_returns_from_prices(assets: Vec<String>, prices: &[Vec<f64>]) -> Result<ReturnStatistics> {
    let n = assets.len();
    if n == 0 {
        return Err(Error::Data("price table has no assets".into()));
    }
    if prices.len() < 2 {
        return Err(Error::Data(format!("need at least 2 price rows, got {}", prices.len())));
    }
    for (r, row) in prices.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Data(format!("row {}: {} prices for {n} assets", r + 1, row.len())));
        }
        if let Some(k) = row.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Data(format!("row {}: non-positive price {} for {}", r + 1, row[k], assets[k])));
        }
    }
    let days = prices.len() - 1;
    let returns: Vec<Vec<f64>> =
        prices.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| (b / a).ln()).collect()).collect();
    let mean: Vec<f64> = (0..n).map(|k| returns.iter().map(|r| r[k]).sum::<f64>() / days as f64).collect();
    let sigma = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if days < 2 {
                        return 0.0;
                    }
                    let s: f64 = returns.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum();
                    ANNUALIZATION * s / (days - 1) as f64
                })
                .collect()
        })
        .collect();
    Ok(ReturnStatistics { assets, mu: mean.iter().map(|m| m * ANNUALIZATION).collect(), sigma })
}

/// Reads `date,<asset>,...` price CSV; empty or malformed cells are errors naming the row.
pub fn read_prices_csv(reader: impl Read, source: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(format!("{source}: header: {e}")))?.clone();
    if header.len() < 2 {
        return Err(Error::Data(format!("{source}: header needs a date column and at least one asset")));
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::Data(format!("{source}: row {line}: {e}")))?;
        if record.len() != header.len() {
            return Err(Error::Data(format!(
                "{source}: row {line}: {} fields, expected {}",
                record.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(assets.len());
        for (k, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(Error::Data(format!("{source}: row {line}: missing price for {}", assets[k])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("{source}: row {line}: cannot parse {cell:?} for {}", assets[k])))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Data(format!("{source}: row {line}: non-positive price {v} for {}", assets[k])));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok((assets, rows))
}

/// Loads a price CSV and computes annualized statistics.
pub fn returns_from_price_file(path: &Path) -> Result<ReturnStatistics> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let (assets, rows) = read_prices_csv(file, &path.display().to_string())?;
    portfolio_returns_from_prices(assets, &rows).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// `Dirichlet(1, ..., 1)` allocations from a seeded stream.
pub fn random_portfolios(n_assets: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = stream(seed, &[0x5241_4E44]);
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..n_assets).map(|_| -(1.0 - r.gen::<f64>()).ln()).collect();
            let s: f64 = g.iter().sum();
            g.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// One solved point of a γ sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub gamma: f64,
    pub risk: f64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub bitstring: String,
}

/// Writes `gamma,risk,return,bitstring`.
pub fn write_frontier_csv(path: &Path, points: &[FrontierPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `risk,return` for a random baseline.
pub fn write_random_baseline_csv(path: &Path, problem: &PortfolioProblem, portfolios: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["risk", "return"])?;
    for p in portfolios {
        w.write_record([problem.portfolio_risk(p).to_string(), problem.portfolio_return(p).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reading of "the frontier beats the random portfolios".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominanceRule {
    /// Frontier return is at least that of every random portfolio with equal or greater risk.
    RiskierRandoms,
    /// No random portfolio has equal or lower risk and a strictly higher return.
    NotDominated,
}

/// Violations of a dominance rule, each as `(frontier index, random index, excess return)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub rule: DominanceRule,
    pub checked_pairs: u64,
    pub violations: Vec<(usize, usize, f64)>,
    pub worst_excess: f64,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares frontier points against random allocations; returns within `tol` count as ties.
pub fn frontier_dominance(
    problem: &PortfolioProblem,
    frontier: &[FrontierPoint],
    randoms: &[Vec<f64>],
    rule: DominanceRule,
    tol: f64,
) -> DominanceReport {
    let stats: Vec<(f64, f64)> =
        randoms.iter().map(|w| (problem.portfolio_risk(w), problem.portfolio_return(w))).collect();
    let mut violations = Vec::new();
    let mut checked = 0u64;
    let mut worst = f64::NEG_INFINITY;
    for (fi, p) in frontier.iter().enumerate() {
        for (ri, &(risk, ret)) in stats.iter().enumerate() {
            let applies = match rule {
                DominanceRule::RiskierRandoms => risk >= p.risk,
                DominanceRule::NotDominated => risk <= p.risk,
            };
            if !applies {
                continue;
            }
            checked += 1;
            let excess = ret - p.ret;
            worst = worst.max(excess);
            if excess > tol {
                violations.push((fi, ri, excess));
            }
        }
    }
    DominanceReport { rule, checked_pairs: checked, violations, worst_excess: worst }
}

/// Tagged union of supported problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Qubo(QuboProblem),
    Ising(IsingProblem),
    Mobius(MobiusProblem),
    Portfolio(PortfolioProblem),
}

impl ProblemSpec {
    /// Number of bits `M`.
    pub fn dimension(&self) -> usize {
        match self {
            ProblemSpec::Qubo(q) => q.dimension(),
            ProblemSpec::Ising(p) => p.n,
            ProblemSpec::Mobius(p) => p.n,
            ProblemSpec::Portfolio(p) => p.dimension(),
        }
    }

    /// Energy of a bit string of length [`dimension`](Self::dimension).
    pub fn bitstring_energy(&self, x: &BitString) -> Result<f64> {
        check_len(x.len(), self.dimension())?;
        Ok(self.energy_word(x.word()))
    }

    pub(crate) fn energy_word(&self, word: u128) -> f64 {
        match self {
            ProblemSpec::Qubo(q) => q.energy_word(word),
            ProblemSpec::Ising(p) => p.energy_word(word),
            ProblemSpec::Mobius(p) => p.energy_word(word),
            ProblemSpec::Portfolio(p) => p.energy_weights(&weights_from_word(word, p.n_q, p.asset_count())),
        }
    }
}

/// Exhaustive search result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub energy: f64,
    pub argmin: BitString,
    /// The lowest energies, ascending, ties broken by bit-string word.
    pub lowest: Vec<(f64, BitString)>,
}

/// Exhaustive minimum over all `2^M` bit strings, keeping the `k` lowest.
pub fn brute_force_min(problem: &ProblemSpec, k: usize) -> Result<BruteForceResult> {
    let m = problem.dimension();
    if m > MAX_BRUTE_FORCE_BITS {
        return Err(Error::Refused(format!("brute force is limited to {MAX_BRUTE_FORCE_BITS} bits, got {m}")));
    }
    let k = k.max(1);
    let total = 1u64 << m;
    let chunk = 1u64 << 14.min(m);
    let order = |a: &(f64, u64), b: &(f64, u64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let best: Vec<(f64, u64)> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut local: Vec<(f64, u64)> = Vec::with_capacity(k + 1);
            for word in c * chunk..((c + 1) * chunk).min(total) {
                let e = problem.energy_word(word as u128);
                if local.len() < k || order(&(e, word), local.last().expect("non-empty")) == Ordering::Less {
                    let pos = local.partition_point(|x| order(x, &(e, word)) == Ordering::Less);
                    local.insert(pos, (e, word));
                    local.truncate(k);
                }
            }
            local
        })
        .reduce(Vec::new, |mut a, b| {
            a.extend(b);
            a.sort_by(order);
            a.truncate(k);
            a
        });
    if best.iter().any(|(e, _)| !e.is_finite()) {
        return Err(Error::Numeric("non-finite energy during brute force".into()));
    }
    let lowest =
        best.into_iter().map(|(e, w)| Ok((e, BitString::from_word(m, w as u128)?))).collect::<Result<Vec<_>>>()?;
    let (energy, argmin) = lowest[0];
    Ok(BruteForceResult { energy, argmin, lowest })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn qubo_basics() {
        let q = QuboProblem::reference_6x6();
        assert_eq!(q.energy(&bits("000000")).unwrap(), 0.0);
        assert!(q.energy(&bits("00000")).is_err());
        let r = brute_force_min(&ProblemSpec::Qubo(q), 3).unwrap();
        let e: Vec<f64> = r.lowest.iter().map(|x| (x.0 * 100.0).round() / 100.0).collect();
        assert_eq!(e, vec![-7.92, -7.30, -5.89]);
        let one = QuboProblem::new(vec![vec![-1.0]]).unwrap();
        let r = brute_force_min(&ProblemSpec::Qubo(one), 1).unwrap();
        assert_eq!((r.energy, r.argmin.to_string()), (-1.0, "1".to_string()));
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let q = QuboProblem::new(vec![vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(q.matrix()[0][1], 1.0);
        assert_eq!(q.energy(&bits("11")).unwrap(), 2.0);
    }

    #[test]
    fn ising_of_single_entry() {
        let c = 0.7;
        let ising = qubo_to_ising(&QuboProblem::new(vec![vec![c]]).unwrap());
        assert_eq!(ising.fields, vec![c / 2.0]);
        assert_eq!(ising.constant, c / 2.0);
        assert_eq!(ising.energy(&bits("0")).unwrap(), 0.0);
        assert_eq!(ising.energy(&bits("1")).unwrap(), c);
        let zero = qubo_to_ising(&QuboProblem::new(vec![vec![0.0; 3]; 3]).unwrap());
        assert!(zero.couplings.is_empty() && zero.constant == 0.0 && zero.fields.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn mobius_examples() {
        let p = MobiusProblem::new(8, 0.5, -0.2).unwrap();
        assert!((p.energy_spins(&[1; 8]).unwrap() + 3.2).abs() < 1e-12);
        assert!((p.analytic_min().unwrap() + 3.2).abs() < 1e-12);
        assert_eq!(MobiusProblem::new(8, 1.0, 0.0).unwrap().analytic_min().unwrap(), -8.0);
        assert!((MobiusProblem::new(70, 0.5, -0.2).unwrap().analytic_min().unwrap() + 40.0).abs() < 1e-12);
        assert!(matches!(MobiusProblem::new(8, 0.0, 0.1).unwrap().analytic_min(), Err(Error::OutOfValidity(_))));
        assert!(MobiusProblem::new(7, 1.0, 0.0).is_err());
        assert!(p.energy_spins(&[1, 0, 1, 1, 1, 1, 1, 1]).is_err());
        assert_eq!(MobiusProblem::new(6, 0.0, 0.0).unwrap().energy(&bits("101100")).unwrap(), 0.0);
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(binary_encode_weights(&bits("000000"), 3, 2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(binary_encode_weights(&bits("101"), 1, 3).unwrap(), vec![1.0, 0.0, 1.0]);
        assert_eq!(binary_encode_weights(&bits("111000"), 3, 2).unwrap(), vec![1.0, 0.0]);
        assert!(binary_encode_weights(&bits("11"), 3, 1).is_err());
        assert_eq!(normalized_subspace_count(20, 3).unwrap(), 657_800);
    }

    #[test]
    fn portfolio_energies() {
        let p = PortfolioProblem::new(
            vec![0.1, 0.2],
            vec![vec![0.04, 0.0], vec![0.0, 0.09]],
            1.0,
            1,
            PortfolioApproach::PenaltyQubo,
        )
        .unwrap()
        .with_penalties(1e3, 1e3);
        assert_eq!(p.energy_penalty(&[0.0, 0.0]), 1e3);
        let w = [0.3, 0.9];
        let decomposition = p.energy_penalty(&w) - p.markowitz_energy(&w) - 1e3 * (1.2f64 - 1.0).powi(2);
        assert!(decomposition.abs() < 1e-9);
        let n = p.clone();
        assert_eq!(n.energy_normalized(&[0.0, 0.0]), 1e3);
        assert!((n.energy_normalized(&[0.25, 0.75]) - n.markowitz_energy(&[0.25, 0.75])).abs() < 1e-15);
        assert!((n.energy_normalized(&[0.5, 1.5]) - n.energy_normalized(&[0.25, 0.75])).abs() < 1e-15);
        assert!(PortfolioProblem::new(vec![0.1], vec![vec![-1.0]], 1.0, 1, PortfolioApproach::Normalized).is_err());
    }

    #[test]
    fn returns_from_prices() {
        let s = portfolio_returns_from_prices(vec!["A".into()], &[vec![100.0], vec![110.0]]).unwrap();
        assert!((s.mu[0] - 250.0 * 1.1f64.ln()).abs() < 1e-12);
        let flat = portfolio_returns_from_prices(vec!["A".into()], &vec![vec![5.0]; 10]).unwrap();
        assert_eq!((flat.mu[0], flat.sigma[0][0]), (0.0, 0.0));
        let text = "date,A,B\n2020-01-01,1,2\n2020-01-02,1.1,-2\n";
        let err = read_prices_csv(text.as_bytes(), "p.csv").unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        let missing = "date,A,B\n2020-01-01,1,2\n2020-01-02,,2\n";
        assert!(read_prices_csv(missing.as_bytes(), "p.csv").is_err());
    }

    #[test]
    fn random_portfolios_are_normalized() {
        let r = random_portfolios(5, 100, 3);
        assert!(r.iter().all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-12 && w.iter().all(|&v| v >= 0.0)));
        assert_eq!(r, random_portfolios(5, 100, 3));
    }
}
