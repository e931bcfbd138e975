//! Sign-perturbed sums: initialisation (confidence integers, random signs,
//! tie-breaking permutation) and the rank-test indicator.
//!
//! For a candidate `θ` the indicator forms `m` sums
//! `S_i(θ) = (1/n) R̄^{-1/2} Φᵀ D_i (y − Φθ)` with `D_0 = I` and `D_i` a random
//! ±1 diagonal on the first `n` rows, and accepts `θ` when `‖S_0‖²` is not
//! among the `q` largest. Under symmetric independent noise the true
//! parameter is accepted with probability exactly `1 − q/m`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::eoa::perturbed_grams;
use crate::error::{Result, SpsError};
use crate::problem::ExtendedProblem;
use crate::rng::substream;

/// Absolute tolerance under which two squared norms count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Confidence level `p = 1 − q/m` with the smallest admissible `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Confidence {
    m: u64,
    q: u64,
}

impl Confidence {
    pub const MAX_DENOMINATOR: u64 = 1_000_000;

    /// `p = numerator / denominator`, reduced to lowest terms.
    pub fn from_ratio(numerator: u64, denominator: u64) -> Result<Self> {
        let text = || format!("{numerator}/{denominator}");
        if denominator == 0 || numerator == 0 || numerator >= denominator {
            return Err(SpsError::IrrationalConfidence(text()));
        }
        let g = gcd(numerator, denominator);
        let m = denominator / g;
        if m > Self::MAX_DENOMINATOR {
            return Err(SpsError::IrrationalConfidence(text()));
        }
        Ok(Self {
            m,
            q: (denominator - numerator) / g,
        })
    }

    /// Recovers a rational from a float via continued fractions; the float
    /// must lie within 1e-12 of a fraction with denominator at most 1e6.
    pub fn from_f64(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SpsError::IrrationalConfidence(p.to_string()));
        }
        let (num, den) = best_rational(p, Self::MAX_DENOMINATOR);
        if (num as f64 / den as f64 - p).abs() > 1e-12 {
            return Err(SpsError::IrrationalConfidence(p.to_string()));
        }
        Self::from_ratio(num, den)
    }

    /// Explicit `(m, q)`; `(m, q)` need not be in lowest terms.
    pub fn from_mq(m: u64, q: u64) -> Result<Self> {
        if m < 2 || q == 0 || q >= m {
            return Err(SpsError::InvalidState(format!("need m > q >= 1, got m={m}, q={q}")));
        }
        Ok(Self { m, q })
    }

    pub fn m(&self) -> usize {
        self.m as usize
    }

    pub fn q(&self) -> usize {
        self.q as usize
    }

    pub fn p(&self) -> f64 {
        1.0 - self.q as f64 / self.m as f64
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.m - self.q, self.m)
    }
}

impl FromStr for Confidence {
    type Err = SpsError;

    /// Accepts `a/b`, an exact decimal such as `0.95`, or any float literal.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || SpsError::IrrationalConfidence(s.to_string());
        if let Some((a, b)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            return Self::from_ratio(a, b);
        }
        if let Some(frac) = s.strip_prefix("0.") {
            if !frac.is_empty() && frac.len() <= 18 && frac.bytes().all(|c| c.is_ascii_digit()) {
                let num: u64 = frac.parse().map_err(|_| bad())?;
                let den = 10u64.pow(frac.len() as u32);
                return Self::from_ratio(num, den);
            }
        }
        let p: f64 = s.parse().map_err(|_| bad())?;
        Self::from_f64(p)
    }
}

/// Accepts `{"m": .., "q": ..}`, a string such as `"0.9"` or `"9/10"`, or a number.
impl<'de> Deserialize<'de> for Confidence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Mq { m: u64, q: u64 },
            Text(String),
            Num(f64),
        }
        let parsed = match Repr::deserialize(d)? {
            Repr::Mq { m, q } => Self::from_mq(m, q),
            Repr::Text(t) => t.parse(),
            Repr::Num(p) => Self::from_f64(p),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Best rational approximation with bounded denominator (continued fractions).
fn best_rational(x: f64, max_den: u64) -> (u64, u64) {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut frac = x;
    for _ in 0..64 {
        let a = frac.floor();
        let ai = a as u64;
        let h2 = ai.saturating_mul(h1).saturating_add(h0);
        let k2 = ai.saturating_mul(k1).saturating_add(k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let rem = frac - a;
        if rem.abs() < 1e-15 || (h1 as f64 / k1 as f64 - x).abs() < 1e-15 {
            break;
        }
        frac = 1.0 / rem;
    }
    (h1, k1.max(1))
}

/// Confidence integers, the `(m−1) x n` sign matrix and the permutation `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpsState {
    confidence: Confidence,
    n: usize,
    /// Row-major, row `i−1` holds the signs of `D̃_i`.
    signs: Vec<i8>,
    pi: Vec<usize>,
    seed: u64,
    regenerable: bool,
}

/// Draw fair signs and a uniform permutation. Row `i` of the signs comes from
/// substream `i` of `seed`, the permutation from substream 0.
pub fn sps_init(p: Confidence, n: usize, seed: u64) -> Result<SpsState> {
    if n == 0 {
        return Err(SpsError::InvalidState("n must be >= 1".into()));
    }
    let m = p.m();
    let mut signs = Vec::with_capacity((m - 1) * n);
    for i in 1..m {
        let mut rng = substream(seed, i as u64);
        let mut word = 0u64;
        for t in 0..n {
            if t % 64 == 0 {
                word = rng.next_u64();
            }
            signs.push(if (word >> (t % 64)) & 1 == 1 { 1 } else { -1 });
        }
    }
    let mut pi: Vec<usize> = (0..m).collect();
    pi.shuffle(&mut substream(seed, 0));
    Ok(SpsState {
        confidence: p,
        n,
        signs,
        pi,
        seed,
        regenerable: true,
    })
}

impl SpsState {
    /// State with explicit sign rows (`m − 1` rows of length `n`) and `π`.
    pub fn from_parts(
        confidence: Confidence,
        sign_rows: Vec<Vec<i8>>,
        pi: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        let m = confidence.m();
        if sign_rows.len() != m - 1 {
            return Err(SpsError::InvalidState(format!(
                "{} sign rows for m = {m}",
                sign_rows.len()
            )));
        }
        let n = sign_rows[0].len();
        if n == 0 || sign_rows.iter().any(|r| r.len() != n) {
            return Err(SpsError::InvalidState("ragged or empty sign rows".into()));
        }
        if sign_rows.iter().flatten().any(|&s| s != 1 && s != -1) {
            return Err(SpsError::InvalidState("signs must be +1 or -1".into()));
        }
        let mut seen = vec![false; m];
        if pi.len() != m || pi.iter().any(|&k| k >= m || std::mem::replace(&mut seen[k], true)) {
            return Err(SpsError::InvalidState(format!(
                "pi is not a permutation of 0..{m}"
            )));
        }
        Ok(Self {
            confidence,
            n,
            signs: sign_rows.into_iter().flatten().collect(),
            pi,
            seed,
            regenerable: false,
        })
    }

    pub fn confidence(&self) -> Confidence {
        self.confidence
    }

    pub fn m(&self) -> usize {
        self.confidence.m()
    }

    pub fn q(&self) -> usize {
        self.confidence.q()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    /// Signs `α_{i,1..n}` of perturbation `i` (`1 <= i < m`).
    pub fn sign_row(&self, i: usize) -> Result<&[i8]> {
        if i == 0 || i >= self.m() {
            return Err(SpsError::IndexOutOfRange {
                index: i,
                bound: self.m(),
            });
        }
        Ok(&self.signs[(i - 1) * self.n..i * self.n])
    }

    /// Same state with a different permutation.
    pub fn with_pi(&self, pi: Vec<usize>) -> Result<Self> {
        let rows = (1..self.m())
            .map(|i| self.sign_row(i).map(<[i8]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(self.confidence, rows, pi, self.seed)
    }

    pub fn to_record(&self) -> SpsStateRecord {
        let explicit = !self.regenerable;
        SpsStateRecord {
            m: self.confidence.m,
            q: self.confidence.q,
            n: self.n,
            seed: self.seed,
            signs: explicit.then(|| self.signs.chunks(self.n).map(<[i8]>::to_vec).collect()),
            pi: explicit.then(|| self.pi.clone()),
        }
    }

    pub fn from_record(record: &SpsStateRecord) -> Result<Self> {
        let confidence = Confidence::from_mq(record.m, record.q)?;
        match (&record.signs, &record.pi) {
            (Some(signs), Some(pi)) => {
                Self::from_parts(confidence, signs.clone(), pi.clone(), record.seed)
            }
            (None, None) => sps_init(confidence, record.n, record.seed),
            _ => Err(SpsError::InvalidState(
                "signs and pi must both be present or both absent".into(),
            )),
        }
    }
}

/// JSON form of [`SpsState`]. Seeded states store only `(m, q, n, seed)`;
/// the signs and permutation are regenerated on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpsStateRecord {
    pub m: u64,
    pub q: u64,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<Vec<i8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<usize>>,
}

/// Diagonal of `D_i` as a length `n + d` vector: ones for `i = 0`, otherwise
/// the sign row followed by `d` ones.
pub fn sign_matrix(state: &SpsState, i: usize, d: usize) -> Result<Vec<f64>> {
    if i >= state.m() {
        return Err(SpsError::IndexOutOfRange {
            index: i,
            bound: state.m(),
        });
    }
    let mut diag = vec![1.0; state.n() + d];
    if i > 0 {
        for (slot, &s) in diag.iter_mut().zip(state.sign_row(i)?) {
            *slot = f64::from(s);
        }
    }
    Ok(diag)
}

fn check_dims(ep: &ExtendedProblem, state: &SpsState, theta: &DVector<f64>) -> Result<()> {
    if ep.n() != state.n() {
        return Err(SpsError::DimensionMismatch(format!(
            "problem has n = {}, state has n = {}",
            ep.n(),
            state.n()
        )));
    }
    if theta.len() != ep.d() {
        return Err(SpsError::DimensionMismatch(format!(
            "theta has length {}, expected {}",
            theta.len(),
            ep.d()
        )));
    }
    Ok(())
}

/// `S_i(θ) = (1/n) R̄^{-1/2} Φᵀ D_i ε(θ)` with `ε(θ) = y − Φθ`.
pub fn compute_s(
    ep: &ExtendedProblem,
    state: &SpsState,
    theta: &DVector<f64>,
    i: usize,
) -> Result<DVector<f64>> {
    check_dims(ep, state, theta)?;
    let diag = sign_matrix(state, i, ep.d())?;
    let mut eps = ep.y() - ep.phi() * theta;
    for (e, s) in eps.iter_mut().zip(&diag) {
        *e *= s;
    }
    let sum = ep.phi().tr_mul(&eps);
    Ok(ep.r_bar_inv_sqrt() * sum / ep.n() as f64)
}

/// Outcome of the rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpsDecision {
    /// `1 + #{i >= 1 : ‖S_0‖² ≻_π ‖S_i‖²}`.
    pub rank: usize,
    pub accepted: bool,
}

/// `a ≻_π b`: strictly greater, or tied within [`TIE_TOLERANCE`] and ranked
/// higher by the permutation.
fn beats(values: &[f64], pi: &[usize], a: usize, b: usize) -> bool {
    let diff = values[a] - values[b];
    if diff.abs() <= TIE_TOLERANCE {
        pi[a] > pi[b]
    } else {
        diff > 0.0
    }
}

/// Rank of `values[0]` among `values` under `≻_π`, and the acceptance flag.
pub fn rank_decision(values: &[f64], pi: &[usize], q: usize) -> SpsDecision {
    let m = values.len();
    let rank = 1 + (1..m).filter(|&i| beats(values, pi, 0, i)).count();
    SpsDecision {
        rank,
        accepted: rank <= m - q,
    }
}

/// Rank-test membership of `θ` in the exact-coverage region.
pub fn indicator(
    ep: &ExtendedProblem,
    state: &SpsState,
    theta: &DVector<f64>,
) -> Result<SpsDecision> {
    check_dims(ep, state, theta)?;
    let values = (0..state.m())
        .map(|i| compute_s(ep, state, theta, i).map(|s| s.norm_squared()))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_decision(&values, state.pi(), state.q()))
}

/// Indicator with the `Q_i`, `ψ_i` products cached, so each query costs
/// `O(m d²)` instead of `O(m n d)`. Used for grid scans.
#[derive(Debug, Clone)]
pub struct IndicatorEvaluator {
    transform: DMatrix<f64>,
    grams: Vec<(DMatrix<f64>, DVector<f64>)>,
    pi: Vec<usize>,
    q: usize,
}

impl IndicatorEvaluator {
    pub fn new(ep: &ExtendedProblem, state: &SpsState) -> Result<Self> {
        if ep.n() != state.n() {
            return Err(SpsError::DimensionMismatch(format!(
                "problem has n = {}, state has n = {}",
                ep.n(),
                state.n()
            )));
        }
        let grams = (0..state.m())
            .map(|i| perturbed_grams(ep, state, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            transform: ep.r_bar_inv_sqrt() / ep.n() as f64,
            grams,
            pi: state.pi().to_vec(),
            q: state.q(),
        })
    }

    pub fn squared_norms(&self, theta: &DVector<f64>) -> Vec<f64> {
        self.grams
            .iter()
            .map(|(q, psi)| (&self.transform * (psi - q * theta)).norm_squared())
            .collect()
    }

    pub fn evaluate(&self, theta: &DVector<f64>) -> SpsDecision {
        rank_decision(&self.squared_norms(theta), &self.pi, self.q)
    }
}
