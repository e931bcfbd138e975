//! Finite-impulse-response simulation, coverage experiments, the size table
//! and the regularisation sweep.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

use crate::bounds::{coherence, theorem2_bound, PacBoundInputs};
use crate::eoa::{boundary_polyline, build_eoa, ellipsoid_contains, ext_real, Ellipsoid, EllipsoidRecord};
use crate::error::{Result, SpsError};
use crate::linalg::lambda_min;
use crate::par::{map_indexed, ExecMode};
use crate::problem::{extend, ls_estimate, ExtendedProblem, RegressionData};
use crate::rng::{derive_seed, substream, tag};
use crate::sps::{indicator, sps_init, Confidence};

/// Samples discarded before the first regressor.
pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseKind {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Noise family plus the proxy `σ` fed to the size bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub sigma_proxy: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian { sigma },
            sigma_proxy: sigma,
        }
    }

    /// Laplace noise is not subgaussian; its standard deviation `√2·scale`
    /// stands in as the proxy.
    pub fn laplace(scale: f64) -> Self {
        Self {
            kind: NoiseKind::Laplace { scale },
            sigma_proxy: std::f64::consts::SQRT_2 * scale,
        }
    }

    /// Proxy is the standard deviation `(hi − lo)/√12`.
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            kind: NoiseKind::Uniform { lo, hi },
            sigma_proxy: (hi - lo) / 12f64.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            NoiseKind::Gaussian { sigma } => sigma >= 0.0 && sigma.is_finite(),
            NoiseKind::Laplace { scale } => scale >= 0.0 && scale.is_finite(),
            NoiseKind::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
        };
        if !ok || !(self.sigma_proxy > 0.0) || !self.sigma_proxy.is_finite() {
            return Err(SpsError::Config(format!("invalid noise model {self:?}")));
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian { sigma } => sigma * sigma,
            NoiseKind::Laplace { scale } => 2.0 * scale * scale,
            NoiseKind::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseKind::Laplace { scale } => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                scale * (a - b)
            }
            NoiseKind::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// `n` i.i.d. draws from `model`.
pub fn sample_noise(model: &NoiseModel, n: usize, seed: u64) -> Result<DVector<f64>> {
    model.validate()?;
    let mut rng = substream(seed, tag::NOISE);
    Ok(DVector::from_fn(n, |_, _| model.draw(&mut rng)))
}

/// `Y_t = b₁U_{t−1} + b₂U_{t−2} + W_t` driven by the ARMA input
/// `U_t = aU_{t−1} + c₁V_t + c₂V_{t−1} + c₃V_{t−2}`, `V_t ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirConfig {
    #[serde(default = "default_b_star")]
    pub b_star: [f64; 2],
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_c")]
    pub c: [f64; 3],
    pub n: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Debug mode: every input sample is 1.
    #[serde(default)]
    pub unit_input: bool,
}

fn default_b_star() -> [f64; 2] {
    [2.0, 2.0]
}
fn default_a() -> f64 {
    0.7
}
fn default_c() -> [f64; 3] {
    [0.9, 0.5, 0.1]
}
fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl FirConfig {
    pub fn new(n: usize, noise: NoiseModel, seed: u64) -> Self {
        Self {
            b_star: default_b_star(),
            a: default_a(),
            c: default_c(),
            n,
            noise,
            seed,
            burn_in: DEFAULT_BURN_IN,
            unit_input: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.abs() < 1.0) {
            return Err(SpsError::Config(format!("input filter unstable: |a| = {}", self.a.abs())));
        }
        if self.n < 3 {
            return Err(SpsError::Config(format!("need n >= 3, got {}", self.n)));
        }
        if self.b_star.iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(SpsError::Config("non-finite FIR coefficients".into()));
        }
        self.noise.validate()
    }

    /// Stationary variance of `U` under the ARMA recursion.
    pub fn stationary_input_variance(&self) -> f64 {
        let [c1, c2, c3] = self.c;
        let psi0 = c1;
        let psi1 = self.a * psi0 + c2;
        let psi2 = self.a * psi1 + c3;
        psi0 * psi0 + psi1 * psi1 + psi2 * psi2 / (1.0 - self.a * self.a)
    }
}

#[derive(Debug, Clone)]
pub struct FirSample {
    pub data: RegressionData,
    pub theta_star: DVector<f64>,
    pub realized_noise: DVector<f64>,
}

/// Inputs come from substream [`tag::INPUT`] of `config.seed`, noise from
/// [`tag::NOISE`]. The recursion starts from zeros and the first `burn_in`
/// samples are dropped.
pub fn gen_fir(config: &FirConfig) -> Result<FirSample> {
    config.validate()?;
    let n = config.n;
    let total = config.burn_in + n + 2;
    let u: Vec<f64> = if config.unit_input {
        vec![1.0; total]
    } else {
        let mut rng = substream(config.seed, tag::INPUT);
        let [c1, c2, c3] = config.c;
        let (mut u_prev, mut v1, mut v2) = (0.0, 0.0, 0.0);
        (0..total)
            .map(|_| {
                let v0: f64 = StandardNormal.sample(&mut rng);
                let u_t = config.a * u_prev + c1 * v0 + c2 * v1 + c3 * v2;
                (u_prev, v2, v1) = (u_t, v1, v0);
                u_t
            })
            .collect()
    };
    let noise = sample_noise(&config.noise, n, config.seed)?;
    // u[off + t] holds U_t for t = -1, 0, …, n; row t of the regressors is (U_t, U_{t-1})
    let off = config.burn_in + 1;
    let [b1, b2] = config.b_star;
    let regressors = DMatrix::from_fn(n, 2, |t, k| u[off + t - k]);
    let outputs = DVector::from_fn(n, |t, _| b1 * u[off + t] + b2 * u[off + t - 1] + noise[t]);
    Ok(FirSample {
        data: RegressionData::new(regressors, outputs)?,
        theta_star: DVector::from_column_slice(&config.b_star),
        realized_noise: noise,
    })
}

/// Residual variance `‖ỹ − Φ̃θ̂_LS‖² / (n − d)`.
pub fn residual_variance(data: &RegressionData) -> Result<f64> {
    let (n, d) = (data.n(), data.d());
    if n <= d {
        return Err(SpsError::InvalidData(format!("need n > d, got n={n}, d={d}")));
    }
    let theta = ls_estimate(data)?;
    let resid = data.outputs() - data.regressors() * theta;
    Ok(resid.norm_squared() / (n - d) as f64)
}

/// Classical ellipsoid: center `θ̂_LS`, shape `R̃/n`, radius `σ̂²χ²_d(p)/n`.
pub fn asymptotic_ellipsoid(data: &RegressionData, p: f64) -> Result<Ellipsoid> {
    asymptotic_ellipsoid_with_variance(data, p, residual_variance(data)?)
}

pub fn asymptotic_ellipsoid_with_variance(data: &RegressionData, p: f64, sigma2: f64) -> Result<Ellipsoid> {
    let (n, d) = (data.n(), data.d());
    if !(p > 0.0 && p < 1.0) {
        return Err(SpsError::DomainError(format!("p must lie in (0, 1), got {p}")));
    }
    if n <= d {
        return Err(SpsError::InvalidData(format!("need n > d, got n={n}, d={d}")));
    }
    let center = ls_estimate(data)?;
    let chi2 = ChiSquared::new(d as f64)
        .map_err(|e| SpsError::NumericalFailure(e.to_string()))?
        .inverse_cdf(p);
    Ok(Ellipsoid {
        center,
        shape: data.gram() / n as f64,
        radius_sq: sigma2 * chi2 / n as f64,
    })
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Two-sided Clopper–Pearson interval at level `level`; `[0, 1]` below two trials.
pub fn clopper_pearson(hits: usize, trials: usize, level: f64) -> [f64; 2] {
    if trials < 2 {
        return [0.0, 1.0];
    }
    let alpha = 1.0 - level;
    let (k, n) = (hits as f64, trials as f64);
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).map_or(0.0, |b| b.inverse_cdf(alpha / 2.0))
    };
    let hi = if hits == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).map_or(1.0, |b| b.inverse_cdf(1.0 - alpha / 2.0))
    };
    [lo, hi]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Indicator,
    RrEoa,
    LsEoa,
    Asymptotic,
}

/// One coverage run over the FIR system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageScenario {
    pub region: RegionKind,
    pub p: Confidence,
    pub n: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub noise: NoiseModel,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_lambda() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub coverage: f64,
    /// 99% Clopper–Pearson interval.
    pub ci: [f64; 2],
    pub hits: usize,
    pub trials: usize,
}

/// Seeds of trial `k`: the data realization and the perturbation state.
fn trial_seeds(seed: u64, k: u64) -> (u64, u64) {
    let t = derive_seed(seed, tag::TRIAL, k);
    (t, derive_seed(t, tag::SPS, 0))
}

fn covers(sc: &CoverageScenario, k: usize) -> Result<bool> {
    let (data_seed, sps_seed) = trial_seeds(sc.seed, k as u64);
    let fir = gen_fir(&FirConfig::new(sc.n, sc.noise, data_seed))?;
    let theta = &fir.theta_star;
    match sc.region {
        RegionKind::Asymptotic => ellipsoid_contains(&asymptotic_ellipsoid(&fir.data, sc.p.p())?, theta),
        kind => {
            let state = sps_init(sc.p, sc.n, sps_seed)?;
            match kind {
                RegionKind::Indicator => {
                    let ep = extend(&fir.data, sc.lambda)?;
                    Ok(indicator(&ep, &state, theta)?.accepted)
                }
                RegionKind::RrEoa => {
                    let ep = extend(&fir.data, sc.lambda)?;
                    ellipsoid_contains(&build_eoa(&ep, &state)?, theta)
                }
                _ => {
                    let ep = ExtendedProblem::unregularized(&fir.data)?;
                    ellipsoid_contains(&build_eoa(&ep, &state)?, theta)
                }
            }
        }
    }
}

/// Fraction of trials whose region contains `θ*`.
pub fn coverage_experiment(sc: &CoverageScenario, mode: ExecMode) -> Result<CoverageResult> {
    if sc.trials == 0 {
        return Err(SpsError::Config("trials must be >= 1".into()));
    }
    if sc.region != RegionKind::LsEoa && !(sc.lambda > 0.0) {
        return Err(SpsError::NonPositiveLambda(sc.lambda));
    }
    let outcomes = map_indexed(mode, sc.trials, |k| covers(sc, k));
    let mut hits = 0;
    for o in outcomes {
        hits += usize::from(o?);
    }
    Ok(CoverageResult {
        coverage: hits as f64 / sc.trials as f64,
        ci: clopper_pearson(hits, sc.trials, 0.99),
        hits,
        trials: sc.trials,
    })
}

/// How the per-seed `κ` and `λ_min(R̃)` are combined into the headline
/// theoretical columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundAggregation {
    /// Largest `κ` and smallest `λ_min(R̃)` over the seeds at each `n`.
    #[default]
    Ensemble,
    /// Median of the per-seed bounds.
    SeedMedian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub n_grid: Vec<usize>,
    pub lambda: f64,
    /// Seeds per grid point.
    pub trials: usize,
    pub delta: f64,
    pub p: Confidence,
    pub noise: NoiseModel,
    pub seed: u64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Norm bound on `θ*`; defaults to `‖b*‖`.
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default)]
    pub aggregation: BoundAggregation,
}

fn default_rho() -> f64 {
    1.0
}

impl TableConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 3) {
            return Err(SpsError::Config("n_grid must be non-empty with every n >= 3".into()));
        }
        if self.trials == 0 {
            return Err(SpsError::Config("trials must be >= 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(SpsError::NonPositiveLambda(self.lambda));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SpsError::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(SpsError::Config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        self.noise.validate()
    }

    fn ell(&self) -> f64 {
        self.ell
            .unwrap_or_else(|| default_b_star().iter().map(|b| b * b).sum::<f64>().sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TrialSizes {
    rr: f64,
    ls: f64,
    asymptotic: f64,
    kappa: f64,
    lambda_min_r_tilde: f64,
}

fn size_trial(cfg: &TableConfig, n: usize, k: usize) -> Result<TrialSizes> {
    let (data_seed, sps_seed) = trial_seeds(derive_seed(cfg.seed, tag::SIZE, n as u64), k as u64);
    let fir = gen_fir(&FirConfig::new(n, cfg.noise, data_seed))?;
    let state = sps_init(cfg.p, n, sps_seed)?;
    let rr = build_eoa(&extend(&fir.data, cfg.lambda)?, &state)?.radius_sq;
    let ls = build_eoa(&ExtendedProblem::unregularized(&fir.data)?, &state)?.radius_sq;
    let asymptotic = asymptotic_ellipsoid(&fir.data, cfg.p.p())?.radius_sq;
    Ok(TrialSizes {
        rr,
        ls,
        asymptotic,
        kappa: coherence(fir.data.regressors(), cfg.rho)?.kappa_empirical,
        lambda_min_r_tilde: lambda_min(&fir.data.gram())?,
    })
}

/// One grid point of the size table. Theoretical entries that fall below
/// the minimum sample size are `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: usize,
    #[serde(with = "ext_real")]
    pub emp_sps_eoa: f64,
    #[serde(with = "ext_real")]
    pub emp_rr_sps_eoa: f64,
    #[serde(with = "ext_real")]
    pub th_sps_eoa: f64,
    #[serde(with = "ext_real")]
    pub th_rr_sps_eoa: f64,
    pub emp_asymptotic: f64,
    /// `κ` and `λ_min(R̃)` behind the `th_*` columns.
    pub kappa: f64,
    pub lambda_min_r_tilde: f64,
    pub kappa_median: f64,
    pub lambda_min_r_tilde_median: f64,
    #[serde(with = "ext_real")]
    pub th_sps_eoa_seed_median: f64,
    #[serde(with = "ext_real")]
    pub th_rr_sps_eoa_seed_median: f64,
    /// Seeds whose RR / LS ellipsoid was unbounded.
    pub unbounded_rr: usize,
    pub unbounded_ls: usize,
}

impl TableRow {
    const HEADER: [&'static str; 14] = [
        "n",
        "emp_sps_eoa",
        "emp_rr_sps_eoa",
        "th_sps_eoa",
        "th_rr_sps_eoa",
        "emp_asymptotic",
        "kappa",
        "lambda_min_r_tilde",
        "kappa_median",
        "lambda_min_r_tilde_median",
        "th_sps_eoa_seed_median",
        "th_rr_sps_eoa_seed_median",
        "unbounded_rr",
        "unbounded_ls",
    ];

    fn record(&self) -> Vec<String> {
        let f = ext_real::format;
        vec![
            self.n.to_string(),
            f(self.emp_sps_eoa),
            f(self.emp_rr_sps_eoa),
            f(self.th_sps_eoa),
            f(self.th_rr_sps_eoa),
            f(self.emp_asymptotic),
            f(self.kappa),
            f(self.lambda_min_r_tilde),
            f(self.kappa_median),
            f(self.lambda_min_r_tilde_median),
            f(self.th_sps_eoa_seed_median),
            f(self.th_rr_sps_eoa_seed_median),
            self.unbounded_rr.to_string(),
            self.unbounded_ls.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: TableConfig,
    pub m: usize,
    pub q: usize,
    pub sigma_proxy: f64,
    pub ell: f64,
    pub rows: Vec<TableRow>,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| SpsError::Io(e.into());
        out.write_record(TableRow::HEADER).map_err(io)?;
        for row in &self.rows {
            out.write_record(row.record()).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn bound_or_inf(inputs: &PacBoundInputs) -> Result<f64> {
    match theorem2_bound(inputs) {
        Ok(v) => Ok(v),
        Err(SpsError::SampleTooSmall { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Medians of the RR and LS ellipsoid radii, the classical baseline and the
/// theoretical size bound over `trials` seeds at each grid point.
pub fn size_table(cfg: &TableConfig, mode: ExecMode) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = cfg.trials;
    let grid = &cfg.n_grid;
    let all = map_indexed(mode, grid.len() * s, |j| size_trial(cfg, grid[j / s], j % s));
    let all = all.into_iter().collect::<Result<Vec<_>>>()?;
    let ell = cfg.ell();
    let (m, q) = (cfg.p.m(), cfg.p.q());

    let rows = grid
        .iter()
        .zip(all.chunks(s))
        .map(|(&n, trials)| {
            let pick = |f: fn(&TrialSizes) -> f64| trials.iter().map(f).collect::<Vec<_>>();
            let (rr, ls, asy) = (pick(|t| t.rr), pick(|t| t.ls), pick(|t| t.asymptotic));
            let kappas = pick(|t| t.kappa);
            let lmins = pick(|t| t.lambda_min_r_tilde);
            let inputs = |kappa: f64, lmin: f64| PacBoundInputs {
                n,
                d: 2,
                delta: cfg.delta,
                m,
                q,
                sigma: cfg.noise.sigma_proxy,
                lambda: cfg.lambda,
                ell,
                kappa,
                rho: cfg.rho,
                lambda_min_r_tilde: lmin,
            };
            let mut per_rr = Vec::with_capacity(s);
            let mut per_ls = Vec::with_capacity(s);
            for t in trials {
                let inp = inputs(t.kappa, t.lambda_min_r_tilde);
                per_rr.push(bound_or_inf(&inp)?);
                per_ls.push(bound_or_inf(&inp.without_regularization())?);
            }
            let (th_rr_med, th_ls_med) = (median(&per_rr), median(&per_ls));
            let k_max = kappas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let l_min = lmins.iter().copied().fold(f64::INFINITY, f64::min);
            let (kappa, lmin, th_rr, th_ls) = match cfg.aggregation {
                BoundAggregation::Ensemble => {
                    let inp = inputs(k_max, l_min);
                    (k_max, l_min, bound_or_inf(&inp)?, bound_or_inf(&inp.without_regularization())?)
                }
                BoundAggregation::SeedMedian => (median(&kappas), median(&lmins), th_rr_med, th_ls_med),
            };
            Ok(TableRow {
                n,
                emp_sps_eoa: median(&ls),
                emp_rr_sps_eoa: median(&rr),
                th_sps_eoa: th_ls,
                th_rr_sps_eoa: th_rr,
                emp_asymptotic: median(&asy),
                kappa,
                lambda_min_r_tilde: lmin,
                kappa_median: median(&kappas),
                lambda_min_r_tilde_median: median(&lmins),
                th_sps_eoa_seed_median: th_ls_med,
                th_rr_sps_eoa_seed_median: th_rr_med,
                unbounded_rr: rr.iter().filter(|v| v.is_infinite()).count(),
                unbounded_ls: ls.iter().filter(|v| v.is_infinite()).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExperimentReport {
        config: cfg.clone(),
        m,
        q,
        sigma_proxy: cfg.noise.sigma_proxy,
        ell,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub p: Confidence,
    pub noise: NoiseModel,
    pub seed: u64,
    #[serde(default = "default_polyline_points")]
    pub polyline_points: usize,
}

fn default_polyline_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub ellipsoid: EllipsoidRecord,
    /// Empty when the ellipsoid is unbounded or `d != 2`.
    pub polyline: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub theta_star: Vec<f64>,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// Columns `theta1, theta2, lambda, series_id`.
    pub fn write_polylines_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| SpsError::Io(e.into());
        out.write_record(["theta1", "theta2", "lambda", "series_id"]).map_err(io)?;
        for (id, e) in self.entries.iter().enumerate() {
            for pt in &e.polyline {
                out.write_record([
                    format!("{:?}", pt[0]),
                    format!("{:?}", pt[1]),
                    format!("{:?}", e.lambda),
                    id.to_string(),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// RR ellipsoids for every `λ` on one data realization and one perturbation state.
pub fn lambda_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.lambdas.is_empty() {
        return Err(SpsError::Config("lambdas must be non-empty".into()));
    }
    let (data_seed, sps_seed) = trial_seeds(cfg.seed, 0);
    let fir = gen_fir(&FirConfig::new(cfg.n, cfg.noise, data_seed))?;
    let state = sps_init(cfg.p, cfg.n, sps_seed)?;
    let entries = cfg
        .lambdas
        .iter()
        .map(|&lambda| {
            let e = build_eoa(&extend(&fir.data, lambda)?, &state)?;
            let polyline = if e.is_bounded() {
                boundary_polyline(&e, cfg.polyline_points)?
            } else {
                Vec::new()
            };
            Ok(SweepEntry {
                lambda,
                ellipsoid: EllipsoidRecord::from_ellipsoid(&e)?,
                polyline,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        config: cfg.clone(),
        theta_star: fir.theta_star.iter().copied().collect(),
        entries,
    })
}
