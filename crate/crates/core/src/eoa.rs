//! Ellipsoidal outer approximation of the sign-perturbed-sums region.
//!
//! With `z = R̄^{1/2}(θ − θ̂)` we have `‖S_0(θ)‖² = ‖z‖²`, and the condition
//! `‖S_0(θ)‖² <= ‖S_i(θ)‖²` becomes the quadratic constraint
//! `zᵀA_i z + 2b_iᵀz + c_i <= 0`. The largest `‖z‖²` under that constraint is
//! the value of a two-variable semidefinite program
//!
//! ```text
//! min γ  s.t.  [ -I + ξA   ξb    ]
//!              [ ξbᵀ       ξc + γ ] ⪰ 0,  ξ >= 0
//! ```
//!
//! which is solved here in closed form along the feasible ray
//! `ξ >= 1/λ_min(A)` followed by a golden-section search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::linalg::{symmetrize, SymSpectrum};
use crate::problem::{ridge_estimate, ExtendedProblem};
use crate::search::golden_section_min;
use crate::sps::SpsState;

/// `λ_min(A)` at or below this makes the program infeasible (`γ* = ∞`).
pub const UNBOUNDED_TOL: f64 = 1e-9;
/// `|ξa_k − 1|` below this counts as a zero eigenvalue of `ξA − I`.
const SINGULAR_PIVOT_TOL: f64 = 1e-12;
/// Rotated `b` components below this are taken to lie in the range.
const RANGE_TOL: f64 = 1e-10;
const SEARCH_REL_TOL: f64 = 1e-10;
const SEARCH_MAX_ITER: usize = 400;
const MAX_DOUBLINGS: usize = 200;

/// `(A_i, b_i, c_i)` together with the products `Q_i`, `ψ_i` they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpData {
    pub a_mat: DMatrix<f64>,
    pub b_vec: DVector<f64>,
    pub c_scalar: f64,
    pub q_mat: DMatrix<f64>,
    pub psi_vec: DVector<f64>,
}

impl SdpData {
    /// Program data without the originating products.
    pub fn from_abc(a_mat: DMatrix<f64>, b_vec: DVector<f64>, c_scalar: f64) -> Self {
        let d = b_vec.len();
        Self {
            a_mat,
            b_vec,
            c_scalar,
            q_mat: DMatrix::zeros(d, d),
            psi_vec: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.b_vec.len()
    }

    /// The LMI matrix at `(ξ, γ)`.
    pub fn lmi(&self, xi: f64, gamma: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d, d))
            .copy_from(&(&self.a_mat * xi - DMatrix::identity(d, d)));
        for k in 0..d {
            m[(k, d)] = xi * self.b_vec[k];
            m[(d, k)] = xi * self.b_vec[k];
        }
        m[(d, d)] = xi * self.c_scalar + gamma;
        m
    }
}

/// `Q_i = ΦᵀD_iΦ` and `ψ_i = ΦᵀD_iy`, accumulated row by row from the sign
/// vector. The `√λ I` block always carries sign +1, contributing `λI` and 0.
pub fn perturbed_grams(
    ep: &ExtendedProblem,
    state: &SpsState,
    i: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if i >= state.m() {
        return Err(SpsError::IndexOutOfRange {
            index: i,
            bound: state.m(),
        });
    }
    if i == 0 {
        return Ok((ep.r().clone(), ep.phi_t_y()));
    }
    let signs = state.sign_row(i)?;
    if signs.len() != ep.n() {
        return Err(SpsError::DimensionMismatch(format!(
            "state has n = {}, problem has n = {}",
            signs.len(),
            ep.n()
        )));
    }
    let d = ep.d();
    let x = ep.data().regressors();
    let y = ep.data().outputs();
    let mut q = DMatrix::zeros(d, d);
    let mut psi = DVector::zeros(d);
    for (t, &s) in signs.iter().enumerate() {
        let s = f64::from(s);
        for a in 0..d {
            let xa = s * x[(t, a)];
            psi[a] += xa * y[t];
            for b in a..d {
                q[(a, b)] += xa * x[(t, b)];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            q[(a, b)] = q[(b, a)];
        }
        q[(a, a)] += ep.lambda();
    }
    Ok((q, psi))
}

/// `A = I − R^{-1/2}QR^{-1}QR^{-1/2}`, `b = n^{-1/2} R^{-1/2}QR^{-1}(ψ − Qθ̂)`
/// and `c = −(ψ − Qθ̂)ᵀR^{-1}(ψ − Qθ̂)/n`, the last being the expanded
/// three-term expression collected into one quadratic form.
pub fn sdp_coefficients(
    ep: &ExtendedProblem,
    theta_hat: &DVector<f64>,
    q_mat: &DMatrix<f64>,
    psi_vec: &DVector<f64>,
) -> Result<SdpData> {
    let d = ep.d();
    let n = ep.n() as f64;
    let rih = ep.r_inv_sqrt();
    let k = symmetrize(&(rih * q_mat * rih));
    let a_mat = symmetrize(&(DMatrix::identity(d, d) - &k * &k));
    let resid = psi_vec - q_mat * theta_hat;
    let r_inv_resid = ep.solve_r(&resid)?;
    let b_vec = rih * q_mat * &r_inv_resid / n.sqrt();
    let c_scalar = -resid.dot(&r_inv_resid) / n;
    Ok(SdpData {
        a_mat,
        b_vec,
        c_scalar,
        q_mat: q_mat.clone(),
        psi_vec: psi_vec.clone(),
    })
}

/// Optimal value and minimiser of the program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSolution {
    /// `+∞` when no `ξ` makes the top-left block PSD.
    pub gamma: f64,
    pub xi: Option<f64>,
}

/// Schur-complement objective `γ(ξ) = −ξc + ξ² Σ b̃_k² / (ξa_k − 1)` in the
/// eigenbasis of `A`. Infinite where `ξA − I` is not PSD or `b` leaves its range.
fn schur_gamma(xi: f64, a: &[f64], bt: &[f64], c: f64) -> f64 {
    let mut acc = 0.0;
    for (&ak, &bk) in a.iter().zip(bt) {
        let pivot = xi * ak - 1.0;
        if pivot.abs() <= SINGULAR_PIVOT_TOL {
            if bk.abs() > RANGE_TOL {
                return f64::INFINITY;
            }
        } else if pivot < 0.0 {
            return f64::INFINITY;
        } else {
            acc += bk * bk / pivot;
        }
    }
    -xi * c + xi * xi * acc
}

pub fn solve_sdp_detailed(sdp: &SdpData) -> Result<SdpSolution> {
    let spec = SymSpectrum::new(&sdp.a_mat)?;
    let a_min = spec.min();
    if !(a_min > UNBOUNDED_TOL) {
        return Ok(SdpSolution {
            gamma: f64::INFINITY,
            xi: None,
        });
    }
    let a: Vec<f64> = spec.values.iter().copied().collect();
    let bt: Vec<f64> = spec.vectors.tr_mul(&sdp.b_vec).iter().copied().collect();
    let c = sdp.c_scalar;
    let gamma = |xi: f64| schur_gamma(xi, &a, &bt, c);

    let xi_edge = 1.0 / a_min;
    let lo = xi_edge * (1.0 + 1e-9);
    let mut hi = 2.0 * xi_edge;
    for _ in 0..MAX_DOUBLINGS {
        if gamma(2.0 * hi) >= gamma(hi) {
            break;
        }
        hi *= 2.0;
    }
    hi *= 2.0;
    let (mut xi, mut best) = golden_section_min(gamma, lo, hi, SEARCH_REL_TOL, SEARCH_MAX_ITER);
    // the ray's end point is feasible when b has no component on the null directions
    let edge = gamma(xi_edge);
    if edge < best {
        (xi, best) = (xi_edge, edge);
    }
    if !best.is_finite() {
        return Err(SpsError::NumericalFailure(
            "no finite objective value on the feasible ray".into(),
        ));
    }
    Ok(SdpSolution {
        gamma: best,
        xi: Some(xi),
    })
}

/// Optimal `γ*`, `+∞` for an unbounded region.
pub fn solve_sdp(sdp: &SdpData) -> Result<f64> {
    Ok(solve_sdp_detailed(sdp)?.gamma)
}

/// The `q`-th largest value, `+∞` ranking above every finite value.
pub fn eoa_radius(gammas: &[f64], q: usize) -> Result<f64> {
    if q == 0 || q > gammas.len() {
        return Err(SpsError::IndexOutOfRange {
            index: q,
            bound: gammas.len() + 1,
        });
    }
    let mut sorted = gammas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[q - 1])
}

/// Ellipsoid `{θ : (θ − center)ᵀ shape (θ − center) <= radius_sq}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub radius_sq: f64,
}

/// Principal axes and volume of a bounded ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidGeometry {
    /// Semi-axis lengths, one per eigenvector of the shape (ascending eigenvalue).
    pub semi_axes: Vec<f64>,
    /// Row-major `d x d`; column `k` is the direction of `semi_axes[k]`.
    pub orientation: Vec<f64>,
    pub volume: f64,
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.radius_sq.is_finite()
    }

    /// `(θ − center)ᵀ shape (θ − center)`.
    pub fn mahalanobis_sq(&self, theta: &DVector<f64>) -> f64 {
        let diff = theta - &self.center;
        diff.dot(&(&self.shape * &diff))
    }
}

pub fn ellipsoid_contains(e: &Ellipsoid, theta: &DVector<f64>) -> Result<bool> {
    if theta.len() != e.dim() {
        return Err(SpsError::DimensionMismatch(format!(
            "theta has length {}, ellipsoid dimension is {}",
            theta.len(),
            e.dim()
        )));
    }
    Ok(e.radius_sq == f64::INFINITY || e.mahalanobis_sq(theta) <= e.radius_sq)
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h + 1.0)
}

pub fn ellipsoid_geometry(e: &Ellipsoid) -> Result<EllipsoidGeometry> {
    if !e.is_bounded() {
        return Err(SpsError::InfiniteRegion);
    }
    let spec = SymSpectrum::new(&e.shape)?;
    let semi_axes: Vec<f64> = spec
        .values
        .iter()
        .map(|&v| (e.radius_sq / v).sqrt())
        .collect();
    let d = e.dim();
    let orientation = (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .map(|(r, c)| spec.vectors[(r, c)])
        .collect();
    let volume = unit_ball_volume(d) * semi_axes.iter().product::<f64>();
    Ok(EllipsoidGeometry {
        semi_axes,
        orientation,
        volume,
    })
}

/// `points` samples of the boundary of a bounded two-dimensional ellipsoid.
pub fn boundary_polyline(e: &Ellipsoid, points: usize) -> Result<Vec<[f64; 2]>> {
    if e.dim() != 2 {
        return Err(SpsError::DimensionMismatch(
            "boundary polylines are only defined for d = 2".into(),
        ));
    }
    let geo = ellipsoid_geometry(e)?;
    let u = [geo.orientation[0], geo.orientation[2]];
    let v = [geo.orientation[1], geo.orientation[3]];
    Ok((0..points)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
            let (a, b) = (geo.semi_axes[0] * t.cos(), geo.semi_axes[1] * t.sin());
            [
                e.center[0] + a * u[0] + b * v[0],
                e.center[1] + a * u[1] + b * v[1],
            ]
        })
        .collect())
}

/// Ellipsoid together with the per-perturbation optimal values.
#[derive(Debug, Clone)]
pub struct EoaResult {
    pub ellipsoid: Ellipsoid,
    pub gammas: Vec<f64>,
}

/// Center `θ̂`, shape `R̄`, radius the `q`-th largest of `γ_1*, …, γ_{m−1}*`.
pub fn build_eoa(ep: &ExtendedProblem, state: &SpsState) -> Result<Ellipsoid> {
    Ok(build_eoa_detailed(ep, state)?.ellipsoid)
}

pub fn build_eoa_detailed(ep: &ExtendedProblem, state: &SpsState) -> Result<EoaResult> {
    if state.m() < 2 {
        return Err(SpsError::InvalidState("need m >= 2".into()));
    }
    if state.n() != ep.n() {
        return Err(SpsError::DimensionMismatch(format!(
            "state has n = {}, problem has n = {}",
            state.n(),
            ep.n()
        )));
    }
    let theta_hat = ridge_estimate(ep)?;
    let gammas = (1..state.m())
        .map(|i| {
            let (q, psi) = perturbed_grams(ep, state, i)?;
            solve_sdp(&sdp_coefficients(ep, &theta_hat, &q, &psi)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let radius_sq = eoa_radius(&gammas, state.q())?;
    Ok(EoaResult {
        ellipsoid: Ellipsoid {
            center: theta_hat,
            shape: ep.r_bar().clone(),
            radius_sq,
        },
        gammas,
    })
}

/// `+∞` is written as the string `"inf"`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {t:?}"))),
        }
    }

    pub fn format(v: f64) -> String {
        if v == f64::INFINITY {
            "inf".into()
        } else {
            format!("{v:?}")
        }
    }
}

/// JSON view of an [`Ellipsoid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidRecord {
    pub dim: usize,
    pub center: Vec<f64>,
    /// Row-major.
    pub shape: Vec<f64>,
    #[serde(with = "ext_real")]
    pub radius_sq: f64,
    /// `"bounded"` or `"unbounded"`.
    pub status: String,
    pub geometry: Option<EllipsoidGeometry>,
}

impl EllipsoidRecord {
    pub fn from_ellipsoid(e: &Ellipsoid) -> Result<Self> {
        let d = e.dim();
        let geometry = if e.is_bounded() {
            Some(ellipsoid_geometry(e)?)
        } else {
            None
        };
        Ok(Self {
            dim: d,
            center: e.center.iter().copied().collect(),
            shape: (0..d)
                .flat_map(|r| (0..d).map(move |c| (r, c)))
                .map(|rc| e.shape[rc])
                .collect(),
            radius_sq: e.radius_sq,
            status: if e.is_bounded() { "bounded" } else { "unbounded" }.into(),
            geometry,
        })
    }

    pub fn to_ellipsoid(&self) -> Ellipsoid {
        Ellipsoid {
            center: DVector::from_vec(self.center.clone()),
            shape: DMatrix::from_row_slice(self.dim, self.dim, &self.shape),
            radius_sq: self.radius_sq,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{extend, RegressionData};
    use crate::sps::{indicator, sps_init, Confidence};
    use approx::assert_relative_eq;

    fn random_problem(n: usize, d: usize, lambda: f64, salt: u64) -> ExtendedProblem {
        use rand::Rng;
        let mut rng = crate::rng::substream(salt, 77);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        extend(&RegressionData::from_rows(&rows, &y).unwrap(), lambda).unwrap()
    }

    fn forced_state(rows: Vec<Vec<i8>>) -> SpsState {
        let m = rows.len() as u64 + 1;
        SpsState::from_parts(Confidence::from_mq(m, 1).unwrap(), rows, (0..m as usize).collect(), 0)
            .unwrap()
    }

    #[test]
    fn grams_identity_and_negation() {
        let ep = random_problem(7, 2, 0.6, 1);
        let state = forced_state(vec![vec![-1; 7]]);
        let (q0, psi0) = perturbed_grams(&ep, &state, 0).unwrap();
        assert_eq!(&q0, ep.r());
        assert_relative_eq!(psi0, ep.phi().tr_mul(ep.y()), epsilon = 1e-12);
        let (q1, psi1) = perturbed_grams(&ep, &state, 1).unwrap();
        let expected = -ep.r_tilde() + DMatrix::identity(2, 2) * 0.6;
        assert_relative_eq!(q1, expected, epsilon = 1e-12);
        assert_relative_eq!(psi1, -ep.phi_t_y(), epsilon = 1e-12);
        assert!(perturbed_grams(&ep, &state, 2).is_err());
    }

    #[test]
    fn grams_scalar_example_vs_dense_oracle() {
        let data = RegressionData::from_rows(&[vec![1.0], vec![1.0]], &[1.0, -1.0]).unwrap();
        let ep = extend(&data, 1.0).unwrap();
        let state = forced_state(vec![vec![1, -1]]);
        let (q, psi) = perturbed_grams(&ep, &state, 1).unwrap();
        assert_eq!(q[(0, 0)], 1.0);
        let dense_d = DMatrix::from_diagonal(&DVector::from_vec(
            crate::sps::sign_matrix(&state, 1, 1).unwrap(),
        ));
        assert_relative_eq!(q, ep.phi().transpose() * &dense_d * ep.phi(), epsilon = 1e-14);
        assert_relative_eq!(psi, ep.phi().transpose() * &dense_d * ep.y(), epsilon = 1e-14);
    }

    #[test]
    fn identity_perturbation_gives_zero_program() {
        let ep = random_problem(9, 2, 1.5, 2);
        let th = ridge_estimate(&ep).unwrap();
        let sdp = sdp_coefficients(&ep, &th, ep.r(), &ep.phi_t_y()).unwrap();
        assert!(sdp.a_mat.norm() < 1e-12);
        assert!(sdp.b_vec.norm() < 1e-12);
        assert!(sdp.c_scalar.abs() < 1e-12);
        assert_eq!(solve_sdp(&sdp).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_q_structure() {
        let ep = random_problem(6, 2, 0.9, 3);
        let th = ridge_estimate(&ep).unwrap();
        let psi = DVector::from_vec(vec![0.7, -1.1]);
        let sdp = sdp_coefficients(&ep, &th, &DMatrix::zeros(2, 2), &psi).unwrap();
        assert_relative_eq!(sdp.a_mat, DMatrix::identity(2, 2), epsilon = 1e-15);
        assert_eq!(sdp.b_vec, DVector::zeros(2));
        let expected_c = -psi.dot(&ep.r().clone().try_inverse().unwrap().mul(&psi)) / 6.0;
        assert_relative_eq!(sdp.c_scalar, expected_c, epsilon = 1e-12);
        assert!(sdp.c_scalar <= 0.0);
    }

    use std::ops::Mul;

    #[test]
    fn coefficients_match_dense_oracle() {
        for (salt, d) in [(10u64, 2usize), (11, 2), (12, 3), (13, 1)] {
            let n = 12;
            let ep = random_problem(n, d, 0.7, salt);
            let state = sps_init(Confidence::from_mq(4, 1).unwrap(), n, salt).unwrap();
            let th = ridge_estimate(&ep).unwrap();
            for i in 1..4 {
                let (q, psi) = perturbed_grams(&ep, &state, i).unwrap();
                let sdp = sdp_coefficients(&ep, &th, &q, &psi).unwrap();

                // oracle: dense (n+d)x(n+d) sign matrix, explicit inverse, expanded c
                let dmat = DMatrix::from_diagonal(&DVector::from_vec(
                    crate::sps::sign_matrix(&state, i, d).unwrap(),
                ));
                let qo = ep.phi().transpose() * &dmat * ep.phi();
                let po = ep.phi().transpose() * &dmat * ep.y();
                let eig = ep.r().clone().symmetric_eigen();
                let rih = &eig.eigenvectors
                    * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.powf(-0.5)))
                    * eig.eigenvectors.transpose();
                let ri = ep.r().clone().try_inverse().unwrap();
                let a = DMatrix::identity(d, d) - &rih * &qo * &ri * &qo * &rih;
                let b = &rih * &qo * &ri * (&po - &qo * &th) / (n as f64).sqrt();
                let c = (-(po.transpose() * &ri * &po)[(0, 0)]
                    + 2.0 * (th.transpose() * &qo * &ri * &po)[(0, 0)]
                    - (th.transpose() * &qo * &ri * &qo * &th)[(0, 0)])
                    / n as f64;
                assert_relative_eq!(sdp.a_mat, a, epsilon = 1e-9);
                assert_relative_eq!(sdp.b_vec, b, epsilon = 1e-9);
                assert_relative_eq!(sdp.c_scalar, c, epsilon = 1e-9);
                // invariants: symmetric, A ⪯ I
                assert!((&sdp.a_mat - sdp.a_mat.transpose()).norm() < 1e-10);
                assert!(SymSpectrum::new(&sdp.a_mat).unwrap().max() <= 1.0 + 1e-8);
            }
        }
    }

    #[test]
    fn solver_closed_form_cases() {
        let sdp = SdpData::from_abc(DMatrix::zeros(2, 2), DVector::zeros(2), 0.0);
        assert_eq!(solve_sdp(&sdp).unwrap(), f64::INFINITY);

        let sdp = SdpData::from_abc(DMatrix::identity(2, 2), DVector::zeros(2), 0.0);
        assert_eq!(solve_sdp(&sdp).unwrap(), 0.0);

        for beta in [0.3, 1.0, 2.5] {
            let sdp = SdpData::from_abc(
                DMatrix::from_element(1, 1, 2.0),
                DVector::from_element(1, beta),
                0.0,
            );
            let sol = solve_sdp_detailed(&sdp).unwrap();
            assert_relative_eq!(sol.gamma, beta * beta, max_relative = 1e-12);
            assert_relative_eq!(sol.xi.unwrap(), 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn closed_form_cross_checked_by_dense_grid() {
        // γ(ξ) = ξ²β²/(2ξ − 1) on a 10⁶-point grid over [0.5 + 1e-6, 50]
        let beta: f64 = 1.7;
        let (lo, hi, count) = (0.5 + 1e-6, 50.0, 1_000_000);
        let grid_min = (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .map(|x| x * x * beta * beta / (2.0 * x - 1.0))
            .fold(f64::INFINITY, f64::min);
        let sdp = SdpData::from_abc(
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, beta),
            0.0,
        );
        let gamma = solve_sdp(&sdp).unwrap();
        assert!(gamma <= grid_min + 1e-12);
        assert_relative_eq!(gamma, grid_min, max_relative = 1e-9);
    }

    #[test]
    fn negative_c_with_zero_b_sits_on_ray_edge() {
        let sdp = SdpData::from_abc(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.8]),
            DVector::zeros(2),
            -0.3,
        );
        // γ(ξ) = 0.3ξ, minimised at ξ = 1/0.5
        assert_relative_eq!(solve_sdp(&sdp).unwrap(), 0.6, max_relative = 1e-12);
    }

    #[test]
    fn radius_selection() {
        assert_eq!(eoa_radius(&[5.0, 1.0, 3.0], 1).unwrap(), 5.0);
        assert_eq!(eoa_radius(&[f64::INFINITY, 1.0, 3.0], 2).unwrap(), 3.0);
        assert_eq!(eoa_radius(&[f64::INFINITY, 1.0, 3.0], 1).unwrap(), f64::INFINITY);
        assert_eq!(eoa_radius(&[2.0, 2.0, 2.0], 2).unwrap(), 2.0);
        assert!(eoa_radius(&[1.0], 2).is_err());
        assert!(eoa_radius(&[1.0], 0).is_err());
    }

    #[test]
    fn identity_rows_give_unbounded_eoa() {
        let ep = random_problem(10, 2, 1.0, 4);
        let state = forced_state(vec![vec![1; 10]]);
        let e = build_eoa(&ep, &state).unwrap();
        assert_eq!(e.radius_sq, f64::INFINITY);
        assert!(ellipsoid_contains(&e, &DVector::from_vec(vec![1e9, -1e9])).unwrap());
        assert!(matches!(ellipsoid_geometry(&e), Err(SpsError::InfiniteRegion)));
        // the indicator region is all of R^d: every θ ties with S_0 and π = identity accepts
        for t in [-50.0, 0.0, 3.0] {
            let th = DVector::from_vec(vec![t, -t]);
            assert!(indicator(&ep, &state, &th).unwrap().accepted);
        }
    }

    #[test]
    fn scalar_radius_matches_grid_supremum() {
        let data = RegressionData::from_rows(
            &[vec![1.0], vec![0.4], vec![-1.3], vec![0.8]],
            &[0.9, 0.1, -2.0, 1.4],
        )
        .unwrap();
        let ep = extend(&data, 0.5).unwrap();
        let state = forced_state(vec![vec![1, -1, 1, -1]]);
        let e = build_eoa(&ep, &state).unwrap();
        assert!(e.is_bounded());
        let th = &e.center;
        let rbar = ep.r_bar()[(0, 0)];
        // oracle: dense grid of the indicator over θ̂ ± W, W = 10 x (scale of the data)
        let width = 10.0 * (1.0 + e.radius_sq.sqrt() / rbar.sqrt());
        let count = 400_001;
        let mut sup: f64 = 0.0;
        for k in 0..count {
            let t = th[0] - width + 2.0 * width * k as f64 / (count - 1) as f64;
            let theta = DVector::from_element(1, t);
            if indicator(&ep, &state, &theta).unwrap().accepted {
                sup = sup.max(rbar * (t - th[0]).powi(2));
            }
        }
        assert!(sup <= e.radius_sq * (1.0 + 1e-9));
        assert!(sup >= 0.95 * e.radius_sq, "sup {sup} vs r {}", e.radius_sq);
    }

    #[test]
    fn contains_examples() {
        let e = Ellipsoid {
            center: DVector::zeros(1),
            shape: DMatrix::from_element(1, 1, 2.0),
            radius_sq: 8.0,
        };
        assert!(ellipsoid_contains(&e, &DVector::from_element(1, 0.0)).unwrap());
        assert!(ellipsoid_contains(&e, &DVector::from_element(1, 2.0)).unwrap());
        assert!(!ellipsoid_contains(&e, &DVector::from_element(1, 2.01)).unwrap());
        assert!(ellipsoid_contains(&e, &DVector::zeros(2)).is_err());
        let inf = Ellipsoid {
            radius_sq: f64::INFINITY,
            ..e
        };
        assert!(ellipsoid_contains(&inf, &DVector::from_element(1, 1e300)).unwrap());
    }

    #[test]
    fn geometry_examples() {
        let circle = Ellipsoid {
            center: DVector::zeros(2),
            shape: DMatrix::identity(2, 2),
            radius_sq: 4.0,
        };
        let g = ellipsoid_geometry(&circle).unwrap();
        assert_relative_eq!(g.semi_axes[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(g.semi_axes[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(g.volume, 4.0 * std::f64::consts::PI, epsilon = 1e-12);

        let diag = Ellipsoid {
            shape: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]),
            ..circle
        };
        let g = ellipsoid_geometry(&diag).unwrap();
        assert_relative_eq!(g.semi_axes[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(g.semi_axes[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(unit_ball_volume(3), 4.0 / 3.0 * std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn volume_matches_rejection_sampling() {
        use rand::Rng;
        let e = Ellipsoid {
            center: DVector::from_vec(vec![0.5, -1.0]),
            shape: DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, 1.1]),
            radius_sq: 1.3,
        };
        let g = ellipsoid_geometry(&e).unwrap();
        let half = g.semi_axes.iter().cloned().fold(0.0, f64::max);
        let box_vol = (2.0 * half).powi(2);
        let mut rng = crate::rng::substream(5, 5);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| {
                let th = DVector::from_vec(vec![
                    e.center[0] + rng.random_range(-half..half),
                    e.center[1] + rng.random_range(-half..half),
                ]);
                ellipsoid_contains(&e, &th).unwrap()
            })
            .count() as f64;
        let frac = hits / trials as f64;
        let se = box_vol * (frac * (1.0 - frac) / trials as f64).sqrt();
        assert!((box_vol * frac - g.volume).abs() <= 3.0 * se, "{} vs {}", box_vol * frac, g.volume);
    }

    #[test]
    fn polyline_lies_on_boundary() {
        let e = Ellipsoid {
            center: DVector::from_vec(vec![2.0, 2.0]),
            shape: DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]),
            radius_sq: 0.04,
        };
        let pts = boundary_polyline(&e, 360).unwrap();
        assert_eq!(pts.len(), 360);
        for p in pts {
            let m = e.mahalanobis_sq(&DVector::from_vec(p.to_vec()));
            assert_relative_eq!(m, 0.04, max_relative = 1e-10);
        }
    }

    #[test]
    fn record_json_uses_inf_sentinel() {
        let e = Ellipsoid {
            center: DVector::zeros(2),
            shape: DMatrix::identity(2, 2),
            radius_sq: f64::INFINITY,
        };
        let rec = EllipsoidRecord::from_ellipsoid(&e).unwrap();
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"radius_sq\":\"inf\""), "{json}");
        assert!(json.contains("unbounded"));
        let back: EllipsoidRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_ellipsoid(), e);
    }
}
