//! Linear regression data, the ridge extension and the two point estimates.
//!
//! Ridge regression with parameter `λ > 0` is ordinary least squares on the
//! stacked system `Φ = [Φ̃; √λ I]`, `y = [ỹ; 0]`. Everything downstream (sign
//! perturbations, SDP coefficients) works on the stacked system, while the
//! normalisation `R̄ = R / n` always uses the original sample count.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SpsError};
use crate::linalg::{spd_solve, SymSpectrum};

/// Relative eigenvalue floor under which `R̃` counts as singular.
const SINGULAR_GRAM_RTOL: f64 = 1e-10;

/// Regressor matrix `Φ̃` (n x d, one row per sample) and outputs `ỹ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    regressors: DMatrix<f64>,
    outputs: DVector<f64>,
}

impl RegressionData {
    pub fn new(regressors: DMatrix<f64>, outputs: DVector<f64>) -> Result<Self> {
        if regressors.nrows() == 0 || regressors.ncols() == 0 {
            return Err(SpsError::InvalidData("need n >= 1 and d >= 1".into()));
        }
        if outputs.len() != regressors.nrows() {
            return Err(SpsError::DimensionMismatch(format!(
                "{} outputs for {} regressor rows",
                outputs.len(),
                regressors.nrows()
            )));
        }
        if regressors.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(SpsError::InvalidData("non-finite entry".into()));
        }
        Ok(Self {
            regressors,
            outputs,
        })
    }

    /// Build from row vectors; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>], outputs: &[f64]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut builder = RegressionDataBuilder::new(d);
        if rows.len() != outputs.len() {
            return Err(SpsError::DimensionMismatch(format!(
                "{} outputs for {} regressor rows",
                outputs.len(),
                rows.len()
            )));
        }
        for (row, &y) in rows.iter().zip(outputs) {
            builder.push(row, y)?;
        }
        builder.build()
    }

    pub fn builder(d: usize) -> RegressionDataBuilder {
        RegressionDataBuilder::new(d)
    }

    /// Reads `φ₁,…,φ_d,y` records. A header row is required; `d` is the
    /// column count minus one.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| SpsError::Parse {
                line: 1,
                message: format!("cannot read header: {e}"),
            })?
            .clone();
        if headers.len() < 2 {
            return Err(SpsError::Parse {
                line: 1,
                message: "header must name at least one regressor column and the output column"
                    .into(),
            });
        }
        let d = headers.len() - 1;
        let mut builder = RegressionDataBuilder::new(d);
        for (row_idx, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| SpsError::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(row_idx + 2),
                message: format!("data row {}: {e}", row_idx + 1),
            })?;
            let line = record
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(row_idx + 2);
            if record.len() != d + 1 {
                return Err(SpsError::Parse {
                    line,
                    message: format!(
                        "data row {}: expected {} fields, found {}",
                        row_idx + 1,
                        d + 1,
                        record.len()
                    ),
                });
            }
            let mut values = Vec::with_capacity(d + 1);
            for (col, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| SpsError::Parse {
                    line,
                    message: format!(
                        "data row {}, column '{}': cannot parse {:?} as a number",
                        row_idx + 1,
                        &headers[col],
                        cell
                    ),
                })?;
                if !v.is_finite() {
                    return Err(SpsError::Parse {
                        line,
                        message: format!(
                            "data row {}, column '{}': non-finite value",
                            row_idx + 1,
                            &headers[col]
                        ),
                    });
                }
                values.push(v);
            }
            builder.push(&values[..d], values[d])?;
        }
        builder.build()
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Writes the CSV layout read by [`RegressionData::from_csv_reader`].
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.d()).map(|k| format!("phi{k}")).collect();
        header.push("y".into());
        wtr.write_record(&header).map_err(csv_io)?;
        for t in 0..self.n() {
            let mut rec: Vec<String> = self
                .regressors
                .row(t)
                .iter()
                .map(|v| format!("{v:?}"))
                .collect();
            rec.push(format!("{:?}", self.outputs[t]));
            wtr.write_record(&rec).map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.regressors.nrows()
    }

    pub fn d(&self) -> usize {
        self.regressors.ncols()
    }

    pub fn regressors(&self) -> &DMatrix<f64> {
        &self.regressors
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    /// `R̃ = Φ̃ᵀΦ̃`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.regressors.tr_mul(&self.regressors)
    }
}

fn csv_io(e: csv::Error) -> SpsError {
    SpsError::Io(std::io::Error::other(e))
}

/// Row-by-row builder for [`RegressionData`].
#[derive(Debug, Clone)]
pub struct RegressionDataBuilder {
    d: usize,
    flat: Vec<f64>,
    outputs: Vec<f64>,
}

impl RegressionDataBuilder {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            flat: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn push(&mut self, regressor: &[f64], output: f64) -> Result<&mut Self> {
        if regressor.len() != self.d {
            return Err(SpsError::DimensionMismatch(format!(
                "regressor of length {} for d = {}",
                regressor.len(),
                self.d
            )));
        }
        self.flat.extend_from_slice(regressor);
        self.outputs.push(output);
        Ok(self)
    }

    pub fn build(self) -> Result<RegressionData> {
        let n = self.outputs.len();
        if n == 0 || self.d == 0 {
            return Err(SpsError::InvalidData("need n >= 1 and d >= 1".into()));
        }
        RegressionData::new(
            DMatrix::from_row_slice(n, self.d, &self.flat),
            DVector::from_vec(self.outputs),
        )
    }
}

/// The ridge-extended least-squares system and its Gram matrices.
#[derive(Debug, Clone)]
pub struct ExtendedProblem {
    data: RegressionData,
    lambda: f64,
    phi: DMatrix<f64>,
    y: DVector<f64>,
    r_tilde: DMatrix<f64>,
    r: DMatrix<f64>,
    r_bar: DMatrix<f64>,
    r_spectrum: SymSpectrum,
    r_inv_sqrt: DMatrix<f64>,
}

/// Stack `Φ̃` over `√λ I` and pad `ỹ` with `d` zeros.
pub fn extend(data: &RegressionData, lambda: f64) -> Result<ExtendedProblem> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SpsError::NonPositiveLambda(lambda));
    }
    ExtendedProblem::build(data, lambda)
}

impl ExtendedProblem {
    /// The `λ = 0` system used for the plain least-squares SPS baseline.
    /// The appended block is all zeros, so every product equals its
    /// unextended counterpart. Requires `R̃` to be invertible.
    pub fn unregularized(data: &RegressionData) -> Result<Self> {
        check_gram_invertible(&data.gram())?;
        Self::build(data, 0.0)
    }

    fn build(data: &RegressionData, lambda: f64) -> Result<Self> {
        let (n, d) = (data.n(), data.d());
        let mut phi = DMatrix::zeros(n + d, d);
        phi.rows_mut(0, n).copy_from(data.regressors());
        let root = lambda.sqrt();
        for k in 0..d {
            phi[(n + k, k)] = root;
        }
        let mut y = DVector::zeros(n + d);
        y.rows_mut(0, n).copy_from(data.outputs());

        let r_tilde = data.gram();
        let mut r = r_tilde.clone();
        for k in 0..d {
            r[(k, k)] += lambda;
        }
        let r_bar = &r / n as f64;
        let r_spectrum = SymSpectrum::new(&r)?;
        let r_inv_sqrt = r_spectrum.power(-0.5);
        Ok(Self {
            data: data.clone(),
            lambda,
            phi,
            y,
            r_tilde,
            r,
            r_bar,
            r_spectrum,
            r_inv_sqrt,
        })
    }

    pub fn data(&self) -> &RegressionData {
        &self.data
    }

    /// Original sample count (not `n + d`).
    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn r_tilde(&self) -> &DMatrix<f64> {
        &self.r_tilde
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_bar(&self) -> &DMatrix<f64> {
        &self.r_bar
    }

    pub fn r_spectrum(&self) -> &SymSpectrum {
        &self.r_spectrum
    }

    /// `R^{-1/2}`.
    pub fn r_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.r_inv_sqrt
    }

    /// `R̄^{-1/2} = √n R^{-1/2}`.
    pub fn r_bar_inv_sqrt(&self) -> DMatrix<f64> {
        &self.r_inv_sqrt * (self.n() as f64).sqrt()
    }

    /// `Φᵀy`, which equals `Φ̃ᵀỹ` because the padded outputs are zero.
    pub fn phi_t_y(&self) -> DVector<f64> {
        self.data.regressors().tr_mul(self.data.outputs())
    }

    pub fn solve_r(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        spd_solve(&self.r, rhs)
    }
}

/// `θ̂ = R⁻¹Φᵀy`, solved by Cholesky.
pub fn ridge_estimate(ep: &ExtendedProblem) -> Result<DVector<f64>> {
    ep.solve_r(&ep.phi_t_y())
}

/// `θ̂_LS = R̃⁻¹Φ̃ᵀỹ`.
pub fn ls_estimate(data: &RegressionData) -> Result<DVector<f64>> {
    let gram = data.gram();
    check_gram_invertible(&gram)?;
    spd_solve(&gram, &data.regressors().tr_mul(data.outputs()))
        .map_err(|_| SpsError::SingularGram(0.0))
}

fn check_gram_invertible(gram: &DMatrix<f64>) -> Result<()> {
    let spec = SymSpectrum::new(gram)?;
    if spec.max() <= 0.0 || spec.min() <= SINGULAR_GRAM_RTOL * spec.max() {
        return Err(SpsError::SingularGram(spec.min()));
    }
    Ok(())
}
