//! Bootstrap curve ensembles summarized by a Gaussian-process posterior.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nam::NamModel;

/// N equidistant points on `[x_min, x_max]` for covariate `covariate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveGrid {
    pub covariate: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl CurveGrid {
    pub fn new(covariate: usize, x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let g = CurveGrid {
            covariate,
            x_min,
            x_max,
            n,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("curve grid needs at least 2 points"));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(Error::config(format!(
                "curve grid range [{}, {}] is empty or not finite",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let d = self.step();
        (0..self.n).map(|i| self.x_min + i as f64 * d).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelForm {
    /// `exp(-|x - x'| / (2 l^2))`
    #[default]
    Absolute,
    /// `exp(-(x - x')^2 / (2 l^2))`
    Squared,
}

impl fmt::Display for KernelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelForm::Absolute => "rbf",
            KernelForm::Squared => "rbf-squared",
        })
    }
}

impl FromStr for KernelForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" | "absolute" => Ok(KernelForm::Absolute),
            "rbf-squared" | "squared" => Ok(KernelForm::Squared),
            _ => Err(Error::parse("kernel", format!("unknown kernel {s:?}"))),
        }
    }
}

fn kernel_matrix(xa: &[f64], xb: &[f64], ell: f64, form: KernelForm) -> DMatrix<f64> {
    let denom = 2.0 * ell * ell;
    DMatrix::from_fn(xa.len(), xb.len(), |i, j| {
        let d = (xa[i] - xb[j]).abs();
        let d = match form {
            KernelForm::Absolute => d,
            KernelForm::Squared => d * d,
        };
        (-d / denom).exp()
    })
}

/// Kernel matrix `K[i][j] = k(xa_i, xb_j)`.
pub fn rbf_kernel(xa: &[f64], xb: &[f64], ell: f64, form: KernelForm) -> Result<Array2<f64>> {
    check_length_scale(ell)?;
    let k = kernel_matrix(xa, xb, ell, form);
    Ok(Array2::from_shape_fn((xa.len(), xb.len()), |(i, j)| k[(i, j)]))
}

fn check_length_scale(ell: f64) -> Result<()> {
    if ell > 0.0 && ell.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("length scale must be positive, got {ell}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMean {
    ObservationMean,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprOptions {
    pub length_scale: f64,
    pub kernel: KernelForm,
    /// Added to the observation kernel diagonal.
    pub jitter: f64,
    pub prior_mean: PriorMean,
}

impl Default for GprOptions {
    fn default() -> Self {
        GprOptions {
            length_scale: 0.1,
            kernel: KernelForm::Absolute,
            jitter: 1.0,
            prior_mean: PriorMean::ObservationMean,
        }
    }
}

/// Posterior mean and covariance at the query points.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub cov: Array2<f64>,
    pub prior_mean: f64,
}

/// GP regression of `obs_y` on `obs_x`, evaluated at `query_x`.
pub fn posterior(obs_x: &[f64], obs_y: &[f64], query_x: &[f64], opts: &GprOptions) -> Result<Posterior> {
    check_length_scale(opts.length_scale)?;
    if obs_x.len() != obs_y.len() {
        return Err(Error::Dimension {
            expected: obs_x.len(),
            got: obs_y.len(),
        });
    }
    if obs_x.is_empty() {
        return Err(Error::config("no observations for the GP posterior"));
    }
    if !(opts.jitter >= 0.0 && opts.jitter.is_finite()) {
        return Err(Error::config(format!("jitter must be non-negative, got {}", opts.jitter)));
    }
    let m = match opts.prior_mean {
        PriorMean::ObservationMean => obs_y.iter().sum::<f64>() / obs_y.len() as f64,
        PriorMean::Fixed(v) => v,
    };
    let (ell, form) = (opts.length_scale, opts.kernel);
    let mut k_oo = kernel_matrix(obs_x, obs_x, ell, form);
    for i in 0..obs_x.len() {
        k_oo[(i, i)] += opts.jitter;
    }
    let k_og = kernel_matrix(obs_x, query_x, ell, form);
    let k_gg = kernel_matrix(query_x, query_x, ell, form);

    let chol = k_oo.cholesky().ok_or(Error::Factorization {
        size: obs_x.len(),
        jitter: opts.jitter,
    })?;
    let resid = DVector::from_iterator(obs_y.len(), obs_y.iter().map(|y| y - m));
    let alpha = chol.solve(&resid);
    let mean = k_og.tr_mul(&alpha).iter().map(|v| v + m).collect();
    // W = L^-1 K_og, so K_og' (K_oo)^-1 K_og = W'W comes out exactly symmetric.
    let w = chol.l().solve_lower_triangular(&k_og).ok_or(Error::Factorization {
        size: obs_x.len(),
        jitter: opts.jitter,
    })?;
    let cov = k_gg - w.tr_mul(&w);
    let nq = query_x.len();
    Ok(Posterior {
        mean,
        cov: Array2::from_shape_fn((nq, nq), |(i, j)| cov[(i, j)]),
        prior_mean: m,
    })
}

/// B centered subnet curves on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEnsemble {
    pub grid: CurveGrid,
    /// `values[b][i]` is refit b at grid point i.
    pub values: Vec<Vec<f64>>,
}

/// Subtracts the mean so the values average to zero.
pub fn center_curve(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

impl CurveEnsemble {
    /// Rows are centered to grid-mean zero.
    pub fn new(grid: CurveGrid, mut values: Vec<Vec<f64>>) -> Result<Self> {
        grid.validate()?;
        for row in &mut values {
            if row.len() != grid.n {
                return Err(Error::Dimension {
                    expected: grid.n,
                    got: row.len(),
                });
            }
            center_curve(row);
        }
        Ok(CurveEnsemble { grid, values })
    }

    pub fn from_models(models: &[NamModel], grid: CurveGrid) -> Result<Self> {
        let pts = grid.points();
        let mut rows = Vec::with_capacity(models.len());
        for m in models {
            if grid.covariate >= m.q() {
                return Err(Error::Dimension {
                    expected: grid.covariate + 1,
                    got: m.q(),
                });
            }
            rows.push(m.evaluate_subnet(grid.covariate, &pts));
        }
        Self::new(grid, rows)
    }

    pub fn b(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprFit {
    pub grid: CurveGrid,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub cov: Array2<f64>,
    pub length_scale: f64,
    pub prior_mean: f64,
}

/// Posterior over the grid from all B·N stacked ensemble points.
///
/// The kernel sees grid positions rescaled to `[0, 1]`, so the length scale
/// is relative to the grid range.
pub fn gpr_posterior(ensemble: &CurveEnsemble, opts: &GprOptions) -> Result<GprFit> {
    if ensemble.values.is_empty() {
        return Err(Error::config("curve ensemble is empty"));
    }
    let n = ensemble.grid.n;
    let pts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let obs_x: Vec<f64> = ensemble.values.iter().flat_map(|_| pts.iter().copied()).collect();
    let obs_y: Vec<f64> = ensemble.values.concat();
    let post = posterior(&obs_x, &obs_y, &pts, opts)?;
    let sd = post.cov.diag().iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(GprFit {
        grid: ensemble.grid,
        mean: post.mean,
        sd,
        cov: post.cov,
        length_scale: opts.length_scale,
        prior_mean: post.prior_mean,
    })
}

/// `(mean - 2 sd, mean + 2 sd)` per grid point.
pub fn confidence_bands(fit: &GprFit) -> (Vec<f64>, Vec<f64>) {
    fit.mean
        .iter()
        .zip(&fit.sd)
        .map(|(m, s)| (m - 2.0 * s, m + 2.0 * s))
        .unzip()
}

/// One fit per grid, in parallel.
pub fn fit_curves(models: &[NamModel], grids: &[CurveGrid], opts: &GprOptions) -> Result<Vec<(CurveEnsemble, GprFit)>> {
    grids
        .par_iter()
        .map(|&g| {
            let ens = CurveEnsemble::from_models(models, g)?;
            let fit = gpr_posterior(&ens, opts)?;
            Ok((ens, fit))
        })
        .collect()
}

/// CSV `x,mean,lower,upper,boot_0,..`.
pub fn write_curves_csv<W: Write>(w: W, ensemble: &CurveEnsemble, fit: &GprFit) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["x".to_string(), "mean".into(), "lower".into(), "upper".into()];
    header.extend((0..ensemble.b()).map(|b| format!("boot_{b}")));
    wtr.write_record(&header)?;
    let (lower, upper) = confidence_bands(fit);
    for (i, x) in fit.grid.points().iter().enumerate() {
        let mut row = vec![x.to_string(), fit.mean[i].to_string(), lower[i].to_string(), upper[i].to_string()];
        row.extend(ensemble.values.iter().map(|r| r[i].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<curves csv>", e))?;
    Ok(())
}

/// Reads a curves CSV back into a fit. The standard deviation is recovered
/// from the band half-width; the covariance is not stored and comes back as
/// its diagonal.
pub fn read_curves_csv<R: Read>(r: R, covariate: usize, length_scale: f64) -> Result<GprFit> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 4 || &header[0] != "x" || &header[1] != "mean" || &header[2] != "lower" || &header[3] != "upper" {
        return Err(Error::parse("curves header", "expected x,mean,lower,upper"));
    }
    let (mut xs, mut mean, mut sd) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|e| Error::parse(format!("curves row {}", i + 1), e.to_string()))
        };
        xs.push(num(0)?);
        mean.push(num(1)?);
        sd.push(((num(3)? - num(2)?) / 4.0).max(0.0));
    }
    if xs.len() < 2 {
        return Err(Error::parse("curves", "need at least 2 rows"));
    }
    let grid = CurveGrid::new(covariate, xs[0], xs[xs.len() - 1], xs.len())?;
    let pts = grid.points();
    let scale = (grid.x_max - grid.x_min).abs().max(1.0);
    if xs.iter().zip(&pts).any(|(a, b)| (a - b).abs() > 1e-12 * scale) {
        return Err(Error::parse("curves", "grid is not equidistant"));
    }
    let cov = Array2::from_diag(&ndarray::Array1::from_iter(sd.iter().map(|s| s * s)));
    let prior_mean = 0.0;
    Ok(GprFit {
        grid,
        mean,
        sd,
        cov,
        length_scale,
        prior_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let k = rbf_kernel(&[0.0, 2.0], &[0.0, 2.0, 0.5], 1.0, KernelForm::Absolute).unwrap();
        assert_eq!(k[[0, 0]], 1.0);
        assert!((k[[0, 1]] - (-1.0f64).exp()).abs() < 1e-15);
        assert!(k[[0, 2]] > k[[0, 1]]);
        let s = rbf_kernel(&[0.0], &[2.0], 1.0, KernelForm::Squared).unwrap();
        assert!((s[[0, 0]] - (-2.0f64).exp()).abs() < 1e-15);
        assert!(rbf_kernel(&[0.0], &[0.0], 0.0, KernelForm::Absolute).is_err());
        assert!(rbf_kernel(&[0.0], &[0.0], -1.0, KernelForm::Absolute).is_err());
    }

    #[test]
    fn single_point_posterior() {
        let opts = GprOptions {
            prior_mean: PriorMean::Fixed(0.0),
            ..GprOptions::default()
        };
        let p = posterior(&[0.3], &[1.7], &[0.3], &opts).unwrap();
        assert!((p.mean[0] - 0.85).abs() < 1e-12);
        assert!((p.cov[[0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_rows_give_zero_mean() {
        let g = CurveGrid::new(0, 0.0, 1.0, 20).unwrap();
        let ens = CurveEnsemble::new(g, vec![vec![0.0; 20]; 3]).unwrap();
        let fit = gpr_posterior(&ens, &GprOptions::default()).unwrap();
        assert!(fit.mean.iter().all(|&m| m == 0.0));
        let (lo, hi) = confidence_bands(&fit);
        for i in 0..20 {
            assert!(lo[i] <= fit.mean[i] && fit.mean[i] <= hi[i]);
        }
    }

    #[test]
    fn bands_arithmetic() {
        let g = CurveGrid::new(0, 0.0, 1.0, 2).unwrap();
        let fit = GprFit {
            grid: g,
            mean: vec![1.0, 3.0],
            sd: vec![0.5, 0.0],
            cov: Array2::zeros((2, 2)),
            length_scale: 0.1,
            prior_mean: 0.0,
        };
        assert_eq!(confidence_bands(&fit), (vec![0.0, 3.0], vec![2.0, 3.0]));
    }

    #[test]
    fn grid_checks() {
        assert!(CurveGrid::new(0, 0.0, 1.0, 1).is_err());
        assert!(CurveGrid::new(0, 1.0, 1.0, 5).is_err());
        let g = CurveGrid::new(0, -1.0, 1.0, 5).unwrap();
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn rows_are_centered_and_checked() {
        let g = CurveGrid::new(1, 0.0, 1.0, 3).unwrap();
        let ens = CurveEnsemble::new(g, vec![vec![1.0, 2.0, 6.0]]).unwrap();
        assert_eq!(ens.values[0], vec![-2.0, -1.0, 3.0]);
        assert!(CurveEnsemble::new(g, vec![vec![1.0]]).is_err());
    }

    #[test]
    fn curves_csv_round_trip() {
        let g = CurveGrid::new(0, 0.0, 1.0, 7).unwrap();
        let rows = (0..3)
            .map(|b| g.points().iter().map(|x| (6.0 * x).sin() + 0.1 * b as f64 * x).collect())
            .collect();
        let ens = CurveEnsemble::new(g, rows).unwrap();
        let fit = gpr_posterior(&ens, &GprOptions::default()).unwrap();
        let mut out = Vec::new();
        write_curves_csv(&mut out, &ens, &fit).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("x,mean,lower,upper,boot_0,boot_1,boot_2\n"));
        let back = read_curves_csv(text.as_bytes(), 0, 0.1).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.mean, fit.mean);
        for (a, b) in back.sd.iter().zip(&fit.sd) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn factorization_failure_is_reported() {
        let opts = GprOptions {
            jitter: 0.0,
            ..GprOptions::default()
        };
        let err = posterior(&[0.5, 0.5], &[1.0, 1.0], &[0.5], &opts).unwrap_err();
        assert!(matches!(err, Error::Factorization { size: 2, .. }));
    }
}
