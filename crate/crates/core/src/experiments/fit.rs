use crate::error::{Error, Result};

/// Least-squares fit of `ln y = a + slope·ln x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for fewer than three points' worth of
    /// residual freedom or an exact fit).
    pub stderr: f64,
    pub points: usize,
}

pub fn fit_rate(x: &[f64], y: &[f64]) -> Result<RateFit> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("{} abscissae for {} values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", x.len())));
    }
    if let Some((a, b)) = x
        .iter()
        .zip(y)
        .find(|(a, b)| !(**a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite()))
    {
        return Err(Error::Fit(format!("non-positive or non-finite point ({a}, {b})")));
    }
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        points: x.len(),
    })
}
