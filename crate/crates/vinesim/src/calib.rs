//! Measurement tables, decay-curve fitting and interpolation.
//!
//! Tables are CSV with an optional leading `#` unit/provenance comment
//! block and a header row `abscissa,ordinate`. Fits cover the three
//! decay families used for flux-distance characterization: fixed-exponent
//! inverse-square (scale only), exponential and power-law (both linear
//! least squares in the log domain).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("table needs at least {needed} rows, has {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("abscissa not strictly increasing at row {row}")]
    NonMonotonicAbscissa { row: usize },
    #[error("ordinate {value} at row {row} must be positive for a log-domain fit")]
    NonPositiveOrdinate { row: usize, value: f64 },
    #[error("rank-deficient fit: abscissa values do not span the model")]
    RankDeficient,
    #[error("query {query} outside table range [{lo}, {hi}]; extrapolation refused")]
    Extrapolation { query: f64, lo: f64, hi: f64 },
    #[error("fraction {0} must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error("response time {0} must be positive")]
    InvalidResponseTime(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered (abscissa, ordinate) measurements with unit annotations.
#[derive(Debug, Clone)]
pub struct MeasurementTable {
    pub rows: Vec<(f64, f64)>,
    /// Unit/provenance comment lines from the source file, `#` stripped.
    pub annotations: Vec<String>,
    pub source: String,
}

impl MeasurementTable {
    pub fn new(rows: Vec<(f64, f64)>, source: &str) -> Result<Self, CalibError> {
        let table = MeasurementTable {
            rows,
            annotations: vec![],
            source: source.to_string(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), CalibError> {
        if self.rows.len() < 2 {
            return Err(CalibError::TooFewRows {
                needed: 2,
                got: self.rows.len(),
            });
        }
        for (i, w) in self.rows.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(CalibError::NonMonotonicAbscissa { row: i + 1 });
            }
        }
        Ok(())
    }

    /// Parse from CSV text. `#` comment lines are kept as annotations;
    /// the first non-comment line must be the `abscissa,ordinate` header.
    pub fn parse_csv(text: &str, source: &str) -> Result<Self, CalibError> {
        let mut annotations = Vec::new();
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                annotations.push(comment.trim().to_string());
                continue;
            }
            if !saw_header {
                if line != "abscissa,ordinate" {
                    return Err(CalibError::Malformed {
                        line: lineno,
                        message: format!("expected header 'abscissa,ordinate', got '{line}'"),
                    });
                }
                saw_header = true;
                continue;
            }
            let mut parts = line.split(',');
            let a = parts.next().unwrap_or("");
            let b = parts.next().unwrap_or("");
            if parts.next().is_some() {
                return Err(CalibError::Malformed {
                    line: lineno,
                    message: "expected exactly two columns".into(),
                });
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| CalibError::Malformed {
                    line: lineno,
                    message: format!("'{s}': {e}"),
                })
            };
            rows.push((parse(a)?, parse(b)?));
        }
        if !saw_header {
            return Err(CalibError::Malformed {
                line: 1,
                message: "missing 'abscissa,ordinate' header".into(),
            });
        }
        let table = MeasurementTable {
            rows,
            annotations,
            source: source.to_string(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CalibError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFamily {
    /// `y = c / x^2`; single scale parameter `[c]`.
    InverseSquare,
    /// `y = a exp(-b x)`; parameters `[a, b]`.
    Exponential,
    /// `y = a x^(-p)`; parameters `[a, p]`.
    PowerLaw,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub family: FitFamily,
    pub params: Vec<f64>,
    /// Residual sum of squares in the original (linear) domain.
    pub rss: f64,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        match self.family {
            FitFamily::InverseSquare => self.params[0] / (x * x),
            FitFamily::Exponential => self.params[0] * (-self.params[1] * x).exp(),
            FitFamily::PowerLaw => self.params[0] * x.powf(-self.params[1]),
        }
    }
}

fn linear_regression(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), CalibError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx < 1e-300 {
        return Err(CalibError::RankDeficient);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Least-squares fit of a decay family to a measurement table.
///
/// Exponential and power-law fits are linear regressions on
/// log-transformed data; the inverse-square fit is a scale-only least
/// squares with the exponent pinned at 2.
pub fn fit_decay(table: &MeasurementTable, family: FitFamily) -> Result<FitResult, CalibError> {
    table.validate()?;
    if table.rows.len() < 3 {
        return Err(CalibError::TooFewRows {
            needed: 3,
            got: table.rows.len(),
        });
    }
    let params = match family {
        FitFamily::InverseSquare => {
            // minimize sum (y_i - c / x_i^2)^2 over c
            let mut num = 0.0;
            let mut den = 0.0;
            for &(x, y) in &table.rows {
                let u = 1.0 / (x * x);
                num += y * u;
                den += u * u;
            }
            if den < 1e-300 {
                return Err(CalibError::RankDeficient);
            }
            vec![num / den]
        }
        FitFamily::Exponential | FitFamily::PowerLaw => {
            for (i, &(_, y)) in table.rows.iter().enumerate() {
                if y <= 0.0 {
                    return Err(CalibError::NonPositiveOrdinate { row: i, value: y });
                }
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = table
                .rows
                .iter()
                .map(|&(x, y)| {
                    if family == FitFamily::PowerLaw {
                        (x.ln(), y.ln())
                    } else {
                        (x, y.ln())
                    }
                })
                .unzip();
            let (intercept, slope) = linear_regression(&xs, &ys)?;
            vec![intercept.exp(), -slope]
        }
    };
    let mut result = FitResult {
        family,
        params,
        rss: 0.0,
        residuals: Vec::with_capacity(table.rows.len()),
    };
    for &(x, y) in &table.rows {
        let r = y - result.predict(x);
        result.rss += r * r;
        result.residuals.push(r);
    }
    Ok(result)
}

/// Piecewise-linear interpolation of a contraction table; exact at knots,
/// refuses extrapolation.
pub fn interp_gamma(table: &MeasurementTable, query: f64) -> Result<f64, CalibError> {
    table.validate()?;
    let lo = table.rows.first().unwrap().0;
    let hi = table.rows.last().unwrap().0;
    if query < lo || query > hi {
        return Err(CalibError::Extrapolation { query, lo, hi });
    }
    for w in table.rows.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if query <= x1 {
            if query == x0 {
                return Ok(y0);
            }
            if query == x1 {
                return Ok(y1);
            }
            return Ok(y0 + (y1 - y0) * (query - x0) / (x1 - x0));
        }
    }
    unreachable!("query within range but no bracket found")
}

/// First-order time constant from a measured response time and the
/// completion fraction it represents: `tau = -t / ln(1 - fraction)`.
pub fn fit_time_constant(response_time: f64, fraction: f64) -> Result<f64, CalibError> {
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(CalibError::InvalidFraction(fraction));
    }
    if response_time <= 0.0 {
        return Err(CalibError::InvalidResponseTime(response_time));
    }
    Ok(-response_time / (1.0 - fraction).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synth(f: impl Fn(f64) -> f64, xs: &[f64]) -> MeasurementTable {
        MeasurementTable::new(xs.iter().map(|&x| (x, f(x))).collect(), "synthetic").unwrap()
    }

    #[test]
    fn inverse_square_exact_recovery() {
        let xs: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
        let t = synth(|x| 4.0 / (x * x), &xs);
        let fit = fit_decay(&t, FitFamily::InverseSquare).unwrap();
        assert_relative_eq!(fit.params[0], 4.0, max_relative = 1e-12);
        assert!(fit.rss < 1e-12);
    }

    #[test]
    fn exponential_exact_recovery() {
        let xs: Vec<f64> = (1..=12).map(|i| 0.3 * i as f64).collect();
        let t = synth(|x| 3.0 * (-0.5 * x).exp(), &xs);
        let fit = fit_decay(&t, FitFamily::Exponential).unwrap();
        assert_relative_eq!(fit.params[0], 3.0, max_relative = 1e-9);
        assert_relative_eq!(fit.params[1], 0.5, max_relative = 1e-9);
    }

    #[test]
    fn power_law_exact_recovery() {
        let xs: Vec<f64> = (1..=12).map(|i| 0.2 * i as f64).collect();
        let t = synth(|x| 2.5 * x.powf(-1.7), &xs);
        let fit = fit_decay(&t, FitFamily::PowerLaw).unwrap();
        assert_relative_eq!(fit.params[0], 2.5, max_relative = 1e-9);
        assert_relative_eq!(fit.params[1], 1.7, max_relative = 1e-9);
    }

    #[test]
    fn fits_are_idempotent_on_own_predictions() {
        let xs: Vec<f64> = (1..=15).map(|i| 0.15 * i as f64).collect();
        let noisy = synth(|x| 4.0 / (x * x) * (1.0 + 0.05 * (x * 17.0).sin()), &xs);
        for family in [FitFamily::InverseSquare, FitFamily::Exponential, FitFamily::PowerLaw] {
            let first = fit_decay(&noisy, family).unwrap();
            let clean =
                MeasurementTable::new(xs.iter().map(|&x| (x, first.predict(x))).collect(), "refit")
                    .unwrap();
            let second = fit_decay(&clean, family).unwrap();
            assert!(second.rss < 1e-12, "{family:?} rss = {}", second.rss);
        }
    }

    #[test]
    fn scale_equivariance_of_log_fits() {
        let xs: Vec<f64> = (1..=10).map(|i| 0.25 * i as f64).collect();
        let t = synth(|x| 3.0 * (-0.8 * x).exp() + 0.0, &xs);
        let scaled =
            MeasurementTable::new(t.rows.iter().map(|&(x, y)| (x, 7.0 * y)).collect(), "scaled")
                .unwrap();
        let f1 = fit_decay(&t, FitFamily::Exponential).unwrap();
        let f2 = fit_decay(&scaled, FitFamily::Exponential).unwrap();
        assert_relative_eq!(f2.params[0], 7.0 * f1.params[0], max_relative = 1e-12);
        assert_relative_eq!(f2.params[1], f1.params[1], max_relative = 1e-12);
    }

    #[test]
    fn log_fit_rejects_nonpositive() {
        let t = MeasurementTable::new(vec![(1.0, 1.0), (2.0, 0.0), (3.0, 0.5)], "bad").unwrap();
        assert!(matches!(
            fit_decay(&t, FitFamily::Exponential),
            Err(CalibError::NonPositiveOrdinate { row: 1, .. })
        ));
    }

    #[test]
    fn interp_exact_at_knots_and_bracketed() {
        let t = MeasurementTable::new(
            vec![(0.4, 0.30), (0.5, 0.20), (0.6, 0.12)],
            "knots",
        )
        .unwrap();
        assert_eq!(interp_gamma(&t, 0.5).unwrap(), 0.20);
        let mid = interp_gamma(&t, 0.55).unwrap();
        assert!(mid < 0.20 && mid > 0.12);
        assert!(matches!(
            interp_gamma(&t, 0.7),
            Err(CalibError::Extrapolation { .. })
        ));
    }

    #[test]
    fn time_constant_arithmetic() {
        let tau = fit_time_constant(95.0, 0.99).unwrap();
        assert_relative_eq!(tau, 20.628988, max_relative = 1e-6);
        // fraction 1 - 1/e makes tau equal the response time
        let tau2 = fit_time_constant(42.0, 1.0 - (-1.0f64).exp()).unwrap();
        assert_relative_eq!(tau2, 42.0, max_relative = 1e-12);
        // round trip
        let t99 = tau * (100.0f64).ln();
        assert_relative_eq!(t99, 95.0, max_relative = 1e-12);
        assert!(fit_time_constant(95.0, 1.0).is_err());
    }

    #[test]
    fn csv_parse_with_comments_and_errors() {
        let text = "# distance m, contraction ratio\nabscissa,ordinate\n0.4,0.3\n0.5,0.2\n";
        let t = MeasurementTable::parse_csv(text, "inline").unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.annotations.len(), 1);

        let bad = "abscissa,ordinate\n0.4,xyz\n";
        match MeasurementTable::parse_csv(bad, "inline") {
            Err(CalibError::Malformed { line: 2, .. }) => {}
            other => panic!("expected line-2 error, got {other:?}"),
        }

        let nonmono = "abscissa,ordinate\n0.5,0.3\n0.4,0.2\n";
        assert!(matches!(
            MeasurementTable::parse_csv(nonmono, "inline"),
            Err(CalibError::NonMonotonicAbscissa { .. })
        ));
    }
}
