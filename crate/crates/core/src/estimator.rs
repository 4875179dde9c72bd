//! Prefix fitting: estimate one global `(r0, N)` from the first `k`
//! generations only, then sweep `k` from 1 to G.
//!
//! The objective is the mean squared error between model and observed
//! cumulative infections over generations `1..=k`, with seeds pinned to the
//! observed generation-1 count. Because the projection depends on `(p, λ)`
//! only through `r0 = p·λ`, the search runs over `(r0, N)`: an exhaustive
//! coarse grid followed by shrinking local refinements around the incumbent.
//! Ties break toward smaller `r0`, then smaller `N` — the most conservative
//! predicted reach (the `k = 1` objective is flat, so a rule is required).
//!
//! Grid cells are evaluated in parallel; the reduction is an associative
//! minimum over `(objective, r0, N)`, so the result does not depend on
//! scheduling. `CASCADE_BRANCH_THREADS` caps the worker count.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{self, ModelParams, DEFAULT_EPS};
use crate::series::GenerationSeries;
use crate::util::{fmt_dp, lin_space, run_parallel};

/// Grid-and-refine search settings.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub r0_min: f64,
    pub r0_max: f64,
    pub r0_steps: usize,
    /// Lower N bound; `None` pins it to the observed prefix cumulative.
    pub n_min: Option<f64>,
    pub n_max: f64,
    pub n_steps: usize,
    /// Log-spaced N grid (default) or linear.
    pub log_n: bool,
    pub refine_rounds: usize,
    /// Range shrink factor per refinement round, in (0, 1).
    pub refine_shrink: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            r0_min: 0.0,
            r0_max: 30.0,
            r0_steps: 301,
            n_min: None,
            n_max: 1e6,
            n_steps: 200,
            log_n: true,
            refine_rounds: 5,
            refine_shrink: 0.2,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |msg: String| Err(FitError::InvalidConfig(msg));
        if !(self.r0_min.is_finite() && self.r0_max.is_finite() && self.r0_min < self.r0_max) {
            return bad(format!(
                "r0 range [{}, {}] invalid",
                self.r0_min, self.r0_max
            ));
        }
        if self.r0_min < 0.0 {
            return bad("r0_min must be >= 0".into());
        }
        if self.r0_steps < 2 || self.n_steps < 2 {
            return bad("grids need at least 2 steps".into());
        }
        if let Some(n_min) = self.n_min {
            if !(n_min >= 1.0 && n_min < self.n_max) {
                return bad(format!("N range [{n_min}, {}] invalid", self.n_max));
            }
        }
        if !(self.n_max.is_finite() && self.n_max >= 1.0) {
            return bad(format!("n_max = {} invalid", self.n_max));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return bad(format!(
                "refine_shrink = {} outside (0, 1)",
                self.refine_shrink
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FitError {
    #[error("k = {k} out of range 1..={g}")]
    KOutOfRange { k: usize, g: usize },
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
}

/// Outcome of a single prefix fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    /// Objective at the optimum: cumulative MSE over generations 1..=k.
    pub period_mse: f64,
    pub k_used: usize,
}

/// One row of the sweep report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitRow {
    pub k: usize,
    pub period_mse: f64,
    /// Cumulative MSE of the same parameters over all G generations.
    pub campaign_mse: f64,
    pub estimated_reach: f64,
    pub reach_error: f64,
    /// Fraction of actual reach (0.277 ↔ 27.70%).
    pub reach_error_pct: f64,
}

/// Sweep output: one row per prefix length `k = 1..=G`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    rows: Vec<FitRow>,
    actual_reach: f64,
}

impl FitReport {
    /// Assembles a report from externally produced rows (e.g. a single-k
    /// fit); rows must be non-empty.
    pub fn from_rows(rows: Vec<FitRow>, actual_reach: f64) -> Self {
        assert!(!rows.is_empty(), "a report needs at least one row");
        Self { rows, actual_reach }
    }

    pub fn rows(&self) -> &[FitRow] {
        &self.rows
    }

    pub fn row(&self, k: usize) -> &FitRow {
        &self.rows[k - 1]
    }

    pub fn actual_reach(&self) -> f64 {
        self.actual_reach
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    obj: f64,
    r0: f64,
    n: f64,
}

impl Candidate {
    const WORST: Candidate = Candidate {
        obj: f64::INFINITY,
        r0: f64::INFINITY,
        n: f64::INFINITY,
    };

    /// Lexicographic (objective, r0, N) minimum: deterministic tie-break
    /// toward smaller r0, then smaller N.
    fn min(self, other: Candidate) -> Candidate {
        let a = (self.obj, self.r0, self.n);
        let b = (other.obj, other.r0, other.n);
        if b < a {
            other
        } else {
            self
        }
    }
}

/// Objective: cumulative MSE of the `(r0, N)` projection against the
/// observed cumulative prefix, seeds pinned to the curve's first value.
fn objective(r0: f64, n: f64, observed_cum: &[f64]) -> f64 {
    let params = ModelParams::from_parts(1.0, r0, n, r0);
    let traj = model::project_f(&params, observed_cum[0], observed_cum.len(), DEFAULT_EPS);
    model::cumulative_mse(traj.cumulative_column(), observed_cum)
}

/// Current search window; N bounds are in natural units.
struct GridWindow {
    r0_lo: f64,
    r0_hi: f64,
    n_lo: f64,
    n_hi: f64,
}

fn grid_min(observed_cum: &[f64], window: &GridWindow, config: &SearchConfig) -> Candidate {
    let r0s = lin_space(window.r0_lo, window.r0_hi, config.r0_steps);
    let ns: Vec<f64> = if config.log_n {
        lin_space(window.n_lo.ln(), window.n_hi.ln(), config.n_steps)
            .into_iter()
            .map(f64::exp)
            .collect()
    } else {
        lin_space(window.n_lo, window.n_hi, config.n_steps)
    };
    let eval_row = |&r0: &f64| {
        let mut best = Candidate::WORST;
        for &n in &ns {
            let cand = Candidate {
                obj: objective(r0, n, observed_cum),
                r0,
                n,
            };
            best = best.min(cand);
        }
        best
    };
    run_parallel(|| {
        r0s.par_iter()
            .map(eval_row)
            .reduce(|| Candidate::WORST, Candidate::min)
    })
}

/// Shrinks `[lo, hi]` to `width` around `center`, shifting (not clipping)
/// to stay within the original bounds so grid resolution stays uniform.
fn shrink_window(orig_lo: f64, orig_hi: f64, center: f64, width: f64) -> (f64, f64) {
    let mut lo = (center - width / 2.0).max(orig_lo);
    let mut hi = lo + width;
    if hi > orig_hi {
        hi = orig_hi;
        lo = (hi - width).max(orig_lo);
    }
    (lo, hi)
}

/// Core search over `(r0, N)` against a raw cumulative curve
/// (`observed_cum[0]` = seeds). Returns the incumbent after the coarse grid
/// plus all refinement rounds.
pub fn fit_curve(observed_cum: &[f64], config: &SearchConfig) -> Result<(f64, f64, f64), FitError> {
    config.validate()?;
    assert!(
        !observed_cum.is_empty(),
        "cumulative curve must be non-empty"
    );
    assert!(observed_cum[0] >= 1.0, "seeds must be at least 1");

    let prefix_cum = *observed_cum.last().expect("non-empty curve");
    let n_min = config.n_min.unwrap_or(prefix_cum).max(1.0);
    if n_min >= config.n_max {
        return Err(FitError::InvalidConfig(format!(
            "N lower bound {n_min} is not below n_max {}",
            config.n_max
        )));
    }

    // N windows live in log space when the grid is log-spaced.
    let (n_lo0, n_hi0) = if config.log_n {
        (n_min.ln(), config.n_max.ln())
    } else {
        (n_min, config.n_max)
    };
    let mut r0_window = (config.r0_min, config.r0_max);
    let mut n_window = (n_lo0, n_hi0);
    let mut best = Candidate::WORST;

    for _round in 0..=config.refine_rounds {
        let (n_lo, n_hi) = if config.log_n {
            (n_window.0.exp(), n_window.1.exp())
        } else {
            n_window
        };
        let window = GridWindow {
            r0_lo: r0_window.0,
            r0_hi: r0_window.1,
            n_lo,
            n_hi,
        };
        let round_best = grid_min(observed_cum, &window, config);
        // Refinement never worsens the incumbent.
        best = best.min(round_best);

        let r0_width = (r0_window.1 - r0_window.0) * config.refine_shrink;
        let n_width = (n_window.1 - n_window.0) * config.refine_shrink;
        r0_window = shrink_window(config.r0_min, config.r0_max, best.r0, r0_width);
        let n_center = if config.log_n { best.n.ln() } else { best.n };
        n_window = shrink_window(n_lo0, n_hi0, n_center, n_width);
    }
    Ok((best.r0, best.n, best.obj))
}

/// Fits the model to generations `1..=k` of an observed series.
///
/// The reported `(p, λ)` decomposition uses the aggregate observed decision
/// rate over the prefix, `p̂ = Σ decisions / Σ infected` (set to 1 when no
/// decisions were observed), and `λ̂ = r0 / p̂`.
pub fn fit(
    observed: &GenerationSeries,
    k: usize,
    config: &SearchConfig,
) -> Result<FitResult, FitError> {
    let g_count = observed.generations();
    if k == 0 || k > g_count {
        return Err(FitError::KOutOfRange { k, g: g_count });
    }
    let curve = observed.cumulative_curve();
    let (r0, n, obj) = fit_curve(&curve[..k], config)?;

    let infected_total: u64 = (1..=k).map(|g| observed.infected(g)).sum();
    let decisions_total: u64 = (1..=k).map(|g| observed.decisions(g)).sum();
    let p_hat = if decisions_total == 0 {
        1.0
    } else {
        (decisions_total as f64 / infected_total as f64).min(1.0)
    };
    let lambda_hat = r0 / p_hat;
    let params = ModelParams::from_parts(p_hat, lambda_hat, n, r0);
    Ok(FitResult {
        params,
        period_mse: obj,
        k_used: k,
    })
}

/// Evaluates a fit against the full observed series: campaign-wide MSE,
/// predicted reach and reach error for one report row.
pub fn evaluate(result: &FitResult, observed: &GenerationSeries) -> FitRow {
    let g_count = observed.generations();
    let seeds = observed.seeds();
    let traj = model::project(&result.params, seeds, g_count.max(1), DEFAULT_EPS);
    let campaign_mse =
        model::trajectory_mse(&traj, observed, g_count).expect("G >= 1 for a valid series");
    let estimated_reach = model::predicted_reach(&result.params, seeds);
    let actual = observed.total_reach() as f64;
    let reach_error = (estimated_reach - actual).abs();
    FitRow {
        k: result.k_used,
        period_mse: result.period_mse,
        campaign_mse,
        estimated_reach,
        reach_error,
        reach_error_pct: reach_error / actual,
    }
}

/// Fits every prefix `k = 1..=G`; the final row is the reference model.
pub fn sweep(observed: &GenerationSeries, config: &SearchConfig) -> Result<FitReport, FitError> {
    let rows = (1..=observed.generations())
        .map(|k| Ok(evaluate(&fit(observed, k, config)?, observed)))
        .collect::<Result<Vec<_>, FitError>>()?;
    Ok(FitReport {
        rows,
        actual_reach: observed.total_reach() as f64,
    })
}

/// Writes `k,period_mse,campaign_mse,estimated_reach,reach_error,reach_error_pct`
/// with MSEs and reaches at 2 decimals and the error as a percentage at 2
/// decimals.
pub fn write_fit_report_csv<W: Write>(mut out: W, report: &FitReport) -> std::io::Result<()> {
    writeln!(
        out,
        "k,period_mse,campaign_mse,estimated_reach,reach_error,reach_error_pct"
    )?;
    for row in report.rows() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.k,
            fmt_dp(row.period_mse, 2),
            fmt_dp(row.campaign_mse, 2),
            fmt_dp(row.estimated_reach, 2),
            fmt_dp(row.reach_error, 2),
            fmt_dp(row.reach_error_pct * 100.0, 2)
        )?;
    }
    Ok(())
}

/// Writes the reach-error curve (`k` vs error percentage).
pub fn write_reach_error_curve_csv<W: Write>(
    mut out: W,
    report: &FitReport,
) -> std::io::Result<()> {
    writeln!(out, "k,reach_error_pct")?;
    for row in report.rows() {
        writeln!(out, "{},{}", row.k, fmt_dp(row.reach_error_pct * 100.0, 2))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from_infected(infected: &[u64], decisions: &[u64]) -> GenerationSeries {
        let sent: Vec<u64> = (0..infected.len())
            .map(|i| {
                if i + 1 < infected.len() {
                    infected[i + 1]
                } else {
                    0
                }
            })
            .collect();
        GenerationSeries::from_columns(infected.to_vec(), decisions.to_vec(), sent).unwrap()
    }

    #[test]
    fn k1_is_exactly_zero_and_breaks_ties_conservatively() {
        let s = series_from_infected(&[2, 6, 3], &[1, 2, 0]);
        let fit1 = fit(&s, 1, &SearchConfig::default()).unwrap();
        assert_eq!(fit1.period_mse, 0.0);
        assert_eq!(fit1.params.r0(), 0.0);
        let row = evaluate(&fit1, &s);
        assert_eq!(row.estimated_reach, 2.0);
        assert_eq!(row.reach_error, 9.0);
    }

    #[test]
    fn geometric_series_recovers_r0_two() {
        let s = series_from_infected(&[1, 2, 4, 8, 16, 32], &[1, 2, 4, 8, 16, 0]);
        let result = fit(&s, 6, &SearchConfig::default()).unwrap();
        assert!(
            (result.params.r0() - 2.0).abs() < 1e-3,
            "recovered r0 = {}",
            result.params.r0()
        );
        assert!(result.period_mse < 1e-4);
    }

    #[test]
    fn noise_free_curve_recovery() {
        let truth = ModelParams::from_r0(1.3, 500.0).unwrap();
        let traj = model::project(&truth, 1, 200, DEFAULT_EPS);
        let curve = traj.cumulative_column();
        let (r0, n, obj) = fit_curve(&curve[..8], &SearchConfig::default()).unwrap();
        assert!((r0 - 1.3).abs() / 1.3 < 0.01, "r0 = {r0}");
        assert!((n - 500.0).abs() / 500.0 < 0.05, "n = {n}");
        assert!(obj < 1e-6, "objective = {obj}");
    }

    #[test]
    fn deterministic_across_runs() {
        let s = series_from_infected(&[1, 3, 7, 9, 4], &[1, 2, 5, 3, 0]);
        let a = fit(&s, 4, &SearchConfig::default()).unwrap();
        let b = fit(&s, 4, &SearchConfig::default()).unwrap();
        assert_eq!(a.params.r0(), b.params.r0());
        assert_eq!(a.params.n(), b.params.n());
        assert_eq!(a.period_mse, b.period_mse);
    }

    #[test]
    fn refinement_never_worsens() {
        let s = series_from_infected(&[1, 4, 9, 11], &[1, 3, 4, 0]);
        let coarse = SearchConfig {
            refine_rounds: 0,
            ..Default::default()
        };
        let refined = SearchConfig::default();
        let a = fit(&s, 4, &coarse).unwrap();
        let b = fit(&s, 4, &refined).unwrap();
        assert!(b.period_mse <= a.period_mse);
    }

    #[test]
    fn k_bounds_checked() {
        let s = series_from_infected(&[1, 2], &[1, 0]);
        assert_eq!(
            fit(&s, 0, &SearchConfig::default()).unwrap_err(),
            FitError::KOutOfRange { k: 0, g: 2 }
        );
        assert_eq!(
            fit(&s, 3, &SearchConfig::default()).unwrap_err(),
            FitError::KOutOfRange { k: 3, g: 2 }
        );
    }

    #[test]
    fn config_validation() {
        let bad_shrink = SearchConfig {
            refine_shrink: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            bad_shrink.validate(),
            Err(FitError::InvalidConfig(_))
        ));
        let bad_range = SearchConfig {
            r0_min: 5.0,
            r0_max: 5.0,
            ..Default::default()
        };
        assert!(matches!(
            bad_range.validate(),
            Err(FitError::InvalidConfig(_))
        ));
        let bad_steps = SearchConfig {
            n_steps: 1,
            ..Default::default()
        };
        assert!(matches!(
            bad_steps.validate(),
            Err(FitError::InvalidConfig(_))
        ));
    }

    #[test]
    fn decomposition_uses_observed_decision_rate() {
        let s = series_from_infected(&[4, 8, 2], &[2, 2, 0]);
        let result = fit(&s, 2, &SearchConfig::default()).unwrap();
        // Prefix decisions 4 over 12 infected.
        assert!((result.params.p() - 4.0 / 12.0).abs() < 1e-12);
        assert!((result.params.p() * result.params.lambda() - result.params.r0()).abs() <= 1e-9);
    }

    #[test]
    fn sweep_shape_and_single_row() {
        let s = series_from_infected(&[2, 3, 2], &[2, 1, 0]);
        let report = sweep(&s, &SearchConfig::default()).unwrap();
        assert_eq!(report.rows().len(), 3);
        assert_eq!(report.row(1).period_mse, 0.0);
        for row in report.rows() {
            assert!((row.reach_error_pct - row.reach_error / report.actual_reach()).abs() < 1e-12);
        }

        let single = series_from_infected(&[3], &[0]);
        let report = sweep(&single, &SearchConfig::default()).unwrap();
        assert_eq!(report.rows().len(), 1);
        assert_eq!(report.row(1).period_mse, 0.0);
    }

    #[test]
    fn full_prefix_period_mse_equals_campaign_mse() {
        // At k = G both errors run over the same generations with the same
        // parameters (the reference model).
        let s = series_from_infected(&[2, 7, 9, 5, 1], &[2, 4, 3, 1, 0]);
        let report = sweep(&s, &SearchConfig::default()).unwrap();
        let last = report.row(s.generations());
        assert!(
            (last.period_mse - last.campaign_mse).abs() < 1e-9,
            "period {} vs campaign {}",
            last.period_mse,
            last.campaign_mse
        );
    }

    #[test]
    fn report_csv_format() {
        let s = series_from_infected(&[1, 2], &[1, 0]);
        let report = sweep(&s, &SearchConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_fit_report_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,period_mse,campaign_mse,estimated_reach,reach_error,reach_error_pct"
        );
        assert!(lines.next().unwrap().starts_with("1,0.00,"));
    }
}
