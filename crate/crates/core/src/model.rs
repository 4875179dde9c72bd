//! Deterministic finite-population branching model.
//!
//! Expected infections follow
//!
//! ```text
//! I(1)   = seeds
//! I(g+1) = I(g) · r0 · max(0, 1 − C(g)/N)      C(g) = Σ_{j≤g} I(j)
//! ```
//!
//! with `r0 = p·λ`. A single step may overshoot the population; the
//! increment is clamped so that the cumulative never exceeds `N + seeds`.
//! The recursion stops at the first generation whose expected mass falls
//! below `eps` (extinction) or at the horizon.
//!
//! The recursion depends on `p` and `λ` only through their product, so
//! trajectories for parameter sets with equal `r0` and `N` are identical;
//! the estimator exploits this by searching over `(r0, N)` directly.

use std::io::Write;

use thiserror::Error;

use crate::series::GenerationSeries;

/// Default extinction threshold: below half an expected individual.
pub const DEFAULT_EPS: f64 = 0.5;
/// Default projection horizon for reach prediction.
pub const DEFAULT_HORIZON: usize = 200;
/// Hard cap on projection length.
pub const MAX_HORIZON: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("trajectory mse needs upto >= 1")]
    UptoZero,
}

/// Global branching-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    p: f64,
    lambda: f64,
    n: f64,
    r0: f64,
}

impl ModelParams {
    /// `p ∈ [0,1]`, `λ ≥ 0`, `N ≥ 1`; `r0` is derived as `p·λ`.
    pub fn new(p: f64, lambda: f64, n: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::InvalidParams(format!("p = {p} outside [0, 1]")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "lambda = {lambda} must be >= 0"
            )));
        }
        if !(n >= 1.0 && n.is_finite()) {
            return Err(ModelError::InvalidParams(format!("N = {n} must be >= 1")));
        }
        Ok(Self {
            p,
            lambda,
            n,
            r0: p * lambda,
        })
    }

    /// Parameters known only through the product `r0`; stores `p = 1`,
    /// `λ = r0`.
    pub fn from_r0(r0: f64, n: f64) -> Result<Self, ModelError> {
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(ModelError::InvalidParams(format!("r0 = {r0} must be >= 0")));
        }
        if !(n >= 1.0 && n.is_finite()) {
            return Err(ModelError::InvalidParams(format!("N = {n} must be >= 1")));
        }
        Ok(Self {
            p: 1.0,
            lambda: r0,
            n,
            r0,
        })
    }

    /// Internal constructor preserving a searched `r0` next to a
    /// decomposed `(p, λ)`; callers guarantee `|p·λ − r0| ≤ 1e-9`.
    pub(crate) fn from_parts(p: f64, lambda: f64, n: f64, r0: f64) -> Self {
        debug_assert!((p * lambda - r0).abs() <= 1e-9 * r0.max(1.0));
        Self { p, lambda, n, r0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }
}

/// Expected infections per generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    expected_infected: Vec<f64>,
    expected_cumulative: Vec<f64>,
    extinct_at: Option<usize>,
}

impl Trajectory {
    /// Number of projected generations (those with mass ≥ eps).
    pub fn len(&self) -> usize {
        self.expected_infected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expected_infected.is_empty()
    }

    pub fn infected(&self, g: usize) -> f64 {
        self.expected_infected[g - 1]
    }

    /// Cumulative at `g`, extending flat past extinction.
    pub fn cumulative(&self, g: usize) -> f64 {
        let idx = g.min(self.expected_cumulative.len());
        self.expected_cumulative[idx - 1]
    }

    pub fn infected_column(&self) -> &[f64] {
        &self.expected_infected
    }

    pub fn cumulative_column(&self) -> &[f64] {
        &self.expected_cumulative
    }

    /// Last generation with expected mass ≥ eps, when the recursion died
    /// before the horizon.
    pub fn extinct_at(&self) -> Option<usize> {
        self.extinct_at
    }

    pub fn final_cumulative(&self) -> f64 {
        *self
            .expected_cumulative
            .last()
            .expect("trajectory holds at least the seed generation")
    }
}

/// Runs the expected-value recursion for up to `horizon` generations.
///
/// `horizon ≤ 10_000` and `eps > 0` are contract preconditions.
pub fn project(params: &ModelParams, seeds: u64, horizon: usize, eps: f64) -> Trajectory {
    assert!(seeds >= 1, "seeds must be a positive count");
    project_f(params, seeds as f64, horizon, eps)
}

/// [`project`] over a real seed mass; the estimator fits raw cumulative
/// curves whose first value needs no rounding.
pub(crate) fn project_f(params: &ModelParams, seeds: f64, horizon: usize, eps: f64) -> Trajectory {
    assert!(seeds >= 1.0, "seeds must be at least 1");
    assert!(
        (1..=MAX_HORIZON).contains(&horizon),
        "horizon must be in 1..={MAX_HORIZON}"
    );
    assert!(eps > 0.0, "eps must be positive");

    let mut infected = vec![seeds];
    let mut cumulative = vec![seeds];
    let mut extinct_at = None;

    let mut current = seeds;
    let mut total = seeds;
    while infected.len() < horizon {
        let depletion = (1.0 - total / params.n).max(0.0);
        let next = (current * params.r0 * depletion).min((params.n + seeds - total).max(0.0));
        if next < eps {
            extinct_at = Some(infected.len());
            break;
        }
        current = next;
        total += next;
        infected.push(next);
        cumulative.push(total);
    }
    Trajectory {
        expected_infected: infected,
        expected_cumulative: cumulative,
        extinct_at,
    }
}

/// Expected total reach: cumulative at termination of the default-horizon
/// projection.
pub fn predicted_reach(params: &ModelParams, seeds: u64) -> f64 {
    project(params, seeds, DEFAULT_HORIZON, DEFAULT_EPS).final_cumulative()
}

/// Mean squared error between model and observed cumulative curves over
/// generations `1..=upto`. Model generations past extinction contribute the
/// final cumulative value.
pub fn trajectory_mse(
    traj: &Trajectory,
    observed: &GenerationSeries,
    upto: usize,
) -> Result<f64, ModelError> {
    if upto == 0 {
        return Err(ModelError::UptoZero);
    }
    assert!(
        upto <= observed.generations(),
        "upto exceeds observed generations"
    );
    let curve = observed.cumulative_curve();
    Ok(cumulative_mse(traj.cumulative_column(), &curve[..upto]))
}

/// MSE between a model cumulative column and an observed cumulative slice,
/// extending the model flat past its last generation.
pub(crate) fn cumulative_mse(model_cum: &[f64], observed_cum: &[f64]) -> f64 {
    let last = *model_cum.last().expect("model trajectory is non-empty");
    let mut acc = 0.0;
    for (g, &obs) in observed_cum.iter().enumerate() {
        let model = if g < model_cum.len() {
            model_cum[g]
        } else {
            last
        };
        let diff = model - obs;
        acc += diff * diff;
    }
    acc / observed_cum.len() as f64
}

/// Writes `generation,expected_infected,expected_cumulative` rows.
pub fn write_trajectory_csv<W: Write>(mut out: W, traj: &Trajectory) -> std::io::Result<()> {
    writeln!(out, "generation,expected_infected,expected_cumulative")?;
    for g in 1..=traj.len() {
        writeln!(out, "{g},{:.6},{:.6}", traj.infected(g), traj.cumulative(g))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from_infected(infected: &[u64]) -> GenerationSeries {
        let sent: Vec<u64> = (0..infected.len())
            .map(|i| {
                if i + 1 < infected.len() {
                    infected[i + 1]
                } else {
                    0
                }
            })
            .collect();
        let decisions = vec![0u64; infected.len()];
        // decisions play no role in the mse; zero everywhere is valid.
        GenerationSeries::from_columns(infected.to_vec(), decisions, sent).unwrap()
    }

    #[test]
    fn pure_doubling_when_population_is_effectively_infinite() {
        let params = ModelParams::new(1.0, 2.0, 1e9).unwrap();
        let traj = project(&params, 1, 5, DEFAULT_EPS);
        let got: Vec<f64> = traj.infected_column().to_vec();
        for (g, expect) in [1.0, 2.0, 4.0, 8.0, 16.0].iter().enumerate() {
            assert!((got[g] - expect).abs() < 1e-3, "g={} got {}", g + 1, got[g]);
        }
        assert!(traj.extinct_at().is_none());
    }

    #[test]
    fn hand_executed_recursion() {
        let params = ModelParams::new(0.5, 4.0, 100.0).unwrap();
        let traj = project(&params, 1, 3, DEFAULT_EPS);
        assert!((traj.infected(2) - 1.98).abs() < 1e-12);
        assert!((traj.infected(3) - 3.8420).abs() < 1e-4);
    }

    #[test]
    fn subcritical_decays_to_extinction() {
        let params = ModelParams::new(0.5, 1.6, 1e6).unwrap();
        let traj = project(&params, 10, 200, DEFAULT_EPS);
        let col = traj.infected_column();
        for w in col.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(traj.extinct_at().is_some());
        assert_eq!(traj.extinct_at().unwrap(), traj.len());
    }

    #[test]
    fn zero_r0_reach_is_seeds() {
        let params = ModelParams::new(0.0, 5.0, 100.0).unwrap();
        assert_eq!(predicted_reach(&params, 7), 7.0);
    }

    #[test]
    fn saturated_population_stays_at_seeds() {
        let params = ModelParams::new(1.0, 9.0, 7.0).unwrap();
        assert_eq!(predicted_reach(&params, 7), 7.0);
    }

    #[test]
    fn reach_matches_independent_summation_loop() {
        // Oracle: re-run the recursion as a plain summing loop.
        let (p, lambda, n, seeds) = (0.5, 4.0, 100.0, 1u64);
        let mut total = seeds as f64;
        let mut current = seeds as f64;
        loop {
            let mut next = current * (p * lambda) * (1.0 - total / n).max(0.0);
            next = next.min((n + seeds as f64 - total).max(0.0));
            if next < DEFAULT_EPS {
                break;
            }
            total += next;
            current = next;
        }
        let params = ModelParams::new(p, lambda, n).unwrap();
        assert!((predicted_reach(&params, seeds) - total).abs() < 1e-9);
    }

    #[test]
    fn cumulative_never_exceeds_population_plus_seeds() {
        for &(r0, n, seeds) in &[
            (8.0, 50.0, 1u64),
            (25.0, 300.0, 3),
            (2.0, 10.0, 5),
            (1.1, 4.0, 2),
        ] {
            let params = ModelParams::from_r0(r0, n).unwrap();
            let traj = project(&params, seeds, 200, DEFAULT_EPS);
            for g in 1..=traj.len() {
                assert!(traj.cumulative(g) <= n + seeds as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn projection_depends_only_on_r0() {
        let a = ModelParams::new(0.5, 4.0, 100.0).unwrap();
        let b = ModelParams::new(0.25, 8.0, 100.0).unwrap();
        let c = ModelParams::new(1.0, 2.0, 100.0).unwrap();
        let ta = project(&a, 1, 50, DEFAULT_EPS);
        let tb = project(&b, 1, 50, DEFAULT_EPS);
        let tc = project(&c, 1, 50, DEFAULT_EPS);
        // Exact equality: the recursion reads only the stored product.
        assert_eq!(ta, tb);
        assert_eq!(ta, tc);
    }

    #[test]
    fn reach_monotone_in_r0_and_n() {
        let r0s = [0.5, 1.0, 1.5, 2.5, 4.0];
        let ns = [10.0, 100.0, 1000.0, 10_000.0];
        for &n in &ns {
            let mut prev = -1.0;
            for &r0 in &r0s {
                let reach = predicted_reach(&ModelParams::from_r0(r0, n).unwrap(), 1);
                assert!(reach >= prev - 1e-12, "reach not monotone in r0 at N={n}");
                prev = reach;
            }
        }
        for &r0 in &r0s {
            let mut prev = -1.0;
            for &n in &ns {
                let reach = predicted_reach(&ModelParams::from_r0(r0, n).unwrap(), 1);
                assert!(reach >= prev - 1e-12, "reach not monotone in N at r0={r0}");
                prev = reach;
            }
        }
    }

    #[test]
    fn mse_zero_for_exact_match_and_nine_for_offset_three() {
        let observed = series_from_infected(&[1, 2, 4]);
        let exact = Trajectory {
            expected_infected: vec![1.0, 2.0, 4.0],
            expected_cumulative: vec![1.0, 3.0, 7.0],
            extinct_at: None,
        };
        assert_eq!(trajectory_mse(&exact, &observed, 3).unwrap(), 0.0);

        let offset = Trajectory {
            expected_infected: vec![4.0, 2.0, 4.0],
            expected_cumulative: vec![4.0, 6.0, 10.0],
            extinct_at: None,
        };
        assert_eq!(trajectory_mse(&offset, &observed, 3).unwrap(), 9.0);
    }

    #[test]
    fn mse_extends_final_value_past_extinction() {
        let observed = series_from_infected(&[2, 1, 1]);
        let short = Trajectory {
            expected_infected: vec![2.0],
            expected_cumulative: vec![2.0],
            extinct_at: Some(1),
        };
        // Observed cumulative: 2, 3, 4; model stays at 2 -> (0 + 1 + 4)/3.
        let mse = trajectory_mse(&short, &observed, 3).unwrap();
        assert!((mse - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn upto_zero_is_an_error() {
        let observed = series_from_infected(&[1]);
        let traj = project(&ModelParams::from_r0(0.0, 10.0).unwrap(), 1, 5, DEFAULT_EPS);
        assert_eq!(
            trajectory_mse(&traj, &observed, 0).unwrap_err(),
            ModelError::UptoZero
        );
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(-0.1, 1.0, 10.0).is_err());
        assert!(ModelParams::new(1.1, 1.0, 10.0).is_err());
        assert!(ModelParams::new(0.5, -1.0, 10.0).is_err());
        assert!(ModelParams::new(0.5, 1.0, 0.5).is_err());
        assert!(ModelParams::from_r0(f64::NAN, 10.0).is_err());
    }
}
