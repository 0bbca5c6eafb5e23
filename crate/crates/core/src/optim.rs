//! Squared-error fit of profile similarity to a target similarity, its
//! closed-form gradient, and projected gradient descent on the weights.
//!
//! Objective: `J(w) = ½‖S_f(w) − S_t‖²_F + ½λ‖w‖²` over all `N_v²` entries,
//! subject to `w ≥ 0`.
//!
//! Gradient: with `Q = S_f − S_t`, `R = diag(Σ_j q_ij·s_ij)` and `L = Q − R`,
//! `∇J = diag(Pᵀ·L·P) + λ·w`. It is evaluated as `G = Q·P − R·P` followed by a
//! column reduction `g_k = Σ_i P_ik·G_ik`, never forming `Pᵀ·L·P`.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::profile::{normalize, similarity_from_normalized, GlobalWeights, NormalizedProfiles, ProfileCorpus};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub step_size: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub backtracking: bool,
    pub shrink: f64,
    pub armijo: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.01,
            step_size: 0.1,
            max_iters: 200,
            rel_tol: 1e-6,
            backtracking: true,
            shrink: 0.5,
            armijo: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be a finite nonnegative number");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.rel_tol.is_finite() && self.rel_tol >= 0.0) {
            return bad("rel_tol must be nonnegative");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub fit: f64,
    pub penalty: f64,
    pub grad_inf: f64,
    /// Step size that produced this iterate; 0 for the starting point.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    Converged,
    /// The projected step does not move the weights.
    Stationary,
    /// Backtracking shrank the step below its floor without sufficient decrease.
    StepFloor,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub stop: Option<StopReason>,
}

impl TrainTrace {
    /// Number of descent iterations run (the starting point is record 0).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,J,fit,penalty,grad_inf,step\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                r.iter, r.objective, r.fit, r.penalty, r.grad_inf, r.step
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Everything derived from one weight vector that the objective and gradient share.
struct State {
    profiles: NormalizedProfiles,
    sf: SimilarityMatrix,
    fit: f64,
    penalty: f64,
}

impl State {
    fn objective(&self) -> f64 {
        self.fit + self.penalty
    }
}

fn check_target(corpus: &ProfileCorpus, target: &SimilarityMatrix) -> Result<()> {
    if target.n_items() != corpus.n_items() {
        return Err(Error::Dimension(format!(
            "target similarity covers {} items but the corpus has {}",
            target.n_items(),
            corpus.n_items()
        )));
    }
    Ok(())
}

fn evaluate_state(corpus: &ProfileCorpus, w: &GlobalWeights, target: &SimilarityMatrix, lambda: f64) -> Result<State> {
    check_target(corpus, target)?;
    let profiles = normalize(corpus, w)?;
    let sf = similarity_from_normalized(&profiles, w);
    // row sums first, then rows in order: independent of thread count
    let row_sums: Vec<f64> = Zip::from(sf.view().rows())
        .and(target.view().rows())
        .par_map_collect(|a, b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .to_vec();
    let fit = 0.5 * row_sums.iter().sum::<f64>();
    let penalty = 0.5 * lambda * w.as_array().dot(w.as_array());
    Ok(State {
        profiles,
        sf,
        fit,
        penalty,
    })
}

fn gradient_from_state(state: &State, target: &SimilarityMatrix, w: &GlobalWeights, lambda: f64) -> Array1<f64> {
    let sf = state.sf.view();
    let q: Array2<f64> = &sf - &target.view();
    let r_diag: Array1<f64> = Zip::from(q.rows())
        .and(sf.rows())
        .map_collect(|qi, si| qi.iter().zip(si).map(|(a, b)| a * b).sum::<f64>());

    let p = &state.profiles.p;
    let mut g_mat = linalg::matmul(q.view(), p.view());
    for ((mut row, p_row), r) in g_mat.axis_iter_mut(Axis(0)).zip(p.axis_iter(Axis(0))).zip(&r_diag) {
        row.scaled_add(-r, &p_row);
    }
    // g_k = Σ_i P_ik·G_ik, rows summed in index order
    let mut grad = Array1::zeros(p.ncols());
    for (p_row, g_row) in p.axis_iter(Axis(0)).zip(g_mat.axis_iter(Axis(0))) {
        Zip::from(&mut grad)
            .and(&p_row)
            .and(&g_row)
            .for_each(|acc, &a, &b| *acc += a * b);
    }
    grad.scaled_add(lambda, w.as_array());
    grad
}

/// `J(w)` for target similarity `target`.
pub fn objective(corpus: &ProfileCorpus, w: &GlobalWeights, target: &SimilarityMatrix, lambda: f64) -> Result<f64> {
    Ok(evaluate_state(corpus, w, target, lambda)?.objective())
}

/// `∂J/∂w` in matrix form.
pub fn gradient(
    corpus: &ProfileCorpus,
    w: &GlobalWeights,
    target: &SimilarityMatrix,
    lambda: f64,
) -> Result<Array1<f64>> {
    let state = evaluate_state(corpus, w, target, lambda)?;
    Ok(gradient_from_state(&state, target, w, lambda))
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn ensure_finite(j: f64, g: &Array1<f64>, iter: usize) -> Result<()> {
    if !j.is_finite() {
        return Err(Error::Numeric(format!("objective became {j} at iteration {iter}")));
    }
    if let Some((k, v)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "gradient entry {k} became {v} at iteration {iter}"
        )));
    }
    Ok(())
}

/// Projected gradient descent from `w0`.
///
/// Each iteration tries `w⁺ = max(0, w − η·g)`. With backtracking, `η` shrinks
/// by `cfg.shrink` until `J(w⁺) ≤ J(w) − (c/η)·‖w⁺ − w‖²`; where no coordinate
/// is clamped this is the usual `J(w) − c·η·‖g‖²`. The next iteration first
/// tries the last accepted step divided by `cfg.shrink`, so the step can
/// recover after a hard stretch; the objective still never increases.
pub fn train(
    corpus: &ProfileCorpus,
    target: &SimilarityMatrix,
    w0: GlobalWeights,
    cfg: &TrainConfig,
) -> Result<(GlobalWeights, TrainTrace)> {
    cfg.validate()?;
    let lambda = cfg.lambda;
    let step_floor = cfg.step_size * 1e-12;

    let mut w = w0;
    let mut state = evaluate_state(corpus, &w, target, lambda)?;
    let mut grad = gradient_from_state(&state, target, &w, lambda);
    ensure_finite(state.objective(), &grad, 0)?;

    let mut trace = TrainTrace::default();
    let record = |iter: usize, s: &State, g: &Array1<f64>, step: f64| TraceRecord {
        iter,
        objective: s.objective(),
        fit: s.fit,
        penalty: s.penalty,
        grad_inf: inf_norm(g),
        step,
    };
    trace.records.push(record(0, &state, &grad, 0.0));

    let mut eta = cfg.step_size;
    for iter in 1..=cfg.max_iters {
        let current = state.objective();
        if cfg.backtracking && iter > 1 {
            eta /= cfg.shrink;
        }
        let accepted = loop {
            let candidate = GlobalWeights::project(w.as_array() - &(&grad * eta))?;
            let moved = candidate.as_array() - w.as_array();
            let moved_sq = moved.dot(&moved);
            if moved_sq == 0.0 {
                trace.records.push(record(iter, &state, &grad, 0.0));
                trace.stop = Some(StopReason::Stationary);
                return Ok((w, trace));
            }
            let next = evaluate_state(corpus, &candidate, target, lambda)?;
            if !cfg.backtracking || next.objective() <= current - cfg.armijo / eta * moved_sq {
                break Some((candidate, next));
            }
            eta *= cfg.shrink;
            if eta < step_floor {
                break None;
            }
        };
        let Some((candidate, next)) = accepted else {
            log::debug!("backtracking hit the step floor at iteration {iter}");
            trace.stop = Some(StopReason::StepFloor);
            return Ok((w, trace));
        };

        w = candidate;
        state = next;
        grad = gradient_from_state(&state, target, &w, lambda);
        ensure_finite(state.objective(), &grad, iter)?;
        trace.records.push(record(iter, &state, &grad, eta));

        let new = state.objective();
        if new == 0.0 || (current - new).abs() / current.abs() < cfg.rel_tol {
            trace.stop = Some(StopReason::Converged);
            return Ok((w, trace));
        }
    }
    trace.stop = Some(StopReason::MaxIters);
    Ok((w, trace))
}
