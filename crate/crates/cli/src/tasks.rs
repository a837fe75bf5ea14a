//! Task execution: one scenario (or sweep point) in, one report row out.
//!
//! Every row derives its own seed as `sub_seed(config seed, task name,
//! sweep index)`, so sweep points are independent streams and reruns are
//! bit-reproducible regardless of execution order.

use mimo_capacity::prelude::*;
use std::result::Result;
use mimo_capacity::rng::{rng_from_seed, standard_complex_normal, sub_seed};
use mimo_capacity::statcsi::OptimizeOpts;
use mimo_capacity::waterfill::gamma_mult_from_water_level;

use crate::config::{CsiMode, Scenario, Task};
use crate::error::{CliError, ErrKind};
use crate::report::ReportRow;

fn diag_string(s: &InputCovariance) -> String {
    let entries: Vec<String> =
        s.matrix().diagonal().iter().map(|z| format!("{:.6}", z.re)).collect();
    format!("s_diag={}", entries.join("|"))
}

/// The channel law the task actually runs against: the AWGN regime pins the
/// realization at the fading mean.
fn effective_law(sc: &Scenario) -> Result<FadingLaw, CliError> {
    match sc.csi {
        CsiMode::Awgn => {
            let mn = sc.dims.mn();
            Ok(FadingLaw::new(sc.law.mean().clone(), CMat::zeros(mn, mn))?)
        }
        _ => Ok(sc.law.clone()),
    }
}

/// Execute one scenario point. `param`/`value` tag sweep rows; plain runs
/// pass an empty name.
pub fn execute_point(
    sc: &Scenario,
    param: &str,
    value: Option<f64>,
    sweep_index: u64,
) -> Result<ReportRow, CliError> {
    let row_seed = sub_seed(sc.seed, sc.task.name(), sweep_index);
    let mut row = ReportRow {
        scenario: sc.id.clone(),
        task: sc.task.name().to_string(),
        param: param.to_string(),
        value,
        capacity_bits_per_use: f64::NAN,
        ci_half_width: 0.0,
        certificate: None,
        samples: 1,
        seed: row_seed,
        extra: String::new(),
    };

    match &sc.task {
        Task::Waterfill => {
            let wf = waterfill(sc.law.mean(), &sc.noise, sc.constraint.gamma)?;
            // Certificate: worst Kuhn-Tucker margin over random probes.
            let gm = gamma_mult_from_water_level(wf.water_level);
            let mut rng = rng_from_seed(sub_seed(row_seed, "probes", 0));
            let n = sc.dims.n;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..200 {
                let x = CVec::from_fn(n, |_, _| standard_complex_normal(&mut rng))
                    .scale(sc.constraint.gamma.sqrt());
                worst = worst.max(kt_margin_awgn(&x, &wf.s, sc.law.mean(), &sc.noise, gm)?);
            }
            row.capacity_bits_per_use = wf.capacity_bits;
            row.certificate = Some(worst);
            row.extra = format!(
                "water_level={:.6};active_modes={};{}",
                wf.water_level,
                wf.active_modes,
                diag_string(&wf.s)
            );
        }
        Task::Ergodic { n_samples, s } => {
            let s = match s {
                Some(s) => s.clone(),
                None => InputCovariance::isotropic(sc.dims.n, sc.constraint.gamma),
            };
            s.check_budget(&sc.constraint)?;
            let law = effective_law(sc)?;
            let est = ergodic_capacity(&law, &s, &sc.noise, *n_samples, row_seed)?;
            row.capacity_bits_per_use = est.bits_per_use;
            row.ci_half_width = est.ci_half_width;
            row.samples = est.samples;
            row.extra = diag_string(&s);
        }
        Task::OptimizeCov { step, iters, mc_samples, tol } => {
            let law = effective_law(sc)?;
            let opts = OptimizeOpts {
                step: *step,
                iters: *iters,
                mc_samples: *mc_samples,
                seed: row_seed,
                tol: *tol,
            };
            let sol = optimize_covariance(&law, &sc.noise, sc.constraint.gamma, &opts)?;
            if !sol.converged {
                return Err(CliError::new(
                    ErrKind::NonConvergence,
                    format!(
                        "covariance search exhausted {} iterations (kt gap {:.3e} > tol {tol:.3e})",
                        sol.iterations, sol.kt_gap
                    ),
                ));
            }
            row.capacity_bits_per_use = sol.capacity.bits_per_use;
            row.ci_half_width = sol.capacity.ci_half_width;
            row.samples = sol.capacity.samples;
            row.certificate = Some(sol.kt_gap);
            row.extra = format!(
                "{};kt_mu={:.6};kt_stderr={:.3e};iterations={}",
                diag_string(&sol.s),
                sol.kt_mu,
                sol.kt_stderr,
                sol.iterations
            );
        }
        Task::Mi { n_samples, grid } => {
            let p = DiscreteInputMeasure::uniform(grid.candidates.clone())?;
            p.check_power(&sc.constraint)?;
            let est = match &sc.csi {
                CsiMode::Awgn => {
                    let law = effective_law(sc)?;
                    mi_nocsi(&p, &law, &sc.noise, *n_samples, row_seed)?
                }
                CsiMode::None => mi_nocsi(&p, &sc.law, &sc.noise, *n_samples, row_seed)?,
                CsiMode::Partial(model) => {
                    mi_partialcsi(&p, &sc.law, model, &sc.noise, *n_samples, row_seed)?
                }
                CsiMode::Full => {
                    let model = PartialCsiModel::full_csi(&sc.law);
                    mi_partialcsi(&p, &sc.law, &model, &sc.noise, *n_samples, row_seed)?
                }
            };
            row.capacity_bits_per_use = est.bits_per_use;
            row.ci_half_width = est.ci_half_width;
            row.samples = est.samples;
            row.extra = format!("atoms={};grid={}", p.len(), grid.description);
        }
        Task::Ba { iters, n_samples, tol_bits, grid } => {
            let opts = BaOpts { iters: *iters, n_samples: *n_samples, tol_bits: *tol_bits, seed: row_seed };
            let (law, pcsi_owned) = match &sc.csi {
                CsiMode::Awgn => (effective_law(sc)?, None),
                CsiMode::None => (sc.law.clone(), None),
                CsiMode::Partial(model) => (sc.law.clone(), Some(model.clone())),
                CsiMode::Full => (sc.law.clone(), Some(PartialCsiModel::full_csi(&sc.law))),
            };
            let sol = ba_solve(grid, &law, pcsi_owned.as_ref(), &sc.noise, &sc.constraint, &opts)?;
            if !sol.converged {
                return Err(CliError::new(
                    ErrKind::NonConvergence,
                    format!(
                        "Blahut-Arimoto exhausted its sweep budget before the certificate closed \
                         (max margin {:.3e}, tol {tol_bits:.3e})",
                        sol.kt_max_margin
                    ),
                ));
            }
            row.capacity_bits_per_use = sol.capacity_lower_bound;
            row.samples = *n_samples;
            row.certificate = Some(sol.kt_max_margin);
            let mut atoms: Vec<(f64, f64)> = sol
                .measure
                .points()
                .iter()
                .zip(sol.measure.probs())
                .map(|(x, &p)| (x.norm(), p))
                .collect();
            atoms.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let atom_str: Vec<String> =
                atoms.iter().take(6).map(|(a, p)| format!("{a:.4}:{p:.4}")).collect();
            row.extra = format!(
                "gamma_mult={:.6};achieved_cost={:.6};iterations={};atoms={}",
                sol.lagrange_gamma,
                sol.achieved_cost,
                sol.iterations,
                atom_str.join("|")
            );
        }
        Task::KtCheck { n_samples, s } => {
            let s = match s {
                Some(s) => s.clone(),
                None => InputCovariance::isotropic(sc.dims.n, sc.constraint.gamma),
            };
            s.check_budget(&sc.constraint)?;
            let law = effective_law(sc)?;
            let kt = kt_check_fullcsi(&s, &law, &sc.noise, *n_samples, row_seed)?;
            let residual = capacity_tradeoff_relation(
                &s,
                &law,
                &sc.noise,
                kt.mu,
                sc.constraint.gamma,
                *n_samples,
                sub_seed(row_seed, "tradeoff", 0),
            )?;
            let est = ergodic_capacity(&law, &s, &sc.noise, *n_samples, sub_seed(row_seed, "cap", 0))?;
            row.capacity_bits_per_use = est.bits_per_use;
            row.ci_half_width = est.ci_half_width;
            row.samples = *n_samples;
            row.certificate = Some(kt.gap);
            row.extra = format!(
                "kt_mu={:.6};kt_stderr={:.3e};tradeoff_residual={:.3e};{}",
                kt.mu,
                kt.stderr,
                residual,
                diag_string(&s)
            );
        }
    }

    if !row.capacity_bits_per_use.is_finite() || !row.ci_half_width.is_finite() {
        return Err(CliError::new(
            ErrKind::Numerical,
            format!("non-finite result: capacity {}", row.capacity_bits_per_use),
        ));
    }
    Ok(row)
}

/// Config path for a sweepable numeric parameter, plus whether it is
/// integer-valued.
pub fn sweep_target(param: &str) -> Option<(&'static str, bool)> {
    match param {
        "gamma" => Some(("constraint.gamma", false)),
        "sigma2" => Some(("noise.sigma2", false)),
        "eta" => Some(("constraint.eta", false)),
        "k_factor" => Some(("fading.k_factor", false)),
        "est_var" => Some(("csi.est_var", false)),
        "n_samples" => Some(("task.n_samples", true)),
        "mc_samples" => Some(("task.mc_samples", true)),
        "iters" => Some(("task.iters", true)),
        "grid_levels" => Some(("task.grid_levels", true)),
        "grid_phases" => Some(("task.grid_phases", true)),
        "grid_max_amp" => Some(("task.grid_max_amp", false)),
        _ => None,
    }
}
