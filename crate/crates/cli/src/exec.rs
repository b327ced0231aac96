//! Run one validated experiment and shape its deterministic JSON body.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use shiftcompact::family::{metric_d, MetricParams};
use shiftcompact::peel;
use shiftcompact::pekar::{solve_pekar, PekarParams};
use shiftcompact::rate::{dual_rate, dual_sweep, rate_i};
use shiftcompact::sampler::{
    fk_bound_check, free_energy_estimate, khasminskii_check, tilted_sampler, tube_experiment, y_eps_energy, TiltConfig,
    TubeParams,
};
use shiftcompact::stats::{decreasing_tau, mean_se};

use crate::config::*;

/// Everything a run produces; nothing is written until a run succeeds.
#[derive(Debug)]
pub struct Outcome {
    pub body: Value,
    pub csv: Option<String>,
    /// Numerical-failure flags such as `NoConvergence`; nonempty means exit 3.
    pub flags: Vec<String>,
}

#[derive(Serialize)]
struct Body<'a, P: Serialize, R: Serialize> {
    command: &'a str,
    seed: Option<u64>,
    config: &'a P,
    result: R,
    flags: &'a [String],
}

fn finish<P: Serialize, R: Serialize>(
    cfg: &ExperimentConfig,
    params: &P,
    result: R,
    csv: Option<String>,
    flags: Vec<String>,
) -> CfgResult<Outcome> {
    let body = serde_json::to_value(Body {
        command: &cfg.command,
        seed: cfg.seed,
        config: params,
        result,
        flags: &flags,
    })
    .map_err(|e| ConfigError(format!("serializing result: {e}")))?;
    Ok(Outcome { body, csv, flags })
}

fn chain_config(c: &ChainCmd, seed: u64) -> TiltConfig {
    TiltConfig {
        eps: c.eps,
        beta: c.beta,
        bridge_weight: c.bridge_weight,
        pivot_weight: c.pivot_weight,
        n_sweeps: c.n_sweeps,
        burn_in: c.burn_in,
        thin: c.thin,
        seed,
    }
}

fn steps_for(t: f64, dt: f64) -> CfgResult<usize> {
    if !(t > 0.0) || !(dt > 0.0) || !(t / dt).is_finite() {
        return Err(ConfigError("params: t and dt must be positive".into()));
    }
    Ok((t / dt).round().max(1.0) as usize)
}

/// Relative paths inside `cfg` resolve against `base`.
pub fn execute(cfg: &ExperimentConfig, base: &Path) -> CfgResult<Outcome> {
    cfg.check_shape()?;
    let seed = cfg.seed.unwrap_or(0);
    let p = &cfg.params;
    match cfg.command.as_str() {
        "metric" => {
            let c: MetricCmd = parse_at(p, "params")?;
            let params = MetricParams::new(c.r_max)?;
            let r = metric_d(&c.a.load(base)?, &c.b.load(base)?, &params)?;
            finish(cfg, &c, r, None, vec![])
        }
        "peel" => {
            let c: PeelCmd = parse_at(p, "params")?;
            let d = peel(&c.measure.load(base)?, &c.peel)?;
            finish(cfg, &c, d.report(&c.kernel)?, None, vec![])
        }
        "rate" => {
            let c: RateCmd = parse_at(p, "params")?;
            let m = c.measure.load(base)?;
            let direct = rate_i(&m);
            let dual = if c.dual {
                let centers = c.centers.clone().unwrap_or_else(|| vec![vec![0.0; m.dim()]]);
                let cands = dual_sweep(&centers);
                let (rep, best) = dual_rate(&m, &cands)?;
                Some(json!({"report": rep, "best": cands[best]}))
            } else {
                None
            };
            finish(cfg, &c, json!({"direct": direct, "dual": dual}), None, vec![])
        }
        "pekar" => {
            let c: PekarCmd = parse_at(p, "params")?;
            let r = solve_pekar(c.mass, &c.solver)?;
            let mut flags = vec![];
            if !r.converged {
                flags.push("NoConvergence".into());
            }
            let summary = json!({
                "mass": r.mass,
                "energy": r.energy,
                "energy_over_mass_cubed": r.energy / r.mass.powi(3),
                "coulomb_term": r.coulomb_term,
                "kinetic_term": r.kinetic_term,
                "virial_ratio": r.coulomb_term / r.kinetic_term,
                "iterations": r.iterations,
                "residual": r.residual,
                "converged": r.converged,
                "rearranged": r.rearranged,
            });
            finish(cfg, &c, summary, Some(r.profile().to_csv()), flags)
        }
        "fk-check" => {
            let c: FkCmd = parse_at(p, "params")?;
            let steps = steps_for(c.t, c.dt)?;
            let r = fk_bound_check(&c.potential, c.dim, c.n_paths, steps, c.dt, seed)?;
            let flags = if r.holds() {
                vec![]
            } else {
                vec!["BoundViolated".into()]
            };
            let holds = r.holds();
            finish(cfg, &c, json!({"report": r, "holds": holds}), None, flags)
        }
        "khasminskii" => {
            let c: KhasminskiiCmd = parse_at(p, "params")?;
            let steps = steps_for(c.t, c.dt)?;
            let r = khasminskii_check(c.n_paths, steps, c.dt, c.lambda, seed)?;
            let mut flags = vec![];
            if r.eta_too_large {
                flags.push("EtaTooLarge".into());
            } else if !r.bound_holds() {
                flags.push("BoundViolated".into());
            }
            let (holds, z) = (r.bound_holds(), r.anchor_z());
            finish(
                cfg,
                &c,
                json!({"report": r, "holds": holds, "anchor_z": z}),
                None,
                flags,
            )
        }
        "tilt" => {
            let c: TiltCmd = parse_at(p, "params")?;
            let steps = steps_for(c.t, c.dt)?;
            let tc = chain_config(&c.chain, seed);
            let chains = tilted_sampler(&tc, 3, steps, c.dt, c.chains)?;
            let mut per_chain = Vec::new();
            let mut means = Vec::new();
            let (mut rem, mut bnd, mut count) = (0.0, 0.0, 0usize);
            for ch in &chains {
                let (m, _) = mean_se(&ch.energies);
                means.push(m);
                for s in &ch.samples {
                    let y = y_eps_energy(s, tc.eps)?;
                    rem += y.remainder;
                    bnd += y.bound;
                    count += 1;
                }
                per_chain.push(json!({
                    "chain": ch.chain,
                    "acceptance_bridge": ch.acceptance[0],
                    "acceptance_pivot": ch.acceptance[1],
                    "energies": ch.energies,
                    "endpoints": ch.samples.iter().map(|s| s.endpoint().to_vec()).collect::<Vec<_>>(),
                }));
            }
            let (mean, se) = mean_se(&means);
            let n = count.max(1) as f64;
            let result = json!({
                "steps": steps,
                "mean_energy": mean,
                "energy_std_error": se,
                "diagonal_term": c.dt / tc.eps,
                "y_eps_mean_remainder": rem / n,
                "y_eps_mean_bound": bnd / n,
                "chains": per_chain,
            });
            finish(cfg, &c, result, None, vec![])
        }
        "tube" => {
            let c: TubeCmd = parse_at(p, "params")?;
            let tc = chain_config(&c.chain, seed);
            let profile = solve_pekar(1.0, &c.pekar)?;
            let mut flags = vec![];
            if !profile.converged {
                flags.push("NoConvergence".into());
            }
            let params = TubeParams {
                dt: c.dt,
                chains: c.chains,
                grid_h: c.grid_h,
                metric: MetricParams::new(c.r_max)?,
                peel: c.peel.clone(),
            };
            let rows = tube_experiment(&tc, &c.t_list, &params, &profile.profile())?;
            let medians: Vec<f64> = rows.iter().map(|r| r.median).collect();
            let strictly = medians.windows(2).all(|w| w[1] < w[0]);
            let mut csv = String::from("t,steps,n_samples,median,mean,q25,q75,mean_energy\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    r.t, r.steps, r.n_samples, r.median, r.mean, r.q25, r.q75, r.mean_energy
                );
            }
            let result = json!({
                "rows": rows,
                "median_strictly_decreasing": strictly,
                "median_tau": decreasing_tau(&medians),
            });
            finish(cfg, &c, result, Some(csv), flags)
        }
        "free-energy" => {
            let c: FreeEnergyCmd = parse_at(p, "params")?;
            let tc = TiltConfig {
                eps: c.eps,
                beta: c.beta,
                seed,
                ..Default::default()
            };
            let mut rows = Vec::new();
            for &t in &c.t_list {
                rows.push(json!({"t": t, "report": free_energy_estimate(&tc, t, c.dt, c.n_paths, seed)?}));
            }
            let reference = if c.reference {
                Some(solve_pekar(1.0, &PekarParams::default())?.energy)
            } else {
                None
            };
            finish(cfg, &c, json!({"rows": rows, "rho_reference": reference}), None, vec![])
        }
        other => Err(ConfigError(format!("config.command: unknown command `{other}`"))),
    }
}
