use gcf_core::dense::perron;
use gcf_core::grandstats::{
    free_energy_check, gas_pressure, grand_partition, l1_distance, log_canonical_partition, log_partition_derivatives,
    maxent_grid_oracle, maxent_solve, particle_distribution, GrandCanonicalEnsemble,
};
use gcf_core::potentials::{check_admissibility, finite_weights, Verdict};
use gcf_core::symbolic::table_len;
use gcf_core::thermo::{
    analyticity_sweep, classical_table, constant_log_lambda, derivative_identity, equilibrium_holonomic,
    grand_pressure, NodeStatus, OptimizerConfig, SweepConfig,
};
use gcf_core::transfer::{assemble_classical, assemble_grand, partition_iterate, power_iterate};
use gcf_core::{CylinderFunction, PotentialFamily, SpectralSolution, TransferMatrix, Word};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, FamilyKindName, OperatorKindName, Units};
use crate::error::CliError;
use crate::output::{word_label, Emitter, Outcome, Status};

/// Dense spectral-gap diagnostics are skipped above this many rows.
const DENSE_GAP_ROWS: usize = 512;

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v)?)
}

pub fn admissibility(cfg: &ExperimentConfig, _out: &mut Emitter) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let mu = cfg.mu()?;
    let report = check_admissibility(
        &family,
        cfg.r,
        mu,
        cfg.depth,
        cfg.admissibility.n_max,
        cfg.admissibility.monotone,
    )?;
    let status = match report.overall() {
        Verdict::Pass => Status::Ok,
        Verdict::Fail => Status::Failed,
        Verdict::Inconclusive => Status::Inconclusive,
    };
    Ok(Outcome {
        status,
        result: json!({ "overall": report.overall(), "report": report }),
    })
}

/// The configured operator with its truncation data and `ψ` table.
struct Operator {
    matrix: TransferMatrix,
    psi: CylinderFunction,
    n_max: Option<usize>,
    tail_bound: Option<f64>,
}

fn build_operator(cfg: &ExperimentConfig, family: &PotentialFamily) -> Result<Operator, CliError> {
    let beta = cfg.beta()?;
    match cfg.operator.kind {
        OperatorKindName::Grand => {
            let ws = finite_weights(family, cfg.r, beta, cfg.mu()?, cfg.depth, cfg.tolerances.eps)?;
            let psi = ws.psi().cloned().expect("finite weights carry psi");
            Ok(Operator {
                matrix: assemble_grand(&ws)?,
                psi,
                n_max: Some(ws.n_max),
                tail_bound: Some(ws.tail_bound),
            })
        }
        OperatorKindName::Classical => {
            let n = cfg.operator.n;
            let psi = family.table(n, cfg.r, cfg.depth)?.map(|a| (-beta * a).exp());
            Ok(Operator {
                matrix: assemble_classical(family, n, cfg.r, beta, cfg.depth)?,
                psi,
                n_max: None,
                tail_bound: None,
            })
        }
    }
}

#[derive(Serialize)]
struct SpectrumSummary {
    operator: OperatorKindName,
    rows: usize,
    lambda: f64,
    log_lambda: f64,
    primal_residual: f64,
    dual_residual: f64,
    ratio_spread: f64,
    rate: f64,
    primal_iterations: usize,
    dual_iterations: usize,
    n_max: Option<usize>,
    tail_bound: Option<f64>,
    /// `|λ₂|/λ` from a dense eigensolve on small operators.
    gap_ratio: Option<f64>,
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    word: String,
    h: f64,
    nu: f64,
}

fn summarize(op: &Operator, sol: &SpectralSolution, kind: OperatorKindName) -> Result<SpectrumSummary, CliError> {
    let gap_ratio = if op.matrix.rows() <= DENSE_GAP_ROWS {
        Some(perron(&op.matrix.to_dense())?.gap_ratio)
    } else {
        None
    };
    Ok(SpectrumSummary {
        operator: kind,
        rows: op.matrix.rows(),
        lambda: sol.lambda,
        log_lambda: sol.log_lambda(),
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        ratio_spread: sol.ratio_spread,
        rate: sol.rate,
        primal_iterations: sol.primal_iterations,
        dual_iterations: sol.dual_iterations,
        n_max: op.n_max,
        tail_bound: op.tail_bound,
        gap_ratio,
    })
}

pub fn spectrum(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let op = build_operator(cfg, &family)?;
    let sol = power_iterate(&op.matrix, &cfg.tolerances.solver())?;
    let rows: Vec<EigenRow> = (0..table_len(cfg.r, cfg.depth))
        .map(|i| EigenRow {
            index: i,
            word: word_label(Word::from_index(i, cfg.depth, cfg.r).symbols(), cfg.r),
            h: sol.h.value(i),
            nu: sol.nu.weights()[i],
        })
        .collect();
    out.csv("spectrum", &rows)?;
    Ok(Outcome {
        status: Status::Ok,
        result: to_value(&summarize(&op, &sol, cfg.operator.kind)?)?,
    })
}

#[derive(Serialize)]
struct PartitionRow {
    n: usize,
    average: f64,
    deviation: f64,
}

pub fn pressure(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let beta = cfg.beta()?;
    if cfg.pressure.n == 0 {
        return Err(CliError::Config("pressure.n must be positive".into()));
    }
    let word = cfg.start_word()?;
    let solver = cfg.tolerances.solver();
    let op = build_operator(cfg, &family)?;
    let sol = power_iterate(&op.matrix, &solver)?;
    let m = equilibrium_holonomic(&sol, &op.matrix)?;
    let optimizer = OptimizerConfig {
        restarts: cfg.pressure.restarts,
        max_iter: cfg.pressure.optimizer_max_iter,
        tol: cfg.pressure.optimizer_tol,
        seed: cfg.seed,
    };
    let mut report = grand_pressure(&sol, &op.psi, &m, &optimizer, cfg.tolerances.entropy_tol)?;
    if !cfg.pressure.classical_ns.is_empty() {
        report.classical = classical_table(&family, &cfg.pressure.classical_ns, &[beta], cfg.r, cfg.depth, &solver)?;
    }
    let seq = partition_iterate(&op.matrix, cfg.pressure.n, &word)?;
    let log_lambda = sol.log_lambda();
    let rows: Vec<PartitionRow> = seq
        .averages
        .iter()
        .enumerate()
        .map(|(i, &a)| PartitionRow {
            n: i + 1,
            average: a,
            deviation: a - log_lambda,
        })
        .collect();
    out.csv("pressure", &rows)?;
    let derivative = match cfg.operator.kind {
        OperatorKindName::Classical => Some(derivative_identity(
            &family,
            cfg.operator.n,
            cfg.r,
            beta,
            cfg.depth,
            cfg.tolerances.fd_step,
            &solver,
        )?),
        OperatorKindName::Grand => None,
    };
    let status = if report.identity_holds {
        Status::Ok
    } else {
        Status::Inconclusive
    };
    Ok(Outcome {
        status,
        result: json!({
            "spectrum": summarize(&op, &sol, cfg.operator.kind)?,
            "pressure": report,
            "partition": { "word": word.symbols(), "n": cfg.pressure.n, "log_z": seq.log_z },
            "derivative": derivative,
        }),
    })
}

#[derive(Serialize)]
struct SweepRow {
    beta: f64,
    mu: f64,
    status: NodeStatus,
    n_max: Option<usize>,
    lambda: Option<f64>,
    log_lambda: Option<f64>,
    gap_estimate: Option<f64>,
    d_beta: Option<f64>,
    d2_beta: Option<f64>,
    d_mu: Option<f64>,
    d2_mu: Option<f64>,
    /// Closed-form `log λ` for constant families.
    closed_form: Option<f64>,
}

pub fn sweep(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let (betas, mus) = cfg.grids()?;
    let config = SweepConfig {
        eps: cfg.tolerances.eps,
        n_max_cap: cfg.sweep.n_max_cap,
        solver: cfg.tolerances.solver(),
    };
    let result = analyticity_sweep(&family, cfg.r, &betas, &mus, cfg.depth, &config)?;
    let constant = cfg
        .family
        .as_ref()
        .filter(|f| f.kind == FamilyKindName::Constant)
        .and_then(|f| f.c);
    let rows: Vec<SweepRow> = result
        .nodes
        .iter()
        .map(|n| SweepRow {
            beta: n.beta,
            mu: n.mu,
            status: n.status,
            n_max: n.n_max,
            lambda: n.lambda,
            log_lambda: n.log_lambda,
            gap_estimate: n.gap_estimate,
            d_beta: n.d_beta,
            d2_beta: n.d2_beta,
            d_mu: n.d_mu,
            d2_mu: n.d2_mu,
            closed_form: match (constant, n.status) {
                (Some(c), NodeStatus::Ok) => Some(constant_log_lambda(cfg.r, c, n.beta, n.mu)),
                _ => None,
            },
        })
        .collect();
    out.csv("sweep", &rows)?;
    let count = |s: NodeStatus| result.nodes.iter().filter(|n| n.status == s).count();
    let ok = count(NodeStatus::Ok);
    let max_closed_form_error = rows
        .iter()
        .filter_map(|r| Some((r.log_lambda? - r.closed_form?).abs()))
        .reduce(f64::max);
    Ok(Outcome {
        status: if ok > 0 { Status::Ok } else { Status::Failed },
        result: json!({
            "betas": betas,
            "mus": mus,
            "nodes": result.nodes.len(),
            "ok": ok,
            "inadmissible": count(NodeStatus::Inadmissible),
            "divergent": count(NodeStatus::Divergent),
            "solver_failed": count(NodeStatus::SolverFailed),
            "max_closed_form_error": max_closed_form_error,
        }),
    })
}

#[derive(Serialize)]
struct ParticleRow {
    n: usize,
    p: f64,
}

pub fn grandstats(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<Outcome, CliError> {
    let opts = cfg.grandstats()?;
    if !(opts.volume > 0.0 && opts.volume.is_finite()) {
        return Err(CliError::Config(format!("grandstats.volume must be positive, got {}", opts.volume)));
    }
    let e = GrandCanonicalEnsemble::new(opts.sequence()?, cfg.beta()?, cfg.mu()?, cfg.tolerances.eps)?
        .with_volume(opts.volume)?
        .with_boltzmann(opts.boltzmann())?;
    let z = grand_partition(&e)?;
    let dist = particle_distribution(&e)?;
    let rows: Vec<ParticleRow> = dist.p.iter().enumerate().map(|(n, &p)| ParticleRow { n, p }).collect();
    out.csv("grandstats", &rows)?;
    // Central differences use an absolute step, which only makes sense in reduced units.
    let derivatives = match opts.units {
        Units::Reduced => Some(log_partition_derivatives(&e, cfg.tolerances.fd_step)?),
        Units::Si => None,
    };
    Ok(Outcome {
        status: Status::Ok,
        result: json!({
            "units": opts.units,
            "k_b": e.k_b,
            "volume": e.volume,
            "temperature": e.temperature(),
            "z": z.z,
            "log_z": z.z.ln(),
            "n_max": z.n_max,
            "tail_bound": z.tail_bound,
            "mean_n": dist.mean_n,
            "mean_a": dist.mean_a,
            "mass_defect": dist.defect,
            "gas_pressure": gas_pressure(&e)?,
            "pressure_unit": match opts.units { Units::Reduced => "reduced", Units::Si => "Pa" },
            "derivatives": derivatives,
        }),
    })
}

pub fn maxent(cfg: &ExperimentConfig, _out: &mut Emitter) -> Result<Outcome, CliError> {
    let opts = cfg.maxent()?;
    let sol = maxent_solve(&opts.a, opts.alpha)?;
    let free_energy = match opts.beta {
        Some(beta) => {
            let p = gcf_core::grandstats::canonical_distribution(&opts.a, beta)?;
            let report = free_energy_check(&opts.a, beta, &p, opts.grid_step.unwrap_or(0.05))?;
            Some(json!({ "beta": beta, "p": p, "log_z": log_canonical_partition(&opts.a, beta), "report": report }))
        }
        None => None,
    };
    let grid = match opts.grid_step {
        Some(step) => maxent_grid_oracle(&opts.a, opts.alpha, step)?.map(|g| {
            json!({
                "step": step,
                "entropy": g.entropy,
                "p": g.p,
                "feasible_points": g.feasible_points,
                "entropy_excess": g.entropy - sol.entropy,
                "l1_to_solution": l1_distance(&g.p, &sol.p),
            })
        }),
        None => None,
    };
    Ok(Outcome {
        status: Status::Ok,
        result: json!({ "solution": sol, "free_energy": free_energy, "grid_oracle": grid }),
    })
}
