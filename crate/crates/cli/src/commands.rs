//! Subcommand implementations.

use clap::Subcommand;
use nalgebra::DVector;
use serde::Serialize;

use hamtube_core::cotangent::so3r3::{PhasePointR3, So3R3Model};
use hamtube_core::gtube::{
    momentum_left, sl2_simple_tube, so3_simple_tube, CotangentGroupPoint, RestrictedTube,
    SimpleTube, TubeRadii,
};
use hamtube_core::lie::{AlgebraVector, CoalgebraVector, DescriptorConfig, GroupElement};
use hamtube_core::specialfn::{e_identity_residual, eval_e, eval_f};
use hamtube_core::splitting::{adapted_splitting, invariant_metric, SplittingJson};
use hamtube_core::verify::suites::{run_suite, SuiteConfig};
use hamtube_core::verify::{simple_tube_pullback_residual, FdConfig};

use crate::io::*;

#[derive(Subcommand)]
pub enum SpecialfnCommand {
    /// Evaluate a scalar kernel and print its value and identity residual.
    Eval {
        /// Function name: E (implicit exponential scaling) or F (arcsin ratio).
        function: String,
        /// Argument.
        x: f64,
    },
}

#[derive(Subcommand)]
pub enum TubeCommand {
    /// Evaluate a tube at a point.
    Eval {
        /// Tube kind: simple | restricted | tube0 | general | so3r3.
        #[arg(long)]
        kind: String,
        /// Group name (so3 | sl2r | path to a descriptor JSON).
        #[arg(long, default_value = "so3")]
        group: String,
        /// Model document (JSON file or inline).
        #[arg(long)]
        model: Option<String>,
        /// Point document (JSON file or inline).
        #[arg(long)]
        point: String,
    },
    /// Invert the explicit T*R^3 tube on a phase point.
    Invert {
        #[arg(long)]
        model: String,
        /// Phase point {"q": [...], "p": [...]} (JSON file or inline).
        #[arg(long)]
        phase: String,
        /// Invert the zero-centered tube instead of the general one.
        #[arg(long, default_value_t = false)]
        tube0: bool,
    },
    /// Momentum-level membership predicate for the zero-centered tube.
    Blcheck {
        #[arg(long)]
        model: String,
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run a verification suite and emit its report.
    Verify {
        /// Suite: simple | restricted | tube0 | general | so3r3.
        #[arg(long)]
        suite: String,
        /// Restrict the suite to one group where applicable.
        #[arg(long)]
        group: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        points: usize,
        /// Also write the report JSON to this path.
        #[arg(long)]
        out: Option<String>,
    },
    /// Sweep a scaling parameter and emit per-check residuals as CSV.
    Sweep {
        /// Group name for the swept simple tube.
        #[arg(long, default_value = "so3")]
        group: String,
        /// Model document providing mu (JSON file or inline).
        #[arg(long)]
        model: Option<String>,
        /// Base point; its lambda is scaled across the grid.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
}

#[derive(Subcommand)]
pub enum SplittingCommand {
    /// Construct and certify an adapted splitting.
    Compute {
        #[arg(long, default_value = "so3")]
        group: String,
        /// Momentum covector, dual coordinates (JSON array).
        #[arg(long)]
        mu: String,
        /// Isotropy subalgebra generators, one coordinate array per generator.
        #[arg(long)]
        h: Option<String>,
        /// Also write the splitting JSON to this path.
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Serialize)]
struct SpecialfnOut {
    function: String,
    x: f64,
    value: f64,
    identity_residual: f64,
}

pub fn run_specialfn(cmd: SpecialfnCommand) -> Result<(), CliError> {
    match cmd {
        SpecialfnCommand::Eval { function, x } => {
            let (value, residual) = match function.as_str() {
                "E" | "e" => {
                    let v = eval_e(x);
                    (v, e_identity_residual(x, v))
                }
                "F" | "f" => {
                    let v = eval_f(x).map_err(|e| CliError::domain(e.to_string()))?;
                    // residual of the defining branch: sin^2(v sqrt(x)) = x
                    // for x > 0, sinh^2(v sqrt(-x)) = -x for x < 0
                    let r = if x > 0.0 {
                        (v * x.sqrt()).sin().powi(2) - x
                    } else if x < 0.0 {
                        (v * (-x).sqrt()).sinh().powi(2) + x
                    } else {
                        v - 1.0
                    };
                    (v, r)
                }
                other => {
                    return Err(CliError::schema(format!(
                        "unknown function {other} (expected E or F)"
                    )))
                }
            };
            print_json(&SpecialfnOut {
                function,
                x,
                value,
                identity_residual: residual,
            })
        }
    }
}

fn load_group(name: &str) -> Result<std::sync::Arc<hamtube_core::lie::GroupDescriptor>, CliError> {
    DescriptorConfig::resolve(name).map_err(|e| CliError::schema(e.to_string()))
}

fn model_mu(
    desc: &std::sync::Arc<hamtube_core::lie::GroupDescriptor>,
    cfg: &ModelConfig,
) -> Result<CoalgebraVector, CliError> {
    if let Some(mu) = &cfg.mu {
        if mu.len() != desc.dim {
            return Err(CliError::schema(format!(
                "mu has {} coordinates, expected {}",
                mu.len(),
                desc.dim
            )));
        }
        return Ok(CoalgebraVector::new(desc.clone(), vector(mu)));
    }
    if let Some(rows) = &cfg.mu_matrix {
        let m = matrix_from_rows(rows)?;
        return desc
            .coalgebra_from_matrix(&m)
            .map_err(|e| CliError::schema(e.to_string()));
    }
    Err(CliError::schema("model must provide mu or mu_matrix"))
}

fn build_simple_tube(group: &str, cfg: &ModelConfig) -> Result<SimpleTube, CliError> {
    let desc = load_group(group)?;
    let mu = model_mu(&desc, cfg)?;
    let mut tube = match desc.name.as_str() {
        "so3" => so3_simple_tube(&mu).map_err(classify)?,
        "sl2r" => sl2_simple_tube(&mu).map_err(classify)?,
        _ => return Err(CliError::schema(
            "custom groups need an explicit splitting; use splitting compute and the library API",
        )),
    };
    if let Some(r) = cfg.radii {
        tube.radii = r.tube_radii();
    }
    Ok(tube)
}

fn build_restricted_tube(group: &str, cfg: &ModelConfig) -> Result<RestrictedTube, CliError> {
    let desc = load_group(group)?;
    let mu = model_mu(&desc, cfg)?;
    let h = cfg
        .h_generator
        .as_ref()
        .ok_or_else(|| CliError::schema("restricted tubes need h_generator in the model"))?;
    let h = AlgebraVector::new(desc.clone(), vector(h));
    let metric = invariant_metric(&desc, std::slice::from_ref(&h))
        .map_err(|e| CliError::schema(e.to_string()))?;
    let splitting = adapted_splitting(&desc, &[h], &mu, &metric)
        .map_err(|e| CliError::schema(e.to_string()))?;
    let radii = cfg
        .radii
        .map(|r| r.tube_radii())
        .unwrap_or_else(|| TubeRadii::for_scale(mu.norm()));
    RestrictedTube::build(splitting, radii).map_err(classify)
}

fn build_so3r3(cfg: &ModelConfig) -> Result<So3R3Model, CliError> {
    let q = cfg
        .q
        .as_ref()
        .ok_or_else(|| CliError::schema("model must provide q"))?;
    let p = cfg
        .p
        .as_ref()
        .ok_or_else(|| CliError::schema("model must provide p"))?;
    let mut model = So3R3Model::build(&vector(q), &vector(p)).map_err(classify_model)?;
    if let Some(r) = cfg.radii {
        model.radii = r.model_radii();
    }
    Ok(model)
}

fn point_group(
    desc: &std::sync::Arc<hamtube_core::lie::GroupDescriptor>,
    pt: &PointConfig,
) -> Result<GroupElement, CliError> {
    match &pt.g {
        None => Ok(GroupElement::identity(desc.clone())),
        Some(rows) => {
            let m = matrix_from_rows(rows)?;
            GroupElement::new(desc.clone(), m).map_err(|e| CliError::schema(e.to_string()))
        }
    }
}

fn point_nu(tube: &SimpleTube, pt: &PointConfig) -> Result<CoalgebraVector, CliError> {
    if let Some(nu) = &pt.nu {
        return Ok(CoalgebraVector::new(tube.descriptor.clone(), vector(nu)));
    }
    if let Some(coords) = &pt.nu_coords {
        if coords.len() != tube.iota.ncols() {
            return Err(CliError::schema(format!(
                "nu_coords has {} entries, expected {}",
                coords.len(),
                tube.iota.ncols()
            )));
        }
        return Ok(tube.embed_isotropy_covector(&vector(coords)));
    }
    Ok(CoalgebraVector::zero(tube.descriptor.clone()))
}

fn group_point_out(pt: &CotangentGroupPoint) -> CotangentPointOut {
    CotangentPointOut {
        g: matrix_rows(&pt.g.matrix),
        nu: pt.nu.coords.iter().cloned().collect(),
    }
}

pub fn run_tube(cmd: TubeCommand) -> Result<(), CliError> {
    match cmd {
        TubeCommand::Eval {
            kind,
            group,
            model,
            point,
        } => {
            let cfg: ModelConfig = match &model {
                Some(m) => read_json_arg(m)?,
                None => serde_json::from_str("{}").unwrap(),
            };
            let pt: PointConfig = read_json_arg(&point)?;
            match kind.as_str() {
                "simple" => {
                    let tube = build_simple_tube(&group, &cfg)?;
                    let g = point_group(&tube.descriptor, &pt)?;
                    let nu = point_nu(&tube, &pt)?;
                    let lam = AlgebraVector::new(
                        tube.descriptor.clone(),
                        pt.lambda
                            .as_ref()
                            .map(|l| vector(l))
                            .unwrap_or_else(|| DVector::zeros(tube.descriptor.dim)),
                    );
                    let out = tube.eval(&g, &nu, &lam).map_err(classify)?;
                    print_json(&group_point_out(&out))
                }
                "restricted" => {
                    let tube = build_restricted_tube(&group, &cfg)?;
                    let g = point_group(&tube.simple.descriptor, &pt)?;
                    let nu = point_nu(&tube.simple, &pt)?;
                    let lam = AlgebraVector::new(
                        tube.simple.descriptor.clone(),
                        pt.lambda
                            .as_ref()
                            .map(|l| vector(l))
                            .unwrap_or_else(|| DVector::zeros(tube.simple.descriptor.dim)),
                    );
                    let eps = pt
                        .eps
                        .as_ref()
                        .map(|e| vector(e))
                        .unwrap_or_else(|| DVector::zeros(tube.splitting.l.len()));
                    let out = tube.eval(&g, &nu, &lam, &eps).map_err(classify)?;
                    print_json(&group_point_out(&out))
                }
                "so3r3" | "general" | "tube0" => {
                    let model = build_so3r3(&cfg)?;
                    let g = point_group(&hamtube_core::lie::so3(), &pt)?;
                    let nu = pt.nu_scalar.unwrap_or(0.0);
                    let a = pt.a.unwrap_or(0.0);
                    let b = pt.b.unwrap_or(0.0);
                    let z = if kind == "tube0" {
                        model.eval_tube0(&g, nu, a, b).map_err(classify_model)?
                    } else {
                        model.eval(&g, nu, a, b).map_err(classify_model)?
                    };
                    print_json(&PhaseOut {
                        q: z.q.iter().cloned().collect(),
                        p: z.p.iter().cloned().collect(),
                    })
                }
                other => Err(CliError::schema(format!(
                    "unknown tube kind {other} (expected simple|restricted|tube0|general|so3r3)"
                ))),
            }
        }
        TubeCommand::Invert {
            model,
            phase,
            tube0,
        } => {
            let cfg: ModelConfig = read_json_arg(&model)?;
            let model = build_so3r3(&cfg)?;
            let ph: PhaseConfig = read_json_arg(&phase)?;
            let z = PhasePointR3 {
                q: vector(&ph.q),
                p: vector(&ph.p),
            };
            let (g, nu, a, b) = if tube0 {
                model.invert_tube0(&z).map_err(classify_model)?
            } else {
                model.invert(&z).map_err(classify_model)?
            };
            let fwd = if tube0 {
                model.eval_tube0(&g, nu, a, b).map_err(classify_model)?
            } else {
                model.eval(&g, nu, a, b).map_err(classify_model)?
            };
            let rt = (&fwd.q - &z.q).norm() + (&fwd.p - &z.p).norm();
            print_json(&InvertOut {
                g: matrix_rows(&g.matrix),
                nu,
                a,
                b,
                round_trip_residual: rt,
            })
        }
        TubeCommand::Blcheck { model, point, tol } => {
            let cfg: ModelConfig = read_json_arg(&model)?;
            let model = build_so3r3(&cfg)?;
            let pt: PointConfig = read_json_arg(&point)?;
            let g = point_group(&hamtube_core::lie::so3(), &pt)?;
            let report = model
                .bates_lerman_predicate(
                    &g,
                    pt.nu_scalar.unwrap_or(0.0),
                    pt.a.unwrap_or(0.0),
                    pt.b.unwrap_or(0.0),
                    tol,
                )
                .map_err(classify_model)?;
            #[derive(Serialize)]
            struct Out {
                in_set: bool,
                g_residual: f64,
                nu_residual: f64,
                slice_residual: f64,
                momentum_residual: Option<f64>,
            }
            print_json(&Out {
                in_set: report.in_set,
                g_residual: report.g_residual,
                nu_residual: report.nu_residual,
                slice_residual: report.slice_residual,
                momentum_residual: report.momentum_residual,
            })
        }
        TubeCommand::Verify {
            suite,
            group,
            seed,
            points,
            out,
        } => {
            let cfg = SuiteConfig {
                seed,
                points,
                step: 1e-5,
            };
            let report = run_suite(&suite, group.as_deref(), &cfg).map_err(classify)?;
            for s in &report.summary {
                eprintln!(
                    "{}: {}/{} pass (max residual {:.3e}, threshold {:.1e}{})",
                    s.check,
                    s.passed,
                    s.total,
                    s.max_residual,
                    s.threshold,
                    if s.skipped > 0 {
                        format!(", {} skipped", s.skipped)
                    } else {
                        String::new()
                    }
                );
            }
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::internal(e.to_string()))?;
            if let Some(path) = out {
                std::fs::write(&path, &text)
                    .map_err(|e| CliError::internal(format!("cannot write {path}: {e}")))?;
            }
            println!("{text}");
            if !report.all_pass() {
                return Err(CliError::verification("verification suite failed"));
            }
            Ok(())
        }
        TubeCommand::Sweep {
            group,
            model,
            point,
            from,
            to,
            steps,
        } => {
            let cfg: ModelConfig = match &model {
                Some(m) => read_json_arg(m)?,
                None => serde_json::from_str("{}").unwrap(),
            };
            let pt: PointConfig = read_json_arg(&point)?;
            run_sweep(&group, &cfg, &pt, from, to, steps)
        }
    }
}

/// One sweep row: `index,value,check,residual` with `exit` marking domain
/// exits.
fn run_sweep(
    group: &str,
    cfg: &ModelConfig,
    pt: &PointConfig,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<(), CliError> {
    if steps == 0 {
        return Err(CliError::schema("steps must be positive"));
    }
    let tube = build_simple_tube(group, cfg)?;
    let g = point_group(&tube.descriptor, pt)?;
    let nu = point_nu(&tube, pt)?;
    let base_lambda = pt
        .lambda
        .as_ref()
        .map(|l| vector(l))
        .ok_or_else(|| CliError::schema("sweep needs a base lambda in the point"))?;
    // validate the base point once, so grid rows marked `exit` are genuine
    // domain exits rather than malformed input
    let probe = AlgebraVector::new(tube.descriptor.clone(), &base_lambda * 1e-9);
    tube.eval(&g, &nu, &probe)
        .map_err(|e| CliError::schema(format!("base point rejected: {e}")))?;

    let rows: Vec<(usize, f64)> = (0..steps)
        .map(|i| {
            let t = if steps == 1 {
                from
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            };
            (i, t)
        })
        .collect();

    let threads = sweep_threads(rows.len());
    let mut results: Vec<Option<Vec<String>>> = vec![None; rows.len()];
    let fd = FdConfig::default();
    let chunk = rows.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (c, slot_chunk) in results.chunks_mut(chunk).enumerate() {
            let rows = &rows;
            let tube = &tube;
            let g = &g;
            let nu = &nu;
            let base_lambda = &base_lambda;
            let fd = &fd;
            handles.push(scope.spawn(move || {
                for (off, slot) in slot_chunk.iter_mut().enumerate() {
                    let (i, t) = rows[c * chunk + off];
                    let lam = AlgebraVector::new(tube.descriptor.clone(), base_lambda * t);
                    let mut lines = Vec::new();
                    match simple_tube_pullback_residual(tube, g, nu, &lam, fd, 1.0) {
                        Ok(r) => lines.push(format!("{i},{t},pullback,{r:e}")),
                        Err(_) => lines.push(format!("{i},{t},pullback,exit")),
                    }
                    match tube.eval(g, nu, &lam) {
                        Ok(out) => {
                            let jl = momentum_left(&out)
                                .map(|j| {
                                    let expected = hamtube_core::lie::adstar(
                                        &g.inverse(),
                                        &CoalgebraVector::new(
                                            tube.descriptor.clone(),
                                            &nu.coords + &tube.mu.coords,
                                        ),
                                    )
                                    .expect("same descriptor");
                                    (j.coords - expected.coords).norm()
                                })
                                .unwrap_or(f64::NAN);
                            lines.push(format!("{i},{t},left_momentum,{jl:e}"));
                        }
                        Err(_) => lines.push(format!("{i},{t},left_momentum,exit")),
                    }
                    *slot = Some(lines);
                }
            }));
        }
        for h in handles {
            h.join().expect("sweep worker panicked");
        }
    });

    println!("index,value,check,residual");
    for lines in results.into_iter().flatten() {
        for line in lines {
            println!("{line}");
        }
    }
    Ok(())
}

/// Worker count for sweeps: `HAMTUBE_THREADS` caps the available parallelism;
/// output ordering is independent of the choice.
fn sweep_threads(rows: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("HAMTUBE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(available);
    cap.clamp(1, rows.max(1))
}

pub fn run_splitting(cmd: SplittingCommand) -> Result<(), CliError> {
    match cmd {
        SplittingCommand::Compute { group, mu, h, out } => {
            let desc = load_group(&group)?;
            let mu_coords: Vec<f64> = read_json_arg(&mu)?;
            if mu_coords.len() != desc.dim {
                return Err(CliError::schema(format!(
                    "mu has {} coordinates, expected {}",
                    mu_coords.len(),
                    desc.dim
                )));
            }
            let mu = CoalgebraVector::new(desc.clone(), vector(&mu_coords));
            let h_basis: Vec<AlgebraVector> = match h {
                None => Vec::new(),
                Some(arg) => {
                    let rows: Vec<Vec<f64>> = read_json_arg(&arg)?;
                    rows.into_iter()
                        .map(|r| AlgebraVector::new(desc.clone(), vector(&r)))
                        .collect()
                }
            };
            let metric =
                invariant_metric(&desc, &h_basis).map_err(|e| CliError::schema(e.to_string()))?;
            let splitting = adapted_splitting(&desc, &h_basis, &mu, &metric)
                .map_err(|e| CliError::schema(e.to_string()))?;
            let json = SplittingJson::from_splitting(&splitting);
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&json)
                    .map_err(|e| CliError::internal(e.to_string()))?;
                std::fs::write(&path, text)
                    .map_err(|e| CliError::internal(format!("cannot write {path}: {e}")))?;
            }
            print_json(&json)
        }
    }
}
