use clap::{Args, Parser, Subcommand};
use pikan::baseline::{self, CennProblem, Mlp};
use pikan::checkpoint;
use pikan::config::{Method, ResolvedRun, RunConfig};
use pikan::dem::{AdmissibleField, DemProblem, FieldNetwork, LossReport, TractionSample};
use pikan::elasticity::{strain_from_gradient, stress, von_mises};
use pikan::error::{PikanError, Result};
use pikan::geometry::Point2;
use pikan::kan::{param_count, KanConfig, KanNetwork};
use pikan::metrics;
use pikan::optimize::{minimize, LbfgsConfig, OptimResult};
use pikan::problems::{self, AnalyticalBeam};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pikan", version, about = "Energy-method elasticity solver")]
struct Cli {
    /// Worker threads for loss evaluation (results are identical for any
    /// count). Overridden by the PIKAN_WORKERS environment variable.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a TOML run configuration.
    Solve {
        config: PathBuf,
    },
    /// Evaluate a trained checkpoint on a regular grid.
    Eval {
        checkpoint: PathBuf,
        /// Grid resolution as "nx,ny" over the problem bounding box.
        #[arg(long)]
        grid: String,
        /// Output CSV path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two field CSVs sampled at the same points.
    Compare {
        field: PathBuf,
        reference: PathBuf,
    },
    /// Reproduce published comparisons at a configurable scale.
    Bench {
        #[command(subcommand)]
        which: BenchTarget,
    },
    /// Inspect the built-in problem catalog.
    Problems {
        #[command(subcommand)]
        which: ProblemsCmd,
    },
}

#[derive(Subcommand)]
enum BenchTarget {
    /// Homogeneous cantilever: analytical vs spline-network vs MLP rows.
    Table2(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Triangle edge target for the interior quadrature.
    #[arg(long, default_value_t = 0.1)]
    mesh_size: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 101)]
    boundary_points: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum ProblemsCmd {
    List,
}

fn main() {
    // die quietly when a downstream pipe closes (e.g. `pikan ... | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let workers = std::env::var("PIKAN_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.workers);
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: failed to configure {n} workers: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        let code = match e {
            PikanError::NonFinite { .. } | PikanError::DivisionByZero { .. } => 3,
            _ => 2,
        };
        std::process::exit(code);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve { config } => cmd_solve(&config),
        Command::Eval { checkpoint, grid, out } => cmd_eval(&checkpoint, &grid, out.as_deref()),
        Command::Compare { field, reference } => cmd_compare(&field, &reference),
        Command::Bench { which: BenchTarget::Table2(args) } => cmd_bench_table2(&args),
        Command::Problems { which: ProblemsCmd::List } => cmd_problems_list(),
    }
}

/// The trained displacement field of any solver method.
enum SolvedField {
    Kan(AdmissibleField<KanNetwork>),
    Mlp(AdmissibleField<Mlp>),
    Cenn(Vec<AdmissibleField<Mlp>>),
}

impl SolvedField {
    fn n_params(&self) -> usize {
        match self {
            SolvedField::Kan(f) => f.network.n_params(),
            SolvedField::Mlp(f) => f.network.n_params(),
            SolvedField::Cenn(fs) => fs.iter().map(|f| f.network.n_params()).sum(),
        }
    }

    /// Displacement with physical-gradient tangents at a point belonging
    /// to `region`.
    fn displacement(
        &self,
        tape: &mut pikan::autodiff::Tape,
        p: Point2,
        region: usize,
    ) -> Result<[pikan::autodiff::DualScalar; 2]> {
        match self {
            SolvedField::Kan(f) => Ok(f.displacement(tape, p)),
            SolvedField::Mlp(f) => Ok(f.displacement(tape, p)),
            SolvedField::Cenn(fs) => fs
                .get(region - 1)
                .map(|f| f.displacement(tape, p))
                .ok_or_else(|| {
                    PikanError::Config(format!("region {region} has no subnetwork"))
                }),
        }
    }
}

fn kan_network(run: &ResolvedRun) -> KanNetwork {
    KanNetwork::new(KanConfig {
        shape: run.shape.clone(),
        grid_size: run.grid_size,
        order: run.order,
        grid_range: run.grid_range,
        base_activation: Default::default(),
    })
}

fn admissible<N: FieldNetwork>(run: &ResolvedRun, network: N) -> AdmissibleField<N> {
    AdmissibleField {
        network,
        normalization: run.spec.normalization,
        distance: run.spec.distance.clone(),
        extension: run.spec.extension.clone(),
    }
}

fn build_cenn(run: &ResolvedRun) -> Result<CennProblem> {
    let shape = run.shape.clone();
    let n_each = baseline::mlp_param_count(&shape);
    let fields: Vec<AdmissibleField<Mlp>> = (0..run.spec.materials.len())
        .map(|k| Ok(admissible(run, Mlp::new(shape.clone())?.with_offset(k * n_each))))
        .collect::<Result<_>>()?;
    let interior = problems::interior_rule(&run.spec, run.scheme, run.mesh_size)?;
    let tractions: Vec<(TractionSample, usize)> =
        problems::traction_samples(&run.spec, run.boundary_points)?
            .into_iter()
            .map(|s| {
                let region = run
                    .spec
                    .domain
                    .region_of(s.p)
                    .ok_or(PikanError::UnknownRegion { x: s.p.x, y: s.p.y })?;
                Ok((s, region))
            })
            .collect::<Result<_>>()?;
    let eps = 1e-6 * run.spec.normalization.length;
    let interface_points = baseline::interface_samples(
        &run.spec.domain,
        run.boundary_points,
        eps,
    )?;
    let beta = baseline::penalty_weight(interface_points.len(), interior.points.len());
    Ok(CennProblem {
        fields,
        interior,
        materials: run.spec.materials.clone(),
        tractions,
        interface_points,
        beta,
    })
}

/// Trains a single-network problem, recording a per-step energy breakdown
/// without re-evaluating the loss when the accepted step was the last
/// objective evaluation.
fn solve_single<N: FieldNetwork>(
    problem: &DemProblem<N>,
    cfg: &LbfgsConfig,
    seed: u64,
) -> Result<(OptimResult, Vec<(usize, LossReport)>)> {
    let theta0 = problem.field.network.init(seed);
    let last: std::cell::RefCell<Option<LossReport>> = std::cell::RefCell::new(None);
    let mut history: Vec<(usize, LossReport)> = Vec::new();
    let result = minimize(
        |theta| {
            let (report, grad) = problem.loss_and_grad(theta)?;
            let total = report.total;
            *last.borrow_mut() = Some(report);
            Ok((total, grad))
        },
        &theta0,
        cfg,
        |step, theta| {
            let cached = last.borrow().clone();
            let report = match cached {
                Some(r) if r.total == step.loss => r,
                _ => match problem.loss_and_grad(theta) {
                    Ok((r, _)) => r,
                    Err(_) => return,
                },
            };
            history.push((step.step, report));
        },
    )?;
    Ok((result, history))
}

fn cmd_solve(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        PikanError::Config(format!("{}: {e}", config_path.display()))
    })?;
    let cfg = RunConfig::from_toml(&text)
        .map_err(|e| PikanError::Config(format!("{}: {e}", config_path.display())))?;
    let run = cfg.resolve()?;
    std::fs::create_dir_all(&run.output)?;
    let started = Instant::now();

    let (theta, history_csv, final_loss, steps, converged) = match run.method {
        Method::Pikan => {
            let problem = problems::assemble(
                &run.spec,
                kan_network(&run),
                run.scheme,
                run.mesh_size,
                run.boundary_points,
            )?;
            let (result, history) = solve_single(&problem, &run.optimizer, run.seed)?;
            let csv = loss_history_csv(&history);
            let last = result.history.last().map(|s| s.loss).unwrap_or(f64::NAN);
            (result.theta, csv, last, result.history.len(), result.converged)
        }
        Method::DemMlp => {
            let problem = problems::assemble(
                &run.spec,
                Mlp::new(run.shape.clone())?,
                run.scheme,
                run.mesh_size,
                run.boundary_points,
            )?;
            let (result, history) = solve_single(&problem, &run.optimizer, run.seed)?;
            let csv = loss_history_csv(&history);
            let last = result.history.last().map(|s| s.loss).unwrap_or(f64::NAN);
            (result.theta, csv, last, result.history.len(), result.converged)
        }
        Method::Cenn => {
            let problem = build_cenn(&run)?;
            let mut rows = vec!["step,psi_in,psi_ex,penalty,total".to_string()];
            let result = baseline::cenn_solve(&problem, &run.optimizer, run.seed, |step, theta| {
                if let Ok((energy, work, penalty, total, _)) = problem.loss_and_grad(theta) {
                    rows.push(format!(
                        "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                        step.step, energy, work, penalty, total
                    ));
                }
            })?;
            let last = result.history.last().map(|s| s.loss).unwrap_or(f64::NAN);
            (
                result.theta,
                rows.join("\n") + "\n",
                last,
                result.history.len(),
                result.converged,
            )
        }
    };

    let wall = started.elapsed().as_secs_f64();
    let ckpt_path = run.output.join("checkpoint.ckpt");
    checkpoint::save(&ckpt_path, &text, &theta)?;
    std::fs::write(run.output.join("loss_history.csv"), history_csv)?;
    let manifest = format!(
        "version = {:?}\nseed = {}\nworkers = {}\nwall_time_s = {:.3}\nsteps = {}\n\
         final_loss = {:.17e}\nconverged = {}\n\nconfig = '''\n{}'''\n",
        env!("CARGO_PKG_VERSION"),
        run.seed,
        rayon::current_num_threads(),
        wall,
        steps,
        final_loss,
        converged,
        text
    );
    std::fs::write(run.output.join("manifest.toml"), manifest)?;
    println!(
        "solved '{}' with {:?}: {} steps, final loss {:.6e}, {:.1}s",
        run.spec.name, run.method, steps, final_loss, wall
    );
    println!("checkpoint: {}", ckpt_path.display());
    Ok(())
}

fn loss_history_csv(history: &[(usize, LossReport)]) -> String {
    let n_regions = history.first().map(|(_, r)| r.internal.len()).unwrap_or(0);
    let mut header = String::from("step");
    for i in 1..=n_regions {
        header.push_str(&format!(",psi_in_{i}"));
    }
    header.push_str(",psi_ex,total");
    let mut rows = vec![header];
    for (step, r) in history {
        let mut row = step.to_string();
        for v in &r.internal {
            row.push_str(&format!(",{v:.17e}"));
        }
        row.push_str(&format!(",{:.17e},{:.17e}", r.external, r.total));
        rows.push(row);
    }
    rows.join("\n") + "\n"
}

fn rebuild_field(run: &ResolvedRun, theta_len: usize) -> Result<SolvedField> {
    let field = match run.method {
        Method::Pikan => SolvedField::Kan(admissible(run, kan_network(run))),
        Method::DemMlp => SolvedField::Mlp(admissible(run, Mlp::new(run.shape.clone())?)),
        Method::Cenn => {
            let n_each = baseline::mlp_param_count(&run.shape);
            let fields = (0..run.spec.materials.len())
                .map(|k| {
                    Ok(admissible(run, Mlp::new(run.shape.clone())?.with_offset(k * n_each)))
                })
                .collect::<Result<_>>()?;
            SolvedField::Cenn(fields)
        }
    };
    if field.n_params() != theta_len {
        return Err(PikanError::Checkpoint(format!(
            "checkpoint holds {} parameters but the configured network needs {}",
            theta_len,
            field.n_params()
        )));
    }
    Ok(field)
}

fn cmd_eval(ckpt: &Path, grid: &str, out: Option<&Path>) -> Result<()> {
    let (nx, ny) = parse_grid(grid)?;
    let (config_text, theta) = checkpoint::load(ckpt)?;
    let run = RunConfig::from_toml(&config_text)?.resolve()?;
    let field = rebuild_field(&run, theta.len())?;

    let (lo, hi) = run.spec.domain.bbox;
    let mut rows = vec!["x,y,ux,uy,sxx,syy,sxy,vm,u_mag,region".to_string()];
    let mut tape = pikan::autodiff::Tape::new();
    tape.register_params(&theta);
    let mark = tape.watermark();
    for iy in 0..ny {
        for ix in 0..nx {
            let x = lo.x + (hi.x - lo.x) * ix as f64 / (nx - 1).max(1) as f64;
            let y = lo.y + (hi.y - lo.y) * iy as f64 / (ny - 1).max(1) as f64;
            let p = Point2::new(x, y);
            let Some(region) = run.spec.domain.region_of(p) else {
                continue; // outside the domain (hole, notch)
            };
            tape.rewind(mark);
            let u = field.displacement(&mut tape, p, region)?;
            let (ux, uy) = (tape.value(u[0].v), tape.value(u[1].v));
            let eps = strain_from_gradient(
                tape.value(u[0].dx),
                tape.value(u[0].dy),
                tape.value(u[1].dx),
                tape.value(u[1].dy),
            );
            let material = &run.spec.materials[region - 1];
            let s = stress(material, &eps);
            rows.push(format!(
                "{x:.9},{y:.9},{ux:.12e},{uy:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{region}",
                s.xx,
                s.yy,
                s.xy,
                von_mises(&s),
                metrics::u_mag(ux, uy)
            ));
        }
    }
    let csv = rows.join("\n") + "\n";
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn parse_grid(grid: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = grid.split(',').collect();
    let bad = || PikanError::Config(format!("--grid expects \"nx,ny\", got '{grid}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let nx: usize = parts[0].trim().parse().map_err(|_| bad())?;
    let ny: usize = parts[1].trim().parse().map_err(|_| bad())?;
    if nx == 0 || ny == 0 {
        return Err(bad());
    }
    Ok((nx, ny))
}

fn cmd_compare(field: &Path, reference: &Path) -> Result<()> {
    let pred = metrics::read_field_csv(field)?;
    let refr = metrics::read_field_csv(reference)?;
    let mut stdout = std::io::stdout();
    metrics::write_comparison(&mut stdout, &pred, &refr)?;
    stdout.flush().map_err(PikanError::Io)
}

fn cmd_bench_table2(args: &BenchArgs) -> Result<()> {
    let spec = problems::builtin("cantilever_homogeneous")?;
    let beam = AnalyticalBeam::homogeneous_cantilever();
    let points = [Point2::new(2.0, 0.0), Point2::new(5.0, 0.0), Point2::new(8.0, 0.0)];
    let analytic: Vec<f64> = points.iter().map(|p| beam.ux(p.x, p.y).abs()).collect();

    let cfg = LbfgsConfig { epochs: args.epochs, ..LbfgsConfig::default() };
    let mut report_rows: Vec<(String, usize, Vec<f64>, f64)> = Vec::new();

    // spline-network row
    let d = &spec.defaults;
    let kan = KanNetwork::new(KanConfig {
        shape: d.shape.clone(),
        grid_size: d.grid_size,
        order: d.order,
        grid_range: d.grid_range,
        base_activation: Default::default(),
    });
    let n_kan = param_count(&d.shape, d.grid_size, d.order);
    let problem = problems::assemble(
        &spec,
        kan,
        d.scheme,
        args.mesh_size,
        args.boundary_points,
    )?;
    let started = Instant::now();
    let (result, _) = solve_single(&problem, &cfg, args.seed)?;
    let kan_time = started.elapsed().as_secs_f64();
    let kan_ux = eval_ux(&problem.field, &result.theta, &points)?;
    report_rows.push(("PIKAN".into(), n_kan, kan_ux, kan_time));

    // MLP row
    let mlp_shape = vec![2, 30, 30, 30, 30, 2];
    let mlp = Mlp::new(mlp_shape.clone())?;
    let n_mlp = baseline::mlp_param_count(&mlp_shape);
    let problem = problems::assemble(
        &spec,
        mlp,
        d.scheme,
        args.mesh_size,
        args.boundary_points,
    )?;
    let started = Instant::now();
    let (result, _) = solve_single(&problem, &cfg, args.seed)?;
    let mlp_time = started.elapsed().as_secs_f64();
    let mlp_ux = eval_ux(&problem.field, &result.theta, &points)?;
    report_rows.push(("DEM (MLP)".into(), n_mlp, mlp_ux, mlp_time));

    println!(
        "homogeneous cantilever, |u_x| at A(2,0), B(5,0), C(8,0); mesh {}, {} epochs, seed {}",
        args.mesh_size, args.epochs, args.seed
    );
    println!(
        "{:<12} {:>8} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8} {:>9}",
        "method", "params", "A", "B", "C", "errA%", "errB%", "errC%", "time_s"
    );
    println!(
        "{:<12} {:>8} {:>12.5e} {:>12.5e} {:>12.5e} {:>8} {:>8} {:>8} {:>9}",
        "analytical", "-", analytic[0], analytic[1], analytic[2], "-", "-", "-", "-"
    );
    for (name, n, ux, time) in &report_rows {
        let err: Vec<f64> = ux
            .iter()
            .zip(&analytic)
            .map(|(p, r)| ((p - r) / r).abs() * 100.0)
            .collect();
        println!(
            "{name:<12} {n:>8} {:>12.5e} {:>12.5e} {:>12.5e} {:>8.3} {:>8.3} {:>8.3} {time:>9.1}",
            ux[0], ux[1], ux[2], err[0], err[1], err[2]
        );
    }
    Ok(())
}

fn eval_ux<N: FieldNetwork>(
    field: &AdmissibleField<N>,
    theta: &[f64],
    points: &[Point2],
) -> Result<Vec<f64>> {
    let mut tape = pikan::autodiff::Tape::new();
    tape.register_params(theta);
    let mark = tape.watermark();
    Ok(points
        .iter()
        .map(|&p| {
            tape.rewind(mark);
            let u = field.displacement(&mut tape, p);
            tape.value(u[0].v).abs()
        })
        .collect())
}

fn cmd_problems_list() -> Result<()> {
    println!("{:<24} {:>8} {:>22} {:>10}", "name", "regions", "bounding box", "loaded");
    for name in problems::BUILTIN_NAMES {
        let spec = problems::builtin(name)?;
        let (lo, hi) = spec.domain.bbox;
        println!(
            "{name:<24} {:>8} [{:>4},{:>4}]x[{:>4},{:>4}] {:>10}",
            spec.materials.len(),
            lo.x,
            hi.x,
            lo.y,
            hi.y,
            spec.natural.len()
        );
    }
    Ok(())
}
