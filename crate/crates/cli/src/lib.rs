//! Command-line front end: solving, conversion, benchmarking, the linear
//! charging study and solution checking.

pub mod table;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use evrpnl::bpc::{self, BpcConfig, SolveReport};
use evrpnl::model::{montoya, parse_instance, Instance, Solution};
use evrpnl::pricing::PricingConfig;
use evrpnl::study::{linear_study, StudyRow};
use evrpnl::tabu::{best_of_seeds, TabuOutcome, TabuParams};

pub use table::{emit_table, Mode, ResultRow};

pub const EXIT_SOLVED: i32 = 0;
pub const EXIT_TIMEOUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "evrpnl", version, about = "Electric vehicle routing with nonlinear charging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        run: RunConfig,
        /// Write the solution JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the full solver report, with pricing statistics, as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Append the result rows to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convert a benchmark file to the JSON instance format.
    Convert {
        #[arg(long, value_enum)]
        from: Format,
        input: PathBuf,
        output: PathBuf,
    },
    /// Solve every instance of a directory and write a CSV table.
    Bench {
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        run: RunConfig,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; `EVRP_THREADS` takes precedence.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Compare piecewise-linear charging with linear under- and overestimates.
    StudyLinear {
        #[arg(long)]
        dir: PathBuf,
        /// Seconds per solve.
        #[arg(long, default_value_t = 10800.0)]
        time_limit: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Re-check a solution against its instance.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        solution: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Montoya,
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    #[arg(long, value_enum, default_value = "exact-bpc")]
    pub mode: Mode,
    /// Seconds for the exact solver.
    #[arg(long, default_value_t = 10800.0)]
    pub time_limit: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Independent tabu runs with consecutive seeds; the best is kept.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// Disable subset-row cuts in the exact solver.
    #[arg(long)]
    pub no_cuts: bool,
    /// Initial ng-set size; 0 asks for elementary labels throughout.
    #[arg(long, default_value_t = 8)]
    pub ng_size: usize,
    /// Print tabu progress as line-delimited JSON on standard error.
    #[arg(long)]
    pub trace: bool,
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            bail!("--time-limit must be a positive number of seconds");
        }
        Ok(())
    }

    pub fn bpc_config(&self, cuts: bool) -> BpcConfig {
        let pricing = PricingConfig { ng_size: (self.ng_size > 0).then_some(self.ng_size), ..Default::default() };
        BpcConfig {
            cuts,
            time_limit: Some(Duration::from_secs_f64(self.time_limit)),
            pricing,
            seed: self.seed,
            ..Default::default()
        }
    }

    pub fn tabu_params(&self, inst: &Instance) -> TabuParams {
        TabuParams { seed: self.seed, trace: self.trace, ..TabuParams::for_size(inst.n_customers()) }
    }
}

/// Reads an instance in JSON form, or a benchmark XML file converted on the fly.
pub fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
        let text = String::from_utf8(bytes).context("instance file is not UTF-8")?;
        montoya::convert_instance(&text, &stem(path))?
    } else {
        parse_instance(&bytes)?
    };
    Ok(inst)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned())
}

/// Everything one instance produced under a run configuration.
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    /// Solution of the exact run when there is one, else of the tabu run.
    pub solution: Option<Solution>,
    pub report: Option<SolveReport>,
    pub exit: i32,
}

fn run_tabu(inst: &Instance, run: &RunConfig) -> anyhow::Result<(TabuOutcome, f64)> {
    let start = Instant::now();
    let out = best_of_seeds(inst, &run.tabu_params(inst), run.seeds)?;
    Ok((out, start.elapsed().as_secs_f64()))
}

pub fn solve_instance(inst: &Instance, run: &RunConfig) -> anyhow::Result<Outcome> {
    let mut rows = Vec::new();
    let mut solution = None;
    let mut exit = EXIT_SOLVED;
    if matches!(run.mode, Mode::Tabu | Mode::Both) {
        match run_tabu(inst, run) {
            Ok((out, secs)) => {
                if run.trace {
                    let stderr = std::io::stderr();
                    let mut lock = stderr.lock();
                    for t in &out.trace {
                        writeln!(lock, "{}", serde_json::to_string(t)?)?;
                    }
                }
                rows.push(ResultRow::from_tabu(&inst.name, &out, secs));
                solution = Some(out.solution);
            }
            Err(e) if run.mode == Mode::Tabu => {
                eprintln!("{}: {e}", inst.name);
                exit = EXIT_INFEASIBLE;
            }
            Err(e) => log::warn!("{}: tabu search failed: {e}", inst.name),
        }
    }
    let mut report = None;
    if run.mode != Mode::Tabu {
        let cuts = run.mode != Mode::ExactBp && !run.no_cuts;
        let r = bpc::solve(inst, &run.bpc_config(cuts))?;
        let mode = if cuts { Mode::ExactBpc } else { Mode::ExactBp };
        rows.push(ResultRow::from_report(mode, &r));
        exit = if r.optimal {
            EXIT_SOLVED
        } else if r.timed_out {
            EXIT_TIMEOUT
        } else {
            EXIT_INFEASIBLE
        };
        if r.solution.is_some() {
            solution = r.solution.clone();
        }
        report = Some(r);
    }
    Ok(Outcome { rows, solution, report, exit })
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn append_csv(path: &Path, rows: &[ResultRow]) -> anyhow::Result<()> {
    let table = emit_table(rows);
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let mut lines = table.lines();
    let header = lines.next().unwrap_or_default();
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{header}")?;
    }
    // data rows only; the averages line belongs to whole tables
    for line in lines.take(rows.len()) {
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Worker count from `EVRP_THREADS`, else the flag.
pub fn worker_count(flag: usize) -> usize {
    std::env::var("EVRP_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(flag).max(1)
}

/// Applies `job` to every item on `threads` workers, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, job: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.min(items.len()).max(1) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= items.len() {
                    break;
                }
                let r = job(&items[k]);
                results.lock().expect("worker panicked")[k] = Some(r);
            });
        }
    });
    results.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every item ran")).collect()
}

/// Instance files of a directory in name order.
pub fn instance_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json") || e.eq_ignore_ascii_case("xml"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve { instance, run, out, report, csv } => {
            let inst = load_instance(&instance)?;
            let o = solve_instance(&inst, &run)?;
            if let Some(sol) = &o.solution {
                write_or_print(out.as_deref(), &(serde_json::to_string_pretty(sol)? + "\n"))?;
            }
            if let (Some(path), Some(r)) = (report, &o.report) {
                fs::write(&path, serde_json::to_string_pretty(r)?)?;
            }
            match csv {
                Some(path) => append_csv(&path, &o.rows)?,
                None => {
                    for line in emit_table(&o.rows).lines().take(o.rows.len() + 1) {
                        eprintln!("{line}");
                    }
                }
            }
            if o.solution.is_none() && o.exit == EXIT_SOLVED {
                return Ok(EXIT_INFEASIBLE);
            }
            Ok(o.exit)
        }
        Command::Convert { from: Format::Montoya, input, output } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let inst = montoya::convert_instance(&text, &stem(&input))?;
            fs::write(&output, inst.to_json() + "\n")?;
            Ok(EXIT_SOLVED)
        }
        Command::Bench { dir, run, out, threads } => {
            let files = instance_files(&dir)?;
            let outcomes = parallel_map(&files, worker_count(threads), |path| {
                load_instance(path).and_then(|inst| solve_instance(&inst, &run)).map_err(|e| format!("{}: {e:#}", path.display()))
            });
            let mut rows = Vec::new();
            let mut exit = EXIT_SOLVED;
            for o in outcomes {
                match o {
                    Ok(o) => {
                        exit = exit.max(o.exit);
                        rows.extend(o.rows);
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        exit = EXIT_INFEASIBLE;
                    }
                }
            }
            write_or_print(out.as_deref(), &emit_table(&rows))?;
            Ok(exit)
        }
        Command::StudyLinear { dir, time_limit, out, threads } => {
            let run = RunConfig {
                mode: Mode::ExactBpc,
                time_limit,
                seed: 42,
                seeds: 1,
                no_cuts: false,
                ng_size: 8,
                trace: false,
            };
            let config = run.bpc_config(true);
            let files = instance_files(&dir)?;
            let rows = parallel_map(&files, worker_count(threads), |path| {
                load_instance(path)
                    .and_then(|inst| Ok(linear_study(&inst, &config)?))
                    .map_err(|e| format!("{}: {e:#}", path.display()))
            });
            let mut text = String::from(StudyRow::CSV_HEADER);
            text.push('\n');
            let mut exit = EXIT_SOLVED;
            for r in rows {
                match r {
                    Ok(r) => {
                        if !r.optimal {
                            exit = exit.max(EXIT_TIMEOUT);
                        }
                        text.push_str(&r.csv_row());
                        text.push('\n');
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        exit = EXIT_INFEASIBLE;
                    }
                }
            }
            write_or_print(out.as_deref(), &text)?;
            Ok(exit)
        }
        Command::Validate { instance, solution } => {
            let inst = load_instance(&instance)?;
            let text = fs::read_to_string(&solution).with_context(|| format!("reading {}", solution.display()))?;
            let sol: Solution = serde_json::from_str(&text).context("parsing solution")?;
            match sol.validate(&inst) {
                Ok(cost) => {
                    println!("valid: {} routes, cost {cost:.4}", sol.routes.len());
                    Ok(EXIT_SOLVED)
                }
                Err(e) => {
                    println!("invalid: {e}");
                    Ok(EXIT_INFEASIBLE)
                }
            }
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_SOLVED };
        }
    };
    let checked = match &cli.command {
        Command::Solve { run, .. } | Command::Bench { run, .. } => run.validate(),
        Command::StudyLinear { time_limit, .. } if !(*time_limit > 0.0 && time_limit.is_finite()) => {
            Err(anyhow::anyhow!("--time-limit must be a positive number of seconds"))
        }
        _ => Ok(()),
    };
    if let Err(e) = checked {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INFEASIBLE
        }
    }
}
