use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stockflow::integrate::{observe, simulate, Scenario, SimulateError, Trajectory};
use stockflow::io::{export_dot, load, save, write_csv, Document, IoError};
use stockflow::models;
use stockflow::morphism::{check_flow_equation, FlowCheck};
use stockflow::open::{oapply_with, ComposeError, OpenDiagram};
use stockflow::semantics::{diagram_vector_field, equations};

#[derive(Parser)]
#[command(name = "stockflow", version, about = "Build, compose and simulate stock-flow diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a document and print OK or the problems found
    Validate { file: PathBuf },
    /// Glue open diagrams along a wiring pattern
    Compose {
        uwd: PathBuf,
        /// Filler for a box, as NAME=FILE (repeatable)
        #[arg(long = "box", value_name = "NAME=FILE", required = true)]
        boxes: Vec<String>,
        #[arg(short, long)]
        output: PathBuf,
        /// Fail on name clashes instead of suffixing with the box name
        #[arg(long)]
        strict: bool,
    },
    /// Integrate a diagram under a scenario and write a CSV trajectory
    Simulate {
        file: PathBuf,
        #[arg(long, required_unless_present = "scenario_dir", conflicts_with = "scenario_dir")]
        scenario: Option<PathBuf>,
        #[arg(short, long, required_unless_present = "scenario_dir")]
        output: Option<PathBuf>,
        /// Run every scenario file in a directory, one CSV each
        #[arg(long, requires = "out_dir")]
        scenario_dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Append sum-variable and auxiliary-variable columns
        #[arg(long)]
        observe: bool,
    },
    /// Print the differential equations of a diagram
    Equations { file: PathBuf },
    /// Write a Graphviz rendering of a diagram
    ExportDot {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the flow equation of a morphism between two diagrams
    CheckMorphism {
        morphism: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Scenario whose parameters bind the flow functions
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Parameter binding NAME=VALUE (repeatable, overrides the scenario)
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
    },
    /// List the built-in models, or write them out as JSON files
    Catalog {
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } | IoError::Csv(_) => Failure::Runtime(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<ComposeError> for Failure {
    fn from(e: ComposeError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SimulateError> for Failure {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::InvalidScenario(_)
            | SimulateError::MissingInitial(_)
            | SimulateError::UnknownStock(_)
            | SimulateError::UnboundParameter(_)
            | SimulateError::DiagramMismatch(_) => Failure::Validation(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load_open(path: &Path) -> Result<OpenDiagram, Failure> {
    Ok(load(path)?.into_open()?)
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    match load(path)? {
        Document::Scenario(s) => Ok(s),
        other => Err(Failure::Validation(format!(
            "{}: expected a scenario document, found `{}`",
            path.display(),
            other.kind()
        ))),
    }
}

fn split_binding(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| Failure::Validation(format!("expected NAME=VALUE, got `{s}`")))
}

fn validate(file: &Path) -> Result<(), Failure> {
    let doc = load(file)?;
    let problems: Vec<String> = match &doc {
        Document::Primitive(p) => p.validate().iter().map(|v| v.to_string()).collect(),
        Document::StockFlow(d) => d.validate().iter().map(|v| v.to_string()).collect(),
        Document::Full(d) => d.validate().iter().map(|v| v.to_string()).collect(),
        Document::Open(d) => d.validate().err().map(|e| e.to_string()).into_iter().collect(),
        Document::Uwd(u) => u.validate().err().map(|e| e.to_string()).into_iter().collect(),
        Document::Morphism(_) | Document::Scenario(_) => Vec::new(),
    };
    if problems.is_empty() {
        println!("OK");
        Ok(())
    } else {
        Err(Failure::Validation(problems.join("\n")))
    }
}

fn compose(uwd: &Path, boxes: &[String], output: &Path, strict: bool) -> Result<(), Failure> {
    let pattern = match load(uwd)? {
        Document::Uwd(u) => u,
        other => return Err(Failure::Validation(format!("expected a uwd document, found `{}`", other.kind()))),
    };
    let mut fillers = BTreeMap::new();
    for b in boxes {
        let (name, file) = split_binding(b)?;
        fillers.insert(name.to_string(), load_open(Path::new(file))?);
    }
    let c = oapply_with(&pattern, &fillers, strict)?;
    for m in &c.merges {
        eprintln!("merged {} `{}` from {}", m.sort, m.name, m.sources.iter().map(|(b, n)| format!("{b}:{n}")).collect::<Vec<_>>().join(", "));
    }
    for (old, new) in &c.renamed {
        eprintln!("renamed `{old}` to `{new}`");
    }
    save(&Document::Open(c.diagram), output)?;
    Ok(())
}

fn run_one(od: &OpenDiagram, sc: &Scenario, out: &Path, with_vars: bool) -> Result<(), Failure> {
    let system = diagram_vector_field(&od.inner);
    let mut traj: Trajectory = simulate(&system, sc)?;
    if with_vars {
        traj = observe(&od.inner, &traj, &sc.params)?;
    }
    let file = File::create(out).map_err(runtime(out))?;
    let mut w = BufWriter::new(file);
    write_csv(&traj, &mut w)?;
    w.flush().map_err(runtime(out))?;
    Ok(())
}

fn simulate_cmd(
    file: &Path,
    scenario: Option<&Path>,
    output: Option<&Path>,
    scenario_dir: Option<&Path>,
    out_dir: Option<&Path>,
    with_vars: bool,
) -> Result<(), Failure> {
    let od = load_open(file)?;
    if let (Some(sc), Some(out)) = (scenario, output) {
        return run_one(&od, &load_scenario(sc)?, out, with_vars);
    }
    let (Some(dir), Some(out_dir)) = (scenario_dir, out_dir) else {
        return Err(Failure::Validation("give --scenario and --output, or --scenario-dir and --out-dir".into()));
    };
    let mut jobs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(runtime(dir))? {
        let path = entry.map_err(runtime(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            jobs.push(path);
        }
    }
    jobs.sort();
    std::fs::create_dir_all(out_dir).map_err(runtime(out_dir))?;
    let results: Vec<(PathBuf, Result<(), Failure>)> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|path| {
                let od = &od;
                s.spawn(move || {
                    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    let out = out_dir.join(format!("{stem}.csv"));
                    let r = load_scenario(path).and_then(|sc| run_one(od, &sc, &out, with_vars));
                    (path.clone(), r)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut worst: Option<Failure> = None;
    for (path, r) in results {
        match r {
            Ok(()) => println!("{}: ok", path.display()),
            Err(f) => {
                eprintln!("{}: {}", path.display(), f.message());
                if worst.as_ref().is_none_or(|w| f.code() > w.code()) {
                    worst = Some(f);
                }
            }
        }
    }
    match worst {
        None => Ok(()),
        Some(f) => Err(match f {
            Failure::Validation(_) => Failure::Validation("some scenarios failed".into()),
            Failure::Runtime(_) => Failure::Runtime("some scenarios failed".into()),
        }),
    }
}

fn check_morphism(
    morphism: &Path,
    from: &Path,
    to: &Path,
    check: FlowCheck,
    scenario: Option<&Path>,
    bindings: &[String],
) -> Result<(), Failure> {
    let spec = match load(morphism)? {
        Document::Morphism(m) => m,
        other => return Err(Failure::Validation(format!("expected a morphism document, found `{}`", other.kind()))),
    };
    let simple = |p: &Path| match load(p)? {
        Document::StockFlow(d) => Ok(d),
        Document::Open(OpenDiagram { inner: stockflow::Diagram::Simple(d), .. }) => Ok(d),
        other => Err(Failure::Validation(format!(
            "{}: morphisms relate simple diagrams, found `{}`",
            p.display(),
            other.kind()
        ))),
    };
    let (a, b) = (simple(from)?, simple(to)?);
    let alpha = spec.resolve(&a.primitive, &b.primitive)?;
    let mut params = match scenario {
        Some(p) => load_scenario(p)?.params,
        None => BTreeMap::new(),
    };
    for b in bindings {
        let (k, v) = split_binding(b)?;
        let v: f64 = v.parse().map_err(|_| Failure::Validation(format!("`{v}` is not a number")))?;
        params.insert(k.to_string(), v);
    }
    let report = check_flow_equation(&alpha, &a, &b, &params, &check).map_err(|e| Failure::Validation(e.to_string()))?;
    for f in &report.flows {
        println!("{}: max discrepancy {:e}", f.name, f.max);
    }
    if report.passed() {
        println!("PASS (max discrepancy {:e}, tol {:e})", report.max_discrepancy(), check.tol);
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "FAIL (max discrepancy {:e}, tol {:e})",
            report.max_discrepancy(),
            check.tol
        )))
    }
}

fn catalog(export: Option<&Path>) -> Result<(), Failure> {
    match export {
        Some(dir) => {
            for p in models::export_catalog(dir)? {
                println!("{}", p.display());
            }
        }
        None => {
            for e in models::catalog() {
                println!("{:<20} {}", e.name, e.description);
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Compose { uwd, boxes, output, strict } => compose(&uwd, &boxes, &output, strict),
        Command::Simulate { file, scenario, output, scenario_dir, out_dir, observe } => simulate_cmd(
            &file,
            scenario.as_deref(),
            output.as_deref(),
            scenario_dir.as_deref(),
            out_dir.as_deref(),
            observe,
        ),
        Command::Equations { file } => {
            print!("{}", equations(&load_open(&file)?.inner));
            Ok(())
        }
        Command::ExportDot { file, output } => {
            let dot = export_dot(&load_open(&file)?.inner);
            match output {
                Some(out) => std::fs::write(&out, dot).map_err(runtime(&out)),
                None => {
                    print!("{dot}");
                    Ok(())
                }
            }
        }
        Command::CheckMorphism { morphism, from, to, samples, tol, seed, scenario, params } => check_morphism(
            &morphism,
            &from,
            &to,
            FlowCheck { samples, seed, tol },
            scenario.as_deref(),
            &params,
        ),
        Command::Catalog { export } => catalog(export.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
