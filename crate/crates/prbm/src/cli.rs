//! Command-line front end. Every config key is also a `--flag`; flags override
//! the config file, which overrides built-in defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Arg, ArgMatches, Command};
use prbm_core::topology::{self, ChimeraGraph};

use crate::config::{ConfigEntries, ExperimentPlan, MappingSpec, Mode, KEYS};
use crate::data_io;
use crate::error::{Error, Result};
use crate::sweep::{self, Workspace};

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("train", "Train one model and save it with its training log"),
    ("eval", "Evaluate a saved model over the noise grid and seeds"),
    ("sample", "Render Gibbs samples of a saved model as a PGM image"),
    ("sweep", "Train and evaluate every cell of the constraint grid"),
    ("topology-info", "Describe a chimera graph and its bipartite mask"),
];

pub fn command() -> Command {
    let mut root = Command::new("prbm")
        .about("Restricted Boltzmann machines under simulated physical constraints")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, about) in SUBCOMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("PATH")
                .help("key = value config file"),
        );
        for key in KEYS.iter().filter(|k| k.name != "mode") {
            let help = match key.default {
                Some(d) if !d.is_empty() => format!("{} [default: {d}]", key.help),
                _ => key.help.to_string(),
            };
            sub = sub.arg(
                Arg::new(key.name)
                    .long(key.name.replace('_', "-"))
                    .value_name("VALUE")
                    .help(help),
            );
        }
        root = root.subcommand(sub);
    }
    root
}

/// Config file entries overlaid with command-line flags.
pub fn plan_from_matches(mode: &str, matches: &ArgMatches) -> Result<ExperimentPlan> {
    let mut entries = match matches.get_one::<String>("config") {
        Some(path) => {
            let path = PathBuf::from(path);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            ConfigEntries::parse(&text)?
        }
        None => ConfigEntries::default(),
    };
    let mut flags = ConfigEntries::default();
    flags.set("mode", mode)?;
    for key in KEYS.iter().filter(|k| k.name != "mode") {
        if let Some(v) = matches.get_one::<String>(key.name) {
            flags.set(key.name, v.clone())?;
        }
    }
    entries = entries.merge(flags);
    ExperimentPlan::from_entries(&entries)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (mode, sub) = matches.subcommand().expect("subcommand required");
    match plan_from_matches(mode, sub).and_then(|plan| execute(&plan)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a resolved plan; returns the exit code for non-fatal outcomes.
pub fn execute(plan: &ExperimentPlan) -> Result<i32> {
    match plan.mode {
        Mode::Train => train(plan),
        Mode::Eval | Mode::Sweep => run_grid(plan),
        Mode::Sample => sample(plan),
        Mode::TopologyInfo => {
            print!("{}", topology_info(plan)?);
            Ok(0)
        }
    }
}

fn create_output_dir(plan: &ExperimentPlan) -> Result<()> {
    std::fs::create_dir_all(&plan.output_dir).map_err(|e| Error::io(&plan.output_dir, e))
}

fn train(plan: &ExperimentPlan) -> Result<i32> {
    if plan.num_cells() != 1 {
        return Err(Error::value(
            "seeds",
            format!("{} grid cells", plan.num_cells()),
            "train takes one value per grid key; use sweep for grids",
        ));
    }
    let ws = Workspace::load(plan)?;
    let cell = &sweep::cells(plan)[0];
    let setup = sweep::cell_setup(plan, &ws, cell)?;
    let train = ws.train.as_ref().expect("train_data checked by the plan");
    let (params, log) = sweep::train_model(train.rows(), ws.layout.as_ref(), &setup.train)?;

    create_output_dir(plan)?;
    let model_path = plan.output_dir.join(format!("{}.prbm", plan.experiment_id));
    data_io::save_model(&model_path, &params, &setup.train.constraint)?;
    if let Some(layout) = &ws.layout {
        data_io::save_mapping(&plan.output_dir.join(format!("{}.mapping", plan.experiment_id)), layout)?;
    }
    let log_path = plan.output_dir.join(format!("{}_train_log.csv", plan.experiment_id));
    write_train_log(&log_path, plan, &log)?;
    println!("saved {}", model_path.display());
    if let Some(r) = log.last() {
        println!("epoch {} objective {:.6}", r.epoch, r.objective.value());
    }
    if let Some(test) = &ws.test {
        let bits = test.binarized(ws.layout.as_ref(), 0)?;
        let ais = sweep::ais_config(plan, &ws)?;
        let est = sweep::evaluate(plan, &params, &setup.eval_spec, &bits, &ais, cell.seed)?;
        println!("test nll {:.6} +- {:.6} ({})", est.mean, est.std_err, est.method.as_str());
    }
    Ok(0)
}

fn write_train_log(path: &std::path::Path, plan: &ExperimentPlan, log: &prbm_core::TrainLog) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(plan.metadata_header().as_bytes())
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "epoch",
        "updates",
        "weight_norm",
        "visible_bias_norm",
        "hidden_bias_norm",
        "objective_kind",
        "objective",
        "wall_time_s",
        "epoch_seed",
    ])?;
    for r in log.records() {
        let kind = match r.objective {
            prbm_core::trainer::Objective::ExactNll(_) => "exact_nll",
            prbm_core::trainer::Objective::PseudoNll(_) => "pseudo_nll",
        };
        w.write_record([
            r.epoch.to_string(),
            r.updates.to_string(),
            r.weight_norm.to_string(),
            r.visible_bias_norm.to_string(),
            r.hidden_bias_norm.to_string(),
            kind.to_string(),
            r.objective.value().to_string(),
            r.wall_time_s.map(|t| format!("{t:.3}")).unwrap_or_default(),
            r.epoch_seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn run_grid(plan: &ExperimentPlan) -> Result<i32> {
    let ws = Workspace::load(plan)?;
    let report = sweep::run_sweep(plan, &ws)?;
    let suffix = if plan.mode == Mode::Eval { "_eval" } else { "" };
    let path = plan.output_dir.join(format!("{}{suffix}.csv", plan.experiment_id));
    sweep::write_results_file(&path, plan, &report)?;
    for r in &report.results {
        match &r.outcome {
            Ok(e) => println!(
                "cell {} sigma_w={} sigma_b={} cap={} mask={} seed={}: nll {:.6} +- {:.6} ({})",
                r.cell.index,
                r.cell.sigma_w,
                r.cell.sigma_b,
                r.cell.cap,
                r.mask_kind,
                r.cell.seed,
                e.mean,
                e.std_err,
                e.method.as_str()
            ),
            Err(msg) => eprintln!("cell {} failed: {msg}", r.cell.index),
        }
    }
    println!(
        "wrote {} ({} cells, {} failed)",
        path.display(),
        report.results.len(),
        report.failures()
    );
    Ok(report.exit_code())
}

fn sample(plan: &ExperimentPlan) -> Result<i32> {
    let ws = Workspace::load(plan)?;
    let (params, _) = ws.pretrained.as_ref().expect("model checked by the plan");
    create_output_dir(plan)?;
    let path = plan.output_dir.join(format!("{}_samples.pgm", plan.experiment_id));
    sweep::write_samples(plan, params, ws.layout.as_ref(), plan.seeds[0], &path)?;
    println!("wrote {}", path.display());
    Ok(0)
}

/// Human-readable summary of the configured chimera graph.
pub fn topology_info(plan: &ExperimentPlan) -> Result<String> {
    let (m, n, l) = plan.chimera;
    let graph = ChimeraGraph::new(m, n, l)?;
    let coloring = topology::bipartition(&graph)?;
    let mask = topology::chimera_mask(&graph, &coloring)?;
    let total = mask.num_visible() * mask.num_hidden();
    let mut s = String::new();
    writeln!(s, "graph {}", graph.label()).unwrap();
    writeln!(s, "nodes {}", graph.num_nodes()).unwrap();
    writeln!(s, "edges {}", graph.edges().len()).unwrap();
    writeln!(s, "partition {}/{}", coloring.visible_nodes().len(), coloring.hidden_nodes().len()).unwrap();
    writeln!(
        s,
        "mask kept {} of {} ({:.3}% removed)",
        mask.allowed_count(),
        total,
        100.0 * (1.0 - mask.density())
    )
    .unwrap();
    let degrees: Vec<usize> = (0..graph.num_nodes()).map(|v| graph.degree(v)).collect();
    writeln!(
        s,
        "degree min {} max {}",
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap()
    )
    .unwrap();
    if plan.export {
        create_output_dir(plan)?;
        let label = format!("chimera_{m}x{n}x{l}");
        let mask_path = plan.output_dir.join(format!("{label}.mask"));
        data_io::save_mask(&mask_path, &mask)?;
        writeln!(s, "wrote {}", mask_path.display()).unwrap();
        if l == 4 {
            let (w, h) = (2 * n, 2 * m);
            let mapping = match plan.mapping {
                MappingSpec::ExtendedPixelBlocks => topology::extended_pixel_blocks_mapping(w, h, &graph, &coloring)?,
                _ => topology::pixel_blocks_mapping(w, h, &graph, &coloring)?,
            };
            let path = plan
                .output_dir
                .join(format!("{label}_{}.mapping", mapping.kind().as_str()));
            data_io::save_mapping(&path, &mapping)?;
            writeln!(s, "wrote {}", path.display()).unwrap();
        }
    }
    Ok(s)
}
