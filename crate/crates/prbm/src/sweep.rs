//! Grid sweeps: one train-and-evaluate run per (constraint, seed) cell.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use prbm_core::eval::{self, AisConfig, NllEstimate, NllMethod};
use prbm_core::rng::{stream, Domain};
use prbm_core::topology::{self, ChimeraGraph, Coloring};
use prbm_core::trainer::Trainer;
use prbm_core::{ConnectivityMask, ConstraintSpec, PixelMapping, RbmParams, TrainConfig, TrainLog};
use rayon::prelude::*;

use crate::config::{ExperimentPlan, MappingSpec, MaskSpec, MethodChoice};
use crate::data_io::{self, Dataset};
use crate::error::{Error, Result};

/// Result columns, in order.
pub const CSV_COLUMNS: &[&str] = &[
    "experiment_id",
    "sigma_w",
    "sigma_b",
    "cap",
    "mask_kind",
    "mask_density",
    "seed",
    "nll_mean",
    "nll_stderr",
    "method",
    "runtime_s",
    "eval_sigma_w",
    "eval_sigma_b",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub cap: f64,
    pub mask: MaskSpec,
    pub seed: u64,
}

/// Cartesian product of the grids, seeds varying fastest.
pub fn cells(plan: &ExperimentPlan) -> Vec<Cell> {
    let mut out = Vec::with_capacity(plan.num_cells());
    for &sigma_w in &plan.sigma_w {
        for &sigma_b in &plan.sigma_b {
            for &cap in &plan.cap {
                for mask in &plan.masks {
                    for &seed in &plan.seeds {
                        out.push(Cell {
                            index: out.len(),
                            sigma_w,
                            sigma_b,
                            cap,
                            mask: mask.clone(),
                            seed,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub mask_kind: String,
    pub mask_density: f64,
    pub eval_sigma_w: f64,
    pub eval_sigma_b: f64,
    pub outcome: std::result::Result<NllEstimate, String>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub results: Vec<CellResult>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// 0 when every cell succeeded, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures() == 0 {
            0
        } else {
            2
        }
    }
}

/// Datasets, optional pretrained model and pixel layout shared by all cells.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub train: Option<Dataset>,
    pub test: Option<Dataset>,
    pub pretrained: Option<(RbmParams, ConstraintSpec)>,
    pub chimera: Option<(ChimeraGraph, Coloring)>,
    pub layout: Option<PixelMapping>,
}

impl Workspace {
    pub fn load(plan: &ExperimentPlan) -> Result<Self> {
        let train = plan.train_data.as_deref().map(data_io::load_dataset).transpose()?;
        let test = plan.test_data.as_deref().map(data_io::load_dataset).transpose()?;
        let pretrained = plan.model.as_deref().map(data_io::load_model).transpose()?;
        Self::new(plan, train, test, pretrained)
    }

    pub fn new(
        plan: &ExperimentPlan,
        train: Option<Dataset>,
        test: Option<Dataset>,
        pretrained: Option<(RbmParams, ConstraintSpec)>,
    ) -> Result<Self> {
        let needs_graph = plan.masks.contains(&MaskSpec::Chimera)
            || matches!(plan.mapping, MappingSpec::PixelBlocks | MappingSpec::ExtendedPixelBlocks);
        let chimera = if needs_graph {
            let (m, n, l) = plan.chimera;
            let graph = ChimeraGraph::new(m, n, l)?;
            let coloring = topology::bipartition(&graph)?;
            Some((graph, coloring))
        } else {
            None
        };
        let image_dim = train.as_ref().or(test.as_ref()).map(Dataset::dim);
        let layout = resolve_layout(plan, image_dim, chimera.as_ref())?;
        if let (Some(a), Some(b)) = (&train, &test) {
            if a.dim() != b.dim() {
                return Err(Error::value(
                    "test_data",
                    b.name(),
                    format!("has {} columns, training data has {}", b.dim(), a.dim()),
                ));
            }
        }
        Ok(Self {
            train,
            test,
            pretrained,
            chimera,
            layout,
        })
    }

    /// Visible units the model sees.
    pub fn num_visible(&self) -> Option<usize> {
        match (&self.layout, &self.train, &self.test, &self.pretrained) {
            (Some(m), ..) => Some(m.num_units()),
            (None, Some(d), ..) | (None, None, Some(d), _) => Some(d.dim()),
            (None, None, None, Some((p, _))) => Some(p.num_visible()),
            _ => None,
        }
    }
}

/// Image width and height for `dim` pixels, inferring a square when unset.
pub fn image_shape(plan: &ExperimentPlan, dim: usize) -> Result<(usize, usize)> {
    match (plan.image_width, plan.image_height) {
        (0, 0) => {
            let side = (dim as f64).sqrt().round() as usize;
            if side * side == dim {
                Ok((side, side))
            } else {
                Ok((dim, 1))
            }
        }
        (w, 0) if w > 0 && dim % w == 0 => Ok((w, dim / w)),
        (0, h) if h > 0 && dim % h == 0 => Ok((dim / h, h)),
        (w, h) if w * h == dim => Ok((w, h)),
        (w, h) => Err(Error::value(
            "image_width",
            format!("{w}x{h}"),
            format!("does not match {dim} pixels"),
        )),
    }
}

fn resolve_layout(
    plan: &ExperimentPlan,
    image_dim: Option<usize>,
    chimera: Option<&(ChimeraGraph, Coloring)>,
) -> Result<Option<PixelMapping>> {
    let block = |extended: bool| -> Result<Option<PixelMapping>> {
        let (graph, coloring) = chimera.expect("graph built for block mappings");
        let (w, h) = match image_dim {
            Some(dim) => image_shape(plan, dim)?,
            None if plan.image_width > 0 && plan.image_height > 0 => (plan.image_width, plan.image_height),
            None => (2 * graph.cols(), 2 * graph.rows()),
        };
        let m = if extended {
            topology::extended_pixel_blocks_mapping(w, h, graph, coloring)?
        } else {
            topology::pixel_blocks_mapping(w, h, graph, coloring)?
        };
        Ok(Some(m))
    };
    match &plan.mapping {
        MappingSpec::Identity => Ok(None),
        MappingSpec::PixelBlocks => block(false),
        MappingSpec::ExtendedPixelBlocks => block(true),
        MappingSpec::File(path) => {
            let m = data_io::load_mapping(path)?;
            if let Some(dim) = image_dim {
                if m.num_pixels() != dim {
                    return Err(Error::value(
                        "mapping",
                        path.display().to_string(),
                        format!("covers {} pixels, data has {dim}", m.num_pixels()),
                    ));
                }
            }
            Ok(Some(m))
        }
    }
}

/// Training configuration and evaluation noise for one cell.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub train: TrainConfig,
    pub eval_spec: ConstraintSpec,
}

pub fn cell_setup(plan: &ExperimentPlan, ws: &Workspace, cell: &Cell) -> Result<CellSetup> {
    let d = ws
        .num_visible()
        .ok_or_else(|| Error::MissingKey("train_data".into()))?;
    let mut num_hidden = plan.train.num_hidden;
    let mask = match &cell.mask {
        MaskSpec::Dense => None,
        MaskSpec::RandomDrop(p) => Some(ConnectivityMask::random_drop(d, num_hidden, *p, cell.seed)?),
        MaskSpec::Chimera => {
            let (graph, coloring) = ws.chimera.as_ref().expect("graph built for chimera masks");
            let mask = topology::chimera_mask(graph, coloring)?;
            if mask.num_visible() != d {
                return Err(Error::value(
                    "mask",
                    "chimera",
                    format!("{} has {} visible units, data provides {d}", graph.label(), mask.num_visible()),
                ));
            }
            num_hidden = mask.num_hidden();
            Some(mask)
        }
        MaskSpec::File(path) => {
            let mask = data_io::load_mask(path)?;
            if mask.num_visible() != d {
                return Err(Error::value(
                    "mask",
                    path.display().to_string(),
                    format!("has {} visible units, data provides {d}", mask.num_visible()),
                ));
            }
            num_hidden = mask.num_hidden();
            Some(mask)
        }
    };
    let mut base = ConstraintSpec::unconstrained().with_cap(cell.cap);
    base.mask = mask;
    let noisy = base.clone().with_noise(cell.sigma_w, cell.sigma_b);
    let train = TrainConfig {
        num_hidden,
        seed: cell.seed,
        constraint: if plan.noise_phase.in_training() { noisy.clone() } else { base.clone() },
        ..plan.train.clone()
    };
    Ok(CellSetup {
        train,
        eval_spec: if plan.noise_phase.in_evaluation() { noisy } else { base },
    })
}

/// Trains epoch by epoch, stamping each log record with its wall time.
pub fn train_model(rows: &[Vec<f64>], layout: Option<&PixelMapping>, config: &TrainConfig) -> Result<(RbmParams, TrainLog)> {
    let d = match (layout, rows.first()) {
        (Some(m), _) => m.num_units(),
        (None, Some(r)) => r.len(),
        (None, None) => return Err(Error::value("train_data", "", "no training rows")),
    };
    let mut trainer = Trainer::new(d, None, config.clone())?;
    for _ in 0..config.epochs {
        let start = Instant::now();
        trainer.run_epoch(rows, layout)?;
        trainer.log_mut().set_last_wall_time(start.elapsed().as_secs_f64());
    }
    Ok(trainer.into_parts())
}

pub fn ais_config(plan: &ExperimentPlan, ws: &Workspace) -> Result<AisConfig> {
    let config = AisConfig {
        num_betas: plan.ais_betas,
        num_particles: plan.ais_particles,
        base_visible_bias: None,
    };
    match (&ws.train, plan.ais_data_base) {
        (Some(train), true) => Ok(config.with_data_base(&train.binarized(ws.layout.as_ref(), 0)?)?),
        _ => Ok(config),
    }
}

/// Noise-free NLL when the spec has no noise, otherwise the Monte Carlo expectation over noise.
pub fn evaluate(
    plan: &ExperimentPlan,
    params: &RbmParams,
    spec: &ConstraintSpec,
    test: &[Vec<bool>],
    ais: &AisConfig,
    seed: u64,
) -> Result<NllEstimate> {
    let method = match plan.nll_method {
        MethodChoice::Auto => NllMethod::auto(params),
        MethodChoice::Exact => NllMethod::Exact,
        MethodChoice::Ais => NllMethod::Ais,
    };
    let mut rng = stream(seed, Domain::NoiseDraw, 0);
    if spec.sigma_w == 0.0 && spec.sigma_b == 0.0 {
        Ok(eval::nll(params, test, method, ais, &mut rng)?)
    } else {
        Ok(eval::expected_nll_under_noise(params, spec, test, plan.noise_draws, method, ais, &mut rng)?)
    }
}

struct Shared<'a> {
    plan: &'a ExperimentPlan,
    ws: &'a Workspace,
    test: Vec<Vec<bool>>,
    ais: AisConfig,
}

fn run_cell(shared: &Shared<'_>, cell: &Cell) -> CellResult {
    let start = Instant::now();
    let mut result = CellResult {
        cell: cell.clone(),
        mask_kind: String::new(),
        mask_density: f64::NAN,
        eval_sigma_w: 0.0,
        eval_sigma_b: 0.0,
        outcome: Err(String::new()),
        runtime_s: 0.0,
    };
    let outcome = (|| -> Result<NllEstimate> {
        let setup = cell_setup(shared.plan, shared.ws, cell)?;
        result.mask_kind = setup.train.constraint.mask_kind();
        result.mask_density = setup.train.constraint.mask_density();
        result.eval_sigma_w = setup.eval_spec.sigma_w;
        result.eval_sigma_b = setup.eval_spec.sigma_b;
        let params = match (&shared.ws.pretrained, &shared.ws.train) {
            (Some((p, _)), _) => {
                let mut p = p.clone();
                setup.train.constraint.enforce(&mut p)?;
                p
            }
            (None, Some(train)) => train_model(train.rows(), shared.ws.layout.as_ref(), &setup.train)?.0,
            (None, None) => return Err(Error::MissingKey("train_data".into())),
        };
        if shared.plan.emit_samples {
            let path = shared
                .plan
                .output_dir
                .join(format!("{}_cell{}.pgm", shared.plan.experiment_id, cell.index));
            write_samples(shared.plan, &params, shared.ws.layout.as_ref(), cell.seed, &path)?;
        }
        evaluate(shared.plan, &params, &setup.eval_spec, &shared.test, &shared.ais, cell.seed)
    })();
    result.outcome = outcome.map_err(|e| e.to_string());
    result.runtime_s = start.elapsed().as_secs_f64();
    result
}

/// Renders `plan.samples` chains after `plan.sample_steps` sweeps into a PGM grid.
pub fn write_samples(
    plan: &ExperimentPlan,
    params: &RbmParams,
    layout: Option<&PixelMapping>,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let mapping = match layout {
        Some(m) => m.clone(),
        None => {
            let (w, h) = image_shape(plan, params.num_visible())?;
            PixelMapping::identity(w, h)
        }
    };
    let samples = eval::sample_grid(
        params,
        plan.samples,
        plan.sample_steps,
        &mut stream(seed, Domain::SampleGrid, 1),
    )?;
    let image = eval::tile_samples(&samples, &mapping, plan.sample_columns)?;
    data_io::write_pgm(path, &image)
}

/// Runs every cell, in parallel up to `plan.workers` threads. Failed cells are
/// recorded and do not stop the sweep; only setup problems are returned as errors.
pub fn run_sweep(plan: &ExperimentPlan, ws: &Workspace) -> Result<SweepReport> {
    let test = ws
        .test
        .as_ref()
        .ok_or_else(|| Error::MissingKey("test_data".into()))?
        .binarized(ws.layout.as_ref(), 0)?;
    if plan.emit_samples {
        std::fs::create_dir_all(&plan.output_dir).map_err(|e| Error::io(&plan.output_dir, e))?;
    }
    let shared = Shared {
        plan,
        ws,
        test,
        ais: ais_config(plan, ws)?,
    };
    let grid = cells(plan);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::value("workers", plan.workers.to_string(), e.to_string()))?;
    let results = pool.install(|| grid.par_iter().map(|c| run_cell(&shared, c)).collect());
    Ok(SweepReport { results })
}

fn number(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

/// Writes the metadata header, then one CSV row per cell.
pub fn write_results<W: Write>(mut out: W, plan: &ExperimentPlan, report: &SweepReport) -> Result<()> {
    let io = |e| Error::io(Path::new("<results>"), e);
    out.write_all(plan.metadata_header().as_bytes()).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &report.results {
        let (mean, stderr, method, status) = match &r.outcome {
            Ok(e) => (number(e.mean), number(e.std_err), e.method.as_str().to_string(), "ok".to_string()),
            Err(msg) => (String::new(), String::new(), String::new(), format!("error: {msg}")),
        };
        w.write_record([
            plan.experiment_id.clone(),
            number(r.cell.sigma_w),
            number(r.cell.sigma_b),
            number(r.cell.cap),
            r.mask_kind.clone(),
            number(r.mask_density),
            r.cell.seed.to_string(),
            mean,
            stderr,
            method,
            format!("{:.3}", r.runtime_s),
            number(r.eval_sigma_w),
            number(r.eval_sigma_b),
            status,
        ])?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn write_results_file(path: &Path, plan: &ExperimentPlan, report: &SweepReport) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(std::io::BufWriter::new(file), plan, report)
}
