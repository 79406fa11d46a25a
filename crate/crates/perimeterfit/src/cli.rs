//! Command-line front-end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use perimeterfit_core::edges::{canny, GrayMode};
use perimeterfit_core::grid::Objective;
use perimeterfit_core::perimeterfit::{build_perimeter_map, Fusion};
use perimeterfit_core::render_overlay;
use perimeterfit_core::superpixels::{flatten, simplify, Method};

use crate::config::{parse_fusions, parse_range, RunConfig, RunHeader};
use crate::error::{Error, Result};
use crate::manifest::{load_class_names, Manifest};
use crate::pipeline::{evaluate_manifest, grid_search_manifest, refine_manifest, PerimeterCache};
use crate::synth::{self, SynthSpec};
use crate::{fsio, netpbm, palette};

#[derive(Debug, Parser)]
#[command(name = "perimeterfit", version, about = "Perimeter-guided refinement of class activation maps")]
pub struct Cli {
    /// Worker threads for batch commands
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for synthetic data and recorded in run headers
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Over-segment an image and merge down to at most q clusters
    Simplify(SimplifyCmd),
    /// Canny edges of an image
    Edges(EdgesCmd),
    /// Perimeter map: simplify, flatten, Canny
    Perimeter(PerimeterCmd),
    /// Refine every score map of a manifest into a label map
    Refine(RefineCmd),
    /// Score predicted label maps against ground truth
    Eval(EvalCmd),
    /// Search refinement thresholds and fusion modes against ground truth
    Gridsearch(GridCmd),
    /// Blend a label map over its image
    Overlay(OverlayCmd),
    /// Generate a synthetic corpus with manifest
    Synth(SynthCmd),
}

#[derive(Debug, Args)]
pub struct SimplifyArgs {
    /// slic or quickshift
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Maximum number of clusters after merging
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub slic_k: Option<usize>,
    #[arg(long)]
    pub compactness: Option<f64>,
    #[arg(long)]
    pub slic_iters: Option<usize>,
    #[arg(long)]
    pub qs_kernel_size: Option<f64>,
    #[arg(long)]
    pub qs_max_dist: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CannyArgs {
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Weak threshold as a fraction of the largest gradient
    #[arg(long)]
    pub low: Option<f64>,
    /// Strong threshold as a fraction of the largest gradient
    #[arg(long)]
    pub high: Option<f64>,
    /// luma or lightness
    #[arg(long, value_parser = parse_gray)]
    pub gray: Option<GrayMode>,
}

#[derive(Debug, Args)]
pub struct SimplifyCmd {
    #[arg(long)]
    pub image: PathBuf,
    /// Segment map (PGM, or SEG1 above 255 segments)
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the flattened image
    #[arg(long)]
    pub flat: Option<PathBuf>,
    #[command(flatten)]
    pub simplify: SimplifyArgs,
}

#[derive(Debug, Args)]
pub struct EdgesCmd {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub canny: CannyArgs,
}

#[derive(Debug, Args)]
pub struct PerimeterCmd {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub simplify: SimplifyArgs,
    #[command(flatten)]
    pub canny: CannyArgs,
}

#[derive(Debug, Args)]
pub struct RefineCmd {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub outdir: PathBuf,
    #[arg(long)]
    pub t_slic: Option<f64>,
    #[arg(long)]
    pub t_quick: Option<f64>,
    /// union, intersection, slic_only, or quick_only
    #[arg(long, value_parser = parse_fusion)]
    pub fusion: Option<Fusion>,
    #[command(flatten)]
    pub simplify: SimplifyArgs,
    #[command(flatten)]
    pub canny: CannyArgs,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON array of class names indexed by class id
    #[arg(long)]
    pub classes: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridCmd {
    #[arg(long)]
    pub manifest: PathBuf,
    /// start:end:step
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub t_slic: String,
    /// start:end:step
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub t_quick: String,
    /// Comma-separated fusion modes
    #[arg(long, default_value = "union,intersection")]
    pub fusion: String,
    /// miou or neg_m_fp
    #[arg(long, default_value = "miou", value_parser = parse_objective)]
    pub objective: Objective,
    /// Class names; fixes the number of classes
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub simplify: SimplifyArgs,
    #[command(flatten)]
    pub canny: CannyArgs,
}

#[derive(Debug, Args)]
pub struct OverlayCmd {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON object of class id to [r, g, b]; VOC colors otherwise
    #[arg(long)]
    pub palette: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of images
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub min_shapes: Option<usize>,
    #[arg(long)]
    pub max_shapes: Option<usize>,
    #[arg(long)]
    pub texture: Option<f64>,
    #[arg(long)]
    pub cam_blur: Option<f64>,
    #[arg(long)]
    pub blobs: Option<usize>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "slic" => Ok(Method::Slic),
        "quickshift" => Ok(Method::Quickshift),
        _ => Err(format!("unknown method {s:?}; expected slic or quickshift")),
    }
}

fn parse_gray(s: &str) -> std::result::Result<GrayMode, String> {
    match s {
        "luma" => Ok(GrayMode::Luma),
        "lightness" => Ok(GrayMode::Lightness),
        _ => Err(format!("unknown gray mode {s:?}; expected luma or lightness")),
    }
}

fn parse_fusion(s: &str) -> std::result::Result<Fusion, String> {
    Fusion::parse(s).ok_or_else(|| format!("unknown fusion {s:?}"))
}

fn parse_objective(s: &str) -> std::result::Result<Objective, String> {
    Objective::parse(s).ok_or_else(|| format!("unknown objective {s:?}; expected miou or neg_m_fp"))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl SimplifyArgs {
    fn apply(&self, c: &mut RunConfig) {
        let s = &mut c.simplify;
        set(&mut s.method, self.method);
        set(&mut s.q, self.q);
        set(&mut s.slic_k, self.slic_k);
        set(&mut s.slic_compactness, self.compactness);
        set(&mut s.slic_iters, self.slic_iters);
        set(&mut s.qs_kernel_size, self.qs_kernel_size);
        set(&mut s.qs_max_dist, self.qs_max_dist);
    }
}

impl CannyArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.canny.sigma, self.sigma);
        set(&mut c.canny.low, self.low);
        set(&mut c.canny.high, self.high);
        set(&mut c.canny.gray, self.gray);
    }
}

impl Cli {
    /// Defaults, then the config file, then command-line flags.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        set(&mut c.workers, self.workers);
        if let Some(seed) = self.seed {
            c.seed = seed;
            c.simplify.rng_seed = seed;
        }
        match &self.command {
            Command::Simplify(a) => a.simplify.apply(&mut c),
            Command::Edges(a) => a.canny.apply(&mut c),
            Command::Perimeter(a) => {
                a.simplify.apply(&mut c);
                a.canny.apply(&mut c);
            }
            Command::Refine(a) => {
                a.simplify.apply(&mut c);
                a.canny.apply(&mut c);
                set(&mut c.refine.threshold_slic, a.t_slic);
                set(&mut c.refine.threshold_quick, a.t_quick);
                set(&mut c.refine.fusion, a.fusion);
            }
            Command::Gridsearch(a) => {
                a.simplify.apply(&mut c);
                a.canny.apply(&mut c);
            }
            Command::Eval(_) | Command::Overlay(_) | Command::Synth(_) => {}
        }
        c.validate()?;
        Ok(c)
    }
}

fn header_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".run.json");
    out.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fsio::create_dir(p),
        _ => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let config = cli.resolve_config()?;
    let header = |name: &str| RunHeader::new(name, &config);
    match &cli.command {
        Command::Simplify(a) => {
            let image = netpbm::load_ppm(&a.image)?;
            let seg = simplify(&image, &config.simplify)?;
            ensure_parent(&a.out)?;
            netpbm::save_segment_map(&seg, &a.out)?;
            let mut h = header("simplify").input("image", &a.image).output("segments", &a.out);
            if let Some(flat) = &a.flat {
                ensure_parent(flat)?;
                netpbm::save_ppm(&flatten(&image, &seg)?, flat)?;
                h = h.output("flat", flat);
            }
            h.write(&header_path(&a.out))
        }
        Command::Edges(a) => {
            let image = netpbm::load_ppm(&a.image)?;
            let pm = canny(&image, &config.canny)?;
            ensure_parent(&a.out)?;
            netpbm::save_perimeter_map(&pm, &a.out)?;
            header("edges")
                .input("image", &a.image)
                .output("edges", &a.out)
                .write(&header_path(&a.out))
        }
        Command::Perimeter(a) => {
            let image = netpbm::load_ppm(&a.image)?;
            let pm = build_perimeter_map(&image, &config.simplify, &config.canny)?;
            ensure_parent(&a.out)?;
            netpbm::save_perimeter_map(&pm, &a.out)?;
            header("perimeter")
                .input("image", &a.image)
                .output("perimeter", &a.out)
                .write(&header_path(&a.out))
        }
        Command::Refine(a) => {
            let manifest = Manifest::load(&a.manifest)?;
            fsio::create_dir(&a.outdir)?;
            refine_manifest(
                &manifest,
                &a.outdir,
                &config.simplify,
                &config.canny,
                &config.refine,
                config.workers,
            )?;
            header("refine")
                .input("manifest", &a.manifest)
                .output("outdir", &a.outdir)
                .write(&a.outdir.join("run.json"))
        }
        Command::Eval(a) => {
            let manifest = Manifest::load(&a.manifest)?;
            let names = load_class_names(&a.classes)?;
            let (report, table) = evaluate_manifest(&manifest, &a.pred_dir, &names, config.workers)?;
            ensure_parent(&a.report)?;
            fsio::write_json(&a.report, &report)?;
            let mut h = header("eval")
                .input("manifest", &a.manifest)
                .input("pred_dir", &a.pred_dir)
                .input("classes", &a.classes)
                .output("report", &a.report);
            if let Some(t) = &a.table {
                ensure_parent(t)?;
                fsio::write_atomic(t, table.as_bytes())?;
                h = h.output("table", t);
            }
            print!("{table}");
            h.write(&header_path(&a.report))
        }
        Command::Gridsearch(a) => {
            let manifest = Manifest::load(&a.manifest)?;
            let num_classes = match &a.classes {
                Some(p) => load_class_names(p)?.len(),
                None => {
                    let max = manifest
                        .entries
                        .iter()
                        .flat_map(|e| e.classes_present.iter().copied())
                        .max()
                        .unwrap_or(0);
                    usize::from(max) + 1
                }
            };
            let t_slic = parse_range(&a.t_slic)?;
            let t_quick = parse_range(&a.t_quick)?;
            let fusions = parse_fusions(&a.fusion)?;
            let result = grid_search_manifest(
                &manifest,
                &PerimeterCache::new(),
                &config.simplify,
                &config.canny,
                num_classes,
                &t_slic,
                &t_quick,
                &fusions,
                a.objective,
                config.workers,
            )?;
            ensure_parent(&a.out)?;
            fsio::write_json(&a.out, &result)?;
            let b = &result.best;
            println!(
                "best: t_slic={} t_quick={} fusion={} {}={}",
                b.t_slic,
                b.t_quick,
                b.fusion.name(),
                a.objective.name(),
                b.objective_value.map_or_else(|| "undefined".into(), |v| format!("{v:.6}"))
            );
            let mut h = header("gridsearch")
                .input("manifest", &a.manifest)
                .output("grid", &a.out);
            h.extra = Some(serde_json::json!({
                "t_slic": t_slic,
                "t_quick": t_quick,
                "fusions": fusions,
                "objective": a.objective,
                "num_classes": num_classes,
            }));
            h.write(&header_path(&a.out))
        }
        Command::Overlay(a) => {
            let image = netpbm::load_ppm(&a.image)?;
            let mask = netpbm::load_label_map(&a.mask)?;
            let pal = match &a.palette {
                Some(p) => palette::load_palette(p)?,
                None => palette::voc_palette(256),
            };
            let out = render_overlay(&image, &mask, &pal)?;
            ensure_parent(&a.out)?;
            netpbm::save_ppm(&out, &a.out)?;
            let mut h = header("overlay")
                .input("image", &a.image)
                .input("mask", &a.mask)
                .output("overlay", &a.out);
            if let Some(p) = &a.palette {
                h = h.input("palette", p);
            }
            h.write(&header_path(&a.out))
        }
        Command::Synth(a) => {
            let mut spec = SynthSpec {
                rng_seed: config.seed,
                ..SynthSpec::default()
            };
            set(&mut spec.image_count, a.n);
            set(&mut spec.image_size, a.size);
            set(&mut spec.min_shapes, a.min_shapes);
            set(&mut spec.max_shapes, a.max_shapes);
            set(&mut spec.texture_amplitude, a.texture);
            set(&mut spec.cam_blur_sigma, a.cam_blur);
            set(&mut spec.distractor_blob_count, a.blobs);
            spec.validate()?;
            let indices: Vec<usize> = (0..spec.image_count).collect();
            let samples = crate::pipeline::par_map(config.workers, &indices, |&i| {
                synth::generate_one(&spec, i)
            })?;
            fsio::create_dir(&a.out)?;
            let manifest = synth::write_dataset(&samples, &a.out)?;
            let mut h = header("synth").output("manifest", &manifest);
            h.extra = Some(serde_json::to_value(&spec).expect("serializable spec"));
            h.write(&a.out.join("run.json"))
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 1 on failure, 2 on usage
/// errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e @ Error::Usage(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
