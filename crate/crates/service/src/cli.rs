//! Command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mvpart::eval::{aggregate_by_category, class_agnostic_miou, Grouping};
use mvpart::lift::{lift_masks, LiftConfig, DEFAULT_DEPTH_TOL};
use mvpart::mesh::{labeling_from_json, labeling_to_json, load_mesh_with_labels, ElementKind, PartLabeling, TriMesh};
use mvpart::pipeline::{segment_prompts, PipelineConfig};
use mvpart::postprocess::{postprocess, PostprocessConfig, DEFAULT_K, DEFAULT_MIN_FRACTION};
use mvpart::render::{write_depth_raw, write_face_id_raw, write_normal_png, write_point_raw, ViewConfig};
use mvpart::scene::Scene;
use mvpart::segment::{
    load_external_masks, mask_file_name, oracle_masks, write_masks, AutoCompleteConfig, ExternalProvider, MaskProvider,
    OracleProvider, Prompt, RegionGrowProvider, DEFAULT_ANGLE_THRESH_DEG,
};
use serde::Serialize;

use crate::http::{router, AppState, ServiceConfig};
use crate::session::ProviderKind;

#[derive(Debug, Parser)]
#[command(name = "mvpart", version, about = "Multi-view part segmentation of textureless meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the canonical views (normal, depth, point and face-id maps).
    Render(RenderArgs),
    /// Lift per-view mask PNGs to per-face labels.
    Lift(LiftArgs),
    /// Remove small components, smooth and fill a label file.
    Postprocess(PostprocessArgs),
    /// Class-agnostic mIoU of predicted label files against ground truth.
    Eval(EvalArgs),
    /// Run prompts through a mask provider and lift the result.
    Segment(SegmentArgs),
    /// Print the numerical invariant report of the toy encoder as JSON.
    ToyReport(ToyReportArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    /// Square render resolution in pixels.
    #[arg(long, default_value_t = 512)]
    pub image_size: u32,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub view: ViewArgs,
    /// Also write ground-truth masks from this label file.
    #[arg(long)]
    pub gt: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Directory of `mask_XX.png` files.
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DEPTH_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Render resolution; defaults to the size of the first mask.
    #[arg(long)]
    pub image_size: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PostArgs {
    /// Minimum component size as a fraction of the mesh.
    #[arg(long = "p", default_value_t = DEFAULT_MIN_FRACTION)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub smooth_iters: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Leave unlabeled faces unlabeled instead of filling them.
    #[arg(long)]
    pub no_fill: bool,
}

impl PostArgs {
    fn config(&self) -> PostprocessConfig {
        PostprocessConfig {
            min_fraction: self.p,
            smooth_iters: self.smooth_iters,
            k: self.k,
            fill: !self.no_fill,
            ..PostprocessConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub post: PostArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted label files.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth label files with the same names.
    #[arg(long)]
    pub gt: PathBuf,
    /// Category grouping JSON, or `partnete` for the built-in table.
    #[arg(long)]
    pub grouping: Option<String>,
    /// Directory of meshes named like the label files, for area weighting.
    /// Without it every element weighs the same.
    #[arg(long)]
    pub meshes: Option<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// JSON array of prompts.
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long, value_enum, default_value_t = ProviderKind::RegionGrow)]
    pub provider: ProviderKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth labels for the oracle provider (PLY `part_id` also works).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Mask directory for the external provider.
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ANGLE_THRESH_DEG)]
    pub angle: f64,
    /// Fill the opposite view after each prompt.
    #[arg(long)]
    pub auto_complete: bool,
    #[arg(long, default_value_t = DEFAULT_DEPTH_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub view: ViewArgs,
    #[command(flatten)]
    pub post: PostArgs,
}

#[derive(Debug, Args)]
pub struct ToyReportArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MVPART_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "MVPART_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Persist sessions here and restore them on start.
    #[arg(long, env = "MVPART_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, env = "MVPART_IMAGE_SIZE", default_value_t = 512)]
    pub image_size: u32,
    #[arg(long, env = "MVPART_PROVIDER", value_enum, default_value_t = ProviderKind::RegionGrow)]
    pub provider: ProviderKind,
    #[arg(long, env = "MVPART_ANGLE", default_value_t = DEFAULT_ANGLE_THRESH_DEG)]
    pub angle: f64,
    /// Fill unprompted faces by nearest labeled neighbors.
    #[arg(long, env = "MVPART_FILL")]
    pub fill: bool,
    #[arg(long, env = "MVPART_MAX_UPLOAD_MB", default_value_t = 64)]
    pub max_upload_mb: usize,
    #[arg(long, env = "MVPART_MAX_FACES", default_value_t = 200_000)]
    pub max_faces: usize,
}

fn view_config(size: u32) -> ViewConfig {
    ViewConfig::default().with_image_size(size)
}

fn load_mesh(path: &Path) -> Result<(TriMesh, Option<Vec<i32>>)> {
    load_mesh_with_labels(path, None).with_context(|| format!("reading mesh {}", path.display()))
}

fn read_labels(path: &Path) -> Result<(ElementKind, Vec<i32>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    labeling_from_json(&text).with_context(|| format!("parsing labels {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn face_labels(mesh: &TriMesh, labels: Vec<i32>) -> Result<PartLabeling> {
    Ok(PartLabeling::for_faces(mesh, labels)?)
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let (mesh, part_ids) = load_mesh(&args.mesh)?;
    let scene = Scene::new(&mesh, &view_config(args.view.image_size))?;
    std::fs::create_dir_all(&args.out)?;
    for (k, (b, v)) in scene.buffers.iter().zip(&scene.views.views).enumerate() {
        write_normal_png(b, &args.out.join(format!("normal_{k:02}.png")), &args.out.join(format!("valid_{k:02}.png")))?;
        write_depth_raw(&args.out.join(format!("depth_{k:02}.raw")), b, k, &v.pose)?;
        write_point_raw(&args.out.join(format!("point_{k:02}.raw")), b, k, &v.pose)?;
        write_face_id_raw(&args.out.join(format!("face_id_{k:02}.raw")), b)?;
    }
    write(&args.out.join("views.json"), serde_json::to_vec_pretty(&scene.views)?)?;
    let gt = match &args.gt {
        Some(p) => Some(read_labels(p)?.1),
        None => part_ids,
    };
    if let Some(gt) = gt {
        let gt = face_labels(&scene.mesh, gt)?;
        write_masks(&args.out, &oracle_masks(&scene.mesh, &gt, &scene.buffers)?)?;
    }
    Ok(())
}

pub fn lift(args: &LiftArgs) -> Result<()> {
    let (mesh, _) = load_mesh(&args.mesh)?;
    let size = match args.image_size {
        Some(s) => s,
        None => {
            let first = args.masks.join(mask_file_name(0));
            let (w, h) = image::image_dimensions(&first).with_context(|| format!("reading {}", first.display()))?;
            if w != h {
                bail!("{} is {w}x{h}; canonical views are square", first.display());
            }
            w
        }
    };
    let scene = Scene::new(&mesh, &view_config(size))?;
    let masks = load_external_masks(&args.masks, &scene.views)?;
    let cfg = LiftConfig {
        samples_per_face: args.samples,
        seed: args.seed,
        tol: args.tol,
        ..LiftConfig::default()
    };
    let labels = lift_masks(&scene.mesh, &scene.views, &scene.buffers, &masks, &cfg)?;
    write(&args.out, labeling_to_json(&labels))
}

pub fn postprocess_cmd(args: &PostprocessArgs) -> Result<()> {
    let (mesh, _) = load_mesh(&args.mesh)?;
    let (kind, labels) = read_labels(&args.labels)?;
    if kind != ElementKind::Face {
        bail!("post-processing needs a face labeling");
    }
    let labeling = face_labels(&mesh, labels)?;
    let adjacency = mvpart::mesh::FaceAdjacency::edge(&mesh);
    let out = postprocess(&labeling, &mesh, &adjacency, &args.post.config())?;
    write(&args.out, labeling_to_json(&out))
}

#[derive(Debug, Serialize)]
pub struct ObjectScore {
    pub name: String,
    pub category: String,
    pub miou: f64,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub weighting: &'static str,
    pub per_object: Vec<ObjectScore>,
    pub per_group: BTreeMap<String, f64>,
    pub overall: f64,
}

#[derive(serde::Deserialize)]
struct CategoryField {
    category: Option<String>,
}

/// `category` from the file if present, else the name up to the first `_`.
fn category_of(name: &str, text: &str) -> String {
    serde_json::from_str::<CategoryField>(text)
        .ok()
        .and_then(|c| c.category)
        .unwrap_or_else(|| name.split('_').next().unwrap_or(name).to_string())
}

fn find_mesh(dir: &Path, stem: &str) -> Result<TriMesh> {
    for ext in ["obj", "ply"] {
        let p = dir.join(format!("{stem}.{ext}"));
        if p.is_file() {
            return Ok(load_mesh(&p)?.0);
        }
    }
    bail!("no mesh named {stem}.obj or {stem}.ply in {}", dir.display())
}

pub fn eval(args: &EvalArgs) -> Result<EvalReport> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(&args.gt)
        .with_context(|| format!("reading {}", args.gt.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no ground-truth label files in {}", args.gt.display());
    }
    let mut per_object = Vec::new();
    for gt_path in names {
        let file = gt_path.file_name().expect("listed file").to_owned();
        let stem = gt_path.file_stem().expect("listed file").to_string_lossy().into_owned();
        let text = std::fs::read_to_string(&gt_path)?;
        let (gt_kind, gt_labels) = labeling_from_json(&text).with_context(|| format!("parsing {}", gt_path.display()))?;
        let (pred_kind, pred_labels) = read_labels(&args.pred.join(&file))?;
        let (gt, pred) = match (&args.meshes, gt_kind) {
            (Some(dir), ElementKind::Face) => {
                let mesh = find_mesh(dir, &stem)?;
                (face_labels(&mesh, gt_labels)?, face_labels(&mesh, pred_labels)?)
            }
            _ => (PartLabeling::for_points(gt_labels), PartLabeling::for_points(pred_labels)),
        };
        let (gt, pred) = (
            PartLabeling { element_kind: gt_kind, ..gt },
            PartLabeling { element_kind: pred_kind, ..pred },
        );
        let miou = class_agnostic_miou(&pred, &gt).with_context(|| format!("scoring {stem}"))?;
        per_object.push(ObjectScore {
            category: category_of(&stem, &text),
            name: stem,
            miou,
        });
    }
    let scores: Vec<(String, f64)> = per_object.iter().map(|o| (o.category.clone(), o.miou)).collect();
    let (per_group, overall) = match args.grouping.as_deref() {
        Some(g) => {
            let grouping = if g == "partnete" {
                Grouping::partnete()
            } else {
                Grouping::from_json(&std::fs::read_to_string(g).with_context(|| format!("reading {g}"))?)?
            };
            let s = aggregate_by_category(&scores, &grouping)?;
            (s.per_group, s.overall)
        }
        None => (BTreeMap::new(), scores.iter().map(|s| s.1).sum::<f64>() / scores.len() as f64),
    };
    let report = EvalReport {
        weighting: if args.meshes.is_some() { "area" } else { "uniform" },
        per_object,
        per_group,
        overall,
    };
    write(&args.report, serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    let (mesh, part_ids) = load_mesh(&args.mesh)?;
    let scene = Scene::new(&mesh, &view_config(args.view.image_size))?;
    let text = std::fs::read_to_string(&args.prompts).with_context(|| format!("reading {}", args.prompts.display()))?;
    let prompts: Vec<Prompt> = serde_json::from_str(&text).context("parsing prompts")?;
    let provider: Box<dyn MaskProvider> = match args.provider {
        ProviderKind::Oracle => {
            let gt = match &args.gt {
                Some(p) => read_labels(p)?.1,
                None => part_ids.context("the oracle provider needs --gt or a PLY with part_id")?,
            };
            Box::new(OracleProvider { gt })
        }
        ProviderKind::RegionGrow => Box::new(RegionGrowProvider {
            angle_thresh_deg: args.angle,
        }),
        ProviderKind::External => Box::new(ExternalProvider {
            dir: args.mask_dir.clone().context("the external provider needs --mask-dir")?,
        }),
    };
    let cfg = PipelineConfig {
        lift: LiftConfig {
            samples_per_face: args.samples,
            seed: args.seed,
            tol: args.tol,
            ..LiftConfig::default()
        },
        post: args.post.config(),
        auto_complete: args.auto_complete.then(|| AutoCompleteConfig {
            angle_thresh_deg: args.angle,
            ..AutoCompleteConfig::default()
        }),
    };
    let seg = segment_prompts(&scene, &prompts, provider.as_ref(), &cfg)?;
    write(&args.out, labeling_to_json(&seg.labeling))
}

pub fn toy_report(args: &ToyReportArgs) -> Result<bool> {
    let report = mvpart::toy::invariant_report(args.seed)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(p) => write(p, text)?,
        None => println!("{text}"),
    }
    Ok(report.passed)
}

pub fn service_config(args: &ServeArgs) -> ServiceConfig {
    let mut cfg = ServiceConfig {
        views: view_config(args.image_size),
        default_provider: args.provider,
        angle_thresh_deg: args.angle,
        max_upload_bytes: args.max_upload_mb << 20,
        max_faces: args.max_faces,
        data_dir: args.data_dir.clone(),
        ..ServiceConfig::default()
    };
    cfg.pipeline.post.fill = args.fill;
    cfg
}

pub async fn serve(args: &ServeArgs) -> Result<()> {
    let state = Arc::new(AppState::load(service_config(args))?);
    let addr = format!("{}:{}", args.host, args.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state)).await?;
    Ok(())
}

/// Runs one parsed command; `Ok(false)` means it ran but reported failure.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Render(a) => render(&a)?,
        Command::Lift(a) => lift(&a)?,
        Command::Postprocess(a) => postprocess_cmd(&a)?,
        Command::Eval(a) => {
            let r = eval(&a)?;
            println!("overall mIoU {:.4} over {} objects", r.overall, r.per_object.len());
        }
        Command::Segment(a) => segment(&a)?,
        Command::ToyReport(a) => return toy_report(&a),
        Command::Serve(a) => {
            tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(&a))?;
        }
    }
    Ok(true)
}
