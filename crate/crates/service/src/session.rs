//! Event-sourced segmentation sessions.
//!
//! A session stores the uploaded mesh, optional ground truth and the ordered
//! prompt history. Masks and labels are always the fold of that history.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mvpart::mesh::{
    labeling_to_json, parse_obj, parse_ply, write_labeled_ply, MeshError, MeshFormat, PartLabeling, TriMesh,
};
use mvpart::pipeline::{lift_and_clean, part_face_counts, PipelineConfig, PipelineError};
use mvpart::render::{encode_normal_map, ViewConfig};
use mvpart::scene::Scene;
use mvpart::segment::{
    auto_complete_opposite_view, ExternalProvider, MaskProvider, MaskSet, OracleProvider, Prompt, RegionGrowProvider,
    SegmentError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::palette;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Oracle,
    RegionGrow,
    External,
}

/// One entry of the prompt history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEvent {
    pub prompt: Prompt,
    pub provider: ProviderKind,
    pub angle_thresh_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("could not parse mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("mesh has {faces} faces, limit is {limit}")]
    TooLarge { faces: usize, limit: usize },
    #[error("{0}")]
    Prompt(SegmentError),
    #[error("the oracle provider needs ground-truth labels; POST them to /sessions/{{id}}/gt first")]
    NoGroundTruth,
    #[error("external provider needs mask_dir")]
    NoMaskDir,
    #[error("nothing to undo")]
    EmptyHistory,
    #[error("invalid ground truth: {0}")]
    GroundTruth(String),
    #[error("view {0} does not exist")]
    NoSuchView(usize),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<PipelineError> for SessionError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Segment(s) => Self::Prompt(s),
            other => Self::Pipeline(other),
        }
    }
}

impl From<SegmentError> for SessionError {
    fn from(e: SegmentError) -> Self {
        Self::Prompt(e)
    }
}

/// Parses an upload, sniffing PLY by its magic line when no format is given.
pub fn parse_mesh_bytes(bytes: &[u8], format: Option<MeshFormat>) -> Result<(TriMesh, Option<Vec<i32>>), MeshError> {
    let format = format.unwrap_or(if bytes.starts_with(b"ply") { MeshFormat::Ply } else { MeshFormat::Obj });
    match format {
        MeshFormat::Ply => parse_ply(bytes),
        MeshFormat::Obj => Ok((parse_obj(&String::from_utf8_lossy(bytes))?, None)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartSummary {
    pub id: i32,
    pub face_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub face_count: usize,
    pub prompt_count: usize,
    pub part_count: usize,
    pub parts: Vec<PartSummary>,
    pub unlabeled_faces: usize,
    pub has_ground_truth: bool,
    pub overlays: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViewInfo {
    pub index: usize,
    pub azimuth: f64,
    pub elevation: f64,
    pub width: u32,
    pub height: u32,
    pub image_url: String,
    pub overlay_url: String,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub scene: Scene,
    pub gt: Option<Vec<i32>>,
    pub history: Vec<PromptEvent>,
    pub masks: MaskSet,
    pub labeling: PartLabeling,
    pipeline: PipelineConfig,
}

impl Session {
    pub fn new(id: String, mesh: &TriMesh, views: &ViewConfig, pipeline: PipelineConfig) -> Result<Self, SessionError> {
        let scene = Scene::new(mesh, views).map_err(|e| SessionError::Pipeline(e.into()))?;
        let masks = MaskSet::empty(scene.width(), scene.height(), scene.views.len());
        let labeling = PartLabeling::unlabeled_faces(&scene.mesh);
        Ok(Self {
            id,
            scene,
            gt: None,
            history: Vec::new(),
            masks,
            labeling,
            pipeline,
        })
    }

    pub fn set_ground_truth(&mut self, labels: Vec<i32>) -> Result<(), SessionError> {
        if labels.len() != self.scene.mesh.face_count() {
            return Err(SessionError::GroundTruth(format!(
                "{} labels for {} faces",
                labels.len(),
                self.scene.mesh.face_count()
            )));
        }
        if let Some(face) = labels.iter().position(|&l| l < 0) {
            return Err(SessionError::GroundTruth(format!("face {face} is unlabeled")));
        }
        self.gt = Some(labels);
        Ok(())
    }

    fn provider(&self, event: &PromptEvent) -> Result<Box<dyn MaskProvider>, SessionError> {
        Ok(match event.provider {
            ProviderKind::Oracle => Box::new(OracleProvider {
                gt: self.gt.clone().ok_or(SessionError::NoGroundTruth)?,
            }),
            ProviderKind::RegionGrow => Box::new(RegionGrowProvider {
                angle_thresh_deg: event.angle_thresh_deg,
            }),
            ProviderKind::External => Box::new(ExternalProvider {
                dir: event.mask_dir.clone().ok_or(SessionError::NoMaskDir)?,
            }),
        })
    }

    /// `masks` with one more prompt folded in.
    fn step(&self, masks: &MaskSet, event: &PromptEvent) -> Result<MaskSet, SessionError> {
        let scene = &self.scene;
        event.prompt.validate(scene.width(), scene.height(), scene.views.len())?;
        let provider = self.provider(event)?;
        let mut next = masks.clone();
        next.overlay(&provider.masks(scene, &event.prompt)?);
        if let Some(cfg) = &self.pipeline.auto_complete {
            next = auto_complete_opposite_view(
                &next,
                event.prompt.view_index,
                &scene.mesh,
                &scene.views,
                &scene.buffers,
                &scene.adjacency,
                cfg,
            )?;
        }
        Ok(next)
    }

    fn relabel(&self, masks: MaskSet) -> Result<(MaskSet, PartLabeling), SessionError> {
        if masks.segment_ids().is_empty() {
            return Ok((masks, PartLabeling::unlabeled_faces(&self.scene.mesh)));
        }
        let seg = lift_and_clean(&self.scene, masks, &self.pipeline)?;
        Ok((seg.masks, seg.labeling))
    }

    /// Appends `event`; on error the session is unchanged.
    pub fn apply(&mut self, event: PromptEvent) -> Result<(), SessionError> {
        let masks = self.step(&self.masks, &event)?;
        let (masks, labeling) = self.relabel(masks)?;
        self.masks = masks;
        self.labeling = labeling;
        self.history.push(event);
        Ok(())
    }

    /// Masks and labels obtained by folding `history` from scratch.
    pub fn replay(&self, history: &[PromptEvent]) -> Result<(MaskSet, PartLabeling), SessionError> {
        let s = &self.scene;
        let mut masks = MaskSet::empty(s.width(), s.height(), s.views.len());
        for event in history {
            masks = self.step(&masks, event)?;
        }
        self.relabel(masks)
    }

    pub fn undo(&mut self) -> Result<(), SessionError> {
        if self.history.is_empty() {
            return Err(SessionError::EmptyHistory);
        }
        let (masks, labeling) = self.replay(&self.history[..self.history.len() - 1])?;
        self.history.pop();
        self.masks = masks;
        self.labeling = labeling;
        Ok(())
    }

    /// Replaces the whole history, e.g. when restoring from disk.
    pub fn restore_history(&mut self, history: Vec<PromptEvent>) -> Result<(), SessionError> {
        let (masks, labeling) = self.replay(&history)?;
        self.history = history;
        self.masks = masks;
        self.labeling = labeling;
        Ok(())
    }

    pub fn view_count(&self) -> usize {
        self.scene.views.len()
    }

    fn check_view(&self, view: usize) -> Result<(), SessionError> {
        if view < self.view_count() {
            Ok(())
        } else {
            Err(SessionError::NoSuchView(view))
        }
    }

    pub fn views(&self) -> Vec<ViewInfo> {
        self.scene
            .views
            .views
            .iter()
            .map(|v| ViewInfo {
                index: v.index,
                azimuth: v.azimuth_deg,
                elevation: v.elevation_deg,
                width: self.scene.width(),
                height: self.scene.height(),
                image_url: format!("/sessions/{}/views/{}/normal.png", self.id, v.index),
                overlay_url: format!("/sessions/{}/views/{}/overlay.png", self.id, v.index),
            })
            .collect()
    }

    pub fn summary(&self) -> SessionSummary {
        let parts: Vec<PartSummary> = part_face_counts(&self.labeling)
            .into_iter()
            .map(|(id, face_count)| PartSummary { id, face_count })
            .collect();
        SessionSummary {
            session_id: self.id.clone(),
            face_count: self.scene.mesh.face_count(),
            prompt_count: self.history.len(),
            part_count: parts.len(),
            parts,
            unlabeled_faces: self.labeling.unlabeled_count(),
            has_ground_truth: self.gt.is_some(),
            overlays: (0..self.view_count())
                .map(|k| format!("/sessions/{}/views/{k}/overlay.png", self.id))
                .collect(),
        }
    }

    pub fn normal_png(&self, view: usize) -> Result<Vec<u8>, SessionError> {
        self.check_view(view)?;
        let (rgb, _) = encode_normal_map(&self.scene.buffers[view]);
        Ok(palette::encode_png(&rgb))
    }

    pub fn overlay_png(&self, view: usize) -> Result<Vec<u8>, SessionError> {
        self.check_view(view)?;
        Ok(palette::encode_png(&palette::render_labels(&self.scene.buffers[view], &self.labeling.labels)))
    }

    pub fn labels_json(&self) -> String {
        labeling_to_json(&self.labeling)
    }

    pub fn labels_ply(&self) -> Vec<u8> {
        write_labeled_ply(&self.scene.mesh, &self.labeling.labels).expect("labels match the mesh")
    }

    /// Colors used by the current labeling, keyed by part id.
    pub fn palette(&self) -> BTreeMap<i32, [u8; 3]> {
        let mut out: BTreeMap<i32, [u8; 3]> = self.labeling.part_ids().into_iter().map(|id| (id, palette::part_color(id))).collect();
        out.insert(-1, palette::UNLABELED);
        out
    }
}

/// On-disk layout of a persisted session.
pub struct SessionDir {
    pub root: PathBuf,
}

impl SessionDir {
    pub fn new(data_dir: &Path, id: &str) -> Self {
        Self { root: data_dir.join(id) }
    }

    pub fn mesh_path(&self) -> PathBuf {
        self.root.join("mesh.obj")
    }

    pub fn gt_path(&self) -> PathBuf {
        self.root.join("gt.json")
    }

    pub fn prompts_path(&self) -> PathBuf {
        self.root.join("prompts.json")
    }

    /// Writes the mesh as uploaded (before normalization).
    pub fn write_mesh(&self, mesh: &TriMesh) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.root)?;
        std::fs::write(self.mesh_path(), mvpart::mesh::write_obj(mesh))
    }

    pub fn write_state(&self, session: &Session) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.root)?;
        std::fs::write(self.prompts_path(), serde_json::to_vec_pretty(&session.history).expect("history serializes"))?;
        if let Some(gt) = &session.gt {
            std::fs::write(self.gt_path(), serde_json::to_vec(gt).expect("labels serialize"))?;
        }
        Ok(())
    }
}
