use crate::mesh::{normalize_mesh, FaceAdjacency, MeshError, TriMesh};
use crate::render::{canonical_views, render_views, RenderBuffers, RenderError, ViewConfig, ViewSet};

/// A normalized mesh together with its canonical views and their renders.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TriMesh,
    pub views: ViewSet,
    pub buffers: Vec<RenderBuffers>,
    pub adjacency: FaceAdjacency,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl Scene {
    /// Normalizes `mesh` and renders all canonical views.
    pub fn new(mesh: &TriMesh, config: &ViewConfig) -> Result<Self, SceneError> {
        let mesh = normalize_mesh(mesh)?;
        Self::from_normalized(mesh, config)
    }

    /// Uses `mesh` as given; it must already lie in the canonical cube.
    pub fn from_normalized(mesh: TriMesh, config: &ViewConfig) -> Result<Self, SceneError> {
        let views = canonical_views(config)?;
        let buffers = render_views(&mesh, &views);
        let adjacency = FaceAdjacency::edge(&mesh);
        Ok(Self {
            mesh,
            views,
            buffers,
            adjacency,
        })
    }

    pub fn width(&self) -> u32 {
        self.views.width()
    }

    pub fn height(&self) -> u32 {
        self.views.height()
    }
}
