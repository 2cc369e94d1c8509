use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::mesh::Vec3;

/// Elevations of the canonical views, in degrees.
pub const CANONICAL_ELEVATIONS: [f64; 3] = [25.0, 0.0, -25.0];
pub const VIEW_COUNT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// World-to-camera rotation, row-major.
    #[serde(with = "mat3_rows")]
    pub rotation: Matrix3<f64>,
    #[serde(with = "vec3_array")]
    pub translation: Vec3,
    pub intrinsics: Intrinsics,
    pub width: u32,
    pub height: u32,
}

impl CameraPose {
    /// Camera looking from `eye` at `target` with the given world up vector.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, intrinsics: Intrinsics, width: u32, height: u32) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self {
            rotation,
            translation,
            intrinsics,
            width,
            height,
        }
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationLayout {
    /// View `k` uses elevation `[25, 0, -25][k % 3]`.
    #[default]
    Cycle,
    /// Views 0-3 at 25 degrees, 4-7 at 0, 8-11 at -25.
    Grid4x3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub image_size: u32,
    pub fov_deg: f64,
    pub distance: f64,
    pub layout: ElevationLayout,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            image_size: 512,
            fov_deg: 40.0,
            distance: 2.75,
            layout: ElevationLayout::Cycle,
        }
    }
}

impl ViewConfig {
    pub fn with_image_size(mut self, size: u32) -> Self {
        self.image_size = size;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub index: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub pose: CameraPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSet {
    pub config: ViewConfig,
    pub views: Vec<View>,
}

impl ViewSet {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.config.image_size
    }

    pub fn height(&self) -> u32 {
        self.config.image_size
    }

    pub fn pose(&self, view: usize) -> &CameraPose {
        &self.views[view].pose
    }

    /// The view whose azimuth differs from `view` by 180 degrees.
    pub fn opposite(&self, view: usize) -> usize {
        (view + self.len() / 2) % self.len()
    }
}

/// Twelve cameras at azimuth `k * 30` degrees (counterclockwise seen from +y),
/// all looking at the origin from `distance`.
///
/// Azimuth 0 places the camera on +z; azimuth 90 on +x. Every corner of the
/// canonical cube `[-0.5, 0.5]^3` must project inside every image.
pub fn canonical_views(config: &ViewConfig) -> Result<ViewSet, RenderError> {
    if !(config.fov_deg > 10.0 && config.fov_deg < 120.0) {
        return Err(RenderError::InvalidConfig(format!(
            "fov {} outside (10, 120) degrees",
            config.fov_deg
        )));
    }
    if config.image_size == 0 {
        return Err(RenderError::InvalidConfig("image size must be positive".into()));
    }
    if config.distance.is_nan() || config.distance <= 0.0 {
        return Err(RenderError::InvalidConfig("distance must be positive".into()));
    }
    let size = config.image_size;
    let half = size as f64 / 2.0;
    let focal = half / (config.fov_deg.to_radians() / 2.0).tan();
    let intrinsics = Intrinsics {
        fx: focal,
        fy: focal,
        cx: half,
        cy: half,
    };
    let mut views = Vec::with_capacity(VIEW_COUNT);
    for k in 0..VIEW_COUNT {
        let azimuth_deg = 30.0 * k as f64;
        let elevation_deg = match config.layout {
            ElevationLayout::Cycle => CANONICAL_ELEVATIONS[k % 3],
            ElevationLayout::Grid4x3 => CANONICAL_ELEVATIONS[k / 4],
        };
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let eye = config.distance * Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos());
        let pose = CameraPose::look_at(eye, Vec3::zeros(), Vec3::y(), intrinsics, size, size);
        check_cube_visible(&pose, k)?;
        views.push(View {
            index: k,
            azimuth_deg,
            elevation_deg,
            pose,
        });
    }
    Ok(ViewSet {
        config: *config,
        views,
    })
}

fn check_cube_visible(pose: &CameraPose, view: usize) -> Result<(), RenderError> {
    for corner in 0..8 {
        let p = Vec3::new(
            if corner & 1 == 0 { -0.5 } else { 0.5 },
            if corner & 2 == 0 { -0.5 } else { 0.5 },
            if corner & 4 == 0 { -0.5 } else { 0.5 },
        );
        let visible = super::project_point(&p, pose).is_some_and(|pr| {
            pr.u >= 0.0 && pr.v >= 0.0 && pr.u <= pose.width as f64 && pr.v <= pose.height as f64
        });
        if !visible {
            return Err(RenderError::FrustumClip { view });
        }
    }
    Ok(())
}

mod mat3_rows {
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(Matrix3::from_fn(|r, c| rows[r][c]))
    }
}

mod vec3_array {
    use crate::mesh::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}
