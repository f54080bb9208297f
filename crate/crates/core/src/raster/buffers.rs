use crate::Vec3;

/// Sentinel stored in [`RenderBuffers::face_id`] for background pixels.
pub const NO_FACE: u32 = u32::MAX;

/// Per-pixel camera-space unit normals. An all-zero entry is invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f32; 3]>,
}

impl NormalMap {
    pub fn invalid(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 3]; width as usize * height as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.data[i] != [0.0; 3]
    }

    pub fn at(&self, i: usize) -> Option<Vec3> {
        let [x, y, z] = self.data[i];
        self.is_valid(i)
            .then(|| Vec3::new(x as f64, y as f64, z as f64))
    }

    pub fn set(&mut self, i: usize, n: &Vec3) {
        self.data[i] = [n.x as f32, n.y as f32, n.z as f32];
    }
}

/// Per-pixel viewing depth in world units; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn invalid(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.data[i] > 0.0 && self.data[i].is_finite()
    }

    pub fn at(&self, i: usize) -> Option<f64> {
        self.is_valid(i).then(|| self.data[i] as f64)
    }
}

/// Geometric companions of one rendered view.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    pub width: u32,
    pub height: u32,
    pub normals: NormalMap,
    pub depth: DepthMap,
    pub face_id: Vec<u32>,
}

impl RenderBuffers {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            normals: NormalMap::invalid(width, height),
            depth: DepthMap::invalid(width, height),
            face_id: vec![NO_FACE; width as usize * height as usize],
        }
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn is_opaque(&self, i: usize) -> bool {
        self.face_id[i] != NO_FACE
    }

    pub fn opacity(&self) -> Vec<bool> {
        self.face_id.iter().map(|&f| f != NO_FACE).collect()
    }

    pub fn covered_pixels(&self) -> usize {
        self.face_id.iter().filter(|&&f| f != NO_FACE).count()
    }
}
