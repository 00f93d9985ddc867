//! Voxel rasterization of a scene, for fast point queries and region counts.

use crate::geom::Vec3;

use super::scene::{MediumId, TissueScene};

/// Medium index per voxel, sampled at voxel centres.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    origin: Vec3,
    resolution_mm: f64,
    dims: [usize; 3],
    cells: Vec<MediumId>,
}

impl VoxelGrid {
    pub fn rasterize(scene: &TissueScene) -> Self {
        let res = scene.voxel_resolution_mm;
        let ext = scene.bounds.extent();
        let dims = [
            (ext.x / res).round().max(1.0) as usize,
            (ext.y / res).round().max(1.0) as usize,
            (ext.z / res).round().max(1.0) as usize,
        ];
        let origin = scene.bounds.min;
        let mut cells = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = origin
                        + Vec3::new(
                            (i as f64 + 0.5) * res,
                            (j as f64 + 0.5) * res,
                            (k as f64 + 0.5) * res,
                        );
                    let id = scene
                        .medium_index_at(p)
                        .expect("voxel centres lie inside the bounds");
                    cells.push(id);
                }
            }
        }
        VoxelGrid {
            origin,
            resolution_mm: res,
            dims,
            cells,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_count(&self) -> usize {
        self.cells.len()
    }

    pub fn medium_at(&self, p: Vec3) -> Option<MediumId> {
        let r = p - self.origin;
        let idx = |v: f64, n: usize| {
            let i = (v / self.resolution_mm).floor();
            if i < 0.0 || i as usize >= n {
                None
            } else {
                Some(i as usize)
            }
        };
        let (i, j, k) = (
            idx(r.x, self.dims[0])?,
            idx(r.y, self.dims[1])?,
            idx(r.z, self.dims[2])?,
        );
        Some(self.cells[(k * self.dims[1] + j) * self.dims[0] + i])
    }

    /// Linear indices of the voxels holding `medium`.
    pub fn voxels_of(&self, medium: MediumId) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, &m)| m == medium)
            .map(|(i, _)| i)
    }
}
