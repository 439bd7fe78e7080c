//! Triangle meshes: a plain-text loader, procedural builtins, and
//! area-weighted surface sampling.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SceneError;
use crate::loss::ModelPoints;

/// An indexed triangle mesh with vertices in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, SceneError> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), SceneError> {
        if self.triangles.is_empty() {
            return Err(SceneError::DegenerateMesh("mesh has no triangles"));
        }
        for tri in &self.triangles {
            for &i in tri {
                if i >= self.vertices.len() {
                    return Err(SceneError::DegenerateMesh("triangle index out of range"));
                }
            }
        }
        if !(self.total_area() > 0.0) {
            return Err(SceneError::DegenerateMesh(
                "mesh has zero total surface area",
            ));
        }
        Ok(())
    }

    pub fn triangle_area(&self, tri: &[usize; 3]) -> f64 {
        let a = self.vertices[tri[0]];
        let b = self.vertices[tri[1]];
        let c = self.vertices[tri[2]];
        (b - a).cross(&(c - a)).norm() / 2.0
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    /// Multiply every vertex coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| factor * v).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Axis-aligned box centered at the origin with the given full extents.
    pub fn box_mesh(ex: f64, ey: f64, ez: f64) -> Self {
        let (hx, hy, hz) = (ex / 2.0, ey / 2.0, ez / 2.0);
        let vertices = vec![
            Vector3::new(-hx, -hy, -hz),
            Vector3::new(hx, -hy, -hz),
            Vector3::new(hx, hy, -hz),
            Vector3::new(-hx, hy, -hz),
            Vector3::new(-hx, -hy, hz),
            Vector3::new(hx, -hy, hz),
            Vector3::new(hx, hy, hz),
            Vector3::new(-hx, hy, hz),
        ];
        // Two triangles per face, outward winding.
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Self {
            vertices,
            triangles,
        }
    }

    /// Cube with 1 m edges centered at the origin.
    pub fn unit_cube() -> Self {
        Self::box_mesh(1.0, 1.0, 1.0)
    }

    /// Sphere approximation: an icosahedron subdivided `subdivisions` times,
    /// vertices normalized onto the sphere of the given radius.
    pub fn icosphere(radius: f64, subdivisions: u32) -> Self {
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vector3<f64>> = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| radius * Vector3::new(x, y, z).normalize())
        .collect();

        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];

        for _ in 0..subdivisions {
            let mut midpoints: std::collections::HashMap<(usize, usize), usize> =
                std::collections::HashMap::new();
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = ((vertices[a] + vertices[b]) / 2.0).normalize() * radius;
                    vertices.push(m);
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for [a, b, c] in triangles {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.push([a, ab, ca]);
                next.push([b, bc, ab]);
                next.push([c, ca, bc]);
                next.push([ab, bc, ca]);
            }
            triangles = next;
        }

        Self {
            vertices,
            triangles,
        }
    }
}

/// Load a mesh from the plain-text format: `v x y z` vertex lines and
/// `f i j k` face lines with 1-based indices; faces must be triangles.
/// Lines starting with any other token (comments, normals, groups) are
/// ignored.
pub fn load_mesh(path: &Path) -> Result<TriMesh, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_mesh(&text)
}

/// Parse mesh text; see [`load_mesh`] for the format.
pub fn parse_mesh(text: &str) -> Result<TriMesh, SceneError> {
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> =
                    tokens
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| SceneError::MeshParse {
                            line: line_no,
                            reason: "vertex coordinates must be numbers".into(),
                        })?;
                if coords.len() != 3 {
                    return Err(SceneError::MeshParse {
                        line: line_no,
                        reason: format!("vertex line has {} coordinates, expected 3", coords.len()),
                    });
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let indices: Vec<usize> = tokens
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| SceneError::MeshParse {
                        line: line_no,
                        reason: "face indices must be plain 1-based integers".into(),
                    })?;
                if indices.len() != 3 {
                    return Err(SceneError::MeshParse {
                        line: line_no,
                        reason: format!(
                            "face has {} vertices, only triangles are supported",
                            indices.len()
                        ),
                    });
                }
                let mut tri = [0usize; 3];
                for (slot, &i) in tri.iter_mut().zip(indices.iter()) {
                    if i == 0 || i > vertices.len() {
                        return Err(SceneError::MeshParse {
                            line: line_no,
                            reason: format!("face index {i} out of range (1..={})", vertices.len()),
                        });
                    }
                    *slot = i - 1;
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }

    TriMesh::new(vertices, triangles)
}

/// Draw `n` points uniformly over the mesh surface: a triangle is chosen
/// with probability proportional to its area, then a point is placed at
/// uniform barycentric coordinates. Deterministic for a given seed.
pub fn sample_mesh_points(mesh: &TriMesh, n: usize, seed: u64) -> Result<ModelPoints, SceneError> {
    if n == 0 {
        return Err(SceneError::InvalidConfig(
            "point count must be at least 1".into(),
        ));
    }
    mesh.validate()?;

    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for tri in &mesh.triangles {
        total += mesh.triangle_area(tri);
        cumulative.push(total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen_range(0.0..total);
        let t = cumulative.partition_point(|&c| c <= r);
        let tri = &mesh.triangles[t.min(mesh.triangles.len() - 1)];
        let a = mesh.vertices[tri[0]];
        let b = mesh.vertices[tri[1]];
        let c = mesh.vertices[tri[2]];
        let mut u: f64 = rng.gen();
        let mut v: f64 = rng.gen();
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        points.push(a + u * (b - a) + v * (c - a));
    }
    ModelPoints::new(points).map_err(|_| SceneError::DegenerateMesh("sampled point set invalid"))
}
