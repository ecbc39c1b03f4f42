//! File schemas and writers.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! every value re-reads bit-exactly.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::estimation::{CameraId, CameraMap, Detection, FitReport, ObjectId};
use crate::geometry::{Camera, EllipsoidParams, Intrinsics};
use crate::simulation::Scene;

use super::CliError;

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub id: ObjectId,
    pub theta: [f64; 3],
    pub t: [f64; 3],
    pub s: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub id: CameraId,
    #[serde(rename = "K")]
    pub k: [[f64; 3]; 3],
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub objects: Vec<ObjectRecord>,
    pub cameras: Vec<CameraRecord>,
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn matrix(r: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| r[i][j])
}

impl From<&Scene> for SceneFile {
    fn from(scene: &Scene) -> Self {
        Self {
            objects: scene
                .objects
                .iter()
                .map(|(&id, q)| ObjectRecord { id, theta: q.theta(), t: q.t(), s: q.s() })
                .collect(),
            cameras: scene
                .cameras
                .iter()
                .map(|(&id, c)| CameraRecord { id, k: rows(&c.k()), r: rows(c.rotation()), t: (*c.translation()).into() })
                .collect(),
        }
    }
}

impl TryFrom<SceneFile> for Scene {
    type Error = CliError;

    fn try_from(file: SceneFile) -> Result<Self, CliError> {
        let invalid = |what: String| CliError::InvalidInput(what);
        let mut objects = BTreeMap::new();
        for o in file.objects {
            let q = EllipsoidParams::new(o.theta, o.t, o.s).map_err(|e| invalid(format!("object {}: {e}", o.id)))?;
            if objects.insert(o.id, q).is_some() {
                return Err(invalid(format!("duplicate object id {}", o.id)));
            }
        }
        let mut cameras = CameraMap::new();
        for c in file.cameras {
            let k = c.k;
            if k[0][1] != 0.0 || k[1][0] != 0.0 || k[2] != [0.0, 0.0, 1.0] {
                return Err(invalid(format!("camera {}: K must be a zero-skew pinhole matrix", c.id)));
            }
            let intr = Intrinsics { fx: k[0][0], fy: k[1][1], cx: k[0][2], cy: k[1][2] };
            let cam = Camera::new(intr, matrix(&c.r), Vector3::from(c.t))
                .map_err(|e| invalid(format!("camera {}: {e}", c.id)))?;
            if cameras.insert(c.id, cam).is_some() {
                return Err(invalid(format!("duplicate camera id {}", c.id)));
            }
        }
        Ok(Scene { objects, cameras })
    }
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub object_id: ObjectId,
    pub q: EllipsoidParams,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ResultRecord {
    pub fn from_report(object_id: ObjectId, r: &FitReport) -> Self {
        Self { object_id, q: r.q_hat, cost: r.final_cost, iterations: r.iterations, converged: r.converged }
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
struct PreciseFormatter(PrettyFormatter<'static>);

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Io { path: path.to_path_buf(), message: e.to_string() };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, &to_json_bytes(value)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

pub fn read_scene(path: &Path) -> Result<Scene, CliError> {
    read_json::<SceneFile>(path)?.try_into()
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<(), CliError> {
    write_json(path, &SceneFile::from(scene))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>, CliError> {
    read_json(path)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, CliError> {
    read_json(path)
}
