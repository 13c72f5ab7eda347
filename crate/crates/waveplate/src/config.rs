//! Flat `key = value` run configuration.
//!
//! The grammar is one assignment per line with `#` comments. Unknown keys
//! are rejected so typos surface immediately; every key can also be
//! overridden from the command line.

use crate::error::{Error, Result};
use crate::mesh::{self, Point2, TriMesh};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Rect { n: usize },
    Lens { alpha1_deg: f64, alpha2_deg: f64, n: usize },
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshSource,
    /// Extra uniform refinements applied after generation/loading.
    pub refine: usize,
    /// Multiplier point x₀.
    pub x0: Point2,
    pub mu: f64,
    /// None picks min(1e-2, h/4) once the mesh is known.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub stride: usize,
    pub seed: u64,
    /// Number of (I - A)⁻¹ smoothing passes applied to the random data.
    pub smooth: usize,
    pub eigs_count: usize,
    pub sweep_points: usize,
    pub omega0_deg: Option<f64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshSource::Rect { n: 8 },
            refine: 0,
            x0: Point2::new(0.0, 0.5),
            mu: 0.3,
            dt: None,
            t_final: 10.0,
            stride: 10,
            seed: 1,
            smooth: 1,
            eigs_count: 24,
            sweep_points: 16,
            omega0_deg: None,
            output_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| {
            Error::invalid_argument(format!("config key `{key}`: invalid {what} `{value}`"))
        };
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| bad("number"));
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| bad("integer"));
        match key {
            "mesh" => {
                self.mesh = match value {
                    "rect" => MeshSource::Rect { n: self.mesh_n() },
                    "lens" => MeshSource::Lens {
                        alpha1_deg: 90.0,
                        alpha2_deg: 60.0,
                        n: self.mesh_n(),
                    },
                    other => MeshSource::File(PathBuf::from(other)),
                };
            }
            "mesh.n" => {
                let n = parse_usize(value)?;
                match &mut self.mesh {
                    MeshSource::Rect { n: slot } => *slot = n,
                    MeshSource::Lens { n: slot, .. } => *slot = n,
                    MeshSource::File(_) => {
                        return Err(Error::invalid_argument(
                            "mesh.n does not apply to a mesh file",
                        ))
                    }
                }
            }
            "mesh.alpha1_deg" => {
                if let MeshSource::Lens { alpha1_deg, .. } = &mut self.mesh {
                    *alpha1_deg = parse_f64(value)?;
                } else {
                    return Err(Error::invalid_argument("mesh.alpha1_deg needs mesh = lens"));
                }
            }
            "mesh.alpha2_deg" => {
                if let MeshSource::Lens { alpha2_deg, .. } = &mut self.mesh {
                    *alpha2_deg = parse_f64(value)?;
                } else {
                    return Err(Error::invalid_argument("mesh.alpha2_deg needs mesh = lens"));
                }
            }
            "mesh.refine" => self.refine = parse_usize(value)?,
            "x0.x" => self.x0.x = parse_f64(value)?,
            "x0.y" => self.x0.y = parse_f64(value)?,
            "mu" => self.mu = parse_f64(value)?,
            "dt" => self.dt = Some(parse_f64(value)?),
            "T" => self.t_final = parse_f64(value)?,
            "stride" => self.stride = parse_usize(value)?,
            "seed" => self.seed = value.parse::<u64>().map_err(|_| bad("integer"))?,
            "smooth" => {
                self.smooth = match value {
                    "on" | "true" => 1,
                    "off" | "false" => 0,
                    other => other.parse::<usize>().map_err(|_| bad("integer or on/off"))?,
                }
            }
            "eigs.count" => self.eigs_count = parse_usize(value)?,
            "sweep.points" => self.sweep_points = parse_usize(value)?,
            "omega0_deg" => self.omega0_deg = Some(parse_f64(value)?),
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => {
                return Err(Error::invalid_argument(format!("unknown config key `{other}`")))
            }
        }
        Ok(())
    }

    fn mesh_n(&self) -> usize {
        match &self.mesh {
            MeshSource::Rect { n } => *n,
            MeshSource::Lens { n, .. } => *n,
            MeshSource::File(_) => 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(Error::invalid_argument(format!(
                "mu must lie in (0, 1/2), got {}",
                self.mu
            )));
        }
        if let Some(dt) = self.dt {
            if dt <= 0.0 {
                return Err(Error::invalid_argument("dt must be positive"));
            }
        }
        if self.t_final <= 0.0 {
            return Err(Error::invalid_argument("T must be positive"));
        }
        if self.stride == 0 {
            return Err(Error::invalid_argument("stride must be at least 1"));
        }
        if !self.x0.x.is_finite() || !self.x0.y.is_finite() {
            return Err(Error::invalid_argument("x0 must be finite"));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<TriMesh> {
        let mut m = match &self.mesh {
            MeshSource::Rect { n } => mesh::gen_rect_transmission(*n)?,
            MeshSource::Lens {
                alpha1_deg,
                alpha2_deg,
                n,
            } => mesh::gen_lens(alpha1_deg.to_radians(), alpha2_deg.to_radians(), *n)?,
            MeshSource::File(path) => mesh::load_mesh(path)?,
        };
        for _ in 0..self.refine {
            m = mesh::refine_uniform(&m)?;
        }
        Ok(m)
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            });
        };
        cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::invalid_argument(format!("cannot read config `{}`: {e}", path.display()))
    })?;
    parse_config(&text)
}
