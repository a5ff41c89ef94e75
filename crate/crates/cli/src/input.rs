//! Loading normals from a point-cloud file.

use std::path::PathBuf;

use anyhow::{bail, Context};
use atlanta_core::io::{box_grid_downsample, estimate_normals, read_cloud, read_normals, CloudFormat};
use atlanta_core::UnitVec3;
use clap::Args;

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV (`nx,ny,nz` or `x,y,z,nx,ny,nz` rows) or PLY file.
    #[arg(long)]
    pub input: PathBuf,
    /// ply-ascii, ply-binary-le or csv; detected from the contents when omitted.
    #[arg(long)]
    pub format: Option<CloudFormat>,
    /// Voxel side for downsampling the points before use.
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Re-estimate normals from the K nearest points (after downsampling).
    #[arg(long, value_name = "K")]
    pub estimate_normals: Option<usize>,
}

pub fn load_normals(args: &InputArgs) -> anyhow::Result<Vec<UnitVec3>> {
    let path = &args.input;
    let format = match args.format {
        Some(f) => f,
        None => CloudFormat::detect(path).with_context(|| format!("cannot read {}", path.display()))?,
    };
    if let Some(step) = args.grid_step {
        if !(step > 0.0 && step.is_finite()) {
            bail!("--grid-step must be positive, got {step}");
        }
    }
    let normals = if args.grid_step.is_none() && args.estimate_normals.is_none() {
        read_normals(path, format).with_context(|| format!("cannot load normals from {}", path.display()))?
    } else {
        let mut cloud = read_cloud(path, format).with_context(|| format!("cannot load {}", path.display()))?;
        if let Some(step) = args.grid_step {
            cloud = box_grid_downsample(&cloud, step);
        }
        match args.estimate_normals {
            Some(k) => {
                let est = estimate_normals(&cloud, k)?;
                if !est.degenerate.is_empty() {
                    eprintln!("note: dropped {} points with an ill-defined normal", est.degenerate.len());
                }
                let normals = est.cloud.normals().expect("estimated normals");
                let mut drop = est.degenerate.iter().peekable();
                normals
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| drop.next_if(|d| **d == *i).is_none())
                    .map(|(_, n)| *n)
                    .collect()
            }
            None => match cloud.normals() {
                Some(n) => n.to_vec(),
                None => bail!("{} has no normals; pass --estimate-normals K", path.display()),
            },
        }
    };
    if normals.is_empty() {
        bail!("{} contains no normals", path.display());
    }
    Ok(normals)
}
