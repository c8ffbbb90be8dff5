//! Plain-text measure and direction files.
//!
//! Measure files carry a `format 1` header followed by one `weight x y z`
//! line per atom. Values print in Rust's shortest round-trip representation,
//! so write-read-write reproduces the file byte for byte.

use anyhow::{bail, Context, Result};
use std::path::Path;
use steer_core::ansatz::{Atom, SphereMeasure};
use steer_core::Vec3;

pub fn write_measure(path: &Path, measure: &SphereMeasure) -> Result<()> {
    let mut out = String::from("format 1\n");
    for a in measure.atoms() {
        out.push_str(&format!("{} {} {} {}\n", a.weight, a.n.x, a.n.y, a.n.z));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_measure(path: &Path) -> Result<SphereMeasure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "format 1")) => {}
        Some((_, other)) => bail!("{}:1: expected header 'format 1', got '{other}'", path.display()),
        None => bail!("{}: empty measure file", path.display()),
    }
    let mut atoms = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse().with_context(|| format!("{}:{}: bad number '{f}'", path.display(), ln + 1)))
            .collect::<Result<_>>()?;
        if fields.len() != 4 {
            bail!("{}:{}: expected 'weight x y z', got {} fields", path.display(), ln + 1, fields.len());
        }
        if fields[0] < 0.0 {
            bail!("{}:{}: negative weight {}", path.display(), ln + 1, fields[0]);
        }
        let n = Vec3::new(fields[1], fields[2], fields[3]);
        if (n.norm() - 1.0).abs() > 1e-9 {
            bail!("{}:{}: direction is not a unit vector (norm {})", path.display(), ln + 1, n.norm());
        }
        atoms.push(Atom { weight: fields[0], n });
    }
    if atoms.is_empty() {
        bail!("{}: measure has no atoms", path.display());
    }
    // detect the antipodal pairing layout used by symmetric grids
    let half = atoms.len() / 2;
    let symmetric = atoms.len() % 2 == 0
        && (0..half).all(|i| {
            (atoms[i].n + atoms[i + half].n).norm() < 1e-12
                && (atoms[i].weight - atoms[i + half].weight).abs() < 1e-15
        });
    // from_atoms renormalizes; restore the exact stored weights so the file
    // round-trips bitwise
    let weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
    let measure = SphereMeasure::from_atoms(atoms, symmetric, Vec3::zeros());
    Ok(measure.with_weights(&weights))
}

/// One `x y z` direction per line; vectors are normalized on read.
pub fn read_directions(path: &Path) -> Result<Vec<Vec3>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut dirs = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse().with_context(|| format!("{}:{}: bad number '{f}'", path.display(), ln + 1)))
            .collect::<Result<_>>()?;
        if fields.len() != 3 {
            bail!("{}:{}: expected 'x y z', got {} fields", path.display(), ln + 1, fields.len());
        }
        let v = Vec3::new(fields[0], fields[1], fields[2]);
        if v.norm() < 1e-9 {
            bail!("{}:{}: zero direction", path.display(), ln + 1);
        }
        dirs.push(v.normalize());
    }
    if dirs.is_empty() {
        bail!("{}: no directions found", path.display());
    }
    Ok(dirs)
}
