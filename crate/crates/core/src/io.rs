//! On-disk collections and preprocessing transforms.
//!
//! A collection is a TOML manifest listing its views plus one long-format CSV
//! per view with columns `sample_index, feature_index, slab_index, value`.
//! Absent rows are masked entries. Values are written with 17 significant
//! digits, so `f64` data round-trips bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Collection, MaskedTensor3, PreprocessTransform, Tensor3, View};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Manifest file name inside a collection directory.
pub const MANIFEST: &str = "collection.toml";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestView {
    pub name: String,
    pub file: String,
    pub n: usize,
    pub d: usize,
    pub l: usize,
    /// Third-mode group id; views sharing an id share `U`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "view")]
    pub views: Vec<ManifestView>,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes `c` into `dir` (created if needed) as a manifest plus one CSV per
/// view.
pub fn write_collection<F: Scalar>(dir: &Path, c: &Collection<F>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut group_of = vec![None; c.n_views()];
    for (g, members) in c.declared_groups().iter().enumerate() {
        for &t in members {
            if t < group_of.len() {
                group_of[t] = Some(g);
            }
        }
    }
    let mut views = Vec::with_capacity(c.n_views());
    for (t, v) in c.views().iter().enumerate() {
        let file = format!("view{t}_{}.csv", sanitize(&v.name));
        let (n, d, l) = v.data.dims();
        let mut w = csv::Writer::from_path(dir.join(&file))?;
        w.write_record(["sample_index", "feature_index", "slab_index", "value"])?;
        for ((i, j, s), x) in v.data.observed_entries() {
            w.write_record([
                i.to_string(),
                j.to_string(),
                s.to_string(),
                format!("{:.16e}", x.to_f64_lossy()),
            ])?;
        }
        w.flush()?;
        views.push(ManifestView {
            name: v.name.clone(),
            file,
            n,
            d,
            l,
            group: group_of[t],
        });
    }
    let text = toml::to_string(&Manifest { views })
        .map_err(|e| Error::parse(path_str(&dir.join(MANIFEST)), e.to_string()))?;
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

/// Resolves `path` to a manifest: a directory means its `collection.toml`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST)
    } else {
        path.to_path_buf()
    }
}

/// Reads a collection from a manifest file or a directory holding one.
pub fn read_collection<F: Scalar>(path: &Path) -> Result<Collection<F>> {
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath)?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Error::parse(path_str(&mpath), e.to_string()))?;
    if manifest.views.is_empty() {
        return Err(Error::parse(path_str(&mpath), "no views"));
    }
    let base = mpath.parent().unwrap_or(Path::new("."));
    let mut views = Vec::with_capacity(manifest.views.len());
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (t, mv) in manifest.views.iter().enumerate() {
        views.push(View::new(mv.name.clone(), read_view(&base.join(&mv.file), mv)?));
        if let Some(g) = mv.group {
            groups.entry(g).or_default().push(t);
        }
    }
    Ok(Collection::new(views, groups.into_values().collect()))
}

fn read_view<F: Scalar>(path: &Path, mv: &ManifestView) -> Result<MaskedTensor3<F>> {
    let p = path_str(path);
    let (n, d, l) = (mv.n, mv.d, mv.l);
    if n == 0 || d == 0 || l == 0 {
        return Err(Error::parse(&p, format!("view '{}' has a zero extent", mv.name)));
    }
    let mut values = vec![F::zero(); n * d * l];
    let mut observed = vec![false; n * d * l];
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::parse(&p, format!("row {}: expected 4 fields", row + 1)));
        }
        let idx = |k: usize| -> Result<usize> {
            rec[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(&p, format!("row {}: {e}", row + 1)))
        };
        let (i, j, s) = (idx(0)?, idx(1)?, idx(2)?);
        if i >= n || j >= d || s >= l {
            return Err(Error::parse(
                &p,
                format!("row {}: index ({i}, {j}, {s}) outside {n}x{d}x{l}", row + 1),
            ));
        }
        let x: f64 = rec[3]
            .trim()
            .parse()
            .map_err(|e| Error::parse(&p, format!("row {}: {e}", row + 1)))?;
        if !x.is_finite() {
            return Err(Error::parse(&p, format!("row {}: non-finite value", row + 1)));
        }
        let o = (i * l + s) * d + j;
        if observed[o] {
            return Err(Error::parse(&p, format!("row {}: duplicate entry ({i}, {j}, {s})", row + 1)));
        }
        observed[o] = true;
        values[o] = F::of(x);
    }
    MaskedTensor3::new(Tensor3::from_raw(n, d, l, values)?, observed)
}

/// Writes a transform as CSV with columns `view, feature, slab, center,
/// scale`.
pub fn write_transform<F: Scalar>(path: &Path, tr: &PreprocessTransform<F>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["view", "feature", "slab", "center", "scale"])?;
    for (t, &(d, l)) in tr.dims().iter().enumerate() {
        for s in 0..l {
            for j in 0..d {
                w.write_record([
                    t.to_string(),
                    j.to_string(),
                    s.to_string(),
                    format!("{:.16e}", tr.center(t, j, s).to_f64_lossy()),
                    format!("{:.16e}", tr.scale(t, j, s).to_f64_lossy()),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a transform written by [`write_transform`]; `dims[t] = (D_t, L_t)`.
pub fn read_transform<F: Scalar>(path: &Path, dims: &[(usize, usize)]) -> Result<PreprocessTransform<F>> {
    let p = path_str(path);
    let mut center: Vec<Vec<Option<F>>> = dims.iter().map(|&(d, l)| vec![None; d * l]).collect();
    let mut scale = center.clone();
    let mut r = csv::Reader::from_path(path)?;
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| Error::parse(&p, format!("row {}: {m}", row + 1));
        if rec.len() != 5 {
            return Err(bad("expected 5 fields".into()));
        }
        let u = |k: usize| rec[k].trim().parse::<usize>().map_err(|e| bad(e.to_string()));
        let f = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| bad(e.to_string()));
        let (t, j, s) = (u(0)?, u(1)?, u(2)?);
        let Some(&(d, l)) = dims.get(t) else {
            return Err(bad(format!("unknown view {t}")));
        };
        if j >= d || s >= l {
            return Err(bad(format!("index ({j}, {s}) outside {d}x{l}")));
        }
        center[t][s * d + j] = Some(F::of(f(3)?));
        scale[t][s * d + j] = Some(F::of(f(4)?));
    }
    let complete = |v: Vec<Vec<Option<F>>>| -> Result<Vec<Vec<F>>> {
        v.into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<F>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::parse(&p, "transform does not cover every fiber"))
    };
    PreprocessTransform::new(dims.to_vec(), complete(center)?, complete(scale)?)
}

/// Writes any serializable value as JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::parse(path_str(path), e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path_str(path), e.to_string()))
}
