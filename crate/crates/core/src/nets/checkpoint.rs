//! Checkpoint archives: one tar file holding the architecture, parameters,
//! optimizer state, and enough bookkeeping to resume bit-exactly.
//!
//! Layout inside the archive:
//!   arch.txt              ArchConfig as `key = value` lines
//!   meta.txt              iteration, seed, config digest, rng position,
//!                         per-group Adam step counts
//!   shapes.txt            `name = d0 d1 ...` per parameter, visit order
//!   params/<name>         raw little-endian f32 values
//!   opt/<group>/m/<name>  first-moment arrays (same layout as params)
//!   opt/<group>/v/<name>  second-moment arrays
//!
//! Loading rebuilds the bundle from arch.txt and validates every parameter
//! shape by name, both directions.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv;
use crate::rng;

use super::bundle::{build_bundle, ArchConfig, NetworkBundle};

/// Bookkeeping stored next to the weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub iter: u64,
    pub seed: u64,
    pub config_digest: String,
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    /// Adam step count per parameter group name.
    pub adam_t: BTreeMap<String, u64>,
}

/// A checkpoint read back from disk: the rebuilt bundle plus raw optimizer
/// arrays keyed `group/m/name` and `group/v/name`.
#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub bundle: NetworkBundle<f32>,
    pub meta: CheckpointMeta,
    pub opt: BTreeMap<String, Vec<f32>>,
}

fn arch_text(arch: &ArchConfig) -> String {
    kv::render([
        ("in_channels", arch.in_channels.to_string()),
        ("base_width", arch.base_width.to_string()),
        ("depth", arch.depth.to_string()),
        ("disc_width", arch.disc_width.to_string()),
        ("disc_depth", arch.disc_depth.to_string()),
    ])
}

fn parse_arch(text: &str) -> Result<ArchConfig> {
    let mut t = kv::Taker::new(kv::parse(text)?);
    let arch = ArchConfig {
        in_channels: t.require("in_channels")?,
        base_width: t.require("base_width")?,
        depth: t.require("depth")?,
        disc_width: t.require("disc_width")?,
        disc_depth: t.require("disc_depth")?,
    };
    t.finish()?;
    arch.validate()?;
    Ok(arch)
}

fn meta_text(meta: &CheckpointMeta) -> String {
    let mut pairs = vec![
        ("iter".to_string(), meta.iter.to_string()),
        ("seed".to_string(), meta.seed.to_string()),
        ("config_digest".to_string(), meta.config_digest.clone()),
        ("rng_stream".to_string(), meta.rng_stream.to_string()),
        ("rng_word_pos".to_string(), meta.rng_word_pos.to_string()),
    ];
    for (g, t) in &meta.adam_t {
        pairs.push((format!("adam_t.{g}"), t.to_string()));
    }
    kv::render(pairs.iter().map(|(k, v)| (k.as_str(), v.clone())))
}

fn parse_meta(text: &str) -> Result<CheckpointMeta> {
    let map = kv::parse(text)?;
    let mut adam_t = BTreeMap::new();
    for (k, v) in &map {
        if let Some(g) = k.strip_prefix("adam_t.") {
            let t = v
                .parse()
                .map_err(|_| Error::Config(format!("bad adam_t for group {g}: {v}")))?;
            adam_t.insert(g.to_string(), t);
        }
    }
    let mut t = kv::Taker::new(map.into_iter().filter(|(k, _)| !k.starts_with("adam_t.")).collect());
    let meta = CheckpointMeta {
        iter: t.require("iter")?,
        seed: t.require("seed")?,
        config_digest: t
            .take("config_digest")
            .ok_or_else(|| Error::Config("missing key `config_digest`".into()))?,
        rng_stream: t.require("rng_stream")?,
        rng_word_pos: t.require("rng_word_pos")?,
        adam_t,
    };
    t.finish()?;
    Ok(meta)
}

fn f32s_to_bytes(xs: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(xs.len() * 4);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn bytes_to_f32s(name: &str, bytes: &[u8]) -> Result<Vec<f32>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Data(format!(
            "{name}: payload length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn append<W: std::io::Write>(
    tar: &mut tar::Builder<W>,
    path: &str,
    data: &[u8],
) -> std::io::Result<()> {
    let mut header = tar::Header::new_gnu();
    header.set_size(data.len() as u64);
    header.set_mode(0o644);
    header.set_mtime(0);
    header.set_cksum();
    tar.append_data(&mut header, path, data)
}

/// Write a checkpoint archive. `opt` carries moment arrays keyed
/// `group/m/name` / `group/v/name`; pass an empty map before any optimizer
/// has run.
pub fn save_checkpoint(
    path: &Path,
    bundle: &mut NetworkBundle<f32>,
    meta: &CheckpointMeta,
    opt: &BTreeMap<String, Vec<f32>>,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut tar = tar::Builder::new(std::io::BufWriter::new(file));
    let io_err = |e: std::io::Error| Error::io(path, e);

    append(&mut tar, "arch.txt", arch_text(&bundle.arch).as_bytes()).map_err(io_err)?;
    append(&mut tar, "meta.txt", meta_text(meta).as_bytes()).map_err(io_err)?;

    let mut shapes = String::new();
    let mut entries: Vec<(String, Vec<u8>)> = Vec::new();
    bundle.visit_all(&mut |name, p| {
        let dims: Vec<String> = p.shape().iter().map(|d| d.to_string()).collect();
        shapes.push_str(&format!("{name} = {}\n", dims.join(" ")));
        entries.push((format!("params/{name}"), f32s_to_bytes(&p.v)));
    });
    append(&mut tar, "shapes.txt", shapes.as_bytes()).map_err(io_err)?;
    for (name, bytes) in &entries {
        append(&mut tar, name, bytes).map_err(io_err)?;
    }
    for (key, values) in opt {
        append(&mut tar, &format!("opt/{key}"), &f32s_to_bytes(values)).map_err(io_err)?;
    }
    tar.into_inner()
        .and_then(|w| w.into_inner().map_err(|e| e.into_error()))
        .and_then(|mut f| std::io::Write::flush(&mut f))
        .map_err(io_err)?;
    Ok(())
}

/// Read a checkpoint archive and rebuild its bundle, validating parameter
/// names and shapes exactly.
pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut archive = tar::Archive::new(std::io::BufReader::new(file));
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for entry in archive.entries().map_err(|e| Error::io(path, e))? {
        let mut entry = entry.map_err(|e| Error::io(path, e))?;
        let name = entry
            .path()
            .map_err(|e| Error::io(path, e))?
            .to_string_lossy()
            .into_owned();
        let mut buf = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
        files.insert(name, buf);
    }

    let text = |name: &str| -> Result<String> {
        files
            .get(name)
            .map(|b| String::from_utf8_lossy(b).into_owned())
            .ok_or_else(|| Error::Data(format!("checkpoint missing {name}")))
    };
    let arch = parse_arch(&text("arch.txt")?)?;
    let meta = parse_meta(&text("meta.txt")?)?;

    let mut shapes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for line in text("shapes.txt")?.lines() {
        let Some((name, dims)) = line.split_once('=') else {
            return Err(Error::Data(format!("bad shapes.txt line: {line}")));
        };
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|d| {
                d.parse()
                    .map_err(|_| Error::Data(format!("bad dim `{d}` in shapes.txt")))
            })
            .collect::<Result<_>>()?;
        shapes.insert(name.trim().to_string(), dims);
    }

    // The init rng is throwaway: every value is overwritten below.
    let mut init = rng::stream(0, rng::stream_id::INIT);
    let mut bundle: NetworkBundle<f32> = build_bundle(&arch, &mut init)?;
    let mut errs: Vec<String> = Vec::new();
    let mut used: usize = 0;
    bundle.visit_all(&mut |name, p| {
        match shapes.get(&name) {
            None => errs.push(format!("missing shape entry for {name}")),
            Some(dims) if dims != p.shape() => errs.push(format!(
                "{name}: archive shape {dims:?} != built shape {:?}",
                p.shape()
            )),
            Some(_) => used += 1,
        }
        match files.get(&format!("params/{name}")) {
            None => errs.push(format!("missing params/{name}")),
            Some(bytes) => match bytes_to_f32s(&name, bytes) {
                Err(e) => errs.push(e.to_string()),
                Ok(vals) if vals.len() != p.len() => errs.push(format!(
                    "{name}: {} values, expected {}",
                    vals.len(),
                    p.len()
                )),
                Ok(vals) => p.v.copy_from_slice(&vals),
            },
        }
    });
    if used != shapes.len() {
        let built: std::collections::BTreeSet<String> = {
            let mut names = std::collections::BTreeSet::new();
            bundle.visit_all(&mut |name, _| {
                names.insert(name);
            });
            names
        };
        for name in shapes.keys() {
            if !built.contains(name) {
                errs.push(format!("archive has unknown parameter {name}"));
            }
        }
    }
    if !errs.is_empty() {
        return Err(Error::Data(format!(
            "checkpoint {} failed validation: {}",
            path.display(),
            errs.join("; ")
        )));
    }

    let mut opt = BTreeMap::new();
    for (name, bytes) in &files {
        if let Some(key) = name.strip_prefix("opt/") {
            opt.insert(key.to_string(), bytes_to_f32s(key, bytes)?);
        }
    }
    Ok(LoadedCheckpoint { bundle, meta, opt })
}
