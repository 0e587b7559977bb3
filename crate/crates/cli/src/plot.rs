//! Plot rendering without a chart dependency: loss curves as fixed-palette
//! polylines, and qualitative panels that place input, ground truth, and
//! each run's binarized prediction side by side.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage};

use shiftseg_core::config::FullConfig;
use shiftseg_core::datapipe::ImageStack;
use shiftseg_core::eval::{binarize, tiled_inference};
use shiftseg_core::experiment::Datasets;
use shiftseg_core::nets::load_checkpoint;
use shiftseg_core::{Error, Result};

/// Chart geometry: margins keep the polylines off the axes.
const CHART_W: u32 = 720;
const CHART_H: u32 = 360;
const MARGIN: u32 = 12;

/// Gap between panel cells, mid-gray so it reads against both classes.
const PANEL_SEP: usize = 2;
const PANEL_SEP_GRAY: u8 = 128;

/// Fixed series palette; the legend sidecar spells out the mapping.
const PALETTE: [(&str, [u8; 3]); 8] = [
    ("seg", [214, 39, 40]),
    ("rec", [31, 119, 180]),
    ("d_pred", [44, 160, 44]),
    ("d_feat", [148, 103, 189]),
    ("g_pred", [255, 127, 14]),
    ("g_feat", [140, 86, 75]),
    ("lr", [127, 127, 127]),
    ("", [23, 190, 207]),
];

/// Everything `plot` emits: one curve image (plus a text legend) per run,
/// then one panel per test section.
pub fn render_all(data: &Datasets, runs: &[PathBuf], out: &Path) -> Result<()> {
    for (idx, run) in runs.iter().enumerate() {
        let name = run_name(run);
        let hist = run.join("history.csv");
        render_curves(
            &hist,
            &out.join(format!("curves_{idx}_{name}.png")),
            &out.join(format!("curves_{idx}_{name}.txt")),
        )?;
    }
    let mut prediction_columns = Vec::new();
    for run in runs {
        prediction_columns.push(run_predictions(run, &data.target_test)?);
    }
    let (h, w) = (data.target_test.height(), data.target_test.width());
    for s in 0..data.target_test.depth() {
        let mut cells: Vec<Vec<u8>> = Vec::with_capacity(2 + runs.len());
        cells.push(
            data.target_test
                .section(s)
                .iter()
                .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect(),
        );
        let gt = data
            .target_test
            .label(s)
            .ok_or_else(|| Error::Data("target test split has no labels".into()))?;
        cells.push(gt.iter().map(|&v| if v == 1 { 255 } else { 0 }).collect());
        for masks in &prediction_columns {
            cells.push(masks[s].iter().map(|&v| v * 255).collect());
        }
        let panel = compose_panel(&cells, h, w);
        let path = out.join(format!("panel_{s:04}.png"));
        panel
            .save(&path)
            .map_err(|e| Error::Image { path, source: e })?;
    }
    Ok(())
}

fn run_name(run: &Path) -> String {
    run.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

/// Binarized test-split predictions of a finished run, using that run's
/// own resolved config for tiling and threshold.
fn run_predictions(run: &Path, test: &ImageStack) -> Result<Vec<Vec<u8>>> {
    let cfg_path = run.join("config.txt");
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let cfg = FullConfig::parse(&text)?;
    let ckpt = final_checkpoint(run)?;
    let mut loaded = load_checkpoint(&ckpt)?;
    let probs = tiled_inference(&mut loaded.bundle, test, cfg.eval.tile, cfg.eval.overlap)?;
    probs
        .iter()
        .map(|p| binarize(p, cfg.eval.threshold))
        .collect()
}

/// The checkpoint with the highest iteration number in a run directory.
fn final_checkpoint(run: &Path) -> Result<PathBuf> {
    let entries = fs::read_dir(run).map_err(|e| Error::io(run, e))?;
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(run, e))?;
        let name = entry.file_name();
        let Some(iter) = name
            .to_string_lossy()
            .strip_prefix("ckpt_")
            .and_then(|s| s.parse::<u64>().ok())
        else {
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| iter > *b) {
            best = Some((iter, entry.path()));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::Data(format!("no checkpoint in {}", run.display())))
}

/// One loss-curve image from a history CSV: every column except the
/// iteration axis becomes a polyline in a fixed palette, documented by a
/// text legend next to the image.
pub fn render_curves(history: &Path, out_png: &Path, out_legend: &Path) -> Result<()> {
    let text = fs::read_to_string(history).map_err(|e| Error::io(history, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty history", history.display())))?
        .split(',')
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Data(format!("{} row {}: {e}", history.display(), ln + 2)))?;
        if vals.len() != header.len() {
            return Err(Error::Data(format!(
                "{} row {}: {} fields, expected {}",
                history.display(),
                ln + 2,
                vals.len(),
                header.len()
            )));
        }
        rows.push(vals);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (x_lo, x_hi) = bounds(&xs);
    let series: Vec<usize> = (1..header.len()).collect();
    let y_hi = rows
        .iter()
        .flat_map(|r| series.iter().map(|&c| r[c]))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);

    let mut img = RgbImage::from_pixel(CHART_W, CHART_H, Rgb([255, 255, 255]));
    let left = MARGIN as f64;
    let right = (CHART_W - MARGIN) as f64;
    let top = MARGIN as f64;
    let bottom = (CHART_H - MARGIN) as f64;
    for x in MARGIN..=(CHART_W - MARGIN) {
        img.put_pixel(x, CHART_H - MARGIN, Rgb([60, 60, 60]));
    }
    for y in MARGIN..=(CHART_H - MARGIN) {
        img.put_pixel(MARGIN, y, Rgb([60, 60, 60]));
    }
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let fx = if x_hi > x_lo { (x - x_lo) / (x_hi - x_lo) } else { 0.0 };
        let fy = if y_hi > 0.0 { (y / y_hi).clamp(0.0, 1.0) } else { 0.0 };
        (left + fx * (right - left), bottom - fy * (bottom - top))
    };
    let mut legend = String::new();
    for (si, &col) in series.iter().enumerate() {
        let name = header[col];
        let rgb = PALETTE
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| *c)
            .unwrap_or(PALETTE[PALETTE.len() - 1 - (si % 2)].1);
        legend.push_str(&format!("{name} = {},{},{}\n", rgb[0], rgb[1], rgb[2]));
        let mut prev: Option<(f64, f64)> = None;
        for row in &rows {
            let v = row[col];
            if !v.is_finite() {
                prev = None;
                continue;
            }
            let p = to_px(row[0], v);
            if let Some(q) = prev {
                draw_line(&mut img, q, p, Rgb(rgb));
            }
            prev = Some(p);
        }
    }
    img.save(out_png).map_err(|e| Error::Image {
        path: out_png.to_path_buf(),
        source: e,
    })?;
    fs::write(out_legend, legend).map_err(|e| Error::io(out_legend, e))
}

fn bounds(xs: &[f64]) -> (f64, f64) {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

/// Plain DDA segment, endpoints in pixel coordinates.
fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize + 1;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (a.0 + t * (b.0 - a.0)).round();
        let y = (a.1 + t * (b.1 - a.1)).round();
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Cells left to right with thin separators; each cell is one grayscale
/// section-sized image.
fn compose_panel(cells: &[Vec<u8>], h: usize, w: usize) -> GrayImage {
    let n = cells.len();
    let pw = n * w + (n - 1) * PANEL_SEP;
    let mut img = GrayImage::from_pixel(pw as u32, h as u32, Luma([PANEL_SEP_GRAY]));
    for (ci, cell) in cells.iter().enumerate() {
        let x0 = ci * (w + PANEL_SEP);
        for y in 0..h {
            for x in 0..w {
                img.put_pixel((x0 + x) as u32, y as u32, Luma([cell[y * w + x]]));
            }
        }
    }
    img
}
