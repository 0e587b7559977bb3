//! Stack I/O: directories of numbered 8-bit grayscale PNGs, or multi-page
//! grayscale TIFFs. Values are scaled from [0,255] to [0,1] on load; label
//! images are binarized at >127.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::stack::ImageStack;

/// Raw 8-bit sections of one volume, ordered by filename or page index.
struct RawStack {
    height: usize,
    width: usize,
    planes: Vec<Vec<u8>>,
}

fn read_png_dir(dir: &Path) -> Result<RawStack> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    if names.is_empty() {
        return Err(Error::Data(format!(
            "no PNG sections found in {}",
            dir.display()
        )));
    }
    names.sort();

    let mut planes = Vec::with_capacity(names.len());
    let mut dims = (0usize, 0usize);
    for (i, name) in names.iter().enumerate() {
        let img = image::open(name)
            .map_err(|e| Error::Image {
                path: name.clone(),
                source: e,
            })?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        if i == 0 {
            dims = (h, w);
        } else if (h, w) != dims {
            return Err(Error::Data(format!(
                "section {i} ({}) is {h}x{w}, expected {}x{}",
                name.display(),
                dims.0,
                dims.1
            )));
        }
        planes.push(img.into_raw());
    }
    Ok(RawStack {
        height: dims.0,
        width: dims.1,
        planes,
    })
}

fn read_multipage_tiff(path: &Path) -> Result<RawStack> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = tiff::decoder::Decoder::new(std::io::BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut planes = Vec::new();
    let mut dims = (0usize, 0usize);
    loop {
        let i = planes.len();
        let (w, h) = dec
            .dimensions()
            .map_err(|e| Error::Data(format!("{} page {i}: {e}", path.display())))?;
        let (h, w) = (h as usize, w as usize);
        if i == 0 {
            dims = (h, w);
        } else if (h, w) != dims {
            return Err(Error::Data(format!(
                "section {i} in {} is {h}x{w}, expected {}x{}",
                path.display(),
                dims.0,
                dims.1
            )));
        }
        let img = dec
            .read_image()
            .map_err(|e| Error::Data(format!("{} page {i}: {e}", path.display())))?;
        let plane = match img {
            tiff::decoder::DecodingResult::U8(v) => v,
            other => {
                return Err(Error::Data(format!(
                    "{} page {i}: expected 8-bit grayscale, got {:?} samples",
                    path.display(),
                    std::mem::discriminant(&other)
                )))
            }
        };
        if plane.len() != h * w {
            return Err(Error::Data(format!(
                "{} page {i}: expected {h}x{w} single-channel data, got {} samples",
                path.display(),
                plane.len()
            )));
        }
        planes.push(plane);
        if !dec.more_images() {
            break;
        }
        dec.next_image()
            .map_err(|e| Error::Data(format!("{} page {}: {e}", path.display(), i + 1)))?;
    }
    Ok(RawStack {
        height: dims.0,
        width: dims.1,
        planes,
    })
}

fn read_raw(path: &Path) -> Result<RawStack> {
    if path.is_dir() {
        read_png_dir(path)
    } else if path.is_file() {
        read_multipage_tiff(path)
    } else {
        Err(Error::Data(format!("no such path: {}", path.display())))
    }
}

/// Load a grayscale stack, with optional labels from a parallel directory
/// or multi-page file.
pub fn load_stack(path: &Path, label_path: Option<&Path>) -> Result<ImageStack> {
    let raw = read_raw(path)?;
    let sections: Vec<Vec<f32>> = raw
        .planes
        .iter()
        .map(|p| p.iter().map(|&v| v as f32 / 255.0).collect())
        .collect();

    let labels = match label_path {
        None => None,
        Some(lp) => {
            let lraw = read_raw(lp)?;
            if lraw.planes.len() != raw.planes.len() {
                return Err(Error::Data(format!(
                    "label stack has {} sections, image stack has {}",
                    lraw.planes.len(),
                    raw.planes.len()
                )));
            }
            if (lraw.height, lraw.width) != (raw.height, raw.width) {
                return Err(Error::Data(format!(
                    "label sections are {}x{}, image sections are {}x{}",
                    lraw.height, lraw.width, raw.height, raw.width
                )));
            }
            Some(
                lraw.planes
                    .iter()
                    .map(|p| p.iter().map(|&v| (v > 127) as u8).collect())
                    .collect(),
            )
        }
    };

    ImageStack::new(raw.height, raw.width, sections, labels)
}

/// Write a stack as zero-padded-numbered PNGs (`0000.png`, ...). Gray
/// values are quantized to 8 bits; labels, when present and `label_dir`
/// given, are written as 0/255 masks.
pub fn save_stack(stack: &ImageStack, dir: &Path, label_dir: Option<&Path>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (depth, h, w) = stack.axis_meta();
    for i in 0..depth {
        let bytes: Vec<u8> = stack
            .section(i)
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let path = dir.join(format!("{i:04}.png"));
        let img = image::GrayImage::from_raw(w as u32, h as u32, bytes)
            .expect("buffer sized from stack dims");
        img.save(&path).map_err(|e| Error::Image { path, source: e })?;
    }
    if let Some(ld) = label_dir {
        if stack.has_labels() {
            fs::create_dir_all(ld).map_err(|e| Error::io(ld, e))?;
            for i in 0..depth {
                let bytes: Vec<u8> = stack
                    .label(i)
                    .unwrap()
                    .iter()
                    .map(|&v| if v == 1 { 255 } else { 0 })
                    .collect();
                let path = ld.join(format!("{i:04}.png"));
                let img = image::GrayImage::from_raw(w as u32, h as u32, bytes)
                    .expect("buffer sized from stack dims");
                img.save(&path).map_err(|e| Error::Image { path, source: e })?;
            }
        }
    }
    Ok(())
}

/// Write a stack as one multi-page 8-bit grayscale TIFF.
pub fn save_stack_tiff(stack: &ImageStack, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = tiff::encoder::TiffEncoder::new(BufWriter::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let (depth, h, w) = stack.axis_meta();
    for i in 0..depth {
        let bytes: Vec<u8> = stack
            .section(i)
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        enc.write_image::<tiff::encoder::colortype::Gray8>(w as u32, h as u32, &bytes)
            .map_err(|e| Error::Data(format!("{} page {i}: {e}", path.display())))?;
    }
    Ok(())
}
