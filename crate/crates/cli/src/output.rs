//! Image I/O and the fixed text formats of the run artifacts.

use std::fmt::Write as _;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma};
use isslift::dataterms::Image;
use isslift::grid::{GridShape, ScalarField};

/// Reads a grayscale (or color, converted to luma) PGM/PNG image into `[0, 1]`
/// on the unit-size domain, `h = 1 / max(height, width)`.
pub fn read_image(path: &Path) -> Result<Image, String> {
    let img = image::open(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let shape = GridShape::new(h, w)
        .and_then(|s| s.with_spacing(1.0 / h.max(w) as f64))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let values = img.pixels().map(|p| f64::from(p.0[0]) / 65535.0).collect();
    Image::new(shape, values).map_err(|e| e.to_string())
}

/// 8-bit image of `u` clipped to `[lo, hi]`, as binary PGM (`P5`, maxval 255)
/// and optionally PNG.
pub fn write_gray8(u: &ScalarField, lo: f64, hi: f64, stem: &Path, png: bool) -> Result<(), String> {
    let s = u.shape();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(s.width() as u32, s.height() as u32, |c, r| {
        Luma([quantize(u.get(r as usize, c as usize), lo, hi, 255.0) as u8])
    });
    save(&buf, stem, png)
}

/// 16-bit image of `u` scaled over `[lo, hi]`, as binary PGM (`P5`, maxval
/// 65535, big-endian samples) and optionally PNG.
pub fn write_gray16(u: &ScalarField, lo: f64, hi: f64, stem: &Path, png: bool) -> Result<(), String> {
    let s = u.shape();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(s.width() as u32, s.height() as u32, |c, r| {
        Luma([quantize(u.get(r as usize, c as usize), lo, hi, 65535.0) as u16])
    });
    save(&buf, stem, png)
}

fn quantize(v: f64, lo: f64, hi: f64, max: f64) -> f64 {
    ((v - lo) / (hi - lo)).clamp(0.0, 1.0).mul_add(max, 0.5).floor()
}

fn save<P>(buf: &ImageBuffer<P, Vec<P::Subpixel>>, stem: &Path, png: bool) -> Result<(), String>
where
    P: image::PixelWithColorType,
    P::Subpixel: PgmSample,
    [P::Subpixel]: image::EncodableLayout,
{
    let pgm = stem.with_extension("pgm");
    let mut bytes = format!("P5\n{} {}\n{}\n", buf.width(), buf.height(), P::Subpixel::MAXVAL).into_bytes();
    for v in buf.as_raw() {
        v.push_be(&mut bytes);
    }
    std::fs::write(&pgm, bytes).map_err(|e| format!("cannot write {}: {e}", pgm.display()))?;
    if png {
        let p = stem.with_extension("png");
        buf.save_with_format(&p, ImageFormat::Png).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
    }
    Ok(())
}

/// A binary PGM sample: its maxval and big-endian encoding.
trait PgmSample {
    const MAXVAL: u32;
    fn push_be(&self, out: &mut Vec<u8>);
}

impl PgmSample for u8 {
    const MAXVAL: u32 = 255;
    fn push_be(&self, out: &mut Vec<u8>) {
        out.push(*self);
    }
}

impl PgmSample for u16 {
    const MAXVAL: u32 = 65535;
    fn push_be(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }
}

/// Plain decimal with 10 significant digits; `inf`/`NaN` spelled out.
pub fn sig10(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let decimals = |e: i32| (9 - e).clamp(0, 60) as usize;
    let e = v.abs().log10().floor() as i32;
    let s = format!("{:.*}", decimals(e), v);
    let rounded: f64 = s.parse().expect("formatted float parses");
    if rounded.abs() >= 10f64.powi(e + 1) {
        format!("{:.*}", decimals(e + 1), v)
    } else {
        s
    }
}

/// CSV with a header row, `,` separators and `\n` line endings.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Row-major text matrix, space-separated, 10 significant digits.
pub fn text_matrix(u: &ScalarField) -> String {
    let s = u.shape();
    let mut out = String::new();
    for r in 0..s.height() {
        let row: Vec<String> = (0..s.width()).map(|c| sig10(u.get(r, c))).collect();
        writeln!(out, "{}", row.join(" ")).expect("writing to a string");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
