//! Placeholder rasterization of structured screenshots for endpoints that
//! require binary images. Boxes only; labels are not drawn.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

use crate::geom::Rect;
use crate::sim::RenderArtifact;

/// Downscale factor from screen pixels to placeholder pixels.
pub const SCALE: u32 = 4;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const OUTLINE: Rgb<u8> = Rgb([96, 96, 96]);
const SELECTED: Rgb<u8> = Rgb([198, 224, 255]);
const DISABLED: Rgb<u8> = Rgb([230, 230, 230]);
const FOCUSED: Rgb<u8> = Rgb([0, 90, 200]);

fn scaled(r: Rect, w: u32, h: u32) -> Option<(u32, u32, u32, u32)> {
    let clamp = |v: i64, max: u32| (v.max(0) as u64 / SCALE as u64).min(max as u64) as u32;
    let (x0, y0) = (clamp(r.x as i64, w), clamp(r.y as i64, h));
    let (x1, y1) = (clamp(r.right(), w), clamp(r.bottom(), h));
    (x1 > x0 && y1 > y0).then_some((x0, y0, x1, y1))
}

pub fn rasterize(shot: &RenderArtifact) -> RgbImage {
    let (w, h) = (shot.width.div_ceil(SCALE).max(1), shot.height.div_ceil(SCALE).max(1));
    let mut img = RgbImage::from_pixel(w, h, BACKGROUND);
    for e in &shot.elements {
        let Some((x0, y0, x1, y1)) = scaled(e.bbox, w, h) else { continue };
        let fill = if e.disabled {
            Some(DISABLED)
        } else if e.selected {
            Some(SELECTED)
        } else {
            None
        };
        let edge = if e.focused { FOCUSED } else { OUTLINE };
        for y in y0..y1 {
            for x in x0..x1 {
                if x == x0 || x == x1 - 1 || y == y0 || y == y1 - 1 {
                    img.put_pixel(x, y, edge);
                } else if let Some(c) = fill {
                    img.put_pixel(x, y, c);
                }
            }
        }
    }
    img
}

pub fn encode_png(shot: &RenderArtifact) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    rasterize(shot).write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding cannot fail");
    out.into_inner()
}
