use serde::{Deserialize, Serialize};

use super::GuiError;
use crate::action::ScreenSize;
use crate::geom::Rect;
use crate::sim::{ElementMeta, ElementRender, Observation, RenderArtifact};

/// Half-open pixel window `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRegion {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl CropRegion {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.x0 as i32, self.y0 as i32, self.width(), self.height())
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.rect().contains(x, y)
    }
}

fn place(center: i64, size: u32, extent: u32) -> u32 {
    (center - (size / 2) as i64).clamp(0, (extent - size) as i64) as u32
}

/// Half-size window centred on the anchor, slid (never shrunk) to fit.
pub fn region_search_crop(screen: ScreenSize, anchor: Rect) -> Result<CropRegion, GuiError> {
    let full = Rect::new(0, 0, screen.w, screen.h);
    if !anchor.intersects(&full) {
        return Err(GuiError::AnchorOutOfScreen(anchor));
    }
    let (w, h) = (screen.w.div_ceil(2), screen.h.div_ceil(2));
    let (cx, cy) = anchor.center();
    let x0 = place(cx as i64, w, screen.w);
    let y0 = place(cy as i64, h, screen.h);
    Ok(CropRegion { x0, y0, x1: x0 + w, y1: y0 + h })
}

/// Keeps the elements that intersect `region`, rebased onto its origin.
pub fn crop_observation(obs: &Observation, region: CropRegion) -> Observation {
    let area = region.rect();
    let (dx, dy) = (region.x0 as i32, region.y0 as i32);
    let elements: Vec<ElementRender> = obs
        .screenshot
        .elements
        .iter()
        .filter(|e| e.bbox.intersects(&area))
        .map(|e| ElementRender { bbox: e.bbox.translate(dx, dy), ..e.clone() })
        .collect();
    let metadata: Vec<ElementMeta> = obs
        .metadata
        .iter()
        .filter(|m| m.bbox.intersects(&area))
        .map(|m| ElementMeta { bbox: m.bbox.translate(dx, dy), ..m.clone() })
        .collect();
    Observation { screenshot: RenderArtifact::new(region.width(), region.height(), elements), metadata }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HD: ScreenSize = ScreenSize { w: 1920, h: 1080 };

    fn at(cx: i32, cy: i32) -> Rect {
        Rect::new(cx, cy, 1, 1)
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(region_search_crop(HD, at(960, 540)).unwrap(), CropRegion { x0: 480, y0: 270, x1: 1440, y1: 810 });
        assert_eq!(region_search_crop(HD, at(100, 100)).unwrap(), CropRegion { x0: 0, y0: 0, x1: 960, y1: 540 });
        assert_eq!(region_search_crop(HD, at(1900, 1060)).unwrap(), CropRegion { x0: 960, y0: 540, x1: 1920, y1: 1080 });
    }

    #[test]
    fn odd_dimensions_round_up() {
        let r = region_search_crop(ScreenSize { w: 5, h: 3 }, at(4, 2)).unwrap();
        assert_eq!((r.width(), r.height()), (3, 2));
        assert_eq!(r, CropRegion { x0: 2, y0: 1, x1: 5, y1: 3 });
    }

    #[test]
    fn offscreen_anchor_is_rejected() {
        let e = region_search_crop(HD, Rect::new(1920, 0, 10, 10)).unwrap_err();
        assert!(matches!(e, GuiError::AnchorOutOfScreen(_)));
    }
}
