//! Rendering patterns to RGB rasters.
//!
//! Each burrow gets its own hue; within a burrow the brightness ramps with the
//! placement order, so the drawing history stays visible in the final image.
//! Pellets are drawn as aliased discs (integer distance test) which keeps the
//! output byte-identical across platforms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern_gen::{BurrowPattern, Pattern, Pellet, Point};

pub type Rgb = [u8; 3];

pub const CANVAS_SIZE: u32 = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CanvasSpec {
    pub width: u32,
    pub height: u32,
    /// The canvas shows `[-W, W]^2` in world units.
    pub world_half_width: f64,
    pub background: Rgb,
    pub pellet_radius: u32,
}

impl Default for CanvasSpec {
    fn default() -> Self {
        CanvasSpec {
            width: CANVAS_SIZE,
            height: CANVAS_SIZE,
            world_half_width: 40.0,
            background: [255, 255, 255],
            pellet_radius: 2,
        }
    }
}

impl CanvasSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width != CANVAS_SIZE || self.height != CANVAS_SIZE {
            return Err(Error::invalid(format!(
                "canvas must be {CANVAS_SIZE}x{CANVAS_SIZE}, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.world_half_width > 0.0) || !self.world_half_width.is_finite() {
            return Err(Error::invalid("world_half_width must be positive"));
        }
        if self.pellet_radius < 1 {
            return Err(Error::invalid("pellet_radius must be at least 1"));
        }
        Ok(())
    }

    /// Pixel containing `p`, which may lie outside the canvas.
    fn pixel_of(&self, p: Point) -> Option<(i64, i64)> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return None;
        }
        let span = 2.0 * self.world_half_width;
        let px = ((p.x + self.world_half_width) / span * self.width as f64).floor();
        let py = ((self.world_half_width - p.y) / span * self.height as f64).floor();
        // saturating float->int casts keep far-away points far away
        Some((px as i64, py as i64))
    }
}

/// Maps a world point to its pixel, with world `+y` pointing up. Points
/// outside the `[-W, W)` window yield `None`.
pub fn world_to_pixel(p: Point, spec: &CanvasSpec) -> Option<(u32, u32)> {
    let (px, py) = spec.pixel_of(p)?;
    let inside = (0..spec.width as i64).contains(&px) && (0..spec.height as i64).contains(&py);
    inside.then_some((px as u32, py as u32))
}

/// Row-major 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl Image {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "{} pixels do not fill a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, color: Rgb) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = color;
    }

    pub fn count_differing(&self, color: Rgb) -> usize {
        self.pixels.iter().filter(|&&p| p != color).count()
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        let raw = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width, self.height, raw).expect("buffer matches dimensions")
    }

    pub fn from_rgb_image(img: &image::RgbImage) -> Self {
        Image {
            width: img.width(),
            height: img.height(),
            pixels: img.pixels().map(|p| p.0).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Image::from_rgb_image(&img.into_rgb8()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Palette {
    pub base_hue: f64,
    pub hue_step: f64,
    pub saturation: f64,
    pub value_min: f64,
    pub value_max: f64,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            base_hue: 0.0,
            hue_step: 0.13,
            saturation: 0.8,
            value_min: 0.35,
            value_max: 1.0,
        }
    }
}

impl Palette {
    pub fn with_base_hue(mut self, hue: f64) -> Self {
        self.base_hue = hue;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("base_hue", self.base_hue),
            ("hue_step", self.hue_step),
            ("saturation", self.saturation),
            ("value_min", self.value_min),
            ("value_max", self.value_max),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Hue of the burrow at 0-based position `burrow` in the pattern.
    pub fn hue(&self, burrow: usize) -> f64 {
        (self.base_hue + burrow as f64 * self.hue_step).rem_euclid(1.0)
    }

    /// Brightness of the `rank`-th of `count` pellets; a lone pellet is
    /// drawn at full brightness.
    pub fn value(&self, rank: usize, count: usize) -> f64 {
        if count <= 1 {
            return self.value_max;
        }
        let t = rank as f64 / (count - 1) as f64;
        self.value_min + (self.value_max - self.value_min) * t
    }
}

/// Hexcone HSV to RGB; all inputs are fractions in `[0, 1]`.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Result<Rgb> {
    for (name, x) in [("hue", h), ("saturation", s), ("value", v)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!(
                "{name} must lie in [0, 1], got {x}"
            )));
        }
    }
    let h6 = (h * 6.0) % 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let to8 = |c: f64| (c * 255.0).round().clamp(0.0, 255.0) as u8;
    Ok([to8(r), to8(g), to8(b)])
}

fn burrow_colors(burrow: &BurrowPattern, position: usize, palette: &Palette) -> Vec<Rgb> {
    let hue = palette.hue(position);
    let n = burrow.pellets.len();
    // pellets are stored in order-stamp order, so the rank is the position
    (0..n)
        .map(|rank| {
            hsv_to_rgb(hue, palette.saturation, palette.value(rank, n))
                .expect("palette fractions validated")
        })
        .collect()
}

/// Assigns each pellet its display color.
pub fn colorize<'a>(pattern: &'a Pattern, palette: &Palette) -> Result<Vec<(&'a Pellet, Rgb)>> {
    palette.validate()?;
    let mut out = Vec::with_capacity(pattern.pellet_count());
    for (pos, burrow) in pattern.burrows.iter().enumerate() {
        let colors = burrow_colors(burrow, pos, palette);
        out.extend(burrow.pellets.iter().zip(colors));
    }
    Ok(out)
}

/// Offsets of the discrete disc `dx^2 + dy^2 <= r^2`.
pub fn disc_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

fn stamp(image: &mut Image, center: (i64, i64), offsets: &[(i64, i64)], color: Rgb) {
    let (w, h) = (image.width as i64, image.height as i64);
    for &(dx, dy) in offsets {
        let (x, y) = (center.0 + dx, center.1 + dy);
        if x >= 0 && x < w && y >= 0 && y < h {
            image.pixels[(y * w + x) as usize] = color;
        }
    }
}

/// Draws one burrow (at 0-based position `position` in its pattern) on top of
/// `image`.
pub fn draw_burrow(
    image: &mut Image,
    burrow: &BurrowPattern,
    position: usize,
    spec: &CanvasSpec,
    palette: &Palette,
) {
    let offsets = disc_offsets(spec.pellet_radius);
    let colors = burrow_colors(burrow, position, palette);
    for (pellet, color) in burrow.pellets.iter().zip(colors) {
        if let Some(center) = spec.pixel_of(pellet.position) {
            stamp(image, center, &offsets, color);
        }
    }
}

pub fn blank(spec: &CanvasSpec) -> Image {
    Image::filled(spec.width, spec.height, spec.background)
}

/// Renders the pattern; later pellets overdraw earlier ones, pellets beyond
/// the canvas are clipped.
pub fn rasterize(pattern: &Pattern, spec: &CanvasSpec, palette: &Palette) -> Result<Image> {
    spec.validate()?;
    palette.validate()?;
    let mut image = blank(spec);
    for (pos, burrow) in pattern.burrows.iter().enumerate() {
        draw_burrow(&mut image, burrow, pos, spec, palette);
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern_gen::{generate_pattern, uniform_configs, DesignParams};

    fn pattern_with(points: &[Point]) -> Pattern {
        let pellets = points
            .iter()
            .enumerate()
            .map(|(k, &position)| Pellet {
                position,
                burrow: 1,
                trench: 1,
                index: k + 1,
                order: k as u64,
            })
            .collect();
        Pattern {
            seed: 0,
            burrows: vec![BurrowPattern {
                index: 1,
                center: Point::new(0.0, 0.0),
                template: crate::pattern_gen::Template::Rtl,
                noise_mean: 0.0,
                noise_variance: 0.0,
                num_trenches: 1,
                trenches: vec![],
                pellets,
            }],
            params_per_burrow: vec![DesignParams::default()],
        }
    }

    #[test]
    fn world_to_pixel_examples() {
        let spec = CanvasSpec::default();
        assert_eq!(
            world_to_pixel(Point::new(0.0, 0.0), &spec),
            Some((256, 256))
        );
        assert_eq!(world_to_pixel(Point::new(-40.0, 40.0), &spec), Some((0, 0)));
        assert_eq!(world_to_pixel(Point::new(1000.0, 0.0), &spec), None);
        assert_eq!(world_to_pixel(Point::new(40.0, 0.0), &spec), None);
        assert_eq!(world_to_pixel(Point::new(f64::NAN, 0.0), &spec), None);
    }

    #[test]
    fn in_window_points_land_on_canvas() {
        let spec = CanvasSpec::default();
        let w = spec.world_half_width;
        for i in 0..=100 {
            for j in 0..=100 {
                let x = -w + 2.0 * w * i as f64 / 100.0 * 0.999_999;
                let y = -w + 2.0 * w * j as f64 / 100.0 * 0.999_999 + 1e-9;
                let (px, py) = world_to_pixel(Point::new(x, y), &spec).expect("inside");
                assert!(px < spec.width && py < spec.height);
            }
        }
    }

    #[test]
    fn hsv_examples() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0).unwrap(), [255, 0, 0]);
        for h in [0.0, 0.2, 0.5, 0.99] {
            assert_eq!(hsv_to_rgb(h, 0.0, 1.0).unwrap(), [255, 255, 255]);
        }
        // hexcone: sector 2 at f = 0, so (p, v, t) = (0, 0.5, 0) * 255
        assert_eq!(hsv_to_rgb(1.0 / 3.0, 1.0, 0.5).unwrap(), [0, 128, 0]);
        assert_eq!(hsv_to_rgb(1.0, 1.0, 1.0).unwrap(), [255, 0, 0]);
        assert!(hsv_to_rgb(1.2, 0.5, 0.5).is_err());
        assert!(hsv_to_rgb(0.5, -0.1, 0.5).is_err());
    }

    #[test]
    fn hsv_matches_reference_table() {
        // standard primaries and secondaries at full saturation and value
        let table = [
            (1.0 / 6.0, [255, 255, 0]),
            (2.0 / 6.0, [0, 255, 0]),
            (3.0 / 6.0, [0, 255, 255]),
            (4.0 / 6.0, [0, 0, 255]),
            (5.0 / 6.0, [255, 0, 255]),
        ];
        for (h, rgb) in table {
            assert_eq!(hsv_to_rgb(h, 1.0, 1.0).unwrap(), rgb, "h = {h}");
        }
    }

    #[test]
    fn colorize_hues_and_ramp() {
        let palette = Palette::default();
        let single = pattern_with(&[Point::new(0.0, 0.0)]);
        let colored = colorize(&single, &palette).unwrap();
        let expected = hsv_to_rgb(0.0, palette.saturation, palette.value_max).unwrap();
        assert_eq!(colored[0].1, expected);

        assert_eq!(palette.hue(0), 0.0);
        assert!((palette.hue(1) - 0.13).abs() < 1e-15);
        assert!((palette.value(0, 5) - 0.35).abs() < 1e-15);
        assert!((palette.value(4, 5) - 1.0).abs() < 1e-15);
        assert!(
            (Palette {
                base_hue: 0.95,
                ..palette
            }
            .hue(1)
                - 0.08)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn disc_of_radius_two_has_thirteen_pixels() {
        // brute-force scan of a 9x9 window around the center
        let count = (-4i64..=4)
            .flat_map(|dy| (-4i64..=4).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| dx * dx + dy * dy <= 4)
            .count();
        assert_eq!(count, 13);
        assert_eq!(disc_offsets(2).len(), 13);

        let spec = CanvasSpec::default();
        let img = rasterize(
            &pattern_with(&[Point::new(0.0, 0.0)]),
            &spec,
            &Palette::default(),
        )
        .unwrap();
        assert_eq!(img.count_differing(spec.background), 13);
        assert_ne!(img.get(256, 256), spec.background);
        assert_ne!(img.get(258, 256), spec.background);
        assert_eq!(img.get(258, 258), spec.background);
    }

    #[test]
    fn empty_and_clipped_patterns_render_background() {
        let spec = CanvasSpec::default();
        let palette = Palette::default();
        let empty = rasterize(&pattern_with(&[]), &spec, &palette).unwrap();
        assert_eq!(empty, blank(&spec));
        let far = rasterize(&pattern_with(&[Point::new(400.0, 0.0)]), &spec, &palette).unwrap();
        assert_eq!(far, empty);
    }

    #[test]
    fn later_pellets_overdraw_earlier_ones() {
        let spec = CanvasSpec::default();
        let palette = Palette::default();
        let pattern = pattern_with(&[Point::new(1.0, 1.0), Point::new(1.0, 1.0)]);
        let img = rasterize(&pattern, &spec, &palette).unwrap();
        let (px, py) = world_to_pixel(Point::new(1.0, 1.0), &spec).unwrap();
        let last = hsv_to_rgb(0.0, palette.saturation, palette.value_max).unwrap();
        assert_eq!(img.get(px, py), last);
    }

    #[test]
    fn rasterize_is_pure_and_bounded() {
        let spec = CanvasSpec::default();
        let palette = Palette::default();
        let pattern = generate_pattern(&uniform_configs(&DesignParams::default()), 3).unwrap();
        let a = rasterize(&pattern, &spec, &palette).unwrap();
        let b = rasterize(&pattern, &spec, &palette).unwrap();
        assert_eq!(a, b);
        assert!(a.count_differing(spec.background) <= pattern.pellet_count() * 13);
    }

    #[test]
    fn invalid_canvas_is_rejected() {
        let spec = CanvasSpec {
            width: 256,
            ..CanvasSpec::default()
        };
        assert!(rasterize(&pattern_with(&[]), &spec, &Palette::default()).is_err());
        let spec = CanvasSpec {
            pellet_radius: 0,
            ..CanvasSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
