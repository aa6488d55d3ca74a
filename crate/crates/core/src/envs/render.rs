use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

pub struct Palette;

impl Palette {
    pub const UNKNOWN: Rgb = [40, 40, 48];
    pub const FREE: Rgb = [228, 228, 220];
    pub const WALL: Rgb = [96, 64, 40];
    pub const AGENT: Rgb = [36, 96, 224];
    pub const TREASURE: Rgb = [236, 184, 24];
    pub const HIDER: Rgb = [216, 48, 48];
    pub const LANE: Rgb = [206, 170, 120];
    pub const BALL_PATH: Rgb = [176, 32, 32];
    pub const PIN: Rgb = [250, 250, 250];
}

/// Row-major RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&fill);
        }
        Frame {
            width,
            height,
            pixels,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.pixels[i..i + 3].copy_from_slice(&color);
        }
    }

    pub fn fill_rect(&mut self, x: usize, y: usize, w: usize, h: usize, color: Rgb) {
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                self.set(xx, yy, color);
            }
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc
                .write_header()
                .map_err(|e| Error::Protocol(format!("png header: {e}")))?;
            w.write_image_data(&self.pixels)
                .map_err(|e| Error::Protocol(format!("png data: {e}")))?;
        }
        Ok(out)
    }
}
