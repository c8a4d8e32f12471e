//! Top-down depth images.
//!
//! Heights are stored as unsigned 16-bit millimetres above the world
//! reference plane; `0` marks a sensor-invalid pixel. Pixel `(u, v)` is
//! column `u`, row `v`, and its centre sits at world
//! `((u + 0.5) * s, (v + 0.5) * s)` with `s` the pixel pitch in metres.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const INVALID: u16 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub mm_per_pixel: f64,
    pub data: Vec<u16>,
}

impl DepthImage {
    pub fn filled(width: usize, height: usize, mm_per_pixel: f64, value: u16) -> Self {
        Self {
            width,
            height,
            mm_per_pixel,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.data[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: u16) {
        self.data[v * self.width + u] = value;
    }

    /// Signed lookup, `None` outside the image.
    #[inline]
    pub fn get_i(&self, u: i64, v: i64) -> Option<u16> {
        if u < 0 || v < 0 || u as usize >= self.width || v as usize >= self.height {
            None
        } else {
            Some(self.get(u as usize, v as usize))
        }
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height
    }

    /// Smallest valid height, used as the bin-floor estimate.
    pub fn min_valid(&self) -> Option<u16> {
        self.data.iter().copied().filter(|&h| h != INVALID).min()
    }

    pub fn max_valid(&self) -> Option<u16> {
        self.data.iter().copied().filter(|&h| h != INVALID).max()
    }

    /// Pixel pitch in metres.
    pub fn pitch_m(&self) -> f64 {
        self.mm_per_pixel / 1000.0
    }

    pub fn pixel_center(&self, u: f64, v: f64) -> [f64; 2] {
        let s = self.pitch_m();
        [(u + 0.5) * s, (v + 0.5) * s]
    }

    pub fn world_to_pixel(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let s = self.pitch_m();
        let u = (x / s).floor();
        let v = (y / s).floor();
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            None
        } else {
            Some((u as usize, v as usize))
        }
    }

    /// Binary PGM (P5, maxval 65535, big-endian samples). The pixel pitch
    /// is carried in a header comment so images round-trip.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(
            w,
            "P5\n# mm_per_pixel {}\n{} {}\n65535\n",
            self.mm_per_pixel, self.width, self.height
        )?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for &h in &self.data {
            buf.extend_from_slice(&h.to_be_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_pgm(&mut out).expect("write to Vec");
        out
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        crate::pipeline::io::write_atomic(path, &self.to_pgm_bytes())
    }

    pub fn read_pgm<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut tokens: Vec<String> = Vec::new();
        let mut mm_per_pixel = 1.0;
        // header: magic, width, height, maxval; comments may carry the pitch
        while tokens.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line).map_err(|e| Error::Data(e.to_string()))? == 0 {
                return Err(Error::Data("truncated PGM header".into()));
            }
            let (content, comment) = match line.find('#') {
                Some(i) => (&line[..i], Some(&line[i + 1..])),
                None => (line.as_str(), None),
            };
            tokens.extend(content.split_whitespace().map(str::to_owned));
            if let Some(c) = comment {
                let mut it = c.split_whitespace();
                if it.next() == Some("mm_per_pixel") {
                    if let Some(val) = it.next().and_then(|s| s.parse().ok()) {
                        mm_per_pixel = val;
                    }
                }
            }
        }
        if tokens[0] != "P5" {
            return Err(Error::Data(format!("not a binary PGM: magic {}", tokens[0])));
        }
        let parse = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Data(format!("bad PGM header field {s:?}")))
        };
        let width = parse(&tokens[1])?;
        let height = parse(&tokens[2])?;
        let maxval = parse(&tokens[3])?;
        if maxval != 65535 {
            return Err(Error::Data(format!("expected 16-bit PGM, maxval {maxval}")));
        }
        let mut raw = vec![0u8; width * height * 2];
        r.read_exact(&mut raw)
            .map_err(|e| Error::Data(format!("truncated PGM payload: {e}")))?;
        let data = raw
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        Ok(Self {
            width,
            height,
            mm_per_pixel,
            data,
        })
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_pgm(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_keeps_pitch_and_samples() {
        let mut img = DepthImage::filled(5, 3, 2.5, 20);
        img.set(4, 2, 65535);
        img.set(0, 0, INVALID);
        let bytes = img.to_pgm_bytes();
        assert!(bytes.starts_with(b"P5\n"));
        let back = DepthImage::read_pgm(&bytes[..]).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_samples_are_big_endian() {
        let mut img = DepthImage::filled(1, 1, 1.0, 0);
        img.set(0, 0, 0x0102);
        let bytes = img.to_pgm_bytes();
        assert_eq!(&bytes[bytes.len() - 2..], &[0x01, 0x02]);
    }

    #[test]
    fn rejects_8bit_pgm() {
        let err = DepthImage::read_pgm(&b"P5\n1 1\n255\n\x00"[..]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn floor_estimate_skips_invalid() {
        let mut img = DepthImage::filled(2, 2, 1.0, 30);
        img.set(1, 1, INVALID);
        img.set(0, 1, 25);
        assert_eq!(img.min_valid(), Some(25));
    }
}
